//! Model two: the platform observed at matching start.
//!
//! A match followed by a service is one generalized Erlang service time of
//! order 2 (phase 1 = matching at rate `gamma`, phase 2 = service at rate
//! `mu`), so the platform is an M/PH/N queue. Level 0 holds the states with
//! no waiting seeker and `n = 0..N-1` busy owners, each busy owner carrying
//! its current phase; level `k >= 1` has all `N` owners busy and `k - 1`
//! seekers waiting.
//!
//! Phase tuples `(i_1, .., i_n)` are ordered lexicographically, which is the
//! order produced by Kronecker products of per-owner factors.

use crate::error::{QbdError, Result};
use crate::linalg::{kron_chain, kron_product, kron_sum, BlockTridiagonal, DenseMatrix};
use crate::params::ModelParams;
use crate::qbd::Qbd;

/// Largest supported owner count; level blocks are `2^N x 2^N`.
pub const MAX_OWNERS_TWO: usize = 10;

/// A phase-type representation `(alpha, T, T0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhRep {
    pub alpha: Vec<f64>,
    pub t: DenseMatrix,
    pub t0: Vec<f64>,
}

impl PhRep {
    pub fn order(&self) -> usize {
        self.alpha.len()
    }

    /// `alpha (-T)^{-1} e`.
    pub fn mean(&self) -> Result<f64> {
        let neg = self.t.scale(-1.0);
        let x = crate::linalg::solve_dense(&neg, &vec![1.0; self.order()])?;
        Ok(crate::linalg::dot(&self.alpha, &x))
    }

    /// `k! alpha (-T)^{-k} e`.
    pub fn moment(&self, k: usize) -> Result<f64> {
        let neg = crate::linalg::Lu::factor(&self.t.scale(-1.0))?;
        let mut x = vec![1.0; self.order()];
        let mut fact = 1.0;
        for i in 1..=k {
            x = neg.solve(&x);
            fact *= i as f64;
        }
        Ok(fact * crate::linalg::dot(&self.alpha, &x))
    }

    /// `T0 alpha`, the exit-and-restart matrix.
    pub fn restart(&self) -> DenseMatrix {
        kron_product(&DenseMatrix::column(&self.t0), &DenseMatrix::row(&self.alpha))
    }
}

/// Matching (rate `gamma`) followed by service (rate `mu`).
pub fn ph_generalized_erlang(gamma: f64, mu: f64) -> Result<PhRep> {
    if !(gamma > 0.0 && mu > 0.0) {
        return Err(QbdError::InvalidParams(format!(
            "generalized Erlang needs positive rates, got gamma={gamma}, mu={mu}"
        )));
    }
    Ok(PhRep {
        alpha: vec![1.0, 0.0],
        t: DenseMatrix::from_rows(&[vec![-gamma, gamma], vec![0.0, -mu]]),
        t0: vec![0.0, mu],
    })
}

/// Flat index of a phase tuple within its sub-level: the tuple read as a
/// base-2 numeral with digits `i_k - 1`, most significant first.
pub fn phase_index(n: usize, tuple: &[u8]) -> Result<usize> {
    if tuple.len() != n {
        return Err(QbdError::InvalidPhase(format!(
            "expected {n} entries, got {}",
            tuple.len()
        )));
    }
    tuple.iter().try_fold(0usize, |acc, &p| match p {
        1 | 2 => Ok(acc * 2 + (p - 1) as usize),
        other => Err(QbdError::InvalidPhase(format!("phase {other} not in {{1, 2}}"))),
    })
}

pub fn index_phase(n: usize, index: usize) -> Result<Vec<u8>> {
    if index >= 1usize << n {
        return Err(QbdError::InvalidPhase(format!("index {index} >= 2^{n}")));
    }
    Ok((0..n).rev().map(|bit| ((index >> bit) & 1) as u8 + 1).collect())
}

/// Position of sub-level `n` inside level 0: `2^n - 1`.
pub fn level0_offset(n: usize) -> usize {
    (1usize << n) - 1
}

/// `T ⊕ T ⊕ .. ⊕ T` (`n` terms); `[0]` for `n = 0`.
pub fn kron_sum_power(t: &DenseMatrix, n: usize) -> DenseMatrix {
    (0..n).fold(DenseMatrix::scalar(0.0), |acc, _| {
        kron_sum(&acc, t).expect("square operands")
    })
}

fn identity_power(n: usize) -> DenseMatrix {
    DenseMatrix::identity(1usize << n)
}

/// Sum over positions `p` of `I ⊗ .. ⊗ X ⊗ .. ⊗ I` (`n` factors, `X` at `p`).
fn positional_sum(x: &DenseMatrix, n: usize) -> DenseMatrix {
    let eye = DenseMatrix::identity(2);
    let mut total: Option<DenseMatrix> = None;
    for p in 0..n {
        let factors: Vec<&DenseMatrix> = (0..n).map(|q| if q == p { x } else { &eye }).collect();
        let term = kron_chain(factors);
        total = Some(match total {
            None => term,
            Some(acc) => acc.add(&term).expect("equal shapes"),
        });
    }
    total.expect("n >= 1")
}

/// `D(n) = I^{⊗n} ⊗ alpha`: a new busy owner is appended in phase 1.
pub fn start_block(ph: &PhRep, n: usize) -> DenseMatrix {
    kron_product(&identity_power(n), &DenseMatrix::row(&ph.alpha))
}

/// `C(n)`, `2^n x 2^(n-1)`: an owner in phase 2 completes and its coordinate
/// is removed, the remaining owners keep their order.
pub fn completion_block(ph: &PhRep, n: usize) -> DenseMatrix {
    assert!(n >= 1);
    positional_sum(&DenseMatrix::column(&ph.t0), n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QbdBlocksTwo {
    pub n_owners: usize,
    pub ph: PhRep,
    /// Level 0 as sub-levels `n = 0..N-1`, sizes `2^n`.
    pub f1: BlockTridiagonal,
    /// Last sub-level of level 0 to level 1, `lambda D(N-1)`.
    pub f0_block: DenseMatrix,
    /// Level 1 to the last sub-level of level 0, `C(N)`.
    pub f2_block: DenseMatrix,
    /// Level up, `lambda I`.
    pub a0: DenseMatrix,
    /// Within a level, `T^{⊕N} - lambda I`.
    pub a1: DenseMatrix,
    /// Level down: a completion immediately restarts with the next seeker.
    pub a2: DenseMatrix,
}

impl QbdBlocksTwo {
    pub fn level0_size(&self) -> usize {
        (1usize << self.n_owners) - 1
    }

    pub fn repeat_size(&self) -> usize {
        1usize << self.n_owners
    }

    pub fn f1_dense(&self) -> DenseMatrix {
        self.f1.to_dense()
    }

    /// `F0`, `(2^N - 1) x 2^N`.
    pub fn f0(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.level0_size(), self.repeat_size());
        m.set_block(self.level0_size() - self.f0_block.rows(), 0, &self.f0_block);
        m
    }

    /// `F2`, `2^N x (2^N - 1)`.
    pub fn f2(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.repeat_size(), self.level0_size());
        m.set_block(0, self.level0_size() - self.f2_block.cols(), &self.f2_block);
        m
    }

    pub fn qbd(&self) -> Qbd {
        Qbd::new(
            self.f1.clone(),
            self.f0_block.clone(),
            self.f2_block.clone(),
            self.a2.clone(),
            self.a1.clone(),
            self.a0.clone(),
        )
        .expect("model-two blocks are consistent by construction")
    }
}

pub fn check_capacity(n: usize) -> Result<()> {
    if n > MAX_OWNERS_TWO {
        return Err(QbdError::Capacity {
            n,
            cap: MAX_OWNERS_TWO,
            phases: 1u64 << n.min(63),
        });
    }
    Ok(())
}

pub fn build_blocks_two(params: &ModelParams) -> Result<QbdBlocksTwo> {
    params.validate()?;
    let n = params.n_owners;
    check_capacity(n)?;
    let lam = params.lambda;
    let ph = ph_generalized_erlang(params.gamma, params.mu)?;

    let diag: Vec<DenseMatrix> = (0..n)
        .map(|k| {
            kron_sum_power(&ph.t, k)
                .sub(&identity_power(k).scale(lam))
                .expect("square")
        })
        .collect();
    let upper: Vec<DenseMatrix> = (0..n - 1).map(|k| start_block(&ph, k).scale(lam)).collect();
    let lower: Vec<DenseMatrix> = (1..n).map(|k| completion_block(&ph, k)).collect();
    let f1 = BlockTridiagonal::new(diag, upper, lower)?;

    let a1 = kron_sum_power(&ph.t, n).sub(&identity_power(n).scale(lam))?;
    Ok(QbdBlocksTwo {
        n_owners: n,
        f0_block: start_block(&ph, n - 1).scale(lam),
        f2_block: completion_block(&ph, n),
        a0: identity_power(n).scale(lam),
        a1,
        a2: positional_sum(&ph.restart(), n),
        f1,
        ph,
    })
}

pub fn assemble_truncated_generator(params: &ModelParams, levels: usize) -> Result<DenseMatrix> {
    build_blocks_two(params)?.qbd().assemble_truncated(levels)
}

/// Stationary vector of the single-owner phase process `T + T0 alpha`.
pub fn drift_vector_two(gamma: f64, mu: f64) -> [f64; 2] {
    [mu / (gamma + mu), gamma / (gamma + mu)]
}

/// `omega ⊗ .. ⊗ omega` (`n` factors), the stationary vector of `A0+A1+A2`.
pub fn drift_theta(gamma: f64, mu: f64, n: usize) -> Vec<f64> {
    let w = DenseMatrix::row(&drift_vector_two(gamma, mu));
    let factors: Vec<&DenseMatrix> = std::iter::repeat_n(&w, n).collect();
    kron_chain(factors).as_slice().to_vec()
}

//! Model one: the platform observed at matching completion.
//!
//! State `(i, j)`: `i` seekers waiting (including those being matched), `j`
//! idle owners. Transitions:
//!
//! * arrival `(i, j) -> (i + 1, j)` at rate `lambda`
//! * match `(i, j) -> (i - 1, j - 1)` at rate `min(i, j) gamma`
//! * service completion `(i, j) -> (i, j + 1)` at rate `(N - j) mu`
//!
//! Level 0 holds `i = 0..N-1` (each a sub-level of `N + 1` phases `j`); level
//! `k >= 1` holds `i = N + k - 1`.

use crate::error::{QbdError, Result};
use crate::linalg::{BlockTridiagonal, DenseMatrix};
use crate::params::{traffic_intensity, ModelParams};
use crate::qbd::{Model, Qbd};
use crate::solver::{rg_factorization, RgFactorization, SolverOptions, StationarySolution};

/// Maps states `(i, j)` to `(level, phase)` and back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndexOne {
    pub n_owners: usize,
}

impl StateIndexOne {
    pub fn new(n_owners: usize) -> Self {
        Self { n_owners }
    }

    pub fn phases(&self) -> usize {
        self.n_owners + 1
    }

    pub fn level0_size(&self) -> usize {
        self.n_owners * (self.n_owners + 1)
    }

    /// Level-0 phases are ordered `i` first, then `j`: `i (N + 1) + j`.
    pub fn to_level_phase(&self, i: usize, j: usize) -> Result<(usize, usize)> {
        let n = self.n_owners;
        if j > n {
            return Err(QbdError::InvalidParams(format!("idle owners {j} > N = {n}")));
        }
        if i < n {
            Ok((0, i * (n + 1) + j))
        } else {
            Ok((i - n + 1, j))
        }
    }

    pub fn to_state(&self, level: usize, phase: usize) -> Result<(usize, usize)> {
        let n = self.n_owners;
        if level == 0 {
            if phase >= self.level0_size() {
                return Err(QbdError::InvalidParams(format!("level-0 phase {phase} out of range")));
            }
            Ok((phase / (n + 1), phase % (n + 1)))
        } else {
            if phase > n {
                return Err(QbdError::InvalidParams(format!("phase {phase} out of range")));
            }
            Ok((n + level - 1, phase))
        }
    }

    /// Flat index in a truncated generator.
    pub fn flat(&self, i: usize, j: usize) -> Result<usize> {
        let (level, phase) = self.to_level_phase(i, j)?;
        Ok(if level == 0 {
            phase
        } else {
            self.level0_size() + (level - 1) * self.phases() + phase
        })
    }

    pub fn from_flat(&self, idx: usize) -> Result<(usize, usize)> {
        let n0 = self.level0_size();
        if idx < n0 {
            self.to_state(0, idx)
        } else {
            let rest = idx - n0;
            self.to_state(rest / self.phases() + 1, rest % self.phases())
        }
    }
}

/// Block matrices of the model-one generator.
#[derive(Debug, Clone, PartialEq)]
pub struct QbdBlocksOne {
    pub n_owners: usize,
    /// Level down (matching completions), subdiagonal `(gamma, 2 gamma, ..)`.
    pub a: DenseMatrix,
    /// Within a level.
    pub b: DenseMatrix,
    /// Level up, `lambda I`.
    pub c: DenseMatrix,
    /// Level 0 as a chain of `N` sub-levels `i = 0..N-1`.
    pub b0: BlockTridiagonal,
    /// Nonzero block of `A0`: level 1 to sub-level `N - 1`.
    pub a0_block: DenseMatrix,
    /// Nonzero block of `C0`: sub-level `N - 1` to level 1.
    pub c0_block: DenseMatrix,
}

impl QbdBlocksOne {
    pub fn level0_size(&self) -> usize {
        self.n_owners * (self.n_owners + 1)
    }

    pub fn repeat_size(&self) -> usize {
        self.n_owners + 1
    }

    /// `A0 = (0 ... 0 B2^(N))`, `(N+1) x N(N+1)`.
    pub fn a0(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.repeat_size(), self.level0_size());
        m.set_block(0, self.level0_size() - self.repeat_size(), &self.a0_block);
        m
    }

    /// `C0`: zeros stacked over `B0^(N-1)`, `N(N+1) x (N+1)`.
    pub fn c0(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.level0_size(), self.repeat_size());
        m.set_block(self.level0_size() - self.repeat_size(), 0, &self.c0_block);
        m
    }

    pub fn b0_dense(&self) -> DenseMatrix {
        self.b0.to_dense()
    }

    pub fn qbd(&self) -> Qbd {
        Qbd::new(
            self.b0.clone(),
            self.c0_block.clone(),
            self.a0_block.clone(),
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
        )
        .expect("model-one blocks are consistent by construction")
    }
}

/// Sub-level `k` to `k + 1`: `lambda I`.
fn arrival_block(params: &ModelParams) -> DenseMatrix {
    DenseMatrix::identity(params.n_owners + 1).scale(params.lambda)
}

/// Sub-level `k` to `k - 1`: `(j) -> (j - 1)` at `min(j, k) gamma`.
fn matching_block(params: &ModelParams, k: usize) -> DenseMatrix {
    let n = params.n_owners;
    let mut m = DenseMatrix::zeros(n + 1, n + 1);
    for j in 1..=n {
        m[(j, j - 1)] = j.min(k) as f64 * params.gamma;
    }
    m
}

/// Within sub-level `k`: services push `j` up, diagonal balances the row.
fn local_block(params: &ModelParams, k: usize) -> DenseMatrix {
    let n = params.n_owners;
    let mut m = DenseMatrix::zeros(n + 1, n + 1);
    for j in 0..=n {
        let serve = (n - j) as f64 * params.mu;
        m[(j, j)] = -(params.lambda + j.min(k) as f64 * params.gamma + serve);
        if j < n {
            m[(j, j + 1)] = serve;
        }
    }
    m
}

pub fn build_repeated_blocks(params: &ModelParams) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
    let n = params.n_owners;
    // i >= N >= j, so min(i, j) = j throughout the repeating levels.
    (matching_block(params, n), local_block(params, n), arrival_block(params))
}

/// `(A0 block, B0, C0 block)` for level 0.
pub fn build_boundary_blocks(params: &ModelParams) -> Result<(DenseMatrix, BlockTridiagonal, DenseMatrix)> {
    params.validate()?;
    let n = params.n_owners;
    let diag: Vec<DenseMatrix> = (0..n).map(|k| local_block(params, k)).collect();
    let upper: Vec<DenseMatrix> = (0..n.saturating_sub(1)).map(|_| arrival_block(params)).collect();
    let lower: Vec<DenseMatrix> = (1..n).map(|k| matching_block(params, k)).collect();
    let b0 = BlockTridiagonal::new(diag, upper, lower)?;
    Ok((matching_block(params, n), b0, arrival_block(params)))
}

pub fn build_blocks_one(params: &ModelParams) -> Result<QbdBlocksOne> {
    let (a0_block, b0, c0_block) = build_boundary_blocks(params)?;
    let (a, b, c) = build_repeated_blocks(params);
    Ok(QbdBlocksOne {
        n_owners: params.n_owners,
        a,
        b,
        c,
        b0,
        a0_block,
        c0_block,
    })
}

/// Reflecting truncation of the model-one generator, order `N(N+1) + K(N+1)`.
pub fn assemble_truncated_generator(params: &ModelParams, levels: usize) -> Result<DenseMatrix> {
    build_blocks_one(params)?.qbd().assemble_truncated(levels)
}

/// The sojourn chain: model one with the states `(0, 0..N-1)` merged into a
/// single absorbing state and `(0, N)` dropped.
///
/// Transient states are sub-levels `i = 1..N-1` of level 0 followed by the
/// repeating levels. The initial vector places the mass of `(0, *)` on the
/// absorbing state and otherwise copies the stationary distribution.
#[derive(Debug, Clone)]
pub struct AbsorbingChainOne {
    pub n_owners: usize,
    /// Sub-levels `1..N-1` of level 0; `None` when `N = 1`.
    pub t11: Option<BlockTridiagonal>,
    /// Last transient boundary sub-level to level 1.
    pub t12: DenseMatrix,
    /// Level 1 to the last transient boundary sub-level.
    pub t21: DenseMatrix,
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
    /// Absorption rates out of the boundary transient states.
    pub phi_tilde: Vec<f64>,
    /// Absorption rates out of level 1 (nonzero only when `N = 1`).
    pub phi_level_one: Vec<f64>,
    pub omega_delta: f64,
    /// Initial mass on the transient boundary sub-levels.
    pub omega_boundary: Vec<f64>,
    /// Initial mass on level 1; level `k` carries `omega_level_one R^(k-1)`.
    pub omega_level_one: Vec<f64>,
    pub rg: RgFactorization,
}

impl AbsorbingChainOne {
    pub fn boundary_size(&self) -> usize {
        self.omega_boundary.len()
    }

    pub fn phases(&self) -> usize {
        self.n_owners + 1
    }

    pub fn r(&self) -> &DenseMatrix {
        &self.rg.r
    }

    /// Initial vector on level `k >= 1`.
    pub fn omega_level(&self, k: usize) -> Vec<f64> {
        assert!(k >= 1);
        let mut v = self.omega_level_one.clone();
        for _ in 1..k {
            v = self.rg.r.vec_mul(&v);
        }
        v
    }

    /// `omega_tilde e`, summing the level series in closed form.
    pub fn omega_transient_mass(&self) -> Result<f64> {
        let m = self.phases();
        let i_minus_r = DenseMatrix::identity(m).sub(&self.rg.r)?;
        let tail = i_minus_r.transpose();
        let w = crate::linalg::solve_dense(&tail, &self.omega_level_one)?;
        Ok(self.omega_boundary.iter().sum::<f64>() + w.iter().sum::<f64>())
    }

    /// Sub-generator over the boundary transient states plus `levels`
    /// repeating levels, reflecting at the top.
    pub fn truncated(&self, levels: usize) -> TruncatedChainOne<'_> {
        TruncatedChainOne { chain: self, levels }
    }
}

/// Structured truncated sub-generator of [`AbsorbingChainOne`].
#[derive(Debug, Clone, Copy)]
pub struct TruncatedChainOne<'a> {
    chain: &'a AbsorbingChainOne,
    levels: usize,
}

impl TruncatedChainOne<'_> {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn order(&self) -> usize {
        self.chain.boundary_size() + self.levels * self.chain.phases()
    }

    /// Initial vector restricted to the truncation.
    pub fn initial_vector(&self) -> Vec<f64> {
        let mut v = self.chain.omega_boundary.clone();
        let mut lv = self.chain.omega_level_one.clone();
        for _ in 0..self.levels {
            v.extend_from_slice(&lv);
            lv = self.chain.rg.r.vec_mul(&lv);
        }
        v
    }

    /// Absorption-rate vector `T0` restricted to the truncation.
    pub fn exit_vector(&self) -> Vec<f64> {
        let mut v = self.chain.phi_tilde.clone();
        v.extend_from_slice(&self.chain.phi_level_one);
        v.resize(self.order(), 0.0);
        v
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let ch = self.chain;
        let n0 = ch.boundary_size();
        let m = ch.phases();
        let mut t = DenseMatrix::zeros(self.order(), self.order());
        if let Some(t11) = &ch.t11 {
            t.set_block(0, 0, &t11.to_dense());
            t.set_block(n0 - m, n0, &ch.t12);
            t.set_block(n0, n0 - m, &ch.t21);
        }
        let up_out = ch.c.row_sums();
        for k in 0..self.levels {
            let off = n0 + k * m;
            let mut local = ch.b.clone();
            if k + 1 == self.levels {
                for (i, r) in up_out.iter().enumerate() {
                    local[(i, i)] += r;
                }
            } else {
                t.set_block(off, off + m, &ch.c);
            }
            t.set_block(off, off, &local);
            if k > 0 {
                t.set_block(off, off - m, &ch.a);
            }
        }
        t
    }
}

impl crate::linalg::GeneratorAction for TruncatedChainOne<'_> {
    fn dim(&self) -> usize {
        self.order()
    }

    fn uniformization_rate(&self) -> f64 {
        let ch = self.chain;
        let mut rate = (0..ch.phases()).map(|i| ch.b[(i, i)].abs()).fold(0.0, f64::max);
        if let Some(t11) = &ch.t11 {
            for d in &t11.diag {
                for i in 0..d.rows() {
                    rate = rate.max(d[(i, i)].abs());
                }
            }
        }
        rate
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let ch = self.chain;
        let n0 = ch.boundary_size();
        let m = ch.phases();
        out.iter_mut().for_each(|o| *o = 0.0);
        if let Some(t11) = &ch.t11 {
            let head = t11.mul_vec(&x[..n0]);
            out[..n0].copy_from_slice(&head);
            let up = ch.t12.mul_vec(&x[n0..n0 + m]);
            crate::linalg::add_into(&mut out[n0 - m..n0], &up);
            let down = ch.t21.mul_vec(&x[n0 - m..n0]);
            crate::linalg::add_into(&mut out[n0..n0 + m], &down);
        }
        let c_diag: Vec<f64> = (0..m).map(|i| ch.c[(i, i)]).collect();
        for k in 0..self.levels {
            let off = n0 + k * m;
            let xk = &x[off..off + m];
            let mut acc = ch.b.mul_vec(xk);
            if k + 1 < self.levels {
                let above = ch.c.mul_vec(&x[off + m..off + 2 * m]);
                crate::linalg::add_into(&mut acc, &above);
            } else {
                for i in 0..m {
                    acc[i] += c_diag[i] * xk[i];
                }
            }
            if k > 0 {
                let below = ch.a.mul_vec(&x[off - m..off]);
                crate::linalg::add_into(&mut acc, &below);
            }
            crate::linalg::add_into(&mut out[off..off + m], &acc);
        }
    }
}

/// Builds the sojourn chain from a stationary model-one solution.
pub fn build_absorbing_chain(
    params: &ModelParams,
    pi: &StationarySolution,
    opts: &SolverOptions,
) -> Result<AbsorbingChainOne> {
    params.validate()?;
    let rho = traffic_intensity(params);
    if rho >= 1.0 {
        return Err(QbdError::Unstable { rho });
    }
    if pi.model != Model::One || pi.pi1.len() != params.n_owners + 1 {
        return Err(QbdError::Dimension(
            "stationary solution is not a model-one solution".into(),
        ));
    }
    let n = params.n_owners;
    let m = n + 1;
    let blocks = build_blocks_one(params)?;
    let rg = rg_factorization(&blocks.a, &blocks.b, &blocks.c, opts)?;

    let omega_delta: f64 = pi.boundary_sublevel(0).iter().sum();
    let omega_boundary: Vec<f64> = pi.pi0[m..].to_vec();

    let (t11, t12, t21, phi_tilde, phi_level_one) = if n >= 2 {
        let b0 = &blocks.b0;
        let t11 = BlockTridiagonal::new(b0.diag[1..].to_vec(), b0.upper[1..].to_vec(), b0.lower[1..].to_vec())?;
        let mut phi = vec![0.0; (n - 1) * m];
        // sub-level 1 drops into sub-level 0 through B2^(1)
        let exits = b0.lower[0].row_sums();
        phi[..m].copy_from_slice(&exits);
        (
            Some(t11),
            blocks.c0_block.clone(),
            blocks.a0_block.clone(),
            phi,
            vec![0.0; m],
        )
    } else {
        (
            None,
            DenseMatrix::zeros(0, m),
            DenseMatrix::zeros(m, 0),
            Vec::new(),
            blocks.a0_block.row_sums(),
        )
    };

    Ok(AbsorbingChainOne {
        n_owners: n,
        t11,
        t12,
        t21,
        a: blocks.a,
        b: blocks.b,
        c: blocks.c,
        phi_tilde,
        phi_level_one,
        omega_delta,
        omega_boundary,
        omega_level_one: pi.pi1.clone(),
        rg,
    })
}

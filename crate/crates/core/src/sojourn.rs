//! Sojourn-time machinery for model one: the inverse of the absorbing
//! sub-generator through the UL-type RG-factorization, the mean sojourn
//! time and the phase-type distribution function.
//!
//! The sub-generator splits as
//!
//! ```text
//!     | T11  T12 |
//! T = |          |
//!     | T21  T22 |
//! ```
//!
//! with `T11` the transient boundary sub-levels and `T22` the infinite block
//! tridiagonal part over levels `1, 2, ..`. Since
//! `T22 = (I - R_U) U_D (I - G_L)`, its inverse acts as two triangular
//! sweeps around a block diagonal solve with `U = B + R A`.

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::linalg::{add_into, dot, expm_action, max_abs_vec, spectral_radius, BlockTridiagonal, DenseMatrix, Lu};
use crate::model_one::AbsorbingChainOne;
use crate::solver::truncation_levels;

/// Level-structured vector over the repeating levels: explicit entries for
/// levels `1..=levels.len()`, and the constant `tail` on every level above.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelVector {
    pub levels: Vec<Vec<f64>>,
    pub tail: Vec<f64>,
}

impl LevelVector {
    pub fn constant(value: Vec<f64>, explicit: usize) -> Self {
        Self {
            levels: vec![value.clone(); explicit],
            tail: value,
        }
    }

    pub fn zeros(phases: usize, explicit: usize) -> Self {
        Self::constant(vec![0.0; phases], explicit)
    }

    pub fn level(&self, k: usize) -> &[f64] {
        assert!(k >= 1);
        self.levels.get(k - 1).unwrap_or(&self.tail)
    }
}

/// Right-hand side / solution of `(-T) y = v` over the transient states.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainVector {
    /// Transient boundary sub-levels.
    pub boundary: Vec<f64>,
    pub levels: LevelVector,
}

impl ChainVector {
    /// The all-ones vector with `explicit` level entries.
    pub fn ones(chain: &AbsorbingChainOne, explicit: usize) -> Self {
        Self {
            boundary: vec![1.0; chain.boundary_size()],
            levels: LevelVector::constant(vec![1.0; chain.phases()], explicit),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CensoredSolution {
    /// Solution on levels `1..=K`; its `tail` repeats level `K`.
    pub y: ChainVector,
    /// `||T (-y) - v||_inf` over the boundary and levels `1..K-1`.
    pub residual: f64,
    pub truncation_levels: usize,
}

/// Levels used by the series of a chain: smallest `K >= 8` with
/// `sp(R)^K < tol`.
pub fn chain_truncation(chain: &AbsorbingChainOne, tol: f64) -> Result<usize> {
    let sp = spectral_radius(chain.r(), 1e-13)?;
    if sp >= 1.0 {
        return Err(QbdError::SpectralNonConvergence { estimate: sp });
    }
    Ok(truncation_levels(sp, tol))
}

/// `(-T22)^{-1} w` on levels `1..=K`, where `w` is constant above `K`.
fn apply_t22_inverse(chain: &AbsorbingChainOne, w: &LevelVector, k_levels: usize) -> Result<Vec<Vec<f64>>> {
    let m = chain.phases();
    let r = chain.r();
    let i_minus_r = DenseMatrix::identity(m).sub(r)?;
    // z_k = sum_{j >= k} R^{j-k} w_j
    let mut z = vec![vec![0.0; m]; k_levels];
    let mut next = Lu::factor(&i_minus_r)?.solve(&w.tail);
    for k in (1..=k_levels).rev() {
        let mut zk = r.mul_vec(&next);
        add_into(&mut zk, w.level(k));
        z[k - 1] = zk.clone();
        next = zk;
    }
    // u_k = (-U)^{-1} z_k, then y_k = u_k + G y_{k-1}
    let neg_u_inv = chain.rg.u_inverse.scale(-1.0);
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(k_levels);
    for zk in &z {
        let mut yk = neg_u_inv.mul_vec(zk);
        if let Some(prev) = y.last() {
            add_into(&mut yk, &chain.rg.g.mul_vec(prev));
        }
        y.push(yk);
    }
    Ok(y)
}

/// `y = (-T)^{-1} v` for the sojourn chain.
///
/// The boundary part solves the Schur complement
/// `T11;2 = T11 - T12 U^{-1} T21`, which only changes the last boundary
/// diagonal block, then the level part is recovered from
/// `y_L = (-T22)^{-1} (v_L + e_1 (T21 y_0))`.
pub fn censored_inverse_apply(chain: &AbsorbingChainOne, rhs: &ChainVector, tol: f64) -> Result<CensoredSolution> {
    let m = chain.phases();
    let n0 = chain.boundary_size();
    if rhs.boundary.len() != n0 || rhs.levels.tail.len() != m || rhs.levels.levels.iter().any(|l| l.len() != m) {
        return Err(QbdError::Dimension("right-hand side does not match the chain".into()));
    }
    let k_levels = chain_truncation(chain, tol)?.max(rhs.levels.levels.len() + 1);

    let y0 = match &chain.t11 {
        None => Vec::new(),
        Some(t11) => {
            let s_v = apply_t22_inverse(chain, &rhs.levels, rhs.levels.levels.len().max(1))?;
            let mut b0 = rhs.boundary.clone();
            add_into(&mut b0[n0 - m..], &chain.t12.mul_vec(&s_v[0]));
            let last = t11.levels() - 1;
            let schur_term = chain.t12.matmul(&chain.rg.u_inverse)?.matmul(&chain.t21)?;
            let diag: Vec<DenseMatrix> = t11
                .diag
                .iter()
                .enumerate()
                .map(|(l, d)| {
                    let d = if l == last { d.sub(&schur_term) } else { Ok(d.clone()) };
                    d.map(|d| d.scale(-1.0))
                })
                .collect::<Result<_>>()?;
            let neg = BlockTridiagonal::new(
                diag,
                t11.upper.iter().map(|b| b.scale(-1.0)).collect(),
                t11.lower.iter().map(|b| b.scale(-1.0)).collect(),
            )?;
            neg.solve(&b0)?
        }
    };

    let mut w = rhs.levels.clone();
    if w.levels.is_empty() {
        w.levels.push(w.tail.clone());
    }
    if n0 > 0 {
        add_into(&mut w.levels[0], &chain.t21.mul_vec(&y0[n0 - m..]));
    }
    let y_levels = apply_t22_inverse(chain, &w, k_levels)?;

    let residual = chain_residual(chain, rhs, &y0, &y_levels);
    Ok(CensoredSolution {
        y: ChainVector {
            boundary: y0,
            levels: LevelVector {
                tail: y_levels.last().cloned().unwrap_or_default(),
                levels: y_levels,
            },
        },
        residual,
        truncation_levels: k_levels,
    })
}

/// `||T (-y) - v||_inf` with the last explicit level left out.
fn chain_residual(chain: &AbsorbingChainOne, rhs: &ChainVector, y0: &[f64], y: &[Vec<f64>]) -> f64 {
    let m = chain.phases();
    let n0 = chain.boundary_size();
    let mut worst = 0.0_f64;
    if let Some(t11) = &chain.t11 {
        let mut ty = t11.mul_vec(y0);
        add_into(&mut ty[n0 - m..], &chain.t12.mul_vec(&y[0]));
        for (a, b) in ty.iter().zip(&rhs.boundary) {
            worst = worst.max((a + b).abs());
        }
    }
    for k in 0..y.len().saturating_sub(1) {
        let mut ty = chain.b.mul_vec(&y[k]);
        add_into(&mut ty, &chain.c.mul_vec(&y[k + 1]));
        if k > 0 {
            add_into(&mut ty, &chain.a.mul_vec(&y[k - 1]));
        } else if n0 > 0 {
            add_into(&mut ty, &chain.t21.mul_vec(&y0[n0 - m..]));
        }
        for (a, b) in ty.iter().zip(rhs.levels.level(k + 1)) {
            worst = worst.max((a + b).abs());
        }
    }
    worst
}

/// `E[W] = omega_tilde (-T)^{-1} e`, with the level part of `omega_tilde`
/// generated as `pi_1 R^{k-1}`.
pub fn expected_sojourn_rg(chain: &AbsorbingChainOne, tol: f64) -> Result<f64> {
    let sol = censored_inverse_apply(chain, &ChainVector::ones(chain, 0), tol)?;
    let mut mean = dot(&chain.omega_boundary, &sol.y.boundary);
    let mut omega = chain.omega_level_one.clone();
    for yk in &sol.y.levels.levels {
        mean += dot(&omega, yk);
        omega = chain.r().vec_mul(&omega);
    }
    Ok(mean)
}

/// `F_W(t) = 1 - omega_Delta - omega_tilde exp(T t) e` on a reflecting
/// truncation with `sp(R)^K < tol`. Zero at `t = 0` because
/// `omega_Delta + omega_tilde e = 1`.
pub fn sojourn_cdf(chain: &AbsorbingChainOne, t: f64, tol: f64) -> Result<f64> {
    Ok(sojourn_cdf_grid(chain, &[t], tol)?[0])
}

/// [`sojourn_cdf`] at every point of `times`.
pub fn sojourn_cdf_grid(chain: &AbsorbingChainOne, times: &[f64], tol: f64) -> Result<Vec<f64>> {
    Ok(transient_survival_grid(chain, times, tol)?
        .into_iter()
        .map(|s| (1.0 - chain.omega_delta - s).clamp(0.0, 1.0))
        .collect())
}

/// `omega_tilde exp(T t) e`: initial mass still in the transient states at
/// time `t`. Tends to zero, so the distribution function above tends to
/// `1 - omega_Delta`.
pub fn transient_survival_grid(chain: &AbsorbingChainOne, times: &[f64], tol: f64) -> Result<Vec<f64>> {
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(QbdError::InvalidParams(format!(
            "sojourn time must be finite and >= 0, got {t}"
        )));
    }
    let k_levels = chain_truncation(chain, tol)?;
    let trunc = chain.truncated(k_levels);
    let omega = trunc.initial_vector();
    let ones = vec![1.0; trunc.order()];
    Ok(times
        .iter()
        .map(|&t| dot(&omega, &expm_action(&trunc, &ones, t, tol * 1e-3)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SojournResult {
    pub mean_rg: f64,
    pub mean_little: f64,
    pub cdf_samples: Vec<(f64, f64)>,
    pub truncation_levels: usize,
    /// Residual of the censored solve behind `mean_rg`.
    pub residual: f64,
}

/// Mean through the factorization, the Little's-law mean passed in by the
/// caller, and the distribution function at `times`.
pub fn sojourn_result(chain: &AbsorbingChainOne, mean_little: f64, times: &[f64], tol: f64) -> Result<SojournResult> {
    let ones = ChainVector::ones(chain, 0);
    let sol = censored_inverse_apply(chain, &ones, tol)?;
    let mean_rg = expected_sojourn_rg(chain, tol)?;
    let cdf = sojourn_cdf_grid(chain, times, tol)?;
    Ok(SojournResult {
        mean_rg,
        mean_little,
        cdf_samples: times.iter().copied().zip(cdf).collect(),
        truncation_levels: chain_truncation(chain, tol)?,
        residual: sol.residual,
    })
}

/// Largest entry of `|y|` on the boundary and the explicit levels.
pub fn chain_vector_max(v: &ChainVector) -> f64 {
    v.levels
        .levels
        .iter()
        .map(|l| max_abs_vec(l))
        .fold(max_abs_vec(&v.boundary), f64::max)
}

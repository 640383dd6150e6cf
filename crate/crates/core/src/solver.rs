//! Rate matrix iteration, the `G`/`U` measures and the matrix-geometric
//! stationary solution.
//!
//! Block naming follows the level structure rather than either model:
//! `a` moves one level down, `b` stays within a level, `c` moves one level up.

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::linalg::{dot, spectral_radius, DenseMatrix, Lu};
use crate::qbd::{Model, Qbd};

/// Default stopping threshold of the successive iteration.
pub const DEFAULT_EPSILON: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub max_iter: usize,
    pub truncation_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrixSolution {
    pub r: DenseMatrix,
    pub iterations: usize,
    /// `||R^2 A + R B + C||_inf`.
    pub residual: f64,
    pub spectral_radius: f64,
    /// Largest entrywise decrease between consecutive iterates; zero for a
    /// monotone sequence.
    pub max_decrease: f64,
}

fn check_square_triplet(a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<usize> {
    let m = b.rows();
    for (name, x) in [("a", a), ("b", b), ("c", c)] {
        if x.rows() != m || x.cols() != m {
            return Err(QbdError::Dimension(format!(
                "block {name} is {}x{}, expected {m}x{m}",
                x.rows(),
                x.cols()
            )));
        }
    }
    Ok(m)
}

/// `||R^2 A + R B + C||_inf`.
pub fn rate_residual(r: &DenseMatrix, a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<f64> {
    let res = r.matmul(r)?.matmul(a)?.add(&r.matmul(b)?)?.add(c)?;
    Ok(res.norm_inf())
}

/// Minimal nonnegative solution of `R^2 A + R B + C = 0` by the successive
/// substitution `R(n+1) = -(R(n)^2 A + C) B^{-1}`, `R(0) = 0`, stopping
/// once `max |R(n+1) - R(n)| < epsilon`.
pub fn solve_rate_matrix(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    epsilon: f64,
    max_iter: usize,
) -> Result<RateMatrixSolution> {
    let m = check_square_triplet(a, b, c)?;
    let b_inv = Lu::factor(b)?.inverse()?;
    let neg_c_binv = c.matmul(&b_inv)?.scale(-1.0);
    let mut r = DenseMatrix::zeros(m, m);
    let mut max_decrease = 0.0_f64;
    let mut last_change = f64::INFINITY;
    for it in 1..=max_iter {
        let next = r.matmul(&r)?.matmul(a)?.matmul(&b_inv)?.scale(-1.0).add(&neg_c_binv)?;
        let mut change = 0.0_f64;
        for (x, y) in next.as_slice().iter().zip(r.as_slice()) {
            let d = x - y;
            change = change.max(d.abs());
            max_decrease = max_decrease.max(-d);
        }
        r = next;
        last_change = change;
        if change < epsilon {
            let residual = rate_residual(&r, a, b, c)?;
            let sp = spectral_radius(&r, 1e-13)?;
            return Ok(RateMatrixSolution {
                r,
                iterations: it,
                residual,
                spectral_radius: sp,
                max_decrease,
            });
        }
    }
    Err(QbdError::NonConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// Minimal nonnegative solution of `A + B G + C G^2 = 0` by
/// `G(n+1) = -B^{-1} (A + C G(n)^2)`, `G(0) = 0`.
pub fn solve_g_matrix(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    epsilon: f64,
    max_iter: usize,
) -> Result<DenseMatrix> {
    let m = check_square_triplet(a, b, c)?;
    let b_inv = Lu::factor(b)?.inverse()?;
    let neg_binv_a = b_inv.matmul(a)?.scale(-1.0);
    let neg_binv_c = b_inv.matmul(c)?.scale(-1.0);
    let mut g = DenseMatrix::zeros(m, m);
    let mut last_change = f64::INFINITY;
    for _ in 0..max_iter {
        let next = neg_binv_c.matmul(&g.matmul(&g)?)?.add(&neg_binv_a)?;
        last_change = next.max_abs_diff(&g);
        g = next;
        if last_change < epsilon {
            return Ok(g);
        }
    }
    Err(QbdError::NonConvergence {
        iterations: max_iter,
        last_change,
    })
}

/// `R`, `G` and the `U`-measure `U = B + R A` of a repeating block triple.
#[derive(Debug, Clone, PartialEq)]
pub struct RgFactorization {
    pub r: DenseMatrix,
    pub g: DenseMatrix,
    pub u: DenseMatrix,
    pub u_inverse: DenseMatrix,
}

impl RgFactorization {
    /// `max |(B + R A) - (B + C G)|`, the two expressions of `U`.
    pub fn u_consistency(&self, a: &DenseMatrix, b: &DenseMatrix, c: &DenseMatrix) -> Result<f64> {
        let via_r = b.add(&self.r.matmul(a)?)?;
        let via_g = b.add(&c.matmul(&self.g)?)?;
        Ok(via_r.max_abs_diff(&via_g))
    }
}

pub fn rg_factorization(
    a: &DenseMatrix,
    b: &DenseMatrix,
    c: &DenseMatrix,
    opts: &SolverOptions,
) -> Result<RgFactorization> {
    let r = solve_rate_matrix(a, b, c, opts.epsilon, opts.max_iter)?.r;
    let g = solve_g_matrix(a, b, c, opts.epsilon, opts.max_iter)?;
    let u = b.add(&r.matmul(a)?)?;
    let u_inverse = u.inverse()?;
    Ok(RgFactorization { r, g, u, u_inverse })
}

/// Smallest `K >= 8` with `sp^K < tol`.
pub fn truncation_levels(spectral_radius: f64, tol: f64) -> usize {
    const FLOOR: usize = 8;
    if spectral_radius <= 0.0 {
        return FLOOR;
    }
    if spectral_radius >= 1.0 {
        return usize::MAX;
    }
    let k = (tol.ln() / spectral_radius.ln()).floor() as usize + 1;
    k.max(FLOOR)
}

/// Matrix-geometric stationary distribution: level 0, level 1 and `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySolution {
    pub model: Model,
    pub pi0: Vec<f64>,
    pub pi1: Vec<f64>,
    pub r: DenseMatrix,
    /// Sub-level sizes of level 0.
    pub boundary_sizes: Vec<usize>,
    /// `(I - R)^{-1}`.
    pub i_minus_r_inv: DenseMatrix,
}

impl StationarySolution {
    pub fn phases(&self) -> usize {
        self.pi1.len()
    }

    pub fn boundary_sublevel(&self, l: usize) -> &[f64] {
        let start: usize = self.boundary_sizes[..l].iter().sum();
        &self.pi0[start..start + self.boundary_sizes[l]]
    }

    /// `pi_1 (I - R)^{-1}`, the summed mass of all levels `k >= 1` per phase.
    pub fn levels_sum(&self) -> Vec<f64> {
        self.i_minus_r_inv.vec_mul(&self.pi1)
    }

    /// `sum_k k pi_k = pi_1 (I - R)^{-2}`.
    pub fn levels_weighted_sum(&self) -> Vec<f64> {
        self.i_minus_r_inv.vec_mul(&self.levels_sum())
    }

    pub fn total_mass(&self) -> f64 {
        self.pi0.iter().sum::<f64>() + self.levels_sum().iter().sum::<f64>()
    }

    /// Mass above level `k`: `pi_1 R^k (I - R)^{-1} e`.
    pub fn tail_mass(&self, k: usize) -> f64 {
        let mut v = self.pi1.clone();
        for _ in 0..k {
            v = self.r.vec_mul(&v);
        }
        self.i_minus_r_inv.vec_mul(&v).iter().sum()
    }

    /// Stationary vector over level 0 and levels `1..=levels`, laid out as in
    /// the truncated generator.
    pub fn flatten(&self, levels: usize) -> Vec<f64> {
        let mut out = self.pi0.clone();
        let mut v = self.pi1.clone();
        for _ in 0..levels {
            out.extend_from_slice(&v);
            v = self.r.vec_mul(&v);
        }
        out
    }
}

/// `pi_k = pi_1 R^{k-1}` for `k >= 1`.
pub fn level_vector(sol: &StationarySolution, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(QbdError::InvalidParams("level_vector is defined for k >= 1".into()));
    }
    let mut v = sol.pi1.clone();
    for _ in 1..k {
        v = sol.r.vec_mul(&v);
    }
    Ok(v)
}

/// Boundary equations `pi_0 B_0 + pi_1 A_0 = 0`,
/// `pi_0 C_0 + pi_1 (B + R A) = 0`, `pi_0 e + pi_1 (I - R)^{-1} e = 1`.
///
/// Level 0 is a chain of sub-levels, so the system is block tridiagonal with
/// level 1 (diagonal block `B + R A`) appended on top. It is reduced from the
/// top down: `pi_{l+1} = pi_l W_{l+1}`, leaving a censored generator on the
/// first sub-level whose one redundant balance equation is replaced by a
/// normalization.
pub fn solve_boundary(qbd: &Qbd, model: Model, r: &DenseMatrix) -> Result<StationarySolution> {
    let m = qbd.phases();
    if r.rows() != m || r.cols() != m {
        return Err(QbdError::Dimension("R does not match the level size".into()));
    }
    let bd = &qbd.boundary;
    let levels = bd.levels();
    let u = qbd.local.add(&r.matmul(&qbd.down)?)?;

    // w[l] maps pi_{l-1} to pi_l; index `levels` is level 1.
    let mut w: Vec<Option<DenseMatrix>> = vec![None; levels + 1];
    let neg_u = Lu::factor(&u.scale(-1.0))?;
    w[levels] = Some(neg_u.solve_left_matrix(&qbd.boundary_up));
    let down_from = |l: usize| -> &DenseMatrix {
        // block from sub-level l + 1 (or level 1) back to sub-level l
        if l + 1 == levels {
            &qbd.boundary_down
        } else {
            &bd.lower[l]
        }
    };
    let up_into = |l: usize| -> &DenseMatrix {
        // block from sub-level l - 1 to sub-level l
        &bd.upper[l - 1]
    };
    let censored =
        |l: usize, w_next: &DenseMatrix| -> Result<DenseMatrix> { bd.diag[l].add(&w_next.matmul(down_from(l))?) };
    for l in (1..levels).rev() {
        let ml = censored(l, w[l + 1].as_ref().expect("filled"))?;
        let lu = Lu::factor(&ml.scale(-1.0))?;
        w[l] = Some(lu.solve_left_matrix(up_into(l)));
    }
    let m0 = censored(0, w[1].as_ref().expect("filled"))?;

    // x M0 = 0 with the first balance column replaced by x e = 1.
    let n0 = m0.rows();
    let mut sys = m0.clone();
    for row in 0..n0 {
        sys[(row, 0)] = 1.0;
    }
    let mut rhs = vec![0.0; n0];
    rhs[0] = 1.0;
    let x0 = Lu::factor(&sys).map_err(|_| QbdError::RankDeficient)?.solve_left(&rhs);

    let mut parts: Vec<Vec<f64>> = Vec::with_capacity(levels + 1);
    parts.push(x0);
    for wl in w.iter().skip(1) {
        let prev = parts.last().expect("non-empty");
        parts.push(wl.as_ref().expect("filled").vec_mul(prev));
    }
    let pi1_raw = parts.pop().expect("level 1");
    let i_minus_r_inv = DenseMatrix::identity(m).sub(r)?.inverse()?;
    let level_mass: f64 = i_minus_r_inv.vec_mul(&pi1_raw).iter().sum();
    let boundary_mass: f64 = parts.iter().flatten().sum();
    let total = boundary_mass + level_mass;
    if !(total.is_finite() && total > 0.0) {
        return Err(QbdError::RankDeficient);
    }
    let pi0: Vec<f64> = parts.into_iter().flatten().map(|v| v / total).collect();
    let pi1: Vec<f64> = pi1_raw.into_iter().map(|v| v / total).collect();
    Ok(StationarySolution {
        model,
        pi0,
        pi1,
        r: r.clone(),
        boundary_sizes: bd.level_sizes(),
        i_minus_r_inv,
    })
}

/// Rate matrix plus boundary solve for a stable instance.
pub fn solve_stationary(
    qbd: &Qbd,
    model: Model,
    opts: &SolverOptions,
) -> Result<(RateMatrixSolution, StationarySolution)> {
    let rate = solve_rate_matrix(&qbd.down, &qbd.local, &qbd.up, opts.epsilon, opts.max_iter)?;
    if rate.spectral_radius >= 1.0 {
        return Err(QbdError::Unstable {
            rho: rate.spectral_radius,
        });
    }
    let sol = solve_boundary(qbd, model, &rate.r)?;
    Ok((rate, sol))
}

/// Largest absolute residual of the boundary and interior balance equations.
pub fn balance_residual(qbd: &Qbd, sol: &StationarySolution) -> Result<f64> {
    let bd = &qbd.boundary;
    let m = qbd.phases();
    let n0 = qbd.level0_size();
    let last = n0 - qbd.boundary_up.rows();
    let pi2 = sol.r.vec_mul(&sol.pi1);
    let pi3 = sol.r.vec_mul(&pi2);

    let mut level0 = bd.vec_mul(&sol.pi0);
    let back = qbd.boundary_down.vec_mul(&sol.pi1);
    crate::linalg::add_into(&mut level0[last..], &back);

    let mut level1 = qbd.boundary_up.vec_mul(&sol.pi0[last..]);
    crate::linalg::add_into(&mut level1, &qbd.local.vec_mul(&sol.pi1));
    crate::linalg::add_into(&mut level1, &qbd.down.vec_mul(&pi2));

    let mut level2 = qbd.up.vec_mul(&sol.pi1);
    crate::linalg::add_into(&mut level2, &qbd.local.vec_mul(&pi2));
    crate::linalg::add_into(&mut level2, &qbd.down.vec_mul(&pi3));
    debug_assert_eq!(level2.len(), m);

    Ok(level0
        .iter()
        .chain(&level1)
        .chain(&level2)
        .fold(0.0, |acc, v| acc.max(v.abs())))
}

/// `sum_k pi_k v` over levels `k >= 1`.
pub fn levels_dot(sol: &StationarySolution, v: &[f64]) -> f64 {
    dot(&sol.levels_sum(), v)
}

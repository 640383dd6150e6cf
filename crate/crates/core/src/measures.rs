//! Stationary performance measures, profits and the Little's-law sojourn
//! mean for both models.

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::linalg::dot;
use crate::params::{traffic_intensity, ModelParams};
use crate::qbd::Model;
use crate::solver::StationarySolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Simulated,
    Oracle,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Simulated => "simulated",
            Provenance::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub mean_idle_owners: f64,
    pub mean_waiting_seekers: f64,
    pub sojourn_mean_little: f64,
    pub sojourn_mean_rg: Option<f64>,
    pub platform_profit: f64,
    pub owner_profit: f64,
    /// `(1 - d) P lambda`, the platform's share of realized revenue.
    pub platform_profit_throughput: f64,
    pub throughput: f64,
    pub rho: f64,
    pub provenance: Provenance,
}

fn check_model(sol: &StationarySolution, model: Model, params: &ModelParams) -> Result<()> {
    let phases = match model {
        Model::One => params.n_owners + 1,
        Model::Two => 1usize << params.n_owners.min(63),
    };
    if sol.model != model || sol.phases() != phases {
        return Err(QbdError::Dimension(format!(
            "stationary solution does not belong to model {} with N = {}",
            model.as_str(),
            params.n_owners
        )));
    }
    Ok(())
}

/// `E[Q1] = sum_l pi0^(l) f + pi1 (I - R)^{-1} f`, `f = (0, 1, .., N)`.
pub fn mean_idle_owners_one(sol: &StationarySolution, params: &ModelParams) -> Result<f64> {
    check_model(sol, Model::One, params)?;
    let m = params.n_owners + 1;
    let f: Vec<f64> = (0..m).map(|j| j as f64).collect();
    let boundary: f64 = sol.pi0.chunks(m).map(|block| dot(block, &f)).sum();
    Ok(boundary + dot(&sol.levels_sum(), &f))
}

/// `E[Q2] = sum_{i=1}^{N-1} i pi0^(i) e + (N - 1) pi1 (I - R)^{-1} e
/// + pi1 (I - R)^{-2} e`: level `k` holds `N + k - 1` seekers.
pub fn mean_waiting_seekers_one(sol: &StationarySolution, params: &ModelParams) -> Result<f64> {
    check_model(sol, Model::One, params)?;
    let m = params.n_owners + 1;
    let boundary: f64 = sol
        .pi0
        .chunks(m)
        .enumerate()
        .map(|(i, block)| i as f64 * block.iter().sum::<f64>())
        .sum();
    let levels: f64 = sol.levels_sum().iter().sum();
    let weighted: f64 = sol.levels_weighted_sum().iter().sum();
    Ok(boundary + (params.n_owners as f64 - 1.0) * levels + weighted)
}

/// `(E[Q1], E[Q2])` for model two. Sub-level `n` of level 0 leaves `N - n`
/// owners idle; level `k` holds `k - 1` waiting seekers, so
/// `E[Q2] = pi1 R (I - R)^{-2} e`.
pub fn measures_two(sol: &StationarySolution, params: &ModelParams) -> Result<(f64, f64)> {
    check_model(sol, Model::Two, params)?;
    let n = params.n_owners;
    let eq1: f64 = (0..n)
        .map(|sub| (n - sub) as f64 * sol.boundary_sublevel(sub).iter().sum::<f64>())
        .sum();
    let eq2 = sol.levels_weighted_sum().iter().sum::<f64>() - sol.levels_sum().iter().sum::<f64>();
    Ok((eq1, eq2.max(0.0)))
}

/// Service completion rate: `mu` times the mean number of owners in service.
pub fn throughput(sol: &StationarySolution, params: &ModelParams) -> Result<f64> {
    let n = params.n_owners;
    match sol.model {
        Model::One => Ok(params.mu * (n as f64 - mean_idle_owners_one(sol, params)?)),
        Model::Two => {
            check_model(sol, Model::Two, params)?;
            let in_service = |idx: usize| idx.count_ones() as f64;
            let boundary: f64 = (0..n)
                .map(|sub| {
                    sol.boundary_sublevel(sub)
                        .iter()
                        .enumerate()
                        .map(|(idx, p)| in_service(idx) * p)
                        .sum::<f64>()
                })
                .sum();
            let levels: f64 = sol
                .levels_sum()
                .iter()
                .enumerate()
                .map(|(idx, p)| in_service(idx) * p)
                .sum();
            Ok(params.mu * (boundary + levels))
        }
    }
}

/// `f1 = (1 - d) P (N - E[Q1]) mu`, `f2 = d P (1 - E[Q1]/N) mu`.
pub fn profits(params: &ModelParams, eq1: f64) -> (f64, f64) {
    let n = params.n_owners as f64;
    let d = params.share;
    let f1 = (1.0 - d) * params.price * (n - eq1) * params.mu;
    let f2 = d * params.price * (1.0 - eq1 / n) * params.mu;
    (f1, f2)
}

/// `(1 - d) P lambda`.
pub fn platform_profit_throughput(params: &ModelParams) -> f64 {
    (1.0 - params.share) * params.price * params.lambda
}

/// Mean sojourn time by Little's law. Model one counts waiting seekers plus
/// busy owners; model two adds the mean matching and service times to the
/// mean wait.
pub fn little_sojourn(params: &ModelParams, eq1: f64, eq2: f64, model: Model) -> Result<f64> {
    let lam = params.lambda;
    if lam <= 0.0 {
        return Err(QbdError::Undefined("mean sojourn time needs lambda > 0"));
    }
    Ok(match model {
        Model::One => (eq2 + params.n_owners as f64 - eq1) / lam,
        Model::Two => eq2 / lam + 1.0 / params.gamma + 1.0 / params.mu,
    })
}

/// Measures of a stationary solution, without the factorization-based
/// sojourn mean.
pub fn performance_report(sol: &StationarySolution, params: &ModelParams) -> Result<PerformanceReport> {
    let (eq1, eq2) = match sol.model {
        Model::One => (
            mean_idle_owners_one(sol, params)?,
            mean_waiting_seekers_one(sol, params)?,
        ),
        Model::Two => measures_two(sol, params)?,
    };
    let (f1, f2) = profits(params, eq1);
    let little = if params.lambda > 0.0 {
        little_sojourn(params, eq1, eq2, sol.model)?
    } else {
        f64::NAN
    };
    Ok(PerformanceReport {
        mean_idle_owners: eq1,
        mean_waiting_seekers: eq2,
        sojourn_mean_little: little,
        sojourn_mean_rg: None,
        platform_profit: f1,
        owner_profit: f2,
        platform_profit_throughput: platform_profit_throughput(params),
        throughput: throughput(sol, params)?,
        rho: traffic_intensity(params),
        provenance: Provenance::Analytic,
    })
}

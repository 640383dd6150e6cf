//! Matrix-analytic analysis of two-sided service platforms.
//!
//! Seekers arrive at a platform with `N` registered owners. Matching a
//! waiting seeker to an idle owner takes an exponential time, after which
//! the owner serves the seeker. Two Markov models of this system are built
//! as level-independent QBD processes: [`model_one`] tracks waiting seekers
//! and idle owners, [`model_two`] treats matching plus service as a
//! phase-type service time. [`solver`] computes the matrix-geometric
//! stationary distribution, [`measures`] the queue lengths and profits,
//! [`sojourn`] the sojourn-time distribution, and [`sim`] provides a
//! simulator and a brute-force truncated solver to check them against.

pub mod error;
pub mod linalg;
pub mod measures;
pub mod model_one;
pub mod model_two;
pub mod params;
pub mod qbd;
pub mod sim;
pub mod sojourn;
pub mod solver;

pub use error::{QbdError, Result};
pub use linalg::{BlockTridiagonal, DenseMatrix};
pub use measures::{PerformanceReport, Provenance};
pub use model_one::{build_absorbing_chain, build_blocks_one, AbsorbingChainOne, QbdBlocksOne};
pub use model_two::{build_blocks_two, QbdBlocksTwo};
pub use params::{stability_report, traffic_intensity, ModelParams, StabilityReport};
pub use qbd::{Model, Qbd};
pub use sim::{simulate, truncated_stationary, SimConfig, SimEstimate, SimResult};
pub use sojourn::SojournResult;
pub use solver::{RateMatrixSolution, RgFactorization, SolverOptions, StationarySolution};

/// Block structure of either model as a generic QBD.
pub fn build_qbd(model: Model, params: &ModelParams) -> Result<Qbd> {
    match model {
        Model::One => Ok(build_blocks_one(params)?.qbd()),
        Model::Two => Ok(build_blocks_two(params)?.qbd()),
    }
}

/// Everything the analytic path produces for one parameter point.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub model: Model,
    pub params: ModelParams,
    pub rate: RateMatrixSolution,
    pub stationary: StationarySolution,
    pub report: PerformanceReport,
}

/// Stability check, rate matrix, boundary solve and measures. Model one also
/// gets the factorization-based sojourn mean.
pub fn analyze(model: Model, params: &ModelParams, opts: &SolverOptions) -> Result<Analysis> {
    params.validate()?;
    let rho = traffic_intensity(params);
    if rho >= 1.0 {
        return Err(QbdError::Unstable { rho });
    }
    let qbd = build_qbd(model, params)?;
    let (rate, stationary) = solver::solve_stationary(&qbd, model, opts)?;
    let mut report = measures::performance_report(&stationary, params)?;
    if model == Model::One && params.lambda > 0.0 {
        let chain = build_absorbing_chain(params, &stationary, opts)?;
        report.sojourn_mean_rg = Some(sojourn::expected_sojourn_rg(&chain, opts.truncation_tol)?);
    }
    Ok(Analysis {
        model,
        params: *params,
        rate,
        stationary,
        report,
    })
}

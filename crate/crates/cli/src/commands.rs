//! The five subcommands. Each returns its output files in memory so the
//! caller decides where they go.

use platform_qbd::sim::SimResult;
use platform_qbd::sojourn::{sojourn_cdf_grid, transient_survival_grid};
use platform_qbd::solver::{balance_residual, truncation_levels};
use platform_qbd::{
    analyze, build_absorbing_chain, build_qbd, simulate, stability_report, traffic_intensity, Analysis, Model,
    ModelParams, SimConfig, SolverOptions,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SweepParameter};
use crate::output::{fmt_num, fmt_opt, write_results, write_table, ResultRow};
use crate::CliError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_UNSTABLE: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_UNSUPPORTED: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    /// Appended to the output prefix.
    pub suffix: &'static str,
    pub contents: String,
    /// Only written when an output prefix is set.
    pub detail: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutput {
    pub files: Vec<OutputFile>,
    /// Lines for stderr.
    pub notes: Vec<String>,
    pub exit_code: u8,
}

impl CommandOutput {
    fn file(&mut self, suffix: &'static str, contents: String) {
        self.files.push(OutputFile {
            suffix,
            contents,
            detail: false,
        });
    }

    pub fn contents(&self, suffix: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|f| f.suffix == suffix)
            .map(|f| f.contents.as_str())
    }
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<String, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

/// Analytic solve of one point, as a results row.
pub fn analytic_row(
    model: Model,
    params: &ModelParams,
    opts: &SolverOptions,
) -> Result<(ResultRow, Analysis), CliError> {
    let a = analyze(model, params, opts)?;
    let mut row = ResultRow::new(model, params, a.report.rho, "analytic");
    let levels = truncation_levels(a.rate.spectral_radius, opts.truncation_tol);
    row.eq1 = Some(a.report.mean_idle_owners);
    row.eq2 = Some(a.report.mean_waiting_seekers);
    row.ew_little = (params.lambda > 0.0).then_some(a.report.sojourn_mean_little);
    row.ew_rg = a.report.sojourn_mean_rg;
    row.f1 = Some(a.report.platform_profit);
    row.f2 = Some(a.report.owner_profit);
    row.f1_throughput_based = Some(a.report.platform_profit_throughput);
    row.throughput = Some(a.report.throughput);
    row.residual_r = Some(a.rate.residual);
    row.tail_mass = Some(a.stationary.tail_mass(levels).max(0.0));
    Ok((row, a))
}

pub fn cmd_stability(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let rep = stability_report(&cfg.params());
    let rows = vec![vec![
        cfg.model.as_str().to_string(),
        fmt_num(rep.rho),
        rep.stable.to_string(),
        rep.n_min_exact.to_string(),
        rep.n_min_corollary.to_string(),
        fmt_num(rep.drift_up),
        fmt_num(rep.drift_down),
    ]];
    let header = [
        "model",
        "rho",
        "stable",
        "n_min_exact",
        "n_min_corollary",
        "drift_up",
        "drift_down",
    ];
    let mut out = CommandOutput::default();
    out.file("_stability.csv", csv_string(|b| write_table(b, &header, &rows))?);
    out.exit_code = if rep.stable { EXIT_OK } else { EXIT_UNSTABLE };
    Ok(out)
}

#[derive(Debug, Serialize)]
struct SolveDetail<'a> {
    model: Model,
    params: &'a ModelParams,
    rho: f64,
    iterations: usize,
    residual_r: f64,
    spectral_radius: f64,
    balance_residual: f64,
    pi0: &'a [f64],
    pi1: &'a [f64],
    r: Vec<Vec<f64>>,
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let params = cfg.params();
    let (row, a) = analytic_row(cfg.model, &params, &cfg.solver)?;
    let qbd = build_qbd(cfg.model, &params)?;
    let detail = SolveDetail {
        model: cfg.model,
        params: &params,
        rho: a.report.rho,
        iterations: a.rate.iterations,
        residual_r: a.rate.residual,
        spectral_radius: a.rate.spectral_radius,
        balance_residual: balance_residual(&qbd, &a.stationary)?,
        pi0: &a.stationary.pi0,
        pi1: &a.stationary.pi1,
        r: a.stationary.r.to_rows(),
    };
    let mut out = CommandOutput::default();
    out.file(".csv", csv_string(|b| write_results(b, &[row]))?);
    out.files.push(OutputFile {
        suffix: "_detail.json",
        contents: serde_json::to_string_pretty(&detail)? + "\n",
        detail: true,
    });
    Ok(out)
}

fn sweep_point(
    model: Model,
    params: &ModelParams,
    opts: &SolverOptions,
    allow_unstable: bool,
) -> Result<ResultRow, CliError> {
    let rho = traffic_intensity(params);
    if rho >= 1.0 {
        if allow_unstable {
            return Ok(ResultRow::new(model, params, rho, "analytic"));
        }
        return Err(CliError::Unstable(format!(
            "rho = {} at {}",
            fmt_num(rho),
            describe(params)
        )));
    }
    analytic_row(model, params, opts).map(|(row, _)| row)
}

fn describe(p: &ModelParams) -> String {
    format!(
        "lambda={} mu={} gamma={} N={}",
        fmt_num(p.lambda),
        fmt_num(p.mu),
        fmt_num(p.gamma),
        p.n_owners
    )
}

/// One row per grid point, in grid order.
pub fn cmd_sweep(cfg: &RunConfig, allow_unstable: bool) -> Result<CommandOutput, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a sweep section".into()))?;
    let grid = sweep.grid(&cfg.params());
    let rows: Vec<Result<ResultRow, CliError>> = grid
        .par_iter()
        .map(|p| sweep_point(cfg.model, p, &cfg.solver, allow_unstable))
        .collect();
    let rows: Vec<ResultRow> = rows.into_iter().collect::<Result<_, _>>()?;
    let mut out = CommandOutput::default();
    if cfg.model == Model::One && sweep.parameter == SweepParameter::Gamma {
        out.notes
            .push("note: in model one the mean number of idle owners equals N - lambda/mu for every gamma".into());
    }
    out.file(".csv", csv_string(|b| write_results(b, &rows))?);
    Ok(out)
}

fn sim_row(model: Model, params: &ModelParams, sim: &SimResult, seed: u64) -> ResultRow {
    let mut row = ResultRow::new(model, params, traffic_intensity(params), "simulated");
    let (eq1, eq2) = (sim.eq1.mean, sim.eq2.mean);
    let (f1, f2) = platform_qbd::measures::profits(params, eq1);
    row.eq1 = Some(eq1);
    row.eq2 = Some(eq2);
    row.ew_little = platform_qbd::measures::little_sojourn(params, eq1, eq2, model).ok();
    row.f1 = Some(f1);
    row.f2 = Some(f2);
    row.f1_throughput_based = Some((1.0 - params.share) * params.price * sim.throughput.mean);
    row.throughput = Some(sim.throughput.mean);
    row.seed = Some(seed);
    row
}

fn sim_config(cfg: &RunConfig) -> Result<&SimConfig, CliError> {
    cfg.sim
        .as_ref()
        .ok_or_else(|| CliError::Config("this command needs a sim section".into()))
}

/// Simulation estimates next to the analytic values, when the point is
/// stable.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let params = cfg.params();
    let sim_cfg = sim_config(cfg)?;
    let analytic = if traffic_intensity(&params) < 1.0 {
        Some(analytic_row(cfg.model, &params, &cfg.solver)?.0)
    } else {
        None
    };
    let sim = simulate(cfg.model, &params, sim_cfg)?;
    let mut rows: Vec<ResultRow> = analytic.iter().cloned().collect();
    rows.push(sim_row(cfg.model, &params, &sim, sim_cfg.base_seed));

    let metrics = [
        ("eq1", analytic.as_ref().and_then(|r| r.eq1), &sim.eq1),
        ("eq2", analytic.as_ref().and_then(|r| r.eq2), &sim.eq2),
        (
            "throughput",
            analytic.as_ref().and_then(|r| r.throughput),
            &sim.throughput,
        ),
        (
            "sojourn_mean",
            analytic.as_ref().and_then(|r| r.ew_little),
            &sim.sojourn_mean,
        ),
    ];
    let table: Vec<Vec<String>> = metrics
        .iter()
        .map(|(name, value, est)| {
            let ci = est.ci_halfwidth.map(fmt_num).unwrap_or_else(|| "NA".into());
            let within = match (value, est.ci_halfwidth) {
                (Some(v), Some(_)) => est.contains(*v).to_string(),
                _ => "NA".into(),
            };
            vec![
                name.to_string(),
                fmt_opt(*value),
                fmt_num(est.mean),
                ci,
                within,
                est.replications.to_string(),
                sim_cfg.base_seed.to_string(),
            ]
        })
        .collect();
    let header = [
        "metric",
        "analytic",
        "sim_mean",
        "ci_halfwidth",
        "within_ci",
        "replications",
        "seed",
    ];
    let mut out = CommandOutput::default();
    out.file(".csv", csv_string(|b| write_results(b, &rows))?);
    out.file("_sim.csv", csv_string(|b| write_table(b, &header, &table))?);
    Ok(out)
}

const DEFAULT_CDF_POINTS: usize = 21;
const DEFAULT_HORIZON_FACTOR: f64 = 10.0;

fn sojourn_times(cfg: &RunConfig, mean: f64) -> Vec<f64> {
    let sc = cfg.sojourn.clone().unwrap_or_default();
    if !sc.times.is_empty() {
        return sc.times;
    }
    let points = sc.points.unwrap_or(DEFAULT_CDF_POINTS).max(2);
    let horizon = sc.horizon_factor.unwrap_or(DEFAULT_HORIZON_FACTOR) * mean;
    (0..points).map(|k| horizon * k as f64 / (points - 1) as f64).collect()
}

/// Distribution function samples and the three mean estimates. Model two
/// has no distribution path and exits with the unsupported code after
/// writing its means.
pub fn cmd_sojourn(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    let params = cfg.params();
    let (row, a) = analytic_row(cfg.model, &params, &cfg.solver)?;
    let little = row
        .ew_little
        .ok_or_else(|| CliError::Config("sojourn times need lambda > 0".into()))?;
    let times = sojourn_times(cfg, little);
    if let Some(t) = times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::Config(format!("invalid sojourn time {t}")));
    }
    let sim = match &cfg.sim {
        Some(s) => {
            let s = SimConfig {
                cdf_times: times.clone(),
                ..s.clone()
            };
            Some(simulate(cfg.model, &params, &s)?)
        }
        None => None,
    };

    let mut out = CommandOutput::default();
    let mut ks = None;
    let mut residual = None;
    let mut levels = None;
    if cfg.model == Model::One {
        let tol = cfg.solver.truncation_tol;
        let chain = build_absorbing_chain(&params, &a.stationary, &cfg.solver)?;
        let cdf = sojourn_cdf_grid(&chain, &times, tol)?;
        let survival = transient_survival_grid(&chain, &times, tol)?;
        let ones = platform_qbd::sojourn::ChainVector::ones(&chain, 0);
        let solved = platform_qbd::sojourn::censored_inverse_apply(&chain, &ones, tol)?;
        residual = Some(solved.residual);
        levels = Some(solved.truncation_levels);
        let mut table = Vec::with_capacity(times.len());
        for (k, t) in times.iter().enumerate() {
            let mut r = vec![fmt_num(*t), fmt_num(cdf[k]), fmt_num(survival[k])];
            if let Some(s) = &sim {
                r.push(fmt_num(s.sojourn_cdf[k].1.mean));
            }
            table.push(r);
        }
        if let Some(s) = &sim {
            ks = Some(
                cdf.iter()
                    .zip(&s.sojourn_cdf)
                    .map(|(f, (_, e))| (f - e.mean).abs())
                    .fold(0.0, f64::max),
            );
        }
        let mut header = vec!["t", "cdf", "transient_survival"];
        if sim.is_some() {
            header.push("sim_cdf");
        }
        out.file("_sojourn.csv", csv_string(|b| write_table(b, &header, &table))?);
    } else {
        out.notes
            .push("sojourn distribution is only available for model one; means are still written".into());
        out.exit_code = EXIT_UNSUPPORTED;
    }

    let header = [
        "model",
        "mean_rg",
        "mean_little",
        "mean_sim",
        "sim_ci_halfwidth",
        "ks_distance",
        "truncation_levels",
        "residual",
        "seed",
    ];
    let means = vec![vec![
        cfg.model.as_str().to_string(),
        fmt_opt(row.ew_rg),
        fmt_num(little),
        fmt_opt(sim.as_ref().map(|s| s.sojourn_mean.mean)),
        fmt_opt(sim.as_ref().and_then(|s| s.sojourn_mean.ci_halfwidth)),
        fmt_opt(ks),
        levels.map(|l| l.to_string()).unwrap_or_default(),
        fmt_opt(residual),
        cfg.sim.as_ref().map(|s| s.base_seed.to_string()).unwrap_or_default(),
    ]];
    out.file("_sojourn_means.csv", csv_string(|b| write_table(b, &header, &means))?);
    Ok(out)
}

//! Event-driven simulation of both platform models and a brute-force
//! stationary solve of the truncated generators.
//!
//! Replication `r` of a run with base seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(splitmix64(s + r))`, so results depend only on
//! the configuration and not on how replications are scheduled.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::linalg::Lu;
use crate::model_one::StateIndexOne;
use crate::params::ModelParams;
use crate::qbd::Model;
use crate::{model_one, model_two};

/// Two-sided 99% standard normal quantile.
pub const Z_99: f64 = 2.575_829_303_548_9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub max_events: u64,
    pub warmup_fraction: f64,
    pub replications: usize,
    pub base_seed: u64,
    /// Points at which the empirical sojourn distribution is evaluated.
    pub cdf_times: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            max_events: 500_000,
            warmup_fraction: 0.2,
            replications: 20,
            base_seed: 20_240_601,
            cdf_times: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(QbdError::InvalidParams("replications must be at least 1".into()));
        }
        if self.max_events < 1000 {
            return Err(QbdError::InvalidParams("max_events must be at least 1000".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(QbdError::InvalidParams("warmup_fraction must lie in [0, 1)".into()));
        }
        if self.cdf_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(QbdError::InvalidParams("cdf_times must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Mean over replications with a normal-approximation 99% half-width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    /// Absent with a single replication.
    pub ci_halfwidth: Option<f64>,
    pub replications: usize,
    pub per_replication: Vec<f64>,
}

impl SimEstimate {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let ci_halfwidth = (n >= 2).then(|| {
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Z_99 * (var / n as f64).sqrt()
        });
        Self {
            mean,
            ci_halfwidth,
            replications: n,
            per_replication: samples,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match self.ci_halfwidth {
            Some(h) => (value - self.mean).abs() <= h,
            None => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub model: Model,
    pub eq1: SimEstimate,
    pub eq2: SimEstimate,
    pub throughput: SimEstimate,
    pub sojourn_mean: SimEstimate,
    /// `(t, estimate of P(W <= t))` for each configured time.
    pub sojourn_cdf: Vec<(f64, SimEstimate)>,
}

/// Output of one replication.
#[derive(Debug, Clone, PartialEq)]
struct Replication {
    eq1: f64,
    eq2: f64,
    throughput: f64,
    sojourn_mean: f64,
    cdf: Vec<f64>,
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replication_rng(base_seed: u64, replication: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(base_seed.wrapping_add(replication as u64)))
}

fn exp_sample(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    // 1 - U lies in (0, 1]
    -(1.0 - rng.gen::<f64>()).ln() / rate
}

/// Time averages, completions and sojourn samples after the warmup.
struct Recorder {
    warmup_events: u64,
    measuring: bool,
    start: f64,
    area_idle: f64,
    area_waiting: f64,
    completions: u64,
    sojourns: Vec<f64>,
}

impl Recorder {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            warmup_events: (cfg.max_events as f64 * cfg.warmup_fraction).floor() as u64,
            measuring: false,
            start: 0.0,
            area_idle: 0.0,
            area_waiting: 0.0,
            completions: 0,
            sojourns: Vec::new(),
        }
    }

    fn check_warmup(&mut self, event: u64, now: f64) {
        if !self.measuring && event >= self.warmup_events {
            self.measuring = true;
            self.start = now;
        }
    }

    fn hold(&mut self, dt: f64, idle: usize, waiting: usize) {
        if self.measuring {
            self.area_idle += dt * idle as f64;
            self.area_waiting += dt * waiting as f64;
        }
    }

    /// Only seekers arriving after the warmup are recorded.
    fn depart(&mut self, now: f64, arrived: f64) {
        if self.measuring {
            self.completions += 1;
            if arrived >= self.start {
                self.sojourns.push(now - arrived);
            }
        }
    }

    fn finish(self, now: f64, cdf_times: &[f64]) -> Replication {
        let span = now - self.start;
        let n = self.sojourns.len().max(1) as f64;
        let cdf = cdf_times
            .iter()
            .map(|t| self.sojourns.iter().filter(|w| **w <= *t).count() as f64 / n)
            .collect();
        Replication {
            eq1: self.area_idle / span,
            eq2: self.area_waiting / span,
            throughput: self.completions as f64 / span,
            sojourn_mean: self.sojourns.iter().sum::<f64>() / n,
            cdf,
        }
    }
}

/// Model one: seekers wait in FCFS order; the first `min(i, j)` of them are
/// being matched, each at rate `gamma`. A matched seeker stays with its owner
/// until the service completes.
fn run_one(params: &ModelParams, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Replication {
    let n = params.n_owners;
    let mut rec = Recorder::new(cfg);
    let mut queue: VecDeque<f64> = VecDeque::new();
    let mut in_service: Vec<f64> = Vec::with_capacity(n);
    let mut now = 0.0;
    for event in 0..cfg.max_events {
        rec.check_warmup(event, now);
        let idle = n - in_service.len();
        let matching = queue.len().min(idle);
        let r_arrival = params.lambda;
        let r_match = matching as f64 * params.gamma;
        let r_service = in_service.len() as f64 * params.mu;
        let total = r_arrival + r_match + r_service;
        let dt = exp_sample(rng, total);
        rec.hold(dt, idle, queue.len());
        now += dt;
        let u = rng.gen::<f64>() * total;
        if u < r_arrival {
            queue.push_back(now);
        } else if u < r_arrival + r_match {
            let k = rng.gen_range(0..matching);
            let arrived = queue.remove(k).expect("index below matching count");
            in_service.push(arrived);
        } else {
            let k = rng.gen_range(0..in_service.len());
            let arrived = in_service.swap_remove(k);
            rec.depart(now, arrived);
        }
    }
    rec.finish(now, &cfg.cdf_times)
}

/// Model two: an arriving seeker takes an idle owner at once (phase 1,
/// matching at rate `gamma`, then phase 2, service at rate `mu`) or joins the
/// FCFS queue; a finishing owner takes the head of the queue.
fn run_two(params: &ModelParams, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Replication {
    let n = params.n_owners;
    let mut rec = Recorder::new(cfg);
    let mut queue: VecDeque<f64> = VecDeque::new();
    let mut phase1: Vec<f64> = Vec::with_capacity(n);
    let mut phase2: Vec<f64> = Vec::with_capacity(n);
    let mut now = 0.0;
    for event in 0..cfg.max_events {
        rec.check_warmup(event, now);
        let idle = n - phase1.len() - phase2.len();
        let r_arrival = params.lambda;
        let r_match = phase1.len() as f64 * params.gamma;
        let r_service = phase2.len() as f64 * params.mu;
        let total = r_arrival + r_match + r_service;
        let dt = exp_sample(rng, total);
        rec.hold(dt, idle, queue.len());
        now += dt;
        let u = rng.gen::<f64>() * total;
        if u < r_arrival {
            if idle > 0 {
                phase1.push(now);
            } else {
                queue.push_back(now);
            }
        } else if u < r_arrival + r_match {
            let k = rng.gen_range(0..phase1.len());
            let arrived = phase1.swap_remove(k);
            phase2.push(arrived);
        } else {
            let k = rng.gen_range(0..phase2.len());
            let arrived = phase2.swap_remove(k);
            rec.depart(now, arrived);
            if let Some(next) = queue.pop_front() {
                phase1.push(next);
            }
        }
    }
    rec.finish(now, &cfg.cdf_times)
}

/// Runs `cfg.replications` independent replications in parallel and merges
/// them in replication order.
pub fn simulate(model: Model, params: &ModelParams, cfg: &SimConfig) -> Result<SimResult> {
    params.validate()?;
    cfg.validate()?;
    if params.lambda <= 0.0 {
        return Err(QbdError::InvalidParams("simulation needs lambda > 0".into()));
    }
    let reps: Vec<Replication> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(cfg.base_seed, r);
            match model {
                Model::One => run_one(params, cfg, &mut rng),
                Model::Two => run_two(params, cfg, &mut rng),
            }
        })
        .collect();
    let collect = |f: &dyn Fn(&Replication) -> f64| SimEstimate::from_samples(reps.iter().map(f).collect());
    let sojourn_cdf = cfg
        .cdf_times
        .iter()
        .enumerate()
        .map(|(k, &t)| (t, collect(&|r| r.cdf[k])))
        .collect();
    Ok(SimResult {
        model,
        eq1: collect(&|r| r.eq1),
        eq2: collect(&|r| r.eq2),
        throughput: collect(&|r| r.throughput),
        sojourn_mean: collect(&|r| r.sojourn_mean),
        sojourn_cdf,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionOne {
    Arrival,
    Match,
    Service,
}

/// One exit from the pinned model-one state `(i, j)`, drawn with the same
/// race the simulator uses. Returns the holding time and the event.
pub fn sample_transition_one(
    params: &ModelParams,
    i: usize,
    j: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, TransitionOne)> {
    if j > params.n_owners {
        return Err(QbdError::InvalidParams(format!("idle owners {j} > N")));
    }
    let r_arrival = params.lambda;
    let r_match = i.min(j) as f64 * params.gamma;
    let r_service = (params.n_owners - j) as f64 * params.mu;
    let total = r_arrival + r_match + r_service;
    if total <= 0.0 {
        return Err(QbdError::InvalidParams("state has no outgoing transitions".into()));
    }
    let dt = exp_sample(rng, total);
    let u = rng.gen::<f64>() * total;
    let ev = if u < r_arrival {
        TransitionOne::Arrival
    } else if u < r_arrival + r_match {
        TransitionOne::Match
    } else {
        TransitionOne::Service
    };
    Ok((dt, ev))
}

/// Stationary distribution of the reflecting truncation with `levels`
/// repeating levels, solved densely.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSolution {
    pub model: Model,
    pub levels: usize,
    pub level0_size: usize,
    pub phases: usize,
    pub pi: Vec<f64>,
    /// Mass on the last retained level.
    pub tail_mass: f64,
    pub eq1: f64,
    pub eq2: f64,
    pub throughput: f64,
}

impl TruncatedSolution {
    /// Mass of level `k` (level 0 is the whole boundary).
    pub fn level_mass(&self, k: usize) -> f64 {
        if k == 0 {
            self.pi[..self.level0_size].iter().sum()
        } else {
            let off = self.level0_size + (k - 1) * self.phases;
            self.pi[off..off + self.phases].iter().sum()
        }
    }
}

/// Solves `pi Q = 0`, `pi e = 1` with the first balance equation replaced by
/// the normalization. Measures are read off state by state.
pub fn truncated_stationary(model: Model, params: &ModelParams, levels: usize) -> Result<TruncatedSolution> {
    if levels < 2 {
        return Err(QbdError::InvalidParams("truncation needs at least two levels".into()));
    }
    let q = match model {
        Model::One => model_one::assemble_truncated_generator(params, levels)?,
        Model::Two => model_two::assemble_truncated_generator(params, levels)?,
    };
    let order = q.rows();
    let mut sys = q;
    for r in 0..order {
        sys[(r, 0)] = 1.0;
    }
    let mut rhs = vec![0.0; order];
    rhs[0] = 1.0;
    let pi = Lu::factor(&sys).map_err(|_| QbdError::RankDeficient)?.solve_left(&rhs);

    let n = params.n_owners;
    let (level0_size, phases) = match model {
        Model::One => (n * (n + 1), n + 1),
        Model::Two => ((1usize << n) - 1, 1usize << n),
    };
    let (mut eq1, mut eq2, mut busy) = (0.0, 0.0, 0.0);
    match model {
        Model::One => {
            let idx = StateIndexOne::new(n);
            for (flat, p) in pi.iter().enumerate() {
                let (level, phase) = if flat < level0_size {
                    (0, flat)
                } else {
                    (1 + (flat - level0_size) / phases, (flat - level0_size) % phases)
                };
                let (i, j) = idx.to_state(level, phase)?;
                eq1 += j as f64 * p;
                eq2 += i as f64 * p;
                busy += (n - j) as f64 * p;
            }
        }
        Model::Two => {
            for (flat, p) in pi.iter().enumerate() {
                if flat < level0_size {
                    let sub = (flat + 1).ilog2() as usize;
                    let idx = flat - model_two::level0_offset(sub);
                    eq1 += (n - sub) as f64 * p;
                    busy += idx.count_ones() as f64 * p;
                } else {
                    let k = 1 + (flat - level0_size) / phases;
                    let idx = (flat - level0_size) % phases;
                    eq2 += (k - 1) as f64 * p;
                    busy += idx.count_ones() as f64 * p;
                }
            }
        }
    }
    let tail_mass = pi[order - phases..].iter().sum();
    Ok(TruncatedSolution {
        model,
        levels,
        level0_size,
        phases,
        pi,
        tail_mass,
        eq1,
        eq2,
        throughput: busy * params.mu,
    })
}

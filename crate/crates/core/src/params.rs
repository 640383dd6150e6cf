//! Model parameters and the stability analysis shared by both platform models.

use serde::{Deserialize, Serialize};

use crate::error::{QbdError, Result};
use crate::linalg::DenseMatrix;

/// One instance of either platform model.
///
/// Seekers arrive as a Poisson stream of rate `lambda`; each of the
/// `n_owners` owners, once matched, serves at rate `mu`; matching a waiting
/// seeker to an idle owner takes an exponential time of rate `gamma`.
/// Each completed service earns `price`, of which the fraction `share` goes
/// to the owner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub lambda: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_owners: usize,
    pub price: f64,
    pub share: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, mu: f64, gamma: f64, n_owners: usize, price: f64, share: f64) -> Result<Self> {
        let p = Self {
            lambda,
            mu,
            gamma,
            n_owners,
            price,
            share,
        };
        p.validate()?;
        Ok(p)
    }

    /// Rates only; price 1 and an even split.
    pub fn rates(lambda: f64, mu: f64, gamma: f64, n_owners: usize) -> Result<Self> {
        Self::new(lambda, mu, gamma, n_owners, 1.0, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QbdError::InvalidParams(msg));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda must be finite and >= 0, got {}", self.lambda));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return bad(format!("mu must be finite and > 0, got {}", self.mu));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be finite and > 0, got {}", self.gamma));
        }
        if self.n_owners < 1 {
            return bad("n_owners must be at least 1".into());
        }
        if !(self.share > 0.0 && self.share < 1.0) {
            return bad(format!("share must lie in (0, 1), got {}", self.share));
        }
        if !(self.price.is_finite() && self.price >= 0.0) {
            return bad(format!("price must be finite and >= 0, got {}", self.price));
        }
        Ok(())
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_n_owners(mut self, n: usize) -> Self {
        self.n_owners = n;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rho: f64,
    pub stable: bool,
    pub n_min_exact: usize,
    pub n_min_corollary: usize,
    pub alpha: Vec<f64>,
    pub drift_up: f64,
    pub drift_down: f64,
}

/// `rho = lambda (mu + gamma) / (N mu gamma)`; identical for both models.
pub fn traffic_intensity(params: &ModelParams) -> f64 {
    params.lambda * (params.mu + params.gamma) / (params.n_owners as f64 * params.mu * params.gamma)
}

/// Strict inequality: `rho == 1` is null recurrent and reported unstable.
pub fn is_stable(params: &ModelParams) -> bool {
    traffic_intensity(params) < 1.0
}

/// Smallest owner count making the instance stable, and the (weaker)
/// sufficient bound `N > 1 + floor((lambda/mu)(1 + mu/gamma))`.
pub fn min_stable_owners(params: &ModelParams) -> (usize, usize) {
    let load = params.lambda * (params.mu + params.gamma) / (params.mu * params.gamma);
    let exact = (load.floor() as usize + 1).max(1);
    let corollary_load = (params.lambda / params.mu) * (1.0 + params.mu / params.gamma);
    let corollary = if params.lambda == 0.0 {
        1
    } else {
        corollary_load.floor() as usize + 2
    };
    (exact, corollary.max(1))
}

/// Stationary vector of `D = A + B + C`, the phase process of the repeating
/// levels: `alpha_k ∝ C(N, k) (mu/gamma)^k`.
///
/// Binomial weights are built by the ratio `C(N,k)/C(N,k-1) = (N-k+1)/k`
/// in log space so large `N` does not overflow.
pub fn drift_alpha(params: &ModelParams) -> Vec<f64> {
    let n = params.n_owners;
    let log_ratio = (params.mu / params.gamma).ln();
    let mut log_w = Vec::with_capacity(n + 1);
    let mut log_binom = 0.0_f64;
    log_w.push(0.0);
    for k in 1..=n {
        log_binom += ((n - k + 1) as f64).ln() - (k as f64).ln();
        log_w.push(log_binom + k as f64 * log_ratio);
    }
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// `(up, down) = (lambda, N mu gamma / (mu + gamma))`.
pub fn mean_drift_rates(params: &ModelParams) -> (f64, f64) {
    let n = params.n_owners as f64;
    (params.lambda, n * params.mu * params.gamma / (params.mu + params.gamma))
}

/// The tridiagonal matrix `A + B + C` of the model-one repeating levels.
pub fn drift_generator(params: &ModelParams) -> DenseMatrix {
    let n = params.n_owners;
    let mut d = DenseMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        let serve = (n - i) as f64 * params.mu;
        let matched = i as f64 * params.gamma;
        d[(i, i)] = -(serve + matched);
        if i < n {
            d[(i, i + 1)] = serve;
        }
        if i > 0 {
            d[(i, i - 1)] = matched;
        }
    }
    d
}

pub fn stability_report(params: &ModelParams) -> StabilityReport {
    let rho = traffic_intensity(params);
    let (n_min_exact, n_min_corollary) = min_stable_owners(params);
    let (drift_up, drift_down) = mean_drift_rates(params);
    StabilityReport {
        rho,
        stable: rho < 1.0,
        n_min_exact,
        n_min_corollary,
        alpha: drift_alpha(params),
        drift_up,
        drift_down,
    }
}

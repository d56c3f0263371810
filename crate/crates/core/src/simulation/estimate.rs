use serde::{Deserialize, Serialize};

use crate::market_model::MarketParams;
use crate::simulation::{simulate_terminal, SimConfig, Strategy};
use crate::{Error, Result};

/// Neumaier-compensated sum. Summation order is fixed, so the result does not
/// depend on how the terms were produced.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// `U(x) = (x^(1-gamma) - 1) / (1-gamma)`, evaluated without cancellation near `x = 1`.
pub fn crra_utility(x: f64, gamma: f64) -> f64 {
    ((1.0 - gamma) * x.ln()).exp_m1() / (1.0 - gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub se_mean: f64,
    /// Asymptotic standard error of the sample variance, from the fourth central moment.
    pub se_variance: f64,
}

pub fn sample_moments(xs: &[f64]) -> SampleMoments {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        let mean = xs.first().copied().unwrap_or(f64::NAN);
        return SampleMoments { mean, variance: f64::NAN, se_mean: f64::NAN, se_variance: f64::NAN };
    }
    let mean = compensated_sum(xs.iter().copied()) / n;
    let m2 = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / n;
    let m4 = compensated_sum(xs.iter().map(|x| (x - mean).powi(4))) / n;
    let variance = m2 * n / (n - 1.0);
    SampleMoments {
        mean,
        variance,
        se_mean: (variance / n).sqrt(),
        se_variance: ((m4 - m2 * m2).max(0.0) / n).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub utility_gamma: f64,
}

/// Terminal utilities of several strategies evaluated on common paths.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilitySamples {
    pub labels: Vec<String>,
    pub gamma: f64,
    /// `[strategy][path]`.
    pub utilities: Vec<Vec<f64>>,
}

impl UtilitySamples {
    pub fn estimate(&self, k: usize) -> McEstimate {
        let m = sample_moments(&self.utilities[k]);
        McEstimate { mean: m.mean, std_error: m.se_mean, n_paths: self.utilities[k].len(), utility_gamma: self.gamma }
    }

    /// Mean and standard error of `U_i - U_j` over common paths.
    pub fn paired_difference(&self, i: usize, j: usize) -> McEstimate {
        let d: Vec<f64> = self.utilities[i].iter().zip(&self.utilities[j]).map(|(a, b)| a - b).collect();
        let m = sample_moments(&d);
        McEstimate { mean: m.mean, std_error: m.se_mean, n_paths: d.len(), utility_gamma: self.gamma }
    }
}

pub fn mc_utility_samples(
    p: MarketParams,
    strategies: &[Strategy],
    cfg: &SimConfig,
    gamma: f64,
) -> Result<UtilitySamples> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::DomainError(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    let terminal = simulate_terminal(p, strategies, cfg)?;
    let utilities = (0..strategies.len())
        .map(|k| terminal.iter().map(|s| ((1.0 - gamma) * s.log_x[k]).exp_m1() / (1.0 - gamma)).collect())
        .collect();
    Ok(UtilitySamples { labels: strategies.iter().map(|s| s.label().to_string()).collect(), gamma, utilities })
}

/// Estimates `E[U(X_T)]` for one strategy.
pub fn mc_expected_utility(p: MarketParams, strategy: &Strategy, cfg: &SimConfig, gamma: f64) -> Result<McEstimate> {
    let samples = mc_utility_samples(p, std::slice::from_ref(strategy), cfg, gamma)?;
    Ok(samples.estimate(0))
}

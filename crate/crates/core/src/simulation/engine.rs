use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::market_model::{derive_spread, MarketParams, SpreadParams};
use crate::simulation::{PathStreams, Strategy};
use crate::{Error, Result};

/// Law of the initial spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSpread {
    /// `Z_0 ~ N(0, sigma_Z^2 / (2 kappa))`, independent of the Brownian motion.
    Stationary,
    /// `Z_0 = z`, for conditional expectations.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub horizon: f64,
    pub seed: u64,
    pub x0: f64,
    pub z0: InitialSpread,
    /// Weights are re-evaluated every `rebalance_every` steps and held in between.
    pub rebalance_every: usize,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, horizon: f64, seed: u64) -> Self {
        Self { n_paths, n_steps, horizon, seed, x0: 1.0, z0: InitialSpread::Stationary, rebalance_every: 1 }
    }

    pub fn with_fixed_z0(mut self, z0: f64) -> Self {
        self.z0 = InitialSpread::Fixed(z0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 || self.n_steps < 1 || self.rebalance_every < 1 {
            return Err(Error::InvalidArgument(format!(
                "need n_paths, n_steps, rebalance_every >= 1 (got {}, {}, {})",
                self.n_paths, self.n_steps, self.rebalance_every
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon = {} must be positive", self.horizon)));
        }
        if !(self.x0 > 0.0 && self.x0.is_finite()) {
            return Err(Error::NonPositiveWealth(self.x0));
        }
        if let InitialSpread::Fixed(z) = self.z0 {
            if !z.is_finite() {
                return Err(Error::InvalidArgument("initial spread must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// Materialised paths, indexed `[path][step]` (increments) or `[path][node]`
/// (levels, `n_steps + 1` nodes). Wealth is indexed `[strategy][path][node]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
    pub wz: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub s1: Vec<Vec<f64>>,
    pub s2: Vec<Vec<f64>>,
    pub x: Vec<Vec<Vec<f64>>>,
}

/// State of one path at the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminalState {
    pub z: f64,
    pub log_s1: f64,
    pub log_s2: f64,
    /// Log-wealth per strategy.
    pub log_x: Vec<f64>,
}

/// Per-step constants of the exact scheme.
struct Kernel<'a> {
    market: MarketParams,
    spread: SpreadParams,
    strategies: &'a [Strategy],
    cfg: SimConfig,
    dt: f64,
    sqrt_dt: f64,
    decay: f64,
    /// `Cov(U, dW^Z) / dt` where `U = int e^{-kappa (dt - s)} dW^Z_s`.
    slope: f64,
    /// Conditional standard deviation of `U` given `dW^Z`.
    cond_sd: f64,
    /// Unit vector along `b = Sigma^T (1, -c)^T` and its orthogonal complement.
    e: [f64; 2],
    e_perp: [f64; 2],
}

/// `Var(U) - Cov(U, W)^2 / dt` divided by `dt`, as a function of `u = kappa dt`.
fn conditional_variance_factor(u: f64) -> f64 {
    if u < 1e-3 {
        u * u / 12.0 - u * u * u / 12.0 + 17.0 * u.powi(4) / 360.0
    } else {
        let a = -(-2.0 * u).exp_m1() / (2.0 * u);
        let b = -(-u).exp_m1() / u;
        (a - b * b).max(0.0)
    }
}

impl<'a> Kernel<'a> {
    fn new(market: MarketParams, strategies: &'a [Strategy], cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let spread = derive_spread(market)?;
        let dt = cfg.dt();
        let kappa = spread.kappa;
        let u = kappa * dt;
        let cov = -(-u).exp_m1() / kappa;
        let b = market.spread_loading();
        let sz = spread.sigma_z();
        let e = [b[0] / sz, b[1] / sz];
        Ok(Self {
            market,
            spread,
            strategies,
            cfg,
            dt,
            sqrt_dt: dt.sqrt(),
            decay: (-u).exp(),
            slope: cov / dt,
            cond_sd: (dt * conditional_variance_factor(u)).sqrt(),
            e,
            e_perp: [-e[1], e[0]],
        })
    }

    /// Runs one path; `record` receives the levels and increments when present.
    fn run(&self, path: usize, mirror: bool, mut record: Option<&mut PathRecord>) -> Result<TerminalState> {
        let p = &self.market;
        let mut rng = PathStreams::new(self.cfg.seed, path as u64);
        let sz = self.spread.sigma_z();
        let kappa = self.spread.kappa;
        let alpha = p.alpha();
        let half_var = [0.5 * p.sigma1 * p.sigma1, 0.5 * p.sigma2 * p.sigma2];
        let sign = if mirror { -1.0 } else { 1.0 };

        let mut z = match self.cfg.z0 {
            InitialSpread::Stationary => self.spread.stationary_var.sqrt() * rng.spread_normal(),
            InitialSpread::Fixed(z0) => z0,
        };
        // log S2(0) = 0 and log S1(0) = Z_0 so the log-spread identity holds at t = 0
        let mut log_s = [z, 0.0];
        let n_strat = self.strategies.len();
        let mut log_x = vec![self.cfg.x0.ln(); n_strat];
        // (weights, alpha . w, |Sigma^T w|^2) per strategy
        let mut held = vec![([0.0; 2], 0.0, 0.0); n_strat];

        if let Some(rec) = record.as_deref_mut() {
            rec.push_levels(z, log_s, &log_x);
        }
        for step in 0..self.cfg.n_steps {
            let t = step as f64 * self.dt;
            if step % self.cfg.rebalance_every == 0 {
                for (k, s) in self.strategies.iter().enumerate() {
                    let w = s.weights(z, t);
                    if !(w[0].is_finite() && w[1].is_finite()) {
                        return Err(Error::NonFiniteWeight { label: s.label().to_string(), z, t });
                    }
                    let sw = p.sigma_t_mul(w);
                    held[k] = (w, w[0] * alpha[0] + w[1] * alpha[1], sw[0] * sw[0] + sw[1] * sw[1]);
                }
            }

            let dwz = self.sqrt_dt * rng.spread_normal();
            let resid = self.cond_sd * rng.spread_normal();
            let dwp = sign * self.sqrt_dt * rng.orthogonal_normal();

            let z_next = self.decay * z + sz * (self.slope * dwz + resid);
            let int_z = (sz * dwz - (z_next - z)) / kappa;
            let dw = [
                self.e[0] * dwz + self.e_perp[0] * dwp,
                self.e[1] * dwz + self.e_perp[1] * dwp,
            ];
            let sdw = p.sigma_mul(dw);
            for i in 0..2 {
                log_s[i] += alpha[i] * int_z - half_var[i] * self.dt + sdw[i];
            }
            for (lx, (w, drift, var)) in log_x.iter_mut().zip(&held) {
                *lx += drift * int_z - 0.5 * var * self.dt + w[0] * sdw[0] + w[1] * sdw[1];
            }
            z = z_next;

            if let Some(rec) = record.as_deref_mut() {
                rec.w1.push(dw[0]);
                rec.w2.push(dw[1]);
                rec.wz.push(dwz);
                rec.push_levels(z, log_s, &log_x);
            }
        }
        Ok(TerminalState { z, log_s1: log_s[0], log_s2: log_s[1], log_x })
    }
}

#[derive(Default)]
struct PathRecord {
    w1: Vec<f64>,
    w2: Vec<f64>,
    wz: Vec<f64>,
    z: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    x: Vec<Vec<f64>>,
}

impl PathRecord {
    fn with_capacity(n_steps: usize, n_strat: usize) -> Self {
        Self {
            w1: Vec::with_capacity(n_steps),
            w2: Vec::with_capacity(n_steps),
            wz: Vec::with_capacity(n_steps),
            z: Vec::with_capacity(n_steps + 1),
            s1: Vec::with_capacity(n_steps + 1),
            s2: Vec::with_capacity(n_steps + 1),
            x: vec![Vec::with_capacity(n_steps + 1); n_strat],
        }
    }

    fn push_levels(&mut self, z: f64, log_s: [f64; 2], log_x: &[f64]) {
        self.z.push(z);
        self.s1.push(log_s[0].exp());
        self.s2.push(log_s[1].exp());
        for (xs, lx) in self.x.iter_mut().zip(log_x) {
            xs.push(lx.exp());
        }
    }
}

fn collect_bundle(
    kernel: &Kernel<'_>,
    records: Vec<PathRecord>,
) -> PathBundle {
    let cfg = &kernel.cfg;
    let n_strat = kernel.strategies.len();
    let mut bundle = PathBundle {
        times: (0..=cfg.n_steps).map(|i| i as f64 * kernel.dt).collect(),
        labels: kernel.strategies.iter().map(|s| s.label().to_string()).collect(),
        x: vec![Vec::with_capacity(records.len()); n_strat],
        ..PathBundle::default()
    };
    for rec in records {
        bundle.w1.push(rec.w1);
        bundle.w2.push(rec.w2);
        bundle.wz.push(rec.wz);
        bundle.z.push(rec.z);
        bundle.s1.push(rec.s1);
        bundle.s2.push(rec.s2);
        for (k, xs) in rec.x.into_iter().enumerate() {
            bundle.x[k].push(xs);
        }
    }
    bundle
}

fn simulate_impl(p: MarketParams, strategies: &[Strategy], cfg: &SimConfig, mirror: bool) -> Result<PathBundle> {
    let kernel = Kernel::new(p, strategies, *cfg)?;
    let records = (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| {
            let mut rec = PathRecord::with_capacity(cfg.n_steps, strategies.len());
            kernel.run(path, mirror, Some(&mut rec))?;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(collect_bundle(&kernel, records))
}

/// Simulates and stores every path. Memory grows as `n_paths * n_steps`; use
/// [`simulate_terminal`] for large Monte Carlo runs.
pub fn simulate(p: MarketParams, strategies: &[Strategy], cfg: &SimConfig) -> Result<PathBundle> {
    simulate_impl(p, strategies, cfg, false)
}

/// Simulates a bundle and its mirror image, in which the Brownian direction
/// orthogonal to the spread is negated. Spread paths coincide bit for bit.
pub fn make_orthogonal_pair(
    p: MarketParams,
    strategies: &[Strategy],
    cfg: &SimConfig,
) -> Result<(PathBundle, PathBundle)> {
    Ok((simulate_impl(p, strategies, cfg, false)?, simulate_impl(p, strategies, cfg, true)?))
}

/// Simulates every path but keeps only its terminal state.
pub fn simulate_terminal(p: MarketParams, strategies: &[Strategy], cfg: &SimConfig) -> Result<Vec<TerminalState>> {
    let kernel = Kernel::new(p, strategies, *cfg)?;
    (0..cfg.n_paths)
        .into_par_iter()
        .map(|path| kernel.run(path, false, None))
        .collect()
}

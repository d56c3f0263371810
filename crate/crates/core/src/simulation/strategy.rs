use std::fmt;
use std::sync::Arc;

use crate::closed_form::{mn_optimal_weights, riccati_h, MertonSolution};
use crate::market_model::{check_wellposedness, derive_spread, MarketParams};
use crate::{Error, Result};

type Rule = dyn Fn(f64, f64) -> [f64; 2] + Send + Sync;

/// A Markov portfolio rule `(z, t) -> (pi1, pi2)` with a label.
#[derive(Clone)]
pub struct Strategy {
    label: String,
    rule: Arc<Rule>,
}

impl fmt::Debug for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Strategy").field("label", &self.label).finish_non_exhaustive()
    }
}

impl Strategy {
    pub fn new(label: impl Into<String>, rule: impl Fn(f64, f64) -> [f64; 2] + Send + Sync + 'static) -> Self {
        Self { label: label.into(), rule: Arc::new(rule) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn weights(&self, z: f64, t: f64) -> [f64; 2] {
        (self.rule)(z, t)
    }

    /// Holds only the riskless asset.
    pub fn zero() -> Self {
        Self::new("zero", |_, _| [0.0, 0.0])
    }

    pub fn constant(w: [f64; 2]) -> Self {
        Self::new(format!("constant({}, {})", w[0], w[1]), move |_, _| w)
    }

    /// The HJB-optimal feedback rule of `sol`.
    pub fn optimal(sol: &MertonSolution) -> Self {
        let spec = sol.spec;
        let horizon = sol.horizon;
        let myopic = sol.myopic_loading();
        let c = sol.market.c;
        Self::new("optimal", move |z, t| match riccati_h(&spec, horizon - t) {
            Ok(h) => [(myopic[0] + h) * z, (myopic[1] - c * h) * z],
            Err(_) => [f64::NAN, f64::NAN],
        })
    }

    /// The market-neutral optimal rule; requires the market-neutrality condition.
    pub fn market_neutral(p: MarketParams, gamma: f64, horizon: f64) -> Result<Self> {
        let report = check_wellposedness(p)?;
        if !report.holds {
            return Err(Error::ConditionViolated { residual: report.residual });
        }
        // validates gamma and the horizon once
        mn_optimal_weights(p, gamma, horizon, 0.0, 0.0)?;
        let spread = derive_spread(p)?;
        let sg = gamma.sqrt();
        let rate = spread.kappa / sg;
        let base = -spread.kappa / spread.sigma_z2;
        let c = p.c;
        Ok(Self::new("market-neutral", move |z, t| {
            let th = (rate * (horizon - t)).tanh();
            let w = base * (th + 1.0 / sg) / (th + sg) * z;
            [w, -c * w]
        }))
    }

    /// `s * pi(z, t)`.
    pub fn scaled(&self, s: f64) -> Self {
        let rule = Arc::clone(&self.rule);
        Self::new(format!("{} x {s}", self.label), move |z, t| {
            let w = rule(z, t);
            [s * w[0], s * w[1]]
        })
    }
}

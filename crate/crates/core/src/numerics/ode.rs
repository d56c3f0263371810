use serde::{Deserialize, Serialize};

use crate::closed_form::RiccatiSpec;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSolveConfig {
    /// Largest RK4 step.
    pub step: f64,
    /// Divergence guard on `|h|`.
    pub max_h: f64,
}

impl Default for OdeSolveConfig {
    fn default() -> Self {
        Self { step: 1e-4, max_h: 1e6 }
    }
}

impl OdeSolveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.max_h > 0.0) {
            return Err(Error::InvalidArgument(format!("invalid ODE config {self:?}")));
        }
        Ok(())
    }
}

/// Samples `(t_i, h_i)` of a numerical Riccati solution.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.values.last()?))
    }
}

#[inline]
fn rk4_step(spec: &RiccatiSpec, h: f64, dt: f64) -> f64 {
    let k1 = spec.rhs(h);
    let k2 = spec.rhs(h + 0.5 * dt * k1);
    let k3 = spec.rhs(h + 0.5 * dt * k2);
    let k4 = spec.rhs(h + dt * k3);
    h + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// Advances `h` from `t0` to `t1` with uniform steps no longer than `cfg.step`,
/// calling `visit` after every step.
fn integrate(
    spec: &RiccatiSpec,
    t0: f64,
    h0: f64,
    t1: f64,
    cfg: &OdeSolveConfig,
    mut visit: impl FnMut(f64, f64),
) -> Result<f64> {
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(h0);
    }
    let n = (span / cfg.step).ceil().max(1.0) as usize;
    let dt = span / n as f64;
    let mut h = h0;
    let mut t = t0;
    for i in 1..=n {
        let next = rk4_step(spec, h, dt);
        if !next.is_finite() || next.abs() > cfg.max_h {
            return Err(Error::DivergenceDetected { last_t: t, last_h: h, max_h: cfg.max_h });
        }
        h = next;
        t = if i == n { t1 } else { t0 + i as f64 * dt };
        visit(t, h);
    }
    Ok(h)
}

/// RK4 solution of `h' = 2 (a.b) h + |b|^2 h^2 + xi |a|^2`, `h(0) = 0`, on `[0, t_end]`.
///
/// Stops with [`Error::DivergenceDetected`] once `|h|` exceeds `cfg.max_h`; the
/// reported `last_t` is then a numerical lower bound on the escape time.
pub fn riccati_rk4(spec: &RiccatiSpec, t_end: f64, cfg: &OdeSolveConfig) -> Result<Trajectory> {
    cfg.validate()?;
    if !(t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!("t_end = {t_end} must be >= 0")));
    }
    let mut traj = Trajectory { times: vec![0.0], values: vec![0.0] };
    integrate(spec, 0.0, 0.0, t_end, cfg, |t, h| {
        traj.times.push(t);
        traj.values.push(h);
    })?;
    Ok(traj)
}

/// RK4 values of `h` at the given ascending times, landing on each exactly.
pub fn riccati_rk4_at(spec: &RiccatiSpec, times: &[f64], cfg: &OdeSolveConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(times.len());
    let (mut t, mut h) = (0.0, 0.0);
    for &target in times {
        if !(target >= t) {
            return Err(Error::InvalidArgument("sample times must be ascending and >= 0".into()));
        }
        h = integrate(spec, t, h, target, cfg, |_, _| {})?;
        t = target;
        out.push(h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::{critical_horizon, merton_specialize, riccati_h};
    use crate::market_model::MarketParams;

    fn ill_posed() -> MarketParams {
        MarketParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0)
    }

    #[test]
    fn zero_length_trajectory() {
        let spec = RiccatiSpec::new(-1.0, 1.0, 1.0, 0.5).unwrap();
        let traj = riccati_rk4(&spec, 0.0, &OdeSolveConfig::default()).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.values, vec![0.0]);
    }

    #[test]
    fn critical_merton_reaches_two_thirds() {
        let sol = merton_specialize(ill_posed(), 0.5, 1.0).unwrap();
        let traj = riccati_rk4(&sol.spec, 1.0, &OdeSolveConfig::default()).unwrap();
        let (t, h) = traj.last().unwrap();
        assert_eq!(t, 1.0);
        assert!((h - 2.0 / 3.0).abs() < 1e-9, "h(1) = {h}");
        assert_eq!(traj.times.len(), 10_001);
    }

    #[test]
    fn ill_posed_merton_diverges_at_critical_horizon() {
        let sol = merton_specialize(ill_posed(), 0.25, 0.5).unwrap();
        let t_n = critical_horizon(ill_posed(), 0.25).unwrap();
        let err = riccati_rk4(&sol.spec, 2.0, &OdeSolveConfig::default()).unwrap_err();
        match err {
            Error::DivergenceDetected { last_t, .. } => {
                assert!(last_t < t_n && t_n - last_t < 1e-3, "last_t = {last_t}, T_N = {t_n}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fourth_order_self_convergence() {
        let spec = RiccatiSpec::new(-1.3, 0.8, 1.7, 0.4).unwrap();
        let t_end = 2.0;
        let h_at = |step: f64| {
            let cfg = OdeSolveConfig { step, ..Default::default() };
            riccati_rk4(&spec, t_end, &cfg).unwrap().last().unwrap().1
        };
        let exact = riccati_h(&spec, t_end).unwrap();
        let (e1, e2) = ((h_at(0.1) - exact).abs(), (h_at(0.05) - exact).abs());
        let ratio = e1 / e2;
        assert!((ratio - 16.0).abs() < 2.0, "error ratio {ratio}");
        assert!((h_at(1e-3) - h_at(5e-4)).abs() < 1e-10);
    }

    #[test]
    fn sampled_times_match_full_trajectory() {
        let spec = RiccatiSpec::new(-0.5, 1.2, 2.2, 0.9).unwrap();
        let times = [0.0, 0.1, 0.25, 0.4];
        let cfg = OdeSolveConfig::default();
        let sampled = riccati_rk4_at(&spec, &times, &cfg).unwrap();
        for (t, h) in times.iter().zip(&sampled) {
            let exact = riccati_h(&spec, *t).unwrap();
            assert!((h - exact).abs() <= 1e-10 * exact.abs().max(1e-3));
        }
        assert!(riccati_rk4_at(&spec, &[0.2, 0.1], &cfg).is_err());
    }
}

//! Closed-form solution of the pairs-trading Merton problem.
//!
//! The general building block is the auxiliary Cauchy problem
//!
//! ```text
//! phi_t + z (a.b) phi_z + |b|^2/2 phi_zz + xi/2 z^2 |a|^2 phi = 0,   phi(z, T) = 1
//! ```
//!
//! solved by `phi(z, t) = exp(g(T - t) + h(T - t) z^2 / 2)` where `h` solves the
//! Riccati equation `h' = 2 (a.b) h + |b|^2 h^2 + xi |a|^2`, `h(0) = 0`, and
//! `g' = |b|^2 h / 2`, `g(0) = 0`. With `q = -a.b`, `D = (a.b)^2 - xi |a|^2 |b|^2`
//! and `s = sqrt(|D|)`, all three regimes share one form
//!
//! ```text
//! h(t) = xi |a|^2 S(t) / (C(t) + q S(t)),      g(t) = q t / 2 - log(C(t) + q S(t)) / 2
//! (S, C) = (sinh(st)/s, cosh(st))   D > 0
//!          (t, 1)                   D = 0
//!          (sin(st)/s, cos(st))     D < 0
//! ```
//!
//! The Merton problem is the special case `a = Sigma^{-1} alpha / gamma`,
//! `b = Sigma^T (1, -c)^T`, `xi = 1 - gamma`. Functions of time-to-go take `tau`;
//! public portfolio and value functions take calendar time `t` and use
//! `tau = T - t`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::market_model::{
    check_wellposedness, derive_spread, dot, norm_sq, validate_market, MarketParams, SpreadParams,
    Vec2,
};
use crate::{Error, Result};

/// `|D| <= DISC_ZERO_BAND (a.b)^2` is classified as `D = 0`.
pub const DISC_ZERO_BAND: f64 = 1e-12;

/// Sign regime of the escape discriminant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// `D > 0`: `h` converges, no escape.
    Hyperbolic,
    /// `D = 0`.
    Critical,
    /// `D < 0`: `h` blows up at the finite escape time.
    Trigonometric,
}

/// Data of the auxiliary Riccati/Cauchy problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiccatiSpec {
    /// `a . b`, negative.
    pub ab: f64,
    /// `|a|^2`.
    pub a2: f64,
    /// `|b|^2`.
    pub b2: f64,
    pub xi: f64,
    /// Escape discriminant `(a.b)^2 - xi |a|^2 |b|^2`.
    pub disc: f64,
    /// Escape time, `+inf` unless `disc < 0`.
    pub t_esc: f64,
}

impl RiccatiSpec {
    pub fn new(ab: f64, a2: f64, b2: f64, xi: f64) -> Result<Self> {
        if ![ab, a2, b2, xi].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite Riccati coefficient".into()));
        }
        if ab >= 0.0 {
            return Err(Error::InvalidArgument(format!("a.b = {ab} must be negative")));
        }
        if a2 <= 0.0 || b2 <= 0.0 {
            return Err(Error::InvalidArgument(format!("|a|^2 = {a2} and |b|^2 = {b2} must be positive")));
        }
        if xi == 0.0 {
            return Err(Error::InvalidArgument("xi must be non-zero".into()));
        }
        let disc = ab * ab - xi * a2 * b2;
        let mut spec = Self { ab, a2, b2, xi, disc, t_esc: f64::INFINITY };
        if spec.regime() == Regime::Trigonometric {
            let s = (-disc).sqrt();
            spec.t_esc = (FRAC_PI_2 + (-ab / s).atan()) / s;
        }
        Ok(spec)
    }

    pub fn from_vectors(a: Vec2, b: Vec2, xi: f64) -> Result<Self> {
        Self::new(dot(a, b), norm_sq(a), norm_sq(b), xi)
    }

    pub fn regime(&self) -> Regime {
        if self.disc.abs() <= DISC_ZERO_BAND * self.ab * self.ab {
            Regime::Critical
        } else if self.disc > 0.0 {
            Regime::Hyperbolic
        } else {
            Regime::Trigonometric
        }
    }

    /// Right-hand side of the Riccati equation at `h`.
    #[inline]
    pub fn rhs(&self, h: f64) -> f64 {
        2.0 * self.ab * h + self.b2 * h * h + self.xi * self.a2
    }

    /// `lim_{t -> inf} h(t) = xi |a|^2 / (sqrt(D) - a.b)` when `D >= 0`.
    pub fn h_limit(&self) -> Option<f64> {
        match self.regime() {
            Regime::Trigonometric => None,
            Regime::Critical => Some(self.xi * self.a2 / (-self.ab)),
            Regime::Hyperbolic => Some(self.xi * self.a2 / (self.disc.sqrt() - self.ab)),
        }
    }

    fn check_time(&self, tau: f64) -> Result<()> {
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("time-to-go {tau} must be >= 0")));
        }
        if tau >= self.t_esc {
            return Err(Error::EscapeTimeExceeded { t: tau, t_esc: self.t_esc });
        }
        Ok(())
    }
}

/// Closed-form Riccati solution `h(tau)`, `0 <= tau < t_esc`.
pub fn riccati_h(spec: &RiccatiSpec, tau: f64) -> Result<f64> {
    spec.check_time(tau)?;
    let q = -spec.ab;
    let num = spec.xi * spec.a2;
    let h = match spec.regime() {
        Regime::Hyperbolic => {
            let s = spec.disc.sqrt();
            let th = (s * tau).tanh();
            num * th / (s + q * th)
        }
        Regime::Critical => num * tau / (1.0 + q * tau),
        Regime::Trigonometric => {
            let s = (-spec.disc).sqrt();
            let (sin, cos) = (s * tau).sin_cos();
            num * sin / (s * cos + q * sin)
        }
    };
    Ok(h)
}

/// `log(C(tau) + q S(tau))`, written as `log1p` of a small quantity near 0.
fn log_growth(spec: &RiccatiSpec, tau: f64) -> Result<f64> {
    let q = -spec.ab;
    let arg_minus_one = match spec.regime() {
        Regime::Hyperbolic => {
            let s = spec.disc.sqrt();
            let x = s * tau;
            if x > 20.0 {
                // cosh/sinh overflow for long horizons; factor out e^x.
                let e = (-2.0 * x).exp();
                let r = q / s;
                return Ok(x + (0.5 * (1.0 + r) + 0.5 * e * (1.0 - r)).ln());
            }
            let sh = (0.5 * x).sinh();
            2.0 * sh * sh + q * x.sinh() / s
        }
        Regime::Critical => q * tau,
        Regime::Trigonometric => {
            let s = (-spec.disc).sqrt();
            let x = s * tau;
            let sn = (0.5 * x).sin();
            -2.0 * sn * sn + q * x.sin() / s
        }
    };
    if !(arg_minus_one > -1.0) {
        return Err(Error::DomainError(format!(
            "log argument {} is not positive at tau = {tau}",
            1.0 + arg_minus_one
        )));
    }
    Ok(arg_minus_one.ln_1p())
}

/// Closed-form `g(tau) = q tau / 2 - log(C + q S) / 2`, `0 <= tau < t_esc`.
pub fn riccati_g(spec: &RiccatiSpec, tau: f64) -> Result<f64> {
    spec.check_time(tau)?;
    Ok(-0.5 * spec.ab * tau - 0.5 * log_growth(spec, tau)?)
}

/// The Merton problem bundle: Riccati data specialised to the market, the
/// risk aversion, the horizon and the critical horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MertonSolution {
    pub spec: RiccatiSpec,
    pub gamma: f64,
    pub horizon: f64,
    /// Critical horizon `T_N(gamma)`; equal to `spec.t_esc`.
    pub t_n: f64,
    pub market: MarketParams,
    pub spread: SpreadParams,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!("gamma = {gamma} must lie in (0, 1)")));
    }
    Ok(())
}

fn merton_riccati(p: &MarketParams, spread: &SpreadParams, gamma: f64) -> Result<RiccatiSpec> {
    let a = [spread.lambda[0] / gamma, spread.lambda[1] / gamma];
    RiccatiSpec::from_vectors(a, p.spread_loading(), 1.0 - gamma)
}

/// Critical horizon `T_N(gamma)`: the escape time of the Merton Riccati equation.
pub fn critical_horizon(p: MarketParams, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let spread = derive_spread(p)?;
    Ok(merton_riccati(&p, &spread, gamma)?.t_esc)
}

/// `T_N(gamma)` written through `gamma0`:
///
/// ```text
/// r = sigma_Z |lambda| sqrt(gamma0 - gamma)
/// T_N = gamma / r * (pi/2 + atan(kappa / r))      for gamma < gamma0
/// ```
///
/// and `+inf` otherwise.
pub fn critical_horizon_from_gamma0(spread: &SpreadParams, gamma: f64) -> f64 {
    if gamma >= spread.gamma0 {
        return f64::INFINITY;
    }
    let r = spread.sigma_z() * spread.lambda_norm_sq().sqrt() * (spread.gamma0 - gamma).sqrt();
    gamma / r * (FRAC_PI_2 + (spread.kappa / r).atan())
}

/// Specialises the auxiliary problem to the market and checks `T < T_N(gamma)`.
pub fn merton_specialize(p: MarketParams, gamma: f64, horizon: f64) -> Result<MertonSolution> {
    let p = validate_market(p)?;
    check_gamma(gamma)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon = {horizon} must be positive and finite")));
    }
    let spread = derive_spread(p)?;
    let spec = merton_riccati(&p, &spread, gamma)?;
    let t_n = spec.t_esc;
    if horizon >= t_n {
        return Err(Error::IllPosedHorizon { gamma, gamma0: spread.gamma0, t_n, horizon });
    }
    Ok(MertonSolution { spec, gamma, horizon, t_n, market: p, spread })
}

impl MertonSolution {
    pub fn h(&self, tau: f64) -> Result<f64> {
        riccati_h(&self.spec, tau)
    }

    pub fn g(&self, tau: f64) -> Result<f64> {
        riccati_g(&self.spec, tau)
    }

    fn time_to_go(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        Ok(self.horizon - t)
    }

    /// `log(1 + (1 - gamma) v) = (1 - gamma) log x + gamma (g + h z^2 / 2)`.
    ///
    /// Finite wherever `v` is, and still finite close to the critical horizon
    /// where `v` itself overflows.
    pub fn log_kernel(&self, x: f64, z: f64, t: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::NonPositiveWealth(x));
        }
        let tau = self.time_to_go(t)?;
        let exponent = self.g(tau)? + 0.5 * self.h(tau)? * z * z;
        Ok((1.0 - self.gamma) * x.ln() + self.gamma * exponent)
    }

    /// Myopic part of the optimal weight per unit spread, `(Sigma Sigma^T)^{-1} alpha / gamma`.
    pub fn myopic_loading(&self) -> Vec2 {
        let m = self.market.covariance_inv_mul(self.market.alpha());
        [m[0] / self.gamma, m[1] / self.gamma]
    }
}

/// Value function `v(x, z, t) = (x^{1-gamma} exp(gamma (g + h z^2/2)) - 1) / (1 - gamma)`.
pub fn value_function(sol: &MertonSolution, x: f64, z: f64, t: f64) -> Result<f64> {
    let k = sol.log_kernel(x, z, t)?;
    let v = k.exp_m1() / (1.0 - sol.gamma);
    if !v.is_finite() {
        return Err(Error::ValueOverflow { log_kernel: k });
    }
    Ok(v)
}

/// Optimal weights `pi*(z, t) = [(Sigma Sigma^T)^{-1} alpha / gamma + h(T - t) (1, -c)] z`.
pub fn optimal_weights(sol: &MertonSolution, z: f64, t: f64) -> Result<Vec2> {
    let tau = sol.time_to_go(t)?;
    let h = sol.h(tau)?;
    let m = sol.myopic_loading();
    Ok([(m[0] + h) * z, (m[1] - sol.market.c * h) * z])
}

/// Optimal weights under the market-neutrality condition:
///
/// ```text
/// pi = (-kappa/sigma_Z^2) (1 + coth(k (T-t)) / sqrt(gamma)) / (1 + sqrt(gamma) coth(k (T-t))) z (1, -c),
/// k = kappa / sqrt(gamma)
/// ```
///
/// Defined on `0 <= t < T`.
pub fn mn_optimal_weights(p: MarketParams, gamma: f64, horizon: f64, z: f64, t: f64) -> Result<Vec2> {
    check_gamma(gamma)?;
    let report = check_wellposedness(p)?;
    if !report.holds {
        return Err(Error::ConditionViolated { residual: report.residual });
    }
    if t == horizon {
        return Err(Error::TerminalTime(horizon));
    }
    if !(t >= 0.0 && t < horizon) {
        return Err(Error::TimeOutOfRange { t, horizon });
    }
    let spread = derive_spread(p)?;
    let sg = gamma.sqrt();
    let th = (spread.kappa / sg * (horizon - t)).tanh();
    // Numerator and denominator multiplied by tanh.
    let ratio = (th + 1.0 / sg) / (th + sg);
    let scale = -spread.kappa / spread.sigma_z2 * ratio * z;
    Ok([scale, -p.c * scale])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canonical() -> MarketParams {
        MarketParams::new(-0.5, 0.5, 1.0, 1.0, 0.0, 1.0)
    }

    fn ill_posed() -> MarketParams {
        MarketParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0)
    }

    fn critical_merton() -> MertonSolution {
        merton_specialize(ill_posed(), 0.5, 1.0).unwrap()
    }

    fn specs_all_regimes() -> Vec<RiccatiSpec> {
        vec![
            RiccatiSpec::new(-1.3, 0.8, 1.7, 0.4).unwrap(),
            RiccatiSpec::new(-0.7, 2.0, 0.5, -1.5).unwrap(),
            RiccatiSpec::new(-2.0, 2.0, 2.0, 1.0).unwrap(),
            RiccatiSpec::new(-0.5, 1.2, 2.2, 0.9).unwrap(),
        ]
    }

    #[test]
    fn regimes_and_escape_times() {
        let s = specs_all_regimes();
        assert_eq!(s[0].regime(), Regime::Hyperbolic);
        assert_eq!(s[1].regime(), Regime::Hyperbolic);
        assert_eq!(s[2].regime(), Regime::Critical);
        assert_eq!(s[3].regime(), Regime::Trigonometric);
        assert!(s[0].t_esc.is_infinite() && s[2].t_esc.is_infinite());
        assert!(s[3].t_esc.is_finite() && s[3].t_esc > 0.0);
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(RiccatiSpec::new(0.5, 1.0, 1.0, 1.0).is_err());
        assert!(RiccatiSpec::new(-0.5, 1.0, 1.0, 0.0).is_err());
        assert!(RiccatiSpec::new(-0.5, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn h_and_g_vanish_at_zero() {
        for s in specs_all_regimes() {
            assert_eq!(riccati_h(&s, 0.0).unwrap(), 0.0);
            assert_eq!(riccati_g(&s, 0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn critical_merton_hand_values() {
        let sol = critical_merton();
        assert_eq!(sol.spec.regime(), Regime::Critical);
        assert!((sol.h(1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let g_expected = 1.0 - 0.5 * 3f64.ln();
        assert!((sol.g(1.0).unwrap() - g_expected).abs() < 1e-15);
        assert!((g_expected - 0.450694).abs() < 1e-6);
    }

    #[test]
    fn merton_spec_invariants() {
        let p = MarketParams::new(0.2, 0.9, 0.3, 1.7, -0.6, 1.4);
        let spread = derive_spread(p).unwrap();
        for gamma in [0.1, 0.35, 0.8] {
            let spec = merton_riccati(&p, &spread, gamma).unwrap();
            assert!((spec.ab + spread.kappa / gamma).abs() < 1e-12);
            assert!((spec.b2 - spread.sigma_z2).abs() < 1e-12);
            assert!((spec.a2 - spread.lambda_norm_sq() / (gamma * gamma)).abs() < 1e-10);
            assert_eq!(spec.xi, 1.0 - gamma);
            let disc = spread.sigma_z2 * spread.lambda_norm_sq() / (gamma * gamma) * (gamma - spread.gamma0);
            assert!((spec.disc - disc).abs() < 1e-10 * disc.abs().max(1.0));
        }
    }

    #[test]
    fn h_limit_for_positive_discriminant() {
        for s in specs_all_regimes().into_iter().take(2) {
            let t = 50.0 / s.disc.sqrt();
            let h = riccati_h(&s, t).unwrap();
            assert!((h - s.h_limit().unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn g_stays_finite_for_long_horizons() {
        let s = specs_all_regimes()[0];
        let g = riccati_g(&s, 1e4).unwrap();
        let h_inf = s.h_limit().unwrap();
        // g grows linearly with slope |b|^2 h_inf / 2.
        let g2 = riccati_g(&s, 2e4).unwrap();
        assert!(((g2 - g) / 1e4 - 0.5 * s.b2 * h_inf).abs() < 1e-10);
    }

    #[test]
    fn tan_branch_diverges_near_escape() {
        let s = specs_all_regimes()[3];
        let h = riccati_h(&s, 0.99999 * s.t_esc).unwrap();
        assert!(h > 1e3, "h = {h}");
        assert!(matches!(riccati_h(&s, s.t_esc), Err(Error::EscapeTimeExceeded { .. })));
        assert!(matches!(riccati_g(&s, 2.0 * s.t_esc), Err(Error::EscapeTimeExceeded { .. })));
    }

    #[test]
    fn tan_branch_matches_printed_form() {
        // h = -(s/|b|^2) tan(atan(q/s) - s t) - (a.b)/|b|^2 away from t = 0
        let spec = specs_all_regimes()[3];
        let s = (-spec.disc).sqrt();
        let q = -spec.ab;
        for k in 1..20 {
            let t = spec.t_esc * k as f64 / 21.0;
            let printed = -(s / spec.b2) * ((q / s).atan() - s * t).tan() + q / spec.b2;
            let h = riccati_h(&spec, t).unwrap();
            assert!((h - printed).abs() < 1e-11 * printed.abs().max(1.0), "t = {t}");
        }
    }

    #[test]
    fn coth_branch_matches_printed_form() {
        let spec = specs_all_regimes()[0];
        let s = spec.disc.sqrt();
        for k in 1..20 {
            let t = 0.2 * k as f64;
            let printed = spec.xi * spec.a2 / (-spec.ab + s / (s * t).tanh());
            assert!((riccati_h(&spec, t).unwrap() - printed).abs() < 1e-13);
        }
    }

    #[test]
    fn critical_horizon_routes_agree() {
        let spread = derive_spread(ill_posed()).unwrap();
        let direct = critical_horizon(ill_posed(), 0.25).unwrap();
        let via_gamma0 = critical_horizon_from_gamma0(&spread, 0.25);
        assert!((direct - via_gamma0).abs() < 1e-14);
        assert!((direct - 0.893_115_796_697_815_6).abs() < 1e-12);
        assert!(critical_horizon(ill_posed(), 0.5).unwrap().is_infinite());
        assert!(critical_horizon(canonical(), 0.05).unwrap().is_infinite());
    }

    #[test]
    fn merton_specialize_examples() {
        let ok = merton_specialize(canonical(), 0.5, 10.0).unwrap();
        assert!(ok.t_n.is_infinite());
        let err = merton_specialize(ill_posed(), 0.25, 1.0).unwrap_err();
        match err {
            Error::IllPosedHorizon { gamma, gamma0, t_n, horizon } => {
                assert_eq!((gamma, horizon), (0.25, 1.0));
                assert!((gamma0 - 0.5).abs() < 1e-15);
                assert!((t_n - 0.8931158).abs() < 1e-6);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(merton_specialize(ill_posed(), 0.25, 0.5).is_ok());
        assert!(merton_specialize(canonical(), 1.0, 1.0).is_err());
        assert!(merton_specialize(canonical(), 0.5, 0.0).is_err());
    }

    #[test]
    fn value_function_terminal_conditions() {
        let sol = merton_specialize(canonical(), 0.5, 1.0).unwrap();
        assert_eq!(value_function(&sol, 1.0, 3.7, 1.0).unwrap(), 0.0);
        let v = value_function(&sol, 2.0, 0.0, 1.0).unwrap();
        assert!((v - 2.0 * (2f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!(matches!(value_function(&sol, 0.0, 0.0, 0.0), Err(Error::NonPositiveWealth(_))));
        assert!(matches!(value_function(&sol, 1.0, 0.0, 1.5), Err(Error::TimeOutOfRange { .. })));
    }

    #[test]
    fn value_function_composes_g_and_h() {
        let sol = critical_merton();
        let v = value_function(&sol, 1.0, 1.0, 0.0).unwrap();
        let g = 1.0 - 0.5 * 3f64.ln();
        let h = 2.0 / 3.0;
        let expected = ((0.5 * (g + 0.5 * h)).exp() - 1.0) / 0.5;
        assert!((v - expected).abs() < 1e-14);
    }

    #[test]
    fn value_function_bounded_below_by_spread_free_value() {
        let sol = merton_specialize(canonical(), 0.3, 2.0).unwrap();
        let (x, t) = (1.7f64, 0.4);
        let g = sol.g(sol.horizon - t).unwrap();
        let floor = ((1.0 - sol.gamma) * x.ln() + sol.gamma * g).exp_m1() / (1.0 - sol.gamma);
        assert!((value_function(&sol, x, 0.0, t).unwrap() - floor).abs() < 1e-14);
        for z in [-2.0, -0.1, 0.3, 1.5] {
            assert!(value_function(&sol, x, z, t).unwrap() > floor);
        }
    }

    #[test]
    fn optimal_weights_basic_shapes() {
        let p = MarketParams::new(0.2, 0.9, 0.3, 1.7, -0.6, 1.4);
        let sol = merton_specialize(p, 0.6, 0.5).unwrap();
        assert_eq!(optimal_weights(&sol, 0.0, 0.3).unwrap(), [0.0, 0.0]);
        let myopic = sol.myopic_loading();
        let w = optimal_weights(&sol, 0.8, 0.5).unwrap();
        assert!((w[0] - 0.8 * myopic[0]).abs() < 1e-15 && (w[1] - 0.8 * myopic[1]).abs() < 1e-15);
        let w1 = optimal_weights(&sol, 1.0, 0.2).unwrap();
        let w2 = optimal_weights(&sol, -2.5, 0.2).unwrap();
        assert!((w2[0] + 2.5 * w1[0]).abs() < 1e-14 && (w2[1] + 2.5 * w1[1]).abs() < 1e-14);
    }

    #[test]
    fn canonical_optimal_weights_are_market_neutral() {
        let sol = merton_specialize(canonical(), 0.5, 1.0).unwrap();
        for (z, t) in [(1.0, 0.0), (-0.3, 0.5), (2.2, 0.99)] {
            let w = optimal_weights(&sol, z, t).unwrap();
            assert!((w[1] + sol.market.c * w[0]).abs() < 1e-15);
        }
    }

    #[test]
    fn mn_weights_examples() {
        let p = canonical();
        assert_eq!(mn_optimal_weights(p, 0.5, 1.0, 0.0, 0.2).unwrap(), [0.0, 0.0]);
        assert!(matches!(mn_optimal_weights(p, 0.5, 1.0, 1.0, 1.0), Err(Error::TerminalTime(_))));
        assert!(matches!(
            mn_optimal_weights(ill_posed(), 0.5, 1.0, 1.0, 0.0),
            Err(Error::ConditionViolated { .. })
        ));
        // shorts the over-priced leg
        let w = mn_optimal_weights(p, 0.3, 2.0, 0.7, 0.1).unwrap();
        assert!(w[0] < 0.0 && w[1] > 0.0);
    }

    #[test]
    fn mn_weights_terminal_limit() {
        let p = MarketParams::from_condition(0.4, 0.9, 0.2, 1.3, 1.7);
        let (gamma, horizon, z) = (0.4, 1.0, 1.3);
        let sol = merton_specialize(p, gamma, horizon).unwrap();
        let near = mn_optimal_weights(p, gamma, horizon, z, horizon - 1e-8).unwrap();
        let at_t = optimal_weights(&sol, z, horizon).unwrap();
        let spread = derive_spread(p).unwrap();
        let limit = -spread.kappa / (gamma * spread.sigma_z2) * z;
        // first-order in the time to go
        assert!((near[0] - limit).abs() < 1e-6, "{near:?} {limit}");
        assert!((near[0] - at_t[0]).abs() < 1e-6 && (near[1] - at_t[1]).abs() < 1e-6);
    }

    #[test]
    fn mn_weights_equal_general_weights_under_condition() {
        let p = MarketParams::from_condition(0.4, 0.9, 0.2, 1.3, 1.7);
        for gamma in [0.1, 0.5, 0.9] {
            let sol = merton_specialize(p, gamma, 3.0).unwrap();
            for (z, t) in [(1.0, 0.0), (-0.4, 1.5), (2.0, 2.9)] {
                let a = mn_optimal_weights(p, gamma, 3.0, z, t).unwrap();
                let b = optimal_weights(&sol, z, t).unwrap();
                assert!((a[0] - b[0]).abs() < 1e-10 && (a[1] - b[1]).abs() < 1e-10);
            }
        }
    }
}

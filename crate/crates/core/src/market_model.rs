//! Market primitives of the two-stock error-correction model.
//!
//! ```text
//! dS1/S1 = alpha1 Z dt + sigma1 dW1
//! dS2/S2 = alpha2 Z dt + sigma2 rho dW1 + sigma2 sqrt(1 - rho^2) dW2
//! Z      = log S1 - c log S2 + (sigma1^2 - c sigma2^2) t / 2
//! ```
//!
//! The diffusion matrix `Sigma` is lower triangular and never inverted
//! explicitly: `Sigma^{-1} v` is a forward substitution, `Sigma^{-T} v` a
//! backward one.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative tolerance on the residual of `alpha = Sigma Sigma^T (1,-c)^T (-kappa / sigma_Z^2)`.
pub const TOL_CONDITION: f64 = 1e-10;
/// Threshold below which `gamma0` counts as zero.
pub const TOL_GAMMA0: f64 = 1e-10;

pub(crate) type Vec2 = [f64; 2];

#[inline]
pub(crate) fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub(crate) fn norm_sq(a: Vec2) -> f64 {
    dot(a, a)
}

/// Primitive coefficients of the error-correction model.
///
/// `alpha1`, `alpha2` are per unit time, `sigma1`, `sigma2` per square-root
/// time; `rho` and `c` are dimensionless. This is also the canonical JSON
/// parameter object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub c: f64,
}

impl MarketParams {
    pub fn new(alpha1: f64, alpha2: f64, sigma1: f64, sigma2: f64, rho: f64, c: f64) -> Self {
        Self { alpha1, alpha2, sigma1, sigma2, rho, c }
    }

    /// Builds the unique drift vector that satisfies the market-neutrality
    /// condition for the given volatility structure and mean-reversion rate:
    /// `alpha = Sigma Sigma^T (1,-c)^T (-kappa / sigma_Z^2)`.
    pub fn from_condition(sigma1: f64, sigma2: f64, rho: f64, c: f64, kappa: f64) -> Self {
        let mut p = Self::new(0.0, 0.0, sigma1, sigma2, rho, c);
        let xi = -kappa / p.sigma_z2();
        let alpha = p.covariance_mul([xi, -c * xi]);
        p.alpha1 = alpha[0];
        p.alpha2 = alpha[1];
        p
    }

    pub fn alpha(&self) -> Vec2 {
        [self.alpha1, self.alpha2]
    }

    fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).sqrt()
    }

    /// `Sigma` as a row-major lower-triangular matrix.
    pub fn sigma_matrix(&self) -> [[f64; 2]; 2] {
        [[self.sigma1, 0.0], [self.sigma2 * self.rho, self.sigma2 * self.rho_bar()]]
    }

    /// Mean-reversion rate `kappa = c alpha2 - alpha1`.
    pub fn kappa(&self) -> f64 {
        self.c * self.alpha2 - self.alpha1
    }

    /// Variance rate of the spread, `sigma1^2 + c^2 sigma2^2 - 2 c rho sigma1 sigma2`.
    pub fn sigma_z2(&self) -> f64 {
        let (s1, s2, c) = (self.sigma1, self.sigma2, self.c);
        s1 * s1 + c * c * s2 * s2 - 2.0 * c * self.rho * s1 * s2
    }

    /// `Sigma v`.
    pub fn sigma_mul(&self, v: Vec2) -> Vec2 {
        [self.sigma1 * v[0], self.sigma2 * (self.rho * v[0] + self.rho_bar() * v[1])]
    }

    /// `Sigma^T v`.
    pub fn sigma_t_mul(&self, v: Vec2) -> Vec2 {
        [
            self.sigma1 * v[0] + self.sigma2 * self.rho * v[1],
            self.sigma2 * self.rho_bar() * v[1],
        ]
    }

    /// `Sigma^{-1} v` by forward substitution.
    pub fn sigma_inv_mul(&self, v: Vec2) -> Vec2 {
        let x0 = v[0] / self.sigma1;
        let x1 = (v[1] - self.sigma2 * self.rho * x0) / (self.sigma2 * self.rho_bar());
        [x0, x1]
    }

    /// `Sigma^{-T} v` by backward substitution.
    pub fn sigma_t_inv_mul(&self, v: Vec2) -> Vec2 {
        let x1 = v[1] / (self.sigma2 * self.rho_bar());
        let x0 = (v[0] - self.sigma2 * self.rho * x1) / self.sigma1;
        [x0, x1]
    }

    /// `Sigma Sigma^T v`.
    pub fn covariance_mul(&self, v: Vec2) -> Vec2 {
        self.sigma_mul(self.sigma_t_mul(v))
    }

    /// `(Sigma Sigma^T)^{-1} v`.
    pub fn covariance_inv_mul(&self, v: Vec2) -> Vec2 {
        self.sigma_t_inv_mul(self.sigma_inv_mul(v))
    }

    /// Market price of risk per unit spread, `lambda = Sigma^{-1} alpha`.
    pub fn lambda(&self) -> Vec2 {
        self.sigma_inv_mul(self.alpha())
    }

    /// Spread loading `b = Sigma^T (1,-c)^T`; `|b|^2 = sigma_Z^2`.
    pub fn spread_loading(&self) -> Vec2 {
        self.sigma_t_mul([1.0, -self.c])
    }
}

/// Checks the standing assumptions: positive volatilities, `|rho| < 1` and
/// a mean-reverting spread (`alpha1 < c alpha2`).
pub fn validate_market(p: MarketParams) -> Result<MarketParams> {
    let fields = [p.alpha1, p.alpha2, p.sigma1, p.sigma2, p.rho, p.c];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite market parameter in {p:?}")));
    }
    if p.sigma1 <= 0.0 {
        return Err(Error::DegenerateVolatility(format!("sigma1 = {} must be > 0", p.sigma1)));
    }
    if p.sigma2 <= 0.0 {
        return Err(Error::DegenerateVolatility(format!("sigma2 = {} must be > 0", p.sigma2)));
    }
    if p.rho.abs() >= 1.0 {
        return Err(Error::DegenerateVolatility(format!("|rho| = {} must be < 1", p.rho.abs())));
    }
    let kappa = p.kappa();
    if p.alpha1 >= p.c * p.alpha2 {
        return Err(Error::NonMeanReverting { alpha1: p.alpha1, c_alpha2: p.c * p.alpha2, kappa });
    }
    Ok(p)
}

/// Quantities of the spread process `dZ = -kappa Z dt + sigma_Z dW^Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadParams {
    pub kappa: f64,
    #[serde(rename = "sigmaZ2")]
    pub sigma_z2: f64,
    pub lambda: Vec2,
    /// Stationary variance `sigma_Z^2 / (2 kappa)`.
    pub stationary_var: f64,
    /// Critical relative risk aversion.
    pub gamma0: f64,
}

impl SpreadParams {
    pub fn sigma_z(&self) -> f64 {
        self.sigma_z2.sqrt()
    }

    pub fn lambda_norm_sq(&self) -> f64 {
        norm_sq(self.lambda)
    }
}

/// Derives the spread parameters and the critical risk aversion
///
/// ```text
/// gamma0 = 1 - (kappa / (|(1,-c) Sigma| |Sigma^{-1} alpha|))^2
/// ```
///
/// Since `kappa = -b . lambda`, `gamma0 = 1 - cos^2` of the angle between `b`
/// and `lambda`; it is evaluated as `(b x lambda)^2 / (|b|^2 |lambda|^2)` so
/// that values near zero keep full relative precision.
pub fn derive_spread(p: MarketParams) -> Result<SpreadParams> {
    let p = validate_market(p)?;
    let kappa = p.kappa();
    let sigma_z2 = p.sigma_z2();
    let lambda = p.lambda();
    let b = p.spread_loading();
    let cross = b[0] * lambda[1] - b[1] * lambda[0];
    let gamma0 = cross * cross / (norm_sq(b) * norm_sq(lambda));
    Ok(SpreadParams {
        kappa,
        sigma_z2,
        lambda,
        stationary_var: sigma_z2 / (2.0 * kappa),
        gamma0,
    })
}

/// Outcome of the market-neutrality (well-posedness) condition check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellPosednessReport {
    pub holds: bool,
    /// `-kappa / sigma_Z^2`.
    pub xi: f64,
    /// Max-norm of `alpha - Sigma Sigma^T (1,-c)^T xi`.
    pub residual: f64,
    pub gamma0: f64,
    /// Verdict of the ratio form `alpha1/alpha2 = (s1^2 - c s1 s2 rho)/(s1 s2 rho - c s2^2)`,
    /// `None` when one of its denominators vanishes.
    pub ratio_form: Option<bool>,
}

/// Decides the condition through `alpha = Sigma Sigma^T (1,-c)^T (-kappa/sigma_Z^2)`
/// with relative tolerance [`TOL_CONDITION`].
pub fn check_wellposedness(p: MarketParams) -> Result<WellPosednessReport> {
    let spread = derive_spread(p)?;
    let xi = -spread.kappa / spread.sigma_z2;
    let target = p.covariance_mul([xi, -p.c * xi]);
    let alpha = p.alpha();
    let residual = (alpha[0] - target[0]).abs().max((alpha[1] - target[1]).abs());
    let holds = residual <= TOL_CONDITION * norm_sq(alpha).sqrt();
    Ok(WellPosednessReport {
        holds,
        xi,
        residual,
        gamma0: spread.gamma0,
        ratio_form: ratio_form_verdict(&p, TOL_CONDITION),
    })
}

/// Ratio form of the condition, evaluated cross-multiplied with a relative
/// tolerance. Returns `None` when `alpha2` or `sigma1 sigma2 rho - c sigma2^2`
/// is below `tol` relative to the scale of its terms.
pub fn ratio_form_verdict(p: &MarketParams, tol: f64) -> Option<bool> {
    let (s1, s2, rho, c) = (p.sigma1, p.sigma2, p.rho, p.c);
    let num = s1 * s1 - c * s1 * s2 * rho;
    let den = s1 * s2 * rho - c * s2 * s2;
    let den_scale = (s1 * s2 * rho).abs() + (c * s2 * s2).abs();
    let alpha_scale = p.alpha1.abs().max(p.alpha2.abs());
    if p.alpha2.abs() <= tol * alpha_scale || den.abs() <= tol * den_scale {
        return None;
    }
    let lhs = p.alpha1 * den;
    let rhs = p.alpha2 * num;
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    Some((lhs - rhs).abs() <= tol * scale)
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

    #[test]
    fn validate_accepts_canonical() {
        assert_eq!(validate_market(canonical()).unwrap(), canonical());
    }

    #[test]
    fn validate_rejects_zero_kappa() {
        let p = MarketParams::new(0.5, 0.5, 1.0, 1.0, 0.0, 1.0);
        assert!(matches!(validate_market(p), Err(Error::NonMeanReverting { .. })));
    }

    #[test]
    fn validate_rejects_unit_correlation_and_bad_vols() {
        let mut p = canonical();
        p.rho = 1.0;
        assert!(matches!(validate_market(p), Err(Error::DegenerateVolatility(_))));
        p.rho = -1.0;
        assert!(matches!(validate_market(p), Err(Error::DegenerateVolatility(_))));
        let mut p = canonical();
        p.sigma2 = 0.0;
        assert!(matches!(validate_market(p), Err(Error::DegenerateVolatility(_))));
        p.sigma2 = f64::NAN;
        assert!(validate_market(p).is_err());
    }

    #[test]
    fn spread_of_canonical_set() {
        let s = derive_spread(canonical()).unwrap();
        assert_eq!(s.kappa, 1.0);
        assert_eq!(s.sigma_z2, 2.0);
        assert_eq!(s.stationary_var, 1.0);
        assert!(s.gamma0.abs() < 1e-15);
    }

    #[test]
    fn spread_of_ill_posed_set() {
        let s = derive_spread(ill_posed()).unwrap();
        assert_eq!(s.kappa, 1.0);
        assert_eq!(s.sigma_z2, 2.0);
        assert!((s.gamma0 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_cointegration_coefficient() {
        let p = MarketParams::new(-0.7, 0.3, 0.4, 1.3, 0.0, 0.0);
        let s = derive_spread(p).unwrap();
        assert_eq!(s.kappa, 0.7);
        assert!((s.sigma_z2 - 0.16).abs() < 1e-15);
    }

    #[test]
    fn triangular_solves_invert_products() {
        let p = MarketParams::new(0.2, 0.9, 0.3, 1.7, -0.6, 1.4);
        let v = [0.37, -1.2];
        let back = p.sigma_inv_mul(p.sigma_mul(v));
        let back_t = p.sigma_t_inv_mul(p.sigma_t_mul(v));
        let back_cov = p.covariance_inv_mul(p.covariance_mul(v));
        for (a, b) in [(back, v), (back_t, v), (back_cov, v)] {
            assert!((a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14);
        }
        assert!((norm_sq(p.spread_loading()) - p.sigma_z2()).abs() < 1e-14);
    }

    #[test]
    fn wellposedness_canonical_holds() {
        let r = check_wellposedness(canonical()).unwrap();
        assert!(r.holds);
        assert_eq!(r.xi, -0.5);
        assert_eq!(r.residual, 0.0);
        assert!(r.gamma0 <= TOL_GAMMA0);
        assert_eq!(r.ratio_form, Some(true));
    }

    #[test]
    fn wellposedness_ill_posed_fails() {
        let r = check_wellposedness(ill_posed()).unwrap();
        assert!(!r.holds);
        assert!((r.residual - 0.5).abs() < 1e-15);
        assert!((r.gamma0 - 0.5).abs() < 1e-15);
        assert_eq!(r.ratio_form, Some(false));
    }

    #[test]
    fn ratio_form_undefined_when_alpha2_vanishes() {
        let p = MarketParams::new(-1.0, 0.0, 1.0, 1.0, 0.3, 1.0);
        assert_eq!(ratio_form_verdict(&p, TOL_CONDITION), None);
    }

    #[test]
    fn gamma0_matches_textbook_formula_away_from_zero() {
        let p = MarketParams::new(0.2, 0.9, 0.3, 1.7, -0.6, 1.4);
        let s = derive_spread(p).unwrap();
        let b = p.spread_loading();
        let ratio = s.kappa / (norm_sq(b).sqrt() * s.lambda_norm_sq().sqrt());
        assert!((s.gamma0 - (1.0 - ratio * ratio)).abs() < 1e-14);
    }

    #[test]
    fn from_condition_recovers_kappa() {
        let p = MarketParams::from_condition(0.3, 1.1, 0.45, 0.8, 2.5);
        assert!((p.kappa() - 2.5).abs() < 1e-12);
        assert!(check_wellposedness(p).unwrap().holds);
    }
}

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    fn vol_structure() -> impl Strategy<Value = (f64, f64, f64, f64)> {
        (0.05f64..2.0, 0.05f64..2.0, -0.95f64..0.95, -3.0f64..3.0)
    }

    fn valid_params() -> impl Strategy<Value = MarketParams> {
        (vol_structure(), -2.0f64..2.0, 0.05f64..3.0).prop_map(|((s1, s2, rho, c), a2, kappa)| {
            MarketParams::new(c * a2 - kappa, a2, s1, s2, rho, c)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn gamma0_in_unit_interval(p in valid_params()) {
            let s = derive_spread(p).unwrap();
            prop_assert!(s.kappa > 0.0);
            prop_assert!(s.gamma0 >= 0.0 && s.gamma0 < 1.0);
        }
    }

    proptest! {
        #[test]
        fn ratio_form_agrees_with_residual_form(p in valid_params()) {
            let r = check_wellposedness(p).unwrap();
            if let Some(v) = r.ratio_form {
                prop_assert_eq!(v, r.holds);
            }
        }

        #[test]
        fn construction_closure((s1, s2, rho, c) in vol_structure(), kappa in 0.05f64..3.0) {
            let p = MarketParams::from_condition(s1, s2, rho, c, kappa);
            let r = check_wellposedness(p).unwrap();
            let s = derive_spread(p).unwrap();
            prop_assert!(r.holds);
            prop_assert!(s.gamma0 <= 1e-12);
            prop_assert!((s.kappa - kappa).abs() <= 1e-12 * kappa.max(1.0));
            if let Some(v) = r.ratio_form {
                prop_assert!(v);
            }
        }

        #[test]
        fn gamma0_invariant_under_time_rescaling(p in valid_params(), scale in 0.01f64..100.0) {
            let q = MarketParams::new(
                scale * p.alpha1,
                scale * p.alpha2,
                scale.sqrt() * p.sigma1,
                scale.sqrt() * p.sigma2,
                p.rho,
                p.c,
            );
            let g0 = derive_spread(p).unwrap().gamma0;
            let g1 = derive_spread(q).unwrap().gamma0;
            prop_assert!((g0 - g1).abs() <= 1e-12);
        }

        #[test]
        fn holds_implies_gamma0_zero(p in valid_params()) {
            let r = check_wellposedness(p).unwrap();
            if r.holds {
                prop_assert!(r.gamma0 <= TOL_GAMMA0);
            }
        }
    }
}

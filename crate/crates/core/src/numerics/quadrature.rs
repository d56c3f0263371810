use crate::closed_form::{riccati_h, RiccatiSpec};
use crate::numerics::OdeSolveConfig;
use crate::{Error, Result};

const TARGET_ERROR: f64 = 1e-10;

fn simpson(f: &impl Fn(f64) -> Result<f64>, t: f64, n: usize) -> Result<f64> {
    let dx = t / n as f64;
    let mut acc = f(0.0)? + f(t)?;
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * dx)?;
    }
    Ok(acc * dx / 3.0)
}

/// `g(t) = int_0^t |b|^2 h(s) / 2 ds` by composite Simpson, doubling the panel
/// count until the Richardson error estimate drops below 1e-10. Panels never
/// get narrower than `cfg.step`.
pub fn g_quadrature(spec: &RiccatiSpec, t: f64, cfg: &OdeSolveConfig) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be >= 0")));
    }
    if t >= spec.t_esc {
        return Err(Error::EscapeTimeExceeded { t, t_esc: spec.t_esc });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let integrand = |s: f64| riccati_h(spec, s).map(|h| 0.5 * spec.b2 * h);
    let mut n = 16;
    let mut prev = simpson(&integrand, t, n)?;
    loop {
        n *= 2;
        let cur = simpson(&integrand, t, n)?;
        let err = (cur - prev).abs() / 15.0;
        if err <= TARGET_ERROR {
            return Ok(cur + (cur - prev) / 15.0);
        }
        if t / ((2 * n) as f64) < cfg.step {
            return Err(Error::QuadratureNotConverged(err));
        }
        prev = cur;
    }
}

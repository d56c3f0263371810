//! Theta-scheme solver for the auxiliary Cauchy problem
//!
//! ```text
//! phi_t + z (a.b) phi_z + |b|^2/2 phi_zz + xi/2 z^2 |a|^2 phi = 0,   phi(z, T) = 1
//! ```
//!
//! integrated backwards from `T` in time-to-go `tau`, with central differences
//! in `z` on a truncated uniform grid.

use serde::{Deserialize, Serialize};

use crate::closed_form::{riccati_g, riccati_h, RiccatiSpec};
use crate::market_model::SpreadParams;
use crate::{Error, Result};

/// Horizons at or beyond this fraction of the escape time are refused.
pub const NEAR_ESCAPE_FRACTION: f64 = 0.98;
const SELF_CONSISTENCY_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// Dirichlet data from `exp(g + h z^2 / 2)` at the truncation points.
    ClosedForm,
    /// `phi_zz = 0` at the truncation points.
    ZeroCurvature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdGrid {
    pub z_min: f64,
    pub z_max: f64,
    /// Number of spatial nodes including both boundaries.
    pub nz: usize,
    /// Number of time steps.
    pub nt: usize,
    /// 0 explicit, 1/2 Crank-Nicolson, 1 fully implicit.
    pub theta: f64,
    pub boundary: BoundaryCondition,
}

impl Default for FdGrid {
    fn default() -> Self {
        Self {
            z_min: -6.0,
            z_max: 6.0,
            nz: 801,
            nt: 2000,
            theta: 0.5,
            boundary: BoundaryCondition::ClosedForm,
        }
    }
}

impl FdGrid {
    /// Default grid truncated at six stationary standard deviations of the spread.
    pub fn for_spread(spread: &SpreadParams) -> Self {
        let half_width = 6.0 * spread.stationary_var.sqrt();
        Self { z_min: -half_width, z_max: half_width, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.z_min < 0.0 && 0.0 < self.z_max) {
            return Err(Error::InvalidArgument(format!(
                "grid must straddle zero, got [{}, {}]",
                self.z_min, self.z_max
            )));
        }
        if self.nz < 3 || self.nt < 1 {
            return Err(Error::InvalidArgument(format!("need nz >= 3 and nt >= 1, got {} and {}", self.nz, self.nt)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidArgument(format!("theta = {} outside [0, 1]", self.theta)));
        }
        Ok(())
    }

    pub fn dz(&self) -> f64 {
        (self.z_max - self.z_min) / (self.nz - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let dz = self.dz();
        (0..self.nz).map(|j| self.z_min + j as f64 * dz).collect()
    }
}

/// `phi(z, 0)` on the interior grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    /// Max relative change against a run with twice the time step, over `|z| <= z_max / 2`.
    pub self_consistency: f64,
}

impl FdSolution {
    /// Three-point Lagrange interpolation of `phi(z, 0)`.
    pub fn value_at(&self, z: f64) -> Option<f64> {
        let n = self.z.len();
        if n < 3 || z < self.z[0] || z > self.z[n - 1] {
            return None;
        }
        let dz = self.z[1] - self.z[0];
        let k = (((z - self.z[0]) / dz).round() as usize).clamp(1, n - 2);
        let (x0, x1, x2) = (self.z[k - 1], self.z[k], self.z[k + 1]);
        let (y0, y1, y2) = (self.phi[k - 1], self.phi[k], self.phi[k + 1]);
        let l0 = (z - x1) * (z - x2) / ((x0 - x1) * (x0 - x2));
        let l1 = (z - x0) * (z - x2) / ((x1 - x0) * (x1 - x2));
        let l2 = (z - x0) * (z - x1) / ((x2 - x0) * (x2 - x1));
        Some(l0 * y0 + l1 * y1 + l2 * y2)
    }
}

/// Solves the tridiagonal system in place (Thomas algorithm); `rhs` receives the solution.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64], scratch: &mut [f64]) {
    let n = diag.len();
    scratch[0] = sup[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * scratch[i - 1];
        scratch[i] = sup[i] / m;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= scratch[i] * rhs[i + 1];
    }
}

fn closed_form_phi(spec: &RiccatiSpec, tau: f64, z: f64) -> Result<f64> {
    Ok((riccati_g(spec, tau)? + 0.5 * riccati_h(spec, tau)? * z * z).exp())
}

/// Full-grid `phi(., 0)` after `nt` steps.
fn march(spec: &RiccatiSpec, horizon: f64, grid: &FdGrid, nt: usize) -> Result<Vec<f64>> {
    let z = grid.nodes();
    let nz = grid.nz;
    let m = nz - 2;
    let dz = grid.dz();
    let dtau = horizon / nt as f64;
    let theta = grid.theta;

    // L phi_j = lo_j phi_{j-1} + mid_j phi_j + up_j phi_{j+1}
    let diff = 0.5 * spec.b2 / (dz * dz);
    let (mut lo, mut mid, mut up) = (vec![0.0; nz], vec![0.0; nz], vec![0.0; nz]);
    for j in 1..nz - 1 {
        let adv = spec.ab * z[j] / (2.0 * dz);
        lo[j] = diff - adv;
        mid[j] = -2.0 * diff + 0.5 * spec.xi * spec.a2 * z[j] * z[j];
        up[j] = diff + adv;
    }

    let (mut sub, mut dia, mut sup) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for i in 0..m {
        let j = i + 1;
        sub[i] = -theta * dtau * lo[j];
        dia[i] = 1.0 - theta * dtau * mid[j];
        sup[i] = -theta * dtau * up[j];
    }
    if grid.boundary == BoundaryCondition::ZeroCurvature {
        // phi_0 = 2 phi_1 - phi_2 folded into the first and last rows
        dia[0] += 2.0 * sub[0];
        sup[0] -= sub[0];
        dia[m - 1] += 2.0 * sup[m - 1];
        sub[m - 1] -= sup[m - 1];
    }

    let mut phi = vec![1.0; nz];
    let mut rhs = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    for n in 0..nt {
        let tau_new = (n + 1) as f64 * dtau;
        for i in 0..m {
            let j = i + 1;
            let l_phi = lo[j] * phi[j - 1] + mid[j] * phi[j] + up[j] * phi[j + 1];
            rhs[i] = phi[j] + (1.0 - theta) * dtau * l_phi;
        }
        let (left, right) = match grid.boundary {
            BoundaryCondition::ClosedForm => {
                let left = closed_form_phi(spec, tau_new, z[0])?;
                let right = closed_form_phi(spec, tau_new, z[nz - 1])?;
                rhs[0] += theta * dtau * lo[1] * left;
                rhs[m - 1] += theta * dtau * up[nz - 2] * right;
                (Some(left), Some(right))
            }
            BoundaryCondition::ZeroCurvature => (None, None),
        };
        solve_tridiagonal(&sub, &dia, &sup, &mut rhs, &mut scratch);
        phi[1..nz - 1].copy_from_slice(&rhs);
        phi[0] = left.unwrap_or(2.0 * phi[1] - phi[2]);
        phi[nz - 1] = right.unwrap_or(2.0 * phi[nz - 2] - phi[nz - 3]);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError(format!("non-finite finite-difference solution at tau = {tau_new}")));
        }
    }
    Ok(phi)
}

/// Solves the auxiliary Cauchy problem on `[0, horizon]` and returns `phi(z, 0)`
/// on the interior nodes.
///
/// A second solve with twice the time step provides a self-consistency check;
/// a relative discrepancy above 1e-3 over `|z| <= z_max / 2` is reported as
/// [`Error::GridTooCoarse`].
pub fn solve_cauchy_fd(spec: &RiccatiSpec, horizon: f64, grid: &FdGrid) -> Result<FdSolution> {
    grid.validate()?;
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon = {horizon} must be >= 0")));
    }
    if horizon >= spec.t_esc {
        return Err(Error::EscapeTimeExceeded { t: horizon, t_esc: spec.t_esc });
    }
    if horizon >= NEAR_ESCAPE_FRACTION * spec.t_esc {
        return Err(Error::HorizonNearEscape { horizon, t_esc: spec.t_esc });
    }
    let nodes = grid.nodes();
    let interior = 1..grid.nz - 1;
    if horizon == 0.0 {
        return Ok(FdSolution {
            z: nodes[interior.clone()].to_vec(),
            phi: vec![1.0; grid.nz - 2],
            self_consistency: 0.0,
        });
    }

    let fine = march(spec, horizon, grid, grid.nt)?;
    let mut self_consistency = 0.0;
    if grid.nt >= 2 {
        let coarse = march(spec, horizon, grid, grid.nt / 2)?;
        let half = 0.5 * grid.z_max.min(-grid.z_min);
        for j in interior.clone() {
            if nodes[j].abs() <= half {
                let rel = ((fine[j] - coarse[j]) / fine[j]).abs();
                self_consistency = f64::max(self_consistency, rel);
            }
        }
        if self_consistency > SELF_CONSISTENCY_TOL {
            return Err(Error::GridTooCoarse { discrepancy: self_consistency, tolerance: SELF_CONSISTENCY_TOL });
        }
    }
    Ok(FdSolution { z: nodes[interior.clone()].to_vec(), phi: fine[interior].to_vec(), self_consistency })
}

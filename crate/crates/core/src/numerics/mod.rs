//! Independent numerical oracles for the closed forms: a fixed-step RK4
//! integrator for the Riccati equation, Simpson quadrature for `g`, and a
//! theta-scheme finite-difference solver for the auxiliary Cauchy problem.

mod csv;
mod fd;
mod ode;
mod quadrature;

pub use self::csv::{write_profile_csv, write_trajectory_csv};
pub use fd::{solve_cauchy_fd, BoundaryCondition, FdGrid, FdSolution, NEAR_ESCAPE_FRACTION};
pub use ode::{riccati_rk4, riccati_rk4_at, OdeSolveConfig, Trajectory};
pub use quadrature::g_quadrature;

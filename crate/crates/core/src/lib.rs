//! Optimal investment in two cointegrated stocks under CRRA utility.
//!
//! The stocks follow a continuous-time error-correction model whose log-spread
//! `Z = log S1 - c log S2 + (sigma1^2 - c sigma2^2) t / 2` is a stationary
//! Ornstein-Uhlenbeck process. The crate provides
//!
//! * [`market_model`]: parameter validation, derived spread quantities, the
//!   critical risk aversion `gamma0` and the market-neutrality condition;
//! * [`closed_form`]: the Riccati/Cauchy closed forms, the value function and
//!   the optimal (and market-neutral) portfolio weights;
//! * [`numerics`]: independent oracles (RK4, Simpson quadrature, a theta-scheme
//!   finite-difference solver);
//! * [`simulation`]: seeded exact path simulation and Monte Carlo expected utility;
//! * [`analysis`]: experiment drivers that combine the above into reports.

pub mod analysis;
pub mod closed_form;
mod error;
pub mod market_model;
pub mod numerics;
pub mod simulation;

pub use error::{Error, Result};

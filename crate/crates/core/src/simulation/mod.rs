//! Seeded simulation of the two-stock market, the spread and strategy wealth,
//! plus Monte Carlo estimation of CRRA expected utility.
//!
//! Each step of length `dt` draws the spread Brownian increment `dW^Z` and
//! `Z_{t+dt}` jointly from their exact Gaussian law, so that the time integral
//! `int Z ds = (sigma_Z dW^Z - dZ) / kappa` is exact too. Log-prices and
//! log-wealth (weights held over the step) are then exact at grid nodes, and
//! the only discretisation left is the rebalancing frequency.
//!
//! Randomness comes from two counter-based ChaCha8 substreams per path, one
//! for the spread and one for the orthogonal Brownian direction, keyed by
//! `(seed, path)`. Results are therefore identical for any worker count.

mod dump;
mod engine;
mod estimate;
mod rng;
mod strategy;

pub use dump::write_paths_csv;
pub use engine::{
    make_orthogonal_pair, simulate, simulate_terminal, InitialSpread, PathBundle, SimConfig, TerminalState,
};
pub use estimate::{
    compensated_sum, crra_utility, mc_expected_utility, mc_utility_samples, sample_moments, McEstimate,
    SampleMoments, UtilitySamples,
};
pub use rng::PathStreams;
pub use strategy::Strategy;

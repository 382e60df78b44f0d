//! Evolves Pareto fronts of neural inventory-control policies for a
//! stochastic multi-echelon supply chain with three objectives: profit,
//! transport emissions and lead time.
//!
//! Module map:
//!
//! - [`env`]: the inventory MOMDP (dynamics, demand and lead-time sampling,
//!   disruptions, observations).
//! - [`policy`]: feed-forward policy network with Gaussian order heads and
//!   categorical transport-mode heads; flat genome codec.
//! - [`moea`]: NSGA-II machinery and the evolutionary driver.
//! - [`risk`]: Monte-Carlo rollouts, mean and CVaR fitness, VaR/CVaR estimators.
//! - [`scenario`]: configurations A/B/C, disruption scenarios and Pareto
//!   policy switching.
//! - [`store`]: archive, checkpoint and manifest file formats.

pub mod env;
pub mod error;
pub mod grid;
pub mod moea;
pub mod policy;
pub mod risk;
pub mod rng;
pub mod scenario;
pub mod store;

pub use error::*;

/// Version string recorded in manifests and reported by the control service.
pub const VERSION: &str = concat!("morse ", env!("CARGO_PKG_VERSION"));

//! General maximum likelihood empirical Bayes (GMLEB) estimation of a normal
//! mean vector.
//!
//! Observations `X_i ~ N(theta_i, 1)` are denoised by fitting a discrete
//! mixing distribution to the data by nonparametric maximum likelihood (EM on
//! a fixed grid) and then applying the posterior mean under the fitted prior.
//!
//! The crate is organised as:
//!
//! - [`mixtures`]: normal location mixtures, Bayes rules, Bayes risk, Hellinger distance.
//! - [`npmle`]: grid construction and the EM solver, with fixed-iteration and certified stopping.
//! - [`estimators`]: GMLEB, S-GMLEB and the classical competitors.
//! - [`diagnostics`]: losses, regrets, weak moments and convergence-rate calculators.
//! - [`simlab`]: seeded Monte Carlo scenarios, replication engine and aggregation.
//! - [`checks`]: the invariant suite behind `gmleb check`.
//!
//! With the default `parallel` feature, replications and componentwise rule
//! evaluation run on the rayon thread pool. Without it everything runs on the
//! calling thread and produces identical numbers.

pub mod checks;
pub mod diagnostics;
mod error;
pub mod estimators;
pub mod io;
pub mod mixtures;
pub mod normal;
pub mod npmle;
pub mod par;
pub mod simlab;

pub use error::{Error, Result};
pub use estimators::{estimate, EstimateResult, EstimatorSpec};
pub use mixtures::{DiscreteMixture, RegularizationLevel};
pub use npmle::{fit_npmle, NpmleFit, StopRule};
pub use simlab::{ScenarioConfig, SimulationRecord};

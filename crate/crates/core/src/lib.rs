//! Estimand calculus for generative outcome models.
//!
//! Given an outcome model on a link scale and a population covariate
//! distribution, this crate computes conditional and marginal treatment
//! effect estimands for binary and time-to-event outcomes, detects rank
//! conflicts between the two estimand families, analyses stratified
//! contingency tables with exact count arithmetic, and cross-checks every
//! integral against a seeded Monte Carlo potential-outcomes oracle.
//!
//! All computation is deterministic: integration reduces to fixed node lists
//! accumulated by pairwise summation in node order, Monte Carlo uses an
//! explicitly seeded counter-based generator, and worker parallelism never
//! changes results.

pub mod binary;
pub mod contingency;
pub mod decision;
mod error;
pub mod integrate;
mod link;
mod model;
pub mod oracle;
mod parallel;
mod sobol;
pub mod survival;

pub use binary::Direction;
pub use error::{Error, Result};
pub use integrate::{expect, expect_grid, IntegrationScheme, SchemeKind};
pub use link::{Collapsibility, LinkFunction};
pub use model::{Contrast, CovariateDistribution, Marginal, OutcomeModel, Population, TreatmentArm};

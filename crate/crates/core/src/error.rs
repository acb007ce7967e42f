//! Error taxonomy shared by every module in the crate.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building models or evaluating estimands.
///
/// Errors split into two families: invalid inputs (rejected before any
/// computation starts) and numerical failures encountered mid-computation.
/// [`Error::is_validation`] exposes the split so callers can map the two
/// families to distinct exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A treatment id was requested that the model does not declare.
    #[error("unknown treatment `{0}`")]
    UnknownTreatment(String),

    /// A vector had the wrong length for the model or distribution it met.
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Model construction violated a structural rule.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Covariate distribution construction violated a structural rule.
    #[error("invalid covariate distribution: {0}")]
    InvalidDistribution(String),

    /// A probability was handed to a link at a point where the link is
    /// unbounded (never clamped, always rejected).
    #[error("{link} link is undefined at probability {probability}")]
    LinkDomain {
        link: &'static str,
        probability: f64,
    },

    /// A linear predictor fell outside the range a link can map back to a
    /// probability (log link above 0, identity link outside [0, 1]).
    #[error("linear predictor {eta} is outside the range of the {link} link")]
    LinkRange { link: &'static str, eta: f64 },

    /// The requested integration scheme cannot integrate over the given
    /// distribution (e.g. exact enumeration over a continuous dimension).
    #[error("integration scheme {scheme} cannot be applied to {distribution}")]
    SchemeMismatch {
        scheme: &'static str,
        distribution: &'static str,
    },

    /// Integration scheme parameters were structurally invalid.
    #[error("invalid integration scheme: {0}")]
    InvalidScheme(String),

    /// The integrand produced NaN or an infinity.
    #[error("integrand returned a non-finite value at x = {at:?}")]
    NonFiniteIntegrand { at: Vec<f64> },

    /// An odds ratio hit a zero count; the offending cell is named so the
    /// caller can decide whether to rerun with the continuity correction.
    #[error("zero count for treatment `{treatment}` in subgroup `{subgroup}` makes the odds ratio undefined (enable the continuity correction to proceed)")]
    ZeroCell { treatment: String, subgroup: String },

    /// Contingency table construction violated a structural rule.
    #[error("invalid contingency table: {0}")]
    InvalidTable(String),

    /// A sweep grid violated a structural rule.
    #[error("invalid sweep grid: {0}")]
    InvalidSweepGrid(String),

    /// A target average probability outside (0, 1) was requested.
    #[error("target probability {0} must lie strictly between 0 and 1")]
    InvalidTargetProbability(f64),

    /// Root finding failed to bracket or converge.
    #[error("root finding failed: {0}")]
    RootFinding(String),

    /// The hazard cannot be evaluated: it diverges at t = 0 when the shape
    /// is below 1, or the survival weight has underflowed to zero.
    #[error("marginal hazard is not finite at t = {time} with shape {shape}")]
    HazardSingularity { shape: f64, time: f64 },

    /// A time value or time grid violated a structural rule.
    #[error("invalid time input: {0}")]
    InvalidTimeGrid(String),

    /// Net benefit specification violated a structural rule.
    #[error("invalid net benefit specification: {0}")]
    InvalidNetBenefit(String),

    /// Oracle configuration violated a structural rule.
    #[error("invalid oracle configuration: {0}")]
    InvalidOracleConfig(String),
}

impl Error {
    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownTreatment(_) => "unknown_treatment",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::LinkDomain { .. } => "link_domain",
            Error::LinkRange { .. } => "link_range",
            Error::SchemeMismatch { .. } => "scheme_mismatch",
            Error::InvalidScheme(_) => "invalid_scheme",
            Error::NonFiniteIntegrand { .. } => "non_finite_integrand",
            Error::ZeroCell { .. } => "zero_cell",
            Error::InvalidTable(_) => "invalid_table",
            Error::InvalidSweepGrid(_) => "invalid_sweep_grid",
            Error::InvalidTargetProbability(_) => "invalid_target_probability",
            Error::RootFinding(_) => "root_finding",
            Error::HazardSingularity { .. } => "hazard_singularity",
            Error::InvalidTimeGrid(_) => "invalid_time_grid",
            Error::InvalidNetBenefit(_) => "invalid_net_benefit",
            Error::InvalidOracleConfig(_) => "invalid_oracle_config",
        }
    }

    /// True for errors caused by invalid inputs rather than by numerics
    /// encountered during an otherwise well-posed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnknownTreatment(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidModel(_)
                | Error::InvalidDistribution(_)
                | Error::SchemeMismatch { .. }
                | Error::InvalidScheme(_)
                | Error::InvalidTable(_)
                | Error::InvalidSweepGrid(_)
                | Error::InvalidTargetProbability(_)
                | Error::InvalidTimeGrid(_)
                | Error::InvalidNetBenefit(_)
                | Error::InvalidOracleConfig(_)
        )
    }
}

//! Generative outcome model and population covariate distribution.
//!
//! The model places every treatment on a shared linear predictor
//! η_k(x) = μ + xᵀ(β₁ + β₂ₖ) + γₖ, with the first declared treatment acting
//! as the reference arm (its β₂ and γ are fixed at zero). A population pairs
//! a covariate distribution with its own intercept, because baseline risk is
//! a property of the population rather than of the coefficient set.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::LinkFunction;

/// One treatment arm: identifier plus its interaction and effect coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentArm {
    id: String,
    interaction: Vec<f64>,
    effect: f64,
}

impl TreatmentArm {
    /// A treatment with interaction coefficients β₂ₖ and effect γₖ.
    pub fn new(id: impl Into<String>, interaction: Vec<f64>, effect: f64) -> Self {
        TreatmentArm {
            id: id.into(),
            interaction,
            effect,
        }
    }

    /// The reference arm: all coefficients zero by construction.
    pub fn reference(id: impl Into<String>, dim: usize) -> Self {
        TreatmentArm::new(id, vec![0.0; dim], 0.0)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn interaction(&self) -> &[f64] {
        &self.interaction
    }

    pub fn effect(&self) -> f64 {
        self.effect
    }
}

/// Outcome model shared by the binary and survival estimand machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    link: LinkFunction,
    intercept: f64,
    prognostic: Vec<f64>,
    treatments: Vec<TreatmentArm>,
}

impl OutcomeModel {
    /// Validates and assembles a model. The first treatment is the reference
    /// and must carry exactly zero interaction and effect coefficients; every
    /// interaction vector must match the prognostic vector's length.
    pub fn new(
        link: LinkFunction,
        intercept: f64,
        prognostic: Vec<f64>,
        treatments: Vec<TreatmentArm>,
    ) -> Result<Self> {
        if !intercept.is_finite() {
            return Err(Error::InvalidModel(format!(
                "intercept must be finite, got {intercept}"
            )));
        }
        if let Some(bad) = prognostic.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "prognostic coefficient must be finite, got {bad}"
            )));
        }
        if treatments.is_empty() {
            return Err(Error::InvalidModel(
                "at least one treatment (the reference) is required".into(),
            ));
        }
        let dim = prognostic.len();
        for (i, arm) in treatments.iter().enumerate() {
            if arm.id.is_empty() {
                return Err(Error::InvalidModel(format!("treatment {i} has an empty id")));
            }
            if treatments[..i].iter().any(|other| other.id == arm.id) {
                return Err(Error::InvalidModel(format!(
                    "duplicate treatment id `{}`",
                    arm.id
                )));
            }
            if arm.interaction.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "treatment interaction vector",
                    expected: dim,
                    found: arm.interaction.len(),
                });
            }
            if arm.interaction.iter().any(|c| !c.is_finite()) || !arm.effect.is_finite() {
                return Err(Error::InvalidModel(format!(
                    "treatment `{}` has a non-finite coefficient",
                    arm.id
                )));
            }
        }
        let reference = &treatments[0];
        if reference.effect != 0.0 || reference.interaction.iter().any(|&c| c != 0.0) {
            return Err(Error::InvalidModel(format!(
                "reference treatment `{}` must have zero interaction and effect coefficients",
                reference.id
            )));
        }
        Ok(OutcomeModel {
            link,
            intercept,
            prognostic,
            treatments,
        })
    }

    pub fn link(&self) -> LinkFunction {
        self.link
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    /// Number of covariate dimensions (may be zero).
    pub fn dim(&self) -> usize {
        self.prognostic.len()
    }

    pub fn prognostic(&self) -> &[f64] {
        &self.prognostic
    }

    /// Id of the reference arm (the first declared treatment).
    pub fn reference(&self) -> &str {
        &self.treatments[0].id
    }

    pub fn arms(&self) -> &[TreatmentArm] {
        &self.treatments
    }

    /// Treatment ids in declaration order.
    pub fn treatment_ids(&self) -> impl Iterator<Item = &str> {
        self.treatments.iter().map(|a| a.id.as_str())
    }

    pub fn arm(&self, treatment: &str) -> Result<&TreatmentArm> {
        self.treatments
            .iter()
            .find(|a| a.id == treatment)
            .ok_or_else(|| Error::UnknownTreatment(treatment.to_string()))
    }

    /// A copy of this model with a different intercept, for baseline sweeps.
    pub fn with_intercept(&self, intercept: f64) -> Result<Self> {
        let mut model = self.clone();
        if !intercept.is_finite() {
            return Err(Error::InvalidModel(format!(
                "intercept must be finite, got {intercept}"
            )));
        }
        model.intercept = intercept;
        Ok(model)
    }

    /// η_k(x) = μ + xᵀ(β₁ + β₂ₖ) + γₖ using the model's own intercept.
    pub fn linear_predictor(&self, treatment: &str, x: &[f64]) -> Result<f64> {
        let arm = self.arm(treatment)?;
        self.check_dim(x)?;
        Ok(self.eta(self.intercept, arm, x))
    }

    /// Same linear predictor with the intercept supplied by a population.
    pub fn linear_predictor_at(&self, intercept: f64, treatment: &str, x: &[f64]) -> Result<f64> {
        let arm = self.arm(treatment)?;
        self.check_dim(x)?;
        Ok(self.eta(intercept, arm, x))
    }

    pub(crate) fn eta(&self, intercept: f64, arm: &TreatmentArm, x: &[f64]) -> f64 {
        let mut acc = intercept + arm.effect;
        for ((&xi, &beta), &gamma) in x.iter().zip(&self.prognostic).zip(&arm.interaction) {
            acc += xi * (beta + gamma);
        }
        acc
    }

    pub(crate) fn check_population(&self, pop: &Population) -> Result<()> {
        let found = pop.covariates.dim();
        if found != self.prognostic.len() {
            return Err(Error::DimensionMismatch {
                what: "population covariate distribution",
                expected: self.prognostic.len(),
                found,
            });
        }
        Ok(())
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.prognostic.len() {
            return Err(Error::DimensionMismatch {
                what: "covariate vector",
                expected: self.prognostic.len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Coefficients of the individual-level effect γ_ab(x) of switching from
    /// a to b: γ_ab(x) = (γ_b − γ_a) + xᵀ(β₂_b − β₂_a).
    pub fn contrast(&self, a: &str, b: &str) -> Result<Contrast> {
        let arm_a = self.arm(a)?;
        let arm_b = self.arm(b)?;
        let interaction = arm_b
            .interaction
            .iter()
            .zip(&arm_a.interaction)
            .map(|(bb, ba)| bb - ba)
            .collect();
        Ok(Contrast {
            effect: arm_b.effect - arm_a.effect,
            interaction,
        })
    }

    /// Conversion-of-effects map: starting from a probability π on treatment
    /// a at covariates x, the probability the model implies on treatment b is
    /// g⁻¹(g(π) + γ_ab(x)).
    ///
    /// π is rejected wherever g is unbounded (never clamped), and predictors
    /// that leave the range of a bounded link (log above 0, identity outside
    /// [0, 1]) surface as range errors.
    pub fn ccf(&self, a: &str, b: &str, pi: f64, x: &[f64]) -> Result<f64> {
        let contrast = self.contrast(a, b)?;
        self.check_dim(x)?;
        let eta = self.link.forward(pi)? + contrast.eval(x);
        self.link.inverse(eta)
    }
}

/// Difference of two treatment arms' coefficients, as a reusable functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    effect: f64,
    interaction: Vec<f64>,
}

impl Contrast {
    /// γ_b − γ_a, the covariate-independent part of the contrast.
    pub fn effect(&self) -> f64 {
        self.effect
    }

    /// β₂_b − β₂_a, the effect-modification part of the contrast.
    pub fn interaction(&self) -> &[f64] {
        &self.interaction
    }

    /// γ_ab(x) evaluated at a covariate vector.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut acc = self.effect;
        for (&xi, &gamma) in x.iter().zip(&self.interaction) {
            acc += xi * gamma;
        }
        acc
    }

    /// True when the two arms modify covariate effects identically, making
    /// the individual-level effect constant across the population.
    pub fn is_constant(&self) -> bool {
        self.interaction.iter().all(|&c| c == 0.0)
    }
}

/// Marginal distribution of a single covariate dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Bernoulli { prevalence: f64 },
    FinitePoints { values: Vec<f64>, weights: Vec<f64> },
}

impl Marginal {
    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Marginal::Uniform { lo, hi } => {
                if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform bounds on dimension {dim} must be finite with lo < hi, got [{lo}, {hi}]"
                    )));
                }
            }
            Marginal::Bernoulli { prevalence } => {
                if !(0.0..=1.0).contains(prevalence) {
                    return Err(Error::InvalidDistribution(format!(
                        "bernoulli prevalence on dimension {dim} must lie in [0, 1], got {prevalence}"
                    )));
                }
            }
            Marginal::FinitePoints { values, weights } => {
                if values.is_empty() {
                    return Err(Error::InvalidDistribution(format!(
                        "finite support on dimension {dim} must not be empty"
                    )));
                }
                if values.len() != weights.len() {
                    return Err(Error::DimensionMismatch {
                        what: "finite support weights",
                        expected: values.len(),
                        found: weights.len(),
                    });
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidDistribution(format!(
                        "finite support on dimension {dim} contains a non-finite value"
                    )));
                }
                if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "finite support weights on dimension {dim} must be non-negative"
                    )));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidDistribution(format!(
                        "finite support weights on dimension {dim} must sum to 1 within 1e-12, got {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when the marginal has a finite support.
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Marginal::Uniform { .. })
    }

    /// Mean of the marginal.
    pub fn mean(&self) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Bernoulli { prevalence } => *prevalence,
            Marginal::FinitePoints { values, weights } => values
                .iter()
                .zip(weights)
                .map(|(v, w)| v * w)
                .sum(),
        }
    }

    /// Closed range spanned by the support.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Marginal::Uniform { lo, hi } => (*lo, *hi),
            Marginal::Bernoulli { .. } => (0.0, 1.0),
            Marginal::FinitePoints { values, .. } => {
                let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi)
            }
        }
    }

    /// Support points and weights for exact enumeration, in a fixed order.
    pub(crate) fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Marginal::Uniform { .. } => None,
            Marginal::Bernoulli { prevalence } => {
                Some(vec![(0.0, 1.0 - prevalence), (1.0, *prevalence)])
            }
            Marginal::FinitePoints { values, weights } => Some(
                values
                    .iter()
                    .copied()
                    .zip(weights.iter().copied())
                    .collect(),
            ),
        }
    }

    /// Generalized inverse CDF, shared by quasi-random and pseudo-random
    /// sampling so both draw from exactly the same map.
    pub(crate) fn inverse_cdf(&self, u: f64) -> f64 {
        match self {
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * u,
            Marginal::Bernoulli { prevalence } => {
                if u < 1.0 - prevalence {
                    0.0
                } else {
                    1.0
                }
            }
            Marginal::FinitePoints { values, weights } => {
                let mut cum = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    cum += w;
                    if u < cum {
                        return *v;
                    }
                }
                *values.last().expect("validated non-empty support")
            }
        }
    }
}

/// Joint covariate distribution: independent marginals, or rows of an
/// observed sample carrying their own joint dependence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariateDistribution {
    Product(Vec<Marginal>),
    EmpiricalSample(Vec<Vec<f64>>),
}

impl CovariateDistribution {
    /// Independent marginals, one per covariate dimension.
    pub fn product(marginals: Vec<Marginal>) -> Result<Self> {
        for (dim, marginal) in marginals.iter().enumerate() {
            marginal.validate(dim)?;
        }
        Ok(CovariateDistribution::Product(marginals))
    }

    /// Joint sample rows, all of equal length.
    pub fn empirical(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDistribution(
                "empirical sample must contain at least one row".into(),
            ));
        }
        let dim = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "empirical sample row",
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "empirical sample row {i} contains a non-finite value"
                )));
            }
        }
        Ok(CovariateDistribution::EmpiricalSample(rows))
    }

    /// Number of covariate dimensions.
    pub fn dim(&self) -> usize {
        match self {
            CovariateDistribution::Product(marginals) => marginals.len(),
            CovariateDistribution::EmpiricalSample(rows) => rows[0].len(),
        }
    }

    /// True when every dimension has a finite support.
    pub fn is_discrete(&self) -> bool {
        match self {
            CovariateDistribution::Product(marginals) => {
                marginals.iter().all(Marginal::is_discrete)
            }
            CovariateDistribution::EmpiricalSample(_) => true,
        }
    }

    /// Population mean vector x̄.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            CovariateDistribution::Product(marginals) => {
                marginals.iter().map(Marginal::mean).collect()
            }
            CovariateDistribution::EmpiricalSample(rows) => {
                let dim = rows[0].len();
                let n = rows.len() as f64;
                (0..dim)
                    .map(|j| {
                        let column: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                        crate::integrate::pairwise_sum(&column) / n
                    })
                    .collect()
            }
        }
    }

    /// Closed range spanned by each dimension's support.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            CovariateDistribution::Product(marginals) => {
                marginals.iter().map(Marginal::bounds).collect()
            }
            CovariateDistribution::EmpiricalSample(rows) => {
                let dim = rows[0].len();
                (0..dim)
                    .map(|j| {
                        let lo = rows.iter().map(|r| r[j]).fold(f64::INFINITY, f64::min);
                        let hi = rows.iter().map(|r| r[j]).fold(f64::NEG_INFINITY, f64::max);
                        (lo, hi)
                    })
                    .collect()
            }
        }
    }
}

/// A population: its covariate distribution and its own model intercept.
///
/// Population-level estimands evaluate the outcome model with this intercept
/// in place of the model's, so the same coefficient set can be carried across
/// populations that differ in baseline risk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub intercept: f64,
    pub covariates: CovariateDistribution,
}

impl Population {
    pub fn new(intercept: f64, covariates: CovariateDistribution) -> Result<Self> {
        if !intercept.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "population intercept must be finite, got {intercept}"
            )));
        }
        Ok(Population {
            intercept,
            covariates,
        })
    }
}

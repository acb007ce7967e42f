//! Binary-outcome estimands: individual and population-average conditional
//! effects, average event probabilities, marginal effects, treatment
//! rankings, and population-averaged net benefit.
//!
//! Conditional estimands live on the link scale and never touch the
//! intercept; marginal estimands pass through the probability scale and
//! depend on the population's baseline risk. The two families need not
//! agree on treatment rankings, which is the central phenomenon this crate
//! exists to expose.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{expect, expect_grid, IntegrationScheme};
use crate::link::{Collapsibility, LinkFunction};
use crate::model::{Contrast, OutcomeModel, Population};

/// Differences below this are reported as ranking ties.
pub const RANK_TIE_TOLERANCE: f64 = 1e-9;

/// Whether smaller or larger outcome probabilities are preferable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    LowerIsBetter,
    HigherIsBetter,
}

impl Direction {
    /// Sort key turning "better" into "smaller" for both directions.
    fn key(self, score: f64) -> f64 {
        match self {
            Direction::LowerIsBetter => score,
            Direction::HigherIsBetter => -score,
        }
    }
}

/// γ_ab(x): the individual-level effect of switching from a to b at
/// covariates x, on the link scale. Independent of intercept and prognostic
/// coefficients by construction.
pub fn individual_conditional_effect(
    model: &OutcomeModel,
    a: &str,
    b: &str,
    x: &[f64],
) -> Result<f64> {
    let contrast = model.contrast(a, b)?;
    model.check_dim(x)?;
    Ok(contrast.eval(x))
}

/// d_ab: the individual-level effect averaged over the population's
/// covariate distribution, still on the link scale.
pub fn population_conditional_effect(
    model: &OutcomeModel,
    pop: &Population,
    a: &str,
    b: &str,
    scheme: &IntegrationScheme,
) -> Result<f64> {
    model.check_population(pop)?;
    let contrast = model.contrast(a, b)?;
    expect(&pop.covariates, scheme, |x| Ok(contrast.eval(x)))
}

/// π_k(x): event probability on treatment k at covariates x, evaluated with
/// the population's intercept.
pub fn individual_probability(
    model: &OutcomeModel,
    pop_intercept: f64,
    treatment: &str,
    x: &[f64],
) -> Result<f64> {
    let eta = model.linear_predictor_at(pop_intercept, treatment, x)?;
    model.link().inverse(eta)
}

/// π̄_k: the average event probability on treatment k over the population.
pub fn average_probability(
    model: &OutcomeModel,
    pop: &Population,
    treatment: &str,
    scheme: &IntegrationScheme,
) -> Result<f64> {
    model.check_population(pop)?;
    let arm = model.arm(treatment)?;
    expect(&pop.covariates, scheme, |x| {
        model.link().inverse(model.eta(pop.intercept, arm, x))
    })
}

/// Δ_ab: the marginal effect, a contrast of average event probabilities
/// mapped back to the link scale.
pub fn population_marginal_effect(
    model: &OutcomeModel,
    pop: &Population,
    a: &str,
    b: &str,
    scheme: &IntegrationScheme,
) -> Result<f64> {
    model.check_population(pop)?;
    let arm_a = model.arm(a)?;
    let arm_b = model.arm(b)?;
    let link = model.link();
    let pbar = expect_grid(&pop.covariates, scheme, 2, |x, out| {
        out[0] = link.inverse(model.eta(pop.intercept, arm_a, x))?;
        out[1] = link.inverse(model.eta(pop.intercept, arm_b, x))?;
        Ok(())
    })?;
    Ok(link.forward(pbar[1])? - link.forward(pbar[0])?)
}

/// Average probability and scores against the reference arm for one
/// treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmEstimands {
    pub id: String,
    pub average_probability: f64,
    pub conditional_vs_reference: f64,
    pub marginal_vs_reference: f64,
}

/// Both population-level estimands for one ordered treatment pair, plus the
/// coefficients of the individual-level effect curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimands {
    pub a: String,
    pub b: String,
    pub individual_effect: Contrast,
    pub conditional: f64,
    pub marginal: f64,
}

impl PairEstimands {
    /// γ_ab(x) for this pair.
    pub fn individual_effect_at(&self, x: &[f64]) -> f64 {
        self.individual_effect.eval(x)
    }
}

/// An ordered treatment list, best first, with near-ties reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub order: Vec<String>,
    pub ties: Vec<(String, String)>,
}

/// Every binary estimand for a (model, population) pair: per-arm averages,
/// per-pair conditional and marginal effects, and the treatment rankings
/// each estimand family implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimandReport {
    pub link: LinkFunction,
    pub collapsibility: Collapsibility,
    pub direction: Direction,
    pub scheme: String,
    pub tolerance: f64,
    pub reference: String,
    pub arms: Vec<ArmEstimands>,
    pub pairs: Vec<PairEstimands>,
    pub conditional_ranking: Ranking,
    pub marginal_ranking: Ranking,
}

/// Assembles the full estimand report over every treatment in the model, in
/// declaration order, sharing a single pass over the integration nodes so
/// all reported numbers are mutually consistent.
pub fn estimand_report(
    model: &OutcomeModel,
    pop: &Population,
    direction: Direction,
    scheme: &IntegrationScheme,
) -> Result<EstimandReport> {
    model.check_population(pop)?;
    let arms = model.arms();
    let k = arms.len();
    let link = model.link();

    let mut pair_ids = Vec::new();
    let mut contrasts = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            pair_ids.push((i, j));
            contrasts.push(model.contrast(arms[i].id(), arms[j].id())?);
        }
    }

    let columns = expect_grid(&pop.covariates, scheme, k + contrasts.len(), |x, out| {
        for (i, arm) in arms.iter().enumerate() {
            out[i] = link.inverse(model.eta(pop.intercept, arm, x))?;
        }
        for (p, contrast) in contrasts.iter().enumerate() {
            out[k + p] = contrast.eval(x);
        }
        Ok(())
    })?;
    let (pbar, conditional) = columns.split_at(k);

    let eta_bar: Vec<f64> = pbar.iter().map(|&p| link.forward(p)).collect::<Result<_>>()?;

    let mut pairs = Vec::with_capacity(contrasts.len());
    let mut d_vs_ref = vec![0.0; k];
    for (p, &(i, j)) in pair_ids.iter().enumerate() {
        if i == 0 {
            d_vs_ref[j] = conditional[p];
        }
        pairs.push(PairEstimands {
            a: arms[i].id().to_string(),
            b: arms[j].id().to_string(),
            individual_effect: contrasts[p].clone(),
            conditional: conditional[p],
            marginal: eta_bar[j] - eta_bar[i],
        });
    }

    let arm_estimands: Vec<ArmEstimands> = (0..k)
        .map(|i| ArmEstimands {
            id: arms[i].id().to_string(),
            average_probability: pbar[i],
            conditional_vs_reference: d_vs_ref[i],
            marginal_vs_reference: eta_bar[i] - eta_bar[0],
        })
        .collect();

    let conditional_scores: Vec<(String, f64)> = arm_estimands
        .iter()
        .map(|a| (a.id.clone(), a.conditional_vs_reference))
        .collect();
    let marginal_scores: Vec<(String, f64)> = arm_estimands
        .iter()
        .map(|a| (a.id.clone(), a.marginal_vs_reference))
        .collect();

    Ok(EstimandReport {
        link,
        collapsibility: link.collapsibility(),
        direction,
        scheme: scheme.describe(),
        tolerance: scheme.tolerance(),
        reference: model.reference().to_string(),
        arms: arm_estimands,
        pairs,
        conditional_ranking: rank(&conditional_scores, direction),
        marginal_ranking: rank(&marginal_scores, direction),
    })
}

/// Sorts treatments best-first under the direction; treatments whose scores
/// sit within [`RANK_TIE_TOLERANCE`] are ordered lexicographically and
/// reported as ties.
pub(crate) fn rank(scores: &[(String, f64)], direction: Direction) -> Ranking {
    let mut entries: Vec<(&str, f64)> = scores
        .iter()
        .map(|(id, s)| (id.as_str(), direction.key(*s)))
        .collect();
    entries.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite scores").then(a.0.cmp(b.0)));

    let mut order = Vec::with_capacity(entries.len());
    let mut ties = Vec::new();
    let mut start = 0;
    while start < entries.len() {
        let mut end = start + 1;
        while end < entries.len() && entries[end].1 - entries[end - 1].1 < RANK_TIE_TOLERANCE {
            end += 1;
        }
        let cluster = &mut entries[start..end];
        cluster.sort_by(|a, b| a.0.cmp(b.0));
        for i in 0..cluster.len() {
            for j in (i + 1)..cluster.len() {
                if (cluster[i].1 - cluster[j].1).abs() < RANK_TIE_TOLERANCE {
                    let (x, y) = (cluster[i].0, cluster[j].0);
                    let (x, y) = if x <= y { (x, y) } else { (y, x) };
                    ties.push((x.to_string(), y.to_string()));
                }
            }
        }
        order.extend(cluster.iter().map(|(id, _)| id.to_string()));
        start = end;
    }
    ties.sort();
    Ranking { order, ties }
}

/// How the net-benefit value function is averaged over the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingMode {
    /// E[φ_k(π_k(x))]: average the value function over individuals.
    IndividualLevel,
    /// φ_k(π̄_k): apply the value function to the average probability.
    PlugInAverage,
}

/// Per-treatment polynomial value functions φ_k(π) plus the averaging mode.
///
/// Polynomials are stored as ascending-degree coefficient lists of length at
/// most five (degree ≤ 4), evaluated by Horner's rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetBenefitSpec {
    values: BTreeMap<String, Vec<f64>>,
    mode: AveragingMode,
}

impl NetBenefitSpec {
    pub fn new(
        values: impl IntoIterator<Item = (String, Vec<f64>)>,
        mode: AveragingMode,
    ) -> Result<Self> {
        let values: BTreeMap<String, Vec<f64>> = values.into_iter().collect();
        for (treatment, coeffs) in &values {
            if coeffs.is_empty() || coeffs.len() > 5 {
                return Err(Error::InvalidNetBenefit(format!(
                    "value function for `{treatment}` must have 1 to 5 coefficients (degree at most 4), got {}",
                    coeffs.len()
                )));
            }
            if coeffs.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidNetBenefit(format!(
                    "value function for `{treatment}` has a non-finite coefficient"
                )));
            }
        }
        Ok(NetBenefitSpec { values, mode })
    }

    pub fn mode(&self) -> AveragingMode {
        self.mode
    }

    /// Ascending-degree coefficients for one treatment's value function.
    pub fn coefficients(&self, treatment: &str) -> Result<&[f64]> {
        self.values
            .get(treatment)
            .map(Vec::as_slice)
            .ok_or_else(|| {
                Error::InvalidNetBenefit(format!("no value function for treatment `{treatment}`"))
            })
    }

    /// φ_k(π) by Horner's rule.
    pub fn value(&self, treatment: &str, pi: f64) -> Result<f64> {
        let coeffs = self.coefficients(treatment)?;
        Ok(horner(coeffs, pi))
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Population net benefit of treatment k: either the population average of
/// individual-level values or the value function applied to the average
/// probability. The two differ for nonlinear φ (Jensen gap).
pub fn expected_net_benefit(
    model: &OutcomeModel,
    pop: &Population,
    spec: &NetBenefitSpec,
    treatment: &str,
    scheme: &IntegrationScheme,
) -> Result<f64> {
    model.check_population(pop)?;
    let coeffs = spec.coefficients(treatment)?;
    let arm = model.arm(treatment)?;
    match spec.mode() {
        AveragingMode::IndividualLevel => expect(&pop.covariates, scheme, |x| {
            let pi = model.link().inverse(model.eta(pop.intercept, arm, x))?;
            Ok(horner(coeffs, pi))
        }),
        AveragingMode::PlugInAverage => {
            let pbar = average_probability(model, pop, treatment, scheme)?;
            Ok(horner(coeffs, pbar))
        }
    }
}

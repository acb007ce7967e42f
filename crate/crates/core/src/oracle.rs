//! Monte-Carlo potential-outcomes oracle.
//!
//! Draws covariates from the population, evaluates each arm's potential
//! outcome per draw, and averages: on the linear-predictor scale for
//! conditional effects, on the probability scale (then transformed back)
//! for marginal effects. The integration layer is bypassed entirely, so
//! these estimates cross-check the quadrature results; the link and model
//! arithmetic is shared.
//!
//! By default the oracle averages exact conditional probabilities over the
//! covariate draws, which removes outcome noise while leaving the check of
//! the integration layer intact. The `bernoulli_outcomes` flag switches to
//! simulating binary potential outcomes per draw for a fully independent
//! end-to-end validation with wider tolerances.
//!
//! Standard errors are delete-one jackknives over draw units (a unit is a
//! single draw, or an antithetic pair when `antithetic` is set). Results
//! are deterministic given the configuration: draws are split into a fixed
//! number of batches seeded by batch index with a counter-based generator,
//! and batch results are combined in batch order, so the output is
//! bit-identical for any worker count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binary::individual_probability;
use crate::error::{Error, Result};
use crate::model::{Contrast, CovariateDistribution, OutcomeModel, Population};
use crate::parallel::map_slots;
use crate::survival::{TimeGrid, WeibullPHModel};

/// Fewest draws accepted for any oracle run.
pub const MIN_DRAWS: usize = 10_000;

/// Fewest draws accepted when simulating Bernoulli outcomes, whose extra
/// noise needs more averaging to be a useful check.
pub const MIN_BERNOULLI_DRAWS: usize = 1_000_000;

/// Draws are split into this many deterministic batches.
const BATCHES: usize = 64;

/// Settings for one oracle run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub draws: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub bernoulli_outcomes: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            draws: 1_000_000,
            seed: 0,
            antithetic: false,
            bernoulli_outcomes: false,
        }
    }
}

impl OracleConfig {
    fn validate(&self) -> Result<()> {
        if self.draws < MIN_DRAWS {
            return Err(Error::InvalidOracleConfig(format!(
                "draws must be at least {MIN_DRAWS}, got {}",
                self.draws
            )));
        }
        if self.antithetic && !self.draws.is_multiple_of(2) {
            return Err(Error::InvalidOracleConfig(format!(
                "antithetic sampling needs an even number of draws, got {}",
                self.draws
            )));
        }
        if self.bernoulli_outcomes && self.draws < MIN_BERNOULLI_DRAWS {
            return Err(Error::InvalidOracleConfig(format!(
                "simulated Bernoulli outcomes need at least {MIN_BERNOULLI_DRAWS} draws, got {}",
                self.draws
            )));
        }
        Ok(())
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.draws / 2
        } else {
            self.draws
        }
    }
}

/// A Monte-Carlo estimate with its jackknife standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimandEstimate {
    pub value: f64,
    pub se: f64,
}

/// Average event probability estimate for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmEstimate {
    pub id: String,
    pub average_probability: EstimandEstimate,
}

/// Conditional and marginal effect estimates for one treatment pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub a: String,
    pub b: String,
    pub conditional: EstimandEstimate,
    pub marginal: EstimandEstimate,
}

/// Oracle estimates for the binary estimands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEstimands {
    pub config: OracleConfig,
    pub arms: Vec<ArmEstimate>,
    pub pairs: Vec<PairEstimate>,
}

/// Oracle marginal survival and hazard curves for one arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSurvivalCurve {
    pub id: String,
    pub marginal_survival: Vec<EstimandEstimate>,
    pub marginal_hazard: Vec<EstimandEstimate>,
}

/// Oracle marginal hazard-ratio curve for one treatment pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleHazardRatioCurve {
    pub a: String,
    pub b: String,
    pub marginal_hazard_ratio: Vec<EstimandEstimate>,
}

/// Oracle estimates for the survival estimands over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSurvival {
    pub config: OracleConfig,
    pub shape: f64,
    pub times: Vec<f64>,
    pub arms: Vec<OracleSurvivalCurve>,
    pub pairs: Vec<OracleHazardRatioCurve>,
}

/// Running mean and centered second moment, mergeable across batches.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, value: f64) {
        self.count += 1.0;
        let delta = value - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (value - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Moments {
            count,
            mean: self.mean + delta * (other.count / count),
            m2: self.m2 + other.m2 + delta * delta * (self.count * other.count / count),
        }
    }

    /// Standard error of the mean of the pushed values; identical to the
    /// delete-one jackknife of the mean.
    fn se_of_mean(&self) -> f64 {
        (self.m2 / (self.count * (self.count - 1.0))).sqrt()
    }

    /// Delete-one jackknife standard error when the pushed values are the
    /// leave-one-out estimates themselves.
    fn jackknife_se(&self) -> f64 {
        (self.m2 * (self.count - 1.0) / self.count).sqrt()
    }
}

fn batch_sizes(units: usize) -> Vec<usize> {
    let batches = BATCHES.min(units.max(1));
    let base = units / batches;
    let rem = units % batches;
    (0..batches).map(|b| base + usize::from(b < rem)).collect()
}

fn covariate_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * batch as u64);
    rng
}

fn outcome_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * batch as u64 + 1);
    rng
}

/// Fills `x0` (and `x1` with the antithetic mirror) through the same
/// inverse-CDF map the quasi-random integrator uses.
fn draw_unit(
    covariates: &CovariateDistribution,
    rng: &mut ChaCha8Rng,
    antithetic: bool,
    x0: &mut [f64],
    x1: &mut [f64],
) {
    match covariates {
        CovariateDistribution::Product(marginals) => {
            for (j, marginal) in marginals.iter().enumerate() {
                let u: f64 = rng.gen();
                x0[j] = marginal.inverse_cdf(u);
                if antithetic {
                    x1[j] = marginal.inverse_cdf(1.0 - u);
                }
            }
        }
        CovariateDistribution::EmpiricalSample(rows) => {
            let pick = |v: f64| ((v * rows.len() as f64) as usize).min(rows.len() - 1);
            let u: f64 = rng.gen();
            x0.copy_from_slice(&rows[pick(u)]);
            if antithetic {
                x1.copy_from_slice(&rows[pick(1.0 - u)]);
            }
        }
    }
}

fn merge_batches(batches: Vec<Result<Vec<Moments>>>, stats: usize) -> Result<Vec<Moments>> {
    let mut merged = vec![Moments::default(); stats];
    for batch in batches {
        for (m, b) in merged.iter_mut().zip(batch?) {
            *m = m.merge(b);
        }
    }
    Ok(merged)
}

fn resolve_treatments(model: &OutcomeModel, treatments: &[String]) -> Result<Vec<String>> {
    if treatments.is_empty() {
        return Ok(model.treatment_ids().map(String::from).collect());
    }
    let mut seen = std::collections::BTreeSet::new();
    for id in treatments {
        model.arm(id)?;
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidModel(format!(
                "treatment `{id}` appears twice in the comparison set"
            )));
        }
    }
    Ok(treatments.to_vec())
}

struct BinaryContext<'a> {
    model: &'a OutcomeModel,
    pop: &'a Population,
    ids: &'a [String],
    contrasts: &'a [Contrast],
    config: OracleConfig,
}

/// Runs one batch, calling `emit` once per unit with the unit's statistic
/// values: the per-arm outcome averages first, then the per-pair contrast
/// averages. Both passes replay identical draws because the generators are
/// functions of the seed and batch index alone.
fn scan_binary_batch(
    ctx: &BinaryContext<'_>,
    batch: usize,
    units: usize,
    mut emit: impl FnMut(&[f64]) -> Result<()>,
) -> Result<()> {
    let dim = ctx.pop.covariates.dim();
    let mut rng_cov = covariate_rng(ctx.config.seed, batch);
    let mut rng_out = outcome_rng(ctx.config.seed, batch);
    let mut x0 = vec![0.0; dim];
    let mut x1 = vec![0.0; dim];
    let n_arms = ctx.ids.len();
    let mut values = vec![0.0; n_arms + ctx.contrasts.len()];
    let per_unit = if ctx.config.antithetic { 2.0 } else { 1.0 };
    for _ in 0..units {
        draw_unit(
            &ctx.pop.covariates,
            &mut rng_cov,
            ctx.config.antithetic,
            &mut x0,
            &mut x1,
        );
        values.fill(0.0);
        for (slot, id) in ctx.ids.iter().enumerate() {
            values[slot] += unit_outcome(ctx, id, &x0, &mut rng_out)?;
            if ctx.config.antithetic {
                values[slot] += unit_outcome(ctx, id, &x1, &mut rng_out)?;
            }
        }
        for (p, contrast) in ctx.contrasts.iter().enumerate() {
            values[n_arms + p] += contrast.eval(&x0);
            if ctx.config.antithetic {
                values[n_arms + p] += contrast.eval(&x1);
            }
        }
        for value in &mut values {
            *value /= per_unit;
        }
        emit(&values)?;
    }
    Ok(())
}

fn unit_outcome(
    ctx: &BinaryContext<'_>,
    treatment: &str,
    x: &[f64],
    rng_out: &mut ChaCha8Rng,
) -> Result<f64> {
    let p = individual_probability(ctx.model, ctx.pop.intercept, treatment, x)?;
    if ctx.config.bernoulli_outcomes {
        let u: f64 = rng_out.gen();
        Ok(f64::from(u < p))
    } else {
        Ok(p)
    }
}

/// Monte-Carlo estimates of the binary estimands: the average event
/// probability per arm and, per treatment pair, the conditional effect
/// (linear-predictor average) and the marginal effect (link difference of
/// average probabilities), each with a delete-one jackknife standard error.
///
/// An empty `treatments` slice selects every arm of the model. The
/// conditional effect averages the model contrast over covariate draws in
/// both outcome modes; simulated Bernoulli outcomes only enter the
/// probability-scale estimates.
pub fn oracle_estimands(
    model: &OutcomeModel,
    pop: &Population,
    treatments: &[String],
    config: &OracleConfig,
) -> Result<OracleEstimands> {
    model.check_population(pop)?;
    config.validate()?;
    let ids = resolve_treatments(model, treatments)?;
    let n_arms = ids.len();
    let mut pair_ids = Vec::new();
    let mut contrasts = Vec::new();
    for i in 0..n_arms {
        for j in i + 1..n_arms {
            pair_ids.push((i, j));
            contrasts.push(model.contrast(&ids[i], &ids[j])?);
        }
    }

    let sizes = batch_sizes(config.units());
    let ctx = BinaryContext {
        model,
        pop,
        ids: &ids,
        contrasts: &contrasts,
        config: *config,
    };
    let stats = n_arms + contrasts.len();

    let base = merge_batches(
        map_slots(sizes.len(), |b| {
            let mut acc = vec![Moments::default(); stats];
            scan_binary_batch(&ctx, b, sizes[b], |values| {
                for (m, v) in acc.iter_mut().zip(values) {
                    m.push(*v);
                }
                Ok(())
            })?;
            Ok(acc)
        }),
        stats,
    )?;

    let link = model.link();
    let n = base[0].count;
    let mut marginal_points = Vec::with_capacity(pair_ids.len());
    for &(i, j) in &pair_ids {
        marginal_points.push(link.forward(base[j].mean)? - link.forward(base[i].mean)?);
    }

    let marginal_moments = merge_batches(
        map_slots(sizes.len(), |b| {
            let mut acc = vec![Moments::default(); pair_ids.len()];
            scan_binary_batch(&ctx, b, sizes[b], |values| {
                for (p, &(i, j)) in pair_ids.iter().enumerate() {
                    let loo_a = base[i].mean + (base[i].mean - values[i]) / (n - 1.0);
                    let loo_b = base[j].mean + (base[j].mean - values[j]) / (n - 1.0);
                    acc[p].push(link.forward(loo_b)? - link.forward(loo_a)?);
                }
                Ok(())
            })?;
            Ok(acc)
        }),
        pair_ids.len(),
    )?;

    let arms = ids
        .iter()
        .enumerate()
        .map(|(k, id)| ArmEstimate {
            id: id.clone(),
            average_probability: EstimandEstimate {
                value: base[k].mean,
                se: base[k].se_of_mean(),
            },
        })
        .collect();
    let pairs = pair_ids
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| PairEstimate {
            a: ids[i].clone(),
            b: ids[j].clone(),
            conditional: EstimandEstimate {
                value: base[n_arms + p].mean,
                se: base[n_arms + p].se_of_mean(),
            },
            marginal: EstimandEstimate {
                value: marginal_points[p],
                se: marginal_moments[p].jackknife_se(),
            },
        })
        .collect();

    Ok(OracleEstimands {
        config: *config,
        arms,
        pairs,
    })
}

struct SurvivalContext<'a> {
    model: &'a WeibullPHModel,
    pop: &'a Population,
    weights: &'a [f64],
    rates: &'a [f64],
    config: OracleConfig,
}

/// Runs one batch, calling `emit` once per unit with, for every arm and
/// time, the unit's survival-weighted hazard then survival, laid out as
/// `(arm_index * times + time_index) * 2 + {0, 1}`.
fn scan_survival_batch(
    ctx: &SurvivalContext<'_>,
    batch: usize,
    units: usize,
    mut emit: impl FnMut(&[f64]) -> Result<()>,
) -> Result<()> {
    let model = ctx.model.model();
    let arms = model.arms();
    let dim = ctx.pop.covariates.dim();
    let n_t = ctx.weights.len();
    let mut rng_cov = covariate_rng(ctx.config.seed, batch);
    let mut x0 = vec![0.0; dim];
    let mut x1 = vec![0.0; dim];
    let mut values = vec![0.0; arms.len() * n_t * 2];
    let per_unit = if ctx.config.antithetic { 2.0 } else { 1.0 };
    for _ in 0..units {
        draw_unit(
            &ctx.pop.covariates,
            &mut rng_cov,
            ctx.config.antithetic,
            &mut x0,
            &mut x1,
        );
        values.fill(0.0);
        let draws: [&[f64]; 2] = [&x0, &x1];
        let n_draws = if ctx.config.antithetic { 2 } else { 1 };
        for x in &draws[..n_draws] {
            for (k, arm) in arms.iter().enumerate() {
                let rate = model.eta(ctx.pop.intercept, arm, x).exp();
                for ti in 0..n_t {
                    let survival = (-ctx.weights[ti] * rate).exp();
                    values[(k * n_t + ti) * 2] += survival * ctx.rates[ti] * rate;
                    values[(k * n_t + ti) * 2 + 1] += survival;
                }
            }
        }
        for value in &mut values {
            *value /= per_unit;
        }
        emit(&values)?;
    }
    Ok(())
}

/// Monte-Carlo estimates of the survival estimands over a time grid: the
/// marginal survival and marginal hazard per arm and the marginal hazard
/// ratio per treatment pair, each with a delete-one jackknife standard
/// error.
///
/// Marginal survival averages individual survival over covariate draws;
/// the marginal hazard is the ratio of the survival-weighted hazard
/// average to the survival average on the same draws. The Bernoulli
/// outcome mode applies only to binary estimands and is rejected here.
pub fn oracle_survival(
    model: &WeibullPHModel,
    pop: &Population,
    grid: &TimeGrid,
    config: &OracleConfig,
) -> Result<OracleSurvival> {
    model.model().check_population(pop)?;
    config.validate()?;
    if config.bernoulli_outcomes {
        return Err(Error::InvalidOracleConfig(
            "the Bernoulli outcome mode applies only to binary estimands".into(),
        ));
    }
    let arms = model.model().arms();
    let n_arms = arms.len();
    let times = grid.times();
    let n_t = times.len();
    let shape = model.shape();
    let weights: Vec<f64> = times.iter().map(|&t| t.powf(shape)).collect();
    let rates: Vec<f64> = times
        .iter()
        .map(|&t| shape * t.powf(shape - 1.0))
        .collect();
    let mut pair_ids = Vec::new();
    for i in 0..n_arms {
        for j in i + 1..n_arms {
            pair_ids.push((i, j));
        }
    }

    let sizes = batch_sizes(config.units());
    let ctx = SurvivalContext {
        model,
        pop,
        weights: &weights,
        rates: &rates,
        config: *config,
    };
    let stats = n_arms * n_t * 2;

    let base = merge_batches(
        map_slots(sizes.len(), |b| {
            let mut acc = vec![Moments::default(); stats];
            scan_survival_batch(&ctx, b, sizes[b], |values| {
                for (m, v) in acc.iter_mut().zip(values) {
                    m.push(*v);
                }
                Ok(())
            })?;
            Ok(acc)
        }),
        stats,
    )?;

    let n = base[0].count;
    let hazard_point = |k: usize, ti: usize| -> Result<f64> {
        let hazard = base[(k * n_t + ti) * 2].mean / base[(k * n_t + ti) * 2 + 1].mean;
        if !hazard.is_finite() {
            return Err(Error::HazardSingularity {
                shape,
                time: times[ti],
            });
        }
        Ok(hazard)
    };
    for k in 0..n_arms {
        for ti in 0..n_t {
            hazard_point(k, ti)?;
        }
    }

    let derived_stats = (n_arms + pair_ids.len()) * n_t;
    let derived = merge_batches(
        map_slots(sizes.len(), |b| {
            let mut acc = vec![Moments::default(); derived_stats];
            let mut hazard_loo = vec![0.0; n_arms * n_t];
            scan_survival_batch(&ctx, b, sizes[b], |values| {
                for k in 0..n_arms {
                    for ti in 0..n_t {
                        let sh = base[(k * n_t + ti) * 2];
                        let s = base[(k * n_t + ti) * 2 + 1];
                        let loo_sh = sh.mean + (sh.mean - values[(k * n_t + ti) * 2]) / (n - 1.0);
                        let loo_s =
                            s.mean + (s.mean - values[(k * n_t + ti) * 2 + 1]) / (n - 1.0);
                        let hazard = loo_sh / loo_s;
                        hazard_loo[k * n_t + ti] = hazard;
                        acc[k * n_t + ti].push(hazard);
                    }
                }
                for (p, &(i, j)) in pair_ids.iter().enumerate() {
                    for ti in 0..n_t {
                        acc[(n_arms + p) * n_t + ti]
                            .push(hazard_loo[j * n_t + ti] / hazard_loo[i * n_t + ti]);
                    }
                }
                Ok(())
            })?;
            Ok(acc)
        }),
        derived_stats,
    )?;

    let arm_curves = arms
        .iter()
        .enumerate()
        .map(|(k, arm)| {
            let marginal_survival = (0..n_t)
                .map(|ti| {
                    let s = base[(k * n_t + ti) * 2 + 1];
                    EstimandEstimate {
                        value: s.mean,
                        se: s.se_of_mean(),
                    }
                })
                .collect();
            let marginal_hazard = (0..n_t)
                .map(|ti| {
                    Ok(EstimandEstimate {
                        value: hazard_point(k, ti)?,
                        se: derived[k * n_t + ti].jackknife_se(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OracleSurvivalCurve {
                id: arm.id().to_string(),
                marginal_survival,
                marginal_hazard,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let pair_curves = pair_ids
        .iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let marginal_hazard_ratio = (0..n_t)
                .map(|ti| {
                    Ok(EstimandEstimate {
                        value: hazard_point(j, ti)? / hazard_point(i, ti)?,
                        se: derived[(n_arms + p) * n_t + ti].jackknife_se(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(OracleHazardRatioCurve {
                a: arms[i].id().to_string(),
                b: arms[j].id().to_string(),
                marginal_hazard_ratio,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OracleSurvival {
        config: *config,
        shape,
        times: times.to_vec(),
        arms: arm_curves,
        pairs: pair_curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binary::{
        average_probability, population_conditional_effect, population_marginal_effect,
    };
    use crate::integrate::IntegrationScheme;
    use crate::link::LinkFunction;
    use crate::model::{Marginal, TreatmentArm};

    fn conflict_model() -> OutcomeModel {
        OutcomeModel::new(
            LinkFunction::Logit,
            0.0,
            vec![-1.0],
            vec![
                TreatmentArm::reference("A", 1),
                TreatmentArm::new("B", vec![-3.0], -4.0),
                TreatmentArm::new("C", vec![-1.0], -3.0),
            ],
        )
        .unwrap()
    }

    fn uniform_pop() -> Population {
        Population::new(
            0.0,
            CovariateDistribution::product(vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }]).unwrap(),
        )
        .unwrap()
    }

    fn degenerate_pop() -> Population {
        Population::new(
            0.0,
            CovariateDistribution::product(vec![Marginal::FinitePoints {
                values: vec![0.0],
                weights: vec![1.0],
            }])
            .unwrap(),
        )
        .unwrap()
    }

    fn config(draws: usize, seed: u64) -> OracleConfig {
        OracleConfig {
            draws,
            seed,
            ..OracleConfig::default()
        }
    }

    fn pair<'a>(result: &'a OracleEstimands, a: &str, b: &str) -> &'a PairEstimate {
        result
            .pairs
            .iter()
            .find(|p| p.a == a && p.b == b)
            .unwrap()
    }

    fn arm<'a>(result: &'a OracleEstimands, id: &str) -> &'a ArmEstimate {
        result.arms.iter().find(|a| a.id == id).unwrap()
    }

    #[test]
    fn degenerate_covariates_reproduce_constant_effects_exactly() {
        let result = oracle_estimands(
            &conflict_model(),
            &degenerate_pop(),
            &[],
            &config(10_000, 1),
        )
        .unwrap();
        let ab = pair(&result, "A", "B");
        assert!((ab.conditional.value + 4.0).abs() < 1e-12);
        assert!((ab.marginal.value + 4.0).abs() < 1e-12);
        assert!(ab.conditional.se < 1e-12);
        assert!(ab.marginal.se < 1e-9);
        let pbar_a = arm(&result, "A").average_probability;
        assert!((pbar_a.value - 0.5).abs() < 1e-12);
        assert!(pbar_a.se < 1e-12);
    }

    #[test]
    fn estimates_agree_with_quadrature_within_four_standard_errors() {
        let model = conflict_model();
        let pop = uniform_pop();
        let scheme = IntegrationScheme::gauss_legendre(64).unwrap();
        let result = oracle_estimands(&model, &pop, &[], &config(1_000_000, 7)).unwrap();

        for estimate in &result.arms {
            let exact = average_probability(&model, &pop, &estimate.id, &scheme).unwrap();
            let e = estimate.average_probability;
            assert!(e.se > 0.0 && e.se < 0.01);
            assert!(
                (e.value - exact).abs() <= 4.0 * e.se,
                "{}: {} vs {exact} (se {})",
                estimate.id,
                e.value,
                e.se
            );
        }
        for estimate in &result.pairs {
            let d = population_conditional_effect(&model, &pop, &estimate.a, &estimate.b, &scheme)
                .unwrap();
            let delta =
                population_marginal_effect(&model, &pop, &estimate.a, &estimate.b, &scheme)
                    .unwrap();
            assert!((estimate.conditional.value - d).abs() <= 4.0 * estimate.conditional.se);
            assert!((estimate.marginal.value - delta).abs() <= 4.0 * estimate.marginal.se);
        }

        let ab = pair(&result, "A", "B");
        assert!((ab.conditional.value + 4.0).abs() <= 4.0 * ab.conditional.se);
        assert!((ab.marginal.value + 2.355855478938845).abs() <= 4.0 * ab.marginal.se);
    }

    #[test]
    fn identical_configurations_reproduce_bitwise_identical_estimates() {
        let model = conflict_model();
        let pop = uniform_pop();
        let first = oracle_estimands(&model, &pop, &[], &config(20_000, 42)).unwrap();
        let second = oracle_estimands(&model, &pop, &[], &config(20_000, 42)).unwrap();
        for (x, y) in first.pairs.iter().zip(&second.pairs) {
            assert_eq!(x.conditional.value.to_bits(), y.conditional.value.to_bits());
            assert_eq!(x.conditional.se.to_bits(), y.conditional.se.to_bits());
            assert_eq!(x.marginal.value.to_bits(), y.marginal.value.to_bits());
            assert_eq!(x.marginal.se.to_bits(), y.marginal.se.to_bits());
        }
        for (x, y) in first.arms.iter().zip(&second.arms) {
            assert_eq!(
                x.average_probability.value.to_bits(),
                y.average_probability.value.to_bits()
            );
        }

        let reseeded = oracle_estimands(&model, &pop, &[], &config(20_000, 43)).unwrap();
        assert_ne!(
            pair(&first, "A", "B").conditional.value.to_bits(),
            pair(&reseeded, "A", "B").conditional.value.to_bits()
        );
    }

    #[test]
    fn standard_errors_shrink_with_draw_count() {
        let model = conflict_model();
        let pop = uniform_pop();
        let small = oracle_estimands(&model, &pop, &[], &config(50_000, 11)).unwrap();
        let large = oracle_estimands(&model, &pop, &[], &config(200_000, 11)).unwrap();
        let ratios = [
            pair(&small, "A", "B").conditional.se / pair(&large, "A", "B").conditional.se,
            pair(&small, "A", "B").marginal.se / pair(&large, "A", "B").marginal.se,
            arm(&small, "B").average_probability.se / arm(&large, "B").average_probability.se,
        ];
        for ratio in ratios {
            assert!((1.7..=2.3).contains(&ratio), "se ratio {ratio}");
        }
    }

    #[test]
    fn antithetic_pairing_cancels_symmetric_integrands() {
        let model = conflict_model();
        let pop = uniform_pop();
        let plain = oracle_estimands(&model, &pop, &[], &config(100_000, 3)).unwrap();
        let anti = oracle_estimands(
            &model,
            &pop,
            &[],
            &OracleConfig {
                draws: 100_000,
                seed: 3,
                antithetic: true,
                ..OracleConfig::default()
            },
        )
        .unwrap();
        let plain_a = arm(&plain, "A").average_probability;
        let anti_a = arm(&anti, "A").average_probability;
        assert!((anti_a.value - 0.5).abs() < 1e-9);
        assert!(anti_a.se < 1e-9);
        assert!(plain_a.se > 1e-5);
        let anti_d = pair(&anti, "A", "B").conditional;
        assert!((anti_d.value + 4.0).abs() < 1e-9);
        assert!(anti_d.se < 1e-9);
    }

    #[test]
    fn bernoulli_outcomes_add_noise_but_not_bias() {
        let model = conflict_model();
        let pop = uniform_pop();
        let exact = oracle_estimands(&model, &pop, &[], &config(1_000_000, 9)).unwrap();
        let noisy = oracle_estimands(
            &model,
            &pop,
            &[],
            &OracleConfig {
                draws: 1_000_000,
                seed: 9,
                bernoulli_outcomes: true,
                ..OracleConfig::default()
            },
        )
        .unwrap();

        for (e, n) in exact.pairs.iter().zip(&noisy.pairs) {
            assert_eq!(e.conditional.value.to_bits(), n.conditional.value.to_bits());
        }
        for (e, n) in exact.arms.iter().zip(&noisy.arms) {
            let (pe, pn) = (e.average_probability, n.average_probability);
            assert!(pn.se > pe.se);
            assert!((pn.value - pe.value).abs() <= 5.0 * pn.se, "{}", e.id);
        }
        let (me, mn) = (pair(&exact, "A", "B").marginal, pair(&noisy, "A", "B").marginal);
        assert!((mn.value - me.value).abs() <= 5.0 * mn.se);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let model = conflict_model();
        let pop = uniform_pop();
        let cases = [
            OracleConfig {
                draws: 9_999,
                ..OracleConfig::default()
            },
            OracleConfig {
                draws: 10_001,
                antithetic: true,
                ..OracleConfig::default()
            },
            OracleConfig {
                draws: 10_000,
                bernoulli_outcomes: true,
                ..OracleConfig::default()
            },
        ];
        for bad in cases {
            let err = oracle_estimands(&model, &pop, &[], &bad).unwrap_err();
            assert!(matches!(err, Error::InvalidOracleConfig(_)), "{bad:?}");
        }
    }

    fn weibull_model(b_interaction: f64, c_interaction: f64) -> WeibullPHModel {
        WeibullPHModel::new(
            2.0,
            OutcomeModel::new(
                LinkFunction::Log,
                -1.0,
                vec![0.25f64.ln()],
                vec![
                    TreatmentArm::reference("A", 1),
                    TreatmentArm::new("B", vec![b_interaction], 0.6f64.ln()),
                    TreatmentArm::new("C", vec![c_interaction], 0.5f64.ln()),
                ],
            )
            .unwrap(),
        )
        .unwrap()
    }

    fn weibull_pop() -> Population {
        Population::new(
            -1.0,
            CovariateDistribution::product(vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn survival_oracle_matches_the_closed_form_without_covariates() {
        let model = weibull_model(0.0, 0.0);
        let pop = Population::new(-1.0, degenerate_pop().covariates).unwrap();
        let grid = TimeGrid::new(vec![0.5, 1.0, 2.0]).unwrap();
        let result = oracle_survival(&model, &pop, &grid, &config(10_000, 2)).unwrap();

        let rate_b = (-1.0 + 0.6f64.ln()).exp();
        let curve = result.arms.iter().find(|a| a.id == "B").unwrap();
        for (ti, &t) in result.times.iter().enumerate() {
            let survival = (-t.powi(2) * rate_b).exp();
            let hazard = 2.0 * t * rate_b;
            assert!((curve.marginal_survival[ti].value - survival).abs() < 1e-12);
            assert!((curve.marginal_hazard[ti].value - hazard).abs() < 1e-12);
            assert!(curve.marginal_survival[ti].se < 1e-13);
            assert!(curve.marginal_hazard[ti].se < 1e-12);
        }
        let ab = result
            .pairs
            .iter()
            .find(|p| p.a == "A" && p.b == "B")
            .unwrap();
        for estimate in &ab.marginal_hazard_ratio {
            assert!((estimate.value - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn survival_oracle_agrees_with_quadrature_and_brackets_the_crossing() {
        let model = weibull_model(0.7f64.ln(), 0.9f64.ln());
        let pop = weibull_pop();
        let crossing = 2.0175751171971556;
        let grid = TimeGrid::new(vec![1.0, crossing, 3.0]).unwrap();
        let scheme = IntegrationScheme::gauss_legendre(64).unwrap();
        let result = oracle_survival(&model, &pop, &grid, &config(100_000, 4)).unwrap();

        let bc = result
            .pairs
            .iter()
            .find(|p| p.a == "B" && p.b == "C")
            .unwrap();
        let exact = model
            .marginal_hazard_ratio_curve(&pop, "B", "C", &grid, &scheme)
            .unwrap();
        for (estimate, target) in bc.marginal_hazard_ratio.iter().zip(&exact) {
            assert!(estimate.se > 0.0);
            assert!((estimate.value - target).abs() <= 4.0 * estimate.se);
        }
        let at = |ti: usize| bc.marginal_hazard_ratio[ti];
        assert!(at(0).value + 4.0 * at(0).se < 1.0);
        assert!(at(2).value - 4.0 * at(2).se > 1.0);
        assert!((at(1).value - 1.0).abs() <= 4.0 * at(1).se);
    }

    #[test]
    fn survival_oracle_rejects_bernoulli_outcomes() {
        let model = weibull_model(0.0, 0.0);
        let grid = TimeGrid::new(vec![1.0, 2.0]).unwrap();
        let err = oracle_survival(
            &model,
            &weibull_pop(),
            &grid,
            &OracleConfig {
                draws: 1_000_000,
                bernoulli_outcomes: true,
                ..OracleConfig::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidOracleConfig(_)));
    }

    #[test]
    fn oracle_matches_the_saturated_contingency_model() {
        use crate::contingency::{Cell, ContingencyTable, Subgroup};

        let table = ContingencyTable::new(
            vec![
                Subgroup::new("x=0", 0.75).unwrap(),
                Subgroup::new("x=1", 0.25).unwrap(),
            ],
            vec!["A".into(), "B".into()],
            vec![
                vec![
                    Cell {
                        events: 202,
                        non_events: 548,
                    },
                    Cell {
                        events: 156,
                        non_events: 94,
                    },
                ],
                vec![
                    Cell {
                        events: 89,
                        non_events: 661,
                    },
                    Cell {
                        events: 42,
                        non_events: 208,
                    },
                ],
            ],
        )
        .unwrap();

        let logit = |p: f64| (p / (1.0 - p)).ln();
        let rate = |t: &str, s: &str| {
            let cell = table.cell(t, s).unwrap();
            cell.events as f64 / cell.total() as f64
        };
        let mu = logit(rate("A", "x=0"));
        let beta1 = logit(rate("A", "x=1")) - mu;
        let effect = logit(rate("B", "x=0")) - mu;
        let interaction = logit(rate("B", "x=1")) - logit(rate("B", "x=0")) - beta1;
        let model = OutcomeModel::new(
            LinkFunction::Logit,
            mu,
            vec![beta1],
            vec![
                TreatmentArm::reference("A", 1),
                TreatmentArm::new("B", vec![interaction], effect),
            ],
        )
        .unwrap();
        let pop = Population::new(
            mu,
            CovariateDistribution::product(vec![Marginal::Bernoulli { prevalence: 0.25 }])
                .unwrap(),
        )
        .unwrap();

        let result = oracle_estimands(&model, &pop, &[], &config(200_000, 6)).unwrap();
        let ab = pair(&result, "A", "B");
        let d_target = table.population_conditional_or("A", "B").unwrap().ln();
        let delta_target = table.marginal_or("A", "B").unwrap().ln();
        assert!((ab.conditional.value - d_target).abs() <= 4.0 * ab.conditional.se);
        assert!((ab.marginal.value - delta_target).abs() <= 4.0 * ab.marginal.se);
    }
}

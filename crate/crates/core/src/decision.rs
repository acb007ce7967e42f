//! Decision-support analyses built on the binary estimand calculus:
//! rank-conflict reports with sign-change witnesses, baseline-risk sweeps
//! with switch detection, intercept calibration from a target average
//! probability, and shared-effect-modifier scenario checks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::binary::{
    average_probability, individual_probability, population_conditional_effect,
    population_marginal_effect, rank, Direction, Ranking, RANK_TIE_TOLERANCE,
};
use crate::error::{Error, Result};
use crate::integrate::IntegrationScheme;
use crate::model::{Contrast, CovariateDistribution, Marginal, OutcomeModel, Population};
use crate::parallel::map_slots;

/// Points per covariate axis when scanning for sign-change witnesses.
pub const WITNESS_SCAN_POINTS: usize = 512;

/// Width to which a witness bracket is refined by bisection.
pub const WITNESS_TOLERANCE: f64 = 1e-8;

/// Accuracy of the average probability reached by
/// [`intercept_from_baseline_risk`].
pub const BASELINE_RISK_TOLERANCE: f64 = 1e-10;

/// Width to which sweep switch points are refined by bisection.
const SWITCH_TOLERANCE: f64 = 1e-10;

/// Default sweep grid: this many points over the starting bounds.
const SWEEP_POINTS: usize = 101;

/// Starting half-width of the default sweep grid.
const SWEEP_START_BOUND: f64 = 6.0;

/// Largest half-width the default sweep grid grows to while hunting for a
/// second ranking order.
const SWEEP_MAX_BOUND: f64 = 20.0;

/// Points per curve emitted by [`shared_em_scenario`].
const SCENARIO_CURVE_POINTS: usize = 201;

/// Sign relation between the conditional and marginal effect of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    /// Both effects are clear of the tie tolerance and share a sign.
    Agree,
    /// Both effects are clear of the tie tolerance with opposite signs.
    Conflict,
    /// At least one effect sits within the tie tolerance of zero, so the
    /// pair is reported as agreement with a warning instead of a verdict.
    NearTie,
}

/// Conditional and marginal effect of one treatment pair with their sign
/// relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSigns {
    pub a: String,
    pub b: String,
    pub conditional: f64,
    pub marginal: f64,
    pub status: PairStatus,
}

/// A place on one covariate axis where an individual-level contrast changes
/// sign, holding the other covariates at the population mean.
///
/// On continuous axes the bracket is refined by bisection and `crossing`
/// holds its midpoint; between discrete support points no crossing value
/// exists and `crossing` is `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub axis: usize,
    pub lower: f64,
    pub upper: f64,
    pub crossing: Option<f64>,
}

/// The witnesses found for one conflicting pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairWitnesses {
    pub a: String,
    pub b: String,
    pub witnesses: Vec<Witness>,
}

/// Rankings, per-pair sign relations, and sign-change witnesses for a set of
/// treatments.
///
/// `conflict` is true exactly when some pair's conditional and marginal
/// effects have opposite signs with both magnitudes clear of the tie
/// tolerance. Witness scans run along one covariate axis at a time with the
/// other covariates held at the population mean, so a conflict driven by a
/// region reachable only by moving several covariates at once is reported
/// with an empty witness list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub direction: Direction,
    pub scheme: String,
    pub tolerance: f64,
    pub treatments: Vec<String>,
    pub conditional_ranking: Ranking,
    pub marginal_ranking: Ranking,
    pub conflict: bool,
    pub pairs: Vec<PairSigns>,
    pub witnesses: Vec<PairWitnesses>,
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PopulationIntercept,
    WeibullShape,
}

/// Conditional and marginal effect of one pair at every grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSeries {
    pub a: String,
    pub b: String,
    pub conditional: Vec<f64>,
    pub marginal: Vec<f64>,
}

/// A grid value where the marginal order of two treatments flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSwitch {
    pub first: String,
    pub second: String,
    pub at: f64,
}

/// A grid value where the marginal effect magnitude of one pair passes its
/// conditional effect magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullDistanceThreshold {
    pub a: String,
    pub b: String,
    pub at: f64,
    /// True when the marginal effect is the one further from the null for
    /// grid values above `at`.
    pub marginal_exceeds_above: bool,
}

/// Effects across a grid of population intercept values, with every
/// detected marginal rank switch and null-distance threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub scheme: String,
    pub tolerance: f64,
    pub series: Vec<SweepSeries>,
    pub rank_switches: Vec<RankSwitch>,
    pub null_distance_thresholds: Vec<NullDistanceThreshold>,
}

/// A pair whose individual-level contrast is covariate-free, with its
/// constant value on the link scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantContrast {
    pub a: String,
    pub b: String,
    pub log_or: f64,
}

/// An unordered treatment pair named in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairLabel {
    pub a: String,
    pub b: String,
}

/// Event probability and contrast curves along the first covariate axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCurves {
    pub x: Vec<f64>,
    pub arms: Vec<ArmCurve>,
}

/// One treatment's curves: event probability and the individual-level
/// contrast against the reference arm, both per grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmCurve {
    pub id: String,
    pub probability: Vec<f64>,
    pub log_or_vs_reference: Vec<f64>,
}

/// Outcome of a shared-effect-modifier declaration: which pairs have
/// covariate-free contrasts, which can cross, and the curves showing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedEmReport {
    pub shared: Vec<String>,
    pub constant_contrasts: Vec<ConstantContrast>,
    pub crossing_capable: Vec<PairLabel>,
    pub curves: ScenarioCurves,
}

/// Builds the rankings, pairwise sign table, and conflict witnesses for a
/// set of treatments.
///
/// An empty `treatments` slice selects every arm of the model in
/// declaration order. Scores are taken against the model's reference arm;
/// pairwise effects are computed directly for each pair. For every
/// conflicting pair the individual-level contrast is scanned for sign
/// changes along each covariate axis.
pub fn conflict_report(
    model: &OutcomeModel,
    pop: &Population,
    treatments: &[String],
    direction: Direction,
    scheme: &IntegrationScheme,
) -> Result<ConflictReport> {
    model.check_population(pop)?;
    let ids: Vec<String> = if treatments.is_empty() {
        model.treatment_ids().map(String::from).collect()
    } else {
        let mut seen = BTreeSet::new();
        for id in treatments {
            model.arm(id)?;
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "treatment `{id}` appears twice in the comparison set"
                )));
            }
        }
        treatments.to_vec()
    };
    let reference = model.reference().to_string();

    let mut conditional_scores = Vec::with_capacity(ids.len());
    let mut marginal_scores = Vec::with_capacity(ids.len());
    for id in &ids {
        let d = population_conditional_effect(model, pop, &reference, id, scheme)?;
        let delta = population_marginal_effect(model, pop, &reference, id, scheme)?;
        conditional_scores.push((id.clone(), d));
        marginal_scores.push((id.clone(), delta));
    }

    let mut pairs = Vec::new();
    let mut witnesses = Vec::new();
    let mut conflict = false;
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let (a, b) = (&ids[i], &ids[j]);
            let conditional = population_conditional_effect(model, pop, a, b, scheme)?;
            let marginal = population_marginal_effect(model, pop, a, b, scheme)?;
            let status = pair_status(conditional, marginal);
            if status == PairStatus::Conflict {
                conflict = true;
                witnesses.push(PairWitnesses {
                    a: a.clone(),
                    b: b.clone(),
                    witnesses: pair_witnesses(model, pop, a, b)?,
                });
            }
            pairs.push(PairSigns {
                a: a.clone(),
                b: b.clone(),
                conditional,
                marginal,
                status,
            });
        }
    }

    Ok(ConflictReport {
        direction,
        scheme: scheme.describe(),
        tolerance: scheme.tolerance(),
        treatments: ids,
        conditional_ranking: rank(&conditional_scores, direction),
        marginal_ranking: rank(&marginal_scores, direction),
        conflict,
        pairs,
        witnesses,
    })
}

fn pair_status(conditional: f64, marginal: f64) -> PairStatus {
    if conditional.abs() <= RANK_TIE_TOLERANCE || marginal.abs() <= RANK_TIE_TOLERANCE {
        PairStatus::NearTie
    } else if (conditional > 0.0) != (marginal > 0.0) {
        PairStatus::Conflict
    } else {
        PairStatus::Agree
    }
}

/// Scans every covariate axis for sign changes of the individual-level
/// contrast between `a` and `b`, holding the other axes at the population
/// mean.
fn pair_witnesses(
    model: &OutcomeModel,
    pop: &Population,
    a: &str,
    b: &str,
) -> Result<Vec<Witness>> {
    let contrast = model.contrast(a, b)?;
    let mean = pop.covariates.mean();
    let mut witnesses = Vec::new();
    for axis in 0..pop.covariates.dim() {
        axis_scan(&contrast, &pop.covariates, axis, &mean, &mut witnesses);
    }
    Ok(witnesses)
}

enum AxisSupport {
    Continuous { lo: f64, hi: f64 },
    Discrete(Vec<f64>),
}

fn axis_support(covariates: &CovariateDistribution, axis: usize) -> AxisSupport {
    match covariates {
        CovariateDistribution::Product(marginals) => match &marginals[axis] {
            Marginal::Uniform { lo, hi } => AxisSupport::Continuous { lo: *lo, hi: *hi },
            Marginal::Bernoulli { .. } => AxisSupport::Discrete(vec![0.0, 1.0]),
            Marginal::FinitePoints { values, .. } => {
                let mut support = values.clone();
                support.sort_by(f64::total_cmp);
                support.dedup();
                AxisSupport::Discrete(support)
            }
        },
        CovariateDistribution::EmpiricalSample(rows) => {
            let mut support: Vec<f64> = rows.iter().map(|r| r[axis]).collect();
            support.sort_by(f64::total_cmp);
            support.dedup();
            AxisSupport::Discrete(support)
        }
    }
}

fn axis_scan(
    contrast: &Contrast,
    covariates: &CovariateDistribution,
    axis: usize,
    mean: &[f64],
    out: &mut Vec<Witness>,
) {
    let mut x = mean.to_vec();
    let mut gamma = move |t: f64| {
        x[axis] = t;
        contrast.eval(&x)
    };
    match axis_support(covariates, axis) {
        AxisSupport::Continuous { lo, hi } => {
            let n = WITNESS_SCAN_POINTS;
            let step = (hi - lo) / (n - 1) as f64;
            let mut prev_t = lo;
            let mut prev_f = gamma(lo);
            for i in 1..n {
                let t = if i == n - 1 { hi } else { lo + step * i as f64 };
                let f = gamma(t);
                if prev_f == 0.0 {
                    out.push(Witness {
                        axis,
                        lower: prev_t,
                        upper: prev_t,
                        crossing: Some(prev_t),
                    });
                } else if prev_f * f < 0.0 {
                    let (lower, upper) = refine_witness(prev_t, t, prev_f, &mut gamma);
                    out.push(Witness {
                        axis,
                        lower,
                        upper,
                        crossing: Some(0.5 * (lower + upper)),
                    });
                }
                prev_t = t;
                prev_f = f;
            }
            if prev_f == 0.0 {
                out.push(Witness {
                    axis,
                    lower: prev_t,
                    upper: prev_t,
                    crossing: Some(prev_t),
                });
            }
        }
        AxisSupport::Discrete(support) => {
            for window in support.windows(2) {
                let (lo, hi) = (window[0], window[1]);
                let f_lo = gamma(lo);
                let f_hi = gamma(hi);
                if f_lo == 0.0 {
                    out.push(Witness {
                        axis,
                        lower: lo,
                        upper: lo,
                        crossing: Some(lo),
                    });
                } else if f_lo * f_hi < 0.0 {
                    out.push(Witness {
                        axis,
                        lower: lo,
                        upper: hi,
                        crossing: None,
                    });
                }
            }
            if let Some(&last) = support.last() {
                if support.len() > 1 && gamma(last) == 0.0 {
                    out.push(Witness {
                        axis,
                        lower: last,
                        upper: last,
                        crossing: Some(last),
                    });
                }
            }
        }
    }
}

/// Shrinks a sign-change bracket by bisection until it is narrower than
/// [`WITNESS_TOLERANCE`].
fn refine_witness(
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    f: &mut impl FnMut(f64) -> f64,
) -> (f64, f64) {
    while hi - lo > WITNESS_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return (mid, mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// The default sweep grid: evenly spaced population intercepts.
pub fn default_sweep_grid() -> Vec<f64> {
    linspace(-SWEEP_START_BOUND, SWEEP_START_BOUND, SWEEP_POINTS)
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Sweeps the population intercept, recording the conditional and marginal
/// effect of each comparator arm against the reference.
///
/// An empty `arms` slice selects every non-reference arm. With `grid` set
/// to `None` the sweep starts on [`default_sweep_grid`] and widens (up to
/// half-width 20) until at least two marginal orderings of the arms have
/// been observed; an explicit grid is used as given. Rank switches between
/// swept arms (and against the reference, whose marginal effect is zero by
/// definition) and null-distance thresholds, where a pair's marginal
/// magnitude passes its conditional magnitude, are refined by bisection
/// between the bracketing grid values.
pub fn baseline_risk_sweep(
    model: &OutcomeModel,
    pop: &Population,
    grid: Option<&[f64]>,
    arms: &[String],
    scheme: &IntegrationScheme,
) -> Result<SweepResult> {
    model.check_population(pop)?;
    let reference = model.reference().to_string();
    let arm_ids: Vec<String> = if arms.is_empty() {
        model
            .treatment_ids()
            .filter(|id| *id != reference)
            .map(String::from)
            .collect()
    } else {
        let mut seen = BTreeSet::new();
        for id in arms {
            model.arm(id)?;
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidModel(format!(
                    "treatment `{id}` appears twice in the sweep arm set"
                )));
            }
        }
        arms.to_vec()
    };
    if arm_ids.is_empty() {
        return Err(Error::InvalidModel(
            "the sweep needs at least one comparator arm".into(),
        ));
    }

    let evaluate = |grid: &[f64]| -> Result<Vec<Vec<(f64, f64)>>> {
        let rows = map_slots(grid.len(), |i| {
            let pop_mu = Population::new(grid[i], pop.covariates.clone())?;
            arm_ids
                .iter()
                .map(|b| {
                    let d = population_conditional_effect(model, &pop_mu, &reference, b, scheme)?;
                    let delta = population_marginal_effect(model, &pop_mu, &reference, b, scheme)?;
                    Ok((d, delta))
                })
                .collect::<Result<Vec<_>>>()
        });
        rows.into_iter().collect()
    };

    let mut grid_values = match grid {
        Some(values) => {
            validate_grid(values)?;
            values.to_vec()
        }
        None => default_sweep_grid(),
    };
    let mut rows = evaluate(&grid_values)?;

    if grid.is_none() && arm_ids.len() + 1 >= 2 {
        let mut bound = SWEEP_START_BOUND;
        while bound < SWEEP_MAX_BOUND && marginal_orders(&rows).len() < 2 {
            bound = (bound * 2.0).min(SWEEP_MAX_BOUND);
            grid_values = linspace(-bound, bound, SWEEP_POINTS);
            rows = evaluate(&grid_values)?;
        }
    }

    let series: Vec<SweepSeries> = arm_ids
        .iter()
        .enumerate()
        .map(|(k, b)| SweepSeries {
            a: reference.clone(),
            b: b.clone(),
            conditional: rows.iter().map(|row| row[k].0).collect(),
            marginal: rows.iter().map(|row| row[k].1).collect(),
        })
        .collect();

    let marginal_at = |b: &str, mu: f64| -> Result<f64> {
        let pop_mu = Population::new(mu, pop.covariates.clone())?;
        population_marginal_effect(model, &pop_mu, &reference, b, scheme)
    };

    // Rank switches: the reference participates with a marginal effect that
    // is identically zero.
    let mut switch_ids: Vec<&str> = vec![&reference];
    switch_ids.extend(arm_ids.iter().map(String::as_str).filter(|b| *b != reference));
    let score_of = |id: &str, row: &[(f64, f64)]| -> f64 {
        arm_ids
            .iter()
            .position(|b| b == id)
            .map_or(0.0, |k| row[k].1)
    };
    let mut rank_switches = Vec::new();
    for p in 0..switch_ids.len() {
        for q in p + 1..switch_ids.len() {
            let (first, second) = (switch_ids[p], switch_ids[q]);
            let diff: Vec<f64> = rows
                .iter()
                .map(|row| score_of(first, row) - score_of(second, row))
                .collect();
            for at in locate_roots(&grid_values, &diff, &mut |mu| {
                Ok(zero_if_reference(first, &reference, mu, &marginal_at)?
                    - zero_if_reference(second, &reference, mu, &marginal_at)?)
            })? {
                rank_switches.push(RankSwitch {
                    first: first.to_string(),
                    second: second.to_string(),
                    at,
                });
            }
        }
    }

    // Null-distance thresholds: |marginal| minus |conditional| per pair.
    let mut null_distance_thresholds = Vec::new();
    for (k, b) in arm_ids.iter().enumerate() {
        let d_abs = rows[0][k].0.abs();
        let gap: Vec<f64> = rows.iter().map(|row| row[k].1.abs() - d_abs).collect();
        for at in locate_roots(&grid_values, &gap, &mut |mu| {
            Ok(marginal_at(b, mu)?.abs() - d_abs)
        })? {
            let probe = marginal_at(b, at + SWITCH_TOLERANCE)?.abs() - d_abs;
            null_distance_thresholds.push(NullDistanceThreshold {
                a: reference.clone(),
                b: b.clone(),
                at,
                marginal_exceeds_above: probe > 0.0,
            });
        }
    }

    Ok(SweepResult {
        variable: SweepVariable::PopulationIntercept,
        grid: grid_values,
        scheme: scheme.describe(),
        tolerance: scheme.tolerance(),
        series,
        rank_switches,
        null_distance_thresholds,
    })
}

fn zero_if_reference(
    id: &str,
    reference: &str,
    mu: f64,
    marginal_at: &impl Fn(&str, f64) -> Result<f64>,
) -> Result<f64> {
    if id == reference {
        Ok(0.0)
    } else {
        marginal_at(id, mu)
    }
}

fn validate_grid(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(Error::InvalidSweepGrid(
            "a sweep grid needs at least two values".into(),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSweepGrid(
            "sweep grid values must be finite".into(),
        ));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSweepGrid(
            "sweep grid values must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// The distinct marginal orderings observed across the grid.
fn marginal_orders(rows: &[Vec<(f64, f64)>]) -> BTreeSet<Vec<usize>> {
    let mut orders = BTreeSet::new();
    for row in rows {
        // Index 0 is the reference with marginal effect zero.
        let mut scores = vec![0.0];
        scores.extend(row.iter().map(|pair| pair.1));
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
        orders.insert(order);
    }
    orders
}

/// Finds every sign change of `values` across `grid` and refines each
/// bracket by bisection on `f` down to [`SWITCH_TOLERANCE`].
fn locate_roots(
    grid: &[f64],
    values: &[f64],
    f: &mut impl FnMut(f64) -> Result<f64>,
) -> Result<Vec<f64>> {
    let mut roots = Vec::new();
    for i in 0..values.len().saturating_sub(1) {
        if values[i] == 0.0 {
            roots.push(grid[i]);
        } else if values[i] * values[i + 1] < 0.0 {
            roots.push(bisect_root(grid[i], grid[i + 1], values[i], f)?);
        }
    }
    if let Some(&last) = values.last() {
        if values.len() > 1 && last == 0.0 {
            roots.push(*grid.last().expect("grid and values have equal length"));
        }
    }
    Ok(roots)
}

fn bisect_root(
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    f: &mut impl FnMut(f64) -> Result<f64>,
) -> Result<f64> {
    while hi - lo > SWITCH_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Finds the population intercept at which the average event probability on
/// `treatment` equals `target`.
///
/// The average probability is strictly increasing in the intercept, so the
/// solution is unique; it is bracketed by geometric expansion and refined by
/// bisection until the probability is within
/// [`BASELINE_RISK_TOLERANCE`] of the target. Intercepts where the linear
/// predictor leaves the link's range (possible for the log and identity
/// links) are treated as lying beyond the solution on the side they exceed.
pub fn intercept_from_baseline_risk(
    model: &OutcomeModel,
    pop: &Population,
    treatment: &str,
    target: f64,
    scheme: &IntegrationScheme,
) -> Result<f64> {
    model.check_population(pop)?;
    if !target.is_finite() || target <= 0.0 || target >= 1.0 {
        return Err(Error::InvalidTargetProbability(target));
    }
    model.arm(treatment)?;

    let signed = |mu: f64| -> Result<f64> {
        let pop_mu = Population::new(mu, pop.covariates.clone())?;
        match average_probability(model, &pop_mu, treatment, scheme) {
            Ok(p) => Ok(p - target),
            Err(Error::LinkRange { eta, .. }) => Ok(if eta > 0.0 {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }),
            Err(e) => Err(e),
        }
    };

    let center = model.link().forward(target)?;
    let mut lo = center - 1.0;
    let mut hi = center + 1.0;
    let mut f_lo = signed(lo)?;
    let mut f_hi = signed(hi)?;
    let mut width = 1.0;
    for _ in 0..80 {
        if f_lo <= 0.0 && f_hi >= 0.0 {
            break;
        }
        width *= 2.0;
        if f_lo > 0.0 {
            hi = lo;
            f_hi = f_lo;
            lo -= width;
            f_lo = signed(lo)?;
        } else {
            lo = hi;
            f_lo = f_hi;
            hi += width;
            f_hi = signed(hi)?;
        }
    }
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::RootFinding(format!(
            "could not bracket an intercept reaching average probability {target}"
        )));
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = signed(mid)?;
        if f_mid.is_finite() && f_mid.abs() <= BASELINE_RISK_TOLERANCE {
            return Ok(mid);
        }
        if f_mid < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1.0) {
            break;
        }
    }
    Err(Error::RootFinding(format!(
        "average probability does not reach {target} within tolerance on this model"
    )))
}

/// Event probability and reference-contrast curves along the first
/// covariate axis, holding any other axes at the population mean.
///
/// Probabilities use the population's intercept. One curve is emitted per
/// arm, including the reference (whose contrast curve is identically zero).
pub fn probability_curves(
    model: &OutcomeModel,
    pop: &Population,
    points: usize,
) -> Result<ScenarioCurves> {
    model.check_population(pop)?;
    if points < 2 {
        return Err(Error::InvalidSweepGrid(
            "probability curves need at least two grid points".into(),
        ));
    }
    if pop.covariates.dim() == 0 {
        return Err(Error::InvalidSweepGrid(
            "probability curves need at least one covariate dimension".into(),
        ));
    }
    let (lo, hi) = pop.covariates.bounds()[0];
    let grid = linspace(lo, hi, points);
    let mean = pop.covariates.mean();
    let reference = model.reference().to_string();

    let mut arms = Vec::new();
    for arm in model.arms() {
        let contrast = model.contrast(&reference, arm.id())?;
        let mut probability = Vec::with_capacity(points);
        let mut log_or = Vec::with_capacity(points);
        let mut x = mean.clone();
        for &t in &grid {
            x[0] = t;
            probability.push(individual_probability(
                model,
                pop.intercept,
                arm.id(),
                &x,
            )?);
            log_or.push(contrast.eval(&x));
        }
        arms.push(ArmCurve {
            id: arm.id().to_string(),
            probability,
            log_or_vs_reference: log_or,
        });
    }
    Ok(ScenarioCurves { x: grid, arms })
}

/// Checks a shared-effect-modifier declaration and reports which pairwise
/// contrasts are covariate-free.
///
/// Every treatment in `shared` must carry identical interaction
/// coefficients, or the declaration is rejected. The report classifies all
/// pairs of the model by whether their individual-level contrast is
/// constant, and carries probability curves so crossings can be read off
/// directly: constant pairs cannot cross, the others can.
pub fn shared_em_scenario(
    model: &OutcomeModel,
    pop: &Population,
    shared: &[String],
) -> Result<SharedEmReport> {
    model.check_population(pop)?;
    if shared.len() < 2 {
        return Err(Error::InvalidModel(
            "a shared effect modifier set needs at least two treatments".into(),
        ));
    }
    let mut seen = BTreeSet::new();
    for id in shared {
        model.arm(id)?;
        if !seen.insert(id.as_str()) {
            return Err(Error::InvalidModel(format!(
                "treatment `{id}` appears twice in the shared set"
            )));
        }
    }
    let first = model.arm(&shared[0])?;
    for id in &shared[1..] {
        let arm = model.arm(id)?;
        if arm.interaction() != first.interaction() {
            return Err(Error::InvalidModel(format!(
                "treatments `{}` and `{id}` are declared to share effect modifiers \
                 but their interaction coefficients differ",
                shared[0]
            )));
        }
    }

    let ids: Vec<&str> = model.treatment_ids().collect();
    let mut constant_contrasts = Vec::new();
    let mut crossing_capable = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let contrast = model.contrast(ids[i], ids[j])?;
            if contrast.is_constant() {
                constant_contrasts.push(ConstantContrast {
                    a: ids[i].to_string(),
                    b: ids[j].to_string(),
                    log_or: contrast.effect(),
                });
            } else {
                crossing_capable.push(PairLabel {
                    a: ids[i].to_string(),
                    b: ids[j].to_string(),
                });
            }
        }
    }

    Ok(SharedEmReport {
        shared: shared.to_vec(),
        constant_contrasts,
        crossing_capable,
        curves: probability_curves(model, pop, SCENARIO_CURVE_POINTS)?,
    })
}

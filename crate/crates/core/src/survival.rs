//! Time-to-event estimands under a Weibull proportional-hazards model.
//!
//! Individual hazards are h_k(t | x) = ν t^(ν−1) exp(η_k(x)) with survival
//! S_k(t | x) = exp(−t^ν exp(η_k(x))). Proportional hazards holds at the
//! individual level by construction, but the population-average marginal
//! hazard ratio is time-varying as soon as covariates spread the linear
//! predictor, and marginal rank order can change over time when effect
//! modification is present. The conditional log hazard ratio, by contrast,
//! is a time-invariant average on the log-hazard scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{expect, expect_grid, IntegrationScheme};
use crate::link::LinkFunction;
use crate::model::{OutcomeModel, Population};

/// Bisection stops once a crossing is located to this width in time units.
pub const CROSSING_TIME_TOLERANCE: f64 = 1e-6;

/// Weibull proportional-hazards model: a shared shape parameter over an
/// outcome model whose coefficients live on the log-hazard scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeibullPHModel {
    shape: f64,
    model: OutcomeModel,
}

impl WeibullPHModel {
    /// The shape is shared across treatments, and the coefficient model must
    /// declare the log link so its scale is explicit.
    pub fn new(shape: f64, model: OutcomeModel) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(Error::InvalidModel(format!(
                "weibull shape must be positive and finite, got {shape}"
            )));
        }
        if model.link() != LinkFunction::Log {
            return Err(Error::InvalidModel(format!(
                "time-to-event coefficients live on the log-hazard scale and must declare the log link, got {}",
                model.link().name()
            )));
        }
        Ok(WeibullPHModel { shape, model })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn model(&self) -> &OutcomeModel {
        &self.model
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 {
            return Err(Error::InvalidTimeGrid(format!(
                "time must be non-negative and finite, got {t}"
            )));
        }
        Ok(())
    }

    /// S_k(t | x) with the model's own intercept.
    pub fn conditional_survival(&self, treatment: &str, x: &[f64], t: f64) -> Result<f64> {
        self.check_time(t)?;
        let eta = self.model.linear_predictor(treatment, x)?;
        Ok((-t.powf(self.shape) * eta.exp()).exp())
    }

    /// h_k(t | x) with the model's own intercept.
    pub fn conditional_hazard(&self, treatment: &str, x: &[f64], t: f64) -> Result<f64> {
        self.check_time(t)?;
        if t == 0.0 && self.shape < 1.0 {
            return Err(Error::HazardSingularity {
                shape: self.shape,
                time: t,
            });
        }
        let eta = self.model.linear_predictor(treatment, x)?;
        Ok(self.shape * t.powf(self.shape - 1.0) * eta.exp())
    }

    /// S̄_k(t): population average of individual survival probabilities.
    pub fn marginal_survival(
        &self,
        pop: &Population,
        treatment: &str,
        t: f64,
        scheme: &IntegrationScheme,
    ) -> Result<f64> {
        self.model.check_population(pop)?;
        self.check_time(t)?;
        let arm = self.model.arm(treatment)?;
        let w = t.powf(self.shape);
        expect(&pop.covariates, scheme, |x| {
            Ok((-w * self.model.eta(pop.intercept, arm, x).exp()).exp())
        })
    }

    /// h̄_k(t): survival-weighted population average of individual hazards,
    /// computed as E[S·h] / E[S] with both integrals sharing one node set.
    pub fn marginal_hazard(
        &self,
        pop: &Population,
        treatment: &str,
        t: f64,
        scheme: &IntegrationScheme,
    ) -> Result<f64> {
        self.model.check_population(pop)?;
        self.check_time(t)?;
        if t == 0.0 && self.shape < 1.0 {
            return Err(Error::HazardSingularity {
                shape: self.shape,
                time: t,
            });
        }
        let arm = self.model.arm(treatment)?;
        let w = t.powf(self.shape);
        let c = self.shape * t.powf(self.shape - 1.0);
        let parts = expect_grid(&pop.covariates, scheme, 2, |x, out| {
            let rate = self.model.eta(pop.intercept, arm, x).exp();
            let survival = (-w * rate).exp();
            out[0] = survival * c * rate;
            out[1] = survival;
            Ok(())
        })?;
        let hazard = parts[0] / parts[1];
        if !hazard.is_finite() {
            return Err(Error::HazardSingularity {
                shape: self.shape,
                time: t,
            });
        }
        Ok(hazard)
    }

    /// Δ_ab(t) = h̄_b(t) / h̄_a(t) over a time grid.
    pub fn marginal_hazard_ratio_curve(
        &self,
        pop: &Population,
        a: &str,
        b: &str,
        grid: &TimeGrid,
        scheme: &IntegrationScheme,
    ) -> Result<Vec<f64>> {
        let hazards = self.marginal_hazard_curves(pop, &[a, b], grid, scheme)?;
        Ok(hazards[1]
            .iter()
            .zip(&hazards[0])
            .map(|(hb, ha)| hb / ha)
            .collect())
    }

    /// d_ab on the log-hazard scale; time-invariant and intercept-free.
    pub fn conditional_log_hr(
        &self,
        pop: &Population,
        a: &str,
        b: &str,
        scheme: &IntegrationScheme,
    ) -> Result<f64> {
        self.model.check_population(pop)?;
        let contrast = self.model.contrast(a, b)?;
        expect(&pop.covariates, scheme, |x| Ok(contrast.eval(x)))
    }

    /// h̄ for several treatments over a grid in a single node pass.
    fn marginal_hazard_curves(
        &self,
        pop: &Population,
        treatments: &[&str],
        grid: &TimeGrid,
        scheme: &IntegrationScheme,
    ) -> Result<Vec<Vec<f64>>> {
        self.model.check_population(pop)?;
        let arms: Vec<_> = treatments
            .iter()
            .map(|id| self.model.arm(id))
            .collect::<Result<_>>()?;
        let times = grid.times();
        let n_t = times.len();
        let w: Vec<f64> = times.iter().map(|&t| t.powf(self.shape)).collect();
        let c: Vec<f64> = times
            .iter()
            .map(|&t| self.shape * t.powf(self.shape - 1.0))
            .collect();
        let columns = expect_grid(&pop.covariates, scheme, arms.len() * n_t * 2, |x, out| {
            for (k, arm) in arms.iter().enumerate() {
                let rate = self.model.eta(pop.intercept, arm, x).exp();
                for ti in 0..n_t {
                    let survival = (-w[ti] * rate).exp();
                    out[(k * n_t + ti) * 2] = survival * c[ti] * rate;
                    out[(k * n_t + ti) * 2 + 1] = survival;
                }
            }
            Ok(())
        })?;
        let mut curves = Vec::with_capacity(arms.len());
        for k in 0..arms.len() {
            let mut curve = Vec::with_capacity(n_t);
            for ti in 0..n_t {
                let hazard = columns[(k * n_t + ti) * 2] / columns[(k * n_t + ti) * 2 + 1];
                if !hazard.is_finite() {
                    return Err(Error::HazardSingularity {
                        shape: self.shape,
                        time: times[ti],
                    });
                }
                curve.push(hazard);
            }
            curves.push(curve);
        }
        Ok(curves)
    }

    /// Full survival analysis over a grid: marginal survival and hazard per
    /// treatment, hazard-ratio curves and conditional log HRs per pair, and
    /// bisection-refined times where the marginal hazard rank order changes.
    pub fn survival_grid(
        &self,
        pop: &Population,
        grid: &TimeGrid,
        scheme: &IntegrationScheme,
    ) -> Result<SurvivalGrid> {
        self.model.check_population(pop)?;
        let arms = self.model.arms();
        let k = arms.len();
        let times = grid.times();
        let n_t = times.len();

        let mut pair_ids = Vec::new();
        let mut contrasts = Vec::new();
        for i in 0..k {
            for j in (i + 1)..k {
                pair_ids.push((i, j));
                contrasts.push(self.model.contrast(arms[i].id(), arms[j].id())?);
            }
        }

        let w: Vec<f64> = times.iter().map(|&t| t.powf(self.shape)).collect();
        let c: Vec<f64> = times
            .iter()
            .map(|&t| self.shape * t.powf(self.shape - 1.0))
            .collect();
        let m = k * n_t * 2 + contrasts.len();
        let columns = expect_grid(&pop.covariates, scheme, m, |x, out| {
            for (a, arm) in arms.iter().enumerate() {
                let rate = self.model.eta(pop.intercept, arm, x).exp();
                for ti in 0..n_t {
                    let survival = (-w[ti] * rate).exp();
                    out[(a * n_t + ti) * 2] = survival * c[ti] * rate;
                    out[(a * n_t + ti) * 2 + 1] = survival;
                }
            }
            for (p, contrast) in contrasts.iter().enumerate() {
                out[k * n_t * 2 + p] = contrast.eval(x);
            }
            Ok(())
        })?;

        let mut survival = Vec::with_capacity(k);
        let mut hazard = Vec::with_capacity(k);
        for a in 0..k {
            let mut s_curve = Vec::with_capacity(n_t);
            let mut h_curve = Vec::with_capacity(n_t);
            for ti in 0..n_t {
                let sh = columns[(a * n_t + ti) * 2];
                let s = columns[(a * n_t + ti) * 2 + 1];
                let h = sh / s;
                if !h.is_finite() {
                    return Err(Error::HazardSingularity {
                        shape: self.shape,
                        time: times[ti],
                    });
                }
                s_curve.push(s);
                h_curve.push(h);
            }
            survival.push(s_curve);
            hazard.push(h_curve);
        }

        let arm_curves: Vec<SurvivalCurve> = (0..k)
            .map(|a| SurvivalCurve {
                id: arms[a].id().to_string(),
                marginal_survival: survival[a].clone(),
                marginal_hazard: hazard[a].clone(),
            })
            .collect();

        let pairs: Vec<HazardRatioCurve> = pair_ids
            .iter()
            .enumerate()
            .map(|(p, &(i, j))| HazardRatioCurve {
                a: arms[i].id().to_string(),
                b: arms[j].id().to_string(),
                marginal_hazard_ratio: (0..n_t).map(|ti| hazard[j][ti] / hazard[i][ti]).collect(),
                conditional_log_hr: columns[k * n_t * 2 + p],
            })
            .collect();

        let mut rank_crossings = Vec::new();
        for &(i, j) in &pair_ids {
            let diff: Vec<f64> = (0..n_t).map(|ti| hazard[i][ti] - hazard[j][ti]).collect();
            for bracket in sign_change_brackets(&diff, times) {
                let time = refine_crossing(bracket, |t| {
                    let h_i = self.marginal_hazard(pop, arms[i].id(), t, scheme)?;
                    let h_j = self.marginal_hazard(pop, arms[j].id(), t, scheme)?;
                    Ok(h_i - h_j)
                })?;
                rank_crossings.push(RankCrossing {
                    a: arms[i].id().to_string(),
                    b: arms[j].id().to_string(),
                    lower: bracket.lower,
                    upper: bracket.upper,
                    time,
                });
            }
        }

        Ok(SurvivalGrid {
            shape: self.shape,
            scheme: scheme.describe(),
            tolerance: scheme.tolerance(),
            reference: self.model.reference().to_string(),
            times: times.to_vec(),
            arms: arm_curves,
            pairs,
            rank_crossings,
        })
    }
}

/// Strictly increasing positive evaluation times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidTimeGrid(format!(
                "need at least 2 time points, got {}",
                times.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::InvalidTimeGrid(
                "every time point must be positive and finite".into(),
            ));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidTimeGrid(
                "time points must be strictly increasing".into(),
            ));
        }
        Ok(TimeGrid { times })
    }

    /// n points spaced evenly in log time, endpoints hit exactly.
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
            return Err(Error::InvalidTimeGrid(format!(
                "log spacing needs 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidTimeGrid(format!(
                "need at least 2 time points, got {n}"
            )));
        }
        let (log_lo, log_hi) = (lo.ln(), hi.ln());
        let mut times: Vec<f64> = (0..n)
            .map(|i| (log_lo + (log_hi - log_lo) * i as f64 / (n - 1) as f64).exp())
            .collect();
        times[0] = lo;
        times[n - 1] = hi;
        TimeGrid::new(times)
    }

    /// Default plotting range: 200 log-spaced points on [0.01, 3].
    pub fn default_plot() -> Self {
        TimeGrid::log_spaced(0.01, 3.0, 200).expect("valid constants")
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Marginal survival and hazard for one treatment over the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    pub id: String,
    pub marginal_survival: Vec<f64>,
    pub marginal_hazard: Vec<f64>,
}

/// Marginal hazard-ratio curve and the scalar conditional log HR for one
/// ordered treatment pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardRatioCurve {
    pub a: String,
    pub b: String,
    pub marginal_hazard_ratio: Vec<f64>,
    pub conditional_log_hr: f64,
}

/// A time at which two treatments' marginal hazards change rank order,
/// bracketed on the grid and refined by bisection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankCrossing {
    pub a: String,
    pub b: String,
    pub lower: f64,
    pub upper: f64,
    pub time: f64,
}

/// Complete time-to-event estimand set for a (model, population) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalGrid {
    pub shape: f64,
    pub scheme: String,
    pub tolerance: f64,
    pub reference: String,
    pub times: Vec<f64>,
    pub arms: Vec<SurvivalCurve>,
    pub pairs: Vec<HazardRatioCurve>,
    pub rank_crossings: Vec<RankCrossing>,
}

/// Consecutive grid points between which two curves swap order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingBracket {
    pub lower: f64,
    pub upper: f64,
}

/// Grid-resolution crossings between two hazard-ratio curves sampled on the
/// same grid: brackets where sign(b − c) flips. Points where the curves
/// touch exactly carry the previous sign forward.
pub fn detect_hr_crossings(b: &[f64], c: &[f64], grid: &TimeGrid) -> Result<Vec<CrossingBracket>> {
    if b.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "hazard ratio curve",
            expected: grid.len(),
            found: b.len(),
        });
    }
    if c.len() != grid.len() {
        return Err(Error::DimensionMismatch {
            what: "hazard ratio curve",
            expected: grid.len(),
            found: c.len(),
        });
    }
    let diff: Vec<f64> = b.iter().zip(c).map(|(bv, cv)| bv - cv).collect();
    Ok(sign_change_brackets(&diff, grid.times()))
}

fn sign_change_brackets(diff: &[f64], times: &[f64]) -> Vec<CrossingBracket> {
    let mut brackets = Vec::new();
    let mut previous: Option<(f64, bool)> = None;
    for (ti, &d) in diff.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        let positive = d > 0.0;
        if let Some((at, was_positive)) = previous {
            if was_positive != positive {
                brackets.push(CrossingBracket {
                    lower: at,
                    upper: times[ti],
                });
            }
        }
        previous = Some((times[ti], positive));
    }
    brackets
}

/// Bisects a sign change of `diff` inside the bracket down to
/// [`CROSSING_TIME_TOLERANCE`] and returns the midpoint.
pub fn refine_crossing<F>(bracket: CrossingBracket, mut diff: F) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = (bracket.lower, bracket.upper);
    let f_lo = diff(lo)?;
    let f_hi = diff(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if (f_lo > 0.0) == (f_hi > 0.0) {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]"
        )));
    }
    let lo_positive = f_lo > 0.0;
    while hi - lo > CROSSING_TIME_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        let f_mid = diff(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if (f_mid > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CovariateDistribution, Marginal, TreatmentArm};

    fn scenario(interaction_b: f64, interaction_c: f64) -> WeibullPHModel {
        let model = OutcomeModel::new(
            LinkFunction::Log,
            -1.0,
            vec![0.25_f64.ln()],
            vec![
                TreatmentArm::reference("A", 1),
                TreatmentArm::new("B", vec![interaction_b], 0.6_f64.ln()),
                TreatmentArm::new("C", vec![interaction_c], 0.5_f64.ln()),
            ],
        )
        .unwrap();
        WeibullPHModel::new(2.0, model).unwrap()
    }

    fn prognostic_only() -> WeibullPHModel {
        scenario(0.0, 0.0)
    }

    fn effect_modifying() -> WeibullPHModel {
        scenario(0.7_f64.ln(), 0.9_f64.ln())
    }

    fn uniform_pop() -> Population {
        Population::new(
            -1.0,
            CovariateDistribution::product(vec![Marginal::Uniform { lo: -1.0, hi: 1.0 }]).unwrap(),
        )
        .unwrap()
    }

    fn no_covariates(shape: f64, intercept: f64, effects: &[(&str, f64)]) -> WeibullPHModel {
        let mut arms = vec![TreatmentArm::reference("A", 0)];
        arms.extend(
            effects
                .iter()
                .map(|(id, g)| TreatmentArm::new(*id, vec![], *g)),
        );
        let model = OutcomeModel::new(LinkFunction::Log, intercept, vec![], arms).unwrap();
        WeibullPHModel::new(shape, model).unwrap()
    }

    fn point_pop(intercept: f64) -> Population {
        Population::new(intercept, CovariateDistribution::product(vec![]).unwrap()).unwrap()
    }

    fn scheme() -> IntegrationScheme {
        IntegrationScheme::gauss_legendre(64).unwrap()
    }

    #[test]
    fn conditional_survival_closed_forms() {
        let m = no_covariates(1.0, 0.0, &[("B", 0.6_f64.ln())]);
        assert_eq!(m.conditional_survival("B", &[], 0.0).unwrap(), 1.0);
        let s = m.conditional_survival("B", &[], 1.0).unwrap();
        assert!((s - 0.548_811_636_094_026_4).abs() < 1e-15, "{s}");

        let m = no_covariates(2.0, -1.0, &[]);
        let s = m.conditional_survival("A", &[], 1.0).unwrap();
        assert!((s - 0.692_200_627_555_346_4).abs() < 1e-15, "{s}");
    }

    #[test]
    fn hazard_closed_form_and_singularity() {
        let m = no_covariates(2.0, -1.0, &[]);
        let h = m.conditional_hazard("A", &[], 1.0).unwrap();
        assert!((h - 0.735_758_882_342_884_7).abs() < 1e-15, "{h}");
        assert_eq!(m.conditional_hazard("A", &[], 0.0).unwrap(), 0.0);

        let m = no_covariates(0.5, -1.0, &[]);
        assert!(matches!(
            m.conditional_hazard("A", &[], 0.0),
            Err(Error::HazardSingularity { .. })
        ));
        assert!(matches!(
            m.marginal_hazard(&point_pop(-1.0), "A", 0.0, &IntegrationScheme::exact_discrete()),
            Err(Error::HazardSingularity { .. })
        ));
        assert!(m.conditional_hazard("A", &[], -1.0).is_err());
    }

    #[test]
    fn marginal_reduces_to_conditional_without_covariates() {
        let m = no_covariates(2.0, -1.0, &[("B", 0.6_f64.ln())]);
        let pop = point_pop(-1.0);
        let s = IntegrationScheme::exact_discrete();
        let t = 1.3;
        let ms = m.marginal_survival(&pop, "B", t, &s).unwrap();
        let cs = m.conditional_survival("B", &[], t).unwrap();
        assert_eq!(ms, cs);
        let mh = m.marginal_hazard(&pop, "A", 1.0, &s).unwrap();
        assert!((mh - 0.735_758_882_342_884_7).abs() < 1e-15, "{mh}");
    }

    #[test]
    fn marginal_quantities_match_quadrature_references() {
        let pop = uniform_pop();
        let s = scheme();

        let m = prognostic_only();
        let sa = m.marginal_survival(&pop, "A", 1.0, &s).unwrap();
        let sb = m.marginal_survival(&pop, "B", 1.0, &s).unwrap();
        let sc = m.marginal_survival(&pop, "C", 2.0, &s).unwrap();
        assert!((sa - 0.647_271_468_801_085_4).abs() < 1e-11, "{sa}");
        assert!((sb - 0.759_683_114_682_931_8).abs() < 1e-11, "{sb}");
        assert!((sc - 0.460_838_745_333_171_02).abs() < 1e-11, "{sc}");

        let ha = m.marginal_hazard(&pop, "A", 1.0, &s).unwrap();
        let hb = m.marginal_hazard(&pop, "B", 1.0, &s).unwrap();
        let hc = m.marginal_hazard(&pop, "C", 0.5, &s).unwrap();
        assert!((ha - 0.760_669_986_845_091_1).abs() < 1e-11, "{ha}");
        assert!((hb - 0.505_852_376_976_489_9).abs() < 1e-11, "{hb}");
        assert!((hc - 0.240_137_178_384_623_97).abs() < 1e-11, "{hc}");

        let m = effect_modifying();
        let sb = m.marginal_survival(&pop, "B", 1.0, &s).unwrap();
        let sc = m.marginal_survival(&pop, "C", 1.0, &s).unwrap();
        assert!((sb - 0.737_530_911_459_225_1).abs() < 1e-11, "{sb}");
        assert!((sc - 0.786_909_943_357_281_7).abs() < 1e-11, "{sc}");
    }

    #[test]
    #[rustfmt::skip]
    fn hazard_ratio_curves_match_quadrature_references() {
        let pop = uniform_pop();
        let s = scheme();
        let grid = TimeGrid::new(vec![0.01, 1.0, 2.0, 3.0]).unwrap();

        let m = prognostic_only();
        let hr_b = m.marginal_hazard_ratio_curve(&pop, "A", "B", &grid, &s).unwrap();
        let hr_c = m.marginal_hazard_ratio_curve(&pop, "A", "C", &grid, &s).unwrap();
        let want_b = [0.600_006_820_255_714_8, 0.665_008_986_452_236_2,
                      0.748_804_970_879_990_9, 0.729_356_565_895_453_3];
        let want_c = [0.500_007_104_445_281_2, 0.569_233_470_581_715_1,
                      0.671_457_581_621_564, 0.656_468_948_844_746_7];
        for i in 0..4 {
            assert!((hr_b[i] - want_b[i]).abs() < 1e-11, "B[{i}] = {}", hr_b[i]);
            assert!((hr_c[i] - want_c[i]).abs() < 1e-11, "C[{i}] = {}", hr_c[i]);
        }

        let m = effect_modifying();
        let grid = TimeGrid::new(vec![0.01, 1.0, 3.0]).unwrap();
        let hr_b = m.marginal_hazard_ratio_curve(&pop, "A", "B", &grid, &s).unwrap();
        let hr_c = m.marginal_hazard_ratio_curve(&pop, "A", "C", &grid, &s).unwrap();
        let want_b = [0.704_918_346_118_078_5, 0.694_210_051_446_954_8, 0.597_735_223_662_708_3];
        let want_c = [0.522_860_824_509_204_2, 0.580_069_688_543_953_1, 0.619_957_985_156_533_2];
        for i in 0..3 {
            assert!((hr_b[i] - want_b[i]).abs() < 1e-11, "B[{i}] = {}", hr_b[i]);
            assert!((hr_c[i] - want_c[i]).abs() < 1e-11, "C[{i}] = {}", hr_c[i]);
        }
    }

    #[test]
    fn conditional_log_hr_is_time_free_and_hits_the_coefficients() {
        let pop = uniform_pop();
        let s = scheme();
        for m in [prognostic_only(), effect_modifying()] {
            let b = m.conditional_log_hr(&pop, "A", "B", &s).unwrap();
            let c = m.conditional_log_hr(&pop, "A", "C", &s).unwrap();
            assert!((b - 0.6_f64.ln()).abs() < 1e-14, "{b}");
            assert!((c - 0.5_f64.ln()).abs() < 1e-14, "{c}");
        }
        assert_eq!(
            prognostic_only()
                .conditional_log_hr(&pop, "B", "B", &scheme())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn covariate_free_hazard_ratio_is_constant() {
        let m = no_covariates(1.5, -0.5, &[("B", -0.4)]);
        let pop = point_pop(-0.5);
        let grid = TimeGrid::log_spaced(0.05, 4.0, 50).unwrap();
        let curve = m
            .marginal_hazard_ratio_curve(&pop, "A", "B", &grid, &IntegrationScheme::exact_discrete())
            .unwrap();
        let want = (-0.4_f64).exp();
        for v in curve {
            assert!((v - want).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn log_survival_slope_matches_marginal_hazard() {
        let m = prognostic_only();
        let pop = uniform_pop();
        let s = scheme();
        let dt = 1e-4;
        for t in [0.5, 1.0, 2.0] {
            let lo = m.marginal_survival(&pop, "B", t - dt, &s).unwrap().ln();
            let hi = m.marginal_survival(&pop, "B", t + dt, &s).unwrap().ln();
            let slope = (lo - hi) / (2.0 * dt);
            let hazard = m.marginal_hazard(&pop, "B", t, &s).unwrap();
            assert!(
                ((slope - hazard) / hazard).abs() < 1e-6,
                "t={t}: {slope} vs {hazard}"
            );
        }
    }

    #[test]
    fn grid_assembly_finds_the_rank_crossing_only_under_effect_modification() {
        let pop = uniform_pop();
        let s = scheme();
        let grid = TimeGrid::default_plot();

        let no_em = prognostic_only().survival_grid(&pop, &grid, &s).unwrap();
        assert!(no_em.rank_crossings.is_empty(), "{:?}", no_em.rank_crossings);
        let hr_b = &no_em.pairs[0].marginal_hazard_ratio;
        let spread = hr_b.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - hr_b.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread > 0.1, "marginal curve should be non-constant: {spread}");

        let em = effect_modifying().survival_grid(&pop, &grid, &s).unwrap();
        assert_eq!(em.rank_crossings.len(), 1, "{:?}", em.rank_crossings);
        let crossing = &em.rank_crossings[0];
        assert_eq!((crossing.a.as_str(), crossing.b.as_str()), ("B", "C"));
        assert!(
            (crossing.time - 2.017_575_117_197_155_6).abs() < 2e-6,
            "{}",
            crossing.time
        );
        assert!(crossing.lower < crossing.time && crossing.time < crossing.upper);

        for arm in &em.arms {
            for w in arm.marginal_survival.windows(2) {
                assert!(w[1] <= w[0] + 1e-10, "survival must not increase");
            }
        }
        assert_eq!(em.pairs.len(), 3);
        assert!((em.pairs[0].conditional_log_hr - 0.6_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn crossing_detection_on_synthetic_curves() {
        let grid = TimeGrid::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let flat = [0.5, 0.5, 0.5, 0.5];
        assert!(detect_hr_crossings(&flat, &flat, &grid).unwrap().is_empty());

        let falling = [0.7, 0.6, 0.45, 0.4];
        let brackets = detect_hr_crossings(&falling, &flat, &grid).unwrap();
        assert_eq!(
            brackets,
            vec![CrossingBracket {
                lower: 2.0,
                upper: 3.0
            }]
        );

        // A touch at exactly zero is not a crossing.
        let touching = [0.6, 0.5, 0.6, 0.7];
        assert!(detect_hr_crossings(&touching, &flat, &grid).unwrap().is_empty());

        let double = [0.6, 0.4, 0.6, 0.4];
        assert_eq!(detect_hr_crossings(&double, &flat, &grid).unwrap().len(), 3);

        assert!(detect_hr_crossings(&falling[..3], &flat, &grid).is_err());
    }

    #[test]
    fn bisection_refines_to_tolerance() {
        let bracket = CrossingBracket {
            lower: 1.0,
            upper: 3.0,
        };
        let root = refine_crossing(bracket, |t| Ok(t - 2.345)).unwrap();
        assert!((root - 2.345).abs() < CROSSING_TIME_TOLERANCE, "{root}");

        let err = refine_crossing(bracket, |t| Ok(t + 10.0)).unwrap_err();
        assert!(matches!(err, Error::RootFinding(_)));
    }

    #[test]
    fn construction_validation() {
        let logit = OutcomeModel::new(
            crate::link::LinkFunction::Logit,
            0.0,
            vec![],
            vec![TreatmentArm::reference("A", 0)],
        )
        .unwrap();
        assert!(matches!(
            WeibullPHModel::new(2.0, logit),
            Err(Error::InvalidModel(_))
        ));
        let log = OutcomeModel::new(
            LinkFunction::Log,
            0.0,
            vec![],
            vec![TreatmentArm::reference("A", 0)],
        )
        .unwrap();
        assert!(WeibullPHModel::new(0.0, log.clone()).is_err());
        assert!(WeibullPHModel::new(-1.0, log.clone()).is_err());
        assert!(WeibullPHModel::new(f64::NAN, log).is_err());
    }

    #[test]
    fn time_grid_validation() {
        assert!(TimeGrid::new(vec![1.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![2.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(TimeGrid::log_spaced(0.0, 1.0, 10).is_err());
        assert!(TimeGrid::log_spaced(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::log_spaced(0.1, 1.0, 1).is_err());

        let grid = TimeGrid::log_spaced(0.01, 3.0, 200).unwrap();
        assert_eq!(grid.len(), 200);
        assert_eq!(grid.times()[0], 0.01);
        assert_eq!(grid.times()[199], 3.0);
        assert_eq!(TimeGrid::default_plot(), grid);
    }
}

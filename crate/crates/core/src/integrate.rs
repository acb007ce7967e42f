//! Deterministic expectation engine over covariate distributions.
//!
//! Every scheme reduces to a fixed, ordered list of (node, weight) pairs;
//! integrand values are accumulated by pairwise summation in node order, so
//! results are bit-identical from run to run and independent of how callers
//! parallelize around this module.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariateDistribution, Marginal};
use crate::sobol::SobolSequence;

/// Default declared accuracy attached to schemes.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Default Gauss-Legendre node count per continuous dimension.
pub const DEFAULT_GAUSS_NODES: usize = 64;

/// Default Sobol point count (2¹⁴).
pub const DEFAULT_QMC_POINTS: usize = 1 << 14;

/// How an expectation over the covariate distribution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SchemeKind {
    /// Exact enumeration of a finite support (discrete dimensions only).
    ExactDiscrete,
    /// Tensor-product Gauss-Legendre over continuous dimensions; discrete
    /// dimensions are enumerated exactly.
    GaussLegendre { nodes: usize },
    /// Scrambled Sobol quasi-Monte Carlo with a power-of-two point count.
    QmcSobol { points: usize, scramble_seed: u64 },
    /// Equal-weight average over the rows of an empirical sample.
    EmpiricalMean,
}

/// A validated integration scheme plus its declared accuracy target.
///
/// The tolerance is metadata: it travels with every reported numeric so
/// downstream consumers know the accuracy the producer vouched for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationScheme {
    kind: SchemeKind,
    tolerance: f64,
}

impl IntegrationScheme {
    pub fn new(kind: SchemeKind, tolerance: f64) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance.is_finite()) {
            return Err(Error::InvalidScheme(format!(
                "tolerance must be positive and finite, got {tolerance}"
            )));
        }
        match kind {
            SchemeKind::GaussLegendre { nodes } if nodes < 2 => {
                return Err(Error::InvalidScheme(format!(
                    "gauss_legendre needs at least 2 nodes, got {nodes}"
                )));
            }
            SchemeKind::QmcSobol { points, .. } if points < 2 || !points.is_power_of_two() => {
                return Err(Error::InvalidScheme(format!(
                    "qmc_sobol needs a power-of-two point count of at least 2, got {points}"
                )));
            }
            SchemeKind::QmcSobol { points, .. } if points > (1 << 30) => {
                return Err(Error::InvalidScheme(format!(
                    "qmc_sobol supports at most 2^30 points, got {points}"
                )));
            }
            _ => {}
        }
        Ok(IntegrationScheme { kind, tolerance })
    }

    pub fn exact_discrete() -> Self {
        IntegrationScheme::new(SchemeKind::ExactDiscrete, DEFAULT_TOLERANCE).expect("valid")
    }

    pub fn gauss_legendre(nodes: usize) -> Result<Self> {
        IntegrationScheme::new(SchemeKind::GaussLegendre { nodes }, DEFAULT_TOLERANCE)
    }

    pub fn qmc_sobol(points: usize, scramble_seed: u64) -> Result<Self> {
        IntegrationScheme::new(
            SchemeKind::QmcSobol {
                points,
                scramble_seed,
            },
            DEFAULT_TOLERANCE,
        )
    }

    pub fn empirical_mean() -> Self {
        IntegrationScheme::new(SchemeKind::EmpiricalMean, DEFAULT_TOLERANCE).expect("valid")
    }

    /// Same scheme with a different declared tolerance.
    pub fn with_tolerance(self, tolerance: f64) -> Result<Self> {
        IntegrationScheme::new(self.kind, tolerance)
    }

    /// Sensible scheme for a distribution: exact enumeration when the support
    /// is finite, the empirical mean for samples, tensor Gauss-Legendre for
    /// up to two continuous dimensions, scrambled Sobol beyond that.
    pub fn default_for(dist: &CovariateDistribution) -> Self {
        match dist {
            CovariateDistribution::EmpiricalSample(_) => IntegrationScheme::empirical_mean(),
            CovariateDistribution::Product(marginals) => {
                if marginals.iter().all(Marginal::is_discrete) {
                    IntegrationScheme::exact_discrete()
                } else if marginals.iter().filter(|m| !m.is_discrete()).count() <= 2 {
                    IntegrationScheme::gauss_legendre(DEFAULT_GAUSS_NODES).expect("valid")
                } else {
                    IntegrationScheme::qmc_sobol(DEFAULT_QMC_POINTS, 0).expect("valid")
                }
            }
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// Human- and machine-readable scheme label, e.g. `gauss_legendre(64)`.
    pub fn describe(&self) -> String {
        match self.kind {
            SchemeKind::ExactDiscrete => "exact_discrete".into(),
            SchemeKind::GaussLegendre { nodes } => format!("gauss_legendre({nodes})"),
            SchemeKind::QmcSobol {
                points,
                scramble_seed,
            } => format!("qmc_sobol({points}, seed={scramble_seed})"),
            SchemeKind::EmpiricalMean => "empirical_mean".into(),
        }
    }
}

/// E[f(x)] over the covariate distribution.
pub fn expect<F>(dist: &CovariateDistribution, scheme: &IntegrationScheme, mut f: F) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let values = expect_grid(dist, scheme, 1, |x, out| {
        out[0] = f(x)?;
        Ok(())
    })?;
    Ok(values[0])
}

/// E[f_j(x)] for a family of m integrands sharing one pass over the nodes.
///
/// The callback fills `out[j]` with f_j(x) for the supplied node. Covariate
/// evaluations (nodes, weights, sampling) are computed once and shared across
/// the family, which is what makes grid-valued estimands (survival curves,
/// intercept sweeps) both cheap and mutually consistent.
pub fn expect_grid<F>(
    dist: &CovariateDistribution,
    scheme: &IntegrationScheme,
    m: usize,
    mut f: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    let nodes = nodes_and_weights(dist, scheme)?;
    let n = nodes.len();
    let mut columns = vec![vec![0.0; n]; m];
    let mut row = vec![0.0; m];
    for (i, (x, w)) in nodes.iter().enumerate() {
        f(x, &mut row)?;
        for j in 0..m {
            if !row[j].is_finite() {
                return Err(Error::NonFiniteIntegrand { at: x.clone() });
            }
            columns[j][i] = w * row[j];
        }
    }
    Ok(columns.iter().map(|col| pairwise_sum(col)).collect())
}

/// Pairwise (cascade) summation in index order: deterministic and with error
/// growth O(log n) instead of O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Fixed node list for a scheme over a distribution; weights sum to 1.
fn nodes_and_weights(
    dist: &CovariateDistribution,
    scheme: &IntegrationScheme,
) -> Result<Vec<(Vec<f64>, f64)>> {
    match (scheme.kind, dist) {
        (SchemeKind::EmpiricalMean, CovariateDistribution::EmpiricalSample(rows)) => {
            let w = 1.0 / rows.len() as f64;
            Ok(rows.iter().map(|r| (r.clone(), w)).collect())
        }
        (SchemeKind::EmpiricalMean, CovariateDistribution::Product(_)) => {
            Err(Error::SchemeMismatch {
                scheme: "empirical_mean",
                distribution: "independent marginals",
            })
        }
        (SchemeKind::ExactDiscrete, CovariateDistribution::Product(marginals)) => {
            let per_dim: Option<Vec<_>> = marginals.iter().map(Marginal::support).collect();
            let per_dim = per_dim.ok_or(Error::SchemeMismatch {
                scheme: "exact_discrete",
                distribution: "a continuous dimension",
            })?;
            Ok(tensor_product(&per_dim))
        }
        (SchemeKind::ExactDiscrete, CovariateDistribution::EmpiricalSample(_)) => {
            Err(Error::SchemeMismatch {
                scheme: "exact_discrete",
                distribution: "an empirical sample",
            })
        }
        (SchemeKind::GaussLegendre { nodes }, CovariateDistribution::Product(marginals)) => {
            let rule = gauss_legendre_rule(nodes);
            let per_dim: Vec<Vec<(f64, f64)>> = marginals
                .iter()
                .map(|marginal| match marginal.support() {
                    Some(points) => points,
                    None => {
                        let (lo, hi) = marginal.bounds();
                        rule.iter()
                            .map(|&(t, w)| (0.5 * (lo + hi) + 0.5 * (hi - lo) * t, 0.5 * w))
                            .collect()
                    }
                })
                .collect();
            Ok(tensor_product(&per_dim))
        }
        (SchemeKind::GaussLegendre { .. }, CovariateDistribution::EmpiricalSample(_)) => {
            Err(Error::SchemeMismatch {
                scheme: "gauss_legendre",
                distribution: "an empirical sample",
            })
        }
        (
            SchemeKind::QmcSobol {
                points,
                scramble_seed,
            },
            CovariateDistribution::Product(marginals),
        ) => {
            let dim = marginals.len().max(1);
            let mut seq = SobolSequence::new(dim, scramble_seed)?;
            let mut u = vec![0.0; dim];
            let w = 1.0 / points as f64;
            let mut out = Vec::with_capacity(points);
            for _ in 0..points {
                seq.next_point(&mut u);
                let x: Vec<f64> = marginals
                    .iter()
                    .enumerate()
                    .map(|(d, marginal)| marginal.inverse_cdf(u[d]))
                    .collect();
                out.push((x, w));
            }
            Ok(out)
        }
        (SchemeKind::QmcSobol { .. }, CovariateDistribution::EmpiricalSample(_)) => {
            Err(Error::SchemeMismatch {
                scheme: "qmc_sobol",
                distribution: "an empirical sample",
            })
        }
    }
}

/// Cartesian product of per-dimension (point, weight) lists, first dimension
/// slowest, with product weights.
fn tensor_product(per_dim: &[Vec<(f64, f64)>]) -> Vec<(Vec<f64>, f64)> {
    let mut nodes: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for dim_points in per_dim {
        let mut next = Vec::with_capacity(nodes.len() * dim_points.len());
        for (x, w) in &nodes {
            for &(v, wv) in dim_points {
                let mut xs = x.clone();
                xs.push(v);
                next.push((xs, w * wv));
            }
        }
        nodes = next;
    }
    nodes
}

/// Gauss-Legendre nodes and weights on [-1, 1], weights summing to 2.
///
/// Newton iteration on the Legendre recurrence; nodes match published tables
/// to ~1e-15 and the rule integrates polynomials of degree < 2n exactly.
pub(crate) fn gauss_legendre_rule(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 2, "validated at scheme construction");
    let mut rule = vec![(0.0, 0.0); n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi's initial guess for the i-th positive root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= 1e-15 * x.abs().max(1.0) {
                let (p2, d2) = legendre(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule[i] = (-x, w);
        rule[n - 1 - i] = (x, w);
    }
    if n % 2 == 1 {
        // The middle node is exactly zero by symmetry.
        let (_, d) = legendre(n, 0.0);
        rule[n / 2] = (0.0, 2.0 / (d * d));
    }
    rule
}

/// P_n(x) and its derivative via the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(lo: f64, hi: f64) -> CovariateDistribution {
        CovariateDistribution::product(vec![Marginal::Uniform { lo, hi }]).unwrap()
    }

    #[test]
    #[rustfmt::skip]
    fn gauss_legendre_nodes_match_published_tables() {
        let rule = gauss_legendre_rule(4);
        let nodes = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_26,
                     0.339_981_043_584_856_26, 0.861_136_311_594_052_6];
        let weights = [0.347_854_845_137_453_7, 0.652_145_154_862_546_2,
                       0.652_145_154_862_546_2, 0.347_854_845_137_453_7];
        for i in 0..4 {
            assert!((rule[i].0 - nodes[i]).abs() < 1e-15, "node {i}: {}", rule[i].0);
            assert!((rule[i].1 - weights[i]).abs() < 1e-15, "weight {i}: {}", rule[i].1);
        }
        let rule = gauss_legendre_rule(8);
        assert!((rule[0].0 + 0.960_289_856_497_536_2).abs() < 1e-15);
        assert!((rule[0].1 - 0.101_228_536_290_376_69).abs() < 1e-15);
        assert!((rule[3].0 + 0.183_434_642_495_649_78).abs() < 1e-15);
        assert!((rule[3].1 - 0.362_683_783_378_361_77).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_is_exact_for_low_degree_polynomials() {
        // n nodes integrate degree < 2n exactly: x^6 over U(-1, 1) with n = 4.
        let scheme = IntegrationScheme::gauss_legendre(4).unwrap();
        let got = expect(&uniform(-1.0, 1.0), &scheme, |x| Ok(x[0].powi(6))).unwrap();
        assert!((got - 1.0 / 7.0).abs() < 1e-15, "{got}");
        // Degree 2n is the first one with error.
        let got = expect(&uniform(-1.0, 1.0), &scheme, |x| Ok(x[0].powi(8))).unwrap();
        assert!((got - 1.0 / 9.0).abs() > 1e-9);
    }

    #[test]
    fn exact_discrete_enumerates_products() {
        let dist = CovariateDistribution::product(vec![
            Marginal::Bernoulli { prevalence: 0.25 },
            Marginal::FinitePoints {
                values: vec![-1.0, 2.0],
                weights: vec![0.5, 0.5],
            },
        ])
        .unwrap();
        let scheme = IntegrationScheme::exact_discrete();
        let got = expect(&dist, &scheme, |x| Ok(x[0] * x[1])).unwrap();
        // E[x0] * E[x1] = 0.25 * 0.5 by independence.
        assert!((got - 0.125).abs() < 1e-15);
    }

    #[test]
    fn scheme_distribution_mismatches_are_rejected() {
        let continuous = uniform(0.0, 1.0);
        let sample = CovariateDistribution::empirical(vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            expect(&continuous, &IntegrationScheme::exact_discrete(), |_| Ok(0.0)),
            Err(Error::SchemeMismatch { .. })
        ));
        assert!(matches!(
            expect(&continuous, &IntegrationScheme::empirical_mean(), |_| Ok(0.0)),
            Err(Error::SchemeMismatch { .. })
        ));
        assert!(matches!(
            expect(&sample, &IntegrationScheme::gauss_legendre(8).unwrap(), |_| Ok(0.0)),
            Err(Error::SchemeMismatch { .. })
        ));
        assert!(matches!(
            expect(&sample, &IntegrationScheme::qmc_sobol(16, 0).unwrap(), |_| Ok(0.0)),
            Err(Error::SchemeMismatch { .. })
        ));
    }

    #[test]
    fn non_finite_integrands_are_reported_with_location() {
        let scheme = IntegrationScheme::gauss_legendre(8).unwrap();
        let err = expect(&uniform(0.0, 1.0), &scheme, |x| Ok(1.0 / (x[0] - x[0]))).unwrap_err();
        assert!(matches!(err, Error::NonFiniteIntegrand { .. }));
    }

    #[test]
    fn scheme_validation() {
        assert!(IntegrationScheme::gauss_legendre(1).is_err());
        assert!(IntegrationScheme::qmc_sobol(100, 0).is_err());
        assert!(IntegrationScheme::qmc_sobol(128, 0).is_ok());
        assert!(IntegrationScheme::gauss_legendre(64)
            .unwrap()
            .with_tolerance(0.0)
            .is_err());
        assert!(IntegrationScheme::gauss_legendre(64)
            .unwrap()
            .with_tolerance(-1e-9)
            .is_err());
    }

    #[test]
    fn qmc_integrates_smooth_functions_to_qmc_accuracy() {
        let scheme = IntegrationScheme::qmc_sobol(1 << 14, 3).unwrap();
        let got = expect(&uniform(-1.0, 1.0), &scheme, |x| {
            Ok(crate::link::expit(-4.0 * x[0] - 4.0))
        })
        .unwrap();
        assert!((got - 0.086_601_471_773_381_19).abs() < 1e-4, "{got}");
    }

    #[test]
    fn empirical_mean_averages_rows() {
        let sample =
            CovariateDistribution::empirical(vec![vec![1.0], vec![2.0], vec![4.0]]).unwrap();
        let got = expect(&sample, &IntegrationScheme::empirical_mean(), |x| Ok(x[0])).unwrap();
        assert!((got - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn expect_grid_shares_nodes_across_the_family() {
        let scheme = IntegrationScheme::gauss_legendre(16).unwrap();
        let grid = expect_grid(&uniform(-1.0, 1.0), &scheme, 3, |x, out| {
            out[0] = 1.0;
            out[1] = x[0];
            out[2] = x[0] * x[0];
            Ok(())
        })
        .unwrap();
        assert!((grid[0] - 1.0).abs() < 1e-15);
        assert!(grid[1].abs() < 1e-16);
        assert!((grid[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pairwise_sum_handles_sizes_around_the_leaf_cutoff() {
        for n in [0usize, 1, 31, 32, 33, 64, 100, 1000] {
            let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
            let expected = (n as f64 - 1.0) * n as f64 / 2.0;
            let got = pairwise_sum(&xs);
            assert_eq!(got, expected.max(0.0), "n={n}");
        }
    }

    #[test]
    fn refinement_differences_shrink_monotonically_past_eight_nodes() {
        // Corpus chosen with complex poles near but off the interval so the
        // doubling differences stay above the f64 noise floor through n = 64.
        let integrands: Vec<Box<dyn Fn(f64) -> f64>> = vec![
            Box::new(|x| 1.0 / (1.02 + x)),
            Box::new(|x| crate::link::expit(-6.0 * x - 1.0)),
            Box::new(|x| (1.05 - x).sqrt()),
        ];
        let dist = uniform(-1.0, 1.0);
        for (i, f) in integrands.iter().enumerate() {
            let at = |n: usize| {
                let scheme = IntegrationScheme::gauss_legendre(n).unwrap();
                expect(&dist, &scheme, |x| Ok(f(x[0]))).unwrap()
            };
            let (v8, v16, v32, v64) = (at(8), at(16), at(32), at(64));
            let d1 = (v16 - v8).abs();
            let d2 = (v32 - v16).abs();
            let d3 = (v64 - v32).abs();
            assert!(d1 > d2 && d2 > d3, "integrand {i}: {d1:e} {d2:e} {d3:e}");
        }
    }
}

//! JSON analysis configuration: schema types, semantic validation with
//! config-path error reporting, and construction of core model objects.

use std::collections::BTreeMap;
use std::path::Path;

use estimand_core::contingency::{Cell, ContingencyTable, Subgroup, ZeroCellPolicy};
use estimand_core::integrate::{DEFAULT_GAUSS_NODES, DEFAULT_QMC_POINTS};
use estimand_core::oracle::OracleConfig;
use estimand_core::survival::TimeGrid;
use estimand_core::{
    CovariateDistribution, Direction, IntegrationScheme, LinkFunction, Marginal, OutcomeModel,
    Population, TreatmentArm,
};
use serde::Deserialize;

use crate::errors::CliError;

/// Top-level analysis configuration.
///
/// `model` and `population` are required by every analysis except
/// `contingency`, which works on counts alone. Exactly one analysis selector
/// must be present.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub population: Option<PopulationConfig>,
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub scheme: Option<SchemeConfig>,
    #[serde(default)]
    pub out_dir: Option<String>,
}

/// Generative outcome model: link, shared coefficients, and per-treatment
/// effect and interaction coefficients keyed by treatment id.
///
/// The first treatment is the reference arm; treatments absent from
/// `effects` or `interactions` get zero coefficients.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub link: LinkFunction,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub prognostic: Vec<f64>,
    pub treatments: Vec<String>,
    #[serde(default)]
    pub effects: BTreeMap<String, f64>,
    #[serde(default)]
    pub interactions: BTreeMap<String, Vec<f64>>,
}

/// Target population: intercept plus covariate distribution.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    #[serde(default)]
    pub intercept: f64,
    pub covariates: CovariatesConfig,
}

/// Covariate distribution: independent marginals or an empirical sample.
/// Exactly one of the two forms must be given.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariatesConfig {
    #[serde(default)]
    pub product: Option<Vec<MarginalConfig>>,
    #[serde(default)]
    pub empirical: Option<Vec<Vec<f64>>>,
}

/// One covariate dimension's marginal distribution.
#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MarginalConfig {
    Uniform {
        lo: f64,
        hi: f64,
    },
    Bernoulli {
        prevalence: f64,
    },
    /// Finite support; omitted weights mean equal weights.
    FinitePoints {
        values: Vec<f64>,
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
}

/// The analysis to run. Exactly one selector must be present, and the CLI
/// verb must name it.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default)]
    pub report: Option<ReportAnalysis>,
    #[serde(default)]
    pub sweep: Option<SweepAnalysis>,
    #[serde(default)]
    pub survival: Option<SurvivalAnalysis>,
    #[serde(default)]
    pub contingency: Option<ContingencyAnalysis>,
    #[serde(default)]
    pub conflict: Option<ConflictAnalysis>,
    #[serde(default)]
    pub oracle: Option<OracleAnalysis>,
}

/// Selector names in the order they appear in [`AnalysisSection`].
pub const SELECTOR_NAMES: [&str; 6] = [
    "report",
    "sweep",
    "survival",
    "contingency",
    "conflict",
    "oracle",
];

/// Full estimand report options.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportAnalysis {
    #[serde(default)]
    pub direction: Option<DirectionConfig>,
    /// Calibrate the population intercept so this treatment's average event
    /// probability hits the target before reporting.
    #[serde(default)]
    pub baseline_risk: Option<BaselineRiskConfig>,
    /// Treatments declared to share effect-modifier coefficients; checked
    /// and reported with constant-contrast classification.
    #[serde(default)]
    pub shared_effect_modifiers: Option<Vec<String>>,
    /// Population intercepts for probability-curve families keyed by
    /// baseline risk.
    #[serde(default)]
    pub intercept_variants: Option<Vec<f64>>,
    /// Per-treatment polynomial value functions, ascending degree.
    #[serde(default)]
    pub net_benefit: Option<BTreeMap<String, Vec<f64>>>,
}

/// Intercept calibration target.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineRiskConfig {
    pub treatment: String,
    pub probability: f64,
}

/// Baseline-risk sweep options.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAnalysis {
    /// Explicit intercept grid; omitted means the auto-widening default.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    /// Comparator arms; omitted means every non-reference arm.
    #[serde(default)]
    pub arms: Option<Vec<String>>,
}

/// Evenly spaced grid specification.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// Time-to-event analysis options.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurvivalAnalysis {
    pub shape: f64,
    /// Evaluation times; omitted means 200 log-spaced points on [0.01, 3].
    #[serde(default)]
    pub times: Option<TimeGridConfig>,
    /// Weibull shapes for hazard-ratio curve families.
    #[serde(default)]
    pub shape_variants: Option<Vec<f64>>,
    /// Population intercepts for hazard-ratio curve families.
    #[serde(default)]
    pub intercept_variants: Option<Vec<f64>>,
}

/// Time grid specification.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

/// Contingency-table analysis, from inline counts or CSV files.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContingencyAnalysis {
    #[serde(default)]
    pub direction: Option<DirectionConfig>,
    #[serde(default)]
    pub zero_cells: Option<ZeroCellPolicy>,
    #[serde(default)]
    pub subgroups: Option<Vec<SubgroupConfig>>,
    #[serde(default)]
    pub treatments: Option<Vec<String>>,
    /// Cell counts keyed by treatment id, then subgroup label.
    #[serde(default)]
    pub counts: Option<BTreeMap<String, BTreeMap<String, CellConfig>>>,
    /// CSV with columns treatment,subgroup,events,non_events; row order
    /// fixes the treatment order. Relative to the config file's directory.
    #[serde(default)]
    pub counts_csv: Option<String>,
    /// CSV with columns subgroup,prevalence; row order fixes the subgroup
    /// order. Relative to the config file's directory.
    #[serde(default)]
    pub prevalence_csv: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubgroupConfig {
    pub label: String,
    pub prevalence: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub events: u64,
    pub non_events: u64,
}

/// Rank-conflict analysis options.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConflictAnalysis {
    #[serde(default)]
    pub direction: Option<DirectionConfig>,
    /// Comparison set; omitted means every treatment.
    #[serde(default)]
    pub treatments: Option<Vec<String>>,
}

/// Monte Carlo oracle options.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleAnalysis {
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default)]
    pub bernoulli_outcomes: bool,
    /// Treatments to estimate; omitted means every arm.
    #[serde(default)]
    pub treatments: Option<Vec<String>>,
    /// When present, the oracle checks survival curves instead of binary
    /// estimands.
    #[serde(default)]
    pub survival: Option<OracleSurvivalConfig>,
}

fn default_draws() -> usize {
    1_000_000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSurvivalConfig {
    pub shape: f64,
    #[serde(default)]
    pub times: Option<TimeGridConfig>,
}

/// Which direction counts as better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionConfig {
    Lower,
    Higher,
}

impl From<DirectionConfig> for Direction {
    fn from(d: DirectionConfig) -> Direction {
        match d {
            DirectionConfig::Lower => Direction::LowerIsBetter,
            DirectionConfig::Higher => Direction::HigherIsBetter,
        }
    }
}

/// Integration scheme selection.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub name: SchemeName,
    #[serde(default)]
    pub nodes: Option<usize>,
    #[serde(default)]
    pub points: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    #[value(name = "exact_discrete")]
    ExactDiscrete,
    #[value(name = "gauss_legendre")]
    GaussLegendre,
    #[value(name = "qmc_sobol")]
    QmcSobol,
    #[value(name = "empirical_mean")]
    EmpiricalMean,
}

/// Command-line overrides applied on top of the config's scheme block.
#[derive(Debug, Default, Clone, Copy)]
pub struct SchemeOverrides {
    pub name: Option<SchemeName>,
    pub nodes: Option<usize>,
    pub seed: Option<u64>,
}

impl AnalysisConfig {
    /// Parses config bytes, rejecting unknown fields.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CliError> {
        let config: AnalysisConfig = serde_json::from_slice(bytes)
            .map_err(|e| CliError::config_file(format!("invalid config: {e}")))?;
        config.analysis.selector()?;
        config.validate_treatment_references()?;
        Ok(config)
    }

    /// The built outcome model, or an error naming the missing section.
    pub fn require_model(&self) -> Result<OutcomeModel, CliError> {
        match &self.model {
            Some(model) => model.build(),
            None => Err(CliError::config(
                "model",
                "this analysis needs a model section",
            )),
        }
    }

    /// The built population, or an error naming the missing section.
    pub fn require_population(&self) -> Result<Population, CliError> {
        match &self.population {
            Some(population) => population.build(),
            None => Err(CliError::config(
                "population",
                "this analysis needs a population section",
            )),
        }
    }

    /// Checks that every treatment referenced by the analysis options is
    /// defined in the model's treatment list.
    fn validate_treatment_references(&self) -> Result<(), CliError> {
        let defined: Vec<&str> = match &self.model {
            Some(model) => model.treatments.iter().map(String::as_str).collect(),
            None => return Ok(()),
        };
        let check = |id: &str, path: &str| -> Result<(), CliError> {
            if defined.contains(&id) {
                Ok(())
            } else {
                Err(CliError::config(
                    path,
                    format!("undefined treatment `{id}`"),
                ))
            }
        };
        if let Some(report) = &self.analysis.report {
            if let Some(br) = &report.baseline_risk {
                check(&br.treatment, "analysis.report.baseline_risk.treatment")?;
            }
            if let Some(shared) = &report.shared_effect_modifiers {
                for id in shared {
                    check(id, "analysis.report.shared_effect_modifiers")?;
                }
            }
            if let Some(values) = &report.net_benefit {
                for id in values.keys() {
                    check(id, "analysis.report.net_benefit")?;
                }
            }
        }
        if let Some(sweep) = &self.analysis.sweep {
            if let Some(arms) = &sweep.arms {
                for id in arms {
                    check(id, "analysis.sweep.arms")?;
                }
            }
        }
        if let Some(conflict) = &self.analysis.conflict {
            if let Some(treatments) = &conflict.treatments {
                for id in treatments {
                    check(id, "analysis.conflict.treatments")?;
                }
            }
        }
        if let Some(oracle) = &self.analysis.oracle {
            if let Some(treatments) = &oracle.treatments {
                for id in treatments {
                    check(id, "analysis.oracle.treatments")?;
                }
            }
        }
        Ok(())
    }
}

impl AnalysisSection {
    /// The single declared selector name, or an error when zero or several
    /// are present.
    pub fn selector(&self) -> Result<&'static str, CliError> {
        let present: Vec<&'static str> = [
            self.report.is_some(),
            self.sweep.is_some(),
            self.survival.is_some(),
            self.contingency.is_some(),
            self.conflict.is_some(),
            self.oracle.is_some(),
        ]
        .iter()
        .zip(SELECTOR_NAMES)
        .filter_map(|(&found, name)| found.then_some(name))
        .collect();
        match present.as_slice() {
            [single] => Ok(single),
            [] => Err(CliError::config(
                "analysis",
                "exactly one analysis selector is required, found none",
            )),
            several => Err(CliError::config(
                "analysis",
                format!(
                    "exactly one analysis selector is required, found {}: {}",
                    several.len(),
                    several.join(", ")
                ),
            )),
        }
    }
}

impl ModelConfig {
    /// Validates the treatment-keyed coefficient maps and assembles the
    /// outcome model.
    pub fn build(&self) -> Result<OutcomeModel, CliError> {
        if self.treatments.is_empty() {
            return Err(CliError::config(
                "model.treatments",
                "at least one treatment (the reference) is required",
            ));
        }
        let dim = self.prognostic.len();
        let reference = &self.treatments[0];
        for id in self.effects.keys() {
            if !self.treatments.contains(id) {
                return Err(CliError::config(
                    "model.effects",
                    format!("undefined treatment `{id}`"),
                ));
            }
        }
        for (id, coeffs) in &self.interactions {
            if !self.treatments.contains(id) {
                return Err(CliError::config(
                    "model.interactions",
                    format!("undefined treatment `{id}`"),
                ));
            }
            if coeffs.len() != dim {
                return Err(CliError::config(
                    format!("model.interactions.{id}"),
                    format!(
                        "expected {dim} coefficients to match the prognostic vector, got {}",
                        coeffs.len()
                    ),
                ));
            }
        }
        if self.effects.get(reference).is_some_and(|&e| e != 0.0) {
            return Err(CliError::config(
                "model.effects",
                format!("reference treatment `{reference}` must have a zero effect"),
            ));
        }
        if self
            .interactions
            .get(reference)
            .is_some_and(|coeffs| coeffs.iter().any(|&c| c != 0.0))
        {
            return Err(CliError::config(
                "model.interactions",
                format!("reference treatment `{reference}` must have zero interactions"),
            ));
        }

        let arms: Vec<TreatmentArm> = self
            .treatments
            .iter()
            .enumerate()
            .map(|(i, id)| {
                if i == 0 {
                    TreatmentArm::reference(id.clone(), dim)
                } else {
                    let effect = self.effects.get(id).copied().unwrap_or(0.0);
                    let interaction = self
                        .interactions
                        .get(id)
                        .cloned()
                        .unwrap_or_else(|| vec![0.0; dim]);
                    TreatmentArm::new(id.clone(), interaction, effect)
                }
            })
            .collect();
        OutcomeModel::new(self.link, self.intercept, self.prognostic.clone(), arms)
            .map_err(|e| CliError::config("model", e.to_string()))
    }
}

impl PopulationConfig {
    pub fn build(&self) -> Result<Population, CliError> {
        let covariates = self.covariates.build()?;
        Population::new(self.intercept, covariates)
            .map_err(|e| CliError::config("population", e.to_string()))
    }
}

impl CovariatesConfig {
    pub fn build(&self) -> Result<CovariateDistribution, CliError> {
        match (&self.product, &self.empirical) {
            (Some(marginals), None) => {
                let marginals = marginals
                    .iter()
                    .map(MarginalConfig::build)
                    .collect::<Result<Vec<_>, _>>()?;
                CovariateDistribution::product(marginals)
                    .map_err(|e| CliError::config("population.covariates.product", e.to_string()))
            }
            (None, Some(rows)) => CovariateDistribution::empirical(rows.clone())
                .map_err(|e| CliError::config("population.covariates.empirical", e.to_string())),
            _ => Err(CliError::config(
                "population.covariates",
                "exactly one of `product` or `empirical` is required",
            )),
        }
    }
}

impl MarginalConfig {
    fn build(&self) -> Result<Marginal, CliError> {
        match self {
            MarginalConfig::Uniform { lo, hi } => Ok(Marginal::Uniform { lo: *lo, hi: *hi }),
            MarginalConfig::Bernoulli { prevalence } => Ok(Marginal::Bernoulli {
                prevalence: *prevalence,
            }),
            MarginalConfig::FinitePoints { values, weights } => {
                let weights = match weights {
                    Some(weights) => weights.clone(),
                    None => equal_weights(values.len()),
                };
                Ok(Marginal::FinitePoints {
                    values: values.clone(),
                    weights,
                })
            }
        }
    }
}

/// n equal weights whose left-to-right float sum is exactly one.
fn equal_weights(n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let w = 1.0 / n as f64;
    let mut weights = vec![w; n - 1];
    let partial: f64 = weights.iter().sum();
    weights.push(1.0 - partial);
    weights
}

impl GridConfig {
    pub fn build(&self, path: &str) -> Result<Vec<f64>, CliError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(CliError::config(
                path,
                format!(
                    "grid bounds must be finite with lo < hi, got [{}, {}]",
                    self.lo, self.hi
                ),
            ));
        }
        if self.points < 2 {
            return Err(CliError::config(
                path,
                format!("a grid needs at least 2 points, got {}", self.points),
            ));
        }
        Ok(linspace(self.lo, self.hi, self.points))
    }
}

impl TimeGridConfig {
    pub fn build(&self, path: &str) -> Result<TimeGrid, CliError> {
        let grid = match self.spacing {
            Spacing::Log => TimeGrid::log_spaced(self.lo, self.hi, self.points),
            Spacing::Linear => {
                if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
                    return Err(CliError::config(
                        path,
                        format!(
                            "time bounds must be finite with lo < hi, got [{}, {}]",
                            self.lo, self.hi
                        ),
                    ));
                }
                if self.points < 2 {
                    return Err(CliError::config(
                        path,
                        format!("a time grid needs at least 2 points, got {}", self.points),
                    ));
                }
                TimeGrid::new(linspace(self.lo, self.hi, self.points))
            }
        };
        grid.map_err(|e| CliError::config(path, e.to_string()))
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

impl OracleAnalysis {
    pub fn oracle_config(&self, seed_override: Option<u64>) -> OracleConfig {
        OracleConfig {
            draws: self.draws,
            seed: seed_override.unwrap_or(self.seed),
            antithetic: self.antithetic,
            bernoulli_outcomes: self.bernoulli_outcomes,
        }
    }
}

impl ContingencyAnalysis {
    /// Assembles the contingency table from inline counts or the referenced
    /// CSV files; `base` is the config file's directory.
    pub fn build_table(&self, base: &Path) -> Result<ContingencyTable, CliError> {
        let inline = self.subgroups.is_some() || self.treatments.is_some() || self.counts.is_some();
        let from_csv = self.counts_csv.is_some() || self.prevalence_csv.is_some();
        let table = match (inline, from_csv) {
            (true, false) => self.build_inline()?,
            (false, true) => self.build_from_csv(base)?,
            _ => {
                return Err(CliError::config(
                    "analysis.contingency",
                    "provide either inline subgroups/treatments/counts or counts_csv with prevalence_csv",
                ));
            }
        };
        Ok(table.with_zero_cell_policy(self.zero_cells.unwrap_or_default()))
    }

    fn build_inline(&self) -> Result<ContingencyTable, CliError> {
        let subgroups = self.subgroups.as_ref().ok_or_else(|| {
            CliError::config("analysis.contingency.subgroups", "missing subgroup list")
        })?;
        let treatments = self.treatments.as_ref().ok_or_else(|| {
            CliError::config("analysis.contingency.treatments", "missing treatment list")
        })?;
        let counts = self.counts.as_ref().ok_or_else(|| {
            CliError::config("analysis.contingency.counts", "missing cell counts")
        })?;

        for id in counts.keys() {
            if !treatments.contains(id) {
                return Err(CliError::config(
                    "analysis.contingency.counts",
                    format!("undefined treatment `{id}`"),
                ));
            }
        }
        let labels: Vec<&str> = subgroups.iter().map(|s| s.label.as_str()).collect();
        let mut rows = Vec::with_capacity(treatments.len());
        for id in treatments {
            let row = counts.get(id).ok_or_else(|| {
                CliError::config(
                    "analysis.contingency.counts",
                    format!("no counts for treatment `{id}`"),
                )
            })?;
            for label in row.keys() {
                if !labels.contains(&label.as_str()) {
                    return Err(CliError::config(
                        format!("analysis.contingency.counts.{id}"),
                        format!("undefined subgroup `{label}`"),
                    ));
                }
            }
            let cells = labels
                .iter()
                .map(|label| {
                    row.get(*label)
                        .map(|cell| Cell {
                            events: cell.events,
                            non_events: cell.non_events,
                        })
                        .ok_or_else(|| {
                            CliError::config(
                                format!("analysis.contingency.counts.{id}"),
                                format!("no cell for subgroup `{label}`"),
                            )
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(cells);
        }
        let subgroups = subgroups
            .iter()
            .map(|s| Subgroup::new(s.label.clone(), s.prevalence))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::config("analysis.contingency.subgroups", e.to_string()))?;
        ContingencyTable::new(subgroups, treatments.clone(), rows)
            .map_err(|e| CliError::config("analysis.contingency", e.to_string()))
    }

    fn build_from_csv(&self, base: &Path) -> Result<ContingencyTable, CliError> {
        let counts_name = self.counts_csv.as_ref().ok_or_else(|| {
            CliError::config("analysis.contingency.counts_csv", "missing counts CSV path")
        })?;
        let prevalence_name = self.prevalence_csv.as_ref().ok_or_else(|| {
            CliError::config(
                "analysis.contingency.prevalence_csv",
                "missing prevalence CSV path",
            )
        })?;

        let prevalence_path = base.join(prevalence_name);
        let subgroups = read_prevalence_csv(&prevalence_path)?;
        let labels: Vec<String> = subgroups.iter().map(|s| s.label().to_string()).collect();

        let counts_path = base.join(counts_name);
        let (treatments, cells) = read_counts_csv(&counts_path, &labels)?;
        ContingencyTable::new(subgroups, treatments, cells)
            .map_err(|e| CliError::config("analysis.contingency", e.to_string()))
    }
}

#[derive(Debug, Deserialize)]
struct PrevalenceRow {
    subgroup: String,
    prevalence: f64,
}

#[derive(Debug, Deserialize)]
struct CountRow {
    treatment: String,
    subgroup: String,
    events: u64,
    non_events: u64,
}

fn read_prevalence_csv(path: &Path) -> Result<Vec<Subgroup>, CliError> {
    let fail = |message: String| {
        CliError::config(
            "analysis.contingency.prevalence_csv",
            format!("{}: {message}", path.display()),
        )
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut subgroups = Vec::new();
    for (i, record) in reader.deserialize::<PrevalenceRow>().enumerate() {
        let row = record.map_err(|e| fail(format!("row {}: {e}", i + 2)))?;
        let subgroup = Subgroup::new(row.subgroup, row.prevalence)
            .map_err(|e| fail(format!("row {}: {e}", i + 2)))?;
        subgroups.push(subgroup);
    }
    if subgroups.is_empty() {
        return Err(fail("no subgroup rows".into()));
    }
    Ok(subgroups)
}

fn read_counts_csv(
    path: &Path,
    labels: &[String],
) -> Result<(Vec<String>, Vec<Vec<Cell>>), CliError> {
    let fail = |message: String| {
        CliError::config(
            "analysis.contingency.counts_csv",
            format!("{}: {message}", path.display()),
        )
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut treatments: Vec<String> = Vec::new();
    let mut cells: Vec<Vec<Option<Cell>>> = Vec::new();
    for (i, record) in reader.deserialize::<CountRow>().enumerate() {
        let row = record.map_err(|e| fail(format!("row {}: {e}", i + 2)))?;
        let s = labels
            .iter()
            .position(|label| *label == row.subgroup)
            .ok_or_else(|| {
                fail(format!(
                    "row {}: subgroup `{}` is not in the prevalence table",
                    i + 2,
                    row.subgroup
                ))
            })?;
        let t = match treatments.iter().position(|id| *id == row.treatment) {
            Some(t) => t,
            None => {
                treatments.push(row.treatment.clone());
                cells.push(vec![None; labels.len()]);
                treatments.len() - 1
            }
        };
        if cells[t][s].is_some() {
            return Err(fail(format!(
                "row {}: duplicate cell for treatment `{}` in subgroup `{}`",
                i + 2,
                row.treatment,
                row.subgroup
            )));
        }
        cells[t][s] = Some(Cell {
            events: row.events,
            non_events: row.non_events,
        });
    }
    if treatments.is_empty() {
        return Err(fail("no count rows".into()));
    }
    let rows = treatments
        .iter()
        .zip(&cells)
        .map(|(id, row)| {
            row.iter()
                .zip(labels)
                .map(|(cell, label)| {
                    cell.ok_or_else(|| {
                        fail(format!(
                            "no cell for treatment `{id}` in subgroup `{label}`"
                        ))
                    })
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((treatments, rows))
}

/// Resolves the effective integration scheme from the config block, the
/// command-line overrides, and the distribution's default.
pub fn resolve_scheme(
    config: Option<&SchemeConfig>,
    overrides: SchemeOverrides,
    dist: &CovariateDistribution,
) -> Result<IntegrationScheme, CliError> {
    let default = IntegrationScheme::default_for(dist);
    let name = overrides.name.or(config.map(|c| c.name));
    let nodes = overrides.nodes.or(config.and_then(|c| c.nodes));
    let points = overrides.nodes.or(config.and_then(|c| c.points));
    let seed = overrides.seed.or(config.and_then(|c| c.seed));

    let scheme = match name {
        None => {
            if overrides.nodes.is_some() {
                return Err(CliError::Usage(
                    "--nodes needs an explicit --scheme of gauss_legendre or qmc_sobol".into(),
                ));
            }
            default
        }
        Some(SchemeName::ExactDiscrete) => {
            reject_scheme_params("exact_discrete", nodes, points, seed)?;
            IntegrationScheme::exact_discrete()
        }
        Some(SchemeName::EmpiricalMean) => {
            reject_scheme_params("empirical_mean", nodes, points, seed)?;
            IntegrationScheme::empirical_mean()
        }
        Some(SchemeName::GaussLegendre) => {
            if seed.is_some() {
                return Err(CliError::config(
                    "scheme",
                    "gauss_legendre does not take a seed",
                ));
            }
            IntegrationScheme::gauss_legendre(nodes.unwrap_or(DEFAULT_GAUSS_NODES))
                .map_err(|e| CliError::config("scheme", e.to_string()))?
        }
        Some(SchemeName::QmcSobol) => {
            IntegrationScheme::qmc_sobol(points.unwrap_or(DEFAULT_QMC_POINTS), seed.unwrap_or(0))
                .map_err(|e| CliError::config("scheme", e.to_string()))?
        }
    };
    match config.and_then(|c| c.tolerance) {
        Some(tolerance) => scheme
            .with_tolerance(tolerance)
            .map_err(|e| CliError::config("scheme.tolerance", e.to_string())),
        None => Ok(scheme),
    }
}

fn reject_scheme_params(
    name: &str,
    nodes: Option<usize>,
    points: Option<usize>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    if nodes.is_some() || points.is_some() || seed.is_some() {
        return Err(CliError::config(
            "scheme",
            format!("{name} takes no nodes, points, or seed"),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<AnalysisConfig, CliError> {
        AnalysisConfig::from_bytes(json.as_bytes())
    }

    const MINIMAL_MODEL: &str = r#"
        "model": {
            "link": "logit",
            "prognostic": [-1.0],
            "treatments": ["A", "B", "C"],
            "effects": {"B": -4.0, "C": -3.0},
            "interactions": {"B": [-3.0], "C": [-1.0]}
        },
        "population": {
            "covariates": {"product": [{"uniform": {"lo": -1.0, "hi": 1.0}}]}
        }
    "#;

    #[test]
    fn minimal_report_config_builds() {
        let config = parse(&format!(
            r#"{{ {MINIMAL_MODEL}, "analysis": {{"report": {{}}}} }}"#
        ))
        .unwrap();
        assert_eq!(config.analysis.selector().unwrap(), "report");
        let model = config.require_model().unwrap();
        assert_eq!(model.reference(), "A");
        assert_eq!(model.arm("B").unwrap().effect(), -4.0);
        assert_eq!(model.arm("C").unwrap().interaction(), &[-1.0]);
        let pop = config.require_population().unwrap();
        assert_eq!(pop.covariates.dim(), 1);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = parse(r#"{"analysis": {"report": {}}, "extra": 1}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn selector_must_be_exactly_one() {
        let err = parse(r#"{"analysis": {}}"#).unwrap_err();
        assert_eq!(err.path(), Some("analysis"));
        assert!(err.to_string().contains("found none"));

        let err = parse(r#"{"analysis": {"report": {}, "sweep": {}}}"#).unwrap_err();
        assert!(err.to_string().contains("report, sweep"));
    }

    #[test]
    fn undefined_treatment_in_interactions_names_the_path() {
        let config = parse(
            r#"{
                "model": {
                    "link": "logit",
                    "prognostic": [0.5],
                    "treatments": ["A", "B"],
                    "interactions": {"D": [1.0]}
                },
                "population": {"covariates": {"product": []}},
                "analysis": {"report": {}}
            }"#,
        )
        .unwrap();
        let err = config.require_model().unwrap_err();
        assert_eq!(err.path(), Some("model.interactions"));
        assert!(err.to_string().contains("undefined treatment `D`"));
    }

    #[test]
    fn interaction_length_mismatch_names_the_treatment() {
        let config = parse(
            r#"{
                "model": {
                    "link": "logit",
                    "prognostic": [0.5, 0.2],
                    "treatments": ["A", "B"],
                    "interactions": {"B": [1.0]}
                },
                "population": {"covariates": {"product": []}},
                "analysis": {"report": {}}
            }"#,
        )
        .unwrap();
        let err = config.require_model().unwrap_err();
        assert_eq!(err.path(), Some("model.interactions.B"));
    }

    #[test]
    fn analysis_references_to_undefined_treatments_are_rejected() {
        let err = parse(&format!(
            r#"{{ {MINIMAL_MODEL}, "analysis": {{"sweep": {{"arms": ["B", "Z"]}}}} }}"#
        ))
        .unwrap_err();
        assert_eq!(err.path(), Some("analysis.sweep.arms"));
        assert!(err.to_string().contains("`Z`"));

        let err = parse(&format!(
            r#"{{ {MINIMAL_MODEL},
                 "analysis": {{"report": {{"baseline_risk": {{"treatment": "Z", "probability": 0.5}}}}}} }}"#
        ))
        .unwrap_err();
        assert_eq!(err.path(), Some("analysis.report.baseline_risk.treatment"));
    }

    #[test]
    fn covariates_need_exactly_one_form() {
        let config = parse(
            r#"{
                "model": {"link": "logit", "treatments": ["A"]},
                "population": {"covariates": {}},
                "analysis": {"report": {}}
            }"#,
        )
        .unwrap();
        let err = config.require_population().unwrap_err();
        assert_eq!(err.path(), Some("population.covariates"));
    }

    #[test]
    fn equal_weights_sum_to_one_exactly() {
        for n in 1..9 {
            let weights = equal_weights(n);
            assert_eq!(weights.iter().sum::<f64>(), 1.0, "n = {n}");
        }
        let config = parse(
            r#"{
                "model": {"link": "logit", "prognostic": [1.0], "treatments": ["A"]},
                "population": {
                    "covariates": {"product": [{"finite_points": {"values": [0.0, 0.5, 1.0]}}]}
                },
                "analysis": {"report": {}}
            }"#,
        )
        .unwrap();
        config.require_population().unwrap();
    }

    #[test]
    fn scheme_resolution_prefers_flags_over_config() {
        let dist = CovariateDistribution::product(vec![Marginal::Uniform { lo: 0.0, hi: 1.0 }])
            .unwrap();
        let config = SchemeConfig {
            name: SchemeName::GaussLegendre,
            nodes: Some(32),
            points: None,
            seed: None,
            tolerance: Some(1e-6),
        };
        let scheme = resolve_scheme(Some(&config), SchemeOverrides::default(), &dist).unwrap();
        assert_eq!(scheme.describe(), "gauss_legendre(32)");
        assert_eq!(scheme.tolerance(), 1e-6);

        let overridden = SchemeOverrides {
            name: Some(SchemeName::QmcSobol),
            nodes: Some(4096),
            seed: Some(7),
        };
        let scheme = resolve_scheme(Some(&config), overridden, &dist).unwrap();
        assert_eq!(scheme.describe(), "qmc_sobol(4096, seed=7)");

        let scheme = resolve_scheme(None, SchemeOverrides::default(), &dist).unwrap();
        assert_eq!(scheme.describe(), "gauss_legendre(64)");
    }

    #[test]
    fn nodes_without_a_scheme_name_is_a_usage_error() {
        let dist = CovariateDistribution::product(vec![Marginal::Uniform { lo: 0.0, hi: 1.0 }])
            .unwrap();
        let overrides = SchemeOverrides {
            name: None,
            nodes: Some(32),
            seed: None,
        };
        let err = resolve_scheme(None, overrides, &dist).unwrap_err();
        assert_eq!(err.kind(), "usage");
    }

    #[test]
    fn inline_contingency_counts_build_in_treatment_order() {
        let config = parse(
            r#"{
                "analysis": {"contingency": {
                    "subgroups": [
                        {"label": "x0", "prevalence": 0.75},
                        {"label": "x1", "prevalence": 0.25}
                    ],
                    "treatments": ["A", "B"],
                    "counts": {
                        "B": {"x0": {"events": 1, "non_events": 9}, "x1": {"events": 2, "non_events": 8}},
                        "A": {"x0": {"events": 5, "non_events": 5}, "x1": {"events": 6, "non_events": 4}}
                    }
                }}
            }"#,
        )
        .unwrap();
        let analysis = config.analysis.contingency.as_ref().unwrap();
        let table = analysis.build_table(Path::new(".")).unwrap();
        assert_eq!(table.treatments(), ["A", "B"]);
        assert_eq!(table.reference(), "A");
        let cell = table.cell("B", "x1").unwrap();
        assert_eq!((cell.events, cell.non_events), (2, 8));
    }

    #[test]
    fn missing_inline_cell_is_rejected_with_its_path() {
        let config = parse(
            r#"{
                "analysis": {"contingency": {
                    "subgroups": [{"label": "x0", "prevalence": 1.0}],
                    "treatments": ["A", "B"],
                    "counts": {"A": {"x0": {"events": 1, "non_events": 1}}, "B": {}}
                }}
            }"#,
        )
        .unwrap();
        let analysis = config.analysis.contingency.as_ref().unwrap();
        let err = analysis.build_table(Path::new(".")).unwrap_err();
        assert_eq!(err.path(), Some("analysis.contingency.counts.B"));
    }

    #[test]
    fn contingency_config_rejects_mixing_inline_and_csv() {
        let config = parse(
            r#"{
                "analysis": {"contingency": {
                    "treatments": ["A"],
                    "counts_csv": "counts.csv"
                }}
            }"#,
        )
        .unwrap();
        let analysis = config.analysis.contingency.as_ref().unwrap();
        let err = analysis.build_table(Path::new(".")).unwrap_err();
        assert_eq!(err.path(), Some("analysis.contingency"));
    }

    #[test]
    fn count_csv_rows_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("prevalence.csv"),
            "subgroup,prevalence\nx0,0.6\nx1,0.4\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("counts.csv"),
            "treatment,subgroup,events,non_events\n\
             A,x0,1099511627776,1\nA,x1,3,4\nB,x0,5,6\nB,x1,7,8\n",
        )
        .unwrap();
        let analysis = ContingencyAnalysis {
            counts_csv: Some("counts.csv".into()),
            prevalence_csv: Some("prevalence.csv".into()),
            ..Default::default()
        };
        let table = analysis.build_table(dir.path()).unwrap();
        assert_eq!(table.treatments(), ["A", "B"]);
        assert_eq!(table.cell("A", "x0").unwrap().events, 1_099_511_627_776);
        assert_eq!(table.cell("B", "x1").unwrap().non_events, 8);
        assert_eq!(table.subgroups()[1].prevalence(), 0.4);
    }

    #[test]
    fn count_csv_missing_cell_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("prevalence.csv"),
            "subgroup,prevalence\nx0,0.6\nx1,0.4\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("counts.csv"),
            "treatment,subgroup,events,non_events\nA,x0,1,2\nA,x1,3,4\nB,x0,5,6\n",
        )
        .unwrap();
        let analysis = ContingencyAnalysis {
            counts_csv: Some("counts.csv".into()),
            prevalence_csv: Some("prevalence.csv".into()),
            ..Default::default()
        };
        let err = analysis.build_table(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no cell for treatment `B`"));
    }

    #[test]
    fn time_grids_support_log_and_linear_spacing() {
        let log = TimeGridConfig {
            lo: 0.1,
            hi: 10.0,
            points: 3,
            spacing: Spacing::Log,
        };
        let grid = log.build("analysis.survival.times").unwrap();
        assert_eq!(grid.times()[0], 0.1);
        assert!((grid.times()[1] - 1.0).abs() < 1e-12);
        assert_eq!(grid.times()[2], 10.0);

        let linear = TimeGridConfig {
            lo: 1.0,
            hi: 2.0,
            points: 3,
            spacing: Spacing::Linear,
        };
        let grid = linear.build("analysis.survival.times").unwrap();
        assert_eq!(grid.times(), &[1.0, 1.5, 2.0]);

        let bad = TimeGridConfig {
            lo: -1.0,
            hi: 2.0,
            points: 3,
            spacing: Spacing::Linear,
        };
        let err = bad.build("analysis.survival.times").unwrap_err();
        assert_eq!(err.path(), Some("analysis.survival.times"));
    }
}

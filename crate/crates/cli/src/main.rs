//! Command-line front end for the estimand calculus library: runs analyses
//! described by JSON configs and emits JSON reports or CSV curve data.

mod config;
mod errors;
mod figures;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use estimand_core::binary::{estimand_report, expected_net_benefit, AveragingMode, NetBenefitSpec};
use estimand_core::contingency::{ContingencyTable, ZeroCellPolicy};
use estimand_core::decision::{
    baseline_risk_sweep, conflict_report, intercept_from_baseline_risk, shared_em_scenario,
    ConflictReport, PairStatus, SharedEmReport,
};
use estimand_core::oracle::{oracle_estimands, oracle_survival, OracleEstimands, OracleSurvival};
use estimand_core::survival::{SurvivalGrid, TimeGrid, WeibullPHModel};
use estimand_core::{Direction, IntegrationScheme, OutcomeModel, Population};

use config::{AnalysisConfig, SchemeName, SchemeOverrides};
use errors::CliError;
use output::{sig12, CsvDoc, Envelope, OutputTarget};

#[derive(Parser)]
#[command(
    name = "estimand-lab",
    version,
    about = "Conditional and marginal treatment-effect estimands from generative outcome models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Binary-outcome estimand report: per-arm averages, pairwise effects, rankings
    Report(RunArgs),
    /// Sweep the population intercept, tracking conditional and marginal effects
    Sweep(RunArgs),
    /// Marginal survival, hazard, and hazard-ratio curves over a time grid
    Survival(RunArgs),
    /// Odds ratios and the optimal stratified policy for a contingency table
    Contingency(RunArgs),
    /// Rank-conflict detection with individual-level sign-change witnesses
    Conflict(RunArgs),
    /// Monte Carlo potential-outcomes cross-check of the deterministic estimands
    Oracle(RunArgs),
    /// Emit the CSV curve data for one named figure (fig1 through fig7)
    Figure {
        /// Figure id
        id: String,
        #[command(flatten)]
        args: RunArgs,
    },
}

impl Command {
    fn verb(&self) -> &'static str {
        match self {
            Command::Report(_) => "report",
            Command::Sweep(_) => "sweep",
            Command::Survival(_) => "survival",
            Command::Contingency(_) => "contingency",
            Command::Conflict(_) => "conflict",
            Command::Oracle(_) => "oracle",
            Command::Figure { .. } => "figure",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Report(args)
            | Command::Sweep(args)
            | Command::Survival(args)
            | Command::Contingency(args)
            | Command::Conflict(args)
            | Command::Oracle(args) => args,
            Command::Figure { args, .. } => args,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON analysis config
    #[arg(long)]
    config: PathBuf,
    /// Directory for output files; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration scheme override
    #[arg(long, value_enum)]
    scheme: Option<SchemeName>,
    /// Node count for gauss_legendre, point count for qmc_sobol
    #[arg(long)]
    nodes: Option<usize>,
    /// Seed override for qmc_sobol scrambling and the Monte Carlo oracle
    #[arg(long)]
    seed: Option<u64>,
    /// Which event-probability direction counts as better
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Report format; figure data is always CSV
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Lower,
    Higher,
}

impl From<DirectionArg> for Direction {
    fn from(d: DirectionArg) -> Direction {
        match d {
            DirectionArg::Lower => Direction::LowerIsBetter,
            DirectionArg::Higher => Direction::HigherIsBetter,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

fn main() -> ExitCode {
    match try_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn try_main() -> Result<(), CliError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => return Err(CliError::Usage(e.to_string())),
        Err(e) => {
            print!("{e}");
            return Ok(());
        }
    };
    let verb = cli.command.verb();
    let args = cli.command.args();

    let bytes = std::fs::read(&args.config).map_err(|e| {
        CliError::config_file(format!("cannot read {}: {e}", args.config.display()))
    })?;
    let sha = hex(&Sha256::digest(&bytes));
    let cfg = AnalysisConfig::from_bytes(&bytes)?;
    let config_dir = args
        .config
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();

    let run = Run {
        cfg,
        args,
        sha,
        config_dir,
    };
    match &cli.command {
        Command::Report(_) => run.report(),
        Command::Sweep(_) => run.sweep(),
        Command::Survival(_) => run.survival(),
        Command::Contingency(_) => run.contingency(),
        Command::Conflict(_) => run.conflict(),
        Command::Oracle(_) => run.oracle(),
        Command::Figure { id, .. } => run.figure(id),
    }
    .map_err(|e| annotate_selector_mismatch(e, verb))
}

/// Re-labels a missing-selector error with the verb that needed it.
fn annotate_selector_mismatch(e: CliError, verb: &str) -> CliError {
    match e {
        CliError::Config { path: Some(path), message } if path == "analysis.selector" => {
            CliError::config("analysis", format!("the {verb} verb {message}"))
        }
        other => other,
    }
}

fn hex(digest: &[u8]) -> String {
    let mut out = String::with_capacity(digest.len() * 2);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// One parsed invocation: config, flags, and provenance hash.
struct Run<'a> {
    cfg: AnalysisConfig,
    args: &'a RunArgs,
    sha: String,
    config_dir: PathBuf,
}

impl Run<'_> {
    fn scheme_overrides(&self) -> SchemeOverrides {
        SchemeOverrides {
            name: self.args.scheme,
            nodes: self.args.nodes,
            seed: self.args.seed,
        }
    }

    fn resolve_scheme(&self, pop: &Population) -> Result<IntegrationScheme, CliError> {
        config::resolve_scheme(
            self.cfg.scheme.as_ref(),
            self.scheme_overrides(),
            &pop.covariates,
        )
    }

    fn direction(&self, declared: Option<config::DirectionConfig>) -> Direction {
        self.args
            .direction
            .map(Direction::from)
            .or(declared.map(Direction::from))
            .unwrap_or_default()
    }

    /// The output target: --out, then the config's out_dir, then stdout.
    fn target(&self) -> OutputTarget {
        match (&self.args.out, &self.cfg.out_dir) {
            (Some(dir), _) => OutputTarget::Directory(dir.clone()),
            (None, Some(dir)) => OutputTarget::Directory(self.config_dir.join(dir)),
            (None, None) => OutputTarget::Stdout,
        }
    }

    fn selector<'c, T>(
        &self,
        section: &'c Option<T>,
        name: &str,
    ) -> Result<&'c T, CliError> {
        section.as_ref().ok_or_else(|| {
            let declared = self
                .cfg
                .analysis
                .selector()
                .expect("validated at parse time");
            CliError::config(
                "analysis.selector",
                format!("needs an analysis.{name} section, the config declares analysis.{declared}"),
            )
        })
    }

    fn reject_direction_flag(&self, verb: &str) -> Result<(), CliError> {
        if self.args.direction.is_some() {
            return Err(CliError::Usage(format!(
                "--direction does not apply to the {verb} verb"
            )));
        }
        Ok(())
    }

    fn reject_scheme_flags(&self, verb: &str) -> Result<(), CliError> {
        if self.args.scheme.is_some() || self.args.nodes.is_some() {
            return Err(CliError::Usage(format!(
                "--scheme and --nodes do not apply to the {verb} verb"
            )));
        }
        Ok(())
    }

    fn emit_json<T: Serialize>(&self, verb: &str, report: T) -> Result<(), CliError> {
        let envelope = Envelope::new(verb, self.sha.clone(), report);
        let written = self
            .target()
            .write(&format!("{verb}.json"), &envelope.to_json_bytes()?)?;
        announce(written);
        Ok(())
    }

    fn emit_csv(&self, name: &str, verb: &str, mut doc: CsvDoc) -> Result<(), CliError> {
        let mut comments = vec![
            ("tool".to_string(), format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))),
            ("command".to_string(), verb.to_string()),
            ("config_sha256".to_string(), self.sha.clone()),
        ];
        comments.append(&mut doc.comments);
        doc.comments = comments;
        let written = self.target().write(&format!("{name}.csv"), &doc.to_bytes()?)?;
        announce(written);
        Ok(())
    }

    fn report(&self) -> Result<(), CliError> {
        let analysis = self.selector(&self.cfg.analysis.report, "report")?;
        let model = self.cfg.require_model()?;
        let mut pop = self.cfg.require_population()?;
        let scheme = self.resolve_scheme(&pop)?;
        let direction = self.direction(analysis.direction);

        let calibrated = match &analysis.baseline_risk {
            Some(br) => {
                let intercept = intercept_from_baseline_risk(
                    &model,
                    &pop,
                    &br.treatment,
                    br.probability,
                    &scheme,
                )?;
                pop = Population::new(intercept, pop.covariates.clone())?;
                Some(CalibratedIntercept {
                    treatment: br.treatment.clone(),
                    target_probability: br.probability,
                    intercept,
                })
            }
            None => None,
        };
        let estimands = estimand_report(&model, &pop, direction, &scheme)?;
        let shared_effect_modifiers = match &analysis.shared_effect_modifiers {
            Some(shared) => Some(shared_em_scenario(&model, &pop, shared)?),
            None => None,
        };
        let net_benefit = match &analysis.net_benefit {
            Some(values) => {
                let mut entries = Vec::with_capacity(values.len());
                for (treatment, coeffs) in values {
                    let entry = NetBenefitEntry {
                        treatment: treatment.clone(),
                        individual_level: net_benefit_value(
                            &model,
                            &pop,
                            treatment,
                            coeffs,
                            AveragingMode::IndividualLevel,
                            &scheme,
                        )?,
                        plug_in_average: net_benefit_value(
                            &model,
                            &pop,
                            treatment,
                            coeffs,
                            AveragingMode::PlugInAverage,
                            &scheme,
                        )?,
                    };
                    entries.push(entry);
                }
                Some(entries)
            }
            None => None,
        };
        let report = ReportOutput {
            calibrated_intercept: calibrated,
            estimands,
            shared_effect_modifiers,
            net_benefit,
        };
        match self.args.format {
            FormatArg::Json => self.emit_json("report", report),
            FormatArg::Csv => {
                let mut doc = CsvDoc {
                    header: [
                        "id",
                        "average_probability",
                        "conditional_vs_reference",
                        "marginal_vs_reference",
                    ]
                    .map(String::from)
                    .to_vec(),
                    ..Default::default()
                };
                doc.comment("scheme", report.estimands.scheme.clone());
                doc.comment("tolerance", sig12(report.estimands.tolerance));
                for arm in &report.estimands.arms {
                    doc.rows.push(vec![
                        arm.id.clone(),
                        sig12(arm.average_probability),
                        sig12(arm.conditional_vs_reference),
                        sig12(arm.marginal_vs_reference),
                    ]);
                }
                self.emit_csv("report", "report", doc)
            }
        }
    }

    fn sweep(&self) -> Result<(), CliError> {
        let analysis = self.selector(&self.cfg.analysis.sweep, "sweep")?;
        self.reject_direction_flag("sweep")?;
        let model = self.cfg.require_model()?;
        let pop = self.cfg.require_population()?;
        let scheme = self.resolve_scheme(&pop)?;
        let grid = match &analysis.grid {
            Some(grid) => Some(grid.build("analysis.sweep.grid")?),
            None => None,
        };
        let arms = analysis.arms.clone().unwrap_or_default();
        let result = baseline_risk_sweep(&model, &pop, grid.as_deref(), &arms, &scheme)?;
        match self.args.format {
            FormatArg::Json => self.emit_json("sweep", result),
            FormatArg::Csv => {
                let mut doc = figures::sweep_series(&result);
                doc.comment("scheme", result.scheme.clone());
                doc.comment("tolerance", sig12(result.tolerance));
                self.emit_csv("sweep", "sweep", doc)
            }
        }
    }

    fn survival(&self) -> Result<(), CliError> {
        let analysis = self.selector(&self.cfg.analysis.survival, "survival")?;
        self.reject_direction_flag("survival")?;
        let model = self.cfg.require_model()?;
        let pop = self.cfg.require_population()?;
        let scheme = self.resolve_scheme(&pop)?;
        let weibull = WeibullPHModel::new(analysis.shape, model)?;
        let grid = build_time_grid(&analysis.times)?;
        let result = weibull.survival_grid(&pop, &grid, &scheme)?;
        match self.args.format {
            FormatArg::Json => self.emit_json("survival", result),
            FormatArg::Csv => {
                let mut doc = survival_csv(&result);
                doc.comment("scheme", result.scheme.clone());
                doc.comment("tolerance", sig12(result.tolerance));
                self.emit_csv("survival", "survival", doc)
            }
        }
    }

    fn contingency(&self) -> Result<(), CliError> {
        let analysis = self.selector(&self.cfg.analysis.contingency, "contingency")?;
        self.reject_scheme_flags("contingency")?;
        if self.args.seed.is_some() {
            return Err(CliError::Usage(
                "--seed does not apply to the contingency verb".into(),
            ));
        }
        let table = analysis.build_table(&self.config_dir)?;
        let direction = self.direction(analysis.direction);
        let report = contingency_output(&table, direction)?;
        match self.args.format {
            FormatArg::Json => self.emit_json("contingency", report),
            FormatArg::Csv => {
                let mut doc = contingency_csv(&report);
                doc.comment("zero_cells", zero_cells_name(report.zero_cells));
                self.emit_csv("contingency", "contingency", doc)
            }
        }
    }

    fn conflict(&self) -> Result<(), CliError> {
        let analysis = self.selector(&self.cfg.analysis.conflict, "conflict")?;
        let model = self.cfg.require_model()?;
        let pop = self.cfg.require_population()?;
        let scheme = self.resolve_scheme(&pop)?;
        let direction = self.direction(analysis.direction);
        let treatments = analysis.treatments.clone().unwrap_or_default();
        let report = conflict_report(&model, &pop, &treatments, direction, &scheme)?;
        match self.args.format {
            FormatArg::Json => self.emit_json("conflict", report),
            FormatArg::Csv => {
                let mut doc = conflict_csv(&report);
                doc.comment("scheme", report.scheme.clone());
                doc.comment("tolerance", sig12(report.tolerance));
                self.emit_csv("conflict", "conflict", doc)
            }
        }
    }

    fn oracle(&self) -> Result<(), CliError> {
        let analysis = self.selector(&self.cfg.analysis.oracle, "oracle")?;
        self.reject_scheme_flags("oracle")?;
        self.reject_direction_flag("oracle")?;
        let model = self.cfg.require_model()?;
        let pop = self.cfg.require_population()?;
        let oracle_config = analysis.oracle_config(self.args.seed);
        let report = match &analysis.survival {
            Some(survival) => {
                let weibull = WeibullPHModel::new(survival.shape, model)?;
                let grid = build_time_grid(&survival.times)?;
                OracleOutput {
                    estimands: None,
                    survival: Some(oracle_survival(&weibull, &pop, &grid, &oracle_config)?),
                }
            }
            None => {
                let treatments = analysis.treatments.clone().unwrap_or_default();
                OracleOutput {
                    estimands: Some(oracle_estimands(
                        &model,
                        &pop,
                        &treatments,
                        &oracle_config,
                    )?),
                    survival: None,
                }
            }
        };
        match self.args.format {
            FormatArg::Json => self.emit_json("oracle", report),
            FormatArg::Csv => {
                let mut doc = oracle_csv(&report);
                doc.comment("draws", oracle_config.draws.to_string());
                doc.comment("seed", oracle_config.seed.to_string());
                self.emit_csv("oracle", "oracle", doc)
            }
        }
    }

    fn figure(&self, id: &str) -> Result<(), CliError> {
        let needed = figures::required_selector(id)?;
        if self.args.format == FormatArg::Json {
            return Err(CliError::Usage(
                "figure data is emitted as CSV; drop --format json".into(),
            ));
        }
        self.reject_direction_flag("figure")?;
        let doc = match needed {
            "report" => {
                let analysis = self.selector(&self.cfg.analysis.report, "report")?;
                let model = self.cfg.require_model()?;
                let mut pop = self.cfg.require_population()?;
                let scheme = self.resolve_scheme(&pop)?;
                if let Some(br) = &analysis.baseline_risk {
                    let intercept = intercept_from_baseline_risk(
                        &model,
                        &pop,
                        &br.treatment,
                        br.probability,
                        &scheme,
                    )?;
                    pop = Population::new(intercept, pop.covariates.clone())?;
                }
                match id {
                    "fig1" => figures::contrast_lines(&model, &pop)?,
                    "fig3" => {
                        let variants = analysis.intercept_variants.clone().unwrap_or_default();
                        figures::probability_families(&model, &pop, &variants)?
                    }
                    "fig4" => figures::contrast_and_probability_curves(&model, &pop)?,
                    _ => {
                        let shared = analysis.shared_effect_modifiers.as_ref().ok_or_else(|| {
                            CliError::config(
                                "analysis.report.shared_effect_modifiers",
                                format!("figure {id} needs a declared shared-effect-modifier set"),
                            )
                        })?;
                        figures::shared_em_curves(&model, &pop, shared)?
                    }
                }
            }
            "sweep" => {
                let analysis = self.selector(&self.cfg.analysis.sweep, "sweep")?;
                let model = self.cfg.require_model()?;
                let pop = self.cfg.require_population()?;
                let scheme = self.resolve_scheme(&pop)?;
                let grid = match &analysis.grid {
                    Some(grid) => Some(grid.build("analysis.sweep.grid")?),
                    None => None,
                };
                let arms = analysis.arms.clone().unwrap_or_default();
                let result = baseline_risk_sweep(&model, &pop, grid.as_deref(), &arms, &scheme)?;
                figures::sweep_series(&result)
            }
            _ => {
                let analysis = self.selector(&self.cfg.analysis.survival, "survival")?;
                let model = self.cfg.require_model()?;
                let pop = self.cfg.require_population()?;
                let scheme = self.resolve_scheme(&pop)?;
                let weibull = WeibullPHModel::new(analysis.shape, model)?;
                let grid = build_time_grid(&analysis.times)?;
                if id == "fig6" {
                    let result = weibull.survival_grid(&pop, &grid, &scheme)?;
                    figures::survival_curves(&result)
                } else {
                    figures::hazard_ratio_families(
                        &weibull,
                        &pop,
                        &grid,
                        &scheme,
                        analysis.shape_variants.as_deref().unwrap_or_default(),
                        analysis.intercept_variants.as_deref().unwrap_or_default(),
                    )?
                }
            }
        };
        self.emit_csv(id, &format!("figure {id}"), doc)
    }
}

fn build_time_grid(times: &Option<config::TimeGridConfig>) -> Result<TimeGrid, CliError> {
    match times {
        Some(times) => times.build("analysis.survival.times"),
        None => Ok(TimeGrid::default_plot()),
    }
}

fn net_benefit_value(
    model: &OutcomeModel,
    pop: &Population,
    treatment: &str,
    coeffs: &[f64],
    mode: AveragingMode,
    scheme: &IntegrationScheme,
) -> Result<f64, CliError> {
    let spec = NetBenefitSpec::new([(treatment.to_string(), coeffs.to_vec())], mode)?;
    Ok(expected_net_benefit(model, pop, &spec, treatment, scheme)?)
}

fn announce(written: Option<PathBuf>) {
    if let Some(path) = written {
        println!("{}", path.display());
    }
}

/// Output body for the report verb.
#[derive(Debug, Serialize, Deserialize)]
struct ReportOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    calibrated_intercept: Option<CalibratedIntercept>,
    estimands: estimand_core::binary::EstimandReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    shared_effect_modifiers: Option<SharedEmReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    net_benefit: Option<Vec<NetBenefitEntry>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibratedIntercept {
    treatment: String,
    target_probability: f64,
    intercept: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetBenefitEntry {
    treatment: String,
    individual_level: f64,
    plug_in_average: f64,
}

/// Output body for the contingency verb: exact count echo, odds ratios for
/// every ordered pair, and the optimal stratified policy.
#[derive(Debug, Serialize, Deserialize)]
struct ContingencyOutput {
    treatments: Vec<String>,
    reference: String,
    subgroups: Vec<SubgroupInfo>,
    zero_cells: ZeroCellPolicy,
    direction: Direction,
    counts: Vec<CountEcho>,
    comparisons: Vec<PairOddsRatios>,
    policy: estimand_core::contingency::StratifiedPolicy,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubgroupInfo {
    label: String,
    prevalence: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CountEcho {
    treatment: String,
    subgroup: String,
    events: u64,
    non_events: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairOddsRatios {
    a: String,
    b: String,
    marginal_or: f64,
    population_conditional_or: f64,
    subgroup_ors: Vec<SubgroupOddsRatio>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubgroupOddsRatio {
    subgroup: String,
    odds_ratio: f64,
}

fn contingency_output(
    table: &ContingencyTable,
    direction: Direction,
) -> Result<ContingencyOutput, CliError> {
    let treatments = table.treatments().to_vec();
    let subgroups: Vec<SubgroupInfo> = table
        .subgroups()
        .iter()
        .map(|s| SubgroupInfo {
            label: s.label().to_string(),
            prevalence: s.prevalence(),
        })
        .collect();
    let mut counts = Vec::new();
    for id in &treatments {
        for subgroup in table.subgroups() {
            let cell = table.cell(id, subgroup.label())?;
            counts.push(CountEcho {
                treatment: id.clone(),
                subgroup: subgroup.label().to_string(),
                events: cell.events,
                non_events: cell.non_events,
            });
        }
    }
    let mut comparisons = Vec::new();
    for i in 0..treatments.len() {
        for j in i + 1..treatments.len() {
            let (a, b) = (&treatments[i], &treatments[j]);
            let mut subgroup_ors = Vec::new();
            for subgroup in table.subgroups() {
                subgroup_ors.push(SubgroupOddsRatio {
                    subgroup: subgroup.label().to_string(),
                    odds_ratio: table.subgroup_conditional_or(a, b, subgroup.label())?,
                });
            }
            comparisons.push(PairOddsRatios {
                a: a.clone(),
                b: b.clone(),
                marginal_or: table.marginal_or(a, b)?,
                population_conditional_or: table.population_conditional_or(a, b)?,
                subgroup_ors,
            });
        }
    }
    Ok(ContingencyOutput {
        reference: table.reference().to_string(),
        subgroups,
        zero_cells: table.zero_cell_policy(),
        direction,
        counts,
        comparisons,
        policy: table.optimal_stratified_policy(direction)?,
        treatments,
    })
}

fn zero_cells_name(policy: ZeroCellPolicy) -> &'static str {
    match policy {
        ZeroCellPolicy::Error => "error",
        ZeroCellPolicy::HaldaneCorrection => "haldane_correction",
    }
}

fn contingency_csv(report: &ContingencyOutput) -> CsvDoc {
    let mut doc = CsvDoc {
        header: ["measure", "a", "b", "subgroup", "odds_ratio"]
            .map(String::from)
            .to_vec(),
        ..Default::default()
    };
    for pair in &report.comparisons {
        doc.rows.push(vec![
            "marginal_or".into(),
            pair.a.clone(),
            pair.b.clone(),
            String::new(),
            sig12(pair.marginal_or),
        ]);
        doc.rows.push(vec![
            "population_conditional_or".into(),
            pair.a.clone(),
            pair.b.clone(),
            String::new(),
            sig12(pair.population_conditional_or),
        ]);
        for entry in &pair.subgroup_ors {
            doc.rows.push(vec![
                "subgroup_or".into(),
                pair.a.clone(),
                pair.b.clone(),
                entry.subgroup.clone(),
                sig12(entry.odds_ratio),
            ]);
        }
    }
    doc
}

fn conflict_csv(report: &ConflictReport) -> CsvDoc {
    let mut doc = CsvDoc {
        header: ["a", "b", "conditional", "marginal", "status"]
            .map(String::from)
            .to_vec(),
        ..Default::default()
    };
    for pair in &report.pairs {
        doc.rows.push(vec![
            pair.a.clone(),
            pair.b.clone(),
            sig12(pair.conditional),
            sig12(pair.marginal),
            pair_status_name(pair.status).to_string(),
        ]);
    }
    doc
}

fn pair_status_name(status: PairStatus) -> &'static str {
    match status {
        PairStatus::Agree => "agree",
        PairStatus::Conflict => "conflict",
        PairStatus::NearTie => "near_tie",
    }
}

fn survival_csv(grid: &SurvivalGrid) -> CsvDoc {
    let mut doc = CsvDoc::default();
    doc.header.push("t".into());
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for arm in &grid.arms {
        doc.header.push(format!("survival_{}", arm.id));
        columns.push(arm.marginal_survival.clone());
        doc.header.push(format!("hazard_{}", arm.id));
        columns.push(arm.marginal_hazard.clone());
    }
    for pair in &grid.pairs {
        doc.header
            .push(format!("marginal_hr_{}_vs_{}", pair.b, pair.a));
        columns.push(pair.marginal_hazard_ratio.clone());
        doc.header
            .push(format!("conditional_hr_{}_vs_{}", pair.b, pair.a));
        columns.push(vec![pair.conditional_log_hr.exp(); grid.times.len()]);
    }
    for (i, &t) in grid.times.iter().enumerate() {
        let mut row = vec![sig12(t)];
        row.extend(columns.iter().map(|column| sig12(column[i])));
        doc.rows.push(row);
    }
    doc
}

/// Output body for the oracle verb.
#[derive(Debug, Serialize, Deserialize)]
struct OracleOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    estimands: Option<OracleEstimands>,
    #[serde(skip_serializing_if = "Option::is_none")]
    survival: Option<OracleSurvival>,
}

fn oracle_csv(report: &OracleOutput) -> CsvDoc {
    if let Some(estimands) = &report.estimands {
        let mut doc = CsvDoc {
            header: ["quantity", "a", "b", "value", "se"]
                .map(String::from)
                .to_vec(),
            ..Default::default()
        };
        for arm in &estimands.arms {
            doc.rows.push(vec![
                "average_probability".into(),
                arm.id.clone(),
                String::new(),
                sig12(arm.average_probability.value),
                sig12(arm.average_probability.se),
            ]);
        }
        for pair in &estimands.pairs {
            doc.rows.push(vec![
                "conditional".into(),
                pair.a.clone(),
                pair.b.clone(),
                sig12(pair.conditional.value),
                sig12(pair.conditional.se),
            ]);
            doc.rows.push(vec![
                "marginal".into(),
                pair.a.clone(),
                pair.b.clone(),
                sig12(pair.marginal.value),
                sig12(pair.marginal.se),
            ]);
        }
        return doc;
    }
    let survival = report
        .survival
        .as_ref()
        .expect("oracle output holds estimands or survival");
    let mut doc = CsvDoc::default();
    doc.header.push("t".into());
    let mut columns: Vec<Vec<String>> = Vec::new();
    for arm in &survival.arms {
        doc.header.push(format!("survival_{}", arm.id));
        columns.push(arm.marginal_survival.iter().map(|e| sig12(e.value)).collect());
        doc.header.push(format!("survival_{}_se", arm.id));
        columns.push(arm.marginal_survival.iter().map(|e| sig12(e.se)).collect());
        doc.header.push(format!("hazard_{}", arm.id));
        columns.push(arm.marginal_hazard.iter().map(|e| sig12(e.value)).collect());
        doc.header.push(format!("hazard_{}_se", arm.id));
        columns.push(arm.marginal_hazard.iter().map(|e| sig12(e.se)).collect());
    }
    for pair in &survival.pairs {
        doc.header
            .push(format!("marginal_hr_{}_vs_{}", pair.b, pair.a));
        columns.push(
            pair.marginal_hazard_ratio
                .iter()
                .map(|e| sig12(e.value))
                .collect(),
        );
        doc.header
            .push(format!("marginal_hr_{}_vs_{}_se", pair.b, pair.a));
        columns.push(
            pair.marginal_hazard_ratio
                .iter()
                .map(|e| sig12(e.se))
                .collect(),
        );
    }
    for (i, &t) in survival.times.iter().enumerate() {
        let mut row = vec![sig12(t)];
        row.extend(columns.iter().map(|column| column[i].clone()));
        doc.rows.push(row);
    }
    doc
}

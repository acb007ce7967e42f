//! Curve-data emitters for the named figures, as CSV with the abscissa on
//! column 1 and one column per curve.

use estimand_core::decision::{probability_curves, shared_em_scenario, SweepResult};
use estimand_core::survival::{SurvivalGrid, TimeGrid, WeibullPHModel};
use estimand_core::{IntegrationScheme, OutcomeModel, Population};

use crate::errors::CliError;
use crate::output::{sig12, CsvDoc};

/// Grid resolution for covariate-axis curves.
const CURVE_POINTS: usize = 201;

/// The figure ids the `figure` verb accepts.
pub const FIGURE_IDS: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

/// Which analysis selector a figure draws its scenario from.
pub fn required_selector(id: &str) -> Result<&'static str, CliError> {
    match id {
        "fig1" | "fig3" | "fig4" | "fig5" => Ok("report"),
        "fig2" => Ok("sweep"),
        "fig6" | "fig7" => Ok("survival"),
        _ => Err(CliError::Usage(format!(
            "unknown figure `{id}`, expected one of {}",
            FIGURE_IDS.join(", ")
        ))),
    }
}

fn pair_column(prefix: &str, b: &str, a: &str) -> String {
    format!("{prefix}_{b}_vs_{a}")
}

/// Individual-level contrast lines versus the reference arm along the first
/// covariate axis.
pub fn contrast_lines(model: &OutcomeModel, pop: &Population) -> Result<CsvDoc, CliError> {
    let curves = probability_curves(model, pop, CURVE_POINTS)?;
    let reference = model.reference();
    let mut doc = CsvDoc::default();
    doc.header.push("x".into());
    let mut columns = Vec::new();
    for arm in &curves.arms {
        if arm.id != reference {
            doc.header.push(pair_column("gamma", &arm.id, reference));
            columns.push(&arm.log_or_vs_reference);
        }
    }
    for (i, &x) in curves.x.iter().enumerate() {
        let mut row = vec![sig12(x)];
        row.extend(columns.iter().map(|column| sig12(column[i])));
        doc.rows.push(row);
    }
    Ok(doc)
}

/// Conditional and marginal effect series over the swept population
/// intercept.
pub fn sweep_series(sweep: &SweepResult) -> CsvDoc {
    let mut doc = CsvDoc::default();
    doc.header.push("mu".into());
    for series in &sweep.series {
        doc.header
            .push(pair_column("conditional", &series.b, &series.a));
        doc.header
            .push(pair_column("marginal", &series.b, &series.a));
    }
    for (i, &mu) in sweep.grid.iter().enumerate() {
        let mut row = vec![sig12(mu)];
        for series in &sweep.series {
            row.push(sig12(series.conditional[i]));
            row.push(sig12(series.marginal[i]));
        }
        doc.rows.push(row);
    }
    doc
}

/// Event-probability curves per arm, one family per population intercept.
pub fn probability_families(
    model: &OutcomeModel,
    pop: &Population,
    intercepts: &[f64],
) -> Result<CsvDoc, CliError> {
    let mut doc = CsvDoc::default();
    doc.header.push("x".into());
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut x_axis = Vec::new();
    if intercepts.is_empty() {
        let curves = probability_curves(model, pop, CURVE_POINTS)?;
        x_axis = curves.x;
        for arm in curves.arms {
            doc.header.push(format!("probability_{}", arm.id));
            columns.push(arm.probability);
        }
    } else {
        for &mu in intercepts {
            let pop_mu = Population::new(mu, pop.covariates.clone())?;
            let curves = probability_curves(model, &pop_mu, CURVE_POINTS)?;
            x_axis = curves.x;
            for arm in curves.arms {
                doc.header
                    .push(format!("probability_{}_at_mu_{}", arm.id, fmt_label(mu)));
                columns.push(arm.probability);
            }
        }
    }
    for (i, &x) in x_axis.iter().enumerate() {
        let mut row = vec![sig12(x)];
        row.extend(columns.iter().map(|column| sig12(column[i])));
        doc.rows.push(row);
    }
    Ok(doc)
}

/// Contrast lines and event-probability curves on a shared covariate axis.
pub fn contrast_and_probability_curves(
    model: &OutcomeModel,
    pop: &Population,
) -> Result<CsvDoc, CliError> {
    let curves = probability_curves(model, pop, CURVE_POINTS)?;
    let reference = model.reference();
    let mut doc = CsvDoc::default();
    doc.header.push("x".into());
    let mut columns: Vec<&Vec<f64>> = Vec::new();
    for arm in &curves.arms {
        if arm.id != reference {
            doc.header.push(pair_column("gamma", &arm.id, reference));
            columns.push(&arm.log_or_vs_reference);
        }
    }
    for arm in &curves.arms {
        doc.header.push(format!("probability_{}", arm.id));
        columns.push(&arm.probability);
    }
    for (i, &x) in curves.x.iter().enumerate() {
        let mut row = vec![sig12(x)];
        row.extend(columns.iter().map(|column| sig12(column[i])));
        doc.rows.push(row);
    }
    Ok(doc)
}

/// Same curves as [`contrast_and_probability_curves`], after checking the
/// declared shared-effect-modifier set.
pub fn shared_em_curves(
    model: &OutcomeModel,
    pop: &Population,
    shared: &[String],
) -> Result<CsvDoc, CliError> {
    shared_em_scenario(model, pop, shared)?;
    contrast_and_probability_curves(model, pop)
}

/// Marginal survival plus marginal and conditional hazard-ratio curves
/// against the reference arm over the time grid.
pub fn survival_curves(grid: &SurvivalGrid) -> CsvDoc {
    let mut doc = CsvDoc::default();
    doc.header.push("t".into());
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for arm in &grid.arms {
        doc.header.push(format!("survival_{}", arm.id));
        columns.push(arm.marginal_survival.clone());
    }
    for pair in &grid.pairs {
        if pair.a != grid.reference {
            continue;
        }
        doc.header
            .push(pair_column("marginal_hr", &pair.b, &pair.a));
        columns.push(pair.marginal_hazard_ratio.clone());
        doc.header
            .push(pair_column("conditional_hr", &pair.b, &pair.a));
        columns.push(vec![pair.conditional_log_hr.exp(); grid.times.len()]);
    }
    for (i, &t) in grid.times.iter().enumerate() {
        let mut row = vec![sig12(t)];
        row.extend(columns.iter().map(|column| sig12(column[i])));
        doc.rows.push(row);
    }
    doc
}

/// Marginal hazard-ratio curve families under alternative Weibull shapes and
/// population intercepts, next to the invariant conditional series.
pub fn hazard_ratio_families(
    model: &WeibullPHModel,
    pop: &Population,
    grid: &TimeGrid,
    scheme: &IntegrationScheme,
    shapes: &[f64],
    intercepts: &[f64],
) -> Result<CsvDoc, CliError> {
    if shapes.is_empty() && intercepts.is_empty() {
        return Err(CliError::config(
            "analysis.survival",
            "this figure needs shape_variants or intercept_variants",
        ));
    }
    let reference = model.model().reference().to_string();
    let comparators: Vec<String> = model
        .model()
        .treatment_ids()
        .filter(|id| *id != reference)
        .map(String::from)
        .collect();

    let mut doc = CsvDoc::default();
    doc.header.push("t".into());
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for b in &comparators {
        for &shape in shapes {
            let variant = WeibullPHModel::new(shape, model.model().clone())?;
            doc.header.push(format!(
                "{}_shape_{}",
                pair_column("marginal_hr", b, &reference),
                fmt_label(shape)
            ));
            columns.push(variant.marginal_hazard_ratio_curve(pop, &reference, b, grid, scheme)?);
        }
        for &mu in intercepts {
            let pop_mu = Population::new(mu, pop.covariates.clone())?;
            doc.header.push(format!(
                "{}_mu_{}",
                pair_column("marginal_hr", b, &reference),
                fmt_label(mu)
            ));
            columns.push(model.marginal_hazard_ratio_curve(&pop_mu, &reference, b, grid, scheme)?);
        }
        doc.header
            .push(pair_column("conditional_hr", b, &reference));
        let log_hr = model.conditional_log_hr(pop, &reference, b, scheme)?;
        columns.push(vec![log_hr.exp(); grid.len()]);
    }
    for (i, &t) in grid.times().iter().enumerate() {
        let mut row = vec![sig12(t)];
        row.extend(columns.iter().map(|column| sig12(column[i])));
        doc.rows.push(row);
    }
    Ok(doc)
}

/// Compact value label for column names.
fn fmt_label(value: f64) -> String {
    format!("{value}")
}

//! Estimand calculus on stratified two-by-two contingency tables.
//!
//! A [`ContingencyTable`] records event and non-event counts per treatment
//! and subgroup together with subgroup prevalence weights. Odds ratios are
//! formed from exact integer cross products, so each reported value is the
//! correctly rounded ratio of the recorded counts rather than the end of a
//! float drift chain. The first treatment in the table is the reference arm
//! for every odds ratio.
//!
//! Three effect summaries are available per comparison: the pooled marginal
//! odds ratio, the within-subgroup conditional odds ratio, and the
//! population-average conditional odds ratio, which averages the subgroup
//! log odds ratios with prevalence weights. The same machinery scores
//! subgroup-specific treatment choices in
//! [`ContingencyTable::optimal_stratified_policy`].

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::binary::Direction;
use crate::error::{Error, Result};

/// Largest tolerated deviation of the prevalence sum from one.
const PREVALENCE_SUM_TOLERANCE: f64 = 1e-9;

/// Event and non-event counts for one (treatment, subgroup) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub events: u64,
    pub non_events: u64,
}

impl Cell {
    /// Number of individuals in the cell.
    pub fn total(self) -> u64 {
        self.events + self.non_events
    }
}

/// A subgroup label together with its share of the target population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subgroup {
    label: String,
    prevalence: f64,
}

impl Subgroup {
    /// Builds a subgroup; the prevalence must lie in (0, 1].
    pub fn new(label: impl Into<String>, prevalence: f64) -> Result<Self> {
        let label = label.into();
        if label.is_empty() {
            return Err(Error::InvalidTable(
                "subgroup labels must be non-empty".into(),
            ));
        }
        if !prevalence.is_finite() || prevalence <= 0.0 || prevalence > 1.0 {
            return Err(Error::InvalidTable(format!(
                "subgroup `{label}` has prevalence {prevalence}, expected a value in (0, 1]"
            )));
        }
        Ok(Self { label, prevalence })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn prevalence(&self) -> f64 {
        self.prevalence
    }
}

/// What to do when an odds ratio meets a zero count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroCellPolicy {
    /// Reject the computation, naming the offending cell.
    #[default]
    Error,
    /// Add one half to every count entering a ratio, applied as 2c + 1 on
    /// doubled counts so the cross products stay integral. The doubling
    /// cancels between numerator and denominator.
    HaldaneCorrection,
}

/// Counts for every treatment and subgroup, with prevalence weights.
///
/// Rows are validated at construction: prevalences sum to one, every cell
/// holds at least one individual, and treatment ids are unique. Counts are
/// echoed back exactly by [`ContingencyTable::cell`] and
/// [`ContingencyTable::pooled`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    subgroups: Vec<Subgroup>,
    treatments: Vec<String>,
    counts: Vec<Vec<Cell>>,
    zero_cells: ZeroCellPolicy,
}

impl ContingencyTable {
    /// Builds a table from subgroup definitions and per-treatment cell rows.
    ///
    /// The first treatment is the reference arm. Each row of `counts` lists
    /// one treatment's cells in subgroup order.
    pub fn new(
        subgroups: Vec<Subgroup>,
        treatments: Vec<String>,
        counts: Vec<Vec<Cell>>,
    ) -> Result<Self> {
        if subgroups.is_empty() {
            return Err(Error::InvalidTable(
                "a table needs at least one subgroup".into(),
            ));
        }
        let mut labels = BTreeSet::new();
        for subgroup in &subgroups {
            if !labels.insert(subgroup.label.as_str()) {
                return Err(Error::InvalidTable(format!(
                    "duplicate subgroup label `{}`",
                    subgroup.label
                )));
            }
        }
        let prevalence_sum: f64 = subgroups.iter().map(|s| s.prevalence).sum();
        if (prevalence_sum - 1.0).abs() > PREVALENCE_SUM_TOLERANCE {
            return Err(Error::InvalidTable(format!(
                "subgroup prevalences sum to {prevalence_sum}, expected 1"
            )));
        }
        if treatments.is_empty() {
            return Err(Error::InvalidTable(
                "a table needs at least one treatment".into(),
            ));
        }
        let mut ids = BTreeSet::new();
        for id in &treatments {
            if id.is_empty() {
                return Err(Error::InvalidTable(
                    "treatment ids must be non-empty".into(),
                ));
            }
            if !ids.insert(id.as_str()) {
                return Err(Error::InvalidTable(format!("duplicate treatment id `{id}`")));
            }
        }
        if counts.len() != treatments.len() {
            return Err(Error::DimensionMismatch {
                what: "count rows",
                expected: treatments.len(),
                found: counts.len(),
            });
        }
        let mut grand_total: u128 = 0;
        for (row, id) in counts.iter().zip(&treatments) {
            if row.len() != subgroups.len() {
                return Err(Error::InvalidTable(format!(
                    "treatment `{id}` has {} cells, expected {}",
                    row.len(),
                    subgroups.len()
                )));
            }
            for (cell, subgroup) in row.iter().zip(&subgroups) {
                let total = cell.events as u128 + cell.non_events as u128;
                if total == 0 {
                    return Err(Error::InvalidTable(format!(
                        "cell for treatment `{id}` in subgroup `{}` has no individuals",
                        subgroup.label
                    )));
                }
                grand_total += total;
            }
        }
        if grand_total > u64::MAX as u128 {
            return Err(Error::InvalidTable(
                "total count across all cells exceeds the supported range".into(),
            ));
        }
        Ok(Self {
            subgroups,
            treatments,
            counts,
            zero_cells: ZeroCellPolicy::default(),
        })
    }

    /// Replaces the zero-cell policy (the default rejects zero counts).
    pub fn with_zero_cell_policy(mut self, policy: ZeroCellPolicy) -> Self {
        self.zero_cells = policy;
        self
    }

    pub fn subgroups(&self) -> &[Subgroup] {
        &self.subgroups
    }

    pub fn treatments(&self) -> &[String] {
        &self.treatments
    }

    /// The reference arm: the first treatment in the table.
    pub fn reference(&self) -> &str {
        &self.treatments[0]
    }

    pub fn zero_cell_policy(&self) -> ZeroCellPolicy {
        self.zero_cells
    }

    /// The recorded counts for one cell, echoed exactly.
    pub fn cell(&self, treatment: &str, subgroup: &str) -> Result<Cell> {
        let t = self.treatment_index(treatment)?;
        let s = self.subgroup_index(subgroup)?;
        Ok(self.counts[t][s])
    }

    /// Counts pooled across subgroups for one treatment.
    pub fn pooled(&self, treatment: &str) -> Result<Cell> {
        let t = self.treatment_index(treatment)?;
        Ok(self.pooled_cell(t))
    }

    /// Pooled-odds ratio of `b` versus `a` across all subgroups.
    pub fn marginal_or(&self, a: &str, b: &str) -> Result<f64> {
        let ai = self.treatment_index(a)?;
        let bi = self.treatment_index(b)?;
        self.odds_ratio(
            self.pooled_cell(ai),
            a,
            self.pooled_cell(bi),
            b,
            "overall",
        )
    }

    /// Within-subgroup odds ratio of `b` versus `a`.
    pub fn subgroup_conditional_or(&self, a: &str, b: &str, subgroup: &str) -> Result<f64> {
        let ai = self.treatment_index(a)?;
        let bi = self.treatment_index(b)?;
        let s = self.subgroup_index(subgroup)?;
        self.odds_ratio(
            self.counts[ai][s],
            a,
            self.counts[bi][s],
            b,
            &self.subgroups[s].label,
        )
    }

    /// Prevalence-weighted average of the subgroup log odds ratios, reported
    /// back on the odds ratio scale.
    pub fn population_conditional_or(&self, a: &str, b: &str) -> Result<f64> {
        let ai = self.treatment_index(a)?;
        let bi = self.treatment_index(b)?;
        let mut weighted_log = 0.0;
        for (s, subgroup) in self.subgroups.iter().enumerate() {
            let or = self.odds_ratio(
                self.counts[ai][s],
                a,
                self.counts[bi][s],
                b,
                &subgroup.label,
            )?;
            weighted_log += subgroup.prevalence * or.ln();
        }
        Ok(weighted_log.exp())
    }

    /// Picks the best treatment per subgroup by event odds and scores the
    /// resulting policy against the reference arm.
    ///
    /// Odds comparisons are exact on the raw counts, so zero cells never
    /// disturb the choice; ties go to the lexicographically smallest
    /// treatment id. The achieved marginal odds ratio pools the chosen
    /// cells, and the achieved conditional odds ratio averages the chosen
    /// subgroup log odds ratios with prevalence weights.
    pub fn optimal_stratified_policy(&self, direction: Direction) -> Result<StratifiedPolicy> {
        let mut choices = Vec::with_capacity(self.subgroups.len());
        let mut chosen = Vec::with_capacity(self.subgroups.len());
        for (s, subgroup) in self.subgroups.iter().enumerate() {
            let mut best = 0;
            for t in 1..self.treatments.len() {
                if self.replaces_choice(t, best, s, direction) {
                    best = t;
                }
            }
            chosen.push(best);
            choices.push(PolicyChoice {
                subgroup: subgroup.label.clone(),
                treatment: self.treatments[best].clone(),
            });
        }

        let mut pooled = Cell {
            events: 0,
            non_events: 0,
        };
        for (s, &t) in chosen.iter().enumerate() {
            pooled.events += self.counts[t][s].events;
            pooled.non_events += self.counts[t][s].non_events;
        }
        let reference = self.reference().to_string();
        let marginal_or = self.odds_ratio(
            self.pooled_cell(0),
            &reference,
            pooled,
            "policy",
            "overall",
        )?;

        let mut weighted_log = 0.0;
        for (s, &t) in chosen.iter().enumerate() {
            let or = self.odds_ratio(
                self.counts[0][s],
                &reference,
                self.counts[t][s],
                &self.treatments[t],
                &self.subgroups[s].label,
            )?;
            weighted_log += self.subgroups[s].prevalence * or.ln();
        }

        Ok(StratifiedPolicy {
            choices,
            marginal_or,
            conditional_or: weighted_log.exp(),
        })
    }

    /// Whether candidate `t` displaces the incumbent `best` in subgroup `s`.
    fn replaces_choice(&self, t: usize, best: usize, s: usize, direction: Direction) -> bool {
        let candidate = self.counts[t][s];
        let incumbent = self.counts[best][s];
        let lhs = candidate.events as u128 * incumbent.non_events as u128;
        let rhs = incumbent.events as u128 * candidate.non_events as u128;
        let improves = match direction {
            Direction::LowerIsBetter => lhs < rhs,
            Direction::HigherIsBetter => lhs > rhs,
        };
        improves || (lhs == rhs && self.treatments[t] < self.treatments[best])
    }

    /// Odds ratio of cell `b` versus cell `a` with exact cross products and
    /// one final rounding at the division.
    fn odds_ratio(
        &self,
        a: Cell,
        a_treatment: &str,
        b: Cell,
        b_treatment: &str,
        subgroup: &str,
    ) -> Result<f64> {
        let (ea, na) = self.ratio_counts(a, a_treatment, subgroup)?;
        let (eb, nb) = self.ratio_counts(b, b_treatment, subgroup)?;
        Ok((eb * na) as f64 / (nb * ea) as f64)
    }

    /// The (events, non_events) pair entering a ratio, doubled and offset
    /// when the continuity correction is active.
    fn ratio_counts(&self, cell: Cell, treatment: &str, subgroup: &str) -> Result<(u128, u128)> {
        match self.zero_cells {
            ZeroCellPolicy::Error => {
                if cell.events == 0 || cell.non_events == 0 {
                    return Err(Error::ZeroCell {
                        treatment: treatment.to_string(),
                        subgroup: subgroup.to_string(),
                    });
                }
                Ok((cell.events as u128, cell.non_events as u128))
            }
            ZeroCellPolicy::HaldaneCorrection => Ok((
                2 * cell.events as u128 + 1,
                2 * cell.non_events as u128 + 1,
            )),
        }
    }

    fn pooled_cell(&self, t: usize) -> Cell {
        let mut pooled = Cell {
            events: 0,
            non_events: 0,
        };
        for cell in &self.counts[t] {
            pooled.events += cell.events;
            pooled.non_events += cell.non_events;
        }
        pooled
    }

    fn treatment_index(&self, id: &str) -> Result<usize> {
        self.treatments
            .iter()
            .position(|t| t == id)
            .ok_or_else(|| Error::UnknownTreatment(id.to_string()))
    }

    fn subgroup_index(&self, label: &str) -> Result<usize> {
        self.subgroups
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::InvalidTable(format!("unknown subgroup `{label}`")))
    }
}

/// The treatment chosen for one subgroup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyChoice {
    pub subgroup: String,
    pub treatment: String,
}

/// A subgroup-to-treatment assignment with its achieved odds ratios versus
/// the reference arm. Choices are listed in subgroup declaration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedPolicy {
    pub choices: Vec<PolicyChoice>,
    pub marginal_or: f64,
    pub conditional_or: f64,
}

impl StratifiedPolicy {
    /// The treatment assigned to one subgroup, if the label is known.
    pub fn treatment_for(&self, subgroup: &str) -> Option<&str> {
        self.choices
            .iter()
            .find(|c| c.subgroup == subgroup)
            .map(|c| c.treatment.as_str())
    }
}

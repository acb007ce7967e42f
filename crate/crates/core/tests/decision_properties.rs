//! Randomized invariants of the decision-support layer: zero effect
//! modification never flags conflicts, every conflicting pair carries a
//! sign-change witness, calibrated intercepts round-trip to the requested
//! baseline risk, and sweep conditional columns are bitwise constant.

use estimand_core::binary::average_probability;
use estimand_core::decision::{
    baseline_risk_sweep, conflict_report, intercept_from_baseline_risk, PairStatus,
};
use estimand_core::{
    CovariateDistribution, Direction, IntegrationScheme, LinkFunction, Marginal, OutcomeModel,
    Population, TreatmentArm,
};
use proptest::prelude::*;

fn marginal() -> impl Strategy<Value = Marginal> {
    prop_oneof![
        (-1.0..0.0f64, 0.2..1.0f64).prop_map(|(lo, width)| Marginal::Uniform { lo, hi: lo + width }),
        (0.1..0.9f64).prop_map(|prevalence| Marginal::Bernoulli { prevalence }),
    ]
}

#[derive(Debug, Clone)]
struct Scenario {
    mu: f64,
    pop_intercept: f64,
    beta: Vec<f64>,
    effect_b: f64,
    effect_c: f64,
    interaction_b: Vec<f64>,
    interaction_c: Vec<f64>,
    covariates: CovariateDistribution,
}

fn scenario(range: f64, dim: usize) -> impl Strategy<Value = Scenario> {
    (
        -range..range,
        -range..range,
        proptest::collection::vec(-range..range, dim),
        -range..range,
        -range..range,
        proptest::collection::vec(-range..range, dim),
        proptest::collection::vec(-range..range, dim),
        proptest::collection::vec(marginal(), dim),
    )
        .prop_map(
            |(mu, pop_intercept, beta, effect_b, effect_c, interaction_b, interaction_c, marginals)| {
                Scenario {
                    mu,
                    pop_intercept,
                    beta,
                    effect_b,
                    effect_c,
                    interaction_b,
                    interaction_c,
                    covariates: CovariateDistribution::product(marginals).unwrap(),
                }
            },
        )
}

fn build(scenario: &Scenario, link: LinkFunction) -> (OutcomeModel, Population, IntegrationScheme) {
    let model = OutcomeModel::new(
        link,
        scenario.mu,
        scenario.beta.clone(),
        vec![
            TreatmentArm::reference("A", scenario.beta.len()),
            TreatmentArm::new("B", scenario.interaction_b.clone(), scenario.effect_b),
            TreatmentArm::new("C", scenario.interaction_c.clone(), scenario.effect_c),
        ],
    )
    .unwrap();
    let pop = Population::new(scenario.pop_intercept, scenario.covariates.clone()).unwrap();
    let scheme = IntegrationScheme::default_for(&pop.covariates);
    (model, pop, scheme)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn zero_effect_modification_never_flags_conflicts(scenario in scenario(3.0, 2)) {
        let mut scenario = scenario;
        scenario.interaction_b.iter_mut().for_each(|v| *v = 0.0);
        scenario.interaction_c.iter_mut().for_each(|v| *v = 0.0);
        let (model, pop, scheme) = build(&scenario, LinkFunction::Logit);
        let report =
            conflict_report(&model, &pop, &[], Direction::LowerIsBetter, &scheme).unwrap();
        prop_assert!(!report.conflict);
        for pair in &report.pairs {
            prop_assert!(
                pair.status != PairStatus::Conflict,
                "pair {}{} flagged: {:?}",
                pair.a,
                pair.b,
                pair.status
            );
        }
    }

    #[test]
    fn conflicting_pairs_always_carry_witnesses(scenario in scenario(5.0, 1)) {
        let (model, pop, scheme) = build(&scenario, LinkFunction::Logit);
        let report =
            conflict_report(&model, &pop, &[], Direction::LowerIsBetter, &scheme).unwrap();
        for pair in &report.pairs {
            if pair.status == PairStatus::Conflict {
                let witnesses = report
                    .witnesses
                    .iter()
                    .find(|w| w.a == pair.a && w.b == pair.b)
                    .expect("conflicting pair missing from witness list");
                prop_assert!(
                    !witnesses.witnesses.is_empty(),
                    "pair {}{} has no witness",
                    pair.a,
                    pair.b
                );
            }
        }
    }

    #[test]
    fn calibrated_intercepts_round_trip(
        scenario in scenario(1.5, 1),
        target in 0.1..0.9f64,
        link_pick in 0usize..3,
    ) {
        let link = [LinkFunction::Logit, LinkFunction::Probit, LinkFunction::Cloglog][link_pick];
        let (model, pop, scheme) = build(&scenario, link);
        let mu = intercept_from_baseline_risk(&model, &pop, "A", target, &scheme).unwrap();
        let calibrated = Population::new(mu, pop.covariates.clone()).unwrap();
        let achieved = average_probability(&model, &calibrated, "A", &scheme).unwrap();
        prop_assert!(
            (achieved - target).abs() <= 1e-8,
            "target {target}, achieved {achieved}"
        );
    }

    #[test]
    fn sweep_conditional_columns_are_bitwise_constant(scenario in scenario(2.5, 1)) {
        let (model, pop, scheme) = build(&scenario, LinkFunction::Logit);
        let grid = [-3.0, -1.5, 0.0, 1.5, 3.0];
        let sweep = baseline_risk_sweep(&model, &pop, Some(&grid), &[], &scheme).unwrap();
        for series in &sweep.series {
            let first = series.conditional[0].to_bits();
            for value in &series.conditional {
                prop_assert_eq!(value.to_bits(), first, "pair {}{}", &series.a, &series.b);
            }
        }
    }
}

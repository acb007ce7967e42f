//! Randomized invariants of the individual-level model arithmetic: the
//! collapsibility map inverts between swapped arms, it is affine in the
//! event probability for collapsible links without interactions, and the
//! linear predictor is additive in the arm effect.

use estimand_core::{LinkFunction, OutcomeModel, TreatmentArm};
use proptest::prelude::*;

fn all_links() -> impl Strategy<Value = LinkFunction> {
    prop_oneof![
        Just(LinkFunction::Logit),
        Just(LinkFunction::Probit),
        Just(LinkFunction::Cloglog),
        Just(LinkFunction::Log),
        Just(LinkFunction::Identity),
    ]
}

fn collapsible_links() -> impl Strategy<Value = LinkFunction> {
    prop_oneof![Just(LinkFunction::Identity), Just(LinkFunction::Log)]
}

/// Per-coefficient half-width keeping every linear predictor, and every
/// collapsibility-map output, inside the link's domain for covariates in
/// [-1, 1].
fn coefficient_budget(link: LinkFunction) -> f64 {
    match link {
        LinkFunction::Identity => 0.03,
        LinkFunction::Log => 0.12,
        _ => 0.25,
    }
}

fn intercept_range(link: LinkFunction) -> std::ops::Range<f64> {
    match link {
        LinkFunction::Identity => 0.42..0.58,
        LinkFunction::Log => -2.2..-1.6,
        _ => -0.8..0.8,
    }
}

fn probability_range(link: LinkFunction) -> std::ops::Range<f64> {
    match link {
        LinkFunction::Identity => 0.3..0.6,
        LinkFunction::Log => 0.05..0.5,
        _ => 0.05..0.95,
    }
}

#[derive(Debug, Clone)]
struct TwoArmCase {
    link: LinkFunction,
    mu: f64,
    beta: Vec<f64>,
    interaction: Vec<f64>,
    effect: f64,
    x: Vec<f64>,
    pi: f64,
}

fn two_arm_case(
    link_strategy: impl Strategy<Value = LinkFunction>,
    zero_interaction: bool,
) -> impl Strategy<Value = TwoArmCase> {
    (link_strategy, 1usize..=2).prop_flat_map(move |(link, dim)| {
        let c = coefficient_budget(link);
        (
            intercept_range(link),
            proptest::collection::vec(-c..c, dim),
            proptest::collection::vec(-c..c, dim),
            -2.0 * c..2.0 * c,
            proptest::collection::vec(-1.0..1.0f64, dim),
            probability_range(link),
        )
            .prop_map(
                move |(mu, beta, mut interaction, effect, x, pi)| {
                    if zero_interaction {
                        interaction.iter_mut().for_each(|v| *v = 0.0);
                    }
                    TwoArmCase {
                        link,
                        mu,
                        beta,
                        interaction,
                        effect,
                        x,
                        pi,
                    }
                },
            )
    })
}

fn build(case: &TwoArmCase) -> OutcomeModel {
    OutcomeModel::new(
        case.link,
        case.mu,
        case.beta.clone(),
        vec![
            TreatmentArm::reference("A", case.beta.len()),
            TreatmentArm::new("B", case.interaction.clone(), case.effect),
        ],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn ccf_round_trips_between_swapped_arms(case in two_arm_case(all_links(), false)) {
        let model = build(&case);
        let over = model.ccf("B", "A", case.pi, &case.x);
        prop_assume!(over.is_ok());
        let back = model.ccf("A", "B", over.unwrap(), &case.x);
        prop_assume!(back.is_ok());
        prop_assert!((back.unwrap() - case.pi).abs() <= 1e-10);
    }

    #[test]
    fn collapsible_links_have_affine_collapsibility_maps(
        case in two_arm_case(collapsible_links(), true),
    ) {
        let model = build(&case);
        let grid = match case.link {
            LinkFunction::Identity => [0.2, 0.35, 0.55],
            _ => [0.08, 0.2, 0.4],
        };
        let values: Vec<f64> = grid
            .iter()
            .map(|&pi| model.ccf("A", "B", pi, &case.x).unwrap())
            .collect();
        let slope_near = (values[1] - values[0]) / (grid[1] - grid[0]);
        let slope_far = (values[2] - values[0]) / (grid[2] - grid[0]);
        prop_assert!(
            (slope_near - slope_far).abs() <= 1e-10,
            "slopes {slope_near} vs {slope_far}"
        );
    }

    #[test]
    fn linear_predictors_shift_exactly_with_the_arm_effect(
        case in two_arm_case(all_links(), false),
        delta in -1.0..1.0f64,
    ) {
        let base = build(&case);
        let mut shifted_case = case.clone();
        shifted_case.effect += delta;
        let shifted = build(&shifted_case);
        let before = base.linear_predictor("B", &case.x).unwrap();
        let after = shifted.linear_predictor("B", &case.x).unwrap();
        prop_assert!(((after - before) - delta).abs() <= 1e-12);
    }
}

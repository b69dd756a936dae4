use allee_core::analysis::{
    critical_line_r0, fixed_points, is_bistable, predicted_sustainable, Stability,
};
use allee_core::ode::{run_to_steady_state, IntegratorConfig};
use allee_core::sweep::{is_sustainable, region_map, Axis};
use allee_core::{validate_params, GrowthKind, Model, ModelParams, State, StrategyRule};
use proptest::prelude::*;

fn model(allee: f64, e_d: f64, rule: StrategyRule) -> Model {
    let p = ModelParams {
        allee,
        e_d_hat: e_d,
        ..ModelParams::default()
    };
    Model::new(validate_params(p).unwrap(), GrowthKind::AlleeLogistic, rule)
}

#[test]
fn stable_points_attract_and_saddles_repel() {
    let cfg = IntegratorConfig::default();
    for rule in [StrategyRule::Replicator, StrategyRule::KnowledgeFeedback] {
        let m = model(0.1, 1.5, rule);
        for p in fixed_points(&m.params, rule).unwrap() {
            if p.r_star == 0.0 {
                continue;
            }
            let nudged = State::new(p.r_star + 1e-3, (p.x_star - 1e-3).max(0.0));
            let end = run_to_steady_state(&m, nudged, &cfg).unwrap().final_state;
            let dist = (end.r - p.r_star).abs().max((end.x - p.x_star).abs());
            match p.classification {
                Stability::Stable => assert!(dist < 1e-6, "{:?} {dist}", p.label),
                _ => assert!(dist > 1e-2, "{:?} {dist}", p.label),
            }
        }
    }
}

#[test]
fn region_map_cells_equal_the_predicate() {
    let a = Axis::left_open(0.0, 0.4, 37);
    let e = Axis::left_open(1.0, 3.0, 41);
    for rule in [StrategyRule::Replicator, StrategyRule::KnowledgeFeedback] {
        let map = region_map(0.5, &a, &e, rule).unwrap();
        for (allee, e_d, b) in map.cells() {
            let p = ModelParams {
                allee,
                e_d_hat: e_d,
                ..ModelParams::default()
            };
            assert_eq!(b, is_bistable(&p, rule));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn critical_line_predicts_fate_away_from_the_line(r0 in 0.0f64..1.0, x0 in 0.0f64..1.0) {
        let m = model(0.1, 1.5, StrategyRule::Replicator);
        prop_assume!((r0 - critical_line_r0(x0, &m.params).unwrap()).abs() > 0.03);
        // the all-cooperator edge is invariant and never collapses from above s_C-
        prop_assume!(x0 < 0.99);
        let end = run_to_steady_state(&m, State::new(r0, x0), &IntegratorConfig::default()).unwrap();
        let predicted = predicted_sustainable(State::new(r0, x0), &m.params).unwrap();
        prop_assert_eq!(is_sustainable(end.final_state.r), predicted);
    }
}

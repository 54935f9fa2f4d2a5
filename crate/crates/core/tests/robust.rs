//! Robust envelopes against sampled uncertainty and the cutting-plane
//! method.

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rdoe_conic::NormKind;
use rdoe_core::acpf::{customer_powers, passive_forecast, solve_acpf, audit_voltages};
use rdoe_core::lintopf::*;
use rdoe_core::robustrc::*;
use rdoe_core::tsro::*;
use rdoe_core::uncertainty::{Component, UncertaintySpec};

const MODES: [RobustMode; 3] = [RobustMode::Impedance, RobustMode::Demand, RobustMode::Bilinear];

fn objective(fr: &FeasibleRegion, model: &rdoe_core::uncertainty::UncertaintyModel, mode: RobustMode) -> f64 {
    let res = solve_rdoe(fr, model, mode, &EnvelopeOptions::default()).unwrap();
    assert!(res.is_optimal(), "{mode}: {}", res.status);
    res.objective_kw.unwrap()
}

#[test]
fn robust_solutions_survive_sampling() {
    let net = twobus();
    let fr = region(&net);
    let model = twobus_model(&net, 0.1, 0.2);
    for mode in MODES {
        let res = solve_rdoe(&fr, &model, mode, &EnvelopeOptions::default()).unwrap();
        let worst = sampled_worst_violation(&fr, &model, mode, &res, 10_000, 42).unwrap();
        assert!(worst <= 1e-7, "{mode}: {worst}");
    }
}

#[test]
fn deterministic_envelope_is_violated_under_uncertainty() {
    let net = twobus();
    let fr = region(&net);
    let model = twobus_model(&net, 0.1, 0.2);
    let det = solve_ddoe(&fr, &EnvelopeOptions::default()).unwrap();
    let worst = sampled_worst_violation(&fr, &model, RobustMode::Impedance, &det, 10_000, 42).unwrap();
    assert!(worst > 1e-4, "{worst}");
}

#[test]
fn larger_sets_are_more_conservative() {
    let net = twobus();
    let fr = region(&net);
    for mode in MODES {
        let mut last = f64::NEG_INFINITY;
        for r in [0.0, 0.025, 0.05, 0.1] {
            let obj = objective(&fr, &twobus_model(&net, r, 2.0 * r), mode);
            assert!(obj > last - 1e-9, "{mode} at {r}: {obj} vs {last}");
            last = obj;
        }
    }
}

#[test]
fn bilinear_dominates_single_sources() {
    let net = twobus();
    let fr = region(&net);
    let model = twobus_model(&net, 0.05, 0.2);
    let bil = objective(&fr, &model, RobustMode::Bilinear);
    assert!(bil >= objective(&fr, &model, RobustMode::Impedance) - 1e-7);
    assert!(bil >= objective(&fr, &model, RobustMode::Demand) - 1e-7);
}

#[test]
fn nested_norm_balls_give_ordered_envelopes() {
    // L1 ball inside L2 ball inside box of the same radius.
    let net = twobus();
    let fr = region(&net);
    let mut objs = Vec::new();
    for norm in [NormKind::L1, NormKind::L2, NormKind::LInf] {
        let mut spec = UncertaintySpec::bundled("twobus").unwrap();
        spec.component_mut(Component::Impedance).unwrap().ball.norm = norm;
        spec.component_mut(Component::Impedance).unwrap().ball.radius = 0.1;
        objs.push(objective(&fr, &spec.resolve(&net).unwrap(), RobustMode::Impedance));
    }
    assert!(objs[0] <= objs[1] + 1e-7 && objs[1] <= objs[2] + 1e-7, "{objs:?}");
}

#[test]
fn intersection_is_less_conservative_than_either_ball() {
    let net = twobus();
    let fr = region(&net);
    let build = |second: bool| {
        let mut spec = UncertaintySpec::bundled("twobus").unwrap();
        let imp = spec.component_mut(Component::Impedance).unwrap();
        imp.ball.radius = 0.1;
        if second {
            let mut b = imp.ball.clone();
            b.norm = NormKind::L1;
            b.radius = 0.15;
            imp.second_ball = Some(b);
        }
        spec.resolve(&net).unwrap()
    };
    let boxed = objective(&fr, &build(false), RobustMode::Impedance);
    let both_model = build(true);
    let both = objective(&fr, &both_model, RobustMode::Impedance);
    assert!(both <= boxed + 1e-7);
    let res = solve_rdoe(&fr, &both_model, RobustMode::Impedance, &EnvelopeOptions::default()).unwrap();
    let worst = sampled_worst_violation(&fr, &both_model, RobustMode::Impedance, &res, 5_000, 7).unwrap();
    assert!(worst <= 1e-7);
}

#[test]
fn zero_radius_reduces_to_deterministic_on_a_feeder() {
    let net = feeder(10, 4);
    let fr = region(&net);
    let det = solve_ddoe(&fr, &EnvelopeOptions::default()).unwrap().objective_kw.unwrap();
    let model = feeder_model(&net, 0.0, 0.0);
    for mode in MODES {
        assert!((objective(&fr, &model, mode) - det).abs() <= 1e-6, "{mode}");
    }
}

#[test]
fn feeder_robust_solutions_survive_sampling() {
    let net = feeder(4, 12);
    let fr = region(&net);
    let model = feeder_model(&net, 0.1, 0.2);
    for mode in MODES {
        let res = solve_rdoe(&fr, &model, mode, &EnvelopeOptions::default()).unwrap();
        assert!(res.is_optimal());
        let worst = sampled_worst_violation(&fr, &model, mode, &res, 2_000, 3).unwrap();
        assert!(worst <= 1e-7, "{mode}: {worst}");
    }
}

#[test]
fn robust_envelope_holds_in_exact_power_flow() {
    // The exact flow may exceed limits by the linearization error only.
    let net = twobus();
    let fr = region(&net);
    let model = twobus_model(&net, 0.1, 0.0);
    let res = solve_rdoe(&fr, &model, RobustMode::Impedance, &EnvelopeOptions::default()).unwrap();
    let imp = model.impedance.as_ref().unwrap();
    let (p2, q2) = passive_forecast(&net);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..200 {
        let theta = imp.set.sample(&mut rng).unwrap();
        let moved = imp.params.apply_to_network(&net, &theta).unwrap();
        let pf = solve_acpf(&moved, &customer_powers(&moved, &res.p1(), &res.q1(), &p2, &q2), 1e-10, 200).unwrap();
        worst = worst.max(audit_voltages(&moved, &pf).worst_excess);
    }
    assert!(worst < 0.005, "{worst}");
}

#[test]
fn q2_cannot_be_both_controlled_and_uncertain() {
    let net = twobus();
    let fr = region(&net);
    let mut spec = UncertaintySpec::bundled("twobus").unwrap();
    spec.q2 = spec.p2.clone();
    let model = spec.resolve(&net).unwrap();
    let opts = EnvelopeOptions {
        q_control: QControl::All,
        ..EnvelopeOptions::default()
    };
    assert!(solve_rdoe(&fr, &model, RobustMode::Demand, &opts).is_err());
}

#[test]
fn cutting_plane_matches_closed_form() {
    let net = twobus();
    let fr = region(&net);
    for gamma in [0.025, 0.05, 0.1] {
        let model = twobus_model(&net, gamma, 0.0);
        let rc = objective(&fr, &model, RobustMode::Impedance);
        let (res, trace) = tsro_solve(&fr, &model, &EnvelopeOptions::default(), &TsroOptions::default()).unwrap();
        assert_eq!(trace.termination, Termination::Converged);
        let got = res.objective_kw.unwrap();
        assert!((got - rc).abs() <= 1e-4 * rc.abs(), "{gamma}: {got} vs {rc}");
        // Exporting less each round: the sum of p1 never decreases.
        for w in trace.rounds.windows(2) {
            assert!(w[1].master_objective_kw.unwrap() >= w[0].master_objective_kw.unwrap() - 1e-9);
        }
        for r in &trace.rounds {
            assert!(r.violation >= 0.0);
        }
        assert!(trace.rounds.last().unwrap().violation <= 1e-7);
    }
}

#[test]
fn subproblem_separates_deterministic_from_robust() {
    let net = twobus();
    let fr = region(&net);
    let model = twobus_model(&net, 0.1, 0.0);
    let imp = model.impedance.as_ref().unwrap();
    let opts = EnvelopeOptions::default();
    let w_of = |res: &EnvelopeResult| fr.w_of(&res.p1(), &res.q1());
    let det = solve_ddoe(&fr, &opts).unwrap();
    let (v_det, _) = tsro_subproblem(&fr, imp, &w_of(&det), &opts).unwrap();
    assert!(v_det > 1e-6, "{v_det}");
    let rob = solve_rdoe(&fr, &model, RobustMode::Impedance, &opts).unwrap();
    let (v_rob, _) = tsro_subproblem(&fr, imp, &w_of(&rob), &opts).unwrap();
    assert!(v_rob <= 1e-7, "{v_rob}");
}

#[test]
fn worst_vertex_scenario_reproduces_the_robust_objective() {
    let net = twobus();
    let fr = region(&net);
    let model = twobus_model(&net, 0.05, 0.0);
    let imp = model.impedance.as_ref().unwrap();
    let opts = EnvelopeOptions::default();
    let scenarios: Vec<_> = box_vertices(imp)
        .unwrap()
        .iter()
        .map(|t| imp.params.apply(&fr.system.e, t))
        .collect();
    let all = tsro_master(&fr, &scenarios, &opts).unwrap().objective_kw.unwrap();
    let rc = objective(&fr, &model, RobustMode::Impedance);
    assert!((all - rc).abs() <= 1e-4 * rc.abs(), "{all} vs {rc}");
}

#[test]
fn too_many_box_entries_are_rejected() {
    let net = feeder(6, 1);
    let fr = region(&net);
    let text = r#"{"impedance": {"parameters": {"entries": "all"}, "radius": 0.05, "norm": "inf"}}"#;
    let model = UncertaintySpec::from_json(text).unwrap().resolve(&net).unwrap();
    assert!(tsro_solve(&fr, &model, &EnvelopeOptions::default(), &TsroOptions::default()).is_err());
}

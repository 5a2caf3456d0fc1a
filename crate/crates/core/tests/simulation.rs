use ardent_core::rng::seeded;
use ardent_core::sim::{
    binary_validation_scenario, closed_form_accuracy, run_experiment, run_with_system, ArmSpec, ExperimentSpec,
    OrderingRule, ScenarioSpec, Strategy, System,
};
use ardent_core::{FilterConfig, FinalActionRule, MetaPolicyState};

fn monte_carlo(s: &ScenarioSpec, arm: ArmSpec, n: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let m = run_experiment(
        s,
        &ExperimentSpec {
            arm,
            n_episodes: n,
            seed,
            window: 100,
        },
    )
    .unwrap();
    (0..s.dims.n_contexts)
        .map(|c| (m.accuracy(Some(c), 0..n).unwrap(), m.count(Some(c), 0..n)))
        .unzip()
}

fn assert_within_3se(s: &ScenarioSpec, arm: ArmSpec, strategy: Strategy) {
    let exact = closed_form_accuracy(s, &strategy).unwrap();
    let (mc, counts) = monte_carlo(s, arm.clone(), 20_000, 42);
    for c in 0..exact.len() {
        let p = exact[c];
        let se = (p * (1.0 - p) / counts[c] as f64).sqrt();
        // a degenerate cell must match exactly
        assert!((mc[c] - p).abs() <= 3.0 * se, "{arm:?} context {c}: {} vs {p} (se {se})", mc[c]);
    }
}

#[test]
fn fixed_strategies_match_closed_form() {
    let s = binary_validation_scenario();
    assert_within_3se(&s, ArmSpec::Human, Strategy::HumanAlone);
    assert_within_3se(&s, ArmSpec::Machine, Strategy::MachineAlone);
    assert_within_3se(&s, ArmSpec::Random, Strategy::Explain(OrderingRule::UniformRandom));
    assert_within_3se(&s, ArmSpec::Oracle, Strategy::Explain(OrderingRule::Oracle));
    assert_within_3se(&s, ArmSpec::Fixed { favourite: 0 }, Strategy::Explain(OrderingRule::Fixed(0)));
    assert_within_3se(&s, ArmSpec::Fixed { favourite: 1 }, Strategy::Explain(OrderingRule::Fixed(1)));
}

#[test]
fn sampling_humans_match_closed_form() {
    let mut s = binary_validation_scenario();
    s.human.final_rule = FinalActionRule::Sample;
    assert_within_3se(&s, ArmSpec::Oracle, Strategy::Explain(OrderingRule::Oracle));
    assert_within_3se(&s, ArmSpec::Random, Strategy::Explain(OrderingRule::UniformRandom));
}

#[test]
fn threshold_humans_match_closed_form() {
    let mut s = binary_validation_scenario();
    s.human.max_views = 2;
    s.human.confidence_threshold = Some(0.9);
    s.human.final_rule = FinalActionRule::Sample;
    assert_within_3se(&s, ArmSpec::Random, Strategy::Explain(OrderingRule::UniformRandom));
    assert_within_3se(&s, ArmSpec::Fixed { favourite: 0 }, Strategy::Explain(OrderingRule::Fixed(0)));
}

#[test]
fn arms_share_the_world() {
    // Same seed, different arms: contexts and proposals coincide.
    let s = binary_validation_scenario();
    let spec = |arm| ExperimentSpec {
        arm,
        n_episodes: 300,
        seed: 9,
        window: 50,
    };
    let a = run_experiment(&s, &spec(ArmSpec::Human)).unwrap();
    let b = run_experiment(&s, &spec(ArmSpec::Random)).unwrap();
    let c = run_experiment(
        &s,
        &spec(ArmSpec::Ardent {
            filter: FilterConfig {
                n_particles: 20,
                ..Default::default()
            },
        }),
    )
    .unwrap();
    assert_eq!(a.contexts(), b.contexts());
    assert_eq!(a.contexts(), c.contexts());
}

#[test]
fn experiments_are_reproducible_and_resumable() {
    let s = binary_validation_scenario();
    let cfg = FilterConfig {
        n_particles: 50,
        ..Default::default()
    };
    let spec = ExperimentSpec {
        arm: ArmSpec::Ardent { filter: cfg.clone() },
        n_episodes: 200,
        seed: 4,
        window: 50,
    };
    assert_eq!(run_experiment(&s, &spec).unwrap(), run_experiment(&s, &spec).unwrap());

    let state = MetaPolicyState::ardent(cfg, s.dims, &mut seeded(0, 0)).unwrap();
    let (m1, sys1) = run_with_system(&s, System::Assisted(state.clone()), &spec).unwrap();
    let (m2, sys2) = run_with_system(&s, System::Assisted(state), &spec).unwrap();
    assert_eq!(m1, m2);
    assert_eq!(sys1, sys2);
}

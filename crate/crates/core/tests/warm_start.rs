use ardent_core::rng::seeded;
use ardent_core::sim::binary_validation_scenario;
use ardent_core::warmstart::run_warm_start;
use ardent_core::{
    init_particles, posterior_mean, warm_start_particles, FilterConfig, HumanPolicyEstimate, InteractionRecord,
    MetaPolicyState, TabularPolicy, WarmStartConfig,
};

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

fn random_arm_logs(seed: u64, n: usize) -> Vec<InteractionRecord> {
    let s = binary_validation_scenario();
    let mut env = seeded(seed, 0);
    let mut pol = seeded(seed, 1);
    let mut state = MetaPolicyState::Random { dims: s.dims };
    (0..n)
        .map(|_| {
            let (r, next) = ardent_core::sim::simulate_episode(&s, state.clone(), &mut env, &mut pol).unwrap();
            state = next;
            r.record
        })
        .collect()
}

fn b1_from(logs: &[InteractionRecord], cfg: &FilterConfig) -> TabularPolicy {
    let dims = binary_validation_scenario().dims;
    let mut est = HumanPolicyEstimate::for_dims(&dims, cfg.human_policy_smoothing).unwrap();
    for r in logs {
        est.observe(r.context, r.intended).unwrap();
    }
    est.to_policy()
}

#[test]
fn empty_logs_sample_the_prior() {
    let dims = binary_validation_scenario().dims;
    let cfg = FilterConfig {
        n_particles: 2000,
        ..Default::default()
    };
    let warm = warm_start_particles(&cfg, dims, &[], &TabularPolicy::uniform(2, 2), &mut seeded(1, 0)).unwrap();
    let prior = init_particles(&cfg, dims, &mut seeded(2, 0)).unwrap();
    let d = dims.len();
    // c(0.01)·√((n+m)/(nm)) with n = m = 2000
    let critical = 1.628 * (2.0 / 2000.0f64).sqrt();
    for j in 0..d {
        let a: Vec<f64> = (0..2000).map(|i| warm.theta(i)[j]).collect();
        let b: Vec<f64> = (0..2000).map(|i| prior.theta(i)[j]).collect();
        let stat = ks_statistic(a, b);
        assert!(stat < critical, "entry {j}: D = {stat} >= {critical}");
    }
    assert!(warm.weights().iter().all(|&w| w == 1.0 / 2000.0));
}

#[test]
fn logged_random_explanations_identify_the_persuasive_explainer() {
    let cfg = FilterConfig::default();
    let dims = binary_validation_scenario().dims;
    let seeds = 20;
    let mut wins = 0;
    for seed in 0..seeds {
        let logs = random_arm_logs(100 + seed, 500);
        let b1 = b1_from(&logs, &cfg);
        let out = run_warm_start(&cfg, &WarmStartConfig::default(), dims, &logs, &b1, &mut seeded(seed, 9)).unwrap();
        assert!(
            (0.1..=0.7).contains(&out.acceptance_rate),
            "seed {seed}: acceptance {}",
            out.acceptance_rate
        );
        let q = posterior_mean(&out.particles);
        wins += (q.get(1, 1, 1) / q.get(1, 1, 0) > q.get(0, 1, 1) / q.get(0, 1, 0)) as usize;
    }
    assert!(wins * 10 >= seeds as usize * 9, "{wins}/{seeds}");
}

#[test]
fn warm_start_is_seeded() {
    let cfg = FilterConfig {
        n_particles: 100,
        ..Default::default()
    };
    let dims = binary_validation_scenario().dims;
    let logs = random_arm_logs(5, 100);
    let b1 = b1_from(&logs, &cfg);
    let a = warm_start_particles(&cfg, dims, &logs, &b1, &mut seeded(3, 0)).unwrap();
    let b = warm_start_particles(&cfg, dims, &logs, &b1, &mut seeded(3, 0)).unwrap();
    assert_eq!(a, b);
}

use ardent_core::filter::first_stage_weights;
use ardent_core::persist::particle_set_digest;
use ardent_core::rng::seeded;
use ardent_core::sim::binary_validation_scenario;
use ardent_core::{
    draw_action, effective_sample_size, final_belief, init_particles, posterior_mean, posterior_update, Belief, Dims,
    FilterConfig, FinalActionRule, InteractionRecord, ParticleSet,
};
use proptest::prelude::*;
use proptest::sample::subsequence;

#[derive(Clone, Debug)]
struct Case {
    dims: Dims,
    ps: ParticleSet,
    record: InteractionRecord,
    b1: Belief,
    alpha: f64,
    seed: u64,
}

fn case() -> impl Strategy<Value = Case> {
    (1usize..4, 1usize..3, 2usize..4, 1usize..40)
        .prop_flat_map(|(e, x, a, n)| {
            let dims = Dims::new(e, x, a).unwrap();
            (
                Just(dims),
                prop::collection::vec(-3.0f64..3.0, n * dims.len()),
                prop::collection::vec(0.0f64..1.0, n),
                0..x,
                subsequence((0..e).collect::<Vec<_>>(), 0..=e).prop_shuffle(),
                0..a,
                prop::collection::vec(0.05f64..1.0, a),
                0.5f64..0.999,
                any::<u64>(),
            )
        })
        .prop_filter_map("some weight must be positive", |(dims, thetas, w, x, shown, fin, b, alpha, seed)| {
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return None;
            }
            let weights: Vec<f64> = w.iter().map(|v| v / total).collect();
            Some(Case {
                dims,
                ps: ParticleSet::new(dims, thetas, weights).ok()?,
                record: InteractionRecord {
                    context: x,
                    intended: 0,
                    proposed: 0,
                    shown,
                    final_action: fin,
                },
                b1: Belief::from_weights(&b).unwrap(),
                alpha,
                seed,
            })
        })
}

fn config(alpha: f64, n: usize) -> FilterConfig {
    FilterConfig {
        alpha,
        n_particles: n,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn update_keeps_weights_normalized(c in case()) {
        let cfg = config(c.alpha, c.ps.n_particles());
        let out = posterior_update(&c.ps, &c.record, &c.b1, &cfg, &mut seeded(c.seed, 0)).unwrap();
        prop_assert_eq!(out.n_particles(), c.ps.n_particles());
        prop_assert!((out.weights().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(out.weights().iter().all(|w| *w >= 0.0));
        prop_assert!(out.thetas().iter().all(|t| t.is_finite()));
    }

    #[test]
    fn ess_is_bounded(c in case()) {
        let n = c.ps.n_particles() as f64;
        let before = effective_sample_size(&c.ps);
        prop_assert!((1.0..=n).contains(&before));
        let cfg = config(c.alpha, c.ps.n_particles());
        let out = posterior_update(&c.ps, &c.record, &c.b1, &cfg, &mut seeded(c.seed, 0)).unwrap();
        let after = effective_sample_size(&out);
        prop_assert!((1.0..=n).contains(&after));
    }

    #[test]
    fn first_stage_ignores_row_scale(c in case(), e in 0usize..3, x in 0usize..2, shift in -4.0f64..4.0) {
        let cfg = config(c.alpha, c.ps.n_particles());
        let base = first_stage_weights(&c.ps, &c.record, &c.b1, &cfg).unwrap();
        let d = c.dims;
        let (e, x) = (e % d.n_explainers, x % d.n_contexts);
        // Adding a constant to every particle's log q[e, x, ·] shifts each
        // shrunk location by the same constant.
        let mut thetas = c.ps.thetas().to_vec();
        for i in 0..c.ps.n_particles() {
            for a in 0..d.n_actions {
                thetas[i * d.len() + d.index(e, x, a)] += shift;
            }
        }
        let shifted = ParticleSet::new(d, thetas, c.ps.weights().to_vec()).unwrap();
        let after = first_stage_weights(&shifted, &c.record, &c.b1, &cfg).unwrap();
        for (p, q) in base.iter().zip(&after) {
            prop_assert!((p - q).abs() < 1e-12, "{} vs {}", p, q);
        }
    }

    #[test]
    fn update_is_bit_deterministic(c in case()) {
        let cfg = config(c.alpha, c.ps.n_particles());
        let a = posterior_update(&c.ps, &c.record, &c.b1, &cfg, &mut seeded(c.seed, 3)).unwrap();
        let b = posterior_update(&c.ps, &c.record, &c.b1, &cfg, &mut seeded(c.seed, 3)).unwrap();
        prop_assert_eq!(particle_set_digest(&a), particle_set_digest(&b));
        let bits = |ps: &ParticleSet| ps.thetas().iter().chain(ps.weights()).map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }
}

/// Sample standard error of the mean of `xs`.
fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn uninformative_update_preserves_moments() {
    let dims = Dims::new(2, 2, 3).unwrap();
    let cfg = config(0.9, 500);
    let ps = init_particles(&cfg, dims, &mut seeded(11, 0)).unwrap();
    let (mean0, cov0) = ps.moments();
    let d = dims.len();
    let record = InteractionRecord {
        context: 1,
        intended: 0,
        proposed: 2,
        shown: vec![],
        final_action: 1,
    };
    let b1 = Belief::uniform(3);
    let mut mean_dev = vec![Vec::new(); d];
    let mut cov_dev = vec![Vec::new(); d * d];
    for seed in 0..30 {
        let out = posterior_update(&ps, &record, &b1, &cfg, &mut seeded(seed, 5)).unwrap();
        let (m, c) = out.moments();
        for j in 0..d {
            mean_dev[j].push(m[j] - mean0[j]);
        }
        for k in 0..d * d {
            cov_dev[k].push(c[k] - cov0[k]);
        }
    }
    for (j, devs) in mean_dev.iter().enumerate() {
        let (m, se) = mean_and_se(devs);
        assert!(m.abs() <= 4.0 * se, "mean entry {j}: {m} vs se {se}");
    }
    for (k, devs) in cov_dev.iter().enumerate() {
        let (m, se) = mean_and_se(devs);
        assert!(m.abs() <= 4.0 * se, "cov entry {k}: {m} vs se {se}");
    }
}

#[test]
fn learns_the_persuasive_explainer() {
    let scenario = binary_validation_scenario();
    let dims = scenario.dims;
    let cfg = config(0.98, 2000);
    let b1 = Belief::uniform(2);
    let truth = final_belief(&b1, &scenario.q_true, 1, &[1]).unwrap();
    let mut wins = 0;
    for seed in 0..40 {
        let mut env = seeded(seed, 0);
        let mut rng = seeded(seed, 1);
        let mut ps = init_particles(&cfg, dims, &mut rng).unwrap();
        for _ in 0..200 {
            let record = InteractionRecord {
                context: 1,
                intended: 0,
                proposed: 1,
                shown: vec![1],
                final_action: draw_action(&truth, FinalActionRule::Sample, &mut env),
            };
            ps = posterior_update(&ps, &record, &b1, &cfg, &mut rng).unwrap();
        }
        let q = posterior_mean(&ps);
        let plus = q.get(1, 1, 1) / q.get(1, 1, 0);
        let minus = q.get(0, 1, 1) / q.get(0, 1, 0);
        wins += (plus > minus) as usize;
    }
    assert!(wins >= 38, "{wins}/40");
}

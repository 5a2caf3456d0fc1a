use ardent_core::{final_belief, interaction_likelihood, update_belief, Belief, Dims, InteractionRecord, PropensityTensor};
use proptest::prelude::*;
use proptest::sample::subsequence;

#[derive(Clone, Debug)]
struct World {
    dims: Dims,
    q: PropensityTensor,
    b1: Belief,
    x: usize,
    shown: Vec<usize>,
    final_action: usize,
}

fn world() -> impl Strategy<Value = World> {
    (1usize..5, 1usize..4, 2usize..6)
        .prop_flat_map(|(e, x, a)| {
            let dims = Dims::new(e, x, a).unwrap();
            (
                Just(dims),
                prop::collection::vec(-4.0f64..4.0, dims.len()),
                prop::collection::vec(0.01f64..1.0, a),
                0..x,
                subsequence((0..e).collect::<Vec<_>>(), 0..=e).prop_shuffle(),
                0..a,
            )
        })
        .prop_map(|(dims, log_q, w, x, shown, final_action)| World {
            dims,
            q: PropensityTensor::from_log(dims, &log_q).unwrap(),
            b1: Belief::from_weights(&w).unwrap(),
            x,
            shown,
            final_action,
        })
}

fn record(w: &World) -> InteractionRecord {
    InteractionRecord {
        context: w.x,
        intended: 0,
        proposed: 0,
        shown: w.shown.clone(),
        final_action: w.final_action,
    }
}

fn fold(w: &World) -> Belief {
    w.shown.iter().enumerate().fold(w.b1.clone(), |b, (t, &e)| {
        update_belief(&b, w.q.row(e, w.x), t + 1).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn beliefs_stay_normalized(w in world()) {
        let fb = final_belief(&w.b1, &w.q, w.x, &w.shown).unwrap();
        prop_assert!((fb.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        if let Some(&e) = w.shown.first() {
            let b = update_belief(&w.b1, w.q.row(e, w.x), 1).unwrap();
            prop_assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn shown_order_does_not_matter(w in world(), rot in 0usize..8) {
        let fb = final_belief(&w.b1, &w.q, w.x, &w.shown).unwrap();
        let mut perm = w.shown.clone();
        perm.reverse();
        if !perm.is_empty() {
            let k = rot % perm.len();
            perm.rotate_left(k);
        }
        let fp = final_belief(&w.b1, &w.q, w.x, &perm).unwrap();
        for (a, b) in fb.probs().iter().zip(fp.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn stepwise_equals_closed_form(w in world()) {
        let fb = final_belief(&w.b1, &w.q, w.x, &w.shown).unwrap();
        let stepwise = fold(&w);
        for (a, b) in fb.probs().iter().zip(stepwise.probs()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn likelihood_ignores_row_scale(w in world(), e in 0usize..4, x in 0usize..3, log_c in -5.0f64..5.0) {
        let e = e % w.dims.n_explainers;
        let x = x % w.dims.n_contexts;
        let base = interaction_likelihood(&record(&w), &w.b1, &w.q).unwrap();
        let mut scaled = w.q.clone();
        for a in 0..w.dims.n_actions {
            scaled.set(e, x, a, w.q.get(e, x, a) * log_c.exp()).unwrap();
        }
        let after = interaction_likelihood(&record(&w), &w.b1, &scaled).unwrap();
        prop_assert!((base - after).abs() < 1e-12, "{base} vs {after}");
    }

    #[test]
    fn raising_a_propensity_never_lowers_its_action(w in world(), pick in 0usize..4, boost in 0.0f64..5.0) {
        prop_assume!(!w.shown.is_empty());
        let e = w.shown[pick % w.shown.len()];
        let a = w.final_action;
        let before = final_belief(&w.b1, &w.q, w.x, &w.shown).unwrap().probs()[a];
        let mut raised = w.q.clone();
        raised.set(e, w.x, a, w.q.get(e, w.x, a) * boost.exp()).unwrap();
        let after = final_belief(&w.b1, &raised, w.x, &w.shown).unwrap().probs()[a];
        prop_assert!(after >= before - 1e-15, "{before} -> {after}");
    }

    #[test]
    fn likelihood_is_final_belief_entry(w in world()) {
        let fb = final_belief(&w.b1, &w.q, w.x, &w.shown).unwrap();
        let l = interaction_likelihood(&record(&w), &w.b1, &w.q).unwrap();
        prop_assert!((l - fb.probs()[w.final_action]).abs() < 1e-12);
        prop_assert!(l > 0.0 && l <= 1.0);
    }
}

#[test]
fn long_sequences_do_not_underflow() {
    // 400 explainers each favouring action 1 by e^5: the naive product
    // overflows, the log-domain path does not.
    let dims = Dims::new(400, 1, 2).unwrap();
    let mut log_q = vec![0.0; dims.len()];
    for e in 0..400 {
        log_q[dims.index(e, 0, 0)] = -300.0;
        log_q[dims.index(e, 0, 1)] = -295.0;
    }
    let q = PropensityTensor::from_log(dims, &log_q).unwrap();
    let shown: Vec<usize> = (0..400).collect();
    let b1 = Belief::uniform(2);
    let fb = final_belief(&b1, &q, 0, &shown).unwrap();
    assert!(fb.probs()[1] > 1.0 - 1e-300 || fb.probs()[1] == 1.0);
    let r = InteractionRecord {
        context: 0,
        intended: 0,
        proposed: 1,
        shown,
        final_action: 0,
    };
    let l = interaction_likelihood(&r, &b1, &q).unwrap();
    assert!(l >= 0.0 && l < 1e-300);
}

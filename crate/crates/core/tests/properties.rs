use awd_core::bicausal::adapted_wasserstein_lp;
use awd_core::decompose::{doob_decompose, seminorm};
use awd_core::hedging::{
    avar, optimal_avar_hedge, project_strategy, utility_objective, wealth_distribution, Claim, Strategy, UtilitySpec,
};
use awd_core::models::random::{random_claim, random_distribution, random_tree, rng, TreeShape};
use awd_core::scenario::ScenarioTree;
use awd_core::transport::{wasserstein, weak_ot};
use proptest::prelude::*;
use rand::Rng;

fn tree_from(seed: u64, horizon: usize, martingale: bool) -> ScenarioTree {
    random_tree(
        &mut rng(seed),
        TreeShape {
            horizon,
            max_children: 3,
            spread: 1.0,
            martingale,
        },
    )
}

fn positions(seed: u64, tree: &ScenarioTree, k: f64) -> Strategy {
    let mut r = rng(seed);
    Strategy::from_fn(tree, k, |_| r.gen_range(-k..=k)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn path_law_has_unit_mass(seed in any::<u64>(), horizon in 1usize..=3) {
        let t = tree_from(seed, horizon, false);
        let law = t.to_path_law().unwrap();
        prop_assert!((law.total_mass() - 1.0).abs() < 1e-10);
        prop_assert!(law.paths.iter().all(|p| p.values[0] == t.value(t.root())));
    }

    #[test]
    fn canonical_form_is_idempotent_and_law_preserving(seed in any::<u64>(), horizon in 1usize..=3) {
        let t = tree_from(seed, horizon, false);
        let c = t.canonicalize();
        prop_assert_eq!(c.canonicalize().to_json().unwrap(), c.to_json().unwrap());
        let (a, b) = (t.canonicalize().to_path_law().unwrap(), c.to_path_law().unwrap());
        prop_assert!(a.approx_eq(&b, 1e-12));
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), horizon in 1usize..=3) {
        let t = tree_from(seed, horizon, false);
        let back = ScenarioTree::from_json(&t.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), t.to_json().unwrap());
    }

    #[test]
    fn doob_decomposition_invariants(seed in any::<u64>(), horizon in 1usize..=3) {
        let t = tree_from(seed, horizon, false);
        let dec = doob_decompose(&t).unwrap();
        prop_assert_eq!(&dec, &doob_decompose(&t).unwrap());
        for (u, n) in t.nodes().iter().enumerate() {
            let centred: f64 = n.children.iter().map(|&(c, p)| p * dec.delta_m[c]).sum();
            prop_assert!(centred.abs() < 1e-10);
            for &(c, _) in &n.children {
                prop_assert!((dec.delta_m[c] + dec.delta_a[u] - (t.value(c) - n.value)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn martingale_seminorm_scales(seed in any::<u64>(), lambda in 0.1f64..5.0) {
        let t = tree_from(seed, 2, true);
        let scaled = seminorm(&t.scaled(lambda), 2.0).unwrap();
        prop_assert!((scaled - lambda * seminorm(&t, 2.0).unwrap()).abs() < 1e-12 * (1.0 + scaled));
    }

    #[test]
    fn adapted_distance_is_symmetric(a in any::<u64>(), b in any::<u64>(), p in prop::sample::select(vec![1.0, 2.0])) {
        let (tp, tq) = (tree_from(a, 2, false), tree_from(b, 2, false));
        let ab = adapted_wasserstein_lp(&tp, &tq, p).unwrap().value;
        let ba = adapted_wasserstein_lp(&tq, &tp, p).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-7);
    }

    #[test]
    fn weak_distance_never_exceeds_plain(seed in any::<u64>(), p in prop::sample::select(vec![1.0, 2.0])) {
        let mut r = rng(seed);
        let mu = random_distribution(&mut r, 4, 2.0);
        let nu = random_distribution(&mut r, 4, 2.0);
        let w = weak_ot(&mu, &nu, p).unwrap().value;
        prop_assert!(w <= wasserstein(&mu, &nu, p).unwrap().value + 1e-7);
    }

    #[test]
    fn avar_dominates_the_mean(seed in any::<u64>(), alpha in 0.01f64..=1.0) {
        let d = random_distribution(&mut rng(seed), 6, 3.0);
        prop_assert!(avar(&d, alpha).unwrap() >= d.mean() - 1e-12);
    }

    #[test]
    fn avar_hedge_is_monotone_in_k(seed in any::<u64>(), k in 0.0f64..2.0, dk in 0.0f64..1.0) {
        let t = tree_from(seed, 2, false);
        let c = random_claim(&mut rng(seed ^ 1), 2, 2).unwrap();
        let small = optimal_avar_hedge(&t, &c, k, 0.3).unwrap().value;
        let large = optimal_avar_hedge(&t, &c, k + dk, 0.3).unwrap().value;
        prop_assert!(large <= small + 1e-9);
    }

    #[test]
    fn projected_strategies_stay_bounded(a in any::<u64>(), b in any::<u64>(), k in 0.1f64..2.0) {
        let (tp, tq) = (tree_from(a, 2, false), tree_from(b, 2, false));
        let h = positions(a ^ b, &tp, k);
        let pi = adapted_wasserstein_lp(&tp, &tq, 1.0).unwrap().coupling;
        let g = project_strategy(&h, &tp, &pi, &tq).unwrap();
        prop_assert!(g.positions.iter().all(|x| x.abs() <= k + 1e-12));
    }

    #[test]
    fn utility_objective_is_concave_on_segments(seed in any::<u64>(), k in 0.1f64..2.0) {
        let t = tree_from(seed, 2, false);
        let u = UtilitySpec::ExponentialLinear { risk_aversion: 1.5 };
        let c = Claim::zero();
        let (h0, h1) = (positions(seed ^ 2, &t, k), positions(seed ^ 3, &t, k));
        let mid = Strategy::from_fn(&t, k, |v| 0.5 * (h0.positions[v] + h1.positions[v])).unwrap();
        let f = |h: &Strategy| utility_objective(&t, &c, h, &u).unwrap();
        prop_assert!(f(&mid) >= 0.5 * (f(&h0) + f(&h1)) - 1e-10);
    }

    #[test]
    fn wealth_shift_moves_avar(seed in any::<u64>(), m in -2.0f64..2.0) {
        let t = tree_from(seed, 2, false);
        let h = positions(seed, &t, 1.0);
        let c = random_claim(&mut rng(seed ^ 4), 2, 2).unwrap();
        let base = avar(&wealth_distribution(&t, &h, Some(&c), 0.0).unwrap(), 0.25).unwrap();
        let moved = avar(&wealth_distribution(&t, &h, Some(&c), m).unwrap(), 0.25).unwrap();
        prop_assert!((base - m - moved).abs() < 1e-12);
    }
}

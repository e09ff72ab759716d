use awd_core::bicausal::adapted_wasserstein_lp;
use awd_core::decompose::{doob_decompose, seminorm};
use awd_core::models::random::{random_schedule, rng};
use awd_core::models::{
    call_claim, contraction_cex, counterexample_suite, drift_diffusion_tree, gbm_tree, random_walk_tree, remark51,
    two_drift, Quantization, VolatilitySchedule,
};
use awd_core::scenario::ScenarioTree;

fn walk(sigmas: Vec<f64>, q: Quantization) -> ScenarioTree {
    random_walk_tree(sigmas.len(), &VolatilitySchedule::piecewise(sigmas), q).unwrap()
}

#[test]
fn two_step_scaling_example() {
    let a = walk(vec![0.5, 1.5], Quantization::Binomial);
    let b = walk(vec![1.0, 1.0], Quantization::Binomial);
    let d = adapted_wasserstein_lp(&a, &b, 2.0).unwrap();
    assert!((d.value - 0.5).abs() < 1e-9);
}

#[test]
fn walk_increments_have_the_scheduled_variance() {
    let mut r = rng(30);
    for q in [Quantization::Binomial, Quantization::GaussHermite(3), Quantization::GaussHermite(5)] {
        let sigmas = random_schedule(&mut r, 3, 2.0);
        let t = walk(sigmas.clone(), q);
        let dec = doob_decompose(&t).unwrap();
        for u in 0..t.len() {
            let node = t.node(u);
            if node.children.is_empty() {
                continue;
            }
            assert!(dec.delta_a[u].abs() < 1e-12);
            let var: f64 = node.children.iter().map(|&(c, p)| p * (t.value(c) - node.value).powi(2)).sum();
            let want = sigmas[node.time].powi(2) / 3.0;
            assert!((var - want).abs() < 1e-12, "{q:?}: {var} vs {want}");
        }
    }
}

#[test]
fn zero_volatility_walk_is_constant() {
    let t = walk(vec![0.0, 0.0], Quantization::Binomial);
    assert!(seminorm(&t, 2.0).unwrap().abs() < 1e-15);
}

#[test]
fn gauss_hermite_needs_two_points() {
    assert!(random_walk_tree(1, &VolatilitySchedule::constant(1.0), Quantization::GaussHermite(1)).is_err());
}

#[test]
fn gbm_tree_is_a_martingale_with_unit_mean() {
    for n in [1, 3, 6] {
        let t = gbm_tree(n, 0.3, 1.0).unwrap();
        assert!(t.is_martingale(1e-12));
        let law = t.to_path_law().unwrap();
        let mean: f64 = law.paths.iter().map(|p| p.prob * p.values[n]).sum();
        assert!((mean - 1.0).abs() < 1e-12);
    }
    let flat = gbm_tree(4, 0.0, 1.0).unwrap();
    assert!(flat.nodes().iter().all(|n| n.value == 1.0));
}

#[test]
fn pure_drift_seminorm() {
    let mu = |n: usize| 0.5 + n as f64;
    let sched = VolatilitySchedule::constant(0.0).with_drift(move |n, _| mu(n));
    let t = drift_diffusion_tree(4, &sched).unwrap();
    let want: f64 = (0..4).map(|n| mu(n).abs() * 0.25).sum();
    assert_eq!(t.leaves().len(), 1);
    assert!((seminorm(&t, 1.0).unwrap() - want).abs() < 1e-12);
}

#[test]
fn two_drift_distance_is_the_integrated_drift_gap() {
    let (mu1, mu2) = (0.4, -0.3);
    let (p, q) = two_drift(3, mu1, mu2).unwrap();
    let d = adapted_wasserstein_lp(&p, &q, 1.0).unwrap();
    assert!((d.value - (mu1 - mu2).abs()).abs() < 1e-9);
}

#[test]
fn remark51_paths_and_drift() {
    let (p1, _) = remark51(1).unwrap();
    let law = p1.to_path_law().unwrap();
    let paths: Vec<Vec<f64>> = law.paths.iter().map(|p| p.values.clone()).collect();
    assert_eq!(
        paths,
        vec![vec![0.0, 1.0, 1.0], vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, -1.0, -1.0]]
    );
    assert!(law.paths.iter().all(|p| p.prob == 0.25));

    let n = 4;
    let (pn, _) = remark51(n).unwrap();
    let dec = doob_decompose(&pn).unwrap();
    let up = pn.node(pn.root()).children[0].0;
    assert!((dec.delta_a[up] - (0.5 - 1.0 / n as f64)).abs() < 1e-15);
}

#[test]
fn remark51_seminorm_by_enumeration() {
    let (p2, _) = remark51(2).unwrap();
    // No drift in the first step; the second drifts by ±½ − x_1.
    let mut total = 0.0;
    for path in p2.to_path_law().unwrap().paths {
        let x1 = path.values[1];
        let drift2 = if x1 > 0.0 { 0.5 - x1 } else { -0.5 - x1 };
        let dm = [x1, path.values[2] - x1 - drift2];
        total += path.prob * (dm[0] * dm[0] + dm[1] * dm[1] + drift2.abs().powi(2));
    }
    assert!((seminorm(&p2, 2.0).unwrap() - total.sqrt()).abs() < 1e-14);
}

#[test]
fn contraction_pair_distance() {
    for eps in [0.2, 0.05] {
        let (pe, p) = contraction_cex(eps).unwrap();
        let d = adapted_wasserstein_lp(&pe, &p, 2.0).unwrap();
        assert!((d.value - eps * 2f64.sqrt()).abs() < 1e-9);
    }
}

#[test]
fn counterexamples_are_valid_trees() {
    for pair in counterexample_suite(10, 0.1).unwrap() {
        pair.p.ensure_valid().unwrap();
        pair.q.ensure_valid().unwrap();
        assert_eq!(pair.p.horizon(), pair.q.horizon(), "{}", pair.name);
    }
}

#[test]
fn call_payoffs() {
    let t = gbm_tree(3, 0.2, 1.0).unwrap();
    let leaves: Vec<f64> = t.leaves().iter().map(|&l| t.value(l)).collect();
    assert_eq!(call_claim(0.0).payoffs(&t), leaves);
    assert!(call_claim(10.0).payoffs(&t).iter().all(|&c| c == 0.0));
    assert!(call_claim(1.0).check_lipschitz(&[&t]).unwrap() <= 1.0);
}

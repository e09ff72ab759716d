//! Seeded random instances for property tests and verifier sweeps.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::hedging::{AffinePiece, Claim, PrefixStrategy};
use crate::scenario::{DiscreteDistribution, NodeId, ScenarioTree};

/// The generator behind every seeded instance.
pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Shape and value ranges of generated trees.
#[derive(Debug, Clone, Copy)]
pub struct TreeShape {
    pub horizon: usize,
    pub max_children: usize,
    /// Increments are drawn from `[−spread, spread]`.
    pub spread: f64,
    pub martingale: bool,
}

impl Default for TreeShape {
    fn default() -> Self {
        TreeShape {
            horizon: 2,
            max_children: 3,
            spread: 1.0,
            martingale: false,
        }
    }
}

fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

/// Random tree rooted at 0 with 1 to `max_children` children per node.
///
/// Martingale trees recentre each node's increments on zero. A node with
/// one child then stays put.
pub fn random_tree(rng: &mut impl Rng, shape: TreeShape) -> ScenarioTree {
    let mut tree = ScenarioTree::new(shape.horizon, 0.0);
    let mut frontier: Vec<NodeId> = vec![tree.root()];
    for _ in 0..shape.horizon {
        let mut next = Vec::new();
        for u in frontier {
            let x = tree.value(u);
            let c = rng.gen_range(1..=shape.max_children.max(1));
            let w = random_weights(rng, c);
            let mut dx: Vec<f64> = (0..c).map(|_| rng.gen_range(-shape.spread..=shape.spread)).collect();
            if shape.martingale {
                let mean: f64 = dx.iter().zip(&w).map(|(d, w)| d * w).sum();
                dx.iter_mut().for_each(|d| *d -= mean);
            }
            for (d, p) in dx.into_iter().zip(w) {
                next.push(tree.add_child(u, p, x + d));
            }
        }
        frontier = next;
    }
    tree
}

pub fn random_martingale_tree(rng: &mut impl Rng, horizon: usize, max_children: usize) -> ScenarioTree {
    random_tree(
        rng,
        TreeShape {
            horizon,
            max_children,
            spread: 1.0,
            martingale: true,
        },
    )
}

/// Maximum of `pieces` random affine functionals of the path `(x_0, …, x_T)`.
pub fn random_claim(rng: &mut impl Rng, horizon: usize, pieces: usize) -> Result<Claim> {
    let pieces = (0..pieces.max(1))
        .map(|_| AffinePiece {
            intercept: rng.gen_range(-0.5..=0.5),
            coeffs: (0..=horizon).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
        })
        .collect();
    Claim::max_affine(pieces)
}

/// Clamped affine prefix strategy with random coefficients and bound `k`.
pub fn random_prefix_strategy(rng: &mut impl Rng, horizon: usize, k: f64) -> PrefixStrategy {
    let intercepts = (0..horizon).map(|_| rng.gen_range(-k..=k)).collect();
    let slopes = (0..horizon)
        .map(|t| (0..=t).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    PrefixStrategy::affine_clamped(k, intercepts, slopes)
}

/// Between 1 and `max_atoms` atoms in `[−scale, scale]`.
pub fn random_distribution(rng: &mut impl Rng, max_atoms: usize, scale: f64) -> DiscreteDistribution {
    let n = rng.gen_range(1..=max_atoms.max(1));
    let w = random_weights(rng, n);
    DiscreteDistribution::new((0..n).map(|i| (rng.gen_range(-scale..=scale), w[i])))
        .expect("weights are positive and normalised")
}

/// `N` volatilities in `[0, max]`.
pub fn random_schedule(rng: &mut impl Rng, n: usize, max: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..=max)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_generation_is_reproducible() {
        let a = random_tree(&mut rng(7), TreeShape::default());
        let b = random_tree(&mut rng(7), TreeShape::default());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn martingale_trees_validate() {
        let mut r = rng(3);
        for _ in 0..20 {
            let t = random_martingale_tree(&mut r, 3, 4);
            t.ensure_valid().unwrap();
            assert!(t.is_martingale(1e-12));
        }
    }

    #[test]
    fn claims_respect_their_constant() {
        let mut r = rng(11);
        for _ in 0..10 {
            let t = random_tree(&mut r, TreeShape::default());
            let c = random_claim(&mut r, 2, 3).unwrap();
            c.check_lipschitz(&[&t]).unwrap();
            let s = random_prefix_strategy(&mut r, 2, 1.0);
            s.certify(&[&t]).unwrap();
        }
    }
}

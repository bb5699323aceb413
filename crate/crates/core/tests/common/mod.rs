//! Seeded instance generators shared by the integration tests.
#![allow(dead_code)]

use linkgame::graph::WeightedGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Connected graph on `n` nodes with `m` edges: a random spanning tree plus
/// random extra edges, weights drawn from `weights`.
pub fn random_graph(rng: &mut impl Rng, n: usize, m: usize, weights: (f64, f64)) -> WeightedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|k| (order[rng.gen_range(0..k)], order[k])).collect();
    let mut rest: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| !pairs.iter().any(|&(a, b)| (a.min(b), a.max(b)) == (i, j)))
        .collect();
    rest.shuffle(rng);
    pairs.extend(rest.into_iter().take(m.saturating_sub(n - 1)));
    WeightedGraph::new(n, pairs.into_iter().map(|(i, j)| (i, j, rng.gen_range(weights.0..weights.1)))).unwrap()
}

pub fn max_edges(n: usize) -> usize {
    n * (n - 1) / 2
}

pub fn random_state(rng: &mut impl Rng, n: usize, range: (f64, f64)) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(range.0..range.1)).collect()
}

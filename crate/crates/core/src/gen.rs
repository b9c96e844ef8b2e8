//! Seeded random instances for tests, the self-check and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{build_grid_graph, DistanceMetric, Edge, FeatureMap, WeightedGraph};
use crate::mst::{boruvka_mst, root_tree, SpanningTree};
use crate::scan::{ContinuousScanParams, DiscreteScanParams};
use crate::tensor::LaneTensor;

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// How edge weights are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Uniform in `[0, 1)`.
    Uniform,
    /// A random permutation of `1..=E`: all weights distinct.
    Distinct,
    /// One of four levels, so ties are common.
    Coarse,
}

/// Connected graph on `n` vertices: a random spanning tree plus up to
/// `extra` additional random edges (duplicates are skipped).
pub fn random_connected_graph(
    rng: &mut impl Rng,
    n: usize,
    extra: usize,
    kind: WeightKind,
) -> WeightedGraph {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = std::collections::BTreeSet::new();
    for k in 1..n {
        let j = rng.gen_range(0..k);
        let (a, b) = (order[k], order[j]);
        pairs.insert((a.min(b), a.max(b)));
    }
    let max_edges = n * (n - 1) / 2;
    let mut attempts = 0;
    while pairs.len() < (n - 1 + extra).min(max_edges) && attempts < 8 * (extra + 1) {
        attempts += 1;
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b {
            pairs.insert((a.min(b), a.max(b)));
        }
    }
    let mut pairs: Vec<_> = pairs.into_iter().collect();
    pairs.shuffle(rng);
    let mut ranks: Vec<usize> = (1..=pairs.len()).collect();
    ranks.shuffle(rng);
    let edges = pairs
        .into_iter()
        .zip(ranks)
        .map(|((u, v), rank)| {
            let w = match kind {
                WeightKind::Uniform => rng.gen::<f64>(),
                WeightKind::Distinct => rank as f64,
                WeightKind::Coarse => rng.gen_range(0..4) as f64 * 0.25,
            };
            Edge::new(u, v, w)
        })
        .collect();
    WeightedGraph::new(n, edges).expect("generated edges are canonical and unique")
}

/// Minimum spanning tree of a random connected graph, rooted at `root`
/// (a random vertex when `None`).
pub fn random_tree(rng: &mut impl Rng, n: usize, root: Option<usize>) -> SpanningTree {
    if n == 1 {
        return SpanningTree::from_parents(0, vec![0], vec![0.0]).expect("single vertex tree");
    }
    let extra = rng.gen_range(0..=2 * n);
    let g = random_connected_graph(rng, n, extra, WeightKind::Uniform);
    let edges = boruvka_mst(&g).expect("generated graph is connected");
    let root = root.unwrap_or_else(|| rng.gen_range(0..n));
    root_tree(&edges, n, root).expect("mst is a spanning tree")
}

/// Features in `[-1, 1)`, transitions in `[0.05, 0.99)`, inputs in `[-1, 1)`.
pub fn random_scan_inputs(
    rng: &mut impl Rng,
    l: usize,
    c: usize,
    n: usize,
) -> (FeatureMap, DiscreteScanParams) {
    let x = FeatureMap::from_fn(l, c, |_, _| rng.gen_range(-1.0..1.0)).expect("finite features");
    let a = LaneTensor::from_fn(l, c, n, |_, _, _| rng.gen_range(0.05..0.99));
    let b = LaneTensor::from_fn(l, c, n, |_, _, _| rng.gen_range(-1.0..1.0));
    (x, DiscreteScanParams::new(a, b).expect("finite parameters"))
}

/// Loss weights in `[-1, 1)` shaped like the hidden states.
pub fn random_weights(rng: &mut impl Rng, l: usize, c: usize, n: usize) -> LaneTensor {
    LaneTensor::from_fn(l, c, n, |_, _, _| rng.gen_range(-1.0..1.0))
}

pub fn random_continuous_params(
    rng: &mut impl Rng,
    l: usize,
    c: usize,
    n: usize,
) -> ContinuousScanParams {
    let mut draw =
        |len: usize, lo: f64, hi: f64| (0..len).map(|_| rng.gen_range(lo..hi)).collect::<Vec<_>>();
    ContinuousScanParams {
        tokens: l,
        channels: c,
        states: n,
        a: draw(c * n, -2.0, -0.1),
        b: draw(l * n, -1.0, 1.0),
        c_out: draw(l * n, -1.0, 1.0),
        d: draw(c, -1.0, 1.0),
        delta: draw(l * c, 0.05, 1.0),
    }
}

/// Random-feature `height x width` image, its 4-connected MST rooted at
/// pixel 0. Used for benchmarks.
pub fn grid_tree(seed: u64, height: usize, width: usize, metric: DistanceMetric) -> SpanningTree {
    let mut r = rng(seed);
    let f = FeatureMap::spatial(
        (0..height * width * 3)
            .map(|_| r.gen_range(-1.0..1.0))
            .collect(),
        height,
        width,
        3,
    )
    .expect("finite features");
    let g = build_grid_graph(&f, metric).expect("at least two pixels");
    let edges = boruvka_mst(&g).expect("grid graphs are connected");
    root_tree(&edges, height * width, 0).expect("mst is a spanning tree")
}

/// A `height x width` factorization of `len` with `height <= width` as
/// square as possible.
pub fn grid_shape(len: usize) -> (usize, usize) {
    let mut h = (len as f64).sqrt() as usize;
    while h > 1 && !len.is_multiple_of(h) {
        h -= 1;
    }
    (h.max(1), len / h.max(1))
}

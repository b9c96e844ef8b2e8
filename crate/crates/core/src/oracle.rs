//! Brute-force references for the fast kernels.
//!
//! Nothing here calls into [`crate::mst`]'s Boruvka or the scan kernels; only
//! the plain data types are shared.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::{Edge, FeatureMap, WeightedGraph};
use crate::mst::SpanningTree;
use crate::scan::{DiscreteScanParams, GradBundle, Lane, VisionForward};
use crate::tensor::LaneTensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceConfig {
    pub epsilon: f64,
    pub relative_tolerance: f64,
}

impl Default for FiniteDifferenceConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            relative_tolerance: 1e-4,
        }
    }
}

/// Minimal disjoint set, kept separate from the production one.
struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
}

/// Kruskal: sort by `(weight, u, v)` and keep every edge joining two sets.
/// Result sorted by `(u, v)`.
pub fn kruskal_mst(graph: &WeightedGraph) -> Result<Vec<Edge>> {
    let n = graph.num_vertices();
    let mut edges = graph.edges().to_vec();
    edges.sort_by(|a, b| a.cmp_order(b));
    let mut dsu = Dsu((0..n).collect());
    let mut tree = Vec::with_capacity(n.saturating_sub(1));
    for e in edges {
        let (a, b) = (dsu.find(e.u), dsu.find(e.v));
        if a != b {
            dsu.0[a] = b;
            tree.push(e);
        }
    }
    if tree.len() + 1 != n {
        let unreached = (1..n).find(|&v| dsu.find(v) != dsu.find(0)).unwrap_or(0);
        return Err(Error::Disconnected { from: 0, unreached });
    }
    tree.sort_by_key(|e| (e.u, e.v));
    Ok(tree)
}

/// A uniformly shuffled depth-first spanning tree of `graph`. Used as an
/// upper bound on the minimum total weight.
pub fn random_dfs_spanning_tree(graph: &WeightedGraph, rng: &mut impl Rng) -> Vec<Edge> {
    let n = graph.num_vertices();
    let mut adj: Vec<Vec<Edge>> = vec![Vec::new(); n];
    for e in graph.edges() {
        adj[e.u].push(*e);
        adj[e.v].push(*e);
    }
    let mut seen = vec![false; n];
    let start = rng.gen_range(0..n);
    let mut stack = vec![(start, None::<Edge>)];
    let mut tree = Vec::new();
    while let Some((v, via)) = stack.pop() {
        if seen[v] {
            continue;
        }
        seen[v] = true;
        tree.extend(via);
        let mut next = adj[v].clone();
        next.shuffle(rng);
        for e in next {
            let u = if e.u == v { e.v } else { e.u };
            if !seen[u] {
                stack.push((u, Some(e)));
            }
        }
    }
    tree
}

/// Vertices on the tree path from `i` to `j`, both endpoints included.
pub fn tree_path(tree: &SpanningTree, i: usize, j: usize) -> Vec<usize> {
    let parent = tree.parent();
    let ancestors = |mut v: usize| {
        let mut chain = vec![v];
        while v != tree.root() {
            v = parent[v];
            chain.push(v);
        }
        chain
    };
    let up_i = ancestors(i);
    let up_j = ancestors(j);
    // Strip the shared suffix (common ancestors) except the meeting point.
    let mut shared = 0;
    while shared < up_i.len().min(up_j.len())
        && up_i[up_i.len() - 1 - shared] == up_j[up_j.len() - 1 - shared]
    {
        shared += 1;
    }
    let mut path: Vec<usize> = up_i[..=up_i.len() - shared].to_vec();
    path.extend(up_j[..up_j.len() - shared].iter().rev());
    path
}

/// `S(i, j)` for one lane: product of the transitions owned by the edges on
/// the `i`-`j` path. An edge between a vertex and its parent is owned by the
/// vertex.
pub fn path_product(
    tree: &SpanningTree,
    p: &DiscreteScanParams,
    i: usize,
    j: usize,
    lane: Lane,
) -> Result<f64> {
    let l = tree.num_vertices();
    for v in [i, j] {
        if v >= l {
            return Err(Error::VertexOutOfRange { index: v, len: l });
        }
    }
    let path = tree_path(tree, i, j);
    let parent = tree.parent();
    let mut prod = 1.0;
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let owner = if parent[a] == b && a != tree.root() {
            a
        } else {
            b
        };
        prod *= p.a_bar.get(owner, lane.channel, lane.state);
    }
    Ok(prod)
}

/// Third route to the all-roots aggregation: explicit path enumeration for
/// every pair. Cubic; intended for trees of a few dozen vertices.
pub fn explicit_path_scan(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
) -> Result<LaneTensor> {
    let (l, c, n) = p.a_bar.shape();
    let mut h = LaneTensor::zeros(l, c, n);
    for lane in Lane::all(c, n) {
        for i in 0..l {
            let mut acc = 0.0;
            for j in 0..l {
                let s = path_product(tree, p, i, j, lane)?;
                acc += s * p.b_bar.get(j, lane.channel, lane.state) * x.get(j, lane.channel);
            }
            h.set(i, lane.channel, lane.state, acc);
        }
    }
    Ok(h)
}

/// Central difference of a scalar function.
pub fn central_difference(f: impl Fn(f64) -> f64, theta: f64, epsilon: f64) -> f64 {
    (f(theta + epsilon) - f(theta - epsilon)) / (2.0 * epsilon)
}

/// Loss `sum(weights * h)`.
pub fn weighted_loss(h: &LaneTensor, weights: &LaneTensor) -> f64 {
    h.as_slice()
        .iter()
        .zip(weights.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

/// Numerical gradient of `sum(weights * forward(x, p))` with respect to
/// every coordinate of `x`, `a_bar` and `b_bar`.
pub fn finite_diff_gradients<F>(
    forward: F,
    x: &FeatureMap,
    p: &DiscreteScanParams,
    weights: &LaneTensor,
    cfg: &FiniteDifferenceConfig,
) -> Result<GradBundle>
where
    F: Fn(&FeatureMap, &DiscreteScanParams) -> Result<LaneTensor>,
{
    let eps = cfg.epsilon;
    let (l, c, n) = p.a_bar.shape();
    let loss = |x: &FeatureMap, p: &DiscreteScanParams| -> Result<f64> {
        let v = weighted_loss(&forward(x, p)?, weights);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteLoss)
        }
    };

    let mut d_x = LaneTensor::zeros(l, c, 1);
    for k in 0..l * c {
        let shifted = |delta: f64| -> Result<f64> {
            let mut data = x.as_slice().to_vec();
            data[k] += delta;
            loss(&FeatureMap::new(data, l, c)?, p)
        };
        d_x.as_mut_slice()[k] = (shifted(eps)? - shifted(-eps)?) / (2.0 * eps);
    }

    let grad_for = |pick_a: bool| -> Result<LaneTensor> {
        let mut out = LaneTensor::zeros(l, c, n);
        let mut q = p.clone();
        for k in 0..l * c * n {
            let orig = coordinate(&mut q, pick_a)[k];
            coordinate(&mut q, pick_a)[k] = orig + eps;
            let plus = loss(x, &q)?;
            coordinate(&mut q, pick_a)[k] = orig - eps;
            let minus = loss(x, &q)?;
            coordinate(&mut q, pick_a)[k] = orig;
            out.as_mut_slice()[k] = (plus - minus) / (2.0 * eps);
        }
        Ok(out)
    };
    let d_a_bar = grad_for(true)?;
    let d_b_bar = grad_for(false)?;
    Ok(GradBundle {
        d_x,
        d_a_bar,
        d_b_bar,
    })
}

fn coordinate(q: &mut DiscreteScanParams, a_bar: bool) -> &mut [f64] {
    if a_bar {
        q.a_bar.as_mut_slice()
    } else {
        q.b_bar.as_mut_slice()
    }
}

/// Largest `|h_v - (a_v h_parent + (1 - a_v^2) xi_v)|` over non-root
/// vertices and lanes, plus the root mismatch `|h_root - xi_root|`.
pub fn two_traversal_residual(
    p: &DiscreteScanParams,
    tree: &SpanningTree,
    fwd: &VisionForward,
) -> f64 {
    let root = tree.root();
    let mut worst = fwd
        .hidden
        .row(root)
        .iter()
        .zip(fwd.aggregates.row(root))
        .map(|(h, xi)| (h - xi).abs())
        .fold(0.0, f64::max);
    for v in (0..tree.num_vertices()).filter(|&v| v != root) {
        let up = fwd.hidden.row(tree.parent()[v]);
        for (k, &a) in p.a_bar.row(v).iter().enumerate() {
            let rhs = a * up[k] + (1.0 - a * a) * fwd.aggregates.row(v)[k];
            worst = worst.max((fwd.hidden.row(v)[k] - rhs).abs());
        }
    }
    worst
}

/// `|a - b| / max(|a|, |b|, 1e-3)`. The floor keeps near-zero components
/// (rounding noise of order 1e-11) from dominating.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// Largest relative error over `d_x`, `d_a_bar` and `d_b_bar`, in that order.
pub fn max_relative_errors(analytic: &GradBundle, numeric: &GradBundle) -> [f64; 3] {
    let worst = |a: &LaneTensor, b: &LaneTensor| {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| relative_error(*x, *y))
            .fold(0.0, f64::max)
    };
    [
        worst(&analytic.d_x, &numeric.d_x),
        worst(&analytic.d_a_bar, &numeric.d_a_bar),
        worst(&analytic.d_b_bar, &numeric.d_b_bar),
    ]
}

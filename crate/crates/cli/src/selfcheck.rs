//! Seeded oracle checks runnable from the binary.
//!
//! Every check draws its instances from consecutive seeds, so a failure can be
//! replayed from the seed printed next to it.

use std::fmt::Write as _;

use rand::Rng;
use treescan::gen::{
    random_connected_graph, random_scan_inputs, random_tree, random_weights, rng, WeightKind,
};
use treescan::oracle::{
    finite_diff_gradients, kruskal_mst, max_relative_errors, two_traversal_residual,
};
use treescan::scan::{chain_child_keyed, naive_causal_scan};
use treescan::{
    boruvka_mst, discretize, naive_tree_scan, sequential_selective_scan,
    tree_scan_language_backward, tree_scan_language_forward, tree_scan_vision_backward,
    tree_scan_vision_forward, ContinuousScanParams, DiscreteScanParams, FeatureMap, Roots,
    SpanningTree, VisionForward,
};

pub type VisionForwardFn =
    fn(&FeatureMap, &DiscreteScanParams, &SpanningTree) -> treescan::Result<VisionForward>;

/// The kernels under test. Swapping one out is how the negative control
/// shows the checks can fail.
#[derive(Clone, Copy)]
pub struct Kernels {
    pub vision_forward: VisionForwardFn,
}

impl Kernels {
    pub fn reference() -> Self {
        Self {
            vision_forward: tree_scan_vision_forward,
        }
    }

    /// Hidden states scaled by `1 + 1e-6`.
    pub fn perturbed() -> Self {
        Self {
            vision_forward: perturbed_vision_forward,
        }
    }
}

fn perturbed_vision_forward(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
) -> treescan::Result<VisionForward> {
    let mut fwd = tree_scan_vision_forward(x, p, tree)?;
    for v in fwd.hidden.as_mut_slice() {
        *v *= 1.0 + 1e-6;
    }
    Ok(fwd)
}

/// Instances per check.
#[derive(Debug, Clone)]
pub struct Budget {
    pub mst: usize,
    pub scan: usize,
    pub gradients: usize,
    pub chain: usize,
    pub discretization: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            mst: 100,
            scan: 100,
            gradients: 20,
            chain: 50,
            discretization: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub instances: usize,
    pub first_seed: u64,
    pub last_seed: u64,
    pub max_error: f64,
    pub tolerance: f64,
    pub failing_seed: Option<u64>,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.failing_seed.is_none()
    }
}

/// Runs `instance` on `count` consecutive seeds; an error from the instance
/// counts as an infinite deviation.
fn check(
    name: &'static str,
    first_seed: u64,
    count: usize,
    tolerance: f64,
    instance: impl Fn(u64) -> treescan::Result<f64>,
) -> CheckRow {
    let mut max_error: f64 = 0.0;
    let mut failing_seed = None;
    for k in 0..count as u64 {
        let seed = first_seed.wrapping_add(k);
        let e = instance(seed).unwrap_or(f64::INFINITY);
        if (e.is_nan() || e > tolerance) && failing_seed.is_none() {
            failing_seed = Some(seed);
        }
        max_error = if e.is_nan() {
            f64::NAN
        } else {
            max_error.max(e)
        };
    }
    CheckRow {
        name,
        instances: count,
        first_seed,
        last_seed: first_seed.wrapping_add(count.saturating_sub(1) as u64),
        max_error,
        tolerance,
        failing_seed,
    }
}

fn sorted_pairs(edges: &[treescan::Edge]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<_> = edges.iter().map(|e| (e.u, e.v)).collect();
    pairs.sort_unstable();
    pairs
}

pub fn mst_instance(seed: u64, max_vertices: usize) -> treescan::Result<f64> {
    let mut r = rng(seed);
    let n = r.gen_range(2..=max_vertices);
    let extra = r.gen_range(0..=3 * n);
    let kind = [
        WeightKind::Uniform,
        WeightKind::Distinct,
        WeightKind::Coarse,
    ][(seed % 3) as usize];
    let g = random_connected_graph(&mut r, n, extra, kind);
    let fast = boruvka_mst(&g)?;
    let slow = kruskal_mst(&g)?;
    let total = |es: &[treescan::Edge]| es.iter().map(|e| e.weight).sum::<f64>();
    if fast.len() != n - 1
        || (kind == WeightKind::Distinct && sorted_pairs(&fast) != sorted_pairs(&slow))
    {
        return Ok(f64::INFINITY);
    }
    Ok((total(&fast) - total(&slow)).abs())
}

fn scan_instance(seed: u64, max_len: usize) -> (SpanningTree, FeatureMap, DiscreteScanParams) {
    let mut r = rng(seed);
    let (l, c, n) = (
        r.gen_range(1..=max_len),
        r.gen_range(1..=4),
        r.gen_range(1..=4),
    );
    let tree = random_tree(&mut r, l, None);
    let (x, p) = random_scan_inputs(&mut r, l, c, n);
    (tree, x, p)
}

pub fn vision_naive_instance(
    kernels: &Kernels,
    seed: u64,
    max_len: usize,
) -> treescan::Result<f64> {
    let (tree, x, p) = scan_instance(seed, max_len);
    let fast = (kernels.vision_forward)(&x, &p, &tree)?;
    let slow = naive_tree_scan(&x, &p, &tree, Roots::All, true)?;
    Ok(fast.hidden.max_abs_diff(&slow))
}

pub fn two_traversal_instance(
    kernels: &Kernels,
    seed: u64,
    max_len: usize,
) -> treescan::Result<f64> {
    let (tree, x, p) = scan_instance(seed, max_len);
    let fwd = (kernels.vision_forward)(&x, &p, &tree)?;
    Ok(two_traversal_residual(&p, &tree, &fwd))
}

pub fn language_naive_instance(seed: u64, max_len: usize) -> treescan::Result<f64> {
    let mut r = rng(seed);
    let (l, c, n) = (
        r.gen_range(1..=max_len),
        r.gen_range(1..=4),
        r.gen_range(1..=4),
    );
    let tree = random_tree(&mut r, l, Some(l - 1));
    let (x, p) = random_scan_inputs(&mut r, l, c, n);
    let fast = tree_scan_language_forward(&x, &p, &tree)?;
    Ok(fast.max_abs_diff(&naive_causal_scan(&x, &p, &tree)?))
}

/// Worst relative error of the vision backward against central differences.
pub fn vision_gradient_instance(
    kernels: &Kernels,
    seed: u64,
    max_len: usize,
) -> treescan::Result<f64> {
    let mut r = rng(seed);
    let (l, c, n) = (
        r.gen_range(1..=max_len),
        r.gen_range(1..=3),
        r.gen_range(1..=3),
    );
    let tree = random_tree(&mut r, l, None);
    let (x, p) = random_scan_inputs(&mut r, l, c, n);
    let w = random_weights(&mut r, l, c, n);
    let forward = kernels.vision_forward;
    let fwd = forward(&x, &p, &tree)?;
    let analytic = tree_scan_vision_backward(&x, &p, &tree, &fwd, &w)?;
    let numeric = finite_diff_gradients(
        |x, p| Ok(forward(x, p, &tree)?.hidden),
        &x,
        &p,
        &w,
        &Default::default(),
    )?;
    Ok(max_relative_errors(&analytic, &numeric)
        .into_iter()
        .fold(0.0, f64::max))
}

pub fn language_gradient_instance(seed: u64, max_len: usize) -> treescan::Result<f64> {
    let mut r = rng(seed);
    let (l, c, n) = (
        r.gen_range(1..=max_len),
        r.gen_range(1..=3),
        r.gen_range(1..=3),
    );
    let tree = random_tree(&mut r, l, Some(l - 1));
    let (x, p) = random_scan_inputs(&mut r, l, c, n);
    let w = random_weights(&mut r, l, c, n);
    let h = tree_scan_language_forward(&x, &p, &tree)?;
    let analytic = tree_scan_language_backward(&x, &p, &tree, &h, &w)?;
    let numeric = finite_diff_gradients(
        |x, p| tree_scan_language_forward(x, p, &tree),
        &x,
        &p,
        &w,
        &Default::default(),
    )?;
    Ok(max_relative_errors(&analytic, &numeric)
        .into_iter()
        .fold(0.0, f64::max))
}

/// Language scan on a path rooted at the last token against the sequential
/// recurrence.
pub fn chain_instance(seed: u64, max_len: usize) -> treescan::Result<f64> {
    let mut r = rng(seed);
    let (l, c, n) = (
        r.gen_range(1..=max_len),
        r.gen_range(1..=4),
        r.gen_range(1..=4),
    );
    let (x, p) = random_scan_inputs(&mut r, l, c, n);
    let chain = SpanningTree::path(l, l - 1)?;
    let tree_h = tree_scan_language_forward(&x, &chain_child_keyed(&p), &chain)?;
    Ok(tree_h.max_abs_diff(&sequential_selective_scan(&x, &p)?))
}

/// `discretize` on one random `(A, B, delta)` triple against direct scalar
/// evaluation.
pub fn discretization_instance(seed: u64) -> treescan::Result<f64> {
    let mut r = rng(seed);
    let (a, b, delta) = (
        r.gen_range(-5.0..0.0),
        r.gen_range(-2.0..2.0),
        r.gen_range(1e-4..2.0),
    );
    let params = ContinuousScanParams {
        tokens: 1,
        channels: 1,
        states: 1,
        a: vec![a],
        b: vec![b],
        c_out: vec![0.0],
        d: vec![0.0],
        delta: vec![delta],
    };
    let p = discretize(&params)?;
    let a_bar = f64::exp(delta * a);
    let b_bar = delta * b;
    Ok((p.a_bar.get(0, 0, 0) - a_bar)
        .abs()
        .max((p.b_bar.get(0, 0, 0) - b_bar).abs()))
}

pub fn run(kernels: &Kernels, base_seed: u64, budget: &Budget) -> Vec<CheckRow> {
    let seeds = |k: u64| base_seed.wrapping_add(k * 1_000_000);
    vec![
        check("mst_boruvka_vs_kruskal", seeds(0), budget.mst, 1e-9, |s| {
            mst_instance(s, 256)
        }),
        check("vision_vs_naive", seeds(1), budget.scan, 1e-9, |s| {
            vision_naive_instance(kernels, s, 128)
        }),
        check(
            "two_traversal_identity",
            seeds(2),
            budget.scan,
            1e-12,
            |s| two_traversal_instance(kernels, s, 128),
        ),
        check("language_vs_naive", seeds(3), budget.scan, 1e-9, |s| {
            language_naive_instance(s, 128)
        }),
        check("vision_gradients", seeds(4), budget.gradients, 1e-4, |s| {
            vision_gradient_instance(kernels, s, 24)
        }),
        check(
            "language_gradients",
            seeds(5),
            budget.gradients,
            1e-4,
            |s| language_gradient_instance(s, 24),
        ),
        check("chain_reduction", seeds(6), budget.chain, 1e-12, |s| {
            chain_instance(s, 64)
        }),
        check(
            "discretization",
            seeds(7),
            budget.discretization,
            1e-12,
            discretization_instance,
        ),
    ]
}

pub fn render(rows: &[CheckRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>9}  {:<24} {:>11} {:>9}  status",
        "check", "instances", "seeds", "max error", "tolerance"
    );
    for r in rows {
        let status = match r.failing_seed {
            None => "PASS".to_string(),
            Some(seed) => format!("FAIL (seed {seed})"),
        };
        let _ = writeln!(
            s,
            "{:<24} {:>9}  {:<24} {:>11.3e} {:>9.0e}  {status}",
            r.name,
            r.instances,
            format!("{}..={}", r.first_seed, r.last_seed),
            r.max_error,
            r.tolerance
        );
    }
    s
}

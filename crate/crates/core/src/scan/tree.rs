//! Linear-time scan kernels.
//!
//! Notation used below, per lane:
//! `u_i = b_bar_i * x_i` is the injected input, `xi_i` the aggregate of the
//! subtree below `i`, and `h_i` the aggregate over the whole tree as seen
//! from `i`. Crossing the edge `(k, parent[k])` multiplies by `a_bar_k`.

use super::{check_same, check_scan_shapes, DiscreteScanParams, HiddenStates};
use crate::error::{Error, Result};
use crate::lattice::FeatureMap;
use crate::mst::SpanningTree;
use crate::tensor::LaneTensor;

/// Gradients of a scalar loss with respect to the scan inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    /// `L x C x 1`: reduced over the state dimension.
    pub d_x: LaneTensor,
    pub d_a_bar: LaneTensor,
    pub d_b_bar: LaneTensor,
}

impl GradBundle {
    fn zeros(l: usize, c: usize, n: usize) -> Self {
        Self {
            d_x: LaneTensor::zeros(l, c, 1),
            d_a_bar: LaneTensor::zeros(l, c, n),
            d_b_bar: LaneTensor::zeros(l, c, n),
        }
    }
}

/// Output of [`tree_scan_vision_forward`]: the hidden states plus the
/// subtree aggregates consumed by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct VisionForward {
    pub hidden: HiddenStates,
    pub aggregates: LaneTensor,
}

// The two passes run in the tree's scan order (a depth-first preorder), where
// every parent precedes its children. `gather` and `scatter` convert from and
// to vertex order.

fn gather(tree: &SpanningTree, src: &[f64], w: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(src.len());
    for &v in tree.scan_order() {
        out.extend_from_slice(&src[v * w..(v + 1) * w]);
    }
    out
}

fn scatter(tree: &SpanningTree, src: &[f64], w: usize) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for (q, &v) in tree.scan_order().iter().enumerate() {
        out[v * w..(v + 1) * w].copy_from_slice(&src[q * w..(q + 1) * w]);
    }
    out
}

/// Leaf-to-root pass: `out_i = src_i + sum_{children j} a_j * out_j`.
/// Scan order, visited in reverse, each vertex adding itself into its
/// parent; siblings therefore arrive in descending vertex order.
fn aggregate_up(tree: &SpanningTree, a: &[f64], mut out: Vec<f64>, w: usize) -> Vec<f64> {
    for (q, &pq) in tree.scan_parent().iter().enumerate().skip(1).rev() {
        // Parents always come before their children.
        let (head, tail) = out.split_at_mut(q * w);
        let dst = &mut head[pq * w..(pq + 1) * w];
        for ((d, s), ak) in dst.iter_mut().zip(&tail[..w]).zip(&a[q * w..(q + 1) * w]) {
            *d += ak * s;
        }
    }
    out
}

/// Root-to-leaf pass: `out_i = (1 - a_i^2) * sub_i + a_i * out_parent`.
/// Scan order. `visit(q, row)` sees each finished row.
fn propagate_down(
    tree: &SpanningTree,
    a: &[f64],
    sub: &[f64],
    w: usize,
    mut visit: impl FnMut(usize, &[f64]),
) -> Vec<f64> {
    let mut out = vec![0.0; sub.len()];
    out[..w].copy_from_slice(&sub[..w]);
    visit(0, &out[..w]);
    for (q, &pq) in tree.scan_parent().iter().enumerate().skip(1) {
        // Parents always come before their children.
        let (head, tail) = out.split_at_mut(q * w);
        let up = &head[pq * w..(pq + 1) * w];
        let dst = &mut tail[..w];
        let rows = sub[q * w..(q + 1) * w].iter().zip(&a[q * w..(q + 1) * w]);
        for ((d, u), (s, ak)) in dst.iter_mut().zip(up).zip(rows) {
            *d = (1.0 - ak * ak) * s + ak * u;
        }
        visit(q, dst);
    }
    out
}

/// Transitions and injected inputs `b_bar * x`, in scan order.
fn gather_inputs(
    tree: &SpanningTree,
    x: &FeatureMap,
    p: &DiscreteScanParams,
) -> (Vec<f64>, Vec<f64>) {
    let (n, w) = (p.b_bar.states(), p.b_bar.lanes());
    let (a, b, xs) = (p.a_bar.as_slice(), p.b_bar.as_slice(), x.as_slice());
    let c = x.channels();
    let mut a_q = Vec::with_capacity(a.len());
    let mut u_q = Vec::with_capacity(b.len());
    for &v in tree.scan_order() {
        a_q.extend_from_slice(&a[v * w..(v + 1) * w]);
        let b_row = &b[v * w..(v + 1) * w];
        for (b_c, &x_c) in b_row.chunks_exact(n).zip(&xs[v * c..(v + 1) * c]) {
            u_q.extend(b_c.iter().map(|b| b * x_c));
        }
    }
    (a_q, u_q)
}

fn lift(t: &LaneTensor, data: Vec<f64>) -> LaneTensor {
    let (l, c, n) = t.shape();
    LaneTensor::from_vec(l, c, n, data).expect("kernel output keeps the parameter shape")
}

/// `d_x` (reduced over states) and `d_b_bar` from the B-free adjoint `rho`.
fn input_grads(x: &FeatureMap, p: &DiscreteScanParams, rho: &[f64], grads: &mut GradBundle) {
    let n = p.b_bar.states();
    let b = p.b_bar.as_slice();
    let xs = x.as_slice();
    let dx = grads.d_x.as_mut_slice();
    let db = grads.d_b_bar.as_mut_slice();
    for (k, r) in rho.iter().enumerate() {
        dx[k / n] += r * b[k];
        db[k] = r * xs[k / n];
    }
}

/// All-roots tree scan in two traversals.
///
/// Computes, for every vertex `i`, `h_i = sum_j S(i, j) * b_bar_j * x_j`,
/// where `S(i, j)` multiplies the transitions of every edge on the tree path
/// between `i` and `j`. The first pass gathers subtree aggregates toward the
/// root; the second pass hands each vertex the contribution from outside its
/// subtree: `h_i = (1 - a_i^2) * xi_i + a_i * h_parent`.
pub fn tree_scan_vision_forward(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
) -> Result<VisionForward> {
    check_scan_shapes(x, p, Some(tree))?;
    let w = p.a_bar.lanes();
    let (a, u) = gather_inputs(tree, x, p);
    let xi = aggregate_up(tree, &a, u, w);

    // Scatter back to vertex order as rows are finished.
    let order = tree.scan_order();
    let mut hidden = vec![0.0; xi.len()];
    let mut aggregates = vec![0.0; xi.len()];
    propagate_down(tree, &a, &xi, w, |q, row| {
        let v = order[q];
        hidden[v * w..(v + 1) * w].copy_from_slice(row);
        aggregates[v * w..(v + 1) * w].copy_from_slice(&xi[q * w..(q + 1) * w]);
    });
    Ok(VisionForward {
        hidden: lift(&p.a_bar, hidden),
        aggregates: lift(&p.a_bar, aggregates),
    })
}

/// Backward pass of [`tree_scan_vision_forward`] for upstream gradient `d_h`.
///
/// The adjoint of an all-roots aggregation is the same aggregation applied to
/// `d_h`: `eta` gathers `d_h` over subtrees and `rho` spreads it over the
/// whole tree. Then `d_x_i = sum_n rho_i * b_bar_i`, `d_b_bar_i = rho_i * x_i`
/// and, for a non-root vertex `k` with parent `q`,
/// `d_a_bar_k = eta_k * h_q + xi_k * rho_q - 2 * a_k * eta_k * xi_k`:
/// every pair of vertices separated by edge `(k, q)` contributes once.
///
/// `fwd` must come from the forward call on the same inputs; this is not
/// checked beyond shapes.
pub fn tree_scan_vision_backward(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
    fwd: &VisionForward,
    d_h: &LaneTensor,
) -> Result<GradBundle> {
    check_scan_shapes(x, p, Some(tree))?;
    check_same("hidden states", &p.a_bar, &fwd.hidden)?;
    check_same("aggregates", &p.a_bar, &fwd.aggregates)?;
    check_same("d_h", &p.a_bar, d_h)?;
    let (l, c, n) = p.a_bar.shape();
    let w = c * n;
    let a_scan = gather(tree, p.a_bar.as_slice(), w);
    let eta = aggregate_up(tree, &a_scan, gather(tree, d_h.as_slice(), w), w);
    let rho = scatter(tree, &propagate_down(tree, &a_scan, &eta, w, |_, _| {}), w);
    let eta = scatter(tree, &eta, w);
    let a = p.a_bar.as_slice();

    let mut grads = GradBundle::zeros(l, c, n);
    input_grads(x, p, &rho, &mut grads);

    let xi = fwd.aggregates.as_slice();
    let h = fwd.hidden.as_slice();
    let da = grads.d_a_bar.as_mut_slice();
    let parent = tree.parent();
    for &i in &tree.scan_order()[1..] {
        let (base, pb) = (i * w, parent[i] * w);
        for k in 0..w {
            let (e, s) = (eta[base + k], xi[base + k]);
            da[base + k] = e * h[pb + k] + s * rho[pb + k] - 2.0 * a[base + k] * e * s;
        }
    }
    Ok(grads)
}

fn check_causal_root(tree: &SpanningTree) -> Result<()> {
    let last = tree.num_vertices() - 1;
    if tree.root() != last {
        return Err(Error::CausalRoot {
            expected: last,
            actual: tree.root(),
        });
    }
    Ok(())
}

/// Causal tree scan: each vertex aggregates only its own subtree, so the
/// single leaf-to-root pass already yields `h`. The tree must be rooted at
/// the last token.
pub fn tree_scan_language_forward(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
) -> Result<HiddenStates> {
    check_scan_shapes(x, p, Some(tree))?;
    check_causal_root(tree)?;
    let w = p.a_bar.lanes();
    let (a, u) = gather_inputs(tree, x, p);
    let h = aggregate_up(tree, &a, u, w);
    Ok(lift(&p.a_bar, scatter(tree, &h, w)))
}

/// Backward pass of [`tree_scan_language_forward`], one root-to-leaf pass.
///
/// `rho_i = d_h_i + a_i * rho_parent` collects the gradient of every ancestor
/// that sees `i`; `a_k` is used once, inside its parent's aggregate, so
/// `d_a_bar_k = rho_parent * h_k`.
pub fn tree_scan_language_backward(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
    h: &LaneTensor,
    d_h: &LaneTensor,
) -> Result<GradBundle> {
    check_scan_shapes(x, p, Some(tree))?;
    check_causal_root(tree)?;
    check_same("hidden states", &p.a_bar, h)?;
    check_same("d_h", &p.a_bar, d_h)?;
    let (l, c, n) = p.a_bar.shape();
    let w = c * n;
    let a = p.a_bar.as_slice();
    let hs = h.as_slice();
    let mut rho = d_h.as_slice().to_vec();
    let mut grads = GradBundle::zeros(l, c, n);
    let da = grads.d_a_bar.as_mut_slice();
    let parent = tree.parent();
    for &i in &tree.scan_order()[1..] {
        let (base, pb) = (i * w, parent[i] * w);
        for k in 0..w {
            let rp = rho[pb + k];
            da[base + k] = rp * hs[base + k];
            rho[base + k] += a[base + k] * rp;
        }
    }
    input_grads(x, p, &rho, &mut grads);
    Ok(grads)
}

/// Plain selective recurrence along token order:
/// `h_0 = b_bar_0 * x_0`, `h_i = a_bar_i * h_{i-1} + b_bar_i * x_i`.
pub fn sequential_selective_scan(x: &FeatureMap, p: &DiscreteScanParams) -> Result<HiddenStates> {
    check_scan_shapes(x, p, None)?;
    let (l, _, _) = p.a_bar.shape();
    let w = p.a_bar.lanes();
    let a = p.a_bar.as_slice();
    let n = p.b_bar.states();
    let mut h: Vec<f64> = p
        .b_bar
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, b)| b * x.as_slice()[k / n])
        .collect();
    for i in 1..l {
        for k in 0..w {
            h[i * w + k] += a[i * w + k] * h[(i - 1) * w + k];
        }
    }
    Ok(lift(&p.a_bar, h))
}

/// Reverse-time adjoint of [`sequential_selective_scan`]. `a_bar_0` is never
/// read by the forward pass and gets a zero gradient.
pub fn sequential_selective_scan_backward(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    h: &LaneTensor,
    d_h: &LaneTensor,
) -> Result<GradBundle> {
    check_scan_shapes(x, p, None)?;
    check_same("hidden states", &p.a_bar, h)?;
    check_same("d_h", &p.a_bar, d_h)?;
    let (l, c, n) = p.a_bar.shape();
    let w = c * n;
    let a = p.a_bar.as_slice();
    let hs = h.as_slice();
    let mut rho = d_h.as_slice().to_vec();
    for i in (0..l.saturating_sub(1)).rev() {
        for k in 0..w {
            rho[i * w + k] += a[(i + 1) * w + k] * rho[(i + 1) * w + k];
        }
    }
    let mut grads = GradBundle::zeros(l, c, n);
    let da = grads.d_a_bar.as_mut_slice();
    for i in 1..l {
        for k in 0..w {
            da[i * w + k] = rho[i * w + k] * hs[(i - 1) * w + k];
        }
    }
    input_grads(x, p, &rho, &mut grads);
    Ok(grads)
}

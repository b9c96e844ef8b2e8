//! Quadratic reference scans. Slow on purpose; they exist to check the
//! linear-time kernels and share no code with them.

use super::{check_scan_shapes, DiscreteScanParams, HiddenStates};
use crate::error::{Error, Result};
use crate::lattice::FeatureMap;
use crate::mst::SpanningTree;
use crate::tensor::LaneTensor;

/// Size limit for [`naive_tree_scan`] unless forced.
pub const NAIVE_MAX_VERTICES: usize = 4096;

/// Which vertices act as aggregation roots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Roots {
    All,
    /// Only this vertex's hidden state is computed; other rows stay zero.
    Single(usize),
}

/// Direct evaluation of `h_i = sum_j S(i, j) * b_bar_j * x_j`.
///
/// For each root a depth-first walk over the undirected tree carries the
/// running path product; stepping across edge `(k, parent[k])` multiplies by
/// `a_bar_k`. `O(L^2)` per lane.
pub fn naive_tree_scan(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
    roots: Roots,
    force: bool,
) -> Result<HiddenStates> {
    check_scan_shapes(x, p, Some(tree))?;
    let (l, c, n) = p.a_bar.shape();
    if l > NAIVE_MAX_VERTICES && !force {
        return Err(Error::TooLarge {
            len: l,
            limit: NAIVE_MAX_VERTICES,
        });
    }
    let roots: Vec<usize> = match roots {
        Roots::All => (0..l).collect(),
        Roots::Single(r) if r < l => vec![r],
        Roots::Single(r) => return Err(Error::VertexOutOfRange { index: r, len: l }),
    };

    let mut out = LaneTensor::zeros(l, c, n);
    let parent = tree.parent();
    let mut product = vec![0.0; l];
    let mut stack: Vec<(usize, usize)> = Vec::with_capacity(l);
    for root in roots {
        for ch in 0..c {
            for s in 0..n {
                let mut acc = 0.0;
                product[root] = 1.0;
                stack.push((root, usize::MAX));
                while let Some((v, from)) = stack.pop() {
                    acc += product[v] * p.b_bar.get(v, ch, s) * x.get(v, ch);
                    let up = (v != tree.root()).then(|| parent[v]);
                    let neighbours = tree.children(v).iter().copied().chain(up);
                    for u in neighbours {
                        if u == from {
                            continue;
                        }
                        let owner = if parent[u] == v && u != tree.root() {
                            u
                        } else {
                            v
                        };
                        product[u] = product[v] * p.a_bar.get(owner, ch, s);
                        stack.push((u, v));
                    }
                }
                out.set(root, ch, s, acc);
            }
        }
    }
    Ok(out)
}

/// Direct evaluation of the causal aggregation: each vertex sums only the
/// vertices of its own subtree, `h_i = sum_{j below i} S(i, j) * b_bar_j * x_j`.
pub fn naive_causal_scan(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: &SpanningTree,
) -> Result<HiddenStates> {
    check_scan_shapes(x, p, Some(tree))?;
    let (l, c, n) = p.a_bar.shape();
    let parent = tree.parent();
    let mut out = LaneTensor::zeros(l, c, n);
    // Walk every vertex up to the root, crediting each ancestor.
    for j in 0..l {
        for ch in 0..c {
            for s in 0..n {
                let u = p.b_bar.get(j, ch, s) * x.get(j, ch);
                let mut weight = 1.0;
                let mut v = j;
                loop {
                    out.set(v, ch, s, out.get(v, ch, s) + weight * u);
                    if v == tree.root() {
                        break;
                    }
                    weight *= p.a_bar.get(v, ch, s);
                    v = parent[v];
                }
            }
        }
    }
    Ok(out)
}

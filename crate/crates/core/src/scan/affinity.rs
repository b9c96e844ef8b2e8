use std::collections::VecDeque;

use super::DiscreteScanParams;
use crate::error::{Error, Result};
use crate::mst::SpanningTree;
use crate::tensor::LaneTensor;

/// Lane-averaged path weight `S(anchor, j)` for every vertex `j`.
///
/// With transitions in `(0, 1]` the map equals 1 at the anchor and never
/// increases moving away from it along the tree.
pub fn affinity_map(
    tree: &SpanningTree,
    p: &DiscreteScanParams,
    anchor: usize,
) -> Result<Vec<f64>> {
    let l = tree.num_vertices();
    if anchor >= l {
        return Err(Error::VertexOutOfRange {
            index: anchor,
            len: l,
        });
    }
    if p.a_bar.tokens() != l {
        return Err(Error::Shape(format!(
            "transitions cover {} tokens, tree has {l} vertices",
            p.a_bar.tokens()
        )));
    }
    let w = p.a_bar.lanes();
    let a = p.a_bar.as_slice();
    let parent = tree.parent();
    let mut product = vec![0.0; l * w];
    let mut seen = vec![false; l];
    product[anchor * w..(anchor + 1) * w].fill(1.0);
    seen[anchor] = true;
    let mut queue = VecDeque::from([anchor]);
    while let Some(v) = queue.pop_front() {
        let up = (v != tree.root()).then(|| parent[v]);
        for u in tree.children(v).iter().copied().chain(up) {
            if seen[u] {
                continue;
            }
            seen[u] = true;
            let owner = if parent[u] == v { u } else { v };
            for k in 0..w {
                product[u * w + k] = product[v * w + k] * a[owner * w + k];
            }
            queue.push_back(u);
        }
    }
    Ok(product
        .chunks_exact(w)
        .map(|lanes| lanes.iter().sum::<f64>() / w as f64)
        .collect())
}

/// Single-lane transitions derived from the tree's own edge weights:
/// `a_bar_i = exp(-scale * weight(i, parent[i]))`, `b_bar = 1`.
///
/// Illustrative only: gives dissimilar edges small transitions without any
/// trained parameters.
pub fn transitions_from_edge_weights(
    tree: &SpanningTree,
    scale: f64,
) -> Result<DiscreteScanParams> {
    if !(scale.is_finite() && scale >= 0.0) {
        return Err(Error::Invalid(format!(
            "scale must be finite and nonnegative, got {scale}"
        )));
    }
    let l = tree.num_vertices();
    let a: Vec<f64> = tree
        .edge_weight_to_parent()
        .iter()
        .map(|w| (-scale * w).exp())
        .collect();
    DiscreteScanParams::new(
        LaneTensor::from_vec(l, 1, 1, a)?,
        LaneTensor::filled(l, 1, 1, 1.0),
    )
}

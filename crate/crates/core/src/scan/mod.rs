//! Selective state-space scanning over sequences and spanning trees.
//!
//! Every kernel works lane by lane: a lane is one `(channel, state)` pair and
//! carries an independent scalar recurrence over the `L` tokens. Transition
//! scalars `a_bar[i]` are attached to the tree edge `(i, parent[i])` of the
//! tree's own rooting and reused unchanged by every path that crosses that
//! edge.

mod affinity;
mod block;
mod naive;
mod params;
mod tree;

pub use affinity::{affinity_map, transitions_from_edge_weights};
pub use block::{block_backward, block_forward, BlockGrads, ScanMode};
pub use naive::{naive_causal_scan, naive_tree_scan, Roots, NAIVE_MAX_VERTICES};
pub use params::{
    discretize, discretize_backward, output_projection, output_projection_backward,
    ContinuousGrads, ContinuousScanParams, DiscreteScanParams, NormMode, ProjectionGrads,
};
pub use tree::{
    sequential_selective_scan, sequential_selective_scan_backward, tree_scan_language_backward,
    tree_scan_language_forward, tree_scan_vision_backward, tree_scan_vision_forward, GradBundle,
    VisionForward,
};

use crate::error::{Error, Result};
use crate::lattice::FeatureMap;
use crate::mst::SpanningTree;
use crate::tensor::LaneTensor;

/// Hidden states `h`, shaped `L x C x N` like the discrete parameters.
pub type HiddenStates = LaneTensor;

/// One `(channel, state)` coordinate of the lane dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lane {
    pub channel: usize,
    pub state: usize,
}

impl Lane {
    pub fn new(channel: usize, state: usize) -> Self {
        Self { channel, state }
    }

    /// Flat offset inside a token row of a tensor with `states` states.
    #[inline]
    pub fn offset(self, states: usize) -> usize {
        self.channel * states + self.state
    }

    /// Every lane of a `channels x states` layout, in row order.
    pub fn all(channels: usize, states: usize) -> impl Iterator<Item = Lane> {
        (0..channels).flat_map(move |c| (0..states).map(move |n| Lane::new(c, n)))
    }
}

impl LaneTensor {
    /// The `L` values of a single lane.
    pub fn lane_values(&self, lane: Lane) -> Vec<f64> {
        (0..self.tokens())
            .map(|i| self.get(i, lane.channel, lane.state))
            .collect()
    }
}

/// Equivalent sequential transitions for a chain rooted at its last token.
///
/// The sequential recurrence applies `a_bar[i]` when moving from token `i-1`
/// into token `i`; on a chain rooted at `L-1` that edge belongs to child
/// `i-1`. The returned parameters shift transitions down by one token so the
/// causal tree scan reproduces the sequential scan. The root's slot is 1 and
/// is never read.
pub fn chain_child_keyed(p: &DiscreteScanParams) -> DiscreteScanParams {
    let (l, c, n) = p.a_bar.shape();
    let a_bar = LaneTensor::from_fn(l, c, n, |i, ch, s| {
        if i + 1 < l {
            p.a_bar.get(i + 1, ch, s)
        } else {
            1.0
        }
    });
    DiscreteScanParams {
        a_bar,
        b_bar: p.b_bar.clone(),
    }
}

pub(crate) fn check_scan_shapes(
    x: &FeatureMap,
    p: &DiscreteScanParams,
    tree: Option<&SpanningTree>,
) -> Result<()> {
    let (l, c, _) = p.a_bar.shape();
    if !p.a_bar.same_shape(&p.b_bar) {
        return Err(Error::Shape(format!(
            "a_bar {:?} and b_bar {:?} differ",
            p.a_bar.shape(),
            p.b_bar.shape()
        )));
    }
    if x.len() != l || x.channels() != c {
        return Err(Error::Shape(format!(
            "features are {}x{} but parameters are {l}x{c}",
            x.len(),
            x.channels()
        )));
    }
    if let Some(t) = tree {
        if t.num_vertices() != l {
            return Err(Error::Shape(format!(
                "tree has {} vertices, features have {l} tokens",
                t.num_vertices()
            )));
        }
    }
    Ok(())
}

/// Reports (as `Err`) when any lane of `g` has the wrong shape for `h`.
pub(crate) fn check_same(what: &str, expected: &LaneTensor, got: &LaneTensor) -> Result<()> {
    if expected.same_shape(got) {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "{what} has shape {:?}, expected {:?}",
            got.shape(),
            expected.shape()
        )))
    }
}

//! Discretize, scan and project in one call, with gradients for the
//! continuous parameters by the chain rule.

use super::params::{
    discretize, discretize_backward, output_projection, output_projection_backward,
    ContinuousGrads, ContinuousScanParams, NormMode,
};
use super::tree::{
    tree_scan_language_backward, tree_scan_language_forward, tree_scan_vision_backward,
    tree_scan_vision_forward,
};
use crate::error::Result;
use crate::lattice::FeatureMap;
use crate::mst::SpanningTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScanMode {
    /// Every vertex aggregates the whole tree.
    #[default]
    Vision,
    /// Every vertex aggregates its own subtree; root must be the last token.
    Language,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub params: ContinuousGrads,
    /// `L x C`, through both the scan and the feedthrough term.
    pub d_x: Vec<f64>,
}

pub fn block_forward(
    x: &FeatureMap,
    params: &ContinuousScanParams,
    tree: &SpanningTree,
    mode: ScanMode,
    norm: NormMode,
) -> Result<FeatureMap> {
    let p = discretize(params)?;
    let h = match mode {
        ScanMode::Vision => tree_scan_vision_forward(x, &p, tree)?.hidden,
        ScanMode::Language => tree_scan_language_forward(x, &p, tree)?,
    };
    output_projection(&h, params, x, norm)
}

/// Gradients of `sum(d_y * Y)` with respect to every continuous parameter and
/// the input features.
pub fn block_backward(
    x: &FeatureMap,
    params: &ContinuousScanParams,
    tree: &SpanningTree,
    mode: ScanMode,
    norm: NormMode,
    d_y: &[f64],
) -> Result<BlockGrads> {
    let p = discretize(params)?;
    let (scan_grads, proj) = match mode {
        ScanMode::Vision => {
            let fwd = tree_scan_vision_forward(x, &p, tree)?;
            let proj = output_projection_backward(&fwd.hidden, params, x, norm, d_y)?;
            (
                tree_scan_vision_backward(x, &p, tree, &fwd, &proj.d_h)?,
                proj,
            )
        }
        ScanMode::Language => {
            let h = tree_scan_language_forward(x, &p, tree)?;
            let proj = output_projection_backward(&h, params, x, norm, d_y)?;
            (
                tree_scan_language_backward(x, &p, tree, &h, &proj.d_h)?,
                proj,
            )
        }
    };
    let mut grads = discretize_backward(params, &p, &scan_grads.d_a_bar, &scan_grads.d_b_bar)?;
    grads.d_c_out = proj.d_c_out;
    grads.d_d = proj.d_d;
    let d_x = proj
        .d_x
        .iter()
        .zip(scan_grads.d_x.as_slice())
        .map(|(a, b)| a + b)
        .collect();
    Ok(BlockGrads { params: grads, d_x })
}

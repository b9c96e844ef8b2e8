use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use treescan::scan::transitions_from_edge_weights;
use treescan::{
    affinity_map, boruvka_mst, build_grid_graph, discretize, root_tree, tree_scan_language_forward,
    tree_scan_vision_forward, DistanceMetric, FeatureMap, SpanningTree,
};

use crate::io::{self, Dtype, Tensor};
use crate::Mode;

fn load_features(path: &Path) -> Result<FeatureMap> {
    let t = io::read_tensor(path)?;
    ensure!(
        t.shape.len() == 2,
        "input tensor must have shape (L, C), got {:?}",
        t.shape
    );
    Ok(FeatureMap::new(t.data, t.shape[0], t.shape[1])?)
}

fn check_grid(tree: &SpanningTree, height: usize, width: usize) -> Result<()> {
    ensure!(
        height * width == tree.num_vertices(),
        "--height {height} x --width {width} must equal the tree's {} vertices",
        tree.num_vertices()
    );
    Ok(())
}

pub fn tree(
    input: &Path,
    height: usize,
    width: usize,
    metric: DistanceMetric,
    root: usize,
    out: &Path,
) -> Result<SpanningTree> {
    let features = load_features(input)?;
    ensure!(
        features.len() == height * width,
        "input has {} rows; --height {height} x --width {width} needs {}",
        features.len(),
        height * width
    );
    ensure!(
        root < features.len(),
        "--root {root} is out of range for {} pixels",
        features.len()
    );
    let features = features.with_spatial(height, width)?;
    let graph = build_grid_graph(&features, metric)?;
    let edges = boruvka_mst(&graph)?;
    let tree = root_tree(&edges, features.len(), root)?;
    io::write_tree(out, &tree)?;
    Ok(tree)
}

pub fn scan(input: &Path, tree: &Path, params: &Path, mode: Mode, out: &Path) -> Result<()> {
    let x = load_features(input)?;
    let tree = io::read_tree(tree)?;
    let params = io::read_params(params)?;
    let l = x.len();
    ensure!(
        tree.num_vertices() == l,
        "tree has {} vertices, input has {l} tokens",
        tree.num_vertices()
    );
    ensure!(
        params.tokens == l && params.channels == x.channels(),
        "params are for L={} C={}, input is L={l} C={}",
        params.tokens,
        params.channels,
        x.channels()
    );
    let p = discretize(&params)?;
    let h = match mode {
        Mode::Vision => tree_scan_vision_forward(&x, &p, &tree)?.hidden,
        Mode::Language => {
            ensure!(
                tree.root() == l - 1,
                "language mode requires the tree root to be the last token {}, got root {}",
                l - 1,
                tree.root()
            );
            tree_scan_language_forward(&x, &p, &tree)?
        }
    };
    let (tokens, channels, states) = h.shape();
    io::write_tensor(
        out,
        &Tensor::new(vec![tokens, channels, states], h.into_vec())?,
        Dtype::F64,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub enum AffinitySource {
    Params(PathBuf),
    EdgeWeights { scale: f64 },
}

/// Returns the mean-lane affinity per pixel, row-major.
pub fn affinity(
    tree: &Path,
    source: AffinitySource,
    anchor: usize,
    height: usize,
    width: usize,
    out: &Path,
) -> Result<Vec<f64>> {
    let tree = io::read_tree(tree)?;
    check_grid(&tree, height, width)?;
    ensure!(
        anchor < tree.num_vertices(),
        "--anchor {anchor} is out of range for {} pixels",
        tree.num_vertices()
    );
    let p = match source {
        AffinitySource::Params(path) => {
            let params = io::read_params(&path)?;
            ensure!(
                params.tokens == tree.num_vertices(),
                "params are for L={}, tree has {} vertices",
                params.tokens,
                tree.num_vertices()
            );
            discretize(&params)?
        }
        AffinitySource::EdgeWeights { scale } => transitions_from_edge_weights(&tree, scale)?,
    };
    let values = affinity_map(&tree, &p, anchor)?;
    let image = io::encode_pgm(width, height, &io::to_grey(&values))?;
    fs::write(out, image).with_context(|| format!("writing {}", out.display()))?;
    Ok(values)
}

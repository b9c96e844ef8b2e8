//! On-disk formats: raw tensors with a JSON header, tree dumps, continuous
//! parameter files and binary PGM images.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use treescan::{ContinuousScanParams, SpanningTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    pub fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub shape: Vec<usize>,
    pub dtype: Dtype,
    pub layout: String,
}

/// A dense tensor held as `f64` regardless of the on-disk dtype.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        ensure!(!shape.is_empty(), "tensor shape must be nonempty");
        let count: usize = shape.iter().product();
        ensure!(
            count == data.len(),
            "shape {shape:?} holds {count} values, got {}",
            data.len()
        );
        Ok(Self { shape, data })
    }
}

/// Header and payload paths for a tensor argument: `name.json` + `name.bin`.
/// Any extension on the argument is replaced.
pub fn tensor_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let (header_path, payload_path) = tensor_paths(path);
    let header: TensorHeader = serde_json::from_slice(
        &fs::read(&header_path)
            .with_context(|| format!("reading tensor header {}", header_path.display()))?,
    )
    .with_context(|| format!("parsing tensor header {}", header_path.display()))?;
    ensure!(
        !header.shape.is_empty(),
        "tensor header: shape must be nonempty"
    );
    ensure!(
        header.layout == "row-major",
        "tensor header: layout must be \"row-major\", got {:?}",
        header.layout
    );
    let bytes = fs::read(&payload_path)
        .with_context(|| format!("reading tensor payload {}", payload_path.display()))?;
    let count: usize = header.shape.iter().product();
    ensure!(
        bytes.len() == count * header.dtype.size(),
        "tensor payload is {} bytes; shape {:?} as {:?} needs {}",
        bytes.len(),
        header.shape,
        header.dtype,
        count * header.dtype.size()
    );
    let data: Vec<f64> = match header.dtype {
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect(),
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect(),
    };
    if let Some(k) = data.iter().position(|v| !v.is_finite()) {
        bail!(
            "tensor {} has a non-finite value at flat index {k}",
            payload_path.display()
        );
    }
    Tensor::new(header.shape, data)
}

pub fn write_tensor(path: &Path, tensor: &Tensor, dtype: Dtype) -> Result<()> {
    let (header_path, payload_path) = tensor_paths(path);
    let header = TensorHeader {
        shape: tensor.shape.clone(),
        dtype,
        layout: "row-major".into(),
    };
    let mut bytes = Vec::with_capacity(tensor.data.len() * dtype.size());
    for &v in &tensor.data {
        match dtype {
            Dtype::F64 => bytes.extend_from_slice(&v.to_le_bytes()),
            Dtype::F32 => bytes.extend_from_slice(&(v as f32).to_le_bytes()),
        }
    }
    fs::write(&payload_path, bytes)
        .with_context(|| format!("writing {}", payload_path.display()))?;
    fs::write(&header_path, serde_json::to_vec_pretty(&header)?)
        .with_context(|| format!("writing {}", header_path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub num_vertices: usize,
    pub root: usize,
    pub parent: Vec<usize>,
    pub bfs_order: Vec<usize>,
    pub edge_weight_to_parent: Vec<f64>,
}

impl From<&SpanningTree> for TreeFile {
    fn from(t: &SpanningTree) -> Self {
        Self {
            num_vertices: t.num_vertices(),
            root: t.root(),
            parent: t.parent().to_vec(),
            bfs_order: t.bfs_order().to_vec(),
            edge_weight_to_parent: t.edge_weight_to_parent().to_vec(),
        }
    }
}

impl TreeFile {
    /// Validates every tree invariant and rebuilds the canonical traversal.
    /// The stored breadth-first order must be valid but need not match the
    /// canonical child ordering.
    pub fn into_tree(self) -> Result<SpanningTree> {
        let n = self.num_vertices;
        ensure!(n >= 1, "tree file: num_vertices must be at least 1");
        ensure!(
            self.parent.len() == n && self.bfs_order.len() == n && self.edge_weight_to_parent.len() == n,
            "tree file: parent, bfs_order and edge_weight_to_parent must all have num_vertices = {n} entries"
        );
        if let Some(k) = self
            .edge_weight_to_parent
            .iter()
            .position(|w| !w.is_finite() || *w < 0.0)
        {
            bail!("tree file: edge_weight_to_parent[{k}] must be finite and nonnegative");
        }
        ensure!(
            self.bfs_order.first() == Some(&self.root),
            "tree file: bfs_order must start with the root {}",
            self.root
        );
        let tree =
            SpanningTree::from_parents(self.root, self.parent.clone(), self.edge_weight_to_parent)
                .context("tree file: parent array is not a rooted spanning tree")?;
        let mut position = vec![usize::MAX; n];
        for (k, &v) in self.bfs_order.iter().enumerate() {
            ensure!(
                v < n && position[v] == usize::MAX,
                "tree file: bfs_order is not a permutation of 0..{n}"
            );
            position[v] = k;
        }
        for v in (0..n).filter(|&v| v != self.root) {
            ensure!(
                position[self.parent[v]] < position[v],
                "tree file: bfs_order lists vertex {v} before its parent {}",
                self.parent[v]
            );
        }
        Ok(tree)
    }
}

pub fn read_tree(path: &Path) -> Result<SpanningTree> {
    let file: TreeFile = serde_json::from_slice(
        &fs::read(path).with_context(|| format!("reading tree file {}", path.display()))?,
    )
    .with_context(|| format!("parsing tree file {}", path.display()))?;
    file.into_tree()
}

pub fn write_tree(path: &Path, tree: &SpanningTree) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(&TreeFile::from(tree))?)
        .with_context(|| format!("writing {}", path.display()))
}

/// Continuous parameters as flat row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub tokens: usize,
    pub channels: usize,
    pub states: usize,
    /// `channels x states`
    pub a: Vec<f64>,
    /// `tokens x states`
    pub b: Vec<f64>,
    /// `tokens x states`
    pub c_out: Vec<f64>,
    /// `channels`
    pub d: Vec<f64>,
    /// `tokens x channels`
    pub delta: Vec<f64>,
}

impl From<&ContinuousScanParams> for ParamsFile {
    fn from(p: &ContinuousScanParams) -> Self {
        Self {
            tokens: p.tokens,
            channels: p.channels,
            states: p.states,
            a: p.a.clone(),
            b: p.b.clone(),
            c_out: p.c_out.clone(),
            d: p.d.clone(),
            delta: p.delta.clone(),
        }
    }
}

impl ParamsFile {
    pub fn into_params(self) -> Result<ContinuousScanParams> {
        let p = ContinuousScanParams {
            tokens: self.tokens,
            channels: self.channels,
            states: self.states,
            a: self.a,
            b: self.b,
            c_out: self.c_out,
            d: self.d,
            delta: self.delta,
        };
        p.validate().context("params file")?;
        Ok(p)
    }
}

pub fn read_params(path: &Path) -> Result<ContinuousScanParams> {
    let file: ParamsFile = serde_json::from_slice(
        &fs::read(path).with_context(|| format!("reading params file {}", path.display()))?,
    )
    .with_context(|| format!("parsing params file {}", path.display()))?;
    file.into_params()
}

pub fn write_params(path: &Path, params: &ContinuousScanParams) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(&ParamsFile::from(params))?)
        .with_context(|| format!("writing {}", path.display()))
}

/// Binary greyscale PGM (`P5`, maxval 255).
pub fn encode_pgm(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    ensure!(
        pixels.len() == width * height,
        "{} pixels for a {width}x{height} image",
        pixels.len()
    );
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    Ok(out)
}

/// Maps values in `[0, 1]` to `round(255 * v)`.
pub fn to_grey(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .map(|v| (255.0 * v.clamp(0.0, 1.0)).round() as u8)
        .collect()
}

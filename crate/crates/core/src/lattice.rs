//! Feature containers and the input-aware graphs built over them.
//!
//! Vision inputs get a 4-connected pixel lattice; language inputs connect each
//! token to its `m` predecessors. Edge weights are the dissimilarity of the two
//! endpoint feature vectors under a [`DistanceMetric`].

use std::fmt;
use std::str::FromStr;

use crate::error::{ensure_finite, Error, Result};
use crate::mst::UnionFind;

/// `L x C` real features, optionally tagged with a spatial `(H, W)` shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    data: Vec<f64>,
    len: usize,
    channels: usize,
    spatial: Option<(usize, usize)>,
}

impl FeatureMap {
    /// Sequence features (no spatial shape). `data` is row-major `len x channels`.
    pub fn new(data: Vec<f64>, len: usize, channels: usize) -> Result<Self> {
        if len == 0 || channels == 0 {
            return Err(Error::Invalid(format!(
                "feature map needs at least one token and one channel, got {len}x{channels}"
            )));
        }
        if data.len() != len * channels {
            return Err(Error::Shape(format!(
                "{} values cannot fill a {len}x{channels} feature map",
                data.len()
            )));
        }
        ensure_finite("feature map", &data)?;
        Ok(Self {
            data,
            len,
            channels,
            spatial: None,
        })
    }

    /// Image features: `height * width` pixels in row-major order.
    pub fn spatial(data: Vec<f64>, height: usize, width: usize, channels: usize) -> Result<Self> {
        let mut map = Self::new(data, height * width, channels)?;
        map.spatial = Some((height, width));
        Ok(map)
    }

    pub fn from_fn(
        len: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let data = (0..len)
            .flat_map(|i| (0..channels).map(move |c| (i, c)))
            .map(|(i, c)| f(i, c))
            .collect();
        Self::new(data, len, channels)
    }

    /// Attach or replace the spatial shape. Requires `height * width == len`.
    pub fn with_spatial(mut self, height: usize, width: usize) -> Result<Self> {
        if height * width != self.len {
            return Err(Error::Shape(format!(
                "spatial shape {height}x{width} does not cover {} tokens",
                self.len
            )));
        }
        self.spatial = Some((height, width));
        Ok(self)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spatial_shape(&self) -> Option<(usize, usize)> {
        self.spatial
    }

    #[inline]
    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.data[i * self.channels + c]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Pixel coordinates `(row, col)` of vertex `i`, if spatial.
    pub fn coords(&self, i: usize) -> Option<(usize, usize)> {
        self.spatial.map(|(_, w)| (i / w, i % w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum DistanceMetric {
    #[default]
    Cosine,
    Euclidean,
    Manhattan,
}

impl DistanceMetric {
    pub const ALL: [DistanceMetric; 3] = [Self::Cosine, Self::Euclidean, Self::Manhattan];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cosine => "cosine",
            Self::Euclidean => "euclidean",
            Self::Manhattan => "manhattan",
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistanceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Self::Cosine),
            "euclidean" => Ok(Self::Euclidean),
            "manhattan" => Ok(Self::Manhattan),
            other => Err(Error::Invalid(format!("unknown distance metric `{other}`"))),
        }
    }
}

/// Dissimilarity between two feature vectors.
///
/// Cosine distance is clamped to `[0, 2]`; a zero-norm operand has distance 1
/// to everything, itself included.
pub fn vertex_dissimilarity(metric: DistanceMetric, a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!(
            "dissimilarity needs equal non-empty lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dissimilarity_unchecked(metric, a, b))
}

fn dissimilarity_unchecked(metric: DistanceMetric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        DistanceMetric::Cosine => {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (x, y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                return 1.0;
            }
            // sqrt(na * na) == na exactly, so identical vectors give exactly 0.
            (1.0 - dot / (na * nb).sqrt()).clamp(0.0, 2.0)
        }
        DistanceMetric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        DistanceMetric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

/// Undirected weighted edge with canonical endpoints `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

impl Edge {
    /// Builds an edge with endpoints reordered so that `u < v`.
    pub fn new(a: usize, b: usize, weight: f64) -> Self {
        let (u, v) = if a < b { (a, b) } else { (b, a) };
        Self { u, v, weight }
    }

    /// Total order used for tie-breaking: weight, then `(u, v)`.
    pub fn cmp_order(&self, other: &Edge) -> std::cmp::Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then(self.u.cmp(&other.u))
            .then(self.v.cmp(&other.v))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    num_vertices: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    /// Validates canonical ordering, range, weights and uniqueness. Connectivity
    /// is not required here; use [`WeightedGraph::is_connected`].
    pub fn new(num_vertices: usize, edges: Vec<Edge>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.u >= e.v {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) is not in canonical u < v order",
                    e.u, e.v
                )));
            }
            if e.v >= num_vertices {
                return Err(Error::VertexOutOfRange {
                    index: e.v,
                    len: num_vertices,
                });
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::Invalid(format!(
                    "edge ({}, {}) has weight {}; weights must be finite and nonnegative",
                    e.u, e.v, e.weight
                )));
            }
            if !seen.insert((e.u, e.v)) {
                return Err(Error::Invalid(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
        }
        Ok(Self {
            num_vertices,
            edges,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// First vertex not reachable from vertex 0, if any.
    pub fn first_unreached(&self) -> Option<usize> {
        let mut uf = UnionFind::new(self.num_vertices);
        for e in &self.edges {
            uf.union(e.u, e.v);
        }
        (1..self.num_vertices).find(|&v| !uf.same(0, v))
    }

    pub fn is_connected(&self) -> bool {
        self.first_unreached().is_none()
    }
}

/// 4-connected pixel lattice over a spatial feature map.
///
/// Edges are emitted in row-major order: for each pixel, its right neighbour
/// then its lower neighbour.
pub fn build_grid_graph(feature: &FeatureMap, metric: DistanceMetric) -> Result<WeightedGraph> {
    let (h, w) = feature
        .spatial_shape()
        .ok_or_else(|| Error::Invalid("grid graph needs a spatial (H, W) shape".into()))?;
    if h * w < 2 {
        return Err(Error::Invalid(format!(
            "a {h}x{w} map has no neighbouring pixels"
        )));
    }
    let mut edges = Vec::with_capacity(h * (w - 1) + w * (h - 1));
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                let d = dissimilarity_unchecked(metric, feature.row(i), feature.row(i + 1));
                edges.push(Edge::new(i, i + 1, d));
            }
            if r + 1 < h {
                let d = dissimilarity_unchecked(metric, feature.row(i), feature.row(i + w));
                edges.push(Edge::new(i, i + w, d));
            }
        }
    }
    Ok(WeightedGraph {
        num_vertices: h * w,
        edges,
    })
}

/// Causal graph: token `i` is linked to each of its `m` predecessors.
pub fn build_causal_graph(
    feature: &FeatureMap,
    m: usize,
    metric: DistanceMetric,
) -> Result<WeightedGraph> {
    let len = feature.len();
    if len < 2 {
        return Err(Error::Invalid(
            "causal graph needs at least two tokens".into(),
        ));
    }
    if m == 0 {
        return Err(Error::Invalid("causal window m must be at least 1".into()));
    }
    let mut edges = Vec::with_capacity(len * m.min(len));
    for i in 1..len {
        for j in i.saturating_sub(m)..i {
            let d = dissimilarity_unchecked(metric, feature.row(j), feature.row(i));
            edges.push(Edge::new(j, i, d));
        }
    }
    Ok(WeightedGraph {
        num_vertices: len,
        edges,
    })
}

//! Tree-topology state-space scanning.
//!
//! The pipeline turns a feature map into a 4-connected (or causal m-connected)
//! graph weighted by feature dissimilarity, extracts its minimum spanning tree
//! with Boruvka contraction, and then runs a selective state-space recurrence
//! over that tree. Every vertex aggregates the inputs of every other vertex,
//! attenuated by the product of transition scalars along the connecting tree
//! path. Two traversals (leaf to root, then root to leaf) compute that
//! all-pairs aggregation in linear time; the backward pass has the same shape.
//!
//! [`oracle`] holds deliberately slow reference implementations used by the
//! test suites and by the `selfcheck` command.

pub mod error;
pub mod gen;
pub mod lattice;
pub mod mst;
pub mod oracle;
pub mod scan;
pub mod tensor;

pub use error::{Error, Result};
pub use lattice::{
    build_causal_graph, build_grid_graph, vertex_dissimilarity, DistanceMetric, Edge, FeatureMap,
    WeightedGraph,
};
pub use mst::{boruvka_mst, root_tree, SpanningTree, UnionFind};
pub use scan::{
    affinity_map, discretize, naive_tree_scan, output_projection, sequential_selective_scan,
    tree_scan_language_backward, tree_scan_language_forward, tree_scan_vision_backward,
    tree_scan_vision_forward, ContinuousScanParams, DiscreteScanParams, GradBundle, HiddenStates,
    Lane, NormMode, Roots, VisionForward,
};
pub use tensor::LaneTensor;

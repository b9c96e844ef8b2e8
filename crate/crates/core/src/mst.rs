//! Minimum spanning tree extraction and rooting.

use std::cmp::Ordering;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lattice::{Edge, WeightedGraph};

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Merges the sets of `a` and `b`; returns false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    pub fn components(&self) -> usize {
        self.components
    }
}

/// Minimum spanning tree by contractive Boruvka.
///
/// Each round picks the cheapest edge leaving every component (ties broken by
/// the lexicographic `(u, v)` pair), merges along those edges, then drops the
/// edges that became internal. Rounds at least halve the component count.
/// The result is sorted by `(u, v)`.
pub fn boruvka_mst(graph: &WeightedGraph) -> Result<Vec<Edge>> {
    let n = graph.num_vertices();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "spanning tree needs at least two vertices, got {n}"
        )));
    }
    let mut uf = UnionFind::new(n);
    let mut live: Vec<Edge> = graph.edges().to_vec();
    let mut tree = Vec::with_capacity(n - 1);
    let mut cheapest: Vec<Option<usize>> = vec![None; n];

    while uf.components() > 1 {
        cheapest.iter_mut().for_each(|c| *c = None);
        for (k, e) in live.iter().enumerate() {
            let (ru, rv) = (uf.find(e.u), uf.find(e.v));
            debug_assert_ne!(ru, rv);
            for r in [ru, rv] {
                match cheapest[r] {
                    Some(best) if live[best].cmp_order(e) != Ordering::Greater => {}
                    _ => cheapest[r] = Some(k),
                }
            }
        }

        let mut merged = false;
        for k in cheapest.iter().flatten().copied() {
            let e = live[k];
            if uf.union(e.u, e.v) {
                tree.push(e);
                merged = true;
            }
        }
        if !merged {
            let unreached = (1..n).find(|&v| !uf.same(0, v)).unwrap_or(0);
            return Err(Error::Disconnected { from: 0, unreached });
        }

        live.retain(|e| uf.find(e.u) != uf.find(e.v));
    }

    tree.sort_by_key(|e| (e.u, e.v));
    Ok(tree)
}

/// A spanning tree rooted for traversal.
///
/// Vertex `i != root` owns the edge `(i, parent[i])`; per-vertex edge
/// attributes (the transition scalars of the scan) are keyed by that child
/// vertex under this rooting.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningTree {
    root: usize,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    bfs_order: Vec<usize>,
    edge_weight_to_parent: Vec<f64>,
    /// Depth-first preorder used by the scan kernels.
    scan_order: Vec<usize>,
    /// `scan_parent[q]`: position in `scan_order` of the parent of `scan_order[q]`.
    scan_parent: Vec<usize>,
}

impl SpanningTree {
    /// Rebuilds a tree from a parent array. Children are sorted ascending and
    /// the breadth-first order is recomputed.
    pub fn from_parents(
        root: usize,
        parent: Vec<usize>,
        edge_weight_to_parent: Vec<f64>,
    ) -> Result<Self> {
        let n = parent.len();
        if n == 0 {
            return Err(Error::NotATree("empty parent array".into()));
        }
        if edge_weight_to_parent.len() != n {
            return Err(Error::Shape(format!(
                "{} edge weights for {n} vertices",
                edge_weight_to_parent.len()
            )));
        }
        if root >= n {
            return Err(Error::VertexOutOfRange {
                index: root,
                len: n,
            });
        }
        if parent[root] != root {
            return Err(Error::NotATree(format!(
                "parent[root] must equal root {root}, got {}",
                parent[root]
            )));
        }
        let mut children = vec![Vec::new(); n];
        for (i, &p) in parent.iter().enumerate() {
            if p >= n {
                return Err(Error::VertexOutOfRange { index: p, len: n });
            }
            if i != root {
                if p == i {
                    return Err(Error::NotATree(format!("vertex {i} is its own parent")));
                }
                children[p].push(i);
            }
        }
        let bfs_order = bfs(root, &children);
        if bfs_order.len() != n {
            return Err(Error::NotATree(format!(
                "only {} of {n} vertices reachable from root {root}; parent pointers contain a cycle",
                bfs_order.len()
            )));
        }
        if root < n && edge_weight_to_parent[root] != 0.0 {
            return Err(Error::NotATree("root edge weight must be 0".into()));
        }
        Ok(Self::assemble(
            root,
            parent,
            children,
            bfs_order,
            edge_weight_to_parent,
        ))
    }

    fn assemble(
        root: usize,
        parent: Vec<usize>,
        children: Vec<Vec<usize>>,
        bfs_order: Vec<usize>,
        edge_weight_to_parent: Vec<f64>,
    ) -> Self {
        let n = parent.len();
        let mut scan_order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            scan_order.push(v);
            stack.extend(children[v].iter().rev());
        }
        let mut pos = vec![0; n];
        for (q, &v) in scan_order.iter().enumerate() {
            pos[v] = q;
        }
        let scan_parent = scan_order.iter().map(|&v| pos[parent[v]]).collect();
        Self {
            root,
            parent,
            children,
            bfs_order,
            edge_weight_to_parent,
            scan_order,
            scan_parent,
        }
    }

    /// Chain `0 - 1 - ... - (n-1)` rooted at `root`, unit weights.
    pub fn path(n: usize, root: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| Edge::new(i - 1, i, 1.0)).collect();
        root_tree(&edges, n, root)
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.parent.len()
    }

    #[inline]
    pub fn root(&self) -> usize {
        self.root
    }

    #[inline]
    pub fn parent(&self) -> &[usize] {
        &self.parent
    }

    #[inline]
    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    #[inline]
    pub fn bfs_order(&self) -> &[usize] {
        &self.bfs_order
    }

    pub fn edge_weight_to_parent(&self) -> &[f64] {
        &self.edge_weight_to_parent
    }

    /// Vertices in depth-first preorder, children ascending. Tree edges join
    /// neighbouring pixels, so this order keeps memory access local.
    #[inline]
    pub(crate) fn scan_order(&self) -> &[usize] {
        &self.scan_order
    }

    /// Parent positions within [`Self::scan_order`]; always smaller than the
    /// child's own position.
    #[inline]
    pub(crate) fn scan_parent(&self) -> &[usize] {
        &self.scan_parent
    }

    /// The `L - 1` undirected edges as canonical `(min, max)` pairs, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = (0..self.num_vertices())
            .filter(|&i| i != self.root)
            .map(|i| {
                let p = self.parent[i];
                (i.min(p), i.max(p))
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn total_weight(&self) -> f64 {
        self.edge_weight_to_parent.iter().sum()
    }

    /// Checks every structural invariant. Used after deserialization.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vertices();
        if self.bfs_order.len() != n || self.bfs_order.first() != Some(&self.root) {
            return Err(Error::NotATree(
                "bfs order must start at the root and cover every vertex".into(),
            ));
        }
        let mut pos = vec![usize::MAX; n];
        for (k, &v) in self.bfs_order.iter().enumerate() {
            if v >= n || pos[v] != usize::MAX {
                return Err(Error::NotATree("bfs order is not a permutation".into()));
            }
            pos[v] = k;
        }
        for v in 0..n {
            if v != self.root && pos[self.parent[v]] >= pos[v] {
                return Err(Error::NotATree(format!(
                    "vertex {v} appears before its parent in bfs order"
                )));
            }
            for &c in &self.children[v] {
                if self.parent[c] != v {
                    return Err(Error::NotATree(format!(
                        "child list of {v} disagrees with parent[{c}]"
                    )));
                }
            }
        }
        let child_count: usize = self.children.iter().map(Vec::len).sum();
        if child_count != n - 1 {
            return Err(Error::NotATree(format!(
                "{child_count} parent edges for {n} vertices"
            )));
        }
        Ok(())
    }
}

fn bfs(root: usize, children: &[Vec<usize>]) -> Vec<usize> {
    let mut order = Vec::with_capacity(children.len());
    let mut seen = vec![false; children.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &c in &children[v] {
            // A repeated vertex means the parent pointers loop back.
            if !seen[c] {
                seen[c] = true;
                queue.push_back(c);
            }
        }
    }
    order
}

/// Roots an undirected spanning tree at `root` by breadth-first search.
/// Children are visited in ascending vertex order.
pub fn root_tree(edges: &[Edge], num_vertices: usize, root: usize) -> Result<SpanningTree> {
    if root >= num_vertices {
        return Err(Error::VertexOutOfRange {
            index: root,
            len: num_vertices,
        });
    }
    if edges.len() + 1 != num_vertices {
        return Err(Error::NotATree(format!(
            "{} edges cannot span {num_vertices} vertices",
            edges.len()
        )));
    }
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_vertices];
    for e in edges {
        if e.u >= num_vertices || e.v >= num_vertices {
            return Err(Error::VertexOutOfRange {
                index: e.u.max(e.v),
                len: num_vertices,
            });
        }
        if e.u == e.v {
            return Err(Error::NotATree(format!("self-loop at {}", e.u)));
        }
        adj[e.u].push((e.v, e.weight));
        adj[e.v].push((e.u, e.weight));
    }
    for list in &mut adj {
        list.sort_by_key(|&(v, _)| v);
    }

    let mut parent = vec![usize::MAX; num_vertices];
    let mut weight = vec![0.0; num_vertices];
    let mut children = vec![Vec::new(); num_vertices];
    let mut order = Vec::with_capacity(num_vertices);
    let mut queue = VecDeque::from([root]);
    parent[root] = root;
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &(u, w) in &adj[v] {
            if u == parent[v] && v != root {
                continue;
            }
            if parent[u] != usize::MAX {
                return Err(Error::NotATree(format!("cycle through edge ({v}, {u})")));
            }
            parent[u] = v;
            weight[u] = w;
            children[v].push(u);
            queue.push_back(u);
        }
    }
    if order.len() != num_vertices {
        let missing = parent.iter().position(|&p| p == usize::MAX).unwrap_or(0);
        return Err(Error::Disconnected {
            from: root,
            unreached: missing,
        });
    }
    Ok(SpanningTree::assemble(
        root, parent, children, order, weight,
    ))
}

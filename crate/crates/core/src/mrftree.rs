//! Tree-structured random field over the detected cells: Euclidean minimum
//! spanning tree, root selection, and the parent-before-child sweep order.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Point;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Disjoint sets with path halving and union by size.
struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        DisjointSets {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Kruskal over the complete graph with Euclidean weights. Equal weights are
/// ordered by `(a, b)`.
pub fn build_mst(nodes: &[Point]) -> Result<Vec<Edge>> {
    if nodes.is_empty() {
        return Err(Error::Empty("spanning tree needs at least one node"));
    }
    let n = nodes.len();
    let mut all = Vec::with_capacity(n * (n - 1) / 2);
    for a in 0..n {
        for b in a + 1..n {
            all.push(Edge {
                a,
                b,
                weight: (nodes[a] - nodes[b]).norm(),
            });
        }
    }
    all.sort_by(|x, y| x.weight.total_cmp(&y.weight).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
    let mut sets = DisjointSets::new(n);
    let mut tree = Vec::with_capacity(n - 1);
    for e in all {
        if sets.union(e.a, e.b) {
            tree.push(e);
            if tree.len() == n - 1 {
                break;
            }
        }
    }
    Ok(tree)
}

fn adjacency(n: usize, edges: &[Edge]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.a].push(e.b);
        adj[e.b].push(e.a);
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

fn hop_distances(adj: &[Vec<usize>], from: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[from] = 0;
    let mut queue = VecDeque::from([from]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// The tree center: the node of minimum hop eccentricity, smallest id on ties.
pub fn choose_root(n: usize, edges: &[Edge]) -> usize {
    let adj = adjacency(n, edges);
    (0..n)
        .map(|v| (hop_distances(&adj, v).into_iter().max().unwrap_or(0), v))
        .min()
        .map(|(_, v)| v)
        .unwrap_or(0)
}

/// Breadth-first order from `root` (children in ascending id) and the parent
/// of every node (`None` for the root).
pub fn topological_order(n: usize, edges: &[Edge], root: usize) -> (Vec<usize>, Vec<Option<usize>>) {
    let adj = adjacency(n, edges);
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push_back(v);
            }
        }
    }
    (order, parent)
}

/// A rooted spanning tree over cell positions.
#[derive(Clone, Debug, PartialEq)]
pub struct CellTree {
    pub nodes: Vec<Point>,
    pub edges: Vec<Edge>,
    pub parent: Vec<Option<usize>>,
    pub root: usize,
    /// Sweep order: root first, every node after its parent.
    pub order: Vec<usize>,
}

impl CellTree {
    /// Minimum spanning tree rooted at its center.
    pub fn build(nodes: Vec<Point>) -> Result<Self> {
        let edges = build_mst(&nodes)?;
        let root = choose_root(nodes.len(), &edges);
        Self::from_edges(nodes, edges, root)
    }

    /// Roots a given edge set, checking that it spans the nodes.
    pub fn from_edges(nodes: Vec<Point>, edges: Vec<Edge>, root: usize) -> Result<Self> {
        let n = nodes.len();
        if n == 0 {
            return Err(Error::Empty("tree needs at least one node"));
        }
        if root >= n || edges.iter().any(|e| e.a >= n || e.b >= n) {
            return Err(Error::ShapeMismatch(format!("tree references nodes beyond {n}")));
        }
        if edges.len() != n - 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} edges cannot span {n} nodes as a tree",
                edges.len()
            )));
        }
        let (order, parent) = topological_order(n, &edges, root);
        if order.len() != n {
            return Err(Error::ShapeMismatch("edges do not connect every node".into()));
        }
        Ok(CellTree {
            nodes,
            edges,
            parent,
            root,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// `root <id>` followed by one `edge k1 k2 weight` line per edge.
    pub fn to_text(&self) -> String {
        let mut s = format!("root {}\n", self.root);
        for e in &self.edges {
            s.push_str(&format!("edge {} {} {}\n", e.a, e.b, e.weight));
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn parse(source: &str, text: &str, nodes: Vec<Point>) -> Result<Self> {
        let mut root = None;
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = |m: &str| Error::parse(source, i + 1, m.to_string());
            match f.as_slice() {
                [] => {}
                [c, ..] if c.starts_with('#') => {}
                ["root", id] => root = Some(id.parse::<usize>().map_err(|_| bad("bad root id"))?),
                ["edge", a, b, w] => edges.push(Edge {
                    a: a.parse().map_err(|_| bad("bad node id"))?,
                    b: b.parse().map_err(|_| bad("bad node id"))?,
                    weight: w.parse().map_err(|_| bad("bad weight"))?,
                }),
                _ => return Err(bad("expected `root <id>` or `edge k1 k2 weight`")),
            }
        }
        let root = root.ok_or_else(|| Error::parse(source, 0, "missing `root` line"))?;
        Self::from_edges(nodes, edges, root)
    }

    pub fn read(path: impl AsRef<Path>, nodes: Vec<Point>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&path.display().to_string(), &text, nodes)
    }
}

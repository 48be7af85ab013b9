//! Undirected simple graphs with sorted adjacency lists.
//!
//! Edges are always stored and iterated in canonical order: `u < v`, sorted
//! lexicographically. Every greedy routine in this crate inherits its
//! tie-breaking from that order.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rejection budget for connected Erdős–Rényi samples.
pub const ER_MAX_RETRIES: usize = 1000;

/// An unordered node pair, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    /// Builds the canonical form of `{a, b}`. Panics on a self-loop.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self-loop ({a}, {a}) is not an edge");
        if a < b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.u, self.v)
    }
}

impl From<(usize, usize)> for Edge {
    fn from((a, b): (usize, usize)) -> Self {
        Edge::new(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Add,
    Delete,
}

impl Direction {
    /// The perturbation weight: `+1` for additions, `-1` for deletions.
    pub fn weight(self) -> f64 {
        match self {
            Direction::Add => 1.0,
            Direction::Delete => -1.0,
        }
    }

    pub fn inverse(self) -> Self {
        match self {
            Direction::Add => Direction::Delete,
            Direction::Delete => Direction::Add,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Add => "add",
            Direction::Delete => "delete",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "add" => Ok(Direction::Add),
            "delete" => Ok(Direction::Delete),
            other => Err(Error::InvalidConfig(format!("unknown direction `{other}`"))),
        }
    }
}

/// A single edge flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDelta {
    pub edge: Edge,
    pub direction: Direction,
}

impl EdgeDelta {
    pub fn add(a: usize, b: usize) -> Self {
        EdgeDelta {
            edge: Edge::new(a, b),
            direction: Direction::Add,
        }
    }

    pub fn delete(a: usize, b: usize) -> Self {
        EdgeDelta {
            edge: Edge::new(a, b),
            direction: Direction::Delete,
        }
    }

    pub fn inverse(self) -> Self {
        EdgeDelta {
            edge: self.edge,
            direction: self.direction.inverse(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    num_edges: usize,
}

impl Graph {
    /// An edgeless graph on `num_nodes` nodes.
    pub fn empty(num_nodes: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); num_nodes],
            num_edges: 0,
        }
    }

    /// Builds a graph from node pairs, rejecting self-loops and duplicates.
    pub fn from_edges<I, E>(num_nodes: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = E>,
        E: Into<(usize, usize)>,
    {
        let mut g = Graph::empty(num_nodes);
        for (i, e) in edges.into_iter().enumerate() {
            let (a, b) = e.into();
            g.check_node(a)?;
            g.check_node(b)?;
            if a == b {
                return Err(Error::SelfLoopRejected {
                    line: i + 1,
                    node: a,
                });
            }
            let edge = Edge::new(a, b);
            if g.has_edge(edge) {
                return Err(Error::DuplicateEdgeRejected {
                    line: i + 1,
                    u: edge.u,
                    v: edge.v,
                });
            }
            g.insert(edge);
        }
        Ok(g)
    }

    pub fn num_nodes(&self) -> usize {
        self.adjacency.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Sorted neighbors of `u`.
    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn has_edge(&self, edge: Edge) -> bool {
        edge.v < self.num_nodes() && self.adjacency[edge.u].binary_search(&edge.v).is_ok()
    }

    /// Edges in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, nbrs)| {
            let start = nbrs.partition_point(|&v| v <= u);
            nbrs[start..].iter().map(move |&v| Edge { u, v })
        })
    }

    /// Non-adjacent node pairs in canonical order.
    pub fn non_edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let n = self.num_nodes();
        (0..n).flat_map(move |u| {
            let nbrs = &self.adjacency[u];
            (u + 1..n)
                .filter(move |v| nbrs.binary_search(v).is_err())
                .map(move |v| Edge { u, v })
        })
    }

    pub fn num_non_edges(&self) -> usize {
        let n = self.num_nodes();
        n * n.saturating_sub(1) / 2 - self.num_edges
    }

    /// Applies a flip in place; deletions may not isolate a node.
    pub fn apply(&mut self, delta: EdgeDelta) -> Result<()> {
        self.apply_with(delta, false)
    }

    /// Applies a flip in place. The graph is left untouched on error.
    pub fn apply_with(&mut self, delta: EdgeDelta, allow_isolation: bool) -> Result<()> {
        let Edge { u, v } = delta.edge;
        self.check_node(u)?;
        self.check_node(v)?;
        match delta.direction {
            Direction::Add => {
                if self.has_edge(delta.edge) {
                    return Err(Error::EdgeAlreadyPresent { u, v });
                }
                self.insert(delta.edge);
            }
            Direction::Delete => {
                if !self.has_edge(delta.edge) {
                    return Err(Error::EdgeAbsent { u, v });
                }
                if !allow_isolation {
                    if let Some(node) = [u, v].into_iter().find(|&x| self.degree(x) == 1) {
                        return Err(Error::WouldIsolateNode { node });
                    }
                }
                self.remove(delta.edge);
            }
        }
        Ok(())
    }

    /// Returns a copy with `delta` applied.
    pub fn with_delta(&self, delta: EdgeDelta) -> Result<Graph> {
        let mut g = self.clone();
        g.apply(delta)?;
        Ok(g)
    }

    /// True iff a breadth-first search from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut visited = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    visited += 1;
                    queue.push_back(v);
                }
            }
        }
        visited == n
    }

    /// Whether removing `edge` keeps the graph connected. Assumes the
    /// graph is connected and contains `edge`.
    pub fn stays_connected_without(&self, edge: Edge) -> bool {
        // BFS from u avoiding the edge itself; connected iff v is reached.
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([edge.u]);
        seen[edge.u] = true;
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if (x == edge.u && y == edge.v) || (x == edge.v && y == edge.u) {
                    continue;
                }
                if y == edge.v {
                    return true;
                }
                if !seen[y] {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        false
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node,
                num_nodes: self.num_nodes(),
            })
        }
    }

    fn insert(&mut self, Edge { u, v }: Edge) {
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a];
            let pos = list.partition_point(|&x| x < b);
            list.insert(pos, b);
        }
        self.num_edges += 1;
    }

    fn remove(&mut self, Edge { u, v }: Edge) {
        for (a, b) in [(u, v), (v, u)] {
            let list = &mut self.adjacency[a];
            if let Ok(pos) = list.binary_search(&b) {
                list.remove(pos);
            }
        }
        self.num_edges -= 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Ring { n: usize },
    ErdosRenyi { n: usize, m: usize },
    Path { n: usize },
    Complete { n: usize },
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphFamily::Ring { n } => write!(f, "ring:{n}"),
            GraphFamily::ErdosRenyi { n, m } => write!(f, "er:{n}:{m}"),
            GraphFamily::Path { n } => write!(f, "path:{n}"),
            GraphFamily::Complete { n } => write!(f, "complete:{n}"),
        }
    }
}

impl FromStr for GraphFamily {
    type Err = Error;

    /// Parses `ring:N`, `er:N:M`, `path:N` or `complete:N`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.parse::<usize>()
                .map_err(|_| Error::InvalidGenerator(format!("`{p}` is not a count in `{s}`")))
        };
        match parts.as_slice() {
            ["ring", n] => Ok(GraphFamily::Ring { n: num(n)? }),
            ["er", n, m] => Ok(GraphFamily::ErdosRenyi {
                n: num(n)?,
                m: num(m)?,
            }),
            ["path", n] => Ok(GraphFamily::Path { n: num(n)? }),
            ["complete", n] => Ok(GraphFamily::Complete { n: num(n)? }),
            _ => Err(Error::InvalidGenerator(format!(
                "`{s}` is not one of ring:N, er:N:M, path:N, complete:N"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub family: GraphFamily,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(family: GraphFamily, seed: u64) -> Self {
        GeneratorSpec { family, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            GraphFamily::Ring { n } if n < 3 => Err(Error::InvalidGenerator(format!(
                "ring needs at least 3 nodes, got {n}"
            ))),
            GraphFamily::ErdosRenyi { n, m } if m > n * n.saturating_sub(1) / 2 => {
                Err(Error::InvalidGenerator(format!(
                    "{m} edges do not fit in a simple graph on {n} nodes"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Builds the graph described by `spec`. Pure in `spec`.
pub fn generate(spec: &GeneratorSpec) -> Result<Graph> {
    spec.validate()?;
    match spec.family {
        GraphFamily::Ring { n } => Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))),
        GraphFamily::Path { n } => Graph::from_edges(n, (1..n).map(|i| (i - 1, i))),
        GraphFamily::Complete { n } => {
            Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
        }
        GraphFamily::ErdosRenyi { n, m } => erdos_renyi_connected(n, m, spec.seed),
    }
}

/// Uniform `m`-edge graph on `n` nodes, resampled until connected.
fn erdos_renyi_connected(n: usize, m: usize, seed: u64) -> Result<Graph> {
    let total = n * n.saturating_sub(1) / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..ER_MAX_RETRIES {
        let mut picks = index::sample(&mut rng, total, m).into_vec();
        picks.sort_unstable();
        let g = Graph::from_edges(n, decode_pairs(n, &picks))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::ConnectivityRetriesExhausted {
        retries: ER_MAX_RETRIES,
    })
}

/// Maps sorted linear indices over the upper triangle to node pairs.
fn decode_pairs(n: usize, sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(sorted.len());
    let mut u = 0;
    let mut row_start = 0;
    for &k in sorted {
        while k >= row_start + (n - 1 - u) {
            row_start += n - 1 - u;
            u += 1;
        }
        out.push((u, u + 1 + (k - row_start)));
    }
    out
}

/// Parses the `u v` edge-list format. `#` starts a comment; a
/// `# nodes=<n>` header fixes the node count, otherwise it is one more than
/// the largest endpoint.
pub fn read_edge_list(text: &str) -> Result<Graph> {
    let mut declared: Option<usize> = None;
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            for token in comment.split_whitespace() {
                if let Some(value) = token.strip_prefix("nodes=") {
                    let n = value.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("bad node count `{value}`"),
                    })?;
                    declared = Some(n);
                }
            }
            continue;
        }
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let fields: Vec<&str> = body.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `u v`, found `{body}`"),
            });
        }
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("`{s}` is not a node index"),
            })
        };
        pairs.push((line_no, parse(fields[0])?, parse(fields[1])?));
    }

    let max_node = pairs
        .iter()
        .map(|&(_, a, b)| a.max(b) + 1)
        .max()
        .unwrap_or(0);
    let n = match declared {
        Some(n) if n < max_node => {
            return Err(Error::Parse {
                line: pairs.iter().find(|p| p.1.max(p.2) >= n).map_or(0, |p| p.0),
                message: format!("node index exceeds declared count {n}"),
            })
        }
        Some(n) => n,
        None => max_node,
    };

    let mut g = Graph::empty(n);
    for (line, a, b) in pairs {
        if a == b {
            return Err(Error::SelfLoopRejected { line, node: a });
        }
        let edge = Edge::new(a, b);
        if g.has_edge(edge) {
            return Err(Error::DuplicateEdgeRejected {
                line,
                u: edge.u,
                v: edge.v,
            });
        }
        g.insert(edge);
    }
    Ok(g)
}

/// Canonical edge list: a `# nodes=<n> edges=<m>` header, then sorted `u v`
/// lines with `u < v`.
pub fn write_edge_list(g: &Graph) -> String {
    write_edge_list_with_comments(g, &[])
}

/// Canonical edge list preceded by extra `#` comment lines.
pub fn write_edge_list_with_comments(g: &Graph, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("# ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&format!(
        "# nodes={} edges={}\n",
        g.num_nodes(),
        g.num_edges()
    ));
    for e in g.edges() {
        out.push_str(&format!("{} {}\n", e.u, e.v));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> Graph {
        generate(&GeneratorSpec::new(GraphFamily::Ring { n }, 0)).unwrap()
    }

    #[test]
    fn ring_plus_chord_matches_base_graph() {
        let mut g = ring(8);
        g.apply(EdgeDelta::add(0, 3)).unwrap();
        assert_eq!(g.num_edges(), 9);
        assert_eq!(g.degree(0), 3);
        assert_eq!(g.degree(3), 3);
        g.apply(EdgeDelta::delete(3, 0)).unwrap();
        assert_eq!(g, ring(8));
    }

    #[test]
    fn delta_errors() {
        let mut g = ring(8);
        assert_eq!(
            g.apply(EdgeDelta::add(0, 1)),
            Err(Error::EdgeAlreadyPresent { u: 0, v: 1 })
        );
        assert_eq!(
            g.apply(EdgeDelta::delete(0, 4)),
            Err(Error::EdgeAbsent { u: 0, v: 4 })
        );
        let mut p2 = Graph::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(
            p2.apply(EdgeDelta::delete(0, 1)),
            Err(Error::WouldIsolateNode { node: 0 })
        );
        assert_eq!(p2.num_edges(), 1);
        p2.apply_with(EdgeDelta::delete(0, 1), true).unwrap();
        assert_eq!(p2.num_edges(), 0);
    }

    #[test]
    fn connectivity() {
        assert!(ring(8).is_connected());
        let two = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!two.is_connected());

        let mut g = ring(8);
        g.apply_with(EdgeDelta::delete(0, 1), true).unwrap();
        g.apply_with(EdgeDelta::delete(0, 7), true).unwrap();
        assert_eq!(g.degree(0), 0);
        assert!(!g.is_connected());
    }

    #[test]
    fn bridge_detection() {
        let mut g = ring(6);
        assert!(g.stays_connected_without(Edge::new(0, 1)));
        g.apply(EdgeDelta::delete(0, 1)).unwrap();
        for e in g.edges().collect::<Vec<_>>() {
            assert!(!g.stays_connected_without(e));
        }
    }

    #[test]
    fn generators() {
        let r = ring(8);
        assert_eq!((r.num_nodes(), r.num_edges()), (8, 8));
        assert!(r.degrees().iter().all(|&d| d == 2));

        let k3 = generate(&GeneratorSpec::new(GraphFamily::Complete { n: 3 }, 0)).unwrap();
        assert_eq!(k3.num_edges(), 3);

        let p = generate(&GeneratorSpec::new(GraphFamily::Path { n: 5 }, 0)).unwrap();
        assert_eq!(p.num_edges(), 4);

        let er = generate(&GeneratorSpec::new(
            GraphFamily::ErdosRenyi { n: 30, m: 58 },
            7,
        ))
        .unwrap();
        assert_eq!((er.num_nodes(), er.num_edges()), (30, 58));
        assert!(er.is_connected());
    }

    #[test]
    fn generator_validation() {
        let bad_ring = GeneratorSpec::new(GraphFamily::Ring { n: 2 }, 0);
        assert!(matches!(
            generate(&bad_ring),
            Err(Error::InvalidGenerator(_))
        ));
        let too_many = GeneratorSpec::new(GraphFamily::ErdosRenyi { n: 4, m: 7 }, 0);
        assert!(matches!(
            generate(&too_many),
            Err(Error::InvalidGenerator(_))
        ));
        let hopeless = GeneratorSpec::new(GraphFamily::ErdosRenyi { n: 20, m: 5 }, 0);
        assert_eq!(
            generate(&hopeless),
            Err(Error::ConnectivityRetriesExhausted { retries: 1000 })
        );
    }

    #[test]
    fn family_parsing() {
        assert_eq!(
            "ring:8".parse::<GraphFamily>().unwrap(),
            GraphFamily::Ring { n: 8 }
        );
        assert_eq!(
            "er:30:58".parse::<GraphFamily>().unwrap(),
            GraphFamily::ErdosRenyi { n: 30, m: 58 }
        );
        assert!("er:30".parse::<GraphFamily>().is_err());
        assert!("star:4".parse::<GraphFamily>().is_err());
        assert_eq!(GraphFamily::ErdosRenyi { n: 3, m: 2 }.to_string(), "er:3:2");
    }

    #[test]
    fn decode_covers_upper_triangle() {
        let n = 5;
        let all: Vec<usize> = (0..n * (n - 1) / 2).collect();
        let pairs = decode_pairs(n, &all);
        let expected: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        assert_eq!(pairs, expected);
    }

    #[test]
    fn edge_list_parsing() {
        let g = read_edge_list("0 1\n1 2\n").unwrap();
        let p3 = generate(&GeneratorSpec::new(GraphFamily::Path { n: 3 }, 0)).unwrap();
        assert_eq!(g, p3);

        assert_eq!(
            read_edge_list("3 3\n"),
            Err(Error::SelfLoopRejected { line: 1, node: 3 })
        );
        assert_eq!(
            read_edge_list("# hi\n0 1\n\n1 0\n"),
            Err(Error::DuplicateEdgeRejected {
                line: 4,
                u: 0,
                v: 1
            })
        );
        assert!(matches!(
            read_edge_list("0 1\n1 x\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read_edge_list("0 1 2\n"),
            Err(Error::Parse { line: 1, .. })
        ));

        let with_isolated = read_edge_list("# nodes=5 edges=1\n0 1\n").unwrap();
        assert_eq!(with_isolated.num_nodes(), 5);
    }

    #[test]
    fn canonical_writer() {
        let g = read_edge_list("2 1\n# note\n1 0 # trailing\n").unwrap();
        assert_eq!(write_edge_list(&g), "# nodes=3 edges=2\n0 1\n1 2\n");
    }

    #[test]
    fn non_edges_complement_edges() {
        let g = ring(6);
        let non: Vec<Edge> = g.non_edges().collect();
        assert_eq!(non.len(), g.num_non_edges());
        assert_eq!(non.len(), 15 - 6);
        assert!(non.iter().all(|&e| !g.has_edge(e)));
        assert!(non.windows(2).all(|w| w[0] < w[1]));
    }
}

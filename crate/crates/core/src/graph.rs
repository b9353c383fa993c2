//! Undirected agent networks.
//!
//! A [`Graph`] stores `n` agents and a deduplicated list of undirected edges
//! `(i, j)` with `i < j`. Generators cover the families used in experiments:
//! complete graphs, cycles, Gilbert random graphs and random geometric graphs
//! in a square.

use std::collections::VecDeque;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Number of samples drawn before a disconnected random family is reported.
pub const DEFAULT_MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Edges are normalized to `(min, max)`
    /// and must be distinct, in range and free of self-loops.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("graph needs at least one node".into()));
        }
        let mut list: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Topology(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            list.push((a.min(b), a.max(b)));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Topology(format!("duplicate edge {:?}", w[0])));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &list {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Graph {
            n,
            edges: list,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        reached == self.n
    }

    /// Two-coloring test; the simple random walk on a bipartite graph is periodic.
    pub fn is_bipartite(&self) -> bool {
        let mut color = vec![u8::MAX; self.n];
        for root in 0..self.n {
            if color[root] != u8::MAX {
                continue;
            }
            color[root] = 0;
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if color[v] == u8::MAX {
                        color[v] = 1 - color[u];
                        queue.push_back(v);
                    } else if color[v] == color[u] {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Edge-list text: `n m` on the first line, then one 0-indexed `i j` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", self.n, self.m());
        for (a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let (n, m) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            edges.push(parse_pair(line)?);
        }
        if edges.len() != m {
            return Err(Error::Parse(format!(
                "header announces {m} edges but {} were listed",
                edges.len()
            )));
        }
        Graph::new(n, edges)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Graph::from_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace();
    let mut next = || -> Result<usize> {
        it.next()
            .ok_or_else(|| Error::Parse(format!("expected two integers in {line:?}")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("{line:?}: {e}")))
    };
    let a = next()?;
    let b = next()?;
    if it.next().is_some() {
        return Err(Error::Parse(format!("trailing tokens in {line:?}")));
    }
    Ok((a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphFamily {
    Complete,
    Cycle,
    /// Each pair is joined independently with probability `p`.
    Gilbert {
        p: f64,
    },
    /// Uniform points in a `side × side` square joined when their distance is at most `radius`.
    Geometric {
        side: f64,
        radius: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpec {
    pub family: GraphFamily,
    pub n: usize,
    pub seed: u64,
}

impl GraphSpec {
    pub fn new(family: GraphFamily, n: usize, seed: u64) -> Self {
        GraphSpec { family, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Parameter("n must be positive".into()));
        }
        match self.family {
            GraphFamily::Complete => Ok(()),
            GraphFamily::Cycle if self.n < 3 => Err(Error::Parameter(format!(
                "a cycle needs n >= 3, got {}",
                self.n
            ))),
            GraphFamily::Cycle => Ok(()),
            GraphFamily::Gilbert { p } if !(p > 0.0 && p <= 1.0) => Err(Error::Parameter(format!(
                "gilbert p must lie in (0, 1], got {p}"
            ))),
            GraphFamily::Gilbert { .. } => Ok(()),
            GraphFamily::Geometric { side, radius } if !(side > 0.0 && radius > 0.0) => {
                Err(Error::Parameter(format!(
                    "geometric side and radius must be positive, got {side}, {radius}"
                )))
            }
            GraphFamily::Geometric { .. } => Ok(()),
        }
    }
}

/// Accepts `complete:N`, `cycle:N`, `gilbert:N:P` and `geometric:N:SIDE:RADIUS`.
/// The seed defaults to 0; use [`GraphSpec::seed`] to override it.
impl FromStr for GraphSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("graph spec {s:?} is missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("graph spec {s:?}: {e}")))
        };
        let n = parts
            .get(1)
            .ok_or_else(|| Error::Parse(format!("graph spec {s:?} has no node count")))?
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("graph spec {s:?}: {e}")))?;
        let (family, arity) = match parts[0] {
            "complete" => (GraphFamily::Complete, 2),
            "cycle" => (GraphFamily::Cycle, 2),
            "gilbert" => (GraphFamily::Gilbert { p: num(2)? }, 3),
            "geometric" => (
                GraphFamily::Geometric {
                    side: num(2)?,
                    radius: num(3)?,
                },
                4,
            ),
            other => return Err(Error::Parse(format!("unknown graph family {other:?}"))),
        };
        if parts.len() != arity {
            return Err(Error::Parse(format!(
                "graph spec {s:?} expects {arity} fields"
            )));
        }
        let spec = GraphSpec::new(family, n, 0);
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            GraphFamily::Complete => write!(f, "complete:{}", self.n),
            GraphFamily::Cycle => write!(f, "cycle:{}", self.n),
            GraphFamily::Gilbert { p } => write!(f, "gilbert:{}:{}", self.n, p),
            GraphFamily::Geometric { side, radius } => {
                write!(f, "geometric:{}:{}:{}", self.n, side, radius)
            }
        }
    }
}

/// Generates a graph using an RNG seeded from `spec.seed`.
pub fn generate(spec: &GraphSpec) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    generate_with(spec, &mut rng)
}

/// Generates a graph from `spec` drawing randomness from `rng`. Random
/// families are resampled until connected, at most [`DEFAULT_MAX_RESAMPLES`] times.
pub fn generate_with<R: Rng + ?Sized>(spec: &GraphSpec, rng: &mut R) -> Result<Graph> {
    spec.validate()?;
    let n = spec.n;
    match spec.family {
        GraphFamily::Complete => {
            Graph::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
        }
        GraphFamily::Cycle => Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))),
        GraphFamily::Gilbert { p } => resample(|| {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if p >= 1.0 || rng.random::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            Graph::new(n, edges)
        }),
        GraphFamily::Geometric { side, radius } => {
            resample(|| sample_geometric(n, side, radius, rng).map(|(_, g)| g))
        }
    }
}

fn resample(mut draw: impl FnMut() -> Result<Graph>) -> Result<Graph> {
    for _ in 0..DEFAULT_MAX_RESAMPLES {
        let g = draw()?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::Topology(format!(
        "no connected sample after {DEFAULT_MAX_RESAMPLES} attempts"
    )))
}

/// One geometric sample (no connectivity check). Returns the placed points
/// alongside the graph; pairs at exactly `radius` are joined.
pub fn sample_geometric<R: Rng + ?Sized>(
    n: usize,
    side: f64,
    radius: f64,
    rng: &mut R,
) -> Result<(Vec<[f64; 2]>, Graph)> {
    let points: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
        .collect();
    let graph = connect_within(&points, radius)?;
    Ok((points, graph))
}

/// Joins every pair of points at Euclidean distance at most `radius`.
pub fn connect_within(points: &[[f64; 2]], radius: f64) -> Result<Graph> {
    let n = points.len();
    let r2 = radius * radius;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let dx = points[i][0] - points[j][0];
            let dy = points[i][1] - points[j][1];
            if dx * dx + dy * dy <= r2 {
                edges.push((i, j));
            }
        }
    }
    Graph::new(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_four_has_six_edges() {
        let g = generate(&"complete:4".parse().unwrap()).unwrap();
        assert_eq!(g.m(), 6);
        assert!(g.degrees().iter().all(|&d| d == 3));
    }

    #[test]
    fn cycle_five() {
        let g = generate(&"cycle:5".parse().unwrap()).unwrap();
        assert_eq!(g.m(), 5);
        assert!(g.degrees().iter().all(|&d| d == 2));
        assert!(g.is_connected());
    }

    #[test]
    fn two_disjoint_edges_are_disconnected() {
        let g = Graph::new(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(matches!(Graph::new(3, [(1, 1)]), Err(Error::Topology(_))));
        assert!(matches!(Graph::new(3, [(0, 3)]), Err(Error::Topology(_))));
        assert!(matches!(
            Graph::new(3, [(0, 1), (1, 0)]),
            Err(Error::Topology(_))
        ));
    }

    #[test]
    fn invalid_specs() {
        assert!("gilbert:10:0".parse::<GraphSpec>().is_err());
        assert!("gilbert:10:1.5".parse::<GraphSpec>().is_err());
        assert!("geometric:10:0:1".parse::<GraphSpec>().is_err());
        assert!("geometric:10:30:-1".parse::<GraphSpec>().is_err());
        assert!("cycle:2".parse::<GraphSpec>().is_err());
        assert!("star:4".parse::<GraphSpec>().is_err());
        assert!("complete:4:1".parse::<GraphSpec>().is_err());
    }

    #[test]
    fn spec_display_round_trips() {
        for s in [
            "complete:7",
            "cycle:9",
            "gilbert:12:0.25",
            "geometric:50:30:15",
        ] {
            let spec: GraphSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn gilbert_one_is_complete() {
        for n in [1, 2, 5, 11] {
            let g = generate(&GraphSpec::new(GraphFamily::Gilbert { p: 1.0 }, n, 3)).unwrap();
            let k = generate(&GraphSpec::new(GraphFamily::Complete, n, 0)).unwrap();
            assert_eq!(g, k);
        }
    }

    #[test]
    fn closed_ball_connects_at_exact_radius() {
        let g = connect_within(&[[0.0, 0.0], [15.0, 0.0], [15.0, 15.5]], 15.0).unwrap();
        assert!(g.has_edge(0, 1));
        assert!(!g.has_edge(1, 2));
        assert!(!g.has_edge(0, 2));
    }

    #[test]
    fn edge_list_format() {
        let g = Graph::new(3, [(2, 0), (1, 2)]).unwrap();
        let text = g.to_edge_list();
        assert_eq!(text, "3 2\n0 2\n1 2\n");
        assert_eq!(Graph::from_edge_list(&text).unwrap(), g);
        assert!(Graph::from_edge_list("3 2\n0 1\n").is_err());
        assert!(Graph::from_edge_list("3 1\n0 x\n").is_err());
    }

    #[test]
    fn bipartite_detection() {
        let even = generate(&"cycle:4".parse().unwrap()).unwrap();
        let odd = generate(&"cycle:5".parse().unwrap()).unwrap();
        assert!(even.is_bipartite());
        assert!(!odd.is_bipartite());
    }
}

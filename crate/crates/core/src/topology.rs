//! Undirected communication graphs.
//!
//! A topology is a simple undirected graph on nodes `0..n` together with
//! optional planar coordinates (kept when the graph was generated
//! geometrically). The random generator draws n points uniformly in the unit
//! square and connects pairs within the given radius, retrying with fresh
//! points until the graph is connected.
//!
//! Edge-list text format: first line is the node count, then one `i r` pair
//! per line with `0 <= i < r < n`, each undirected edge listed once.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::seeding;
use rand::Rng;

/// Retry budget for connected geometric graph generation.
pub const GEOMETRIC_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    coords: Option<Vec<(f64, f64)>>,
}

impl Topology {
    /// Build from an explicit edge list. Edges may be given in any order and
    /// orientation; self-loops, duplicates, and out-of-range endpoints are
    /// rejected. Connectivity is not required here so that parsers can load
    /// and inspect arbitrary graphs.
    pub fn from_edges(n: usize, raw: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("graph needs at least one node".into()));
        }
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(raw.len());
        for &(a, b) in raw {
            if a >= n || b >= n {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) out of range for n={n}"
                )));
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at node {a}")));
            }
            edges.push((a.min(b), a.max(b)));
        }
        edges.sort_unstable();
        if edges.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("duplicate edge".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        Ok(Topology { n, edges, adjacency, coords: None })
    }

    /// Complete graph on `n >= 1` nodes. The single-node graph is allowed so
    /// that degenerate one-node networks are expressible.
    pub fn complete(n: usize) -> Self {
        assert!(n >= 1, "complete graph needs n >= 1");
        let mut edges = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for r in i + 1..n {
                edges.push((i, r));
            }
        }
        Self::from_edges(n, &edges).expect("complete graph edges are valid")
    }

    /// Path graph 0-1-...-(n-1), `n >= 2`.
    pub fn path(n: usize) -> Self {
        assert!(n >= 2, "path graph needs n >= 2");
        let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Self::from_edges(n, &edges).expect("path graph edges are valid")
    }

    /// Cycle graph, `n >= 3` so that every degree equals 2.
    pub fn ring(n: usize) -> Self {
        assert!(n >= 3, "ring graph needs n >= 3");
        let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        edges.push((0, n - 1));
        Self::from_edges(n, &edges).expect("ring graph edges are valid")
    }

    /// Random geometric graph: n points uniform in the unit square, an edge
    /// wherever the Euclidean distance is at most `radius`. Each attempt
    /// draws an independent point set; fails after a bounded number of
    /// disconnected attempts.
    pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter("geometric graph needs n >= 2".into()));
        }
        let max_dist = std::f64::consts::SQRT_2;
        if !(radius > 0.0 && radius <= max_dist) {
            return Err(Error::InvalidParameter(format!(
                "radius must lie in (0, sqrt(2)], got {radius}"
            )));
        }
        for attempt in 0..GEOMETRIC_MAX_ATTEMPTS {
            let mut rng = seeding::stream(seed, seeding::DOMAIN_GRAPH, attempt as u64, 0);
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen::<f64>(), rng.gen::<f64>())).collect();
            let r2 = radius * radius;
            let mut edges = Vec::new();
            for i in 0..n {
                for r in i + 1..n {
                    let dx = pts[i].0 - pts[r].0;
                    let dy = pts[i].1 - pts[r].1;
                    if dx * dx + dy * dy <= r2 {
                        edges.push((i, r));
                    }
                }
            }
            let mut topo = Self::from_edges(n, &edges).expect("generated edges are valid");
            if topo.is_connected() {
                topo.coords = Some(pts);
                return Ok(topo);
            }
        }
        Err(Error::GraphGeneration { n, radius, attempts: GEOMETRIC_MAX_ATTEMPTS })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(i, r)` with `i < r`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        (0..self.n).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Generator coordinates, when the graph came from the geometric model.
    pub fn coords(&self) -> Option<&[(f64, f64)]> {
        self.coords.as_deref()
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = queue.pop_front() {
            for &r in &self.adjacency[i] {
                if !seen[r] {
                    seen[r] = true;
                    count += 1;
                    queue.push_back(r);
                }
            }
        }
        count == self.n
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.n)?;
        for &(i, r) in &self.edges {
            writeln!(w, "{i} {r}")?;
        }
        Ok(())
    }

    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate();
        let n: usize = match lines.next() {
            Some((_, line)) => {
                let line = line?;
                line.trim().parse().map_err(|_| Error::Parse {
                    line: 1,
                    message: format!("expected node count, got {line:?}"),
                })?
            }
            None => return Err(Error::Parse { line: 1, message: "empty edge list".into() }),
        };
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let mut parts = t.split_whitespace();
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|v| v.parse().ok()).ok_or(Error::Parse {
                    line: idx + 1,
                    message: format!("expected `i r` pair, got {t:?}"),
                })
            };
            let a = parse(parts.next())?;
            let b = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("trailing tokens in {t:?}"),
                });
            }
            edges.push((a, b));
        }
        Self::from_edges(n, &edges)
    }

    /// Coordinates in `i x y` lines, available for geometric graphs.
    pub fn write_coords<W: Write>(&self, mut w: W) -> Result<()> {
        let coords = self.coords.as_ref().ok_or_else(|| {
            Error::InvalidParameter("topology carries no coordinates".into())
        })?;
        for (i, (x, y)) in coords.iter().enumerate() {
            writeln!(w, "{i} {x} {y}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_degrees_and_edge_count() {
        let g = Topology::complete(5);
        assert_eq!(g.edges().len(), 10);
        for i in 0..5 {
            assert_eq!(g.degree(i), 4);
        }
        assert!(g.is_connected());
    }

    #[test]
    fn singleton_complete_graph_is_connected() {
        let g = Topology::complete(1);
        assert_eq!(g.n(), 1);
        assert!(g.edges().is_empty());
        assert!(g.is_connected());
    }

    #[test]
    fn path_and_ring_degrees() {
        let p = Topology::path(4);
        assert_eq!(p.degree(0), 1);
        assert_eq!(p.degree(1), 2);
        assert_eq!(p.degree(3), 1);
        let r = Topology::ring(6);
        for i in 0..6 {
            assert_eq!(r.degree(i), 2);
        }
        assert!(r.is_connected());
    }

    #[test]
    fn disconnected_graph_detected() {
        let g = Topology::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!g.is_connected());
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Topology::from_edges(3, &[(0, 0)]).is_err());
        assert!(Topology::from_edges(3, &[(0, 3)]).is_err());
        assert!(Topology::from_edges(3, &[(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn geometric_graph_is_connected_and_reproducible() {
        let a = Topology::random_geometric(30, 0.4, 11).unwrap();
        let b = Topology::random_geometric(30, 0.4, 11).unwrap();
        assert!(a.is_connected());
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.coords().unwrap(), b.coords().unwrap());
        // edges only between points within the radius
        let pts = a.coords().unwrap();
        for &(i, r) in a.edges() {
            let dx = pts[i].0 - pts[r].0;
            let dy = pts[i].1 - pts[r].1;
            assert!((dx * dx + dy * dy).sqrt() <= 0.4 + 1e-12);
        }
    }

    #[test]
    fn geometric_graph_with_full_radius_is_complete() {
        // every pair in the unit square is within sqrt(2)
        let g = Topology::random_geometric(6, std::f64::consts::SQRT_2, 3).unwrap();
        assert_eq!(g.edges().len(), 15);
    }

    #[test]
    fn tiny_radius_exhausts_retries() {
        let err = Topology::random_geometric(40, 1e-6, 5).unwrap_err();
        match err {
            Error::GraphGeneration { attempts, .. } => {
                assert_eq!(attempts, GEOMETRIC_MAX_ATTEMPTS)
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn edge_list_round_trip() {
        let g = Topology::random_geometric(12, 0.6, 2).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = Topology::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(g.n(), back.n());
        assert_eq!(g.edges(), back.edges());
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(Topology::read_edge_list("3\n0 1 junk\n".as_bytes()).is_err());
        assert!(Topology::read_edge_list("nope\n".as_bytes()).is_err());
        assert!(Topology::read_edge_list("".as_bytes()).is_err());
    }
}

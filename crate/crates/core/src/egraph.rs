//! Euclidean embedded graphs.
//!
//! An [`EGraph`] is a directed graph whose vertices are points of `Q^n`. Each
//! edge `y -> y'` is a reaction with reaction vector `y' - y`. Coordinates are
//! kept as exact rationals and converted to `f64` once, at construction.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use petgraph::unionfind::UnionFind;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the number of edge subsets visited by
/// [`weakly_reversible_subgraphs`].
pub const DEFAULT_SUBSET_CAP: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Vertex {
    pub index: usize,
    pub coords: Vec<Rational64>,
}

#[derive(Debug, Clone)]
pub struct EGraph {
    dimension: usize,
    vertices: Vec<Vertex>,
    edges: Vec<(usize, usize)>,
    points: Vec<Vec<f64>>,
}

impl PartialEq for EGraph {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.vertices == other.vertices
            && self.edges == other.edges
    }
}

impl EGraph {
    /// Validates and builds a graph. Vertices must be pairwise distinct, every
    /// vertex must touch an edge, and edges may be neither self-loops nor
    /// repeated.
    pub fn new(
        dimension: usize,
        vertices: Vec<Vec<Rational64>>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyGraph);
        }
        for (index, v) in vertices.iter().enumerate() {
            if v.len() != dimension {
                return Err(Error::DimensionMismatch {
                    index,
                    expected: dimension,
                    found: v.len(),
                });
            }
        }
        let mut seen: HashMap<&[Rational64], usize> = HashMap::new();
        for (index, v) in vertices.iter().enumerate() {
            if let Some(&first) = seen.get(v.as_slice()) {
                return Err(Error::DuplicateVertex {
                    first,
                    second: index,
                });
            }
            seen.insert(v.as_slice(), index);
        }
        let mut touched = vec![false; vertices.len()];
        let mut edge_set = HashMap::new();
        for (edge, &(s, t)) in edges.iter().enumerate() {
            for vertex in [s, t] {
                if vertex >= vertices.len() {
                    return Err(Error::EdgeOutOfRange {
                        edge,
                        vertex,
                        len: vertices.len(),
                    });
                }
            }
            if s == t {
                return Err(Error::SelfLoop { edge, vertex: s });
            }
            if edge_set.insert((s, t), edge).is_some() {
                return Err(Error::DuplicateEdge { edge });
            }
            touched[s] = true;
            touched[t] = true;
        }
        if let Some(isolated) = touched.iter().position(|&t| !t) {
            return Err(Error::IsolatedVertex(isolated));
        }
        let points = vertices
            .iter()
            .map(|v| v.iter().map(rational_to_f64).collect())
            .collect();
        let vertices = vertices
            .into_iter()
            .enumerate()
            .map(|(index, coords)| Vertex { index, coords })
            .collect();
        Ok(Self {
            dimension,
            vertices,
            edges,
            points,
        })
    }

    /// Convenience constructor for integer coordinates.
    pub fn from_integer_points(points: &[&[i64]], edges: &[(usize, usize)]) -> Result<Self> {
        let dimension = points.first().map_or(0, |p| p.len());
        let vertices = points
            .iter()
            .map(|p| p.iter().map(|&c| Rational64::from_integer(c)).collect())
            .collect();
        Self::new(dimension, vertices, edges.to_vec())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Floating point coordinates of vertex `v`.
    pub fn point(&self, v: usize) -> &[f64] {
        &self.points[v]
    }

    pub fn source(&self, edge: usize) -> usize {
        self.edges[edge].0
    }

    pub fn target(&self, edge: usize) -> usize {
        self.edges[edge].1
    }

    pub fn reaction_vector(&self, edge: usize) -> Vec<f64> {
        let (s, t) = self.edges[edge];
        self.points[t]
            .iter()
            .zip(&self.points[s])
            .map(|(b, a)| b - a)
            .collect()
    }

    pub fn vertex_index(&self, coords: &[Rational64]) -> Option<usize> {
        self.vertices.iter().position(|v| v.coords == coords)
    }

    /// Index of the edge joining the two coordinate points, if present.
    pub fn find_edge(&self, source: &[Rational64], target: &[Rational64]) -> Option<usize> {
        let s = self.vertex_index(source)?;
        let t = self.vertex_index(target)?;
        self.edges.iter().position(|&e| e == (s, t))
    }

    pub fn out_edges(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(move |(_, &(s, _))| s == v)
            .map(|(e, _)| e)
    }

    /// `V ⊆ V'` and `E ⊆ E'`, comparing vertices by exact coordinates.
    pub fn is_subgraph_of(&self, other: &EGraph) -> bool {
        self.dimension == other.dimension
            && self.edges.iter().all(|&(s, t)| {
                other
                    .find_edge(&self.vertices[s].coords, &self.vertices[t].coords)
                    .is_some()
            })
    }

    /// Graph on `V ∪ V'` with edges `E ∪ E'`. Vertices and edges of `self`
    /// keep their indices; new ones from `other` are appended in order.
    pub fn union(&self, other: &EGraph) -> Result<EGraph> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: self.dimension,
                found: other.dimension,
            });
        }
        let mut vertices: Vec<Vec<Rational64>> =
            self.vertices.iter().map(|v| v.coords.clone()).collect();
        let mut map = Vec::with_capacity(other.num_vertices());
        for v in &other.vertices {
            match vertices.iter().position(|c| *c == v.coords) {
                Some(i) => map.push(i),
                None => {
                    map.push(vertices.len());
                    vertices.push(v.coords.clone());
                }
            }
        }
        let mut edges = self.edges.clone();
        for &(s, t) in &other.edges {
            let e = (map[s], map[t]);
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
        EGraph::new(self.dimension, vertices, edges)
    }

    /// The subgraph spanned by the given edges. Vertices not touched by any
    /// selected edge are dropped; the rest keep their relative order.
    pub fn edge_subgraph(&self, edge_indices: &[usize]) -> Result<EGraph> {
        let mut keep = vec![false; self.num_vertices()];
        for &e in edge_indices {
            let (s, t) = self.edges[e];
            keep[s] = true;
            keep[t] = true;
        }
        let mut remap = vec![usize::MAX; self.num_vertices()];
        let mut vertices = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if keep[i] {
                remap[i] = vertices.len();
                vertices.push(v.coords.clone());
            }
        }
        let edges = edge_indices
            .iter()
            .map(|&e| {
                let (s, t) = self.edges[e];
                (remap[s], remap[t])
            })
            .collect();
        EGraph::new(self.dimension, vertices, edges)
    }
}

impl fmt::Display for EGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_vertex = |v: &Vertex| {
            let coords: Vec<String> = v.coords.iter().map(|c| c.to_string()).collect();
            format!("({})", coords.join(","))
        };
        let parts: Vec<String> = self
            .edges
            .iter()
            .map(|&(s, t)| {
                format!(
                    "{}->{}",
                    fmt_vertex(&self.vertices[s]),
                    fmt_vertex(&self.vertices[t])
                )
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

pub(crate) fn rational_to_f64(r: &Rational64) -> f64 {
    // Ratio::to_f64 rounds correctly for i64 components.
    r.to_f64().unwrap_or(f64::NAN)
}

/// Orthonormal basis of the span of the reaction vectors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoichiometricSubspace {
    pub basis: Vec<Vec<f64>>,
    pub dim: usize,
    ambient: usize,
}

impl StoichiometricSubspace {
    /// Orthonormal basis for the span of `vectors`, each of length `ambient`.
    pub fn from_vectors(ambient: usize, vectors: &[Vec<f64>]) -> Self {
        if vectors.is_empty() || ambient == 0 {
            return Self {
                basis: Vec::new(),
                dim: 0,
                ambient,
            };
        }
        let m = DMatrix::from_fn(ambient, vectors.len(), |i, j| vectors[j][i]);
        let svd = m.svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let sigma_max = svd.singular_values.max();
        let threshold = 1e-10 * sigma_max.max(f64::MIN_POSITIVE);
        let mut basis = Vec::new();
        for (j, &s) in svd.singular_values.iter().enumerate() {
            if s > threshold {
                basis.push(u.column(j).iter().copied().collect());
            }
        }
        Self {
            dim: basis.len(),
            basis,
            ambient,
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient];
        for b in &self.basis {
            let c: f64 = b.iter().zip(v).map(|(x, y)| x * y).sum();
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        out
    }

    /// Infinity norm of the component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &[f64]) -> f64 {
        self.project(v)
            .iter()
            .zip(v)
            .map(|(p, x)| (x - p).abs())
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        self.residual(v) <= tol
    }

    /// The subspace sum `S + S'`.
    pub fn sum(&self, other: &StoichiometricSubspace) -> StoichiometricSubspace {
        let vectors: Vec<Vec<f64>> = self.basis.iter().chain(&other.basis).cloned().collect();
        Self::from_vectors(self.ambient, &vectors)
    }

    /// Basis as the columns of an `n x dim` matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.ambient, self.dim, |i, j| self.basis[j][i])
    }
}

pub fn stoichiometric_subspace(graph: &EGraph) -> StoichiometricSubspace {
    let vectors: Vec<Vec<f64>> = (0..graph.num_edges())
        .map(|e| graph.reaction_vector(e))
        .collect();
    StoichiometricSubspace::from_vectors(graph.dimension(), &vectors)
}

/// Every connected component is strongly connected, i.e. no edge joins two
/// distinct strongly connected components.
pub fn is_weakly_reversible(graph: &EGraph) -> bool {
    let mut g = DiGraph::<(), ()>::with_capacity(graph.num_vertices(), graph.num_edges());
    let nodes: Vec<_> = (0..graph.num_vertices()).map(|_| g.add_node(())).collect();
    for &(s, t) in graph.edges() {
        g.add_edge(nodes[s], nodes[t], ());
    }
    let mut component = vec![0usize; graph.num_vertices()];
    for (c, scc) in tarjan_scc(&g).into_iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    graph
        .edges()
        .iter()
        .all(|&(s, t)| component[s] == component[t])
}

/// Linkage classes: connected components of the underlying undirected graph,
/// each sorted, ordered by smallest vertex index.
pub fn linkage_classes(graph: &EGraph) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::<usize>::new(graph.num_vertices());
    for &(s, t) in graph.edges() {
        uf.union(s, t);
    }
    let mut by_root: Vec<(usize, Vec<usize>)> = Vec::new();
    for v in 0..graph.num_vertices() {
        let root = uf.find(v);
        match by_root.iter_mut().find(|(r, _)| *r == root) {
            Some((_, members)) => members.push(v),
            None => by_root.push((root, vec![v])),
        }
    }
    by_root.into_iter().map(|(_, members)| members).collect()
}

/// The complete graph on the vertex set of `graph`, edges in `(i, j)`
/// lexicographic order.
pub fn complete_graph(graph: &EGraph) -> EGraph {
    let n = graph.num_vertices();
    let edges = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let vertices = graph.vertices().iter().map(|v| v.coords.clone()).collect();
    EGraph::new(graph.dimension(), vertices, edges)
        .expect("complete graph on a valid vertex set is valid")
}

/// A weakly reversible edge subset of some ambient graph.
#[derive(Debug, Clone)]
pub struct Subgraph {
    /// Indices into the ambient graph's edge list, in ascending `(source, target)` order.
    pub edges: Vec<usize>,
    pub graph: EGraph,
}

/// Lazily enumerates weakly reversible edge subsets of a graph.
///
/// Subsets are produced in lexicographic order of their sorted edge lists,
/// where edges are ordered by `(source, target)`.
pub struct WeaklyReversibleSubgraphs<'a> {
    graph: &'a EGraph,
    order: Vec<usize>,
    current: Vec<usize>,
    started: bool,
    remaining: usize,
    visited: u64,
}

pub fn weakly_reversible_subgraphs(
    graph: &EGraph,
    max_count: usize,
) -> Result<WeaklyReversibleSubgraphs<'_>> {
    weakly_reversible_subgraphs_capped(graph, max_count, DEFAULT_SUBSET_CAP)
}

pub fn weakly_reversible_subgraphs_capped(
    graph: &EGraph,
    max_count: usize,
    subset_cap: u64,
) -> Result<WeaklyReversibleSubgraphs<'_>> {
    let m = graph.num_edges();
    let requested = if m >= 127 { u128::MAX } else { (1u128 << m) - 1 };
    if requested > subset_cap as u128 || graph.num_vertices() > 64 {
        return Err(Error::BudgetExceeded {
            requested,
            cap: subset_cap,
        });
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&e| graph.edges()[e]);
    Ok(WeaklyReversibleSubgraphs {
        graph,
        order,
        current: Vec::new(),
        started: false,
        remaining: max_count,
        visited: 0,
    })
}

impl WeaklyReversibleSubgraphs<'_> {
    /// Number of edge subsets examined so far.
    pub fn visited(&self) -> u64 {
        self.visited
    }

    // Successor of `current` in lexicographic order of sorted index lists.
    fn advance(&mut self) -> bool {
        let m = self.order.len();
        if !self.started {
            self.started = true;
            if m == 0 {
                return false;
            }
            self.current.push(0);
            return true;
        }
        match self.current.last().copied() {
            None => false,
            Some(last) if last + 1 < m => {
                self.current.push(last + 1);
                true
            }
            Some(_) => {
                self.current.pop();
                match self.current.last_mut() {
                    Some(last) => {
                        *last += 1;
                        true
                    }
                    None => false,
                }
            }
        }
    }

    fn current_is_weakly_reversible(&self) -> bool {
        let edges = self.graph.edges();
        let n = self.graph.num_vertices();
        let mut out_mask = vec![0u64; n];
        let mut has_in = 0u64;
        let mut has_out = 0u64;
        for &i in &self.current {
            let (s, t) = edges[self.order[i]];
            out_mask[s] |= 1 << t;
            has_out |= 1 << s;
            has_in |= 1 << t;
        }
        // A vertex that is only a source or only a sink cannot lie on a cycle.
        if has_in != has_out {
            return false;
        }
        let reach = |from: usize| -> u64 {
            let mut seen = 1u64 << from;
            let mut frontier = seen;
            while frontier != 0 {
                let mut next = 0u64;
                let mut f = frontier;
                while f != 0 {
                    let v = f.trailing_zeros() as usize;
                    f &= f - 1;
                    next |= out_mask[v];
                }
                frontier = next & !seen;
                seen |= next;
            }
            seen
        };
        let mut cache: Vec<Option<u64>> = vec![None; n];
        self.current.iter().all(|&i| {
            let (s, t) = edges[self.order[i]];
            let r = *cache[t].get_or_insert_with(|| reach(t));
            r & (1 << s) != 0
        })
    }
}

impl Iterator for WeaklyReversibleSubgraphs<'_> {
    type Item = Subgraph;

    fn next(&mut self) -> Option<Subgraph> {
        if self.remaining == 0 {
            return None;
        }
        while self.advance() {
            self.visited += 1;
            if self.current_is_weakly_reversible() {
                let edges: Vec<usize> = self.current.iter().map(|&i| self.order[i]).collect();
                let graph = self
                    .graph
                    .edge_subgraph(&edges)
                    .expect("edge subsets of a valid graph are valid");
                self.remaining -= 1;
                return Some(Subgraph { edges, graph });
            }
        }
        None
    }
}

/// Rational coordinate in the network file: an integer or a `"p/q"` string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsonRational(pub Rational64);

impl Serialize for JsonRational {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_integer() {
            serializer.serialize_i64(*self.0.numer())
        } else {
            serializer.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
        }
    }
}

impl<'de> Deserialize<'de> for JsonRational {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(i) => Ok(JsonRational(Rational64::from_integer(i))),
            Raw::Text(s) => parse_rational(&s).map(JsonRational).map_err(de::Error::custom),
        }
    }
}

pub fn parse_rational(s: &str) -> std::result::Result<Rational64, String> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: i64 = num.parse().map_err(|_| format!("bad rational `{s}`"))?;
    let den: i64 = den.parse().map_err(|_| format!("bad rational `{s}`"))?;
    if den.is_zero() {
        return Err(format!("zero denominator in `{s}`"));
    }
    Ok(Rational64::new(num, den))
}

/// On-disk network description shared by every CLI subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub dimension: usize,
    pub vertices: Vec<Vec<JsonRational>>,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<NetworkFile> for EGraph {
    type Error = Error;

    fn try_from(file: NetworkFile) -> Result<EGraph> {
        let vertices = file
            .vertices
            .into_iter()
            .map(|v| v.into_iter().map(|r| r.0).collect())
            .collect();
        let edges = file.edges.into_iter().map(|[s, t]| (s, t)).collect();
        EGraph::new(file.dimension, vertices, edges)
    }
}

impl From<&EGraph> for NetworkFile {
    fn from(graph: &EGraph) -> Self {
        NetworkFile {
            dimension: graph.dimension,
            vertices: graph
                .vertices
                .iter()
                .map(|v| v.coords.iter().copied().map(JsonRational).collect())
                .collect(),
            edges: graph.edges.iter().map(|&(s, t)| [s, t]).collect(),
        }
    }
}

impl Serialize for EGraph {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        NetworkFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EGraph {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = NetworkFile::deserialize(deserializer)?;
        EGraph::try_from(file).map_err(de::Error::custom)
    }
}

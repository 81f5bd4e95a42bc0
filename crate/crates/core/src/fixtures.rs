//! Small reference networks and random generators used by tests, benches and
//! the CLI's self-checks.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::egraph::EGraph;
use crate::flux::FluxVector;

/// `(1,0) <-> (0,1)`, edge 0 forward, edge 1 backward.
pub fn two_cycle() -> EGraph {
    EGraph::from_integer_points(&[&[1, 0], &[0, 1]], &[(0, 1), (1, 0)]).expect("valid")
}

/// `(1,0) -> (0,1) -> (1,1) -> (1,0)`.
pub fn three_cycle() -> EGraph {
    EGraph::from_integer_points(&[&[1, 0], &[0, 1], &[1, 1]], &[(0, 1), (1, 2), (2, 0)])
        .expect("valid")
}

/// Both orientations of every side of the triangle from [`three_cycle`].
pub fn bidirected_triangle() -> EGraph {
    EGraph::from_integer_points(
        &[&[1, 0], &[0, 1], &[1, 1]],
        &[(0, 1), (1, 0), (1, 2), (2, 1), (2, 0), (0, 2)],
    )
    .expect("valid")
}

/// The four collinear points `y1 = (0,3), y2 = (1,2), y3 = (2,1), y4 = (3,0)`.
pub fn collinear_points() -> [&'static [i64]; 4] {
    [&[0, 3], &[1, 2], &[2, 1], &[3, 0]]
}

/// Complete graph on [`collinear_points`]; edge `(i, j)` sits at index
/// `3 i + j - [j > i]` (0-based labels).
pub fn collinear_complete() -> EGraph {
    let edges: Vec<(usize, usize)> = (0..4)
        .flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    EGraph::from_integer_points(&collinear_points(), &edges).expect("valid")
}

/// `y1 -> y2, y2 -> y3, y3 -> y4, y4 -> y3` on [`collinear_points`].
pub fn collinear_sparse() -> EGraph {
    EGraph::from_integer_points(&collinear_points(), &[(0, 1), (1, 2), (2, 3), (3, 2)])
        .expect("valid")
}

/// A random complex-balanced flux on a weakly reversible graph: a positive
/// combination of directed cycles, one through each edge.
pub fn random_complex_balanced_flux<R: Rng>(graph: &EGraph, rng: &mut R) -> FluxVector {
    let mut flux = vec![0.0; graph.num_edges()];
    for e in 0..graph.num_edges() {
        let (s, t) = graph.edges()[e];
        let path = shortest_path(graph, t, s).expect("weakly reversible graph");
        let w = rng.gen_range(0.2..2.0);
        flux[e] += w;
        for edge in path {
            flux[edge] += w;
        }
    }
    FluxVector::new(flux)
}

// Edge indices of a shortest directed path.
fn shortest_path(graph: &EGraph, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut prev: Vec<Option<usize>> = vec![None; graph.num_vertices()];
    let mut seen = vec![false; graph.num_vertices()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = Vec::new();
            let mut cur = to;
            while cur != from {
                let e = prev[cur].expect("visited vertex has a predecessor");
                path.push(e);
                cur = graph.source(e);
            }
            path.reverse();
            return Some(path);
        }
        for e in graph.out_edges(v) {
            let w = graph.target(e);
            if !seen[w] {
                seen[w] = true;
                prev[w] = Some(e);
                queue.push_back(w);
            }
        }
    }
    None
}

/// A random weakly reversible graph on `vertices` distinct points of
/// `{0,..,3}^dimension`, built as a union of random directed cycles.
pub fn random_weakly_reversible<R: Rng>(rng: &mut R, vertices: usize, dimension: usize) -> EGraph {
    assert!(vertices >= 2);
    let mut points: Vec<Vec<i64>> = Vec::new();
    while points.len() < vertices {
        let p: Vec<i64> = (0..dimension).map(|_| rng.gen_range(0..4)).collect();
        if !points.contains(&p) {
            points.push(p);
        }
    }
    let mut edges: Vec<(usize, usize)> = Vec::new();
    fn add_cycle(cycle: &[usize], edges: &mut Vec<(usize, usize)>) {
        for i in 0..cycle.len() {
            let e = (cycle[i], cycle[(i + 1) % cycle.len()]);
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    // One cycle through every vertex guarantees no isolated vertices.
    let mut order: Vec<usize> = (0..vertices).collect();
    order.shuffle(rng);
    add_cycle(&order, &mut edges);
    for _ in 0..rng.gen_range(0..3) {
        let len = rng.gen_range(2..=vertices);
        let mut pick: Vec<usize> = (0..vertices).collect();
        pick.shuffle(rng);
        pick.truncate(len);
        add_cycle(&pick, &mut edges);
    }
    let refs: Vec<&[i64]> = points.iter().map(|p| p.as_slice()).collect();
    EGraph::from_integer_points(&refs, &edges).expect("distinct points and simple cycles")
}

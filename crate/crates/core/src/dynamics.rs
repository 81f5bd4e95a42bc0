//! Mass-action vector fields, dynamical equivalence, and realizability.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_rational::Rational64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::egraph::{rational_to_f64, EGraph};
use crate::error::{Error, Result};
use crate::lp::{self, SlackOutcome};
use crate::Tolerances;

/// Edge-indexed reaction rate constants. Entries may be signed; use
/// [`RateVector::is_strictly_positive`] to test membership in `R^E_{>0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector {
    values: Vec<f64>,
    strictly_positive: bool,
}

impl RateVector {
    pub fn new(values: Vec<f64>) -> Self {
        let strictly_positive = values.iter().all(|&v| v > 0.0);
        Self {
            values,
            strictly_positive,
        }
    }

    /// Checks the length against the graph's edge count.
    pub fn for_graph(graph: &EGraph, values: Vec<f64>) -> Result<Self> {
        check_len(graph.num_edges(), values.len())?;
        Ok(Self::new(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.strictly_positive
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &RateVector) -> f64 {
        max_abs_diff(&self.values, &other.values)
    }
}

impl Serialize for RateVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RateVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Self::new(Vec::deserialize(d)?))
    }
}

/// A point of the positive orthant.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            return Err(Error::NonPositiveState { index, value });
        }
        Ok(Self(values))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise `exp`.
    pub fn from_log(z: &[f64]) -> Result<Self> {
        Self::new(z.iter().map(|v| v.exp()).collect())
    }

    pub fn ln(&self) -> Vec<f64> {
        self.0.iter().map(|v| v.ln()).collect()
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        State::new(Vec::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `x^y` for the vertex `v` of `graph`. Integer exponents use `powi`.
pub fn monomial(graph: &EGraph, v: usize, x: &[f64]) -> f64 {
    monomial_of(&graph.vertices()[v].coords, x)
}

pub(crate) fn monomial_of(y: &[Rational64], x: &[f64]) -> f64 {
    y.iter()
        .zip(x)
        .map(|(e, &xi)| {
            if e.is_integer() {
                match i32::try_from(*e.numer()) {
                    Ok(p) => xi.powi(p),
                    Err(_) => xi.powf(rational_to_f64(e)),
                }
            } else {
                xi.powf(rational_to_f64(e))
            }
        })
        .product()
}

/// `sum_{y -> y'} k x^y (y' - y)`.
pub fn massaction_rhs(graph: &EGraph, k: &RateVector, x: &State) -> Result<Vec<f64>> {
    check_len(graph.num_edges(), k.len())?;
    if x.len() != graph.dimension() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: graph.dimension(),
            found: x.len(),
        });
    }
    let mut out = vec![0.0; graph.dimension()];
    let monomials: Vec<f64> = (0..graph.num_vertices())
        .map(|v| monomial(graph, v, x.values()))
        .collect();
    for (e, &(s, t)) in graph.edges().iter().enumerate() {
        let rate = k.values()[e] * monomials[s];
        for ((o, a), b) in out.iter_mut().zip(graph.point(s)).zip(graph.point(t)) {
            *o += rate * (b - a);
        }
    }
    Ok(out)
}

/// Per-vertex net vectors `sum_{y0 -> y} w (y - y0)` of an edge weighting.
pub(crate) fn vertex_nets(graph: &EGraph, weights: &[f64]) -> Vec<Vec<f64>> {
    let mut nets = vec![vec![0.0; graph.dimension()]; graph.num_vertices()];
    for (e, &(s, t)) in graph.edges().iter().enumerate() {
        for ((o, a), b) in nets[s].iter_mut().zip(graph.point(s)).zip(graph.point(t)) {
            *o += weights[e] * (b - a);
        }
    }
    nets
}

/// Largest infinity-norm disagreement, over `V(G) ∪ V(H)`, between the
/// per-vertex net vectors of two edge weightings. Vertices missing from one
/// graph contribute the zero vector there.
pub fn equivalence_residual(g: &EGraph, gw: &[f64], h: &EGraph, hw: &[f64]) -> Result<f64> {
    check_len(g.num_edges(), gw.len())?;
    check_len(h.num_edges(), hw.len())?;
    if g.dimension() != h.dimension() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: g.dimension(),
            found: h.dimension(),
        });
    }
    let mut diff: HashMap<&[Rational64], Vec<f64>> = HashMap::new();
    for (v, net) in vertex_nets(g, gw).into_iter().enumerate() {
        diff.insert(&g.vertices()[v].coords, net);
    }
    for (v, net) in vertex_nets(h, hw).into_iter().enumerate() {
        let entry = diff
            .entry(&h.vertices()[v].coords)
            .or_insert_with(|| vec![0.0; h.dimension()]);
        for (d, n) in entry.iter_mut().zip(net) {
            *d -= n;
        }
    }
    Ok(diff
        .values()
        .flat_map(|d| d.iter())
        .fold(0.0, |m, v| m.max(v.abs())))
}

pub fn dynamically_equivalent(
    g: &EGraph,
    k: &RateVector,
    h: &EGraph,
    hk: &RateVector,
    tol: f64,
) -> bool {
    equivalence_residual(g, k.values(), h, hk.values()).is_ok_and(|r| r <= tol)
}

/// Finds rates on `target` that are dynamically equivalent to `(source, h)`.
///
/// The equivalence conditions decouple by source vertex, so one small
/// program is solved per vertex of `V(source) ∪ V(target)`. With
/// `require_positive`, every returned entry is at least `tol.pos_eps`; the
/// returned rates maximize the smallest entry at each vertex. Without it, the
/// minimum-norm solution is returned. `Ok(None)` means infeasibility was
/// proven.
pub fn realize_on(
    source: &EGraph,
    h: &RateVector,
    target: &EGraph,
    require_positive: bool,
    tol: &Tolerances,
) -> Result<Option<RateVector>> {
    Ok(realize_weights(source, h.values(), target, require_positive, tol)?.map(RateVector::new))
}

pub(crate) fn realize_weights(
    source: &EGraph,
    weights: &[f64],
    target: &EGraph,
    require_positive: bool,
    tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    check_len(source.num_edges(), weights.len())?;
    if source.dimension() != target.dimension() {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: target.dimension(),
            found: source.dimension(),
        });
    }
    if let Some(direct) = same_edges_reindexed(source, weights, target) {
        if !require_positive || direct.iter().all(|&v| v >= tol.pos_eps) {
            return Ok(Some(direct));
        }
    }

    let n = target.dimension();
    let source_nets = vertex_nets(source, weights);
    let mut out = vec![0.0; target.num_edges()];
    // Vertices of the source absent from the target need a zero net vector.
    for (v, net) in source_nets.iter().enumerate() {
        if target.vertex_index(&source.vertices()[v].coords).is_none()
            && net.iter().any(|x| x.abs() > tol.tol)
        {
            return Ok(None);
        }
    }
    for v in 0..target.num_vertices() {
        let wanted = source
            .vertex_index(&target.vertices()[v].coords)
            .map_or_else(|| vec![0.0; n], |sv| source_nets[sv].clone());
        let edges: Vec<usize> = target.out_edges(v).collect();
        match solve_vertex(target, &edges, &wanted, require_positive, tol)? {
            Some(values) => {
                for (e, val) in edges.iter().zip(values) {
                    out[*e] = val;
                }
            }
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

/// When both graphs have the same edges (as coordinate pairs), the weights
/// reindexed into `target`'s edge order.
fn same_edges_reindexed(source: &EGraph, weights: &[f64], target: &EGraph) -> Option<Vec<f64>> {
    if source.num_edges() != target.num_edges() || source.num_vertices() != target.num_vertices() {
        return None;
    }
    let mut out = vec![0.0; target.num_edges()];
    for (e, &(s, t)) in source.edges().iter().enumerate() {
        let te = target.find_edge(&source.vertices()[s].coords, &source.vertices()[t].coords)?;
        out[te] = weights[e];
    }
    Some(out)
}

/// Solves `sum_{e} w_e (y'_e - y) = wanted` over the out-edges of one vertex.
fn solve_vertex(
    graph: &EGraph,
    edges: &[usize],
    wanted: &[f64],
    require_positive: bool,
    tol: &Tolerances,
) -> Result<Option<Vec<f64>>> {
    let n = graph.dimension();
    let scale = wanted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if edges.is_empty() {
        return Ok((scale <= tol.tol).then(Vec::new));
    }
    let a = DMatrix::from_fn(n, edges.len(), |i, j| graph.reaction_vector(edges[j])[i]);
    let values = if require_positive {
        match lp::max_min_entry(&a, wanted, scale.max(1.0), &tol.lp_options())? {
            SlackOutcome::Feasible { x, slack } if slack >= tol.pos_eps => x,
            _ => return Ok(None),
        }
    } else {
        let svd = a.clone().svd(true, true);
        let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
        let x = svd
            .solve(&DVector::from_column_slice(wanted), eps)
            .map_err(|e| Error::SolverFailure(e.to_string()))?;
        x.iter().copied().collect()
    };
    let residual = max_abs_diff(
        (&a * DVector::from_column_slice(&values)).as_slice(),
        wanted,
    );
    if residual <= tol.tol {
        Ok(Some(values))
    } else if require_positive {
        Err(Error::SolverFailure(format!(
            "vertex program reported feasible but residual is {residual:e}"
        )))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_pair() -> (EGraph, EGraph) {
        let g1 = EGraph::from_integer_points(&[&[0, 0], &[2, 0]], &[(0, 1)]).unwrap();
        let g2 = EGraph::from_integer_points(&[&[0, 0], &[1, 0]], &[(0, 1)]).unwrap();
        (g1, g2)
    }

    #[test]
    fn rhs_small_cases() {
        let g = EGraph::from_integer_points(&[&[1, 0], &[0, 1]], &[(0, 1)]).unwrap();
        let one = State::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(
            massaction_rhs(&g, &RateVector::new(vec![1.0]), &one).unwrap(),
            vec![-1.0, 1.0]
        );
        let x = State::new(vec![3.0, 1.0]).unwrap();
        assert_eq!(
            massaction_rhs(&g, &RateVector::new(vec![2.0]), &x).unwrap(),
            vec![-6.0, 6.0]
        );
        assert!(massaction_rhs(&g, &RateVector::new(vec![1.0, 2.0]), &x).is_err());
    }

    #[test]
    fn rhs_matches_termwise_sum() {
        let g = fixtures::collinear_complete();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let k = RateVector::new((0..12).map(|_| rng.gen_range(0.1..5.0)).collect());
            let x = State::new(vec![rng.gen_range(0.2..3.0), rng.gen_range(0.2..3.0)]).unwrap();
            let got = massaction_rhs(&g, &k, &x).unwrap();
            let mut want = [0.0f64; 2];
            for (e, &(s, t)) in g.edges().iter().enumerate() {
                let ys = g.point(s);
                let yt = g.point(t);
                let mono = x.values()[0].powf(ys[0]) * x.values()[1].powf(ys[1]);
                for i in 0..2 {
                    want[i] += k.values()[e] * mono * (yt[i] - ys[i]);
                }
            }
            for i in 0..2 {
                assert!((got[i] - want[i]).abs() <= 1e-12 * want[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn equivalence_examples() {
        let (g1, g2) = line_pair();
        let k = RateVector::new(vec![1.0]);
        assert!(dynamically_equivalent(&g1, &k, &g1, &k, 0.0));
        assert!(dynamically_equivalent(&g1, &k, &g2, &RateVector::new(vec![2.0]), 1e-12));
        assert!(!dynamically_equivalent(&g1, &k, &g2, &RateVector::new(vec![2.5]), 1e-8));
    }

    #[test]
    fn realize_identity_and_dimension_obstruction() {
        let g = fixtures::two_cycle();
        let k = RateVector::new(vec![2.0, 3.0]);
        let tol = Tolerances::default();
        assert_eq!(realize_on(&g, &k, &g, true, &tol).unwrap(), Some(k.clone()));
        // Target with a single edge cannot produce the reverse reaction.
        let single = EGraph::from_integer_points(&[&[1, 0], &[0, 1]], &[(0, 1)]).unwrap();
        assert_eq!(realize_on(&g, &k, &single, false, &tol).unwrap(), None);
    }

    #[test]
    fn realize_line_pair() {
        let (g1, g2) = line_pair();
        let tol = Tolerances::default();
        let r = realize_on(&g1, &RateVector::new(vec![1.0]), &g2, true, &tol)
            .unwrap()
            .unwrap();
        assert!((r.values()[0] - 2.0).abs() < 1e-12);
        let r = realize_on(&g2, &RateVector::new(vec![2.0]), &g1, false, &tol)
            .unwrap()
            .unwrap();
        assert!((r.values()[0] - 1.0).abs() < 1e-12);
        // A negative rate realizes only without the positivity requirement.
        assert!(realize_on(&g1, &RateVector::new(vec![-1.0]), &g2, true, &tol)
            .unwrap()
            .is_none());
        assert!(realize_on(&g1, &RateVector::new(vec![-1.0]), &g2, false, &tol)
            .unwrap()
            .is_some());
    }

    #[test]
    fn collinear_rates_follow_closed_form() {
        let complete = fixtures::collinear_complete();
        let sparse = fixtures::collinear_sparse();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let kt = RateVector::new((0..12).map(|_| rng.gen_range(0.1..4.0)).collect());
            let k = realize_on(&complete, &kt, &sparse, false, &tol)
                .unwrap()
                .unwrap();
            let want = closed_form(&complete, &kt);
            assert!(k.max_abs_diff(&want) < 1e-10);
            assert!(dynamically_equivalent(&sparse, &k, &complete, &kt, 1e-8));
            let positive = realize_on(&complete, &kt, &sparse, true, &tol).unwrap();
            assert_eq!(positive.is_some(), want.values().iter().all(|&v| v >= 1e-9));
        }
    }

    // Printed transformation from rates on the complete graph to the sparse one.
    fn closed_form(complete: &EGraph, kt: &RateVector) -> RateVector {
        let pts = fixtures::collinear_points();
        let r = |i: usize, j: usize| -> f64 {
            let e = complete
                .find_edge(
                    &complete.vertices()[i - 1].coords,
                    &complete.vertices()[j - 1].coords,
                )
                .unwrap();
            assert_eq!(complete.point(i - 1)[0] as i64, pts[i - 1][0]);
            kt.values()[e]
        };
        RateVector::new(vec![
            r(1, 2) + 2.0 * r(1, 3) + 3.0 * r(1, 4),
            r(2, 3) - r(2, 1) + 2.0 * r(2, 4),
            r(3, 4) - r(3, 2) - 2.0 * r(3, 1),
            r(4, 3) + 2.0 * r(4, 2) + 3.0 * r(4, 1),
        ])
    }

    // All equivalence equations solved as one program instead of per vertex.
    fn realize_full_system(
        source: &EGraph,
        w: &[f64],
        target: &EGraph,
        tol: &Tolerances,
    ) -> bool {
        let n = target.dimension();
        let nets = vertex_nets(source, w);
        let m = target.num_vertices() * n;
        let a = DMatrix::from_fn(m, target.num_edges(), |row, e| {
            let (v, i) = (row / n, row % n);
            if target.source(e) == v {
                target.reaction_vector(e)[i]
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..m)
            .map(|row| {
                let (v, i) = (row / n, row % n);
                source
                    .vertex_index(&target.vertices()[v].coords)
                    .map_or(0.0, |sv| nets[sv][i])
            })
            .collect();
        matches!(
            lp::max_min_entry(&a, &b, 10.0, &tol.lp_options()).unwrap(),
            SlackOutcome::Feasible { slack, .. } if slack >= tol.pos_eps
        )
    }

    #[test]
    fn decoupled_and_full_systems_agree() {
        let complete = fixtures::collinear_complete();
        let sparse = fixtures::collinear_sparse();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [0usize; 2];
        for _ in 0..60 {
            let kt: Vec<f64> = (0..12).map(|_| rng.gen_range(0.1..4.0)).collect();
            let per_vertex = realize_weights(&complete, &kt, &sparse, true, &tol)
                .unwrap()
                .is_some();
            assert_eq!(per_vertex, realize_full_system(&complete, &kt, &sparse, &tol));
            seen[per_vertex as usize] += 1;
        }
        assert!(seen[0] > 0 && seen[1] > 0);
    }

    #[test]
    fn equivalent_systems_share_vector_fields() {
        let complete = fixtures::collinear_complete();
        let sparse = fixtures::collinear_sparse();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let kt = RateVector::new((0..12).map(|_| rng.gen_range(0.1..4.0)).collect());
        let k = realize_on(&complete, &kt, &sparse, false, &tol)
            .unwrap()
            .unwrap();
        for _ in 0..100 {
            let x = State::new(vec![rng.gen_range(0.05..5.0), rng.gen_range(0.05..5.0)]).unwrap();
            let a = massaction_rhs(&complete, &kt, &x).unwrap();
            let b = massaction_rhs(&sparse, &k, &x).unwrap();
            let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(max_abs_diff(&a, &b) <= 1e-9 * scale);
        }
    }

    #[test]
    fn state_rejects_nonpositive() {
        assert!(State::new(vec![1.0, 0.0]).is_err());
        assert!(State::new(vec![1.0, f64::NAN]).is_err());
        assert!(serde_json::from_str::<State>("[1.0, -2.0]").is_err());
    }
}

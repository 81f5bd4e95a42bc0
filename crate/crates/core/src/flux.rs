//! Flux systems.
//!
//! A flux vector assigns a flow `J_e` to every edge. At a state `x`, rates and
//! fluxes correspond through `J_e = k_e x^{source(e)}`; [`rates_to_flux`] and
//! [`flux_to_rates`] are the only places where that scaling happens.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dynamics::{check_len, equivalence_residual, monomial, realize_weights, RateVector, State};
use crate::egraph::EGraph;
use crate::error::Result;
use crate::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct FluxVector {
    values: Vec<f64>,
    strictly_positive: bool,
}

impl FluxVector {
    pub fn new(values: Vec<f64>) -> Self {
        let strictly_positive = values.iter().all(|&v| v > 0.0);
        Self {
            values,
            strictly_positive,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
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

    pub fn scaled_sum(&self, a: f64, other: &FluxVector, b: f64) -> FluxVector {
        FluxVector::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }
}

impl Serialize for FluxVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FluxVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Ok(Self::new(Vec::deserialize(d)?))
    }
}

/// `J_e = k_e x^{y}` where `y` is the source of `e`.
pub fn rates_to_flux(graph: &EGraph, k: &RateVector, x: &State) -> Result<FluxVector> {
    check_len(graph.num_edges(), k.len())?;
    Ok(FluxVector::new(
        graph
            .edges()
            .iter()
            .zip(k.values())
            .map(|(&(s, _), &ke)| ke * monomial(graph, s, x.values()))
            .collect(),
    ))
}

/// `k_e = J_e / x^{y}` where `y` is the source of `e`.
pub fn flux_to_rates(graph: &EGraph, flux: &FluxVector, x: &State) -> Result<RateVector> {
    check_len(graph.num_edges(), flux.len())?;
    Ok(RateVector::new(
        graph
            .edges()
            .iter()
            .zip(flux.values())
            .map(|(&(s, _), &je)| je / monomial(graph, s, x.values()))
            .collect(),
    ))
}

/// Largest per-vertex `|inflow - outflow|`, relative to the largest edge flow.
///
/// The relative form makes the residual invariant under scaling the flux,
/// which matters when balance is checked at states far from the unit point.
pub fn balance_residual(graph: &EGraph, flows: &[f64]) -> Result<f64> {
    check_len(graph.num_edges(), flows.len())?;
    let mut net = vec![0.0; graph.num_vertices()];
    for (&(s, t), &f) in graph.edges().iter().zip(flows) {
        net[s] -= f;
        net[t] += f;
    }
    let scale = flows.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(net.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale)
}

/// `J > 0` and inflow equals outflow at every vertex, within `tol`.
pub fn is_complex_balanced_flux(graph: &EGraph, flux: &FluxVector, tol: f64) -> bool {
    flux.is_strictly_positive() && balance_residual(graph, flux.values()).is_ok_and(|r| r <= tol)
}

pub fn flux_equivalent(
    g: &EGraph,
    flux: &FluxVector,
    h: &EGraph,
    other: &FluxVector,
    tol: f64,
) -> bool {
    equivalence_residual(g, flux.values(), h, other.values()).is_ok_and(|r| r <= tol)
}

/// Flux analogue of [`crate::dynamics::realize_on`].
pub fn realize_flux_on(
    source: &EGraph,
    flux: &FluxVector,
    target: &EGraph,
    require_positive: bool,
    tol: &Tolerances,
) -> Result<Option<FluxVector>> {
    Ok(realize_weights(source, flux.values(), target, require_positive, tol)?.map(FluxVector::new))
}

/// Decides whether `flux` lies in the flux realizability set of `(source, target)`:
/// complex-balanced on `source` and realizable on `target`.
pub fn flux_membership(
    source: &EGraph,
    flux: &FluxVector,
    target: &EGraph,
    require_positive: bool,
    tol: &Tolerances,
) -> Result<Option<FluxVector>> {
    if !is_complex_balanced_flux(source, flux, tol.tol) {
        return Ok(None);
    }
    realize_flux_on(source, flux, target, require_positive, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{dynamically_equivalent, realize_on};
    use crate::egraph::is_weakly_reversible;
    use crate::fixtures;
    use crate::lp::{self, SlackOutcome};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn balance_examples() {
        let g = fixtures::two_cycle();
        assert!(is_complex_balanced_flux(&g, &FluxVector::new(vec![3.5, 3.5]), 1e-12));
        assert!(!is_complex_balanced_flux(&g, &FluxVector::new(vec![1.0, 2.0]), 1e-8));
        let tri = fixtures::three_cycle();
        assert!(is_complex_balanced_flux(&tri, &FluxVector::new(vec![5.0, 5.0, 5.0]), 0.0));
        assert!(!is_complex_balanced_flux(&g, &FluxVector::new(vec![0.0, 0.0]), 1e-8));
    }

    #[test]
    fn flux_equivalence_examples() {
        let g1 = EGraph::from_integer_points(&[&[0, 0], &[2, 0]], &[(0, 1)]).unwrap();
        let g2 = EGraph::from_integer_points(&[&[0, 0], &[1, 0]], &[(0, 1)]).unwrap();
        let j = FluxVector::new(vec![1.0]);
        assert!(flux_equivalent(&g1, &j, &g1, &j, 0.0));
        assert!(flux_equivalent(&g1, &j, &g2, &FluxVector::new(vec![2.0]), 1e-12));
    }

    #[test]
    fn rate_flux_conversion() {
        let g = EGraph::from_integer_points(&[&[1, 0], &[0, 1]], &[(0, 1)]).unwrap();
        let x = State::new(vec![2.0, 1.0]).unwrap();
        let k = flux_to_rates(&g, &FluxVector::new(vec![4.0]), &x).unwrap();
        assert_eq!(k.values(), &[2.0]);
        assert_eq!(rates_to_flux(&g, &k, &x).unwrap().values(), &[4.0]);
    }

    #[test]
    fn membership_basics() {
        let g = fixtures::two_cycle();
        let tol = Tolerances::default();
        let balanced = FluxVector::new(vec![2.0, 2.0]);
        assert_eq!(
            flux_membership(&g, &balanced, &g, true, &tol).unwrap(),
            Some(balanced.clone())
        );
        assert_eq!(
            flux_membership(&g, &FluxVector::new(vec![1.0, 2.0]), &g, true, &tol).unwrap(),
            None
        );
    }

    #[test]
    fn realize_flux_roundtrip_on_collinear_graphs() {
        let complete = fixtures::collinear_complete();
        let sparse = fixtures::collinear_sparse();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..30 {
            let j = fixtures::random_complex_balanced_flux(&complete, &mut rng);
            let image = realize_flux_on(&complete, &j, &sparse, false, &tol)
                .unwrap()
                .unwrap();
            assert!(flux_equivalent(&sparse, &image, &complete, &j, 1e-9));
            // At x = 1 fluxes and rates coincide, so the positive verdicts agree too.
            let k = RateVector::new(j.values().to_vec());
            assert_eq!(
                realize_flux_on(&complete, &j, &sparse, true, &tol)
                    .unwrap()
                    .is_some(),
                realize_on(&complete, &k, &sparse, true, &tol)
                    .unwrap()
                    .is_some()
            );
        }
    }

    #[test]
    fn membership_cone_is_closed_under_positive_combinations() {
        let complete = fixtures::collinear_complete();
        let sparse = fixtures::collinear_sparse();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut members = Vec::new();
        while members.len() < 12 {
            let j = fixtures::random_complex_balanced_flux(&complete, &mut rng);
            if flux_membership(&complete, &j, &sparse, true, &tol)
                .unwrap()
                .is_some()
            {
                members.push(j);
            }
        }
        for pair in members.chunks(2) {
            let (a, b) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
            let combo = pair[0].scaled_sum(a, &pair[1], b);
            assert!(flux_membership(&complete, &combo, &sparse, true, &tol)
                .unwrap()
                .is_some());
        }
    }

    #[test]
    fn rate_and_flux_equivalence_agree() {
        let complete = fixtures::collinear_complete();
        let sparse = fixtures::collinear_sparse();
        let tol = Tolerances::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            let kt = RateVector::new((0..12).map(|_| rng.gen_range(0.1..3.0)).collect());
            let mut k = realize_on(&complete, &kt, &sparse, false, &tol)
                .unwrap()
                .unwrap()
                .into_values();
            if trial % 2 == 1 {
                k[0] += 0.5;
            }
            let k = RateVector::new(k);
            let rates = dynamically_equivalent(&sparse, &k, &complete, &kt, 1e-8);
            assert_eq!(rates, trial % 2 == 0);
            for _ in 0..10 {
                let x = State::new(vec![rng.gen_range(0.2..4.0), rng.gen_range(0.2..4.0)]).unwrap();
                let jf = rates_to_flux(&sparse, &k, &x).unwrap();
                let jt = rates_to_flux(&complete, &kt, &x).unwrap();
                let scale = jt.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
                assert_eq!(flux_equivalent(&sparse, &jf, &complete, &jt, 1e-8 * scale), rates);
            }
        }
    }

    #[test]
    fn no_positive_balanced_flux_without_weak_reversibility() {
        let graphs = [
            EGraph::from_integer_points(&[&[1, 0], &[0, 1]], &[(0, 1)]).unwrap(),
            fixtures::collinear_sparse(),
            EGraph::from_integer_points(
                &[&[1, 0], &[0, 1], &[1, 1]],
                &[(0, 1), (1, 0), (1, 2)],
            )
            .unwrap(),
        ];
        for g in graphs {
            assert!(!is_weakly_reversible(&g));
            let a = DMatrix::from_fn(g.num_vertices(), g.num_edges(), |v, e| {
                let (s, t) = g.edges()[e];
                (t == v) as i32 as f64 - (s == v) as i32 as f64
            });
            let b = vec![0.0; g.num_vertices()];
            let out = lp::max_min_entry(&a, &b, 1.0, &lp::LpOptions::default()).unwrap();
            assert!(matches!(out, SlackOutcome::Feasible { slack, .. } if slack < 1e-9));
        }
    }
}

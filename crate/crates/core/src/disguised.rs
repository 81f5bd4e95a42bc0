//! The disguised toric locus and explicit paths between its members.
//!
//! `(G, k)` is a disguised toric system on a target graph `G~` when it is
//! dynamically equivalent to some `(G~, k~)` with `k~` in the toric locus of
//! `G~`. At a fixed positive state `x*`, the rates `k~` that are equivalent to
//! `k` and complex-balanced at `x*` form a polyhedron, so membership is a
//! linear program once `x*` is known.
//!
//! Choosing `x*` is simplified by two facts. Any complex-balanced steady
//! state of `(G~, k~)` is a steady state of `(G, k)`, since the vector fields
//! agree. And once a mass-action system has one complex-balanced steady
//! state, all of its positive steady states are complex-balanced. So the
//! program is feasible at one positive steady state of `(G, k)` exactly when
//! it is feasible at all of them. The search therefore projects multistart
//! points onto the steady-state set by damped Gauss-Newton in log coordinates
//! and solves the program there.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    equivalence_residual, monomial, realize_on, vertex_nets, RateVector, State,
};
use crate::egraph::{
    complete_graph, is_weakly_reversible, stoichiometric_subspace,
    weakly_reversible_subgraphs_capped, EGraph,
};
use crate::error::{Error, Result};
use crate::lp::{self, SlackOutcome};
use crate::toric::{
    birch_point, complex_balance_residual, fiber_rate_vector, toric_membership,
    CompatibilityClass,
};
use crate::Tolerances;

const LOG_BOX: f64 = 3.0;
const LOG_LIMIT: f64 = 30.0;
const STEADY_STATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchBudget {
    /// Random starts in addition to the all-ones state.
    pub starts: usize,
    /// Iteration cap of each local solve.
    pub iters: usize,
    /// Largest number of edge subsets the target enumeration may visit.
    pub subset_cap: u64,
    pub seed: u64,
    /// Total local iterations and linear programs across one search.
    pub max_evaluations: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self {
            starts: 64,
            iters: 200,
            subset_cap: 1 << 24,
            seed: 0,
            max_evaluations: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// Per-vertex equivalence residual between `(G, k)` and the realization.
    pub equivalence: f64,
    /// Relative balance residual of the realization at `steady_state`.
    pub balance: f64,
    /// Log-linear residual from the toric test of the realization.
    pub log_linear: f64,
    /// Smallest phase-one value seen when no realization was found.
    pub phase_one: f64,
}

impl Residuals {
    fn unknown() -> Self {
        Self {
            equivalence: f64::INFINITY,
            balance: f64::INFINITY,
            log_linear: f64::INFINITY,
            phase_one: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DisguisedCertificate {
    pub member: bool,
    pub target_graph: Option<EGraph>,
    pub realized_rates: Option<RateVector>,
    pub steady_state: Option<State>,
    /// For non-members: the search ran to completion within budget. A
    /// non-member with `search_exhausted = false` was cut off by the budget.
    pub search_exhausted: bool,
    /// For non-members: an obstruction independent of the steady state was found.
    pub proven_infeasible: bool,
    pub residuals: Residuals,
    pub evaluations: u64,
}

impl DisguisedCertificate {
    fn not_found(search_exhausted: bool, proven_infeasible: bool, phase_one: f64, evaluations: u64) -> Self {
        Self {
            member: false,
            target_graph: None,
            realized_rates: None,
            steady_state: None,
            search_exhausted,
            proven_infeasible,
            residuals: Residuals {
                phase_one,
                ..Residuals::unknown()
            },
            evaluations,
        }
    }
}

/// Builds a certificate for the claim `(graph, k) ~ (target, realized)` with
/// `realized` in the toric locus of `target`, re-checking every part of it.
///
/// `state` is used as the steady state when the realization is balanced
/// there; otherwise the toric witness is reported.
pub fn certify(
    graph: &EGraph,
    k: &RateVector,
    target: &EGraph,
    realized: &RateVector,
    state: Option<&State>,
    tol: &Tolerances,
) -> Result<DisguisedCertificate> {
    let equivalence = equivalence_residual(graph, k.values(), target, realized.values())?;
    let scale = k.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let toric = toric_membership(target, realized, tol)?;
    let hinted = match state {
        Some(x) => Some((x.clone(), complex_balance_residual(target, realized, x)?)),
        None => None,
    };
    let (steady_state, balance) = match hinted {
        Some((x, b)) if b <= tol.tol => (Some(x), b),
        _ => (toric.witness_state.clone(), toric.balance_residual),
    };
    let member = equivalence <= tol.tol * scale && toric.member;
    Ok(DisguisedCertificate {
        member,
        target_graph: Some(target.clone()),
        realized_rates: Some(realized.clone()),
        steady_state,
        search_exhausted: false,
        proven_infeasible: false,
        residuals: Residuals {
            equivalence,
            balance,
            log_linear: toric.residual,
            phase_one: 0.0,
        },
        evaluations: 0,
    })
}

fn check_rates(graph: &EGraph, k: &RateVector, signed: bool) -> Result<bool> {
    crate::dynamics::check_len(graph.num_edges(), k.len())?;
    if k.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailure("rates must be finite".into()));
    }
    Ok(signed || k.is_strictly_positive())
}

/// Decides whether `(graph, k)` lies in the disguised toric locus on
/// `target` (positive rates) or its signed variant.
pub fn disguised_membership(
    graph: &EGraph,
    k: &RateVector,
    target: &EGraph,
    signed: bool,
    budget: &SearchBudget,
    tol: &Tolerances,
) -> Result<DisguisedCertificate> {
    if !is_weakly_reversible(target) {
        return Err(Error::NotWeaklyReversible);
    }
    if !check_rates(graph, k, signed)? {
        return Ok(DisguisedCertificate::not_found(true, true, f64::INFINITY, 0));
    }
    let mut search = SteadyStates::new(graph, k, budget);
    let cert = against_target(graph, k, target, &mut search, tol)?;
    Ok(cert)
}

/// Decides membership in the union of the disguised toric loci over every
/// weakly reversible subgraph of the complete graph on `V(graph)`.
/// Candidates are tried in the enumeration order; the first success wins.
pub fn disguised_locus_membership(
    graph: &EGraph,
    k: &RateVector,
    signed: bool,
    budget: &SearchBudget,
    tol: &Tolerances,
) -> Result<DisguisedCertificate> {
    if !check_rates(graph, k, signed)? {
        return Ok(DisguisedCertificate::not_found(true, true, f64::INFINITY, 0));
    }
    let complete = complete_graph(graph);
    let candidates = weakly_reversible_subgraphs_capped(&complete, usize::MAX, budget.subset_cap)?;
    let mut search = SteadyStates::new(graph, k, budget);
    let mut all_proven = true;
    let mut best_phase_one = f64::INFINITY;
    for sub in candidates {
        let cert = against_target(graph, k, &sub.graph, &mut search, tol)?;
        if cert.member {
            return Ok(cert);
        }
        all_proven &= cert.proven_infeasible;
        best_phase_one = best_phase_one.min(cert.residuals.phase_one);
        if !cert.search_exhausted {
            return Ok(DisguisedCertificate::not_found(
                false,
                false,
                best_phase_one,
                search.evaluations,
            ));
        }
    }
    Ok(DisguisedCertificate::not_found(
        true,
        all_proven,
        best_phase_one,
        search.evaluations,
    ))
}

fn against_target(
    graph: &EGraph,
    k: &RateVector,
    target: &EGraph,
    search: &mut SteadyStates<'_>,
    tol: &Tolerances,
) -> Result<DisguisedCertificate> {
    // Positive realizability on the target is necessary at every state.
    search.evaluations += 1;
    if realize_on(graph, k, target, true, tol)?.is_none() {
        return Ok(DisguisedCertificate::not_found(
            true,
            true,
            f64::INFINITY,
            search.evaluations,
        ));
    }
    let program = BalancedRealization::new(graph, k, target);
    let mut best_phase_one = f64::INFINITY;
    let mut index = 0;
    loop {
        if search.evaluations >= search.budget.max_evaluations {
            return Ok(DisguisedCertificate::not_found(
                false,
                false,
                best_phase_one,
                search.evaluations,
            ));
        }
        let Some(slot) = search.get(index) else {
            return Ok(DisguisedCertificate::not_found(
                true,
                false,
                best_phase_one,
                search.evaluations,
            ));
        };
        index += 1;
        let Some(x) = slot else { continue };
        search.evaluations += 1;
        match program.solve(&x, tol)? {
            SlackOutcome::Feasible { x: rates, slack } if slack >= tol.pos_eps => {
                let realized = RateVector::new(rates);
                let mut cert = certify(graph, k, target, &realized, Some(&x), tol)?;
                cert.evaluations = search.evaluations;
                if cert.member {
                    return Ok(cert);
                }
            }
            SlackOutcome::Feasible { .. } => best_phase_one = best_phase_one.min(0.0),
            SlackOutcome::Infeasible { phase_one } => best_phase_one = best_phase_one.min(phase_one),
        }
    }
}

/// Equivalence and balance rows of the program in the target's rates.
struct BalancedRealization<'a> {
    target: &'a EGraph,
    /// Net vector of `(G, k)` at each target vertex.
    wanted: Vec<Vec<f64>>,
}

impl<'a> BalancedRealization<'a> {
    fn new(graph: &EGraph, k: &RateVector, target: &'a EGraph) -> Self {
        let nets = vertex_nets(graph, k.values());
        let wanted = target
            .vertices()
            .iter()
            .map(|v| {
                graph
                    .vertex_index(&v.coords)
                    .map_or_else(|| vec![0.0; graph.dimension()], |gv| nets[gv].clone())
            })
            .collect();
        Self { target, wanted }
    }

    fn solve(&self, x: &State, tol: &Tolerances) -> Result<SlackOutcome> {
        let t = self.target;
        let n = t.dimension();
        let nv = t.num_vertices();
        let mono: Vec<f64> = (0..nv).map(|v| monomial(t, v, x.values())).collect();
        let rows = nv * (n + 1);
        let mut a = DMatrix::<f64>::zeros(rows, t.num_edges());
        let mut b = vec![0.0; rows];
        for (v, net) in self.wanted.iter().enumerate() {
            b[v * n..(v + 1) * n].copy_from_slice(net);
        }
        for (e, &(s, d)) in t.edges().iter().enumerate() {
            for (i, (ys, yd)) in t.point(s).iter().zip(t.point(d)).enumerate() {
                a[(s * n + i, e)] = yd - ys;
            }
            // Balance at each vertex, divided by its own monomial.
            a[(nv * n + s, e)] += 1.0;
            a[(nv * n + d, e)] -= mono[s] / mono[d];
        }
        let cap = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        lp::max_min_entry(&a, &b, cap, &tol.lp_options())
    }
}

/// Lazily computed positive steady states of `(G, k)`, one per start.
struct SteadyStates<'a> {
    graph: &'a EGraph,
    k: &'a RateVector,
    budget: &'a SearchBudget,
    basis: DMatrix<f64>,
    starts: Vec<Vec<f64>>,
    found: Vec<Option<State>>,
    evaluations: u64,
}

impl<'a> SteadyStates<'a> {
    fn new(graph: &'a EGraph, k: &'a RateVector, budget: &'a SearchBudget) -> Self {
        let n = graph.dimension();
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        let mut starts = vec![vec![0.0; n]];
        for _ in 0..budget.starts {
            starts.push((0..n).map(|_| rng.gen_range(-LOG_BOX..=LOG_BOX)).collect());
        }
        Self {
            graph,
            k,
            budget,
            basis: stoichiometric_subspace(graph).matrix(),
            starts,
            found: Vec::new(),
            evaluations: 0,
        }
    }

    /// `None` when start `i` does not exist; `Some(None)` when it did not converge.
    fn get(&mut self, i: usize) -> Option<Option<State>> {
        if i >= self.starts.len() {
            return None;
        }
        while self.found.len() <= i {
            let z0 = self.starts[self.found.len()].clone();
            let x = self.project(z0);
            self.found.push(x);
        }
        Some(self.found[i].clone())
    }

    /// Normalized residual `Q^T f(e^z) / N(z)` with `N(z) = sum |k_e| z^{y_e}`
    /// and its Jacobian.
    fn residual(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let g = self.graph;
        let n = g.dimension();
        let s = self.basis.ncols();
        let x: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let mut f = DVector::<f64>::zeros(s);
        let mut df = DMatrix::<f64>::zeros(s, n);
        let mut norm = 0.0;
        let mut dnorm = DVector::<f64>::zeros(n);
        for (e, &(src, _)) in g.edges().iter().enumerate() {
            let w = self.k.values()[e] * monomial(g, src, &x);
            let dir = self.basis.transpose() * DVector::from_vec(g.reaction_vector(e));
            let ys = g.point(src);
            f += &dir * w;
            for j in 0..n {
                for i in 0..s {
                    df[(i, j)] += dir[i] * w * ys[j];
                }
                dnorm[j] += w.abs() * ys[j];
            }
            norm += w.abs();
        }
        let norm = norm.max(f64::MIN_POSITIVE);
        let r = &f / norm;
        let jac = (df - &r * dnorm.transpose()) / norm;
        (r, jac)
    }

    fn project(&mut self, mut z: Vec<f64>) -> Option<State> {
        let n = z.len();
        for _ in 0..self.budget.iters {
            self.evaluations += 1;
            let (r, jac) = self.residual(&z);
            let size = r.norm();
            if r.amax() <= STEADY_STATE_TOL {
                return State::from_log(&z).ok();
            }
            let svd = jac.svd(true, true);
            let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
            let mut step = svd.solve(&(-&r), eps).ok()?;
            let longest = step.amax();
            if longest > 1.0 {
                step /= longest;
            }
            let mut alpha = 1.0;
            loop {
                let cand: Vec<f64> = (0..n).map(|i| z[i] + alpha * step[i]).collect();
                if cand.iter().all(|v| v.abs() <= LOG_LIMIT) && self.residual(&cand).0.norm() < size {
                    z = cand;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-10 {
                    return None;
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Fiber,
    Line,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub rates: RateVector,
    pub certificate: DisguisedCertificate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub samples: Vec<Sample>,
}

impl Segment {
    /// Largest infinity-norm step between consecutive samples.
    pub fn max_step(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].rates.max_abs_diff(&w[1].rates))
            .fold(0.0, f64::max)
    }

    /// Sum of infinity-norm steps between consecutive samples.
    pub fn length(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| w[0].rates.max_abs_diff(&w[1].rates))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub endpoint_a: RateVector,
    pub endpoint_b: RateVector,
    /// Shared steady state of the line segment.
    pub anchor: State,
    pub segments: Vec<Segment>,
    pub merged_graph: Option<EGraph>,
}

impl PathResult {
    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.segments.iter().flat_map(|s| s.samples.iter())
    }
}

fn parameters(samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn blend(a: &State, b: &State, s: f64) -> Result<State> {
    State::new(
        a.values()
            .iter()
            .zip(b.values())
            .map(|(&p, &q)| lerp(p, q, s))
            .collect(),
    )
}

// Exact at both ends and for equal arguments.
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if a == b {
        a
    } else {
        (1.0 - t) * a + t * b
    }
}

struct Realization<'a> {
    target: &'a EGraph,
    rates: &'a RateVector,
    state: &'a State,
}

fn membership_parts(cert: &DisguisedCertificate) -> Option<Realization<'_>> {
    match (&cert.target_graph, &cert.realized_rates, &cert.steady_state) {
        (Some(target), Some(rates), Some(state)) if cert.member => Some(Realization {
            target,
            rates,
            state,
        }),
        _ => None,
    }
}

// Sample of `s -> k_G(x(s), x1)`, `x(s) = (1 - s) x1 + s x_target`.
fn fiber_sample(
    graph: &EGraph,
    k: &RateVector,
    real: &Realization<'_>,
    x_target: &State,
    s: f64,
    tol: &Tolerances,
) -> Result<(RateVector, DisguisedCertificate)> {
    let x = blend(real.state, x_target, s)?;
    let rates = fiber_rate_vector(graph, k, &x, real.state);
    let realized = fiber_rate_vector(real.target, real.rates, &x, real.state);
    let cert = certify(graph, &rates, real.target, &realized, Some(&x), tol)?;
    Ok((rates, cert))
}

fn check_sample(
    segment: usize,
    t: f64,
    cert: &DisguisedCertificate,
    rates: &RateVector,
    positive: bool,
) -> Result<()> {
    if !cert.member {
        return Err(Error::CertificationFailure {
            segment,
            t,
            detail: format!(
                "equivalence {:e}, log-linear {:e}, balance {:e}",
                cert.residuals.equivalence, cert.residuals.log_linear, cert.residuals.balance
            ),
        });
    }
    if positive && !rates.is_strictly_positive() {
        return Err(Error::CertificationFailure {
            segment,
            t,
            detail: "sample leaves the positive orthant".into(),
        });
    }
    Ok(())
}

fn class_check(real: &Realization<'_>, x_target: &State, tol: &Tolerances) -> Result<()> {
    let cls = CompatibilityClass::new(real.state.clone(), stoichiometric_subspace(real.target))?;
    let residual = cls.residual(x_target);
    if residual > tol.tol_lin.max(1e-9) {
        return Err(Error::ClassMismatch { residual });
    }
    Ok(())
}

/// The segment `t -> k_G(x(t), x1)` with `x(t) = (1 - t) x1 + t x_target`,
/// where `x1` is the certificate's steady state. Every sample is certified
/// against the certificate's target graph. At least two samples are taken.
pub fn fiber_path(
    graph: &EGraph,
    k: &RateVector,
    certificate: &DisguisedCertificate,
    x_target: &State,
    samples: usize,
    tol: &Tolerances,
) -> Result<Segment> {
    let real = membership_parts(certificate).ok_or_else(|| Error::MembershipFailure {
        endpoint: "fiber start".into(),
    })?;
    class_check(&real, x_target, tol)?;
    let mut out = Vec::new();
    for t in parameters(samples) {
        let (rates, certificate) = fiber_sample(graph, k, &real, x_target, t, tol)?;
        check_sample(0, t, &certificate, &rates, false)?;
        out.push(Sample {
            t,
            rates,
            certificate,
        });
    }
    Ok(Segment {
        kind: SegmentKind::Fiber,
        samples: out,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathConfig {
    /// Work in the signed locus instead of the positive one.
    pub signed: bool,
    /// Certify endpoints against this graph instead of searching all
    /// weakly reversible subgraphs of the complete graph.
    pub target: Option<EGraph>,
    pub budget: SearchBudget,
    /// Samples per segment.
    pub samples: usize,
    pub tolerances: Tolerances,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            signed: false,
            target: None,
            budget: SearchBudget::default(),
            samples: 32,
            tolerances: Tolerances::default(),
        }
    }
}

/// Joins two members of the (signed) disguised toric locus by a path of three
/// segments: a fiber moving the steady state of `k_a`'s realization to `x0`,
/// the straight line to the corresponding point for `k_b`, and the reversed
/// fiber back to `k_b`. The line is realized on the union of both target
/// graphs with `x0` as shared complex-balanced steady state. When
/// `k_a == k_b` the anchor is replaced by the shared steady state, giving the
/// constant path.
pub fn connect_members(
    graph: &EGraph,
    k_a: &RateVector,
    k_b: &RateVector,
    x0: &State,
    config: &PathConfig,
) -> Result<PathResult> {
    let tol = &config.tolerances;
    let positive = !config.signed;
    let ends = [("a", k_a), ("b", k_b)].map(|(name, k)| {
        let cert = match &config.target {
            Some(t) => disguised_membership(graph, k, t, config.signed, &config.budget, tol),
            None => disguised_locus_membership(graph, k, config.signed, &config.budget, tol),
        }?;
        let failure = || Error::MembershipFailure {
            endpoint: name.into(),
        };
        let real = membership_parts(&cert).ok_or_else(failure)?;
        // Move the realization's steady state to its Birch point in the class of x0.
        let cls = CompatibilityClass::new(x0.clone(), stoichiometric_subspace(real.target))?;
        let x1 = birch_point(real.target, real.rates, real.state, &cls)?;
        let cert = certify(graph, k, real.target, real.rates, Some(&x1), tol)?;
        if !cert.member || cert.steady_state.as_ref() != Some(&x1) {
            return Err(failure());
        }
        Ok(cert)
    });
    let [cert_a, cert_b] = ends;
    let (cert_a, cert_b) = (cert_a?, cert_b?);
    let real_a = membership_parts(&cert_a).expect("checked member");
    let real_b = membership_parts(&cert_b).expect("checked member");
    // Equal endpoints share one realization; anchoring at its own steady
    // state makes every segment constant.
    let x0 = if k_a == k_b { real_a.state } else { x0 };
    let params = parameters(config.samples);

    let mut first = Vec::new();
    for &t in &params {
        let (rates, certificate) = fiber_sample(graph, k_a, &real_a, x0, t, tol)?;
        check_sample(0, t, &certificate, &rates, positive)?;
        first.push(Sample {
            t,
            rates,
            certificate,
        });
    }
    let mut last = Vec::new();
    for &t in &params {
        let (rates, certificate) = fiber_sample(graph, k_b, &real_b, x0, 1.0 - t, tol)?;
        check_sample(2, t, &certificate, &rates, positive)?;
        last.push(Sample {
            t,
            rates,
            certificate,
        });
    }
    // Exact endpoints by construction: s = 0 gives k itself, s = 1 lands on x0.
    let start = &first[first.len() - 1].rates;
    let end = &last[0].rates;

    let merged = real_a.target.union(real_b.target)?;
    let lift = |real: &Realization<'_>| -> Result<Vec<f64>> {
        let moved = fiber_rate_vector(real.target, real.rates, x0, real.state);
        let mut out = vec![0.0; merged.num_edges()];
        for (e, &(s, d)) in real.target.edges().iter().enumerate() {
            let me = merged
                .find_edge(&real.target.vertices()[s].coords, &real.target.vertices()[d].coords)
                .ok_or(Error::NotSubgraph)?;
            out[me] = moved.values()[e];
        }
        Ok(out)
    };
    let (lift_a, lift_b) = (lift(&real_a)?, lift(&real_b)?);
    let mut middle = Vec::new();
    for &t in &params {
        let rates = RateVector::new(
            start
                .values()
                .iter()
                .zip(end.values())
                .map(|(&a, &b)| lerp(a, b, t))
                .collect(),
        );
        let weights: Vec<f64> = lift_a
            .iter()
            .zip(&lift_b)
            .map(|(&a, &b)| lerp(a, b, t))
            .collect();
        let kept: Vec<usize> = (0..weights.len()).filter(|&e| weights[e] != 0.0).collect();
        let target = merged.edge_subgraph(&kept)?;
        let realized = RateVector::new(kept.iter().map(|&e| weights[e]).collect());
        let certificate = certify(graph, &rates, &target, &realized, Some(x0), tol)?;
        check_sample(1, t, &certificate, &rates, positive)?;
        middle.push(Sample {
            t,
            rates,
            certificate,
        });
    }

    Ok(PathResult {
        endpoint_a: k_a.clone(),
        endpoint_b: k_b.clone(),
        anchor: x0.clone(),
        segments: vec![
            Segment {
                kind: SegmentKind::Fiber,
                samples: first,
            },
            Segment {
                kind: SegmentKind::Line,
                samples: middle,
            },
            Segment {
                kind: SegmentKind::Fiber,
                samples: last,
            },
        ],
        merged_graph: Some(merged),
    })
}

//! The toric locus: rate vectors whose mass-action system is complex-balanced.
//!
//! Membership is decided numerically. For each linkage class, the positive
//! kernel vector of the transposed weighted Laplacian (the tree constants) is
//! computed; the system is complex-balanced exactly when the logarithms of
//! those tree constants are an affine function of the vertex coordinates on
//! each class, which is a linear least-squares problem.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::dynamics::{check_len, monomial, realize_on, RateVector, State};
use crate::egraph::{is_weakly_reversible, linkage_classes, EGraph, StoichiometricSubspace};
use crate::error::{Error, Result};
use crate::flux::{balance_residual, flux_to_rates, rates_to_flux, FluxVector};
use crate::Tolerances;

const BIRCH_MAX_ITERATIONS: usize = 200;
const BIRCH_GRADIENT_TOL: f64 = 1e-10;
// Newton keeps polishing below the acceptance tolerance while it still helps.
const BIRCH_POLISH_TOL: f64 = 1e-15;
const BIRCH_MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NonMemberReason {
    #[serde(rename = "not weakly reversible")]
    NotWeaklyReversible,
    #[serde(rename = "rates below the positivity floor")]
    NotStrictlyPositive,
    #[serde(rename = "log-linear system has no solution")]
    LogLinearResidual,
    #[serde(rename = "not realizable on the target graph")]
    NotRealizable,
}

impl NonMemberReason {
    pub fn describe(self) -> &'static str {
        match self {
            NonMemberReason::NotWeaklyReversible => "not weakly reversible",
            NonMemberReason::NotStrictlyPositive => "rates below the positivity floor",
            NonMemberReason::LogLinearResidual => "log-linear system has no solution",
            NonMemberReason::NotRealizable => "not realizable on the target graph",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToricCertificate {
    pub member: bool,
    /// A complex-balanced steady state of the tested system.
    pub witness_state: Option<State>,
    /// Realizing rates on the target graph, when one is involved.
    pub witness_rates: Option<RateVector>,
    /// Infinity-norm residual of the log-linear system.
    pub residual: f64,
    /// Relative per-vertex balance residual at `witness_state`.
    pub balance_residual: f64,
    pub proven_infeasible: bool,
    pub reason: Option<NonMemberReason>,
}

impl ToricCertificate {
    fn rejected(reason: NonMemberReason) -> Self {
        Self {
            member: false,
            witness_state: None,
            witness_rates: None,
            residual: f64::INFINITY,
            balance_residual: f64::INFINITY,
            proven_infeasible: true,
            reason: Some(reason),
        }
    }
}

/// `(x0 + S) ∩ R^n_{>0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityClass {
    pub anchor: State,
    pub subspace: StoichiometricSubspace,
}

impl CompatibilityClass {
    pub fn new(anchor: State, subspace: StoichiometricSubspace) -> Result<Self> {
        if anchor.len() != subspace.ambient() {
            return Err(Error::DimensionMismatch {
                index: 0,
                expected: subspace.ambient(),
                found: anchor.len(),
            });
        }
        Ok(Self { anchor, subspace })
    }

    /// Residual of `x - x0` off the subspace, relative to `max(1, |x|, |x0|)`.
    pub fn residual(&self, x: &State) -> f64 {
        let d: Vec<f64> = x
            .values()
            .iter()
            .zip(self.anchor.values())
            .map(|(a, b)| a - b)
            .collect();
        let scale = x
            .values()
            .iter()
            .chain(self.anchor.values())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        self.subspace.residual(&d) / scale
    }

    pub fn contains(&self, x: &State, tol_lin: f64) -> bool {
        x.len() == self.anchor.len() && self.residual(x) <= tol_lin
    }
}

/// Relative balance residual of the flux `k x^y`.
pub fn complex_balance_residual(graph: &EGraph, k: &RateVector, x: &State) -> Result<f64> {
    balance_residual(graph, rates_to_flux(graph, k, x)?.values())
}

/// At every vertex, `sum_{y -> y'} k x^y = sum_{y' -> y} k x^{y'}` within `tol`
/// (relative to the largest edge flux).
pub fn is_complex_balanced_state(graph: &EGraph, k: &RateVector, x: &State, tol: f64) -> bool {
    complex_balance_residual(graph, k, x).is_ok_and(|r| r <= tol)
}

/// Tree constants of `(G, k)`: for each linkage class, the positive kernel
/// vector of the transposed weighted Laplacian, scaled so its largest entry is 1.
///
/// Requires every linkage class to be strongly connected.
pub fn tree_constants(graph: &EGraph, k: &RateVector) -> Result<Vec<f64>> {
    check_len(graph.num_edges(), k.len())?;
    let mut rho = vec![0.0; graph.num_vertices()];
    for class in linkage_classes(graph) {
        let m = class.len();
        let local = |v: usize| class.iter().position(|&c| c == v).expect("edge inside class");
        // lt = L^T with L_ii = sum of out-rates, L_ij = -k_{i->j}.
        let mut lt = DMatrix::<f64>::zeros(m, m);
        for (e, &(s, t)) in graph.edges().iter().enumerate() {
            if !class.contains(&s) {
                continue;
            }
            let (i, j) = (local(s), local(t));
            lt[(i, i)] += k.values()[e];
            lt[(j, i)] -= k.values()[e];
        }
        let kernel = laplacian_kernel(&lt)?;
        for (i, &v) in class.iter().enumerate() {
            rho[v] = kernel[i];
        }
    }
    Ok(rho)
}

fn laplacian_kernel(lt: &DMatrix<f64>) -> Result<Vec<f64>> {
    let m = lt.nrows();
    let svd = lt.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma = &svd.singular_values;
    let sigma_max = sigma.max();
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[a].total_cmp(&sigma[b]));
    if m >= 2 && sigma[order[1]] <= 1e-13 * sigma_max {
        return Err(Error::SolverFailure(format!(
            "Laplacian kernel has dimension above one (singular values {:e}, {:e})",
            sigma[order[0]],
            sigma[order[1]]
        )));
    }
    let mut rho: Vec<f64> = v_t.row(order[0]).iter().copied().collect();
    if rho.iter().sum::<f64>() < 0.0 {
        rho.iter_mut().for_each(|v| *v = -*v);
    }
    let pivot = (0..m)
        .max_by(|&a, &b| rho[a].total_cmp(&rho[b]))
        .expect("nonempty class");
    // Refine by fixing the largest entry and solving the remaining equations,
    // a nonsingular M-matrix minor.
    if m >= 2 {
        let keep: Vec<usize> = (0..m).filter(|&i| i != pivot).collect();
        let a = DMatrix::from_fn(m - 1, m - 1, |r, c| lt[(keep[r], keep[c])]);
        let b = DVector::from_fn(m - 1, |r, _| -lt[(keep[r], pivot)]);
        if let Some(sol) = a.lu().solve(&b) {
            if sol.iter().all(|&v| v > 0.0 && v.is_finite()) {
                let mut refined = vec![0.0; m];
                refined[pivot] = 1.0;
                for (r, &i) in keep.iter().enumerate() {
                    refined[i] = sol[r];
                }
                return Ok(refined);
            }
        }
    }
    let top = rho[pivot];
    if !(top > 0.0) || rho.iter().any(|&v| v <= 0.0) {
        return Err(Error::SolverFailure(
            "Laplacian kernel vector is not strictly positive".into(),
        ));
    }
    Ok(rho.into_iter().map(|v| v / top).collect())
}

/// Decides whether `k` lies in the toric locus of `graph`.
pub fn toric_membership(graph: &EGraph, k: &RateVector, tol: &Tolerances) -> Result<ToricCertificate> {
    check_len(graph.num_edges(), k.len())?;
    if !is_weakly_reversible(graph) {
        return Ok(ToricCertificate::rejected(NonMemberReason::NotWeaklyReversible));
    }
    if k.values().iter().any(|&v| !(v >= tol.pos_eps)) {
        return Ok(ToricCertificate::rejected(NonMemberReason::NotStrictlyPositive));
    }
    let rho = tree_constants(graph, k)?;
    let classes = linkage_classes(graph);
    let n = graph.dimension();
    let nv = graph.num_vertices();
    // Unknowns: z in R^n and one offset per linkage class.
    let mut a = DMatrix::<f64>::zeros(nv, n + classes.len());
    let mut b = DVector::<f64>::zeros(nv);
    for (c, class) in classes.iter().enumerate() {
        for &v in class {
            for (i, &y) in graph.point(v).iter().enumerate() {
                a[(v, i)] = y;
            }
            a[(v, n + c)] = 1.0;
            b[v] = rho[v].ln();
        }
    }
    let svd = a.clone().svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    let sol = svd
        .solve(&b, eps)
        .map_err(|e| Error::SolverFailure(e.to_string()))?;
    let residual = (&a * &sol - &b).amax();
    let z: Vec<f64> = sol.iter().take(n).copied().collect();
    let witness = State::from_log(&z)
        .map_err(|_| Error::SolverFailure("witness state overflowed".into()))?;
    let balance = complex_balance_residual(graph, k, &witness)?;
    let member = residual <= tol.tol_loglin && balance <= tol.tol;
    Ok(ToricCertificate {
        member,
        witness_state: Some(witness),
        witness_rates: None,
        residual,
        balance_residual: balance,
        proven_infeasible: residual > tol.tol_loglin,
        reason: (!member).then_some(NonMemberReason::LogLinearResidual),
    })
}

/// Decides membership in the toric locus of `source` restricted to rates
/// realizable on `target` (positively, or with signed rates).
pub fn toric_membership_on(
    source: &EGraph,
    h: &RateVector,
    target: &EGraph,
    require_positive: bool,
    tol: &Tolerances,
) -> Result<ToricCertificate> {
    let mut cert = toric_membership(source, h, tol)?;
    if !cert.member {
        return Ok(cert);
    }
    match realize_on(source, h, target, require_positive, tol)? {
        Some(rates) => cert.witness_rates = Some(rates),
        None => {
            cert.member = false;
            cert.proven_infeasible = true;
            cert.reason = Some(NonMemberReason::NotRealizable);
        }
    }
    Ok(cert)
}

fn entropy(x: &[f64], ln_star: &[f64]) -> f64 {
    x.iter()
        .zip(ln_star)
        .map(|(&xi, &l)| xi * (xi.ln() - l - 1.0))
        .sum()
}

/// The unique point `x` of `cls` with `ln x - ln x_star` orthogonal to the
/// class subspace, found by damped Newton on
/// `h(x) = sum x_i (ln x_i - ln x*_i - 1)` in class coordinates.
///
/// When `x_star` is a complex-balanced steady state of `(graph, k)` and the
/// class subspace contains the graph's reaction vectors, the result is the
/// complex-balanced steady state of `(graph, k)` inside the class.
pub fn birch_point(
    graph: &EGraph,
    k: &RateVector,
    x_star: &State,
    cls: &CompatibilityClass,
) -> Result<State> {
    birch_point_from(graph, k, x_star, cls, &cls.anchor)
}

/// [`birch_point`] started from an arbitrary point of the class.
pub fn birch_point_from(
    graph: &EGraph,
    k: &RateVector,
    x_star: &State,
    cls: &CompatibilityClass,
    start: &State,
) -> Result<State> {
    check_len(graph.num_edges(), k.len())?;
    let n = cls.anchor.len();
    if x_star.len() != n || start.len() != n {
        return Err(Error::DimensionMismatch {
            index: 0,
            expected: n,
            found: x_star.len().min(start.len()),
        });
    }
    let residual = cls.residual(start);
    if residual > 1e-8 {
        return Err(Error::ClassMismatch { residual });
    }
    let s = cls.subspace.dim;
    if s == 0 {
        return Ok(cls.anchor.clone());
    }
    let basis = cls.subspace.matrix();
    let ln_star = x_star.ln();
    let mut x = DVector::from_column_slice(start.values());
    let gradient = |x: &DVector<f64>| -> DVector<f64> {
        let d = DVector::from_fn(n, |i, _| x[i].ln() - ln_star[i]);
        basis.transpose() * d
    };
    let mut previous = f64::INFINITY;
    for _ in 0..BIRCH_MAX_ITERATIONS {
        let g = gradient(&x);
        let stalled = g.amax() >= previous && g.amax() <= BIRCH_GRADIENT_TOL;
        previous = g.amax();
        if g.amax() <= BIRCH_POLISH_TOL || stalled {
            return State::new(x.iter().copied().collect());
        }
        let hess = DMatrix::from_fn(s, s, |a, b| {
            (0..n).map(|i| basis[(i, a)] * basis[(i, b)] / x[i]).sum::<f64>()
        });
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::ConvergenceFailure("singular Hessian".into()))?
            .solve(&(-&g));
        let dx = &basis * &step;
        let h0 = entropy(x.as_slice(), &ln_star);
        let g0 = g.amax();
        let slope = g.dot(&step);
        let mut alpha = 1.0;
        loop {
            let cand = &x + &dx * alpha;
            if cand.iter().all(|&v| v > 0.0) {
                let h1 = entropy(cand.as_slice(), &ln_star);
                if h1 <= h0 + 1e-4 * alpha * slope || gradient(&cand).amax() < g0 {
                    x = cand;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < BIRCH_MIN_STEP {
                if g0 <= BIRCH_GRADIENT_TOL {
                    return State::new(x.iter().copied().collect());
                }
                return Err(Error::ConvergenceFailure(format!(
                    "line search stalled with gradient {g0:e}"
                )));
            }
        }
    }
    if gradient(&x).amax() <= BIRCH_GRADIENT_TOL {
        return State::new(x.iter().copied().collect());
    }
    Err(Error::ConvergenceFailure(format!(
        "no convergence in {BIRCH_MAX_ITERATIONS} Newton steps"
    )))
}

/// `k_e (x*)^y / x^y`: moves the complex-balanced steady state of `k_star`
/// from `x_star` to `x`.
pub fn fiber_rate_vector(graph: &EGraph, k_star: &RateVector, x: &State, x_star: &State) -> RateVector {
    RateVector::new(
        graph
            .edges()
            .iter()
            .zip(k_star.values())
            .map(|(&(s, _), &k)| {
                k * (monomial(graph, s, x_star.values()) / monomial(graph, s, x.values()))
            })
            .collect(),
    )
}

/// `k_e = J_e / x^{source(e)}`; for complex-balanced `J` the result is toric
/// with steady state `x`.
pub fn phi(graph: &EGraph, flux: &FluxVector, x: &State) -> Result<RateVector> {
    flux_to_rates(graph, flux, x)
}

/// Inverse of [`phi`] on the class `cls`: the Birch point `x` of `k` in `cls`
/// and the flux `J_e = k_e x^{source(e)}`.
pub fn phi_inverse(
    graph: &EGraph,
    k: &RateVector,
    cls: &CompatibilityClass,
    tol: &Tolerances,
) -> Result<(FluxVector, State)> {
    let cert = toric_membership(graph, k, tol)?;
    let Some(x_star) = cert.witness_state.filter(|_| cert.member) else {
        return Err(Error::NotMember(
            cert.reason.map_or("unknown", NonMemberReason::describe).into(),
        ));
    };
    let x = birch_point(graph, k, &x_star, cls)?;
    let flux = rates_to_flux(graph, k, &x)?;
    Ok((flux, x))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosureApproximation {
    /// `eps * k*_G(x1, x*) + k̂_i`.
    pub rates: RateVector,
    /// Zero extension of the subgraph rates to the edges of the full graph.
    pub extension: RateVector,
    /// Complex-balanced steady state of the subgraph system, shared by `rates`.
    pub steady_state: State,
}

/// Toric rate vectors on `graph` approaching the zero extension of a toric
/// rate vector on a weakly reversible subgraph as `eps -> 0`.
pub fn closure_approx(
    graph: &EGraph,
    subgraph: &EGraph,
    sub_rates: &RateVector,
    k_star: &RateVector,
    x_star: &State,
    eps: f64,
    tol: &Tolerances,
) -> Result<ClosureApproximation> {
    check_len(graph.num_edges(), k_star.len())?;
    if !is_weakly_reversible(graph) || !is_weakly_reversible(subgraph) {
        return Err(Error::NotWeaklyReversible);
    }
    if !subgraph.is_subgraph_of(graph) {
        return Err(Error::NotSubgraph);
    }
    let cert = toric_membership(subgraph, sub_rates, tol)?;
    let Some(x1) = cert.witness_state.filter(|_| cert.member) else {
        return Err(Error::NotMember("subgraph rates are not toric".into()));
    };
    let star_residual = complex_balance_residual(graph, k_star, x_star)?;
    if !(star_residual <= tol.tol_loglin) || !k_star.is_strictly_positive() {
        return Err(Error::NotMember(format!(
            "reference rates are not complex-balanced at the given state (residual {star_residual:e})"
        )));
    }
    let mut extension = vec![0.0; graph.num_edges()];
    for (e, &(s, t)) in subgraph.edges().iter().enumerate() {
        let ge = graph
            .find_edge(&subgraph.vertices()[s].coords, &subgraph.vertices()[t].coords)
            .ok_or(Error::NotSubgraph)?;
        extension[ge] = sub_rates.values()[e];
    }
    let fiber = fiber_rate_vector(graph, k_star, &x1, x_star);
    let rates = fiber
        .values()
        .iter()
        .zip(&extension)
        .map(|(f, k)| eps * f + k)
        .collect();
    Ok(ClosureApproximation {
        rates: RateVector::new(rates),
        extension: RateVector::new(extension),
        steady_state: x1,
    })
}

//! Toric and disguised toric loci of mass-action systems.
//!
//! The crate works with reaction networks embedded in `Q^n` ([`egraph`]),
//! their mass-action vector fields and dynamical equivalence ([`dynamics`]),
//! flux systems ([`flux`]), the toric locus of complex-balanced rate vectors
//! ([`toric`]), and the disguised toric locus together with explicit paths
//! between its members ([`disguised`]).
//!
//! Every membership verdict carries a certificate that can be re-checked
//! independently of the search that produced it.

pub mod disguised;
pub mod dynamics;
pub mod egraph;
pub mod error;
pub mod fixtures;
pub mod flux;
pub mod lp;
pub mod toric;

use serde::{Deserialize, Serialize};

pub use crate::dynamics::{RateVector, State};
pub use crate::egraph::{EGraph, StoichiometricSubspace};
pub use crate::error::{Error, Result};
pub use crate::flux::FluxVector;

/// Numerical policy shared by every membership test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Per-vertex equivalence and balance residual bound.
    pub tol: f64,
    /// Residual bound for subspace membership.
    pub tol_lin: f64,
    /// Residual bound for the log-linear toric system.
    pub tol_loglin: f64,
    /// Closed-cone stand-in for strict positivity: entries must be `>= pos_eps`.
    pub pos_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            tol_lin: 1e-10,
            tol_loglin: 1e-7,
            pos_eps: 1e-9,
        }
    }
}

impl Tolerances {
    pub(crate) fn lp_options(&self) -> lp::LpOptions {
        lp::LpOptions {
            feasibility_tol: self.tol,
            ..lp::LpOptions::default()
        }
    }
}

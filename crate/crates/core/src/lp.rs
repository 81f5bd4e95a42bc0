//! Dense two-phase simplex for the small equality-form programs that arise in
//! realizability and flux-cone membership.
//!
//! Problems have the form `maximize c·x  s.t.  A x = b, x >= 0`. Before the
//! simplex runs, the equality rows are replaced by an orthogonal reduction of
//! `A` (via SVD), which removes linearly dependent rows and checks their
//! right-hand sides for consistency. Bland's rule is used throughout, so the
//! method terminates on degenerate problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    /// Phase-one optimum (relative to `max(1, |b|_inf)`) above which the
    /// program is declared infeasible.
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    pub optimality_tol: f64,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            pivot_tol: 1e-11,
            optimality_tol: 1e-12,
            max_iterations: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    /// Proven infeasible: the phase-one optimum (sum of artificial variables,
    /// or the inconsistency of dependent rows) exceeds tolerance.
    Infeasible { phase_one: f64 },
    Unbounded,
}

/// Maximize `c·x` subject to `A x = b`, `x >= 0`.
pub fn maximize(a: &DMatrix<f64>, b: &[f64], c: &[f64], opts: &LpOptions) -> Result<LpOutcome> {
    let n = a.ncols();
    assert_eq!(a.nrows(), b.len(), "row count must match rhs length");
    assert_eq!(n, c.len(), "column count must match objective length");
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let threshold = opts.feasibility_tol * scale;

    let (rows, rhs, inconsistency) = reduce_rows(a, b);
    if inconsistency > threshold {
        return Ok(LpOutcome::Infeasible {
            phase_one: inconsistency,
        });
    }
    let mut tableau = Tableau::phase_one(&rows, &rhs, n);
    tableau.optimize(opts, None)?;
    let phase_one = -tableau.objective_value();
    if phase_one > threshold {
        return Ok(LpOutcome::Infeasible { phase_one });
    }
    tableau.drive_out_artificials(opts);
    tableau.set_objective(c);
    if !tableau.optimize(opts, Some(n))? {
        return Ok(LpOutcome::Unbounded);
    }
    let x = tableau.primal(n);
    let objective = x.iter().zip(c).map(|(x, c)| x * c).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlackOutcome {
    Infeasible { phase_one: f64 },
    /// `x` solves `A x = b` with every entry at least `slack`, and no feasible
    /// point has a larger minimum entry (up to `cap`).
    Feasible { x: Vec<f64>, slack: f64 },
}

/// Finds `x >= 0` with `A x = b` maximizing `min_i x_i`, capped at `cap`.
///
/// Solved as `maximize t` over `x = u + t·1`, `u >= 0`, `0 <= t <= cap`.
/// The cap keeps the program bounded when `A` has a strictly positive
/// kernel direction.
pub fn max_min_entry(
    a: &DMatrix<f64>,
    b: &[f64],
    cap: f64,
    opts: &LpOptions,
) -> Result<SlackOutcome> {
    let (m, n) = a.shape();
    if n == 0 {
        let residual = b.iter().fold(0.0f64, |r, v| r.max(v.abs()));
        return Ok(if residual <= opts.feasibility_tol * b.iter().fold(1.0f64, |s, v| s.max(v.abs())) {
            SlackOutcome::Feasible {
                x: Vec::new(),
                slack: cap,
            }
        } else {
            SlackOutcome::Infeasible {
                phase_one: residual,
            }
        });
    }
    let mut big = DMatrix::zeros(m + 1, n + 2);
    big.view_mut((0, 0), (m, n)).copy_from(a);
    for i in 0..m {
        big[(i, n)] = a.row(i).sum();
    }
    big[(m, n)] = 1.0;
    big[(m, n + 1)] = 1.0;
    let mut rhs = b.to_vec();
    rhs.push(cap);
    let mut c = vec![0.0; n + 2];
    c[n] = 1.0;
    match maximize(&big, &rhs, &c, opts)? {
        LpOutcome::Optimal { x, .. } => {
            let t = x[n];
            let x = x[..n].iter().map(|u| u + t).collect();
            Ok(SlackOutcome::Feasible { x, slack: t })
        }
        LpOutcome::Infeasible { phase_one } => Ok(SlackOutcome::Infeasible { phase_one }),
        LpOutcome::Unbounded => Err(Error::SolverFailure(
            "capped max-min program reported unbounded".into(),
        )),
    }
}

/// Replaces `A x = b` by an equivalent full-row-rank system `U_r^T A x = U_r^T b`
/// and returns the inconsistency `|b - U_r U_r^T b|_inf`.
fn reduce_rows(a: &DMatrix<f64>, b: &[f64]) -> (DMatrix<f64>, Vec<f64>, f64) {
    let (m, n) = a.shape();
    let b = DVector::from_column_slice(b);
    if m == 0 {
        return (DMatrix::zeros(0, n), Vec::new(), 0.0);
    }
    if n == 0 {
        return (DMatrix::zeros(0, 0), Vec::new(), b.amax());
    }
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sigma_max = svd.singular_values.max();
    let threshold = 1e-11 * sigma_max;
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&j| sigma_max > 0.0 && svd.singular_values[j] > threshold)
        .collect();
    let ur = DMatrix::from_fn(m, keep.len(), |i, j| u[(i, keep[j])]);
    let rows = ur.transpose() * a;
    let rhs = ur.transpose() * &b;
    let inconsistency = (&b - &ur * &rhs).amax();
    (rows, rhs.iter().copied().collect(), inconsistency)
}

struct Tableau {
    // rows x (cols + 1); the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    // reduced-cost row: obj[j] < 0 means column j improves the objective.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    artificial_start: usize,
}

impl Tableau {
    fn phase_one(rows: &DMatrix<f64>, rhs: &[f64], n: usize) -> Self {
        let m = rows.nrows();
        let cols = n + m;
        let mut t = vec![vec![0.0; cols + 1]; m];
        for i in 0..m {
            let sign = if rhs[i] < 0.0 { -1.0 } else { 1.0 };
            for j in 0..n {
                t[i][j] = sign * rows[(i, j)];
            }
            t[i][n + i] = 1.0;
            t[i][cols] = sign * rhs[i];
        }
        let mut obj = vec![0.0; cols + 1];
        for row in &t {
            for j in 0..n {
                obj[j] -= row[j];
            }
            obj[cols] -= row[cols];
        }
        Self {
            t,
            obj,
            basis: (n..n + m).collect(),
            cols,
            artificial_start: n,
        }
    }

    fn objective_value(&self) -> f64 {
        self.obj[self.cols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations over columns `< limit` (all columns if `None`).
    /// Returns `false` on unboundedness.
    fn optimize(&mut self, opts: &LpOptions, limit: Option<usize>) -> Result<bool> {
        let limit = limit.unwrap_or(self.cols);
        for _ in 0..opts.max_iterations {
            let Some(col) = (0..limit).find(|&j| self.obj[j] < -opts.optimality_tol) else {
                return Ok(true);
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.t.iter().enumerate() {
                let a = row[col];
                if a > opts.pivot_tol {
                    let ratio = row[self.cols].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15 * br.abs().max(1.0)
                                || (ratio <= br + 1e-15 * br.abs().max(1.0)
                                    && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(false),
            }
        }
        Err(Error::SolverFailure(format!(
            "simplex exceeded {} iterations",
            opts.max_iterations
        )))
    }

    fn drive_out_artificials(&mut self, opts: &LpOptions) {
        let mut i = 0;
        while i < self.t.len() {
            if self.basis[i] >= self.artificial_start {
                let candidate = (0..self.artificial_start)
                    .filter(|&j| self.t[i][j].abs() > opts.pivot_tol)
                    .max_by(|&a, &b| self.t[i][a].abs().total_cmp(&self.t[i][b].abs()));
                match candidate {
                    Some(j) => self.pivot(i, j),
                    None => {
                        self.t.remove(i);
                        self.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    fn set_objective(&mut self, c: &[f64]) {
        self.obj = vec![0.0; self.cols + 1];
        for (j, &cj) in c.iter().enumerate() {
            self.obj[j] = -cj;
        }
        for (i, &b) in self.basis.iter().enumerate() {
            let f = self.obj[b];
            if f != 0.0 {
                for (v, tv) in self.obj.iter_mut().zip(&self.t[i]) {
                    *v -= f * tv;
                }
                self.obj[b] = 0.0;
            }
        }
    }

    fn primal(&self, n: usize) -> Vec<f64> {
        let mut x = vec![0.0; n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = self.t[i][self.cols].max(0.0);
            }
        }
        x
    }
}

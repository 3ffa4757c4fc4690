//! Linear programs in maximisation form with finite column bounds.
//!
//! ```text
//! max  cᵀx   s.t.  a_i x (=|<=|>=) b_i,   lo <= x <= hi
//! ```
//!
//! Text dump grammar (see [`LpProblem::dump`]), one item per line:
//!
//! ```text
//! max: <coef> x<j> [+|- <coef> x<j>]...        objective, zero terms omitted
//! r<i>: <coef> x<j> ... (=|<=|>=) <rhs>         one line per row
//! bounds x<j>: <lo> <hi>                         one line per column
//! ```
//!
//! Numbers use Rust's shortest round-trip `f64` formatting.

mod matrix;
mod simplex;

pub use matrix::CscMatrix;
pub use simplex::{solve_lp, solve_lp_from};

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    Eq,
    Le,
    Ge,
}

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid bounds on column {col}: [{lo}, {hi}]")]
    Bounds { col: usize, lo: f64, hi: f64 },
    #[error("numerical failure after {iterations} iterations: {detail}")]
    NumericalFailure { iterations: usize, detail: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub matrix: CscMatrix,
    pub row_kinds: Vec<RowKind>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(
        objective: Vec<f64>,
        matrix: CscMatrix,
        row_kinds: Vec<RowKind>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Result<Self, LpError> {
        let p = LpProblem {
            objective,
            matrix,
            row_kinds,
            rhs,
            lower,
            upper,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn num_rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let (m, n) = (self.num_rows(), self.num_cols());
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{n} columns but objective/lower/upper have {}/{}/{}",
                self.objective.len(),
                self.lower.len(),
                self.upper.len()
            )));
        }
        if self.row_kinds.len() != m || self.rhs.len() != m {
            return Err(LpError::Dimension(format!(
                "{m} rows but row_kinds/rhs have {}/{}",
                self.row_kinds.len(),
                self.rhs.len()
            )));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(LpError::Bounds { col: j, lo, hi });
            }
        }
        Ok(())
    }

    pub fn push_row(&mut self, coeffs: &[(usize, f64)], kind: RowKind, rhs: f64) {
        self.matrix.push_row(coeffs);
        self.row_kinds.push(kind);
        self.rhs.push(rhs);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of rows and bounds by `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.mul_vec(x);
        let mut worst: f64 = 0.0;
        for i in 0..self.num_rows() {
            let r = ax[i] - self.rhs[i];
            let v = match self.row_kinds[i] {
                RowKind::Eq => r.abs(),
                RowKind::Le => r.max(0.0),
                RowKind::Ge => (-r).max(0.0),
            };
            worst = worst.max(v);
        }
        for j in 0..self.num_cols() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        worst
    }

    pub fn dump(&self) -> String {
        let mut s = String::from("max:");
        for (j, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                push_term(&mut s, *c, j);
            }
        }
        s.push('\n');
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.num_rows()];
        for (r, c, v) in self.matrix.triplets() {
            rows[r].push((c, v));
        }
        for (i, terms) in rows.iter().enumerate() {
            let _ = write!(s, "r{i}:");
            for (c, v) in terms {
                push_term(&mut s, *v, *c);
            }
            let op = match self.row_kinds[i] {
                RowKind::Eq => "=",
                RowKind::Le => "<=",
                RowKind::Ge => ">=",
            };
            let _ = writeln!(s, " {op} {}", self.rhs[i]);
        }
        for j in 0..self.num_cols() {
            let _ = writeln!(s, "bounds x{j}: {} {}", self.lower[j], self.upper[j]);
        }
        s
    }
}

fn push_term(s: &mut String, coef: f64, j: usize) {
    if coef < 0.0 {
        let _ = write!(s, " - {} x{j}", -coef);
    } else {
        let _ = write!(s, " + {coef} x{j}");
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToleranceSet {
    /// Primal feasibility on the scaled problem.
    pub feas_tol: f64,
    /// Pricing threshold for reduced costs on the scaled problem.
    pub opt_tol: f64,
    pub pivot_tol: f64,
    pub gap_tol: f64,
    pub comp_tol: f64,
    /// `None` picks a cap from the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            feas_tol: 1e-9,
            opt_tol: 1e-11,
            pivot_tol: 1e-9,
            gap_tol: 1e-8,
            comp_tol: 1e-8,
            max_iterations: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Final basis of a solve, usable as the starting point of a related problem.
/// Rows added after the basis was taken start with their logical basic.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Basis {
    pub columns: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub dual_rows: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
    /// Present for optimal solves.
    pub basis: Option<Basis>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Dual objective `bᵀy + Σ hi·d⁺ − lo·d⁻` built from the stored duals.
pub fn dual_objective(p: &LpProblem, s: &LpSolution) -> Result<f64, LpError> {
    check_dims(p, s)?;
    let mut obj: f64 = p.rhs.iter().zip(&s.dual_rows).map(|(b, y)| b * y).sum();
    for j in 0..p.num_cols() {
        let d = s.reduced_costs[j];
        if d > 0.0 {
            obj += p.upper[j] * d;
        } else {
            obj += p.lower[j] * d;
        }
    }
    Ok(obj)
}

/// `|cᵀx − dual objective|` for the primal vector and duals stored in `s`.
pub fn duality_gap(p: &LpProblem, s: &LpSolution) -> Result<f64, LpError> {
    let dual = dual_objective(p, s)?;
    Ok((p.objective_value(&s.primal) - dual).abs())
}

/// Largest dual infeasibility: wrong-signed row duals and reduced costs
/// inconsistent with `c − Aᵀy`.
pub fn dual_residual(p: &LpProblem, s: &LpSolution) -> Result<f64, LpError> {
    check_dims(p, s)?;
    let aty = p.matrix.tmul_vec(&s.dual_rows);
    let mut worst: f64 = 0.0;
    for j in 0..p.num_cols() {
        worst = worst.max((p.objective[j] - aty[j] - s.reduced_costs[j]).abs());
    }
    for (i, y) in s.dual_rows.iter().enumerate() {
        let v = match p.row_kinds[i] {
            RowKind::Eq => 0.0,
            RowKind::Le => (-y).max(0.0),
            RowKind::Ge => y.max(0.0),
        };
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Largest complementarity product over columns and inequality rows.
pub fn complementarity(p: &LpProblem, s: &LpSolution) -> Result<f64, LpError> {
    check_dims(p, s)?;
    let mut worst: f64 = 0.0;
    for j in 0..p.num_cols() {
        let d = s.reduced_costs[j];
        let x = s.primal[j];
        let v = if d > 0.0 {
            d * (p.upper[j] - x)
        } else {
            -d * (x - p.lower[j])
        };
        worst = worst.max(v.abs());
    }
    let ax = p.matrix.mul_vec(&s.primal);
    for i in 0..p.num_rows() {
        if p.row_kinds[i] != RowKind::Eq {
            worst = worst.max((s.dual_rows[i] * (p.rhs[i] - ax[i])).abs());
        }
    }
    Ok(worst)
}

fn check_dims(p: &LpProblem, s: &LpSolution) -> Result<(), LpError> {
    if s.primal.len() != p.num_cols()
        || s.reduced_costs.len() != p.num_cols()
        || s.dual_rows.len() != p.num_rows()
    {
        return Err(LpError::Dimension(format!(
            "problem is {}x{}, solution carries {} primal / {} reduced / {} row duals",
            p.num_rows(),
            p.num_cols(),
            s.primal.len(),
            s.reduced_costs.len(),
            s.dual_rows.len()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var(rows: &[(f64, RowKind, f64)], hi: f64) -> LpProblem {
        let trip: Vec<_> = rows.iter().enumerate().map(|(i, r)| (i, 0, r.0)).collect();
        LpProblem::new(
            vec![1.0],
            CscMatrix::from_triplets(rows.len(), 1, &trip),
            rows.iter().map(|r| r.1).collect(),
            rows.iter().map(|r| r.2).collect(),
            vec![0.0],
            vec![hi],
        )
        .unwrap()
    }

    #[test]
    fn row_bound_binds() {
        let p = one_var(&[(1.0, RowKind::Le, 3.0)], 1e6);
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.primal[0] - 3.0).abs() < 1e-12);
        assert!((s.objective_value - 3.0).abs() < 1e-12);
        assert!(duality_gap(&p, &s).unwrap() < 1e-12);
    }

    #[test]
    fn column_bound_binds() {
        let p = one_var(&[], 5.0);
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.objective_value, 5.0);
        assert!(duality_gap(&p, &s).unwrap() < 1e-12);
    }

    #[test]
    fn perturbed_primal_reports_gap() {
        let p = one_var(&[(1.0, RowKind::Le, 3.0)], 1e6);
        let mut s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        s.primal[0] = 2.5;
        assert!(duality_gap(&p, &s).unwrap() > 0.4);
    }

    #[test]
    fn infeasible_rows_detected() {
        let p = one_var(&[(1.0, RowKind::Ge, 4.0), (1.0, RowKind::Le, 3.0)], 10.0);
        let s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn bad_bounds_rejected() {
        let r = LpProblem::new(
            vec![1.0],
            CscMatrix::zeros(0, 1),
            vec![],
            vec![],
            vec![2.0],
            vec![1.0],
        );
        assert!(matches!(r, Err(LpError::Bounds { col: 0, .. })));
        let r = LpProblem::new(
            vec![1.0],
            CscMatrix::zeros(0, 1),
            vec![],
            vec![],
            vec![0.0],
            vec![f64::INFINITY],
        );
        assert!(r.is_err());
    }

    #[test]
    fn gap_rejects_dimension_mismatch() {
        let p = one_var(&[(1.0, RowKind::Le, 3.0)], 1e6);
        let mut s = solve_lp(&p, &ToleranceSet::default()).unwrap();
        s.dual_rows.clear();
        assert!(matches!(duality_gap(&p, &s), Err(LpError::Dimension(_))));
    }

    #[test]
    fn dump_lists_every_part() {
        let p = one_var(&[(2.0, RowKind::Ge, 1.0)], 4.0);
        let text = p.dump();
        assert_eq!(text, "max: + 1 x0\nr0: + 2 x0 >= 1\nbounds x0: 0 4\n");
    }
}

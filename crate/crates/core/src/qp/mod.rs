//! Dense convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ xᵀ H x + gᵀ x
//! subject to  A_eq x = b_eq
//!             lb <= A_in x <= ub
//! ```
//!
//! with `H` symmetric positive semidefinite. Infinite bounds are allowed.
//! Multipliers follow the convention `H x + g + A_eqᵀ y_eq + A_inᵀ y_in = 0`,
//! so `y_in < 0` on active lower bounds and `y_in > 0` on active upper bounds.

mod admm;
mod io;
mod ipm;
mod kkt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use admm::{solve_qp, solve_qp_from, QpMethod, QpSettings};
pub use io::{read_qp, write_qp};
pub use kkt::{kkt_residuals, KktResiduals};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension { what: &'static str, expected: usize, actual: usize },
    #[error("quadratic cost matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("quadratic cost matrix is not positive semidefinite")]
    Indefinite,
    #[error("problem data contains NaN or infinite coefficients")]
    NonFinite,
    #[error("lower bound exceeds upper bound on inequality row {row}")]
    CrossedBounds { row: usize },
    #[error("malformed problem file at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

fn dim(what: &'static str, expected: usize, actual: usize) -> Result<(), QpError> {
    if expected == actual {
        Ok(())
    } else {
        Err(QpError::Dimension { what, expected, actual })
    }
}

impl QpProblem {
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        lb: DVector<f64>,
        ub: DVector<f64>,
    ) -> Result<Self, QpError> {
        let p = Self { h, g, a_eq, b_eq, a_in, lb, ub };
        p.validate()?;
        Ok(p)
    }

    /// Box-constrained problem `lb <= x <= ub`.
    pub fn boxed(h: DMatrix<f64>, g: DVector<f64>, lb: DVector<f64>, ub: DVector<f64>) -> Result<Self, QpError> {
        let n = g.len();
        Self::new(h, g, DMatrix::zeros(0, n), DVector::zeros(0), DMatrix::identity(n, n), lb, ub)
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn n_in(&self) -> usize {
        self.lb.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.g.len();
        dim("H rows", n, self.h.nrows())?;
        dim("H cols", n, self.h.ncols())?;
        dim("A_eq cols", n, self.a_eq.ncols())?;
        dim("b_eq", self.a_eq.nrows(), self.b_eq.len())?;
        dim("A_in cols", n, self.a_in.ncols())?;
        dim("lb", self.a_in.nrows(), self.lb.len())?;
        dim("ub", self.a_in.nrows(), self.ub.len())?;
        let finite = self.h.iter().chain(self.g.iter()).chain(self.a_eq.iter()).chain(self.b_eq.iter());
        if finite.chain(self.a_in.iter()).any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite);
        }
        if self.lb.iter().chain(self.ub.iter()).any(|v| v.is_nan()) {
            return Err(QpError::NonFinite);
        }
        if let Some(row) = (0..self.lb.len()).find(|&i| self.lb[i] > self.ub[i]) {
            return Err(QpError::CrossedBounds { row });
        }
        let scale = self.h.amax().max(1.0);
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(())
    }

    /// Positive-semidefiniteness test: Cholesky of `H + eps I` with a small
    /// relative shift must succeed.
    pub fn check_psd(&self) -> Result<(), QpError> {
        let n = self.n();
        let shift = 1e-10 * self.h.diagonal().amax().max(1.0);
        let shifted = &self.h + DMatrix::<f64>::identity(n, n) * shift;
        match shifted.cholesky() {
            Some(_) => Ok(()),
            None => Err(QpError::Indefinite),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub y_eq: DVector<f64>,
    pub y_in: DVector<f64>,
    pub status: QpStatus,
    pub objective: f64,
    pub iterations: usize,
    /// Whether the returned point came from the active-set refinement.
    pub polished: bool,
    /// For infeasible problems: the inequality rows (`n_eq + i` indexing the
    /// stacked constraints) with the largest certificate weight.
    pub infeasibility_rows: Vec<usize>,
}

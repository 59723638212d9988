//! Plain-text problem dumps.
//!
//! ```text
//! etmg-qp 1
//! dims <n> <m_eq> <m_in>
//! H
//! <n rows of n values>
//! g
//! <n values>
//! A_eq
//! ...
//! ```
//!
//! followed by `b_eq`, `A_in`, `lb`, `ub`. Matrices are row-major, one row per
//! line; vectors sit on a single line. Infinite bounds are written `inf`/`-inf`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{QpError, QpProblem};

const HEADER: &str = "etmg-qp 1";

fn push_row<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

fn push_matrix(out: &mut String, label: &str, m: &DMatrix<f64>) {
    out.push_str(label);
    out.push('\n');
    for r in m.row_iter() {
        push_row(out, r.iter());
    }
}

fn push_vector(out: &mut String, label: &str, v: &DVector<f64>) {
    out.push_str(label);
    out.push('\n');
    push_row(out, v.iter());
}

pub fn write_qp(p: &QpProblem) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let _ = writeln!(out, "dims {} {} {}", p.n(), p.n_eq(), p.n_in());
    push_matrix(&mut out, "H", &p.h);
    push_vector(&mut out, "g", &p.g);
    push_matrix(&mut out, "A_eq", &p.a_eq);
    push_vector(&mut out, "b_eq", &p.b_eq);
    push_matrix(&mut out, "A_in", &p.a_in);
    push_vector(&mut out, "lb", &p.lb);
    push_vector(&mut out, "ub", &p.ub);
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, reason: impl Into<String>) -> QpError {
        QpError::Parse { line: self.line, reason: reason.into() }
    }

    fn next(&mut self) -> Result<&'a str, QpError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l.trim())
            }
            None => {
                self.line += 1;
                Err(self.err("unexpected end of file"))
            }
        }
    }

    fn expect(&mut self, label: &str) -> Result<(), QpError> {
        let l = self.next()?;
        if l == label {
            Ok(())
        } else {
            Err(self.err(format!("expected section `{label}`, found `{l}`")))
        }
    }

    fn values(&mut self, count: usize) -> Result<Vec<f64>, QpError> {
        let l = self.next()?;
        let vals = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| self.err(format!("invalid number `{t}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        if vals.len() != count {
            return Err(self.err(format!("expected {count} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn matrix(&mut self, label: &str, rows: usize, cols: usize) -> Result<DMatrix<f64>, QpError> {
        self.expect(label)?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.values(cols)?);
        }
        Ok(DMatrix::from_row_slice(rows, cols, &data))
    }

    fn vector(&mut self, label: &str, len: usize) -> Result<DVector<f64>, QpError> {
        self.expect(label)?;
        Ok(DVector::from_vec(self.values(len)?))
    }
}

pub fn read_qp(text: &str) -> Result<QpProblem, QpError> {
    let mut lines = Lines { inner: text.lines().enumerate(), line: 0 };
    if lines.next()? != HEADER {
        return Err(lines.err(format!("expected header `{HEADER}`")));
    }
    let dims = lines.next()?;
    let mut parts = dims.split_whitespace();
    if parts.next() != Some("dims") {
        return Err(lines.err("expected `dims n m_eq m_in`"));
    }
    let nums = parts
        .map(|t| t.parse::<usize>().map_err(|_| lines.err(format!("invalid dimension `{t}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let [n, m_eq, m_in] = nums[..] else {
        return Err(lines.err("expected three dimensions"));
    };
    let h = lines.matrix("H", n, n)?;
    let g = lines.vector("g", n)?;
    let a_eq = lines.matrix("A_eq", m_eq, n)?;
    let b_eq = lines.vector("b_eq", m_eq)?;
    let a_in = lines.matrix("A_in", m_in, n)?;
    let lb = lines.vector("lb", m_in)?;
    let ub = lines.vector("ub", m_in)?;
    QpProblem::new(h, g, a_eq, b_eq, a_in, lb, ub)
}

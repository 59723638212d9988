//! Primal-dual interior-point method with Mehrotra predictor-corrector steps
//! and an active-set polish of the final iterate.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::admm::{is_optimal, kkt_solve, residual_scales, solution, QpSettings, KKT_REG};
use super::kkt::residuals_at;
use super::{QpProblem, QpSolution, QpStatus};

const MAX_ITER: usize = 200;
const STEP_FRACTION: f64 = 0.99;
const MIN_STEP: f64 = 1e-12;
const TIGHTENING: f64 = 1e-2;

/// Problem with rows equilibrated and pinned inequality rows moved to the
/// equality block.
struct Scaled {
    h: DMatrix<f64>,
    g: DVector<f64>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    // inequality rows kept, with their original index
    rows: Vec<usize>,
    c: DMatrix<f64>,
    lo: DVector<f64>,
    hi: DVector<f64>,
    has_lo: Vec<bool>,
    has_hi: Vec<bool>,
    // original index of each equality row: Ok(eq row) or Err(inequality row)
    eq_origin: Vec<Result<usize, usize>>,
    row_scale_eq: DVector<f64>,
    row_scale_in: DVector<f64>,
    cost_scale: f64,
}

fn row_scale(m: &DMatrix<f64>, i: usize) -> f64 {
    let a = m.row(i).amax();
    if a > 0.0 {
        1.0 / a
    } else {
        1.0
    }
}

impl Scaled {
    fn new(p: &QpProblem) -> Self {
        let n = p.n();
        let cost_scale = 1.0 / p.h.amax().max(p.g.amax()).max(1.0);
        let mut eq_origin = Vec::new();
        let mut rows = Vec::new();
        for i in 0..p.n_eq() {
            eq_origin.push(Ok(i));
        }
        for i in 0..p.n_in() {
            if p.lb[i] == p.ub[i] {
                eq_origin.push(Err(i));
            } else if p.lb[i].is_finite() || p.ub[i].is_finite() {
                rows.push(i);
            }
        }
        let mut a = DMatrix::zeros(eq_origin.len(), n);
        let mut b = DVector::zeros(eq_origin.len());
        let mut row_scale_eq = DVector::zeros(eq_origin.len());
        for (k, o) in eq_origin.iter().enumerate() {
            let (src, rhs, i) = match *o {
                Ok(i) => (&p.a_eq, p.b_eq[i], i),
                Err(i) => (&p.a_in, p.lb[i], i),
            };
            let r = row_scale(src, i);
            a.row_mut(k).copy_from(&(src.row(i) * r));
            b[k] = rhs * r;
            row_scale_eq[k] = r;
        }
        let mi = rows.len();
        let mut c = DMatrix::zeros(mi, n);
        let (mut lo, mut hi) = (DVector::zeros(mi), DVector::zeros(mi));
        let mut row_scale_in = DVector::zeros(mi);
        for (k, &i) in rows.iter().enumerate() {
            let r = row_scale(&p.a_in, i);
            c.row_mut(k).copy_from(&(p.a_in.row(i) * r));
            lo[k] = p.lb[i] * r;
            hi[k] = p.ub[i] * r;
            row_scale_in[k] = r;
        }
        let has_lo = lo.iter().map(|v| v.is_finite()).collect();
        let has_hi = hi.iter().map(|v| v.is_finite()).collect();
        Self {
            h: &p.h * cost_scale,
            g: &p.g * cost_scale,
            a,
            b,
            rows,
            c,
            lo,
            hi,
            has_lo,
            has_hi,
            eq_origin,
            row_scale_eq,
            row_scale_in,
            cost_scale,
        }
    }

    fn unscale(&self, p: &QpProblem, nu: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let mut y_eq = DVector::zeros(p.n_eq());
        let mut y_in = DVector::zeros(p.n_in());
        for (k, o) in self.eq_origin.iter().enumerate() {
            let v = nu[k] * self.row_scale_eq[k] / self.cost_scale;
            match *o {
                Ok(i) => y_eq[i] = v,
                Err(i) => y_in[i] = v,
            }
        }
        for (k, &i) in self.rows.iter().enumerate() {
            y_in[i] = y[k] * self.row_scale_in[k] / self.cost_scale;
        }
        (y_eq, y_in)
    }
}

/// Factorization of the reduced Newton system `[[K, Aᵀ], [A, 0]]`.
struct Newton<'a> {
    k: &'a DMatrix<f64>,
    a: &'a DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    schur: Option<Cholesky<f64, Dyn>>,
}

impl<'a> Newton<'a> {
    fn new(k: &'a DMatrix<f64>, a: &'a DMatrix<f64>) -> Option<Self> {
        let n = k.nrows();
        let mut delta = 1e-12;
        let chol = loop {
            let mut reg = k.clone();
            for i in 0..n {
                reg[(i, i)] += delta;
            }
            if let Some(c) = reg.cholesky() {
                break c;
            }
            delta *= 100.0;
            if delta > 1e-4 {
                return None;
            }
        };
        let schur = if a.nrows() > 0 {
            let kat = chol.solve(&a.transpose());
            let mut s = a * kat;
            let me = s.nrows();
            let shift = 1e-14 * s.diagonal().amax().max(1.0);
            for i in 0..me {
                s[(i, i)] += shift;
            }
            Some(s.cholesky()?)
        } else {
            None
        };
        Some(Self { k, a, chol, schur })
    }

    fn solve_once(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        match &self.schur {
            Some(s) => {
                let kr = self.chol.solve(r1);
                let dnu = s.solve(&(self.a * kr - r2));
                let dx = self.chol.solve(&(r1 - self.a.tr_mul(&dnu)));
                (dx, dnu)
            }
            None => (self.chol.solve(r1), DVector::zeros(0)),
        }
    }

    /// Solves `K dx + Aᵀ dν = r1`, `A dx = r2` with two refinement steps.
    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (mut dx, mut dnu) = self.solve_once(r1, r2);
        for _ in 0..2 {
            let mut e1 = r1 - self.k * &dx;
            if self.a.nrows() > 0 {
                e1 -= self.a.tr_mul(&dnu);
            }
            let e2 = r2 - self.a * &dx;
            let (cx, cnu) = self.solve_once(&e1, &e2);
            dx += cx;
            dnu += cnu;
        }
        (dx, dnu)
    }
}

struct Iterate {
    x: DVector<f64>,
    nu: DVector<f64>,
    s_lo: DVector<f64>,
    s_hi: DVector<f64>,
    l_lo: DVector<f64>,
    l_hi: DVector<f64>,
}

struct Direction {
    dx: DVector<f64>,
    dnu: DVector<f64>,
    ds_lo: DVector<f64>,
    ds_hi: DVector<f64>,
    dl_lo: DVector<f64>,
    dl_hi: DVector<f64>,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>, mask: &[bool]) -> f64 {
    let mut a = 1.0f64;
    for i in 0..v.len() {
        if mask[i] && dv[i] < 0.0 {
            a = a.min(-v[i] / dv[i]);
        }
    }
    a
}

/// Runs the interior-point iteration. Returns `None` when it fails to reach
/// the tolerance, leaving the caller to fall back to operator splitting.
pub(super) fn solve(p: &QpProblem, settings: &QpSettings, guess: Option<&DVector<f64>>) -> Option<QpSolution> {
    let sp = Scaled::new(p);
    let n = p.n();
    let (me, mi) = (sp.a.nrows(), sp.c.nrows());
    let m_count = sp.has_lo.iter().chain(sp.has_hi.iter()).filter(|&&b| b).count().max(1) as f64;

    let x = guess.cloned().unwrap_or_else(|| DVector::zeros(n));
    let v = &sp.c * &x;
    let mut it = Iterate {
        nu: DVector::zeros(me),
        s_lo: DVector::from_fn(mi, |i, _| if sp.has_lo[i] { (v[i] - sp.lo[i]).max(1.0) } else { 1.0 }),
        s_hi: DVector::from_fn(mi, |i, _| if sp.has_hi[i] { (sp.hi[i] - v[i]).max(1.0) } else { 1.0 }),
        l_lo: DVector::from_fn(mi, |i, _| if sp.has_lo[i] { 1.0 } else { 0.0 }),
        l_hi: DVector::from_fn(mi, |i, _| if sp.has_hi[i] { 1.0 } else { 0.0 }),
        x,
    };

    let ct = sp.c.transpose();
    let mut ctw = ct.clone();
    let mut kmat = DMatrix::zeros(n, n);
    let max_iter = settings.max_iter.min(MAX_ITER);
    let mut polish_tried = false;
    let mut reached = None;
    for k in 1..=max_iter {
        let v = &sp.c * &it.x;
        let y = &it.l_hi - &it.l_lo;
        let mut r_d = &sp.h * &it.x + &sp.g + sp.c.tr_mul(&y);
        if me > 0 {
            r_d += sp.a.tr_mul(&it.nu);
        }
        let r_p = &sp.a * &it.x - &sp.b;
        let mut r_lo = DVector::zeros(mi);
        let mut r_hi = DVector::zeros(mi);
        let mut mu = 0.0;
        for i in 0..mi {
            if sp.has_lo[i] {
                r_lo[i] = v[i] - sp.lo[i] - it.s_lo[i];
                mu += it.s_lo[i] * it.l_lo[i];
            }
            if sp.has_hi[i] {
                r_hi[i] = sp.hi[i] - v[i] - it.s_hi[i];
                mu += it.s_hi[i] * it.l_hi[i];
            }
        }
        mu /= m_count;

        let (y_eq, y_in) = sp.unscale(p, &it.nu, &y);
        let r = residuals_at(p, &it.x, &y_eq, &y_in);
        let sc = residual_scales(p, &it.x, &y_eq, &y_in);
        if is_optimal(&r, &sc, settings.tol) {
            if settings.polish && !polish_tried {
                polish_tried = true;
                if let Some(sol) = polish(p, &sp, &it, settings, k) {
                    return Some(sol);
                }
            }
            // unpolished iterates are pushed further into the tolerance
            if !settings.polish || is_optimal(&r, &sc, TIGHTENING * settings.tol) {
                return Some(solution(p, it.x, y_eq, y_in, QpStatus::Optimal, k, false));
            }
            reached = Some(solution(p, it.x.clone(), y_eq, y_in, QpStatus::Optimal, k, false));
        }

        let w_lo = DVector::from_fn(mi, |i, _| if sp.has_lo[i] { it.l_lo[i] / it.s_lo[i] } else { 0.0 });
        let w_hi = DVector::from_fn(mi, |i, _| if sp.has_hi[i] { it.l_hi[i] / it.s_hi[i] } else { 0.0 });
        ctw.copy_from(&ct);
        for i in 0..mi {
            ctw.column_mut(i).scale_mut(w_lo[i] + w_hi[i]);
        }
        kmat.copy_from(&sp.h);
        kmat.gemm(1.0, &ctw, &sp.c, 1.0);
        let Some(newton) = Newton::new(&kmat, &sp.a) else {
            return reached;
        };

        let direction = |rc_lo: &DVector<f64>, rc_hi: &DVector<f64>| {
            let mut t = DVector::zeros(mi);
            for i in 0..mi {
                if sp.has_lo[i] {
                    t[i] += w_lo[i] * r_lo[i] + rc_lo[i] / it.s_lo[i];
                }
                if sp.has_hi[i] {
                    t[i] -= w_hi[i] * r_hi[i] + rc_hi[i] / it.s_hi[i];
                }
            }
            let r1 = -&r_d - sp.c.tr_mul(&t);
            let (dx, dnu) = newton.solve(&r1, &(-&r_p));
            let dv = &sp.c * &dx;
            let mut d = Direction {
                dx,
                dnu,
                ds_lo: DVector::zeros(mi),
                ds_hi: DVector::zeros(mi),
                dl_lo: DVector::zeros(mi),
                dl_hi: DVector::zeros(mi),
            };
            for i in 0..mi {
                if sp.has_lo[i] {
                    d.ds_lo[i] = dv[i] + r_lo[i];
                    d.dl_lo[i] = -(rc_lo[i] + it.l_lo[i] * d.ds_lo[i]) / it.s_lo[i];
                }
                if sp.has_hi[i] {
                    d.ds_hi[i] = -dv[i] + r_hi[i];
                    d.dl_hi[i] = -(rc_hi[i] + it.l_hi[i] * d.ds_hi[i]) / it.s_hi[i];
                }
            }
            d
        };
        let step_to_boundary = |d: &Direction| {
            max_step(&it.s_lo, &d.ds_lo, &sp.has_lo)
                .min(max_step(&it.s_hi, &d.ds_hi, &sp.has_hi))
                .min(max_step(&it.l_lo, &d.dl_lo, &sp.has_lo))
                .min(max_step(&it.l_hi, &d.dl_hi, &sp.has_hi))
        };

        // predictor
        let aff = direction(&it.s_lo.component_mul(&it.l_lo), &it.s_hi.component_mul(&it.l_hi));
        let a_aff = step_to_boundary(&aff);
        let mut mu_aff = 0.0;
        for i in 0..mi {
            if sp.has_lo[i] {
                mu_aff += (it.s_lo[i] + a_aff * aff.ds_lo[i]) * (it.l_lo[i] + a_aff * aff.dl_lo[i]);
            }
            if sp.has_hi[i] {
                mu_aff += (it.s_hi[i] + a_aff * aff.ds_hi[i]) * (it.l_hi[i] + a_aff * aff.dl_hi[i]);
            }
        }
        mu_aff /= m_count;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector
        let rc_lo = DVector::from_fn(mi, |i, _| {
            if sp.has_lo[i] {
                it.s_lo[i] * it.l_lo[i] + aff.ds_lo[i] * aff.dl_lo[i] - sigma * mu
            } else {
                0.0
            }
        });
        let rc_hi = DVector::from_fn(mi, |i, _| {
            if sp.has_hi[i] {
                it.s_hi[i] * it.l_hi[i] + aff.ds_hi[i] * aff.dl_hi[i] - sigma * mu
            } else {
                0.0
            }
        });
        let d = direction(&rc_lo, &rc_hi);
        let alpha = (STEP_FRACTION * step_to_boundary(&d)).min(1.0);
        if alpha < MIN_STEP || !d.dx.iter().all(|v| v.is_finite()) {
            return reached;
        }
        it.x += &d.dx * alpha;
        it.nu += &d.dnu * alpha;
        it.s_lo += &d.ds_lo * alpha;
        it.s_hi += &d.ds_hi * alpha;
        it.l_lo += &d.dl_lo * alpha;
        it.l_hi += &d.dl_hi * alpha;
    }
    reached
}

/// Solves the equality-constrained problem on the rows the interior-point
/// iterate identifies as active.
fn polish(p: &QpProblem, sp: &Scaled, it: &Iterate, settings: &QpSettings, iterations: usize) -> Option<QpSolution> {
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    let mut a_in_rows = Vec::new();
    for k in 0..sp.a.nrows() {
        rows.push(sp.a.row(k).clone_owned());
        bounds.push(sp.b[k]);
    }
    for k in 0..sp.c.nrows() {
        if sp.has_lo[k] && it.l_lo[k] > it.s_lo[k] {
            rows.push(sp.c.row(k).clone_owned());
            bounds.push(sp.lo[k]);
            a_in_rows.push(k);
        } else if sp.has_hi[k] && it.l_hi[k] > it.s_hi[k] {
            rows.push(sp.c.row(k).clone_owned());
            bounds.push(sp.hi[k]);
            a_in_rows.push(k);
        }
    }
    let c_act = if rows.is_empty() { DMatrix::zeros(0, p.n()) } else { DMatrix::from_rows(&rows) };
    let (x, ys) = kkt_solve(&sp.h, &c_act, &sp.g, &DVector::from_vec(bounds), KKT_REG)?;
    let me = sp.a.nrows();
    let nu = ys.rows(0, me).clone_owned();
    let mut y = DVector::zeros(sp.c.nrows());
    for (j, &k) in a_in_rows.iter().enumerate() {
        y[k] = ys[me + j];
    }
    let (y_eq, y_in) = sp.unscale(p, &nu, &y);
    let r = residuals_at(p, &x, &y_eq, &y_in);
    let sc = residual_scales(p, &x, &y_eq, &y_in);
    is_optimal(&r, &sc, settings.tol).then(|| solution(p, x, y_eq, y_in, QpStatus::Optimal, iterations, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::{kkt_residuals, QpMethod};
    use approx::assert_relative_eq;

    fn settings() -> QpSettings {
        QpSettings { method: QpMethod::InteriorPoint, tol: 1e-8, ..QpSettings::default() }
    }

    #[test]
    fn pinned_rows_act_as_equalities() {
        // min ½|x|² - x0 - x1  with  x0 + x1 = 1 given as a pinned inequality row
        let p = QpProblem::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![-1.0, -1.0]),
            DMatrix::zeros(0, 2),
            DVector::zeros(0),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]),
            DVector::from_vec(vec![1.0, -0.2]),
            DVector::from_vec(vec![1.0, f64::INFINITY]),
        )
        .unwrap();
        let s = solve(&p, &settings(), None).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-8);
        assert_relative_eq!(s.x[1], 0.5, epsilon = 1e-8);
        assert!(kkt_residuals(&p, &s).max() <= 1e-8);
    }

    #[test]
    fn two_sided_rows_pick_the_right_side() {
        let p = QpProblem::boxed(
            DMatrix::identity(3, 3),
            DVector::from_vec(vec![-5.0, 5.0, 0.1]),
            DVector::from_element(3, -1.0),
            DVector::from_element(3, 1.0),
        )
        .unwrap();
        let s = solve(&p, &settings(), None).unwrap();
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(s.x[1], -1.0, epsilon = 1e-9);
        assert_relative_eq!(s.x[2], -0.1, epsilon = 1e-9);
        assert!(s.y_in[0] > 0.0 && s.y_in[1] < 0.0 && s.y_in[2].abs() < 1e-9);
    }

    #[test]
    fn badly_scaled_rows() {
        let p = QpProblem::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_vec(vec![1.0, -3.0]),
            DMatrix::from_row_slice(1, 2, &[1e4, 1e4]),
            DVector::from_vec(vec![1e4]),
            DMatrix::from_row_slice(1, 2, &[1e-3, 0.0]),
            DVector::from_vec(vec![f64::NEG_INFINITY]),
            DVector::from_vec(vec![1e-4]),
        )
        .unwrap();
        let s = solve(&p, &settings(), None).unwrap();
        assert!(kkt_residuals(&p, &s).max() <= 1e-6);
        assert!(s.x[0] <= 0.1 + 1e-9);
    }
}

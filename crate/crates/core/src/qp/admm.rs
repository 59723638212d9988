//! Operator-splitting solver with over-relaxation, Ruiz equilibration,
//! residual-balancing step-size updates and an active-set polish.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kkt::{residuals_at, KktResiduals};
use super::{QpError, QpProblem, QpSolution, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QpMethod {
    /// Operator splitting.
    #[default]
    Admm,
    /// Primal-dual interior point, falling back to operator splitting when it
    /// stalls.
    InteriorPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub method: QpMethod,
    /// Optimality tolerance on the KKT residuals, relative to the magnitude
    /// of the terms involved (absolute below unit magnitude).
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step size.
    pub rho: f64,
    /// Proximal regularization of the x-update.
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    /// Iterations between residual checks.
    pub check_interval: usize,
    pub scaling_iters: usize,
    pub polish: bool,
    /// Tolerance of the primal infeasibility certificate.
    pub infeasibility_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            method: QpMethod::Admm,
            tol: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            check_interval: 10,
            scaling_iters: 10,
            polish: true,
            infeasibility_tol: 1e-6,
        }
    }
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
pub(super) const KKT_REG: f64 = 1e-10;
const POLISH_ROUNDS: usize = 4;

pub fn solve_qp(p: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    solve_qp_from(p, settings, None)
}

/// Like [`solve_qp`], starting the iteration from a primal guess.
pub fn solve_qp_from(
    p: &QpProblem,
    settings: &QpSettings,
    guess: Option<&DVector<f64>>,
) -> Result<QpSolution, QpError> {
    p.validate()?;
    p.check_psd()?;
    if let Some(x0) = guess {
        if x0.len() != p.n() {
            return Err(QpError::Dimension { what: "initial guess", expected: p.n(), actual: x0.len() });
        }
    }
    let has_inequalities = (0..p.n_in()).any(|i| p.lb[i].is_finite() || p.ub[i].is_finite());
    if !has_inequalities {
        return Ok(solve_equality_only(p, settings));
    }
    if settings.method == QpMethod::InteriorPoint {
        if let Some(sol) = super::ipm::solve(p, settings, guess) {
            return Ok(sol);
        }
    }
    Admm::new(p, settings).run(guess)
}

/// Solves `[[H + dI, Cᵀ], [C, -dI]] [x; y] = [-q; b]` and refines against the
/// unregularized system.
pub(super) fn kkt_solve(
    h: &DMatrix<f64>,
    c: &DMatrix<f64>,
    q: &DVector<f64>,
    b: &DVector<f64>,
    delta: f64,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let k = c.nrows();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(h);
    for i in 0..n {
        kkt[(i, i)] += delta;
    }
    kkt.view_mut((n, 0), (k, n)).copy_from(c);
    kkt.view_mut((0, n), (n, k)).copy_from(&c.transpose());
    for i in 0..k {
        kkt[(n + i, n + i)] = -delta;
    }
    let lu = kkt.lu();
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-q));
    rhs.rows_mut(n, k).copy_from(b);
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let x = sol.rows(0, n);
        let y = sol.rows(n, k);
        let mut r = DVector::zeros(n + k);
        r.rows_mut(0, n).copy_from(&(-q - h * x - c.tr_mul(&y)));
        r.rows_mut(n, k).copy_from(&(b - c * x));
        if r.amax() <= 1e-15 * rhs.amax().max(1.0) {
            break;
        }
        sol += lu.solve(&r)?;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).clone_owned(), sol.rows(n, k).clone_owned()))
}

pub(super) struct Scales {
    stat: f64,
    eq: f64,
    ineq: f64,
    comp: f64,
}

pub(super) fn residual_scales(p: &QpProblem, x: &DVector<f64>, y_eq: &DVector<f64>, y_in: &DVector<f64>) -> Scales {
    let hx = (&p.h * x).amax();
    let aty = if p.n_eq() > 0 { p.a_eq.tr_mul(y_eq).amax() } else { 0.0 }.max(if p.n_in() > 0 {
        p.a_in.tr_mul(y_in).amax()
    } else {
        0.0
    });
    let stat = 1f64.max(hx).max(aty).max(p.g.amax());
    let eq = if p.n_eq() > 0 { 1f64.max(p.b_eq.amax()).max((&p.a_eq * x).amax()) } else { 1.0 };
    let ineq = if p.n_in() > 0 { 1f64.max((&p.a_in * x).amax()) } else { 1.0 };
    let comp = if p.n_in() > 0 { 1f64.max(y_in.amax()) } else { 1.0 };
    Scales { stat, eq, ineq, comp }
}

pub(super) fn is_optimal(r: &KktResiduals, s: &Scales, tol: f64) -> bool {
    r.stationarity <= tol * s.stat
        && r.primal_eq <= tol * s.eq
        && r.primal_in <= tol * s.ineq
        && r.complementarity <= tol * s.comp
}

pub(super) fn solution(
    p: &QpProblem,
    x: DVector<f64>,
    y_eq: DVector<f64>,
    y_in: DVector<f64>,
    status: QpStatus,
    iterations: usize,
    polished: bool,
) -> QpSolution {
    let objective = p.objective(&x);
    QpSolution { x, y_eq, y_in, status, objective, iterations, polished, infeasibility_rows: Vec::new() }
}

fn solve_equality_only(p: &QpProblem, settings: &QpSettings) -> QpSolution {
    let n = p.n();
    let attempt =
        kkt_solve(&p.h, &p.a_eq, &p.g, &p.b_eq, 0.0).or_else(|| kkt_solve(&p.h, &p.a_eq, &p.g, &p.b_eq, KKT_REG));
    let (x, y_eq) = attempt.unwrap_or_else(|| (DVector::zeros(n), DVector::zeros(p.n_eq())));
    let y_in = DVector::zeros(p.n_in());
    let r = residuals_at(p, &x, &y_eq, &y_in);
    let s = residual_scales(p, &x, &y_eq, &y_in);
    let status = if is_optimal(&r, &s, settings.tol) {
        QpStatus::Optimal
    } else if r.primal_eq > settings.tol * s.eq {
        QpStatus::Infeasible
    } else {
        QpStatus::MaxIterations
    };
    solution(p, x, y_eq, y_in, status, 0, false)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Equality,
    Free,
    Inequality,
}

/// Merit with the unscaled `(x, y_eq, y_in)` that produced it.
type Snapshot = (f64, DVector<f64>, DVector<f64>, DVector<f64>);

struct Admm<'a> {
    p: &'a QpProblem,
    settings: &'a QpSettings,
    n: usize,
    m: usize,
    // scaled data
    ph: DMatrix<f64>,
    q: DVector<f64>,
    c: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    cost_scale: f64,
    kinds: Vec<RowKind>,
    // C̄ᵀC̄ restricted to each row kind
    gram_eq: DMatrix<f64>,
    gram_in: DMatrix<f64>,
    gram_free: DMatrix<f64>,
}

fn col_amax(m: &DMatrix<f64>, j: usize) -> f64 {
    m.column(j).amax()
}

fn clamp_norm(v: f64) -> f64 {
    if v < SCALE_MIN {
        1.0
    } else {
        v.min(SCALE_MAX)
    }
}

impl<'a> Admm<'a> {
    fn new(p: &'a QpProblem, settings: &'a QpSettings) -> Self {
        let n = p.n();
        let (m_eq, m_in) = (p.n_eq(), p.n_in());
        let m = m_eq + m_in;
        let mut c = DMatrix::zeros(m, n);
        c.view_mut((0, 0), (m_eq, n)).copy_from(&p.a_eq);
        c.view_mut((m_eq, 0), (m_in, n)).copy_from(&p.a_in);
        let mut l = DVector::zeros(m);
        let mut u = DVector::zeros(m);
        l.rows_mut(0, m_eq).copy_from(&p.b_eq);
        u.rows_mut(0, m_eq).copy_from(&p.b_eq);
        l.rows_mut(m_eq, m_in).copy_from(&p.lb);
        u.rows_mut(m_eq, m_in).copy_from(&p.ub);
        let kinds: Vec<RowKind> = (0..m)
            .map(|i| {
                if l[i] == u[i] {
                    RowKind::Equality
                } else if l[i] == f64::NEG_INFINITY && u[i] == f64::INFINITY {
                    RowKind::Free
                } else {
                    RowKind::Inequality
                }
            })
            .collect();

        // Ruiz equilibration of [[P, Cᵀ], [C, 0]]
        let mut ph = p.h.clone();
        let mut q = p.g.clone();
        let mut d = DVector::from_element(n, 1.0);
        let mut e = DVector::from_element(m, 1.0);
        let mut cost_scale = 1.0;
        for _ in 0..settings.scaling_iters {
            let dj = DVector::from_iterator(
                n,
                (0..n)
                    .map(|j| 1.0 / clamp_norm(col_amax(&ph, j).max(if m > 0 { col_amax(&c, j) } else { 0.0 })).sqrt()),
            );
            let ei = DVector::from_iterator(m, (0..m).map(|i| 1.0 / clamp_norm(c.row(i).amax()).sqrt()));
            for j in 0..n {
                ph.column_mut(j).scale_mut(dj[j]);
                c.column_mut(j).scale_mut(dj[j]);
            }
            for i in 0..n {
                ph.row_mut(i).scale_mut(dj[i]);
            }
            for i in 0..m {
                c.row_mut(i).scale_mut(ei[i]);
            }
            q.component_mul_assign(&dj);
            d.component_mul_assign(&dj);
            e.component_mul_assign(&ei);

            let mean_col = if n > 0 { (0..n).map(|j| col_amax(&ph, j)).sum::<f64>() / n as f64 } else { 0.0 };
            let gamma = 1.0 / clamp_norm(mean_col.max(q.amax()));
            ph *= gamma;
            q *= gamma;
            cost_scale *= gamma;
        }
        for i in 0..m {
            l[i] *= e[i];
            u[i] *= e[i];
        }

        let gram = |kind: RowKind| {
            let mut sel = c.clone();
            for i in 0..m {
                if kinds[i] != kind {
                    sel.row_mut(i).fill(0.0);
                }
            }
            sel.transpose() * &sel
        };
        let gram_eq = gram(RowKind::Equality);
        let gram_in = gram(RowKind::Inequality);
        let gram_free = gram(RowKind::Free);

        Self { p, settings, n, m, ph, q, c, l, u, d, e, cost_scale, kinds, gram_eq, gram_in, gram_free }
    }

    fn rho_vector(&self, rho: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.m,
            self.kinds.iter().map(|k| match k {
                RowKind::Equality => RHO_EQ_FACTOR * rho,
                RowKind::Free => RHO_MIN,
                RowKind::Inequality => rho,
            }),
        )
    }

    fn factor(&self, rho: f64) -> Cholesky<f64, Dyn> {
        let mut k = &self.ph + &self.gram_in * rho + &self.gram_eq * (RHO_EQ_FACTOR * rho) + &self.gram_free * RHO_MIN;
        for i in 0..self.n {
            k[(i, i)] += self.settings.sigma;
        }
        // P + sigma I + CᵀRC is positive definite for sigma > 0
        k.cholesky().expect("ADMM system matrix is positive definite")
    }

    fn unscale(&self, x: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let xu = x.component_mul(&self.d);
        let yu = y.component_mul(&self.e) / self.cost_scale;
        let m_eq = self.p.n_eq();
        let y_eq = yu.rows(0, m_eq).clone_owned();
        let y_in = yu.rows(m_eq, self.m - m_eq).clone_owned();
        (xu, y_eq, y_in)
    }

    /// Active-set refinement seeded from the ADMM iterate. Rows enter when the
    /// equality-constrained solution violates them and leave when their
    /// multiplier has the wrong sign.
    fn try_polish(&self, z: &DVector<f64>, y: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let y_tol = 1e-9 * y.amax().max(1.0);
        let mut state: Vec<i8> = (0..self.m)
            .map(|i| match self.kinds[i] {
                RowKind::Inequality if y[i] < -y_tol && z[i] - self.l[i] <= -y[i] => -1,
                RowKind::Inequality if y[i] > y_tol && self.u[i] - z[i] <= y[i] => 1,
                _ => 0,
            })
            .collect();
        for _ in 0..POLISH_ROUNDS {
            let mut active = Vec::new();
            let mut bound = Vec::new();
            for i in 0..self.m {
                match (self.kinds[i], state[i]) {
                    (RowKind::Equality, _) | (_, -1) => {
                        active.push(i);
                        bound.push(self.l[i]);
                    }
                    (_, 1) => {
                        active.push(i);
                        bound.push(self.u[i]);
                    }
                    _ => {}
                }
            }
            let c_act = self.c.select_rows(active.iter());
            let (xs, ys) = kkt_solve(&self.ph, &c_act, &self.q, &DVector::from_vec(bound), KKT_REG)?;
            let cx = &self.c * &xs;
            let p_tol = 1e-3 * self.settings.tol * cx.amax().max(1.0);
            let m_tol = 1e-3 * self.settings.tol * ys.amax().max(1.0);
            let mut changed = false;
            let mut k = 0;
            for i in 0..self.m {
                if self.kinds[i] == RowKind::Equality {
                    k += 1;
                    continue;
                }
                if self.kinds[i] == RowKind::Free {
                    continue;
                }
                match state[i] {
                    0 => {
                        if cx[i] < self.l[i] - p_tol {
                            state[i] = -1;
                            changed = true;
                        } else if cx[i] > self.u[i] + p_tol {
                            state[i] = 1;
                            changed = true;
                        }
                    }
                    s => {
                        if f64::from(s) * ys[k] < -m_tol {
                            state[i] = 0;
                            changed = true;
                        }
                        k += 1;
                    }
                }
            }
            if !changed {
                let mut y_full = DVector::zeros(self.m);
                for (k, &i) in active.iter().enumerate() {
                    y_full[i] = ys[k];
                }
                return Some(self.unscale(&xs, &y_full));
            }
        }
        None
    }

    /// Primal infeasibility certificate from the dual iterate change.
    fn infeasibility_certificate(&self, dy: &DVector<f64>) -> Option<Vec<usize>> {
        let p = self.p;
        let m_eq = p.n_eq();
        // unscaled direction with infinite-bound components projected out
        let mut w = dy.component_mul(&self.e);
        let (mut lo, mut hi) = (DVector::zeros(self.m), DVector::zeros(self.m));
        for i in 0..self.m {
            let (l, u) = if i < m_eq { (p.b_eq[i], p.b_eq[i]) } else { (p.lb[i - m_eq], p.ub[i - m_eq]) };
            if u == f64::INFINITY {
                w[i] = w[i].min(0.0);
            }
            if l == f64::NEG_INFINITY {
                w[i] = w[i].max(0.0);
            }
            lo[i] = l;
            hi[i] = u;
        }
        let norm = w.amax();
        if norm <= 1e-12 {
            return None;
        }
        let tol = self.settings.infeasibility_tol;
        let mut support = 0.0;
        for i in 0..self.m {
            if w[i] > 0.0 {
                support += hi[i] * w[i];
            } else if w[i] < 0.0 {
                support += lo[i] * w[i];
            }
        }
        if support >= -tol * norm {
            return None;
        }
        let mut atw = DVector::zeros(self.n);
        if m_eq > 0 {
            atw += p.a_eq.tr_mul(&w.rows(0, m_eq));
        }
        if p.n_in() > 0 {
            atw += p.a_in.tr_mul(&w.rows(m_eq, p.n_in()));
        }
        if atw.amax() > tol * norm {
            return None;
        }
        let mut rows: Vec<usize> = (0..self.m).filter(|&i| w[i].abs() > 1e-3 * norm).collect();
        rows.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()));
        Some(rows)
    }

    fn run(&self, guess: Option<&DVector<f64>>) -> Result<QpSolution, QpError> {
        let s = self.settings;
        let (n, m) = (self.n, self.m);
        let mut x = match guess {
            Some(g) => g.component_div(&self.d),
            None => DVector::zeros(n),
        };
        let mut z = &self.c * &x;
        for i in 0..m {
            z[i] = z[i].clamp(self.l[i], self.u[i]);
        }
        let mut y = DVector::zeros(m);
        let mut rho = s.rho;
        let mut rho_vec = self.rho_vector(rho);
        let mut chol = self.factor(rho);
        let mut last_active: Option<Vec<i8>> = None;
        let mut best: Option<Snapshot> = None;

        for it in 1..=s.max_iter {
            let y_prev = y.clone();
            let rhs = &x * s.sigma - &self.q + self.c.tr_mul(&(rho_vec.component_mul(&z) - &y));
            let x_tilde = chol.solve(&rhs);
            let z_tilde = &self.c * &x_tilde;
            x = &x_tilde * s.alpha + &x * (1.0 - s.alpha);
            let z_relaxed = &z_tilde * s.alpha + &z * (1.0 - s.alpha);
            let mut z_next = &z_relaxed + y.component_div(&rho_vec);
            for i in 0..m {
                z_next[i] = z_next[i].clamp(self.l[i], self.u[i]);
            }
            y += rho_vec.component_mul(&(&z_relaxed - &z_next));
            z = z_next;

            if it % s.check_interval != 0 && it != s.max_iter {
                continue;
            }

            let (xu, y_eq, y_in) = self.unscale(&x, &y);
            let r = residuals_at(self.p, &xu, &y_eq, &y_in);
            let sc = residual_scales(self.p, &xu, &y_eq, &y_in);
            let merit = (r.stationarity / sc.stat).max(r.primal_eq / sc.eq).max(r.primal_in / sc.ineq);
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, xu.clone(), y_eq.clone(), y_in.clone()));
            }

            if s.polish && merit < 1e-2 {
                let signature: Vec<i8> = (0..m)
                    .map(|i| {
                        if z[i] - self.l[i] < -y[i] {
                            -1
                        } else if self.u[i] - z[i] < y[i] {
                            1
                        } else {
                            0
                        }
                    })
                    .collect();
                if last_active.as_ref() != Some(&signature) {
                    if let Some((px, pye, pyi)) = self.try_polish(&z, &y) {
                        let pr = residuals_at(self.p, &px, &pye, &pyi);
                        let ps = residual_scales(self.p, &px, &pye, &pyi);
                        if is_optimal(&pr, &ps, s.tol) {
                            return Ok(solution(self.p, px, pye, pyi, QpStatus::Optimal, it, true));
                        }
                    }
                    last_active = Some(signature);
                }
            }
            if is_optimal(&r, &sc, s.tol) {
                return Ok(solution(self.p, xu, y_eq, y_in, QpStatus::Optimal, it, false));
            }

            if let Some(rows) = self.infeasibility_certificate(&(&y - &y_prev)) {
                let mut sol = solution(self.p, xu, y_eq, y_in, QpStatus::Infeasible, it, false);
                sol.infeasibility_rows = rows;
                return Ok(sol);
            }

            // residual balancing on the scaled problem
            let cx = &self.c * &x;
            let prim = (&cx - &z).amax() / cx.amax().max(z.amax()).max(1e-12);
            let px = &self.ph * &x;
            let cty = self.c.tr_mul(&y);
            let dual = (&px + &self.q + &cty).amax() / px.amax().max(cty.amax()).max(self.q.amax()).max(1e-12);
            let rho_new = (rho * (prim / dual.max(1e-30)).sqrt()).clamp(RHO_MIN, RHO_MAX);
            if rho_new > 5.0 * rho || rho_new < 0.2 * rho {
                rho = rho_new;
                rho_vec = self.rho_vector(rho);
                chol = self.factor(rho);
            }
        }
        let (_, xu, y_eq, y_in) = best.expect("at least one residual check");
        Ok(solution(self.p, xu, y_eq, y_in, QpStatus::MaxIterations, s.max_iter, false))
    }
}

use nalgebra::DVector;

use super::{QpProblem, QpSolution};

/// Infinity norms of the optimality conditions at a candidate solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity: f64,
    pub primal_eq: f64,
    pub primal_in: f64,
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_eq).max(self.primal_in).max(self.complementarity)
    }
}

pub fn kkt_residuals(p: &QpProblem, s: &QpSolution) -> KktResiduals {
    residuals_at(p, &s.x, &s.y_eq, &s.y_in)
}

pub(crate) fn residuals_at(p: &QpProblem, x: &DVector<f64>, y_eq: &DVector<f64>, y_in: &DVector<f64>) -> KktResiduals {
    let mut grad = &p.h * x + &p.g;
    if p.n_eq() > 0 {
        grad += p.a_eq.tr_mul(y_eq);
    }
    if p.n_in() > 0 {
        grad += p.a_in.tr_mul(y_in);
    }
    let stationarity = grad.amax();
    let primal_eq = if p.n_eq() > 0 { (&p.a_eq * x - &p.b_eq).amax() } else { 0.0 };
    let ax = &p.a_in * x;
    let mut primal_in = 0.0f64;
    let mut complementarity = 0.0f64;
    for i in 0..p.n_in() {
        let (v, lo, hi, y) = (ax[i], p.lb[i], p.ub[i], y_in[i]);
        primal_in = primal_in.max(lo - v).max(v - hi);
        let c = if y > 0.0 {
            if hi.is_finite() {
                y * (hi - v).abs()
            } else {
                y
            }
        } else if y < 0.0 {
            if lo.is_finite() {
                -y * (v - lo).abs()
            } else {
                -y
            }
        } else {
            0.0
        };
        complementarity = complementarity.max(c);
    }
    KktResiduals { stationarity, primal_eq, primal_in, complementarity }
}

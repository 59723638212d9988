//! Model-predictive operation of the microgrid.
//!
//! The horizon problem is condensed: the decision vector is
//! `U = [u(k0); ...; u(k0+N-1)]` and the predicted states
//! `X = [x(k0+1); ...; x(k0+N)]` are affine in `U`,
//! `X = Phi x(k0) + Gamma U + Psi D`. State bounds and the temperature
//! tracking cost act on `x(k0+1) ... x(k0+N)`; line-flow limits, the power
//! balance and control boxes act on every `u(k)` of the horizon.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::coupling::EtmgModel;
use crate::error::ModelError;
use crate::qp::{solve_qp_from, QpError, QpMethod, QpProblem, QpSettings, QpStatus};

pub const DEFAULT_REGULARIZATION: f64 = 1e-9;

/// Tolerance used when checking recorded steps against the constraints
/// (MW, MWh, °C).
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MpcError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("invalid controller configuration: {0}")]
    Config(String),
    #[error("forecast too short: steps {start}..{end} requested, {available} available")]
    ForecastTooShort { start: usize, end: usize, available: usize },
    #[error("horizon problem infeasible at step {step}: {family} cannot be satisfied")]
    Infeasible { step: usize, family: ConstraintFamily },
    #[error("QP solver stopped without convergence at step {step} after {iterations} iterations")]
    SolverFailure { step: usize, iterations: usize },
}

/// Groups of constraint rows in the horizon problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintFamily {
    PowerBalance,
    StorageBounds,
    TemperatureBounds,
    LineFlows,
    ControlBounds,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PowerBalance => "power balance",
            Self::StorageBounds => "storage energy bounds",
            Self::TemperatureBounds => "temperature bounds",
            Self::LineFlows => "line flow limits",
            Self::ControlBounds => "control limits",
        })
    }
}

/// Weights, set-points and limits of the controller. Per-unit vectors follow
/// the control ordering of [`crate::coupling::ModelDims`].
#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    pub horizon: usize,
    /// Thermal state indices of the manipulated temperatures.
    pub tracked_states: Vec<usize>,
    pub desired_temperatures: Vec<f64>,
    pub c_t: Vec<f64>,
    pub c_et: f64,
    pub c_es: Vec<f64>,
    pub c_ehp: Vec<f64>,
    pub c_hp_i: Vec<f64>,
    pub c_hp_ii: Vec<f64>,
    /// Best-efficiency power of each heat pump (MW, nonpositive).
    pub u_hp_desired: Vec<f64>,
    /// Per thermal state, °C. Infinite entries disable the bound.
    pub temperature_lower: Vec<f64>,
    pub temperature_upper: Vec<f64>,
    /// Per storage, MWh; the lower limit is 0.
    pub ess_capacity: Vec<f64>,
    /// Per line, MW.
    pub line_lower: Vec<f64>,
    pub line_upper: Vec<f64>,
    /// Per control, MW.
    pub control_lower: Vec<f64>,
    pub control_upper: Vec<f64>,
    pub regularization: f64,
}

fn config_err(msg: impl Into<String>) -> MpcError {
    MpcError::Config(msg.into())
}

fn check_len(name: &str, expected: usize, actual: usize) -> Result<(), MpcError> {
    if expected == actual {
        Ok(())
    } else {
        Err(config_err(format!("{name}: expected {expected} entries, got {actual}")))
    }
}

fn check_ordered(name: &str, lo: &[f64], hi: &[f64]) -> Result<(), MpcError> {
    for (i, (l, h)) in lo.iter().zip(hi).enumerate() {
        if l.is_nan() || h.is_nan() || l > h {
            return Err(config_err(format!("{name}[{i}]: lower bound {l} exceeds upper bound {h}")));
        }
    }
    Ok(())
}

impl MpcConfig {
    pub fn validate(&self, model: &EtmgModel) -> Result<(), MpcError> {
        let d = &model.dims;
        if self.horizon == 0 {
            return Err(config_err("horizon must be at least 1"));
        }
        check_len("desired_temperatures", self.tracked_states.len(), self.desired_temperatures.len())?;
        check_len("c_t", self.tracked_states.len(), self.c_t.len())?;
        if let Some(s) = self.tracked_states.iter().find(|&&s| s >= d.n_thermal()) {
            return Err(config_err(format!("tracked state {s} is not a thermal state")));
        }
        check_len("c_es", d.n_ess, self.c_es.len())?;
        check_len("c_ehp", d.n_hp, self.c_ehp.len())?;
        check_len("c_hp_i", d.n_hp, self.c_hp_i.len())?;
        check_len("c_hp_ii", d.n_hp, self.c_hp_ii.len())?;
        check_len("u_hp_desired", d.n_hp, self.u_hp_desired.len())?;
        check_len("temperature_lower", d.n_thermal(), self.temperature_lower.len())?;
        check_len("temperature_upper", d.n_thermal(), self.temperature_upper.len())?;
        check_len("ess_capacity", d.n_ess, self.ess_capacity.len())?;
        check_len("line_lower", d.n_lines, self.line_lower.len())?;
        check_len("line_upper", d.n_lines, self.line_upper.len())?;
        check_len("control_lower", d.n_control(), self.control_lower.len())?;
        check_len("control_upper", d.n_control(), self.control_upper.len())?;
        let weights = self.c_t.iter().chain([&self.c_et]).chain(&self.c_es).chain(&self.c_ehp);
        if weights.chain(&self.c_hp_i).chain(&self.c_hp_ii).any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(config_err("weights must be finite and nonnegative"));
        }
        if !(self.regularization >= 0.0) {
            return Err(config_err("regularization must be nonnegative"));
        }
        if self.ess_capacity.iter().any(|c| !(*c >= 0.0)) {
            return Err(config_err("storage capacity must be nonnegative"));
        }
        check_ordered("temperature", &self.temperature_lower, &self.temperature_upper)?;
        check_ordered("line", &self.line_lower, &self.line_upper)?;
        check_ordered("control", &self.control_lower, &self.control_upper)?;
        Ok(())
    }
}

/// Temperature tracking cost `||x_mp - x_d||^2_c`.
pub fn stage_cost_temperature(x_mp: &[f64], x_d: &[f64], c: &[f64]) -> f64 {
    x_mp.iter().zip(x_d).zip(c).map(|((x, d), w)| w * (x - d).powi(2)).sum()
}

/// Economic cost `||u||^2_c`.
pub fn stage_cost_economic(u: &[f64], c: &[f64]) -> f64 {
    u.iter().zip(c).map(|(u, w)| w * u * u).sum()
}

/// Heat-pump efficiency cost
/// `||u - u_d||^2_{c_I} + ||u - u_prev||^2_{c_II}`.
pub fn stage_cost_heatpump(u: &[f64], u_prev: &[f64], u_d: &[f64], c_i: &[f64], c_ii: &[f64]) -> f64 {
    (0..u.len()).map(|k| c_i[k] * (u[k] - u_d[k]).powi(2) + c_ii[k] * (u[k] - u_prev[k]).powi(2)).sum()
}

/// Per-step breakdown of the objective.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageCosts {
    pub l_t: f64,
    pub l_ect: f64,
    pub l_ecs: f64,
    pub l_echp: f64,
    pub l_hp: f64,
}

impl StageCosts {
    pub fn total(&self) -> f64 {
        self.l_t + self.l_ect + self.l_ecs + self.l_echp + self.l_hp
    }

    /// Costs of applying `u` from the previous heat-pump power `u_hp_prev`
    /// and reaching `x_next`.
    pub fn evaluate(
        model: &EtmgModel,
        cfg: &MpcConfig,
        x_next: &DVector<f64>,
        u: &DVector<f64>,
        u_hp_prev: &[f64],
    ) -> Self {
        let d = &model.dims;
        let mp: Vec<f64> = cfg.tracked_states.iter().map(|&s| x_next[d.n_ess + s]).collect();
        let u_s = &u.as_slice()[d.storage_control()..d.storage_control() + d.n_ess];
        let u_hp = &u.as_slice()[d.hp_control()..d.hp_control() + d.n_hp];
        Self {
            l_t: stage_cost_temperature(&mp, &cfg.desired_temperatures, &cfg.c_t),
            l_ect: cfg.c_et * u[0] * u[0],
            l_ecs: stage_cost_economic(u_s, &cfg.c_es),
            l_echp: stage_cost_economic(u_hp, &cfg.c_ehp),
            l_hp: stage_cost_heatpump(u_hp, u_hp_prev, &cfg.u_hp_desired, &cfg.c_hp_i, &cfg.c_hp_ii),
        }
    }
}

/// Perfect forecast of the disturbances, one entry per step.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// `[-Q_d; T_amb]` per step (MW_th, °C).
    pub d_t: Vec<DVector<f64>>,
    /// `[d_r; d_d]` as nodal injections per step (MW).
    pub d_e: Vec<DVector<f64>>,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.d_t.len().min(self.d_e.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check_window(&self, start: usize, n: usize) -> Result<(), MpcError> {
        if start + n > self.len() {
            return Err(MpcError::ForecastTooShort { start, end: start + n, available: self.len() });
        }
        Ok(())
    }
}

/// Dense affine predictor over `N` steps.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub horizon: usize,
    pub phi: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub psi: DMatrix<f64>,
}

impl Predictor {
    pub fn new(model: &EtmgModel, horizon: usize) -> Self {
        let (nx, nu, nd) = (model.a.nrows(), model.b.ncols(), model.e.ncols());
        let mut powers = Vec::with_capacity(horizon + 1);
        powers.push(DMatrix::<f64>::identity(nx, nx));
        for j in 0..horizon {
            let next = &model.a * &powers[j];
            powers.push(next);
        }
        let ab: Vec<DMatrix<f64>> = powers.iter().map(|p| p * &model.b).collect();
        let ae: Vec<DMatrix<f64>> = powers.iter().map(|p| p * &model.e).collect();
        let mut phi = DMatrix::zeros(horizon * nx, nx);
        let mut gamma = DMatrix::zeros(horizon * nx, horizon * nu);
        let mut psi = DMatrix::zeros(horizon * nx, horizon * nd);
        for j in 0..horizon {
            phi.view_mut((j * nx, 0), (nx, nx)).copy_from(&powers[j + 1]);
            for i in 0..=j {
                gamma.view_mut((j * nx, i * nu), (nx, nu)).copy_from(&ab[j - i]);
                psi.view_mut((j * nx, i * nd), (nx, nd)).copy_from(&ae[j - i]);
            }
        }
        Self { horizon, phi, gamma, psi }
    }

    /// Stacked states `x(1..=N)` for stacked controls and thermal disturbances.
    pub fn predict(&self, x0: &DVector<f64>, u: &DVector<f64>, d_t: &DVector<f64>) -> DVector<f64> {
        &self.phi * x0 + &self.gamma * u + &self.psi * d_t
    }
}

/// A condensed horizon problem; `J(U) = ½ UᵀHU + gᵀU + constant` up to the
/// regularization term.
#[derive(Debug, Clone)]
pub struct HorizonQp {
    pub problem: QpProblem,
    pub constant: f64,
}

struct StateRow {
    stacked: usize,
    lower: f64,
    upper: f64,
}

/// Horizon-problem assembly with the data that does not change between
/// steps (prediction matrices, Hessian, constraint matrices) cached.
pub struct MpcBuilder<'a> {
    model: &'a EtmgModel,
    cfg: &'a MpcConfig,
    predictor: Predictor,
    h: DMatrix<f64>,
    tracking: DMatrix<f64>,
    tracking_weights: DVector<f64>,
    a_eq: DMatrix<f64>,
    a_in: DMatrix<f64>,
    state_rows: Vec<StateRow>,
    line_dist: DMatrix<f64>,
    balance_dist: DMatrix<f64>,
    control_rows: Vec<(usize, f64, f64)>,
    families: Vec<(usize, ConstraintFamily)>,
}

impl<'a> MpcBuilder<'a> {
    pub fn new(model: &'a EtmgModel, cfg: &'a MpcConfig) -> Result<Self, MpcError> {
        cfg.validate(model)?;
        let d = model.dims;
        let n = cfg.horizon;
        let (nx, nu, ne) = (d.n_state(), d.n_control(), d.n_ess);
        let nv = n * nu;
        let predictor = Predictor::new(model, n);

        // tracking rows of Gamma
        let nt = cfg.tracked_states.len();
        let mut tracking = DMatrix::zeros(n * nt, nv);
        let mut tracking_weights = DVector::zeros(n * nt);
        for j in 0..n {
            for (t, &s) in cfg.tracked_states.iter().enumerate() {
                tracking.row_mut(j * nt + t).copy_from(&predictor.gamma.row(j * nx + ne + s));
                tracking_weights[j * nt + t] = cfg.c_t[t];
            }
        }
        let mut weighted = tracking.clone();
        for r in 0..weighted.nrows() {
            weighted.row_mut(r).scale_mut(2.0 * tracking_weights[r]);
        }
        let mut h = tracking.transpose() * &weighted;
        for j in 0..n {
            let base = j * nu;
            h[(base, base)] += 2.0 * cfg.c_et;
            for s in 0..ne {
                let i = base + d.storage_control() + s;
                h[(i, i)] += 2.0 * cfg.c_es[s];
            }
            for p in 0..d.n_hp {
                let i = base + d.hp_control() + p;
                h[(i, i)] += 2.0 * (cfg.c_ehp[p] + cfg.c_hp_i[p] + cfg.c_hp_ii[p]);
                if j > 0 {
                    let prev = i - nu;
                    h[(prev, prev)] += 2.0 * cfg.c_hp_ii[p];
                    h[(i, prev)] -= 2.0 * cfg.c_hp_ii[p];
                    h[(prev, i)] -= 2.0 * cfg.c_hp_ii[p];
                }
            }
        }
        for i in 0..nv {
            h[(i, i)] += cfg.regularization;
        }

        // power balance: 1ᵀ (S_u u + S_d d_e) = 0
        let ones_u = DMatrix::from_element(1, d.n_nodes, 1.0) * &model.injection_u;
        let balance_dist = DMatrix::from_element(1, d.n_nodes, 1.0) * &model.injection_d;
        let mut a_eq = DMatrix::zeros(n, nv);
        for j in 0..n {
            a_eq.view_mut((j, j * nu), (1, nu)).copy_from(&ones_u);
        }

        let mut state_rows = Vec::new();
        let mut families = vec![(n, ConstraintFamily::PowerBalance)];
        let bounds_of = |j: usize| {
            let mut rows = Vec::new();
            for s in 0..ne {
                rows.push((j * nx + s, 0.0, cfg.ess_capacity[s], ConstraintFamily::StorageBounds));
            }
            for s in 0..d.n_thermal() {
                let (lo, hi) = (cfg.temperature_lower[s], cfg.temperature_upper[s]);
                if lo.is_finite() || hi.is_finite() {
                    rows.push((j * nx + ne + s, lo, hi, ConstraintFamily::TemperatureBounds));
                }
            }
            rows
        };
        let mut row_count = n;
        for j in 0..n {
            for (stacked, lower, upper, fam) in bounds_of(j) {
                state_rows.push(StateRow { stacked, lower, upper });
                row_count += 1;
                families.push((row_count, fam));
            }
        }
        let line_u = model.ptdf.matrix() * &model.injection_u;
        let line_dist = model.ptdf.matrix() * &model.injection_d;
        let n_line_rows = n * d.n_lines;
        row_count += n_line_rows;
        families.push((row_count, ConstraintFamily::LineFlows));
        let mut control_rows = Vec::new();
        for j in 0..n {
            for c in 0..nu {
                let (lo, hi) = (cfg.control_lower[c], cfg.control_upper[c]);
                if lo.is_finite() || hi.is_finite() {
                    control_rows.push((j * nu + c, lo, hi));
                }
            }
        }
        row_count += control_rows.len();
        families.push((row_count, ConstraintFamily::ControlBounds));

        let n_in = state_rows.len() + n_line_rows + control_rows.len();
        let mut a_in = DMatrix::zeros(n_in, nv);
        for (r, row) in state_rows.iter().enumerate() {
            a_in.row_mut(r).copy_from(&predictor.gamma.row(row.stacked));
        }
        let mut r = state_rows.len();
        for j in 0..n {
            a_in.view_mut((r, j * nu), (d.n_lines, nu)).copy_from(&line_u);
            r += d.n_lines;
        }
        for &(var, _, _) in &control_rows {
            a_in[(r, var)] = 1.0;
            r += 1;
        }

        Ok(Self {
            model,
            cfg,
            predictor,
            h,
            tracking,
            tracking_weights,
            a_eq,
            a_in,
            state_rows,
            line_dist,
            balance_dist,
            control_rows,
            families,
        })
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }

    pub fn decision_count(&self) -> usize {
        self.h.nrows()
    }

    /// Constraint family of a row in the stacked `[A_eq; A_in]` indexing.
    pub fn family_of_row(&self, row: usize) -> ConstraintFamily {
        self.families.iter().find(|(end, _)| row < *end).map_or(ConstraintFamily::ControlBounds, |f| f.1)
    }

    fn stacked_disturbance(&self, fc: &Forecast, k0: usize) -> DVector<f64> {
        let n = self.cfg.horizon;
        let nd = self.model.dims.n_thermal_dist();
        let mut d = DVector::zeros(n * nd);
        for j in 0..n {
            d.rows_mut(j * nd, nd).copy_from(&fc.d_t[k0 + j]);
        }
        d
    }

    fn free_response(&self, x0: &DVector<f64>, fc: &Forecast, k0: usize) -> DVector<f64> {
        &self.predictor.phi * x0 + &self.predictor.psi * self.stacked_disturbance(fc, k0)
    }

    /// Condensed problem for initial state `x0`, previous heat-pump power and
    /// the forecast window starting at `k0`.
    pub fn build(&self, x0: &DVector<f64>, u_hp_prev: &[f64], fc: &Forecast, k0: usize) -> Result<HorizonQp, MpcError> {
        let d = self.model.dims;
        let cfg = self.cfg;
        let n = cfg.horizon;
        let nu = d.n_control();
        if x0.len() != d.n_state() {
            return Err(ModelError::Dimension {
                block: "initial state".into(),
                expected: d.n_state(),
                actual: x0.len(),
            }
            .into());
        }
        if u_hp_prev.len() != d.n_hp {
            return Err(ModelError::Dimension {
                block: "previous heat-pump power".into(),
                expected: d.n_hp,
                actual: u_hp_prev.len(),
            }
            .into());
        }
        fc.check_window(k0, n)?;
        let free = self.free_response(x0, fc, k0);

        let nt = cfg.tracked_states.len();
        let mut dev = DVector::zeros(n * nt);
        for j in 0..n {
            for (t, &s) in cfg.tracked_states.iter().enumerate() {
                dev[j * nt + t] = free[j * d.n_state() + d.n_ess + s] - cfg.desired_temperatures[t];
            }
        }
        let wdev = dev.component_mul(&self.tracking_weights);
        let mut g = self.tracking.tr_mul(&(&wdev * 2.0));
        let mut constant = dev.dot(&wdev);
        for j in 0..n {
            for p in 0..d.n_hp {
                let i = j * nu + d.hp_control() + p;
                let ud = cfg.u_hp_desired[p];
                g[i] -= 2.0 * cfg.c_hp_i[p] * ud;
                constant += cfg.c_hp_i[p] * ud * ud;
                if j == 0 {
                    g[i] -= 2.0 * cfg.c_hp_ii[p] * u_hp_prev[p];
                    constant += cfg.c_hp_ii[p] * u_hp_prev[p].powi(2);
                }
            }
        }

        let mut b_eq = DVector::zeros(n);
        for j in 0..n {
            b_eq[j] = -(&self.balance_dist * &fc.d_e[k0 + j])[0];
        }
        let n_in = self.a_in.nrows();
        let mut lb = DVector::zeros(n_in);
        let mut ub = DVector::zeros(n_in);
        for (r, row) in self.state_rows.iter().enumerate() {
            lb[r] = row.lower - free[row.stacked];
            ub[r] = row.upper - free[row.stacked];
        }
        let mut r = self.state_rows.len();
        for j in 0..n {
            let base = &self.line_dist * &fc.d_e[k0 + j];
            for l in 0..d.n_lines {
                lb[r] = cfg.line_lower[l] - base[l];
                ub[r] = cfg.line_upper[l] - base[l];
                r += 1;
            }
        }
        for &(_, lo, hi) in &self.control_rows {
            lb[r] = lo;
            ub[r] = hi;
            r += 1;
        }
        let problem = QpProblem::new(self.h.clone(), g, self.a_eq.clone(), b_eq, self.a_in.clone(), lb, ub)?;
        Ok(HorizonQp { problem, constant })
    }

    /// Exact horizon objective of a control sequence, evaluated stage by
    /// stage on the predicted trajectory.
    pub fn horizon_cost(
        &self,
        x0: &DVector<f64>,
        u_hp_prev: &[f64],
        fc: &Forecast,
        k0: usize,
        u: &DVector<f64>,
    ) -> f64 {
        let d = self.model.dims;
        let (nx, nu) = (d.n_state(), d.n_control());
        let states = self.predictor.predict(x0, u, &self.stacked_disturbance(fc, k0));
        let mut prev = u_hp_prev.to_vec();
        let mut total = 0.0;
        for j in 0..self.cfg.horizon {
            let uj = u.rows(j * nu, nu).clone_owned();
            let xj = states.rows(j * nx, nx).clone_owned();
            total += StageCosts::evaluate(self.model, self.cfg, &xj, &uj, &prev).total();
            prev = uj.as_slice()[d.hp_control()..d.hp_control() + d.n_hp].to_vec();
        }
        total
    }
}

/// Condensed horizon problem without caching.
pub fn build_qp(
    model: &EtmgModel,
    cfg: &MpcConfig,
    x0: &DVector<f64>,
    u_hp_prev: &[f64],
    fc: &Forecast,
    k0: usize,
) -> Result<HorizonQp, MpcError> {
    MpcBuilder::new(model, cfg)?.build(x0, u_hp_prev, fc, k0)
}

/// One applied step of the closed loop: control `u(k)` and the state
/// `x(k+1)` it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub k: usize,
    pub control: DVector<f64>,
    pub state: DVector<f64>,
    pub injections: DVector<f64>,
    pub line_flows: DVector<f64>,
    pub costs: StageCosts,
    pub iterations: usize,
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub initial_state: DVector<f64>,
    pub steps: Vec<TraceStep>,
}

/// Largest violation of each constraint family over a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ViolationReport {
    pub power_balance: f64,
    pub storage: f64,
    pub temperature: f64,
    pub lines: f64,
    pub controls: f64,
}

impl ViolationReport {
    pub fn max(&self) -> f64 {
        self.power_balance.max(self.storage).max(self.temperature).max(self.lines).max(self.controls)
    }
}

fn excess(v: f64, lo: f64, hi: f64) -> f64 {
    (lo - v).max(v - hi).max(0.0)
}

impl SimulationTrace {
    pub fn total_cost(&self) -> f64 {
        self.steps.iter().map(|s| s.costs.total()).sum()
    }

    pub fn violations(&self, model: &EtmgModel, cfg: &MpcConfig) -> ViolationReport {
        let d = model.dims;
        let mut rep = ViolationReport::default();
        for st in &self.steps {
            rep.power_balance = rep.power_balance.max(st.injections.sum().abs());
            for s in 0..d.n_ess {
                rep.storage = rep.storage.max(excess(st.state[s], 0.0, cfg.ess_capacity[s]));
            }
            for s in 0..d.n_thermal() {
                let v = st.state[d.n_ess + s];
                rep.temperature = rep.temperature.max(excess(v, cfg.temperature_lower[s], cfg.temperature_upper[s]));
            }
            for l in 0..d.n_lines {
                rep.lines = rep.lines.max(excess(st.line_flows[l], cfg.line_lower[l], cfg.line_upper[l]));
            }
            for c in 0..d.n_control() {
                rep.controls = rep.controls.max(excess(st.control[c], cfg.control_lower[c], cfg.control_upper[c]));
            }
        }
        rep
    }
}

/// Settings used by the closed loop unless overridden.
pub fn default_solver_settings() -> QpSettings {
    QpSettings { method: QpMethod::InteriorPoint, tol: 1e-8, ..QpSettings::default() }
}

/// Closed-loop simulation over `k_sim` steps with perfect forecasts; only the
/// first control of each horizon solution is applied.
pub fn receding_horizon_run(
    model: &EtmgModel,
    cfg: &MpcConfig,
    profiles: &Forecast,
    k_sim: usize,
    x_init: &DVector<f64>,
    u_hp_init: Option<&[f64]>,
) -> Result<SimulationTrace, MpcError> {
    receding_horizon_run_with(model, cfg, profiles, k_sim, x_init, u_hp_init, &default_solver_settings())
}

pub fn receding_horizon_run_with(
    model: &EtmgModel,
    cfg: &MpcConfig,
    profiles: &Forecast,
    k_sim: usize,
    x_init: &DVector<f64>,
    u_hp_init: Option<&[f64]>,
    settings: &QpSettings,
) -> Result<SimulationTrace, MpcError> {
    let builder = MpcBuilder::new(model, cfg)?;
    let d = model.dims;
    let nu = d.n_control();
    profiles.check_window(0, k_sim + cfg.horizon)?;
    let mut u_prev = u_hp_init.map_or_else(|| cfg.u_hp_desired.clone(), <[f64]>::to_vec);
    let mut x = x_init.clone();
    let mut guess: Option<DVector<f64>> = None;
    let mut steps = Vec::with_capacity(k_sim);
    for k in 0..k_sim {
        let qp = builder.build(&x, &u_prev, profiles, k)?;
        let sol = solve_qp_from(&qp.problem, settings, guess.as_ref())?;
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => {
                let family = sol
                    .infeasibility_rows
                    .first()
                    .map_or(ConstraintFamily::ControlBounds, |&r| builder.family_of_row(r));
                return Err(MpcError::Infeasible { step: k, family });
            }
            QpStatus::MaxIterations => return Err(MpcError::SolverFailure { step: k, iterations: sol.iterations }),
        }
        let u = sol.x.rows(0, nu).clone_owned();
        let plant = model.step(&x, &u, &profiles.d_t[k], &profiles.d_e[k])?;
        let costs = StageCosts::evaluate(model, cfg, &plant.state, &u, &u_prev);
        u_prev = u.as_slice()[d.hp_control()..d.hp_control() + d.n_hp].to_vec();
        let mut shifted = sol.x.clone();
        let n = cfg.horizon;
        if n > 1 {
            shifted.rows_mut(0, (n - 1) * nu).copy_from(&sol.x.rows(nu, (n - 1) * nu));
        }
        guess = Some(shifted);
        x = plant.state.clone();
        steps.push(TraceStep {
            k,
            control: u,
            state: plant.state,
            injections: plant.injections,
            line_flows: plant.line_flows,
            costs,
            iterations: sol.iterations,
            polished: sol.polished,
        });
    }
    Ok(SimulationTrace { initial_state: x_init.clone(), steps })
}

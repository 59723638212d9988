//! Heat-pump coupling and the combined discrete-time microgrid model.
//!
//! State `x = [x_e; T_e; T_s]` (MWh, °C), control `u = [u_t; u_s; u_hp]` (MW),
//! thermal disturbance `d_t = [Q_d; T_amb]` (MW_th, negative for extraction;
//! °C) and electrical disturbance `d_e = [d_r; d_d]` (MW, as nodal
//! injections, so loads are negative).
//!
//! Heat-pump power is drawn from the grid, so `u_hp <= 0`; the heat delivered
//! to the water is `-alpha * u_hp >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::discretize::zoh_discretize;
use crate::electrical::{assemble_ptdf, check_balance, ElectricalNetwork, PtdfMap, UnitRole};
use crate::error::{check_dim, invalid, ModelError, Result};
use crate::thermal::ContinuousThermalModel;

/// W per MW.
pub const WATTS_PER_MW: f64 = 1e6;

/// Absolute power-balance tolerance (MW) accepted by [`EtmgModel::step`].
pub const PLANT_BALANCE_TOL: f64 = 1e-6;

/// Heat pumps binding electrical nodes to thermal edges.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatPumpBank {
    pumps: Vec<HeatPump>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatPump {
    /// Coefficient of performance.
    pub cop: f64,
    pub thermal_edge: usize,
    pub electrical_node: usize,
}

impl HeatPumpBank {
    pub fn new(mut pumps: Vec<HeatPump>) -> Result<Self> {
        for (k, p) in pumps.iter().enumerate() {
            if !(p.cop > 0.0) || !p.cop.is_finite() {
                return Err(invalid(&format!("heat_pumps[{k}].cop"), "must be positive"));
            }
        }
        pumps.sort_by_key(|p| p.electrical_node);
        for w in pumps.windows(2) {
            if w[0].electrical_node == w[1].electrical_node {
                return Err(invalid("heat_pumps", format!("node {} bound twice", w[0].electrical_node)));
            }
            if w[0].thermal_edge == w[1].thermal_edge {
                return Err(invalid("heat_pumps", format!("edge {} bound twice", w[0].thermal_edge)));
            }
        }
        Ok(Self { pumps })
    }

    /// Pumps in electrical node order, which is also the control order.
    pub fn pumps(&self) -> &[HeatPump] {
        &self.pumps
    }

    pub fn cop(&self) -> Vec<f64> {
        self.pumps.iter().map(|p| p.cop).collect()
    }

    pub fn thermal_edges(&self) -> Vec<usize> {
        self.pumps.iter().map(|p| p.thermal_edge).collect()
    }

    pub fn len(&self) -> usize {
        self.pumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pumps.is_empty()
    }
}

/// Heat flow produced by heat pumps drawing `u_hp` (MW, nonpositive):
/// `u_t = -diag(alpha) u_hp`.
pub fn heat_pump_map(u_hp: &DVector<f64>, cop: &[f64]) -> Result<DVector<f64>> {
    check_dim("heat-pump power", cop.len(), u_hp.len())?;
    Ok(DVector::from_iterator(u_hp.len(), u_hp.iter().zip(cop).map(|(u, a)| -a * u)))
}

/// Sizes of the combined model blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub n_ess: usize,
    pub n_edges: usize,
    pub n_storage: usize,
    pub n_hp: usize,
    pub n_demand: usize,
    pub n_res: usize,
    pub n_loads: usize,
    pub n_nodes: usize,
    pub n_lines: usize,
}

impl ModelDims {
    pub fn n_thermal(&self) -> usize {
        self.n_edges + self.n_storage
    }

    pub fn n_state(&self) -> usize {
        self.n_ess + self.n_thermal()
    }

    pub fn n_control(&self) -> usize {
        1 + self.n_ess + self.n_hp
    }

    pub fn n_thermal_dist(&self) -> usize {
        self.n_demand + 1
    }

    pub fn n_elec_dist(&self) -> usize {
        self.n_res + self.n_loads
    }

    /// Index of `u_s[0]` in the control vector.
    pub fn storage_control(&self) -> usize {
        1
    }

    /// Index of `u_hp[0]` in the control vector.
    pub fn hp_control(&self) -> usize {
        1 + self.n_ess
    }
}

/// Discrete-time microgrid model.
#[derive(Debug, Clone, PartialEq)]
pub struct EtmgModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub ptdf: PtdfMap,
    pub dims: ModelDims,
    /// Sample time in s.
    pub dt_seconds: f64,
    /// Nodal injections from controls: `p = S_u u + S_d d_e`.
    pub injection_u: DMatrix<f64>,
    pub injection_d: DMatrix<f64>,
    /// `rho c V` per thermal state in J/K.
    pub thermal_inertia: DVector<f64>,
    pub storage_nodes: Vec<usize>,
    pub demand_edges: Vec<usize>,
    pub cop: Vec<f64>,
}

/// Result of one plant step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantStep {
    pub state: DVector<f64>,
    pub injections: DVector<f64>,
    pub line_flows: DVector<f64>,
}

impl EtmgModel {
    pub fn dt_hours(&self) -> f64 {
        self.dt_seconds / 3600.0
    }

    /// Thermal blocks `(A_t, B_t, E_t)` in model units (MW for heat).
    pub fn thermal_blocks(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let d = &self.dims;
        let (ne, nt) = (d.n_ess, d.n_thermal());
        let a = self.a.view((ne, ne), (nt, nt)).clone_owned();
        let b = self.b.view((ne, d.hp_control()), (nt, d.n_hp)).clone_owned();
        let e = self.e.view((ne, 0), (nt, d.n_thermal_dist())).clone_owned();
        (a, b, e)
    }

    pub fn nodal_injections(&self, u: &DVector<f64>, d_e: &DVector<f64>) -> DVector<f64> {
        &self.injection_u * u + &self.injection_d * d_e
    }

    /// Advances the plant one sample.
    pub fn step(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        d_t: &DVector<f64>,
        d_e: &DVector<f64>,
    ) -> Result<PlantStep> {
        let d = &self.dims;
        check_dim("state", d.n_state(), x.len())?;
        check_dim("control", d.n_control(), u.len())?;
        check_dim("thermal disturbance", d.n_thermal_dist(), d_t.len())?;
        check_dim("electrical disturbance", d.n_elec_dist(), d_e.len())?;
        let injections = self.nodal_injections(u, d_e);
        let residual = check_balance(&injections);
        if residual.abs() > PLANT_BALANCE_TOL {
            return Err(ModelError::Imbalance { residual });
        }
        let line_flows = self.ptdf.matrix() * &injections;
        let state = &self.a * x + &self.b * u + &self.e * d_t;
        Ok(PlantStep { state, injections, line_flows })
    }

    /// Thermal steady state for constant heat-pump power and disturbance:
    /// solves `(I - A_t) x = B_t u_hp + E_t d_t`.
    pub fn steady_thermal_state(&self, u_hp: &DVector<f64>, d_t: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("heat-pump power", self.dims.n_hp, u_hp.len())?;
        check_dim("thermal disturbance", self.dims.n_thermal_dist(), d_t.len())?;
        let (a, b, e) = self.thermal_blocks();
        let n = a.nrows();
        let lhs = DMatrix::identity(n, n) - a;
        let rhs = b * u_hp + e * d_t;
        lhs.lu().solve(&rhs).ok_or_else(|| ModelError::Singular { context: "I - A_t".into() })
    }

    /// Uniform heat-pump power (MW, same on every pump) whose thermal steady
    /// state puts `state_index` at `target` °C, together with that state.
    pub fn steady_state_for_target(
        &self,
        d_t: &DVector<f64>,
        state_index: usize,
        target: f64,
    ) -> Result<(f64, DVector<f64>)> {
        let n_hp = self.dims.n_hp;
        if n_hp == 0 {
            return Err(invalid("heat_pumps", "a heat pump is required to reach a target temperature"));
        }
        if state_index >= self.dims.n_thermal() {
            return Err(invalid("state_index", "not a thermal state"));
        }
        let base = self.steady_thermal_state(&DVector::zeros(n_hp), d_t)?;
        let unit = self.steady_thermal_state(&DVector::from_element(n_hp, 1.0), d_t)? - &base;
        let gain = unit[state_index];
        if gain == 0.0 {
            return Err(ModelError::Singular { context: "heat-pump gain on target state".into() });
        }
        let power = (target - base[state_index]) / gain;
        Ok((power, base + unit * power))
    }
}

/// Assembles the combined discrete-time model with sample time `dt_seconds`.
pub fn assemble_etmg(
    thermal: &ContinuousThermalModel,
    electrical: &ElectricalNetwork,
    heat_pumps: &HeatPumpBank,
    dt_seconds: f64,
) -> Result<EtmgModel> {
    if !(dt_seconds > 0.0) {
        return Err(invalid("dt", "sample time must be positive"));
    }
    let hp_nodes = electrical.nodes_with(UnitRole::HeatPump);
    check_dim("heat pumps vs heat-pump nodes", hp_nodes.len(), heat_pumps.len())?;
    check_dim("heat pumps vs heat-pump edges", thermal.hp_edges.len(), heat_pumps.len())?;
    for (pump, node) in heat_pumps.pumps().iter().zip(&hp_nodes) {
        if pump.electrical_node != *node {
            return Err(invalid(
                "heat_pumps",
                format!("electrical node {} is not a heat-pump node", pump.electrical_node),
            ));
        }
    }
    let hp_columns: Vec<usize> = heat_pumps
        .pumps()
        .iter()
        .map(|p| {
            thermal.hp_edges.iter().position(|&e| e == p.thermal_edge).ok_or_else(|| ModelError::EdgeRole {
                edge: p.thermal_edge,
                reason: "heat pump bound to an edge that is not a heat-pump exchanger".into(),
            })
        })
        .collect::<Result<_>>()?;

    let dims = ModelDims {
        n_ess: electrical.count(UnitRole::Storage),
        n_edges: thermal.edge_count(),
        n_storage: thermal.storage_nodes.len(),
        n_hp: heat_pumps.len(),
        n_demand: thermal.demand_edges.len(),
        n_res: electrical.count(UnitRole::Renewable),
        n_loads: electrical.count(UnitRole::Load),
        n_nodes: electrical.node_count(),
        n_lines: electrical.line_count(),
    };
    let disc = zoh_discretize(&thermal.a, &thermal.b, &thermal.e, dt_seconds)?;
    let (ne, nt, nx, nu) = (dims.n_ess, dims.n_thermal(), dims.n_state(), dims.n_control());

    let mut a = DMatrix::zeros(nx, nx);
    a.view_mut((0, 0), (ne, ne)).fill_with_identity();
    a.view_mut((ne, ne), (nt, nt)).copy_from(&disc.a);

    let dt_hours = dt_seconds / 3600.0;
    let mut b = DMatrix::zeros(nx, nu);
    for s in 0..ne {
        b[(s, dims.storage_control() + s)] = dt_hours;
    }
    for (k, pump) in heat_pumps.pumps().iter().enumerate() {
        let col = disc.b.column(hp_columns[k]) * (-pump.cop * WATTS_PER_MW);
        b.view_mut((ne, dims.hp_control() + k), (nt, 1)).copy_from(&col);
    }

    let mut e = DMatrix::zeros(nx, dims.n_thermal_dist());
    let mut e_t = disc.e;
    for c in 0..dims.n_demand {
        e_t.column_mut(c).scale_mut(WATTS_PER_MW);
    }
    e.view_mut((ne, 0), (nt, dims.n_thermal_dist())).copy_from(&e_t);

    let mut injection_u = DMatrix::zeros(dims.n_nodes, nu);
    injection_u[(0, 0)] = 1.0;
    for (s, node) in electrical.nodes_with(UnitRole::Storage).into_iter().enumerate() {
        injection_u[(node, dims.storage_control() + s)] = -1.0;
    }
    for (k, node) in hp_nodes.into_iter().enumerate() {
        injection_u[(node, dims.hp_control() + k)] = 1.0;
    }
    let mut injection_d = DMatrix::zeros(dims.n_nodes, dims.n_elec_dist());
    let dist_nodes =
        electrical.nodes_with(UnitRole::Renewable).into_iter().chain(electrical.nodes_with(UnitRole::Load));
    for (c, node) in dist_nodes.enumerate() {
        injection_d[(node, c)] = 1.0;
    }

    Ok(EtmgModel {
        a,
        b,
        e,
        ptdf: assemble_ptdf(electrical)?,
        dims,
        dt_seconds,
        injection_u,
        injection_d,
        thermal_inertia: thermal.inertia.clone(),
        storage_nodes: thermal.storage_nodes.clone(),
        demand_edges: thermal.demand_edges.clone(),
        cop: heat_pumps.cop(),
    })
}

//! District-heating layer: hydraulic validation, heat losses and the
//! continuous-time temperature model.
//!
//! The state vector is `[T_e; T_s]`: one average temperature per edge (in edge
//! order) followed by one temperature per storage node (in ascending node
//! order). Crossing nodes have no volume and are eliminated algebraically by
//! perfect mixing.
//!
//! Sign convention for heat flows: heat-pump injections enter positively.
//! Consumer demand is supplied as a nonnegative extraction and enters the
//! disturbance vector negated, so the disturbance matrix keeps a `+` sign.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, ModelError, Result};
use crate::graph::{build_incidence, DirectedGraph};

/// Absolute tolerance (m^3/s) for nodal mass balance.
pub const MASS_BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    SimplePipe,
    HeatPumpExchanger,
    ConsumerExchanger,
}

/// Parameters of the steady momentum balance of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HydraulicParams {
    /// Edge length in m.
    pub length: f64,
    /// Friction coefficient `K_f`.
    pub friction: f64,
    /// Pressure delivered by a pump on this edge in Pa (zero without pump).
    pub pump_pressure: f64,
}

impl Default for HydraulicParams {
    fn default() -> Self {
        Self { length: 1.0, friction: 0.0, pump_pressure: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalEdge {
    pub kind: EdgeKind,
    /// Water volume in m^3.
    pub volume: f64,
    /// Volumetric flow in m^3/s along the stored orientation.
    pub flow: f64,
    /// Heat loss coefficient in W/K.
    pub loss_coefficient: f64,
    pub hydraulic: HydraulicParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    Storage { volume: f64 },
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fluid {
    /// kg/m^3
    pub density: f64,
    /// J/(kg K)
    pub specific_heat: f64,
}

impl Fluid {
    /// Volumetric heat capacity `rho * c` in J/(m^3 K).
    pub fn heat_capacity(&self) -> f64 {
        self.density * self.specific_heat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalNetwork {
    graph: DirectedGraph,
    edges: Vec<ThermalEdge>,
    nodes: Vec<NodeKind>,
    fluid: Fluid,
    ambient: f64,
}

impl ThermalNetwork {
    pub fn new(
        graph: DirectedGraph,
        edges: Vec<ThermalEdge>,
        nodes: Vec<NodeKind>,
        fluid: Fluid,
        ambient: f64,
    ) -> Result<Self> {
        crate::error::check_dim("thermal edges", graph.edge_count(), edges.len())?;
        crate::error::check_dim("thermal nodes", graph.node_count(), nodes.len())?;
        if !(fluid.density > 0.0 && fluid.specific_heat > 0.0) {
            return Err(invalid("fluid", "density and specific heat must be positive"));
        }
        if !ambient.is_finite() {
            return Err(invalid("ambient", "must be finite"));
        }
        for (i, e) in edges.iter().enumerate() {
            if !(e.volume > 0.0) {
                return Err(invalid(&format!("edges[{i}].volume"), "must be positive"));
            }
            if !(e.loss_coefficient >= 0.0) {
                return Err(invalid(&format!("edges[{i}].loss_coefficient"), "must be nonnegative"));
            }
            if !e.flow.is_finite() {
                return Err(invalid(&format!("edges[{i}].flow"), "must be finite"));
            }
            let h = &e.hydraulic;
            if !(h.length > 0.0 && h.friction >= 0.0 && h.pump_pressure >= 0.0) {
                return Err(invalid(
                    &format!("edges[{i}].hydraulic"),
                    "length must be positive, friction and pump pressure nonnegative",
                ));
            }
        }
        for (l, n) in nodes.iter().enumerate() {
            if let NodeKind::Storage { volume } = n {
                if !(*volume > 0.0) {
                    return Err(invalid(&format!("nodes[{l}].volume"), "storage volume must be positive"));
                }
            }
        }
        Ok(Self { graph, edges, nodes, fluid, ambient })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn edges(&self) -> &[ThermalEdge] {
        &self.edges
    }

    pub fn nodes(&self) -> &[NodeKind] {
        &self.nodes
    }

    pub fn fluid(&self) -> Fluid {
        self.fluid
    }

    pub fn ambient(&self) -> f64 {
        self.ambient
    }

    /// Storage node ids in state order.
    pub fn storage_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&l| matches!(self.nodes[l], NodeKind::Storage { .. })).collect()
    }

    pub fn state_dim(&self) -> usize {
        self.edges.len() + self.storage_nodes().len()
    }

    /// Water volume for each state: edge volumes followed by storage volumes.
    pub fn state_volumes(&self) -> DVector<f64> {
        let mut v: Vec<f64> = self.edges.iter().map(|e| e.volume).collect();
        v.extend(self.nodes.iter().filter_map(|n| match n {
            NodeKind::Storage { volume } => Some(*volume),
            NodeKind::Crossing => None,
        }));
        DVector::from_vec(v)
    }
}

/// Result of [`validate_hydraulics`].
#[derive(Debug, Clone, PartialEq)]
pub struct HydraulicReport {
    /// Inflow minus outflow per node in m^3/s.
    pub node_residuals: Vec<f64>,
    /// Pressure difference over each edge in Pa.
    pub pressure_drops: Vec<f64>,
}

impl HydraulicReport {
    pub fn max_residual(&self) -> f64 {
        self.node_residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Checks flow orientation and nodal mass balance, and evaluates the steady
/// pressure drop of every edge.
pub fn validate_hydraulics(net: &ThermalNetwork) -> Result<HydraulicReport> {
    let rho = net.fluid.density;
    let mut pressure_drops = Vec::with_capacity(net.edges.len());
    for (i, e) in net.edges.iter().enumerate() {
        if !(e.flow > 0.0) {
            return Err(ModelError::FlowNotAligned { edge: i, flow: e.flow });
        }
        pressure_drops.push(pressure_drop(e, rho));
    }
    let node_residuals = node_residuals(net);
    for (node, &residual) in node_residuals.iter().enumerate() {
        if residual.abs() > MASS_BALANCE_TOL {
            return Err(ModelError::MassImbalance { node, residual });
        }
    }
    Ok(HydraulicReport { node_residuals, pressure_drops })
}

/// Inflow minus outflow at every node, m^3/s.
pub fn node_residuals(net: &ThermalNetwork) -> Vec<f64> {
    let mut residuals = vec![0.0; net.graph.node_count()];
    for (i, &(s, t)) in net.graph.edges().iter().enumerate() {
        residuals[s] -= net.edges[i].flow;
        residuals[t] += net.edges[i].flow;
    }
    residuals
}

/// `dp = L * (-K_f rho |q| q + dp_pump)`.
pub fn pressure_drop(edge: &ThermalEdge, density: f64) -> f64 {
    let h = &edge.hydraulic;
    h.length * (-h.friction * density * edge.flow.abs() * edge.flow + h.pump_pressure)
}

/// Heat lost to the surroundings in W.
pub fn edge_heat_loss(edge_temperature: f64, ambient: f64, loss_coefficient: f64) -> f64 {
    loss_coefficient * (edge_temperature - ambient)
}

/// Nominal operating point used to derive uniform edge parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignPoint {
    /// Nominal heat flow in W.
    pub nominal_heat: f64,
    /// Nominal supply temperature in °C.
    pub supply_temperature: f64,
    /// Supply/return spread in K.
    pub temperature_spread: f64,
    /// Fraction of the nominal heat lost per pipe at supply temperature.
    pub loss_fraction: f64,
    pub ambient: f64,
    pub pipe_length: f64,
    pub pipe_diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCalibration {
    /// m^3/s
    pub flow: f64,
    /// W/K
    pub loss_coefficient: f64,
    /// m^3
    pub volume: f64,
}

pub fn calibrate_case_study(design: &DesignPoint, fluid: &Fluid) -> Result<EdgeCalibration> {
    let d = design;
    let positive = [
        ("nominal_heat", d.nominal_heat),
        ("temperature_spread", d.temperature_spread),
        ("loss_fraction", d.loss_fraction),
        ("pipe_length", d.pipe_length),
        ("pipe_diameter", d.pipe_diameter),
    ];
    for (name, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, "must be positive"));
        }
    }
    let lift = d.supply_temperature - d.ambient;
    if !(lift > 0.0) {
        return Err(invalid("supply_temperature", "must exceed the ambient temperature"));
    }
    let radius = 0.5 * d.pipe_diameter;
    Ok(EdgeCalibration {
        flow: d.nominal_heat / (fluid.heat_capacity() * d.temperature_spread),
        loss_coefficient: d.loss_fraction * d.nominal_heat / lift,
        volume: std::f64::consts::PI * radius * radius * d.pipe_length,
    })
}

/// Continuous-time thermal model `dx/dt = A x + B u + E d`.
///
/// `u` holds heat-pump heat flows in W (ordered as `hp_edges`), `d` holds
/// consumer heat flows in W (ordered as `demand_edges`, negative for
/// extraction) followed by the ambient temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousThermalModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub hp_edges: Vec<usize>,
    pub demand_edges: Vec<usize>,
    pub storage_nodes: Vec<usize>,
    /// Thermal inertia `rho c V` per state, J/K.
    pub inertia: DVector<f64>,
}

impl ContinuousThermalModel {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn edge_count(&self) -> usize {
        self.state_dim() - self.storage_nodes.len()
    }
}

fn check_roles(net: &ThermalNetwork, ids: &[usize], kind: EdgeKind, label: &str) -> Result<()> {
    let m = net.edges.len();
    for (k, &i) in ids.iter().enumerate() {
        if i >= m {
            return Err(ModelError::EdgeOutOfRange { edge: i, edge_count: m });
        }
        if ids[..k].contains(&i) {
            return Err(ModelError::EdgeRole { edge: i, reason: format!("listed twice as {label}") });
        }
        if net.edges[i].kind != kind {
            return Err(ModelError::EdgeRole {
                edge: i,
                reason: format!("{label} must be a {kind:?}, found {:?}", net.edges[i].kind),
            });
        }
    }
    Ok(())
}

/// The mixing matrix over edges: diagonal `-q_i - kappa_i/(rho c)`, and
/// `q_i q_j / sum(outflow of l)` where edge `j` enters crossing `l` and edge
/// `i` leaves it.
pub fn edge_coupling_matrix(net: &ThermalNetwork) -> Result<DMatrix<f64>> {
    let g = &net.graph;
    let m = net.edges.len();
    let rc = net.fluid.heat_capacity();
    let mut a = DMatrix::zeros(m, m);
    for (i, e) in net.edges.iter().enumerate() {
        a[(i, i)] = -e.flow - e.loss_coefficient / rc;
    }
    for (l, kind) in net.nodes.iter().enumerate() {
        if *kind != NodeKind::Crossing {
            continue;
        }
        let (incoming, outgoing) = g.in_out_edge_sets(l)?;
        if incoming.is_empty() {
            return Err(ModelError::DanglingCrossing { node: l, side: "incoming" });
        }
        if outgoing.is_empty() {
            return Err(ModelError::DanglingCrossing { node: l, side: "outgoing" });
        }
        let total_out: f64 = outgoing.iter().map(|&i| net.edges[i].flow).sum();
        if total_out == 0.0 {
            return Err(ModelError::ZeroOutflow { node: l });
        }
        for &i in &outgoing {
            for &j in &incoming {
                a[(i, j)] += net.edges[i].flow * net.edges[j].flow / total_out;
            }
        }
    }
    Ok(a)
}

pub fn assemble_continuous_thermal(
    net: &ThermalNetwork,
    hp_edges: &[usize],
    demand_edges: &[usize],
) -> Result<ContinuousThermalModel> {
    validate_hydraulics(net)?;
    check_roles(net, hp_edges, EdgeKind::HeatPumpExchanger, "heat-pump edge")?;
    check_roles(net, demand_edges, EdgeKind::ConsumerExchanger, "consumer edge")?;
    if let Some(&i) = hp_edges.iter().find(|i| demand_edges.contains(i)) {
        return Err(ModelError::EdgeRole { edge: i, reason: "both heat pump and consumer".into() });
    }
    let g = &net.graph;
    for (j, &(s, t)) in g.edges().iter().enumerate() {
        if net.nodes[s] == NodeKind::Crossing && net.nodes[t] == NodeKind::Crossing {
            return Err(ModelError::CascadedCrossing { edge: j, from: s, to: t });
        }
    }

    let m = net.edges.len();
    let storage = net.storage_nodes();
    let ns = storage.len();
    let n = m + ns;
    let rc = net.fluid.heat_capacity();

    let incidence = build_incidence(g)?;
    let (f_plus, f_minus) = incidence.split();
    let fp_s = f_plus.select_rows(storage.iter());
    let fm_s = f_minus.select_rows(storage.iter());
    let q = DVector::from_iterator(m, net.edges.iter().map(|e| e.flow.abs()));
    let q_diag = DMatrix::from_diagonal(&q);

    let mut core = DMatrix::zeros(n, n);
    core.view_mut((0, 0), (m, m)).copy_from(&edge_coupling_matrix(net)?);
    core.view_mut((0, m), (m, ns)).copy_from(&(&q_diag * fm_s.transpose()));
    core.view_mut((m, 0), (ns, m)).copy_from(&(&fp_s * &q_diag));
    let storage_inflow = &fp_s * &q;
    for k in 0..ns {
        core[(m + k, m + k)] = -storage_inflow[k];
    }

    let inertia = net.state_volumes() * rc;
    // rho c J^-1 reduces to a row scaling by 1/V
    let mut a = core;
    for r in 0..n {
        let s = rc / inertia[r];
        a.row_mut(r).scale_mut(s);
    }

    let mut b = DMatrix::zeros(n, hp_edges.len());
    for (c, &i) in hp_edges.iter().enumerate() {
        b[(i, c)] = 1.0 / inertia[i];
    }
    let nd = demand_edges.len();
    let mut e = DMatrix::zeros(n, nd + 1);
    for (c, &i) in demand_edges.iter().enumerate() {
        e[(i, c)] = 1.0 / inertia[i];
    }
    for (i, edge) in net.edges.iter().enumerate() {
        e[(i, nd)] = edge.loss_coefficient / inertia[i];
    }

    Ok(ContinuousThermalModel {
        a,
        b,
        e,
        hp_edges: hp_edges.to_vec(),
        demand_edges: demand_edges.to_vec(),
        storage_nodes: storage,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const WATER: Fluid = Fluid { density: 987.0, specific_heat: 4182.0 };

    fn edge(kind: EdgeKind, flow: f64, kappa: f64, volume: f64) -> ThermalEdge {
        ThermalEdge { kind, volume, flow, loss_coefficient: kappa, hydraulic: HydraulicParams::default() }
    }

    fn ring(flow: f64, kappa: f64, volume: f64) -> ThermalNetwork {
        let g = DirectedGraph::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let kinds =
            [EdgeKind::SimplePipe, EdgeKind::ConsumerExchanger, EdgeKind::SimplePipe, EdgeKind::HeatPumpExchanger];
        let edges = kinds.iter().map(|&k| edge(k, flow, kappa, volume)).collect();
        let nodes = vec![
            NodeKind::Storage { volume: 100.0 },
            NodeKind::Crossing,
            NodeKind::Storage { volume: 100.0 },
            NodeKind::Crossing,
        ];
        ThermalNetwork::new(g, edges, nodes, WATER, 10.0).unwrap()
    }

    fn case_design() -> DesignPoint {
        DesignPoint {
            nominal_heat: 3.0e6,
            supply_temperature: 90.0,
            temperature_spread: 30.0,
            loss_fraction: 0.05,
            ambient: 10.0,
            pipe_length: 5000.0,
            pipe_diameter: 0.1,
        }
    }

    #[test]
    fn calibration_values() {
        let c = calibrate_case_study(&case_design(), &WATER).unwrap();
        assert_relative_eq!(c.flow, 3.0e6 / (987.0 * 4182.0 * 30.0), max_relative = 1e-15);
        assert_relative_eq!(c.flow, 0.024227, max_relative = 2e-5);
        assert_relative_eq!(c.loss_coefficient, 1875.0, max_relative = 1e-15);
        assert_relative_eq!(c.volume, 39.270, max_relative = 1e-4);
    }

    #[test]
    fn calibration_rejects_degenerate_inputs() {
        let mut d = case_design();
        d.temperature_spread = 0.0;
        assert!(calibrate_case_study(&d, &WATER).is_err());
        let mut d = case_design();
        d.supply_temperature = d.ambient;
        assert!(calibrate_case_study(&d, &WATER).is_err());
    }

    #[test]
    fn heat_loss_cases() {
        assert_eq!(edge_heat_loss(42.0, 42.0, 1875.0), 0.0);
        assert_relative_eq!(edge_heat_loss(90.0, 10.0, 1875.0), 150_000.0);
        assert_relative_eq!(edge_heat_loss(90.0, 10.0, 1875.0) / 3.0e6, 0.05);
        assert_eq!(edge_heat_loss(90.0, -5.0, 0.0), 0.0);
    }

    #[test]
    fn ring_hydraulics_balanced() {
        let report = validate_hydraulics(&ring(0.024227, 0.0, 39.27)).unwrap();
        assert!(report.node_residuals.iter().all(|&r| r == 0.0));
        assert!(report.pressure_drops.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn pressure_drop_formula() {
        let mut e = edge(EdgeKind::SimplePipe, 0.02, 0.0, 1.0);
        e.hydraulic = HydraulicParams { length: 100.0, friction: 2.0, pump_pressure: 5.0 };
        assert_relative_eq!(pressure_drop(&e, 1000.0), 100.0 * (-2.0 * 1000.0 * 0.02 * 0.02 + 5.0));
    }

    #[test]
    fn star_imbalance_names_node() {
        // star node 0: inflows 0.02 + 0.01, outflow 0.025
        let g = DirectedGraph::new(4, vec![(1, 0), (2, 0), (0, 3), (3, 1), (3, 2)]).unwrap();
        let flows = [0.02, 0.01, 0.025, 0.02, 0.01];
        let edges = flows.iter().map(|&q| edge(EdgeKind::SimplePipe, q, 0.0, 1.0)).collect();
        let nodes = vec![
            NodeKind::Crossing,
            NodeKind::Storage { volume: 1.0 },
            NodeKind::Storage { volume: 1.0 },
            NodeKind::Crossing,
        ];
        let net = ThermalNetwork::new(g, edges, nodes, WATER, 10.0).unwrap();
        match validate_hydraulics(&net) {
            Err(ModelError::MassImbalance { node, residual }) => {
                assert_eq!(node, 0);
                assert_relative_eq!(residual, 0.005, max_relative = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let r = node_residuals(&net);
        assert_eq!(r[1], 0.0);
        assert_relative_eq!(r[3], -0.005, max_relative = 1e-12);
    }

    #[test]
    fn negative_flow_rejected() {
        let net = ring(-0.01, 0.0, 1.0);
        assert!(matches!(validate_hydraulics(&net), Err(ModelError::FlowNotAligned { edge: 0, .. })));
    }

    #[test]
    fn ring_lossless_rows_sum_to_zero() {
        let q = 0.024227;
        let v = 39.27;
        let m = assemble_continuous_thermal(&ring(q, 0.0, v), &[3], &[1]).unwrap();
        assert_eq!(m.state_dim(), 6);
        for r in 0..6 {
            assert!(m.a.row(r).sum().abs() < 1e-18, "row {r}");
        }
        for i in 0..4 {
            assert_relative_eq!(m.a[(i, i)], -q / v, max_relative = 1e-14);
        }
        // e2 (c1 -> s2) is fed by e1 through crossing c1
        assert_relative_eq!(m.a[(1, 0)], q / v, max_relative = 1e-14);
        // e1 leaves storage s1 (state 4)
        assert_relative_eq!(m.a[(0, 4)], q / v, max_relative = 1e-14);
        // storage s1 receives e4
        assert_relative_eq!(m.a[(4, 3)], q / 100.0, max_relative = 1e-14);
        assert_relative_eq!(m.a[(4, 4)], -q / 100.0, max_relative = 1e-14);
    }

    #[test]
    fn ring_case_study_diagonal() {
        let c = calibrate_case_study(&case_design(), &WATER).unwrap();
        let net = ring(c.flow, c.loss_coefficient, c.volume);
        let m = assemble_continuous_thermal(&net, &[3], &[1]).unwrap();
        let expected = -(c.flow + 1875.0 / (987.0 * 4182.0)) / c.volume;
        assert_relative_eq!(m.a[(0, 0)], expected, max_relative = 1e-14);
        assert_relative_eq!(m.a[(0, 0)], -6.286e-4, max_relative = 1e-3);
        // loss rows: row sum equals -kappa/(rho c V) on edges, zero on storages
        for i in 0..4 {
            assert_relative_eq!(m.a.row(i).sum(), -1875.0 / (987.0 * 4182.0 * c.volume), max_relative = 1e-9);
            assert_relative_eq!(m.e[(i, 1)], 1875.0 / (987.0 * 4182.0 * c.volume), max_relative = 1e-14);
        }
        assert!(m.a.row(4).sum().abs() < 1e-18);
        assert_relative_eq!(m.b[(3, 0)], 1.0 / (987.0 * 4182.0 * c.volume), max_relative = 1e-14);
        assert_eq!(m.b.column(0).iter().filter(|v| **v != 0.0).count(), 1);
    }

    #[test]
    fn mixing_weights_two_inflows() {
        // storages 0, 1 feed crossing 2 (q = 1 each), which feeds storage 3 (q = 2);
        // storage 3 returns via two edges to close the loop
        let g = DirectedGraph::new(4, vec![(0, 2), (1, 2), (2, 3), (3, 0), (3, 1)]).unwrap();
        let edges = vec![
            edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0),
            edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0),
            edge(EdgeKind::SimplePipe, 2.0, 0.0, 1.0),
            edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0),
            edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0),
        ];
        let nodes = vec![
            NodeKind::Storage { volume: 1.0 },
            NodeKind::Storage { volume: 1.0 },
            NodeKind::Crossing,
            NodeKind::Storage { volume: 1.0 },
        ];
        let net = ThermalNetwork::new(g, edges, nodes, Fluid { density: 1.0, specific_heat: 1.0 }, 0.0).unwrap();
        let a = edge_coupling_matrix(&net).unwrap();
        assert_eq!(a[(2, 0)], 1.0);
        assert_eq!(a[(2, 1)], 1.0);
        assert_eq!(a[(2, 0)] + a[(2, 1)], net.edges()[2].flow);
    }

    #[test]
    fn cascaded_crossings_rejected() {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        let edges = vec![edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0); 3];
        let nodes = vec![NodeKind::Storage { volume: 1.0 }, NodeKind::Crossing, NodeKind::Crossing];
        let net = ThermalNetwork::new(g, edges, nodes, WATER, 0.0).unwrap();
        assert!(matches!(
            assemble_continuous_thermal(&net, &[], &[]),
            Err(ModelError::CascadedCrossing { edge: 1, .. })
        ));
    }

    #[test]
    fn role_errors() {
        let net = ring(0.02, 0.0, 1.0);
        assert!(matches!(assemble_continuous_thermal(&net, &[1], &[]), Err(ModelError::EdgeRole { .. })));
        assert!(matches!(assemble_continuous_thermal(&net, &[3, 3], &[]), Err(ModelError::EdgeRole { .. })));
        assert!(matches!(assemble_continuous_thermal(&net, &[9], &[]), Err(ModelError::EdgeOutOfRange { .. })));
    }

    #[test]
    fn invalid_construction() {
        let g = DirectedGraph::new(2, vec![(0, 1), (1, 0)]).unwrap();
        let nodes = vec![NodeKind::Storage { volume: 1.0 }, NodeKind::Crossing];
        let bad_volume = vec![edge(EdgeKind::SimplePipe, 1.0, 0.0, 0.0), edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0)];
        assert!(ThermalNetwork::new(g.clone(), bad_volume, nodes.clone(), WATER, 0.0).is_err());
        let bad_kappa = vec![edge(EdgeKind::SimplePipe, 1.0, -1.0, 1.0), edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0)];
        assert!(ThermalNetwork::new(g.clone(), bad_kappa, nodes, WATER, 0.0).is_err());
        let ok = vec![edge(EdgeKind::SimplePipe, 1.0, 0.0, 1.0); 2];
        let empty_storage = vec![NodeKind::Storage { volume: 0.0 }, NodeKind::Crossing];
        assert!(ThermalNetwork::new(g, ok, empty_storage, WATER, 0.0).is_err());
    }
}

//! Reference networks of the minimal electro-thermal microgrid.
//!
//! Thermal ring (node ids): hot storage `0` -> crossing `1` -> cold storage `2`
//! -> crossing `3` -> hot storage. Edges: `0` supply pipe, `1` consumer heat
//! exchanger, `2` return pipe, `3` heat-pump exchanger. Thermal state order is
//! `[T_e1, T_e2, T_e3, T_e4, T_s1, T_s2]`.
//!
//! Electrical nodes: `0` PCC, `1` battery, `2` heat pump, `3` PV, `4` load,
//! joined by six lines.

use crate::coupling::{assemble_etmg, EtmgModel, HeatPump, HeatPumpBank};
use crate::electrical::{ElectricalNetwork, UnitRole};
use crate::error::Result;
use crate::graph::DirectedGraph;
use crate::thermal::{
    assemble_continuous_thermal, calibrate_case_study, DesignPoint, EdgeKind, Fluid, HydraulicParams, NodeKind,
    ThermalEdge, ThermalNetwork,
};

pub const SUPPLY_PIPE: usize = 0;
pub const CONSUMER_EDGE: usize = 1;
pub const RETURN_PIPE: usize = 2;
pub const HEAT_PUMP_EDGE: usize = 3;

/// Thermal state indices carrying heated water (supply pipe, heat-pump
/// outlet, hot storage).
pub const HEATED_STATES: [usize; 3] = [0, 3, 4];
/// Thermal state indices carrying cooled water.
pub const COOLED_STATES: [usize; 3] = [1, 2, 5];

pub const THERMAL_EDGES: [(usize, usize); 4] = [(0, 1), (1, 2), (2, 3), (3, 0)];
pub const ELECTRICAL_LINES: [(usize, usize); 6] = [(0, 4), (1, 2), (1, 3), (1, 4), (3, 2), (3, 4)];

/// Case-study parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseStudy {
    pub fluid: Fluid,
    pub design: DesignPoint,
    /// Storage volume in m^3.
    pub storage_volume: f64,
    pub line_param: f64,
    pub cop: f64,
    /// Sample time in s.
    pub dt_seconds: f64,
}

impl Default for CaseStudy {
    fn default() -> Self {
        Self {
            fluid: Fluid { density: 987.0, specific_heat: 4182.0 },
            design: DesignPoint {
                nominal_heat: 3.0e6,
                supply_temperature: 90.0,
                temperature_spread: 30.0,
                loss_fraction: 0.05,
                ambient: 10.0,
                pipe_length: 5000.0,
                pipe_diameter: 0.1,
            },
            storage_volume: 100.0,
            line_param: 1.0,
            cop: 3.0,
            dt_seconds: 900.0,
        }
    }
}

/// The thermal ring with calibrated edges; `loss_scale` multiplies every loss
/// coefficient (0 gives a lossless ring).
pub fn reference_thermal(cs: &CaseStudy, loss_scale: f64) -> Result<ThermalNetwork> {
    let cal = calibrate_case_study(&cs.design, &cs.fluid)?;
    let graph = DirectedGraph::new(4, THERMAL_EDGES.to_vec())?;
    let kinds = [EdgeKind::SimplePipe, EdgeKind::ConsumerExchanger, EdgeKind::SimplePipe, EdgeKind::HeatPumpExchanger];
    let edges = kinds
        .iter()
        .map(|&kind| ThermalEdge {
            kind,
            volume: cal.volume,
            flow: cal.flow,
            loss_coefficient: cal.loss_coefficient * loss_scale,
            hydraulic: HydraulicParams { length: cs.design.pipe_length, ..Default::default() },
        })
        .collect();
    let nodes = vec![
        NodeKind::Storage { volume: cs.storage_volume },
        NodeKind::Crossing,
        NodeKind::Storage { volume: cs.storage_volume },
        NodeKind::Crossing,
    ];
    ThermalNetwork::new(graph, edges, nodes, cs.fluid, cs.design.ambient)
}

pub fn reference_electrical(cs: &CaseStudy) -> Result<ElectricalNetwork> {
    let graph = DirectedGraph::new(5, ELECTRICAL_LINES.to_vec())?;
    let roles = vec![UnitRole::Pcc, UnitRole::Storage, UnitRole::HeatPump, UnitRole::Renewable, UnitRole::Load];
    ElectricalNetwork::new(graph, vec![cs.line_param; ELECTRICAL_LINES.len()], roles)
}

pub fn reference_heat_pumps(cs: &CaseStudy) -> Result<HeatPumpBank> {
    HeatPumpBank::new(vec![HeatPump { cop: cs.cop, thermal_edge: HEAT_PUMP_EDGE, electrical_node: 2 }])
}

/// The complete minimal microgrid model.
pub fn reference_model(cs: &CaseStudy, loss_scale: f64) -> Result<EtmgModel> {
    let thermal = reference_thermal(cs, loss_scale)?;
    let continuous = assemble_continuous_thermal(&thermal, &[HEAT_PUMP_EDGE], &[CONSUMER_EDGE])?;
    assemble_etmg(&continuous, &reference_electrical(cs)?, &reference_heat_pumps(cs)?, cs.dt_seconds)
}

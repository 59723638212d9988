//! Scenario files, bundled presets and closed-loop runs.
//!
//! A scenario is a TOML document (`schema_version = 1`) describing the
//! networks, the controller, the initial condition and the profile source.
//! See `presets/scenario_I.toml` for a complete example. Pipe volume, flow and
//! loss coefficient default to the values calibrated from the `[calibration]`
//! design point; any of them can be given per edge instead.

mod compare;
mod profiles;
mod trace;

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{assemble_etmg, EtmgModel, HeatPump, HeatPumpBank};
use crate::electrical::{ElectricalNetwork, UnitRole};
use crate::error::ModelError;
use crate::graph::DirectedGraph;
use crate::mpc::{receding_horizon_run, Forecast, MpcConfig, MpcError, SimulationTrace, DEFAULT_REGULARIZATION};
use crate::thermal::{
    assemble_continuous_thermal, calibrate_case_study, validate_hydraulics, DesignPoint, EdgeKind, Fluid,
    HydraulicParams, HydraulicReport, NodeKind, ThermalEdge, ThermalNetwork,
};

pub use compare::{comparison_table, summarize, ComparisonRow, RunSummary};
pub use profiles::{synthesize_profiles, HouseholdCurve, Peak, ProfileSet, SolarCurve, SynthParams};
pub use trace::{read_trace, trace_csv, trace_header, write_trace, TraceRow};

pub const SCHEMA_VERSION: u32 = 1;

pub const SCENARIO_I: &str = include_str!("../../presets/scenario_I.toml");
pub const SCENARIO_II: &str = include_str!("../../presets/scenario_II.toml");

/// Bundled preset by name (`scenario_I`, `scenario_II`).
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "scenario_I" => Some(SCENARIO_I),
        "scenario_II" => Some(SCENARIO_II),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("profile error: {0}")]
    Profiles(String),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// Process exit code: 2 configuration, 3 infeasible horizon problem,
    /// 4 solver failure, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Profiles(_) | Self::Model(_) => 2,
            Self::Mpc(MpcError::Infeasible { .. }) => 3,
            Self::Mpc(MpcError::SolverFailure { .. } | MpcError::Qp(_)) => 4,
            Self::Mpc(MpcError::Config(_) | MpcError::ForecastTooShort { .. } | MpcError::Model(_)) => 2,
            Self::Io(_) => 1,
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub label: String,
    pub simulation: SimulationSection,
    pub fluid: FluidSection,
    pub calibration: CalibrationSection,
    pub thermal: ThermalSection,
    pub electrical: ElectricalSection,
    pub heat_pumps: Vec<HeatPumpSpec>,
    pub controller: ControllerSection,
    pub initial: InitialSection,
    pub profiles: ProfileSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub dt_minutes: f64,
    pub k_sim: usize,
    /// Steps simulated before the recorded trace starts.
    #[serde(default)]
    pub warmup_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidSection {
    /// kg/m^3
    pub density: f64,
    /// J/(kg K)
    pub specific_heat: f64,
    /// °C
    pub ambient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub nominal_heat_mw: f64,
    pub supply_temperature: f64,
    pub temperature_spread: f64,
    pub loss_fraction: f64,
    /// m
    pub pipe_length: f64,
    /// m
    pub pipe_diameter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKindSpec {
    Storage,
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub kind: NodeKindSpec,
    /// m^3, storage nodes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKindSpec {
    Pipe,
    Consumer,
    HeatPump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_coefficient: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSection {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleSpec {
    Pcc,
    Storage,
    HeatPump,
    Renewable,
    Load,
}

impl From<RoleSpec> for UnitRole {
    fn from(r: RoleSpec) -> Self {
        match r {
            RoleSpec::Pcc => UnitRole::Pcc,
            RoleSpec::Storage => UnitRole::Storage,
            RoleSpec::HeatPump => UnitRole::HeatPump,
            RoleSpec::Renewable => UnitRole::Renewable,
            RoleSpec::Load => UnitRole::Load,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineSpec {
    pub from: usize,
    pub to: usize,
    /// Line parameter of the DC approximation.
    pub susceptance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricalSection {
    pub roles: Vec<RoleSpec>,
    pub lines: Vec<LineSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatPumpSpec {
    pub electrical_node: usize,
    pub thermal_edge: usize,
    pub cop: f64,
}

/// A thermal state named by its edge or its storage node.
#[derive(Debug, Clone, Copy, PartialEq)]
struct StateRef {
    edge: Option<usize>,
    node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    pub desired: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemperatureBoundSpec {
    #[serde(default)]
    pub edges: Vec<usize>,
    #[serde(default)]
    pub nodes: Vec<usize>,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSection {
    #[serde(default)]
    pub c_et: f64,
    #[serde(default)]
    pub c_es: f64,
    #[serde(default)]
    pub c_ehp: f64,
    #[serde(default)]
    pub c_hp_i: f64,
    #[serde(default)]
    pub c_hp_ii: f64,
}

/// `[lower, upper]` pairs in MW, applied to every unit of a kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitSection {
    pub grid: [f64; 2],
    pub storage: [f64; 2],
    pub heat_pump: [f64; 2],
    pub lines: [f64; 2],
    /// MWh
    pub ess_capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub horizon: usize,
    /// Best-efficiency heat-pump power, MW.
    pub u_hp_desired: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    pub weights: WeightSection,
    #[serde(default)]
    pub tracking: Vec<TrackingSpec>,
    #[serde(default)]
    pub temperature_bounds: Vec<TemperatureBoundSpec>,
    pub limits: LimitSection,
}

fn default_regularization() -> f64 {
    DEFAULT_REGULARIZATION
}

/// Thermal steady state placing one state at a temperature under the first
/// profile sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyTarget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// MWh per storage unit.
    pub ess_energy: f64,
    /// Explicit thermal state, °C.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperatures: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_target: Option<SteadyTarget>,
    /// Heat-pump power before the first step, MW (defaults to the
    /// best-efficiency point).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileSource {
    /// CSV file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthParams>,
}

/// Everything needed for a closed-loop run.
#[derive(Debug, Clone)]
pub struct PreparedScenario {
    pub label: String,
    pub model: EtmgModel,
    pub mpc: MpcConfig,
    pub profiles: ProfileSet,
    pub forecast: Forecast,
    pub x_init: DVector<f64>,
    pub u_hp_init: Vec<f64>,
    pub k_sim: usize,
    pub warmup_steps: usize,
    pub hydraulics: HydraulicReport,
    pub thermal_network: ThermalNetwork,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(text).map_err(|e| cfg_err(e.to_string()))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(cfg_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configuration serializes")
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            ScenarioError::Config(m) => cfg_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn dt_seconds(&self) -> f64 {
        self.simulation.dt_minutes * 60.0
    }

    fn fluid(&self) -> Fluid {
        Fluid { density: self.fluid.density, specific_heat: self.fluid.specific_heat }
    }

    fn design(&self) -> DesignPoint {
        let c = &self.calibration;
        DesignPoint {
            nominal_heat: c.nominal_heat_mw * 1e6,
            supply_temperature: c.supply_temperature,
            temperature_spread: c.temperature_spread,
            loss_fraction: c.loss_fraction,
            ambient: self.fluid.ambient,
            pipe_length: c.pipe_length,
            pipe_diameter: c.pipe_diameter,
        }
    }

    pub fn thermal_network(&self) -> Result<ThermalNetwork, ScenarioError> {
        let cal = calibrate_case_study(&self.design(), &self.fluid())?;
        let t = &self.thermal;
        let graph = DirectedGraph::new(t.nodes.len(), t.edges.iter().map(|e| (e.from, e.to)).collect())?;
        let edges = t
            .edges
            .iter()
            .map(|e| ThermalEdge {
                kind: match e.kind {
                    EdgeKindSpec::Pipe => EdgeKind::SimplePipe,
                    EdgeKindSpec::Consumer => EdgeKind::ConsumerExchanger,
                    EdgeKindSpec::HeatPump => EdgeKind::HeatPumpExchanger,
                },
                volume: e.volume.unwrap_or(cal.volume),
                flow: e.flow.unwrap_or(cal.flow),
                loss_coefficient: e.loss_coefficient.unwrap_or(cal.loss_coefficient),
                hydraulic: HydraulicParams { length: self.calibration.pipe_length, ..Default::default() },
            })
            .collect();
        let nodes = t
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match (n.kind, n.volume) {
                (NodeKindSpec::Storage, Some(v)) => Ok(NodeKind::Storage { volume: v }),
                (NodeKindSpec::Storage, None) => Err(cfg_err(format!("thermal.nodes[{i}]: storage needs a volume"))),
                (NodeKindSpec::Crossing, None) => Ok(NodeKind::Crossing),
                (NodeKindSpec::Crossing, Some(_)) => {
                    Err(cfg_err(format!("thermal.nodes[{i}]: crossings have no volume")))
                }
            })
            .collect::<Result<_, _>>()?;
        Ok(ThermalNetwork::new(graph, edges, nodes, self.fluid(), self.fluid.ambient)?)
    }

    pub fn electrical_network(&self) -> Result<ElectricalNetwork, ScenarioError> {
        let e = &self.electrical;
        let graph = DirectedGraph::new(e.roles.len(), e.lines.iter().map(|l| (l.from, l.to)).collect())?;
        let params = e.lines.iter().map(|l| l.susceptance).collect();
        Ok(ElectricalNetwork::new(graph, params, e.roles.iter().map(|&r| r.into()).collect())?)
    }

    fn state_index(&self, net: &ThermalNetwork, r: &StateRef, ctx: &str) -> Result<usize, ScenarioError> {
        match (r.edge, r.node) {
            (Some(e), None) if e < net.edges().len() => Ok(e),
            (None, Some(n)) => net
                .storage_nodes()
                .iter()
                .position(|&s| s == n)
                .map(|p| net.edges().len() + p)
                .ok_or_else(|| cfg_err(format!("{ctx}: node {n} is not a storage node"))),
            (Some(e), None) => Err(cfg_err(format!("{ctx}: edge {e} does not exist"))),
            _ => Err(cfg_err(format!("{ctx}: give exactly one of `edge` or `node`"))),
        }
    }

    fn mpc_config(&self, model: &EtmgModel, net: &ThermalNetwork) -> Result<MpcConfig, ScenarioError> {
        let c = &self.controller;
        let d = model.dims;
        let mut tracked_states = Vec::new();
        let mut desired = Vec::new();
        let mut c_t = Vec::new();
        for (i, t) in c.tracking.iter().enumerate() {
            let s =
                self.state_index(net, &StateRef { edge: t.edge, node: t.node }, &format!("controller.tracking[{i}]"))?;
            if tracked_states.contains(&s) {
                return Err(cfg_err(format!("controller.tracking[{i}]: state tracked twice")));
            }
            tracked_states.push(s);
            desired.push(t.desired);
            c_t.push(t.weight);
        }
        let nt = d.n_thermal();
        let mut lower = vec![f64::NEG_INFINITY; nt];
        let mut upper = vec![f64::INFINITY; nt];
        let mut seen = vec![false; nt];
        for (i, b) in c.temperature_bounds.iter().enumerate() {
            let ctx = format!("controller.temperature_bounds[{i}]");
            let refs = b
                .edges
                .iter()
                .map(|&e| StateRef { edge: Some(e), node: None })
                .chain(b.nodes.iter().map(|&n| StateRef { edge: None, node: Some(n) }));
            for r in refs {
                let s = self.state_index(net, &r, &ctx)?;
                if seen[s] {
                    return Err(cfg_err(format!("{ctx}: thermal state {s} bounded twice")));
                }
                seen[s] = true;
                lower[s] = b.lower;
                upper[s] = b.upper;
            }
        }
        let l = &c.limits;
        let mut control_lower = vec![l.grid[0]];
        let mut control_upper = vec![l.grid[1]];
        control_lower.extend(std::iter::repeat_n(l.storage[0], d.n_ess));
        control_upper.extend(std::iter::repeat_n(l.storage[1], d.n_ess));
        control_lower.extend(std::iter::repeat_n(l.heat_pump[0], d.n_hp));
        control_upper.extend(std::iter::repeat_n(l.heat_pump[1], d.n_hp));
        let w = &c.weights;
        let cfg = MpcConfig {
            horizon: c.horizon,
            tracked_states,
            desired_temperatures: desired,
            c_t,
            c_et: w.c_et,
            c_es: vec![w.c_es; d.n_ess],
            c_ehp: vec![w.c_ehp; d.n_hp],
            c_hp_i: vec![w.c_hp_i; d.n_hp],
            c_hp_ii: vec![w.c_hp_ii; d.n_hp],
            u_hp_desired: vec![c.u_hp_desired; d.n_hp],
            temperature_lower: lower,
            temperature_upper: upper,
            ess_capacity: vec![l.ess_capacity; d.n_ess],
            line_lower: vec![l.lines[0]; d.n_lines],
            line_upper: vec![l.lines[1]; d.n_lines],
            control_lower,
            control_upper,
            regularization: c.regularization,
        };
        cfg.validate(model).map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    /// Closed-loop steps including the warm-up.
    pub fn total_steps(&self) -> usize {
        self.simulation.warmup_steps + self.simulation.k_sim
    }

    /// Loads or synthesizes the profile set. Relative file paths resolve
    /// against `base_dir`.
    pub fn profiles(
        &self,
        base_dir: Option<&Path>,
        counts: (usize, usize, usize),
    ) -> Result<ProfileSet, ScenarioError> {
        let steps = self.total_steps() + self.controller.horizon;
        let set = match (&self.profiles.file, &self.profiles.synth) {
            (Some(f), None) => {
                let mut path = PathBuf::from(f);
                if path.is_relative() {
                    if let Some(b) = base_dir {
                        path = b.join(path);
                    }
                }
                ProfileSet::load(&path, counts)?
            }
            (None, Some(p)) => {
                if counts != (1, 1, 1) {
                    return Err(cfg_err("profile synthesis supports one renewable unit, one load and one consumer"));
                }
                synthesize_profiles(p, self.dt_seconds() / 3600.0, steps)?
            }
            _ => return Err(cfg_err("profiles: give exactly one of `file` or `synth`")),
        };
        set.validate()?;
        if set.len() < steps {
            return Err(ScenarioError::Profiles(format!(
                "{} rows cover fewer than warmup_steps + k_sim + horizon = {steps} steps",
                set.len()
            )));
        }
        Ok(set)
    }

    /// Builds model, controller and initial condition. `profiles` overrides
    /// the configured profile source.
    pub fn prepare(
        &self,
        base_dir: Option<&Path>,
        profiles: Option<ProfileSet>,
    ) -> Result<PreparedScenario, ScenarioError> {
        if !(self.simulation.dt_minutes > 0.0) {
            return Err(cfg_err("simulation.dt_minutes must be positive"));
        }
        if self.simulation.k_sim == 0 {
            return Err(cfg_err("simulation.k_sim must be at least 1"));
        }
        let net = self.thermal_network()?;
        let hydraulics = validate_hydraulics(&net)?;
        let electrical = self.electrical_network()?;
        let pumps = self
            .heat_pumps
            .iter()
            .map(|h| HeatPump { cop: h.cop, thermal_edge: h.thermal_edge, electrical_node: h.electrical_node })
            .collect();
        let bank = HeatPumpBank::new(pumps)?;
        let edge_ids = |kind: EdgeKindSpec| -> Vec<usize> {
            self.thermal.edges.iter().enumerate().filter(|(_, e)| e.kind == kind).map(|(i, _)| i).collect()
        };
        let hp_edges: Vec<usize> = bank.thermal_edges();
        let mut declared = edge_ids(EdgeKindSpec::HeatPump);
        declared.sort_unstable();
        let mut bound = hp_edges.clone();
        bound.sort_unstable();
        if declared != bound {
            return Err(cfg_err("every heat_pump edge needs exactly one [[heat_pumps]] entry"));
        }
        let continuous = assemble_continuous_thermal(&net, &hp_edges, &edge_ids(EdgeKindSpec::Consumer))?;
        let model = assemble_etmg(&continuous, &electrical, &bank, self.dt_seconds())?;
        let mpc = self.mpc_config(&model, &net)?;
        let d = model.dims;

        let profiles = match profiles {
            Some(p) => {
                p.validate()?;
                let steps = self.total_steps() + self.controller.horizon;
                if p.len() < steps {
                    return Err(ScenarioError::Profiles(format!(
                        "{} rows cover fewer than warmup_steps + k_sim + horizon = {steps} steps",
                        p.len()
                    )));
                }
                if (p.d_er.len(), p.d_ed.len(), p.q_d.len()) != (d.n_res, d.n_loads, d.n_demand) {
                    return Err(ScenarioError::Profiles("column counts do not match the networks".into()));
                }
                p
            }
            None => self.profiles(base_dir, (d.n_res, d.n_loads, d.n_demand))?,
        };
        let forecast = profiles.to_forecast(self.fluid.ambient);

        let init = &self.initial;
        let thermal = match (&init.temperatures, &init.steady_target) {
            (Some(t), None) => {
                if t.len() != d.n_thermal() {
                    return Err(cfg_err(format!("initial.temperatures: expected {} values", d.n_thermal())));
                }
                DVector::from_column_slice(t)
            }
            (None, Some(target)) => {
                let s = self.state_index(
                    &net,
                    &StateRef { edge: target.edge, node: target.node },
                    "initial.steady_target",
                )?;
                model.steady_state_for_target(&forecast.d_t[0], s, target.temperature)?.1
            }
            _ => return Err(cfg_err("initial: give exactly one of `temperatures` or `steady_target`")),
        };
        let mut x_init = DVector::zeros(d.n_state());
        for s in 0..d.n_ess {
            x_init[s] = init.ess_energy;
        }
        x_init.rows_mut(d.n_ess, d.n_thermal()).copy_from(&thermal);
        let u_hp_init = vec![init.u_hp.unwrap_or(self.controller.u_hp_desired); d.n_hp];

        Ok(PreparedScenario {
            label: self.label.clone(),
            model,
            mpc,
            profiles,
            forecast,
            x_init,
            u_hp_init,
            k_sim: self.simulation.k_sim,
            warmup_steps: self.simulation.warmup_steps,
            hydraulics,
            thermal_network: net,
        })
    }
}

impl PreparedScenario {
    /// Runs the closed loop and drops the warm-up steps from the trace.
    pub fn run(&self) -> Result<SimulationTrace, ScenarioError> {
        let mut trace = receding_horizon_run(
            &self.model,
            &self.mpc,
            &self.forecast,
            self.warmup_steps + self.k_sim,
            &self.x_init,
            Some(&self.u_hp_init),
        )?;
        if self.warmup_steps > 0 {
            trace.initial_state = trace.steps[self.warmup_steps - 1].state.clone();
            trace.steps.drain(..self.warmup_steps);
            for s in &mut trace.steps {
                s.k -= self.warmup_steps;
            }
        }
        Ok(trace)
    }
}

//! Summary metrics of closed-loop runs.

use std::fmt::Write as _;

use crate::coupling::EtmgModel;
use crate::mpc::SimulationTrace;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    /// Net energy drawn at the PCC, MWh.
    pub grid_energy: f64,
    /// Largest storage power magnitude, MW.
    pub peak_ess_power: f64,
    /// Largest heat-pump power magnitude, MW.
    pub peak_hp_power: f64,
    /// Population variance of the heat-pump power, MW^2.
    pub hp_variance: f64,
    /// Range of stored energy including the initial state, MWh.
    pub used_ess_capacity: f64,
    pub total_cost: f64,
    /// Extremes of the first edge temperature, °C.
    pub min_supply_temperature: f64,
    pub max_supply_temperature: f64,
}

pub fn summarize(label: &str, trace: &SimulationTrace, model: &EtmgModel) -> RunSummary {
    let d = model.dims;
    let dt_h = model.dt_hours();
    let steps = &trace.steps;
    let grid_energy = steps.iter().map(|s| s.control[0] * dt_h).sum();
    let peak = |range: std::ops::Range<usize>| {
        steps.iter().flat_map(|s| range.clone().map(move |i| s.control[i].abs())).fold(0.0, f64::max)
    };
    let ess = d.storage_control()..d.storage_control() + d.n_ess;
    let hp = d.hp_control()..d.hp_control() + d.n_hp;
    let hp_values: Vec<f64> = steps.iter().flat_map(|s| hp.clone().map(move |i| s.control[i])).collect();
    let hp_variance = if hp_values.is_empty() {
        0.0
    } else {
        let mean = hp_values.iter().sum::<f64>() / hp_values.len() as f64;
        hp_values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / hp_values.len() as f64
    };
    let mut used = 0.0f64;
    for s in 0..d.n_ess {
        let energies = std::iter::once(trace.initial_state[s]).chain(steps.iter().map(|st| st.state[s]));
        let (lo, hi) = energies.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        used = used.max(hi - lo);
    }
    let supply = steps.iter().map(|s| s.state[d.n_ess]);
    RunSummary {
        label: label.to_string(),
        grid_energy,
        peak_ess_power: peak(ess),
        peak_hp_power: peak(hp),
        hp_variance,
        used_ess_capacity: used,
        total_cost: trace.total_cost(),
        min_supply_temperature: supply.clone().fold(f64::INFINITY, f64::min),
        max_supply_temperature: supply.fold(f64::NEG_INFINITY, f64::max),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub a: f64,
    pub b: f64,
    /// `100 (b - a) / |a|`, NaN when `a` is zero.
    pub change_percent: f64,
}

impl RunSummary {
    pub fn metrics(&self) -> [(&'static str, f64); 8] {
        [
            ("grid_energy_mwh", self.grid_energy),
            ("peak_ess_power_mw", self.peak_ess_power),
            ("peak_hp_power_mw", self.peak_hp_power),
            ("hp_power_variance_mw2", self.hp_variance),
            ("used_ess_capacity_mwh", self.used_ess_capacity),
            ("total_cost", self.total_cost),
            ("min_T_e1_degc", self.min_supply_temperature),
            ("max_T_e1_degc", self.max_supply_temperature),
        ]
    }
}

/// Rows of `b` against `a` and their CSV rendering
/// (`metric,<label a>,<label b>,change_percent`).
pub fn comparison_table(a: &RunSummary, b: &RunSummary) -> (Vec<ComparisonRow>, String) {
    let rows: Vec<ComparisonRow> = a
        .metrics()
        .iter()
        .zip(b.metrics())
        .map(|(&(metric, va), (_, vb))| ComparisonRow {
            metric,
            a: va,
            b: vb,
            change_percent: if va == 0.0 { f64::NAN } else { 100.0 * (vb - va) / va.abs() },
        })
        .collect();
    let mut csv = format!("metric,{},{},change_percent\n", a.label, b.label);
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.metric, r.a, r.b, r.change_percent);
    }
    (rows, csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case_study::{reference_model, CaseStudy};
    use crate::mpc::{StageCosts, TraceStep};
    use nalgebra::DVector;

    #[test]
    fn metrics_on_hand_trace() {
        let model = reference_model(&CaseStudy::default(), 1.0).unwrap();
        let mk = |u: [f64; 3], xe: f64, t: f64| TraceStep {
            k: 0,
            control: DVector::from_row_slice(&u),
            state: DVector::from_vec(vec![xe, t, 0.0, 0.0, 0.0, 0.0, 0.0]),
            injections: DVector::zeros(5),
            line_flows: DVector::zeros(6),
            costs: StageCosts { l_ect: 1.0, ..Default::default() },
            iterations: 0,
            polished: false,
        };
        let trace = SimulationTrace {
            initial_state: DVector::from_vec(vec![2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            steps: vec![mk([0.4, 0.5, -0.2], 2.5, 90.0), mk([0.8, -0.9, -0.6], 1.5, 88.0)],
        };
        let s = summarize("x", &trace, &model);
        assert!((s.grid_energy - 0.3).abs() < 1e-12);
        assert_eq!(s.peak_ess_power, 0.9);
        assert_eq!(s.peak_hp_power, 0.6);
        assert!((s.hp_variance - 0.04).abs() < 1e-12);
        assert!((s.used_ess_capacity - 1.0).abs() < 1e-12);
        assert_eq!(s.total_cost, 2.0);
        assert_eq!((s.min_supply_temperature, s.max_supply_temperature), (88.0, 90.0));
        let (rows, csv) = comparison_table(&s, &s);
        assert!(rows.iter().all(|r| r.change_percent == 0.0));
        assert!(csv.starts_with("metric,x,x,change_percent\ngrid_energy_mwh,"));
    }
}

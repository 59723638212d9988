//! Trace CSV: header
//! `k,u_et,u_es,u_ehp,x_e,T_e1,...,T_s1,...,cost_lt,cost_ect,cost_ecs,cost_echp,cost_lhp`.
//! Row `k` holds the control applied at step `k` and the state it produced.
//! Units with several instances get numbered columns (`u_es1,u_es2,...`).
//! Values are written in shortest round-trip decimal form.

use std::fmt::Write as _;
use std::path::Path;

use super::ScenarioError;
use crate::coupling::ModelDims;
use crate::mpc::{SimulationTrace, StageCosts};

const COST_COLUMNS: [&str; 5] = ["cost_lt", "cost_ect", "cost_ecs", "cost_echp", "cost_lhp"];

fn numbered(base: &str, count: usize) -> Vec<String> {
    if count == 1 {
        vec![base.to_string()]
    } else {
        (1..=count).map(|i| format!("{base}{i}")).collect()
    }
}

pub fn trace_header(dims: &ModelDims) -> Vec<String> {
    let mut h = vec!["k".to_string(), "u_et".to_string()];
    h.extend(numbered("u_es", dims.n_ess));
    h.extend(numbered("u_ehp", dims.n_hp));
    h.extend(numbered("x_e", dims.n_ess));
    h.extend((1..=dims.n_edges).map(|i| format!("T_e{i}")));
    h.extend((1..=dims.n_storage).map(|i| format!("T_s{i}")));
    h.extend(COST_COLUMNS.iter().map(|c| c.to_string()));
    h
}

pub fn trace_csv(trace: &SimulationTrace, dims: &ModelDims) -> String {
    let mut out = trace_header(dims).join(",");
    out.push('\n');
    for st in &trace.steps {
        let _ = write!(out, "{}", st.k);
        for v in st.control.iter().chain(st.state.iter()) {
            let _ = write!(out, ",{v}");
        }
        let c = &st.costs;
        for v in [c.l_t, c.l_ect, c.l_ecs, c.l_echp, c.l_hp] {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trace(trace: &SimulationTrace, dims: &ModelDims, path: &Path) -> Result<(), ScenarioError> {
    std::fs::write(path, trace_csv(trace, dims)).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub control: Vec<f64>,
    pub state: Vec<f64>,
    pub costs: StageCosts,
}

/// Parses trace CSV text; the column groups are recovered from the header.
pub fn read_trace(text: &str) -> Result<Vec<TraceRow>, ScenarioError> {
    let err = |row: usize, msg: String| ScenarioError::Io(format!("trace row {row}: {msg}"));
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| err(1, e.to_string()))?.iter().map(str::to_string).collect();
    let n_controls = header.iter().filter(|h| h.starts_with("u_")).count();
    let n_states = header.iter().filter(|h| h.starts_with("x_e") || h.starts_with("T_")).count();
    if header.first().map(String::as_str) != Some("k")
        || header.len() != 1 + n_controls + n_states + COST_COLUMNS.len()
        || header[header.len() - COST_COLUMNS.len()..] != COST_COLUMNS
    {
        return Err(err(1, format!("unrecognized header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        let k: usize = rec[0].parse().map_err(|_| err(row, format!("invalid step `{}`", &rec[0])))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|f| f.parse::<f64>().map_err(|_| err(row, format!("invalid value `{f}`"))))
            .collect::<Result<Vec<_>, _>>()?;
        let c = &vals[n_controls + n_states..];
        rows.push(TraceRow {
            k,
            control: vals[..n_controls].to_vec(),
            state: vals[n_controls..n_controls + n_states].to_vec(),
            costs: StageCosts { l_t: c[0], l_ect: c[1], l_ecs: c[2], l_echp: c[3], l_hp: c[4] },
        });
    }
    Ok(rows)
}

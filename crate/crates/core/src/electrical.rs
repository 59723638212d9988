//! Electrical layer: DC power flow and battery storage.
//!
//! Nodes are numbered PCC first, then storages, heat pumps, renewables and
//! loads. Nodal injections are positive when power is fed into the grid.
//! Storage power `u_s > 0` charges the battery, so it enters the nodal
//! injection vector as `-u_s`.
//!
//! Units at this boundary are MW, MWh and hours.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, ModelError, Result};
use crate::graph::{build_incidence, DirectedGraph};

/// Relative tolerance on `1ᵀ p` used by [`line_flows`].
pub const BALANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UnitRole {
    Pcc,
    Storage,
    HeatPump,
    Renewable,
    Load,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalNetwork {
    graph: DirectedGraph,
    line_params: Vec<f64>,
    roles: Vec<UnitRole>,
}

impl ElectricalNetwork {
    /// `line_params[i] = b_i * v_m * v_l` for line `i` between nodes `m`, `l`.
    pub fn new(graph: DirectedGraph, line_params: Vec<f64>, roles: Vec<UnitRole>) -> Result<Self> {
        check_dim("line parameters", graph.edge_count(), line_params.len())?;
        check_dim("electrical node roles", graph.node_count(), roles.len())?;
        if roles.first() != Some(&UnitRole::Pcc) {
            return Err(invalid("roles", "node 0 must be the point of common coupling"));
        }
        if roles.iter().filter(|r| **r == UnitRole::Pcc).count() != 1 {
            return Err(invalid("roles", "exactly one point of common coupling is required"));
        }
        if roles.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("roles", "nodes must be ordered PCC, storage, heat pump, renewable, load"));
        }
        if let Some(i) = line_params.iter().position(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(invalid(&format!("line_params[{i}]"), "must be positive"));
        }
        graph.check_connected()?;
        Ok(Self { graph, line_params, roles })
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn line_params(&self) -> &[f64] {
        &self.line_params
    }

    pub fn roles(&self) -> &[UnitRole] {
        &self.roles
    }

    pub fn count(&self, role: UnitRole) -> usize {
        self.roles.iter().filter(|r| **r == role).count()
    }

    /// Node ids holding `role`, ascending.
    pub fn nodes_with(&self, role: UnitRole) -> Vec<usize> {
        (0..self.roles.len()).filter(|&n| self.roles[n] == role).collect()
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn line_count(&self) -> usize {
        self.line_params.len()
    }
}

/// Linear map from balanced nodal injections to line flows.
#[derive(Debug, Clone, PartialEq)]
pub struct PtdfMap {
    matrix: DMatrix<f64>,
}

impl PtdfMap {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn line_count(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn node_count(&self) -> usize {
        self.matrix.ncols()
    }
}

/// Builds `diag(a) Fᵀ T⁻¹ T̃ᵀ L̃⁻¹ T̃` where `T` differences every angle against
/// the last node and `L̃` is the Laplacian with that node removed.
pub fn assemble_ptdf(net: &ElectricalNetwork) -> Result<PtdfMap> {
    let n = net.node_count();
    let f = build_incidence(net.graph())?.into_inner();
    let a = DVector::from_column_slice(net.line_params());
    let a_diag = DMatrix::from_diagonal(&a);
    if n == 1 {
        return Ok(PtdfMap { matrix: DMatrix::zeros(net.line_count(), 1) });
    }

    let mut t = DMatrix::<f64>::identity(n, n);
    for r in 0..n - 1 {
        t[(r, n - 1)] = -1.0;
    }
    let mut t_red = DMatrix::<f64>::zeros(n - 1, n);
    t_red.view_mut((0, 0), (n - 1, n - 1)).fill_with_identity();

    let laplacian = &f * &a_diag * f.transpose();
    let l_red = &t_red * &laplacian * t_red.transpose();
    let l_red_inv =
        l_red.lu().try_inverse().ok_or_else(|| ModelError::Singular { context: "reduced Laplacian".into() })?;
    let t_inv = t.try_inverse().ok_or_else(|| ModelError::Singular { context: "T".into() })?;
    let matrix = &a_diag * f.transpose() * t_inv * t_red.transpose() * l_red_inv * &t_red;
    Ok(PtdfMap { matrix })
}

/// Global power balance residual `1ᵀ p`.
pub fn check_balance(injections: &DVector<f64>) -> f64 {
    injections.sum()
}

fn balance_scale(p: &DVector<f64>) -> f64 {
    p.iter().map(|v| v.abs()).sum::<f64>().max(1.0)
}

/// Line flows for a balanced injection vector.
pub fn line_flows(ptdf: &PtdfMap, injections: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim("nodal injections", ptdf.node_count(), injections.len())?;
    let residual = check_balance(injections);
    if residual.abs() > BALANCE_TOL * balance_scale(injections) {
        return Err(ModelError::Imbalance { residual });
    }
    Ok(ptdf.matrix() * injections)
}

/// One exact step of the battery energy integrator `x + dt * u`.
pub fn ess_step(energy: &DVector<f64>, power: &DVector<f64>, dt_hours: f64) -> Result<DVector<f64>> {
    check_dim("storage power", energy.len(), power.len())?;
    Ok(energy + power * dt_hours)
}

//! Electro-thermal microgrid modelling and model-predictive operation.
//!
//! Bottom-up: [`graph`] incidence structures, the [`thermal`] pipe network and
//! the [`electrical`] DC grid, their [`coupling`] into one discrete-time model
//! via [`discretize`], the dense [`qp`] solver, the [`mpc`] controller and the
//! [`scenario`] layer with presets and file formats.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision, clippy::needless_range_loop)]

pub mod case_study;
pub mod coupling;
pub mod discretize;
pub mod electrical;
pub mod error;
pub mod graph;
pub mod mpc;
pub mod qp;
pub mod scenario;
pub mod thermal;

pub use coupling::{EtmgModel, ModelDims};
pub use error::{ModelError, Result};
pub use mpc::{receding_horizon_run, Forecast, MpcConfig, MpcError, SimulationTrace};
pub use qp::{solve_qp, QpProblem, QpSettings, QpSolution, QpStatus};
pub use scenario::{ScenarioConfig, ScenarioError};

//! Directed graphs and node-edge incidence matrices shared by the thermal and
//! electrical layers.
//!
//! Node and edge ids are the integer positions assigned at construction. Every
//! matrix assembled downstream uses this ordering for its rows and columns.

use nalgebra::DMatrix;

use crate::error::{ModelError, Result};

/// Directed graph with stable integer node and edge ids. Parallel edges are
/// allowed; self-loops are not.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
}

impl DirectedGraph {
    /// Builds a graph and checks (weak) connectivity.
    pub fn new(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let g = Self::without_connectivity_check(node_count, edges)?;
        g.check_connected()?;
        Ok(g)
    }

    /// Builds a graph validating ids only. Use [`check_connected`](Self::check_connected)
    /// before handing it to model assembly.
    pub fn without_connectivity_check(node_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for (j, &(s, t)) in edges.iter().enumerate() {
            for n in [s, t] {
                if n >= node_count {
                    return Err(ModelError::NodeOutOfRange { node: n, node_count });
                }
            }
            if s == t {
                return Err(ModelError::SelfLoop { edge: j, node: s });
            }
        }
        Ok(Self { node_count, edges })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn source(&self, edge: usize) -> usize {
        self.edges[edge].0
    }

    pub fn sink(&self, edge: usize) -> usize {
        self.edges[edge].1
    }

    /// Fails with the set of nodes not reachable from node 0, ignoring orientation.
    pub fn check_connected(&self) -> Result<()> {
        if self.node_count == 0 {
            return Err(ModelError::InvalidParameter {
                name: "node_count".into(),
                reason: "graph has no nodes".into(),
            });
        }
        let mut adj = vec![Vec::new(); self.node_count];
        for &(s, t) in &self.edges {
            adj[s].push(t);
            adj[t].push(s);
        }
        let mut seen = vec![false; self.node_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &m in &adj[n] {
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        let component: Vec<usize> = (0..self.node_count).filter(|&n| !seen[n]).collect();
        if component.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Disconnected { component })
        }
    }

    /// Incoming and outgoing edge ids of `node`, in ascending edge order.
    pub fn in_out_edge_sets(&self, node: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if node >= self.node_count {
            return Err(ModelError::NodeOutOfRange { node, node_count: self.node_count });
        }
        let incoming = (0..self.edges.len()).filter(|&j| self.edges[j].1 == node).collect();
        let outgoing = (0..self.edges.len()).filter(|&j| self.edges[j].0 == node).collect();
        Ok((incoming, outgoing))
    }
}

/// Dense node-edge incidence matrix: `+1` where the node is the sink of the
/// edge, `-1` where it is the source.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceMatrix(DMatrix<f64>);

impl IncidenceMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Splits into `(F_plus, F_minus)` with `F_plus = (F + |F|)/2` and
    /// `F_minus = (|F| - F)/2`.
    pub fn split(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let abs = self.0.abs();
        let plus = (&self.0 + &abs) * 0.5;
        let minus = (&abs - &self.0) * 0.5;
        (plus, minus)
    }
}

pub fn build_incidence(g: &DirectedGraph) -> Result<IncidenceMatrix> {
    g.check_connected()?;
    let mut f = DMatrix::zeros(g.node_count(), g.edge_count());
    for (j, &(s, t)) in g.edges().iter().enumerate() {
        f[(s, j)] = -1.0;
        f[(t, j)] = 1.0;
    }
    Ok(IncidenceMatrix(f))
}

pub fn split_incidence(f: &IncidenceMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    f.split()
}

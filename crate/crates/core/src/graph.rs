//! Undirected communication graphs with a chosen edge orientation.
//!
//! The incidence matrix of any orientation satisfies `L = QᵀQ` for the
//! (orientation-independent) Laplacian, which is all the consensus protocol
//! needs from the topology.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// A directed edge between 1-based node indices: `initial → terminal`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub initial: usize,
    pub terminal: usize,
}

impl Edge {
    pub fn new(initial: usize, terminal: usize) -> Self {
        Self { initial, terminal }
    }

    /// Same undirected edge with the opposite orientation.
    pub fn flipped(self) -> Self {
        Self {
            initial: self.terminal,
            terminal: self.initial,
        }
    }
}

/// An undirected topology plus one chosen orientation per edge.
///
/// Node indices are 1-based, matching the usual graph-theory convention and
/// the scenario config format. Self-loops and duplicate edges (in either
/// orientation) are rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    node_count: usize,
    edges: Vec<Edge>,
}

impl Topology {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidTopology("node count must be >= 1".into()));
        }
        for (k, e) in edges.iter().enumerate() {
            if e.initial == 0
                || e.terminal == 0
                || e.initial > node_count
                || e.terminal > node_count
            {
                return Err(Error::InvalidTopology(format!(
                    "edge {} references node out of range 1..={node_count}: ({}, {})",
                    k + 1,
                    e.initial,
                    e.terminal
                )));
            }
            if e.initial == e.terminal {
                return Err(Error::InvalidTopology(format!(
                    "edge {} is a self-loop at node {}",
                    k + 1,
                    e.initial
                )));
            }
            for prior in &edges[..k] {
                let same = (prior.initial == e.initial && prior.terminal == e.terminal)
                    || (prior.initial == e.terminal && prior.terminal == e.initial);
                if same {
                    return Err(Error::InvalidTopology(format!(
                        "duplicate edge between nodes {} and {}",
                        e.initial, e.terminal
                    )));
                }
            }
        }
        Ok(Self { node_count, edges })
    }

    /// Builds a topology from unordered pairs with the default orientation
    /// "initial = smaller node index".
    pub fn from_pairs(node_count: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let edges = pairs
            .iter()
            .map(|&(i, j)| Edge::new(i.min(j), i.max(j)))
            .collect();
        Self::new(node_count, edges)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Same topology with every edge orientation reversed.
    pub fn with_flipped_edges(&self) -> Self {
        Self {
            node_count: self.node_count,
            edges: self.edges.iter().map(|e| e.flipped()).collect(),
        }
    }

    /// Incidence matrix `Q ∈ ℝ^{l×N}`: `+1` at the initial vertex of each
    /// edge, `−1` at the terminal vertex, `0` elsewhere.
    pub fn incidence_matrix<T: Real>(&self) -> Mat<T> {
        let mut q = Mat::zeros(self.edges.len(), self.node_count);
        for (k, e) in self.edges.iter().enumerate() {
            q[(k, e.initial - 1)] = T::one();
            q[(k, e.terminal - 1)] = -T::one();
        }
        q
    }

    /// Laplacian `L = QᵀQ`; symmetric positive semidefinite with zero row
    /// sums, independent of the chosen orientation.
    pub fn laplacian<T: Real>(&self) -> Mat<T> {
        let q = self.incidence_matrix::<T>();
        q.transpose().matmul(&q)
    }

    /// Symmetric adjacency matrix (derived accessor; the protocol itself only
    /// uses the incidence matrix).
    pub fn adjacency_matrix<T: Real>(&self) -> Mat<T> {
        let mut a = Mat::zeros(self.node_count, self.node_count);
        for e in &self.edges {
            a[(e.initial - 1, e.terminal - 1)] = T::one();
            a[(e.terminal - 1, e.initial - 1)] = T::one();
        }
        a
    }

    /// True iff a breadth-first traversal from node 1 reaches every node.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = queue.pop_front() {
            for e in &self.edges {
                let (a, b) = (e.initial - 1, e.terminal - 1);
                let next = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    reached += 1;
                    queue.push_back(next);
                }
            }
        }
        reached == self.node_count
    }

    /// The 1-based index of some node unreachable from node 1, if any.
    pub fn unreachable_node(&self) -> Option<usize> {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for e in &self.edges {
                let (a, b) = (e.initial - 1, e.terminal - 1);
                let next = if a == v {
                    b
                } else if b == v {
                    a
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        seen.iter().position(|s| !s).map(|i| i + 1)
    }
}

/// Kronecker expansion `M ⊗ I_m`, exposed at module level because it is the
/// block-wiring primitive of the consensus protocol.
pub fn kron_expand<T: Real>(m: &Mat<T>, io_dim: usize) -> Mat<T> {
    m.kron_identity(io_dim)
}

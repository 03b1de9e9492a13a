//! Spin networks, terminal spins and the single-excitation Hamiltonian.
//!
//! Nodes are numbered `1..=N` in every user-facing place and stored 0-based
//! internally. The single-excitation basis of a [`SystemSpec`] is fixed as the
//! terminals in declaration order followed by the network nodes `1..=N`.
//!
//! A network edge of weight `w` contributes the matrix element `w` between its
//! two sites (the factor two from `σˣσˣ + σʸσʸ` is absorbed into the energy
//! unit), so a unit-weight chain has eigenvalues `2cos(πk/(N+1))`. A terminal
//! field `ω` enters as the diagonal entry `+ω`; the constant offset of the
//! `σᶻ` terms is dropped.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected edge between two 0-based node indices, `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted undirected graph of network spins.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinNetwork {
    node_count: usize,
    edges: Vec<Edge>,
}

impl SpinNetwork {
    /// Path graph on `n` nodes with unit couplings.
    pub fn chain(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("a chain needs at least one node".into()));
        }
        let edges = (1..n).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>();
        Self::from_edge_list(n, &edges)
    }

    /// Ring on `n` nodes with unit couplings.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidSize(format!(
                "a cycle needs at least three nodes, got {n}"
            )));
        }
        let mut edges = (1..n).map(|i| (i, i + 1, 1.0)).collect::<Vec<_>>();
        edges.push((1, n, 1.0));
        Self::from_edge_list(n, &edges)
    }

    /// Builds a network from 1-based `(i, j, weight)` triples.
    ///
    /// Endpoint order within a triple does not matter. Self-loops, repeated
    /// edges, out-of-range endpoints and non-finite weights are rejected.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSize("a network needs at least one node".into()));
        }
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for &(i, j, weight) in edges {
            for end in [i, j] {
                if end == 0 || end > n {
                    return Err(Error::InvalidNetwork(format!(
                        "edge ({i}, {j}) has endpoint {end} outside 1..={n}"
                    )));
                }
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("self-loop at node {i}")));
            }
            if !weight.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "edge ({i}, {j}) has non-finite weight {weight}"
                )));
            }
            let (a, b) = if i < j { (i - 1, j - 1) } else { (j - 1, i - 1) };
            if !seen.insert((a, b)) {
                return Err(Error::InvalidNetwork(format!("duplicate edge ({}, {})", a + 1, b + 1)));
            }
            out.push(Edge { a, b, weight });
        }
        Ok(Self {
            node_count: n,
            edges: out,
        })
    }

    /// Erdős–Rényi graph conditioned on connectivity (resampled until
    /// connected), unit weights.
    pub fn random_connected<R: Rng + ?Sized>(n: usize, edge_probability: f64, rng: &mut R) -> Self {
        assert!(n >= 1, "random_connected needs n >= 1");
        assert!(edge_probability > 0.0 || n == 1, "edge probability must be positive");
        loop {
            let mut edges = Vec::new();
            for i in 1..=n {
                for j in (i + 1)..=n {
                    if rng.random::<f64>() < edge_probability {
                        edges.push((i, j, 1.0));
                    }
                }
            }
            let net = Self::from_edge_list(n, &edges).expect("generated edges are valid");
            if net.is_connected() {
                return net;
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge list as 1-based `(i, j, weight)` triples.
    pub fn edge_triples(&self) -> Vec<(usize, usize, f64)> {
        self.edges.iter().map(|e| (e.a + 1, e.b + 1, e.weight)).collect()
    }

    /// Real symmetric adjacency matrix (the network Hamiltonian block).
    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.node_count;
        let mut m = DMatrix::zeros(n, n);
        for e in &self.edges {
            m[(e.a, e.b)] = e.weight;
            m[(e.b, e.a)] = e.weight;
        }
        m
    }

    pub fn adjacency_complex(&self) -> DMatrix<C64> {
        self.adjacency().map(|x| C64::new(x, 0.0))
    }

    /// Breadth-first connectivity test.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count;
        let mut neighbours = vec![Vec::new(); n];
        for e in &self.edges {
            neighbours[e.a].push(e.b);
            neighbours[e.b].push(e.a);
        }
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &neighbours[v] {
                if !visited[w] {
                    visited[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == n
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.node_count {
            return Err(Error::InvalidInput(format!(
                "node {node} outside 1..={}",
                self.node_count
            )));
        }
        Ok(())
    }
}

/// A user spin weakly coupled to one network node.
///
/// The coupling is stored as the product `εξ`; `epsilon` is the shared
/// smallness scale and `xi()` recovers `ξ = εξ / ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct Terminal {
    label: String,
    node: usize,
    coupling: C64,
    epsilon: f64,
    field: f64,
}

impl Terminal {
    /// Terminal with coupling product `coupling = εξ` and `ε = 1`.
    pub fn new(label: impl Into<String>, node: usize, coupling: impl Into<C64>, field: f64) -> Result<Self> {
        Self::scaled(label, node, 1.0, coupling, field)
    }

    /// Terminal with an explicit smallness scale: the stored coupling is `epsilon * xi`.
    pub fn scaled(label: impl Into<String>, node: usize, epsilon: f64, xi: impl Into<C64>, field: f64) -> Result<Self> {
        let label = label.into();
        let xi = xi.into();
        let invalid = |reason: String| Error::InvalidTerminal {
            label: label.clone(),
            reason,
        };
        if label.is_empty() {
            return Err(invalid("label must not be empty".into()));
        }
        if node == 0 {
            return Err(invalid("attachment node is 1-based".into()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        let coupling = xi * epsilon;
        if !(coupling.re.is_finite() && coupling.im.is_finite()) {
            return Err(invalid("coupling must be finite".into()));
        }
        if coupling.norm() == 0.0 {
            return Err(invalid("zero coupling leaves the terminal disconnected".into()));
        }
        if !field.is_finite() {
            return Err(invalid(format!("field must be finite, got {field}")));
        }
        Ok(Self {
            label,
            node,
            coupling,
            epsilon,
            field,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// 1-based attachment node.
    pub fn node(&self) -> usize {
        self.node
    }

    /// The product `εξ`.
    pub fn coupling(&self) -> C64 {
        self.coupling
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn xi(&self) -> C64 {
        self.coupling / self.epsilon
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn with_field(&self, field: f64) -> Result<Self> {
        Self::scaled(self.label.clone(), self.node, self.epsilon, self.xi(), field)
    }

    /// Replaces the product `εξ`, keeping `ε`.
    pub fn with_coupling(&self, coupling: C64) -> Result<Self> {
        Self::scaled(
            self.label.clone(),
            self.node,
            self.epsilon,
            coupling / self.epsilon,
            self.field,
        )
    }
}

/// Label of one single-excitation basis state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    Terminal(String),
    /// 1-based network node.
    Node(usize),
    /// Network eigenmode, by ascending index into the network spectrum.
    Mode(usize),
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisLabel::Terminal(l) => write!(f, "{l}"),
            BasisLabel::Node(n) => write!(f, "node{n}"),
            BasisLabel::Mode(k) => write!(f, "mode{k}"),
        }
    }
}

/// A network together with its ordered terminals.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    network: SpinNetwork,
    terminals: Vec<Terminal>,
}

impl SystemSpec {
    pub fn new(network: SpinNetwork, terminals: Vec<Terminal>) -> Result<Self> {
        let mut labels = HashSet::new();
        for t in &terminals {
            if !labels.insert(t.label()) {
                return Err(Error::InvalidTerminal {
                    label: t.label().to_string(),
                    reason: "duplicate label".into(),
                });
            }
            if t.node() > network.node_count() {
                return Err(Error::InvalidTerminal {
                    label: t.label().to_string(),
                    reason: format!("attachment node {} outside 1..={}", t.node(), network.node_count()),
                });
            }
        }
        Ok(Self { network, terminals })
    }

    pub fn network(&self) -> &SpinNetwork {
        &self.network
    }

    pub fn terminals(&self) -> &[Terminal] {
        &self.terminals
    }

    pub fn terminal(&self, label: &str) -> Result<&Terminal> {
        self.terminals
            .iter()
            .find(|t| t.label() == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Position of a terminal in the basis (equal to its declaration index).
    pub fn terminal_index(&self, label: &str) -> Result<usize> {
        self.terminals
            .iter()
            .position(|t| t.label() == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Basis position of a 1-based network node.
    pub fn node_index(&self, node: usize) -> Result<usize> {
        self.network.check_node(node)?;
        Ok(self.terminals.len() + node - 1)
    }

    pub fn dim(&self) -> usize {
        self.terminals.len() + self.network.node_count()
    }

    pub fn basis_labels(&self) -> Vec<BasisLabel> {
        self.terminals
            .iter()
            .map(|t| BasisLabel::Terminal(t.label().to_string()))
            .chain((1..=self.network.node_count()).map(BasisLabel::Node))
            .collect()
    }

    /// Same network, replaced terminal list.
    pub fn with_terminals(&self, terminals: Vec<Terminal>) -> Result<Self> {
        Self::new(self.network.clone(), terminals)
    }

    /// Copy with one terminal replaced by `f(terminal)`.
    pub fn map_terminal(&self, label: &str, f: impl FnOnce(&Terminal) -> Result<Terminal>) -> Result<Self> {
        let idx = self.terminal_index(label)?;
        let mut terminals = self.terminals.clone();
        terminals[idx] = f(&terminals[idx])?;
        self.with_terminals(terminals)
    }

    /// Sub-system keeping only the named terminals, in the given order.
    pub fn restrict(&self, labels: &[&str]) -> Result<Self> {
        let terminals = labels
            .iter()
            .map(|l| self.terminal(l).cloned())
            .collect::<Result<Vec<_>>>()?;
        self.with_terminals(terminals)
    }
}

/// Single-excitation Hamiltonian of the whole system in the basis of
/// [`SystemSpec::basis_labels`].
pub fn full_hamiltonian(spec: &SystemSpec) -> DMatrix<C64> {
    let m = spec.terminals.len();
    let dim = spec.dim();
    let mut h = DMatrix::<C64>::zeros(dim, dim);
    for e in spec.network.edges() {
        let w = C64::new(e.weight, 0.0);
        h[(m + e.a, m + e.b)] = w;
        h[(m + e.b, m + e.a)] = w;
    }
    for (alpha, t) in spec.terminals.iter().enumerate() {
        let site = m + t.node() - 1;
        h[(alpha, alpha)] = C64::new(t.field(), 0.0);
        h[(alpha, site)] = t.coupling();
        h[(site, alpha)] = t.coupling().conj();
    }
    h
}

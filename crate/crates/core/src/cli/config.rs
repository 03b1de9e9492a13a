//! Scenario files.
//!
//! ```toml
//! task = "simulate"
//!
//! [network]
//! kind = "chain"          # chain | cycle | edge_list
//! size = 30
//! # edges = [[1, 2, 1.0], [2, 3, 0.5]]   # edge_list only, 1-based
//!
//! [[terminals]]
//! label = "s"
//! node = 2
//! epsilon_xi = 0.01       # or [re, im]
//! # omega = 1.75          # optional when lambda_mode_index is set
//!
//! [task_params]
//! source = "s"
//! target = "d"
//! lambda_mode_index = 5   # 1-based, counted from the top of the spectrum
//! calibrate = true
//!
//! [output]
//! path = "out"
//! format = "csv"          # csv | json
//! include_amplitudes = false
//! plot = true
//! ```

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::network::{SpinNetwork, SystemSpec, Terminal};
use crate::protocol::FreeParameter;

/// A config error with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub field: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for SchemaError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Spectrum,
    Simulate,
    Calibrate,
    Route,
    Plan,
    Entangle,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Spectrum => "spectrum",
            Task::Simulate => "simulate",
            Task::Calibrate => "calibrate",
            Task::Route => "route",
            Task::Plan => "plan",
            Task::Entangle => "entangle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Chain,
    Cycle,
    EdgeList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    pub size: usize,
    #[serde(default)]
    pub edges: Option<Vec<(usize, usize, f64)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coupling {
    Real(f64),
    Complex([f64; 2]),
}

impl Coupling {
    pub fn value(self) -> C64 {
        match self {
            Coupling::Real(x) => C64::new(x, 0.0),
            Coupling::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminalConfig {
    pub label: String,
    pub node: usize,
    pub epsilon_xi: Coupling,
    #[serde(default)]
    pub omega: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParameterConfig {
    SourceField,
    DestinationField,
    SourceCoupling,
}

impl From<FreeParameterConfig> for FreeParameter {
    fn from(p: FreeParameterConfig) -> Self {
        match p {
            FreeParameterConfig::SourceField => FreeParameter::SourceField,
            FreeParameterConfig::DestinationField => FreeParameter::DestinationField,
            FreeParameterConfig::SourceCoupling => FreeParameter::SourceCoupling,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolConfig {
    Bell,
    WNonresonant,
    WResonant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageTimingConfig {
    #[default]
    Analytic,
    Refined,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub min_mutual_sep: Option<f64>,
    pub min_spectrum_sep: Option<f64>,
    pub max_time: Option<f64>,
    /// Defaults to the source terminal's `|εξ|`.
    pub coupling: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Omega,
    EpsilonXi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub terminal: String,
    #[serde(default = "default_sweep_parameter")]
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

fn default_sweep_parameter() -> SweepParameter {
    SweepParameter::Omega
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    pub t_max: Option<f64>,
    pub n_points: Option<usize>,
    pub source: Option<String>,
    pub target: Option<String>,
    pub lambda_mode_index: Option<usize>,
    #[serde(default)]
    pub calibrate: bool,
    pub free_parameter: Option<FreeParameterConfig>,
    pub protocol: Option<ProtocolConfig>,
    #[serde(default)]
    pub stage_timing: StageTimingConfig,
    pub constraints: Option<ConstraintsConfig>,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory, relative to the working directory.
    #[serde(default = "default_output_path")]
    pub path: String,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub include_amplitudes: bool,
    #[serde(default)]
    pub plot: bool,
}

fn default_output_path() -> String {
    ".".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            path: default_output_path(),
            format: OutputFormat::Csv,
            include_amplitudes: false,
            plot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub task: Option<Task>,
    pub network: NetworkConfig,
    #[serde(default)]
    pub terminals: Vec<TerminalConfig>,
    #[serde(default)]
    pub task_params: TaskParams,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SchemaError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SchemaError::new("", e.to_string().trim_end()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), SchemaError> {
        self.build_network()?;
        let n = self.network.size;
        for (i, t) in self.terminals.iter().enumerate() {
            let field = |name: &str| format!("terminals[{i}].{name}");
            if t.node == 0 || t.node > n {
                return Err(SchemaError::new(
                    field("node"),
                    format!("node {} outside 1..={n}", t.node),
                ));
            }
            if self.terminals[..i].iter().any(|o| o.label == t.label) {
                return Err(SchemaError::new(
                    field("label"),
                    format!("duplicate label `{}`", t.label),
                ));
            }
            let c = t.epsilon_xi.value();
            if !(c.re.is_finite() && c.im.is_finite()) || c.norm() == 0.0 {
                return Err(SchemaError::new(field("epsilon_xi"), "must be finite and nonzero"));
            }
            if t.omega.is_none() && self.task_params.lambda_mode_index.is_none() {
                return Err(SchemaError::new(
                    field("omega"),
                    "required unless task_params.lambda_mode_index is set",
                ));
            }
        }
        let p = &self.task_params;
        for (name, label) in [("source", &p.source), ("target", &p.target)] {
            if let Some(l) = label {
                if !self.terminals.iter().any(|t| &t.label == l) {
                    return Err(SchemaError::new(
                        format!("task_params.{name}"),
                        format!("unknown terminal `{l}`"),
                    ));
                }
            }
        }
        if let Some(k) = p.lambda_mode_index {
            if k == 0 || k > n {
                return Err(SchemaError::new(
                    "task_params.lambda_mode_index",
                    format!("{k} outside 1..={n}"),
                ));
            }
        }
        if let Some(t) = p.t_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(SchemaError::new("task_params.t_max", "must be positive"));
            }
        }
        if let Some(np) = p.n_points {
            if np < 2 {
                return Err(SchemaError::new("task_params.n_points", "must be at least 2"));
            }
        }
        if let Some(s) = &p.sweep {
            if !self.terminals.iter().any(|t| t.label == s.terminal) {
                return Err(SchemaError::new(
                    "task_params.sweep.terminal",
                    format!("unknown terminal `{}`", s.terminal),
                ));
            }
            if s.values.is_empty() {
                return Err(SchemaError::new("task_params.sweep.values", "must not be empty"));
            }
        }
        Ok(())
    }

    pub fn build_network(&self) -> Result<SpinNetwork, SchemaError> {
        let net = &self.network;
        let result = match net.kind {
            NetworkKind::Chain => SpinNetwork::chain(net.size),
            NetworkKind::Cycle => SpinNetwork::cycle(net.size),
            NetworkKind::EdgeList => {
                let edges = net
                    .edges
                    .as_ref()
                    .ok_or_else(|| SchemaError::new("network.edges", "required for kind = \"edge_list\""))?;
                SpinNetwork::from_edge_list(net.size, edges)
            }
        };
        if net.kind != NetworkKind::EdgeList && net.edges.is_some() {
            return Err(SchemaError::new(
                "network.edges",
                "only allowed for kind = \"edge_list\"",
            ));
        }
        result.map_err(|e| SchemaError::new("network", e.to_string()))
    }

    /// Builds the system, filling missing fields with `default_omega`.
    pub fn build_spec(&self, default_omega: Option<f64>) -> Result<SystemSpec, SchemaError> {
        let network = self.build_network()?;
        let terminals = self
            .terminals
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let omega = t
                    .omega
                    .or(default_omega)
                    .ok_or_else(|| SchemaError::new(format!("terminals[{i}].omega"), "missing field"))?;
                Terminal::new(t.label.clone(), t.node, t.epsilon_xi.value(), omega)
                    .map_err(|e| SchemaError::new(format!("terminals[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        SystemSpec::new(network, terminals).map_err(|e| SchemaError::new("terminals", e.to_string()))
    }

    /// The configured source label, defaulting to the first terminal.
    pub fn source(&self) -> Result<&str, SchemaError> {
        self.task_params
            .source
            .as_deref()
            .or(self.terminals.first().map(|t| t.label.as_str()))
            .ok_or_else(|| SchemaError::new("terminals", "at least one terminal is required"))
    }

    /// The configured target label, defaulting to the last terminal.
    pub fn target(&self) -> Result<&str, SchemaError> {
        let source = self.source()?;
        self.task_params
            .target
            .as_deref()
            .or(self
                .terminals
                .iter()
                .rev()
                .map(|t| t.label.as_str())
                .find(|l| *l != source))
            .ok_or_else(|| SchemaError::new("task_params.target", "needs a second terminal"))
    }
}

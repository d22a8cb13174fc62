//! Scenario configuration: TOML parsing, validation, parameter sweeps.
//!
//! A config names a scenario kind, a master seed, trial counts, and the
//! sections the kind needs. Unknown keys are rejected. The resolved config
//! (defaults filled, overrides applied) is echoed verbatim into the run
//! manifest, and reparsing that echo reproduces the resolved config.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// TOML syntax or shape error; the message carries line/column context.
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    /// A structural constraint failed; the message names the key.
    #[error("config validation error: {0}")]
    Validation(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Diffusion,
    AgentCapacity,
    Relay,
    Consensus,
    Sweep,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Diffusion => "diffusion",
            Kind::AgentCapacity => "agent-capacity",
            Kind::Relay => "relay",
            Kind::Consensus => "consensus",
            Kind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: Kind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub medium: Option<MediumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relay: Option<RelaySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus: Option<ConsensusSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<CapacitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<DiffusionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_trials() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    /// Diffusion coefficient, um^2/s.
    pub diffusion: f64,
    /// Ambient background concentration, molecules/um^3.
    #[serde(default)]
    pub background: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    /// Receptor count N.
    pub receptors: u32,
    /// Receptor activation threshold k.
    pub threshold: u32,
    /// Dissociation constant K_d, molecules/um^3.
    pub dissociation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSection {
    /// Agents per node n.
    pub agents: u32,
    /// Per-agent production rate r0, molecules/s.
    pub rate: f64,
    /// Mean intra-node sensing distance d0, um.
    pub sense_distance: f64,
    /// Node decision threshold T, agents.
    pub threshold: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelayModeSection {
    Binary,
    Multilevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceBit {
    Off,
    On,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySection {
    /// Hop count h; rows are emitted for every prefix 1..=h.
    pub hops: u32,
    /// Inter-node distance per hop, um.
    pub hop_distance: f64,
    #[serde(default = "default_relay_mode")]
    pub mode: RelayModeSection,
    /// Source bit for binary chains.
    #[serde(default = "default_source_bit")]
    pub source: SourceBit,
    /// Source symbol for multilevel chains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_level: Option<u32>,
    /// Include the source node's own sensing error in the chain.
    #[serde(default)]
    pub include_source_error: bool,
    /// Per-agent activation probability at the source when the parameter
    /// is ON; only used with `include_source_error`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_p0: Option<f64>,
}

fn default_relay_mode() -> RelayModeSection {
    RelayModeSection::Binary
}

fn default_source_bit() -> SourceBit {
    SourceBit::On
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsensusSection {
    /// Node count M.
    pub nodes: u32,
    /// Ring lattice spacing, um.
    pub spacing: f64,
    /// Effective communication radius, um.
    pub range: f64,
    /// Self-sensing distance, um.
    pub self_distance: f64,
    /// Mean of the initial estimates.
    #[serde(default)]
    pub mean: f64,
    /// Standard deviation sigma0 of the initial estimates.
    #[serde(default = "default_stddev")]
    pub stddev: f64,
    /// Communication rounds to run.
    pub iterations: u32,
    /// Monte Carlo replications for the empirical variance.
    #[serde(default = "default_replications")]
    pub replications: u32,
}

fn default_stddev() -> f64 {
    1.0
}

fn default_replications() -> u32 {
    2_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacitySection {
    /// Receptor counts to evaluate.
    pub receptor_counts: Vec<u32>,
    /// Points in the endpoint-clustered occupancy grid.
    #[serde(default = "default_grid_points")]
    pub grid_points: u32,
    /// Bound-gap tolerance for the capacity iteration, bits.
    #[serde(default = "default_tolerance_bits")]
    pub tolerance_bits: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: u64,
}

fn default_grid_points() -> u32 {
    129
}

fn default_tolerance_bits() -> f64 {
    1e-5
}

fn default_max_iterations() -> u64 {
    2_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    /// Distances to evaluate, um.
    pub distances: Vec<f64>,
    /// Times to evaluate, s.
    pub times: Vec<f64>,
    /// Source emission rate, molecules/s.
    #[serde(default = "default_stddev")]
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMode {
    /// Cartesian product of the axes, first axis outermost.
    #[default]
    Product,
    /// Axes of equal length advanced together.
    Zip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub mode: SweepMode,
    /// Base scenario kind; required when the top-level kind is `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Kind>,
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path of the parameter to vary, e.g. `node.agents`.
    pub param: String,
    pub values: Vec<toml::Value>,
}

/// Parse and validate a scenario configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let config: ScenarioConfig = toml::from_str(text)?;
    validate(&config)?;
    Ok(config)
}

/// Serialize the resolved config for the manifest echo.
pub fn echo(config: &ScenarioConfig) -> String {
    toml::to_string(config).expect("resolved config always serializes")
}

/// The kind whose handler will run: the base scenario for sweeps.
pub fn effective_kind(config: &ScenarioConfig) -> Kind {
    if config.kind == Kind::Sweep {
        config
            .sweep
            .as_ref()
            .and_then(|s| s.scenario)
            .unwrap_or(Kind::Sweep)
    } else {
        config.kind
    }
}

fn validate(config: &ScenarioConfig) -> Result<(), ConfigError> {
    if config.trials < 1 {
        return Err(invalid("trials: must be at least 1"));
    }
    let base = effective_kind(config);
    if config.kind == Kind::Sweep {
        let sweep = config
            .sweep
            .as_ref()
            .ok_or_else(|| invalid("sweep: section required when kind = \"sweep\""))?;
        match sweep.scenario {
            None => {
                return Err(invalid(
                    "sweep.scenario: required when kind = \"sweep\"",
                ))
            }
            Some(Kind::Sweep) => {
                return Err(invalid("sweep.scenario: must name a non-sweep kind"))
            }
            Some(_) => {}
        }
    }
    require_sections(config, base)?;
    if let Some(sweep) = &config.sweep {
        validate_sweep(config, sweep)?;
    }
    if base == Kind::Relay {
        let relay = config.relay.as_ref().expect("checked above");
        if relay.mode == RelayModeSection::Multilevel && relay.source_level.is_none() {
            return Err(invalid(
                "relay.source_level: required when relay.mode = \"multilevel\"",
            ));
        }
        if relay.include_source_error && relay.source_p0.is_none() {
            return Err(invalid(
                "relay.source_p0: required when relay.include_source_error = true",
            ));
        }
    }
    Ok(())
}

fn require_sections(config: &ScenarioConfig, base: Kind) -> Result<(), ConfigError> {
    let need = |present: bool, section: &str| {
        if present {
            Ok(())
        } else {
            Err(invalid(format!(
                "{section}: section required for kind \"{}\"",
                base.as_str()
            )))
        }
    };
    match base {
        Kind::Diffusion => {
            need(config.medium.is_some(), "medium")?;
            need(config.diffusion.is_some(), "diffusion")?;
        }
        Kind::AgentCapacity => {
            need(config.capacity.is_some(), "capacity")?;
        }
        Kind::Relay => {
            need(config.medium.is_some(), "medium")?;
            need(config.agent.is_some(), "agent")?;
            need(config.node.is_some(), "node")?;
            need(config.relay.is_some(), "relay")?;
        }
        Kind::Consensus => {
            need(config.medium.is_some(), "medium")?;
            need(config.consensus.is_some(), "consensus")?;
        }
        Kind::Sweep => {}
    }
    Ok(())
}

fn validate_sweep(config: &ScenarioConfig, sweep: &SweepSection) -> Result<(), ConfigError> {
    if sweep.axes.is_empty() {
        return Err(invalid("sweep.axes: needs at least one axis"));
    }
    for axis in &sweep.axes {
        if axis.values.is_empty() {
            return Err(invalid(format!(
                "sweep axis {:?}: needs at least one value",
                axis.param
            )));
        }
    }
    if sweep.mode == SweepMode::Zip {
        let len = sweep.axes[0].values.len();
        if sweep.axes.iter().any(|a| a.values.len() != len) {
            return Err(invalid(
                "sweep.axes: zip mode requires equal-length axes",
            ));
        }
    }
    // Every (param, value) pair must be applicable.
    let mut probe = config.clone();
    for axis in &sweep.axes {
        for value in &axis.values {
            apply_param(&mut probe, &axis.param, value)?;
        }
    }
    Ok(())
}

/// Expand the sweep into fully resolved per-combination configs. Without a
/// sweep section the config itself is the single combination.
pub fn combinations(config: &ScenarioConfig) -> Result<Vec<ScenarioConfig>, ConfigError> {
    let Some(sweep) = &config.sweep else {
        return Ok(vec![config.clone()]);
    };
    let mut combos = Vec::new();
    match sweep.mode {
        SweepMode::Zip => {
            let len = sweep.axes[0].values.len();
            for i in 0..len {
                let mut combo = config.clone();
                for axis in &sweep.axes {
                    apply_param(&mut combo, &axis.param, &axis.values[i])?;
                }
                combos.push(combo);
            }
        }
        SweepMode::Product => {
            let total: usize = sweep.axes.iter().map(|a| a.values.len()).product();
            for mut index in 0..total {
                let mut combo = config.clone();
                // First axis outermost.
                for axis in sweep.axes.iter().rev() {
                    let pick = index % axis.values.len();
                    index /= axis.values.len();
                    apply_param(&mut combo, &axis.param, &axis.values[pick])?;
                }
                combos.push(combo);
            }
        }
    }
    Ok(combos)
}

fn as_f64(param: &str, value: &toml::Value) -> Result<f64, ConfigError> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => Err(invalid(format!(
            "sweep axis {param:?}: expected a number, got {other}"
        ))),
    }
}

fn as_u32(param: &str, value: &toml::Value) -> Result<u32, ConfigError> {
    match value {
        toml::Value::Integer(i) if *i >= 0 && *i <= u32::MAX as i64 => Ok(*i as u32),
        other => Err(invalid(format!(
            "sweep axis {param:?}: expected a nonnegative integer, got {other}"
        ))),
    }
}

fn apply_param(
    config: &mut ScenarioConfig,
    param: &str,
    value: &toml::Value,
) -> Result<(), ConfigError> {
    let missing =
        |section: &str| invalid(format!("sweep axis {param:?}: section [{section}] not present"));
    match param {
        "medium.diffusion" => {
            config.medium.as_mut().ok_or_else(|| missing("medium"))?.diffusion =
                as_f64(param, value)?;
        }
        "medium.background" => {
            config.medium.as_mut().ok_or_else(|| missing("medium"))?.background =
                as_f64(param, value)?;
        }
        "agent.receptors" => {
            config.agent.as_mut().ok_or_else(|| missing("agent"))?.receptors =
                as_u32(param, value)?;
        }
        "agent.threshold" => {
            config.agent.as_mut().ok_or_else(|| missing("agent"))?.threshold =
                as_u32(param, value)?;
        }
        "agent.dissociation" => {
            config.agent.as_mut().ok_or_else(|| missing("agent"))?.dissociation =
                as_f64(param, value)?;
        }
        "node.agents" => {
            config.node.as_mut().ok_or_else(|| missing("node"))?.agents = as_u32(param, value)?;
        }
        "node.rate" => {
            config.node.as_mut().ok_or_else(|| missing("node"))?.rate = as_f64(param, value)?;
        }
        "node.sense_distance" => {
            config.node.as_mut().ok_or_else(|| missing("node"))?.sense_distance =
                as_f64(param, value)?;
        }
        "node.threshold" => {
            config.node.as_mut().ok_or_else(|| missing("node"))?.threshold =
                as_u32(param, value)?;
        }
        "relay.hops" => {
            config.relay.as_mut().ok_or_else(|| missing("relay"))?.hops = as_u32(param, value)?;
        }
        "relay.hop_distance" => {
            config.relay.as_mut().ok_or_else(|| missing("relay"))?.hop_distance =
                as_f64(param, value)?;
        }
        "consensus.nodes" => {
            config.consensus.as_mut().ok_or_else(|| missing("consensus"))?.nodes =
                as_u32(param, value)?;
        }
        "consensus.spacing" => {
            config.consensus.as_mut().ok_or_else(|| missing("consensus"))?.spacing =
                as_f64(param, value)?;
        }
        "consensus.range" => {
            config.consensus.as_mut().ok_or_else(|| missing("consensus"))?.range =
                as_f64(param, value)?;
        }
        "consensus.self_distance" => {
            config.consensus.as_mut().ok_or_else(|| missing("consensus"))?.self_distance =
                as_f64(param, value)?;
        }
        "consensus.iterations" => {
            config.consensus.as_mut().ok_or_else(|| missing("consensus"))?.iterations =
                as_u32(param, value)?;
        }
        other => {
            return Err(invalid(format!(
                "sweep axis {other:?}: unknown parameter path"
            )));
        }
    }
    Ok(())
}

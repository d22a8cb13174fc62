//! Intra-node collective sensing.
//!
//! A node is a colony of `n` agents close enough that all of them see the
//! same steady-state concentration, parameterized by a common mean sensing
//! distance. Active agents emit at a fixed per-agent rate, so the colony
//! concentration encodes the active count on a ladder of `n + 1` evenly
//! spaced levels; decoding is nearest-level quantization.

use crate::agent::{
    activation_prob, inverse_occupancy, occupancy_prob, sample_reading, AgentConfig,
};
use crate::diffusion::{greens_steady, Medium};
use crate::error::{domain, Result};
use crate::rng::Stream;

/// Configuration of one colony.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeConfig {
    /// Agent count n.
    pub agents: u32,
    /// Per-agent reception channel.
    pub agent: AgentConfig,
    /// Per-agent molecule production rate, molecules/s.
    pub rate: f64,
    /// Mean intra-node sensing distance, um.
    pub sense_distance: f64,
    /// Node decision threshold T, in agents.
    pub threshold: u32,
}

impl NodeConfig {
    pub fn new(
        agents: u32,
        agent: AgentConfig,
        rate: f64,
        sense_distance: f64,
        threshold: u32,
    ) -> Result<Self> {
        if agents < 1 {
            return Err(domain("node needs at least one agent"));
        }
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(domain(format!(
                "per-agent rate must be positive and finite, got {rate}"
            )));
        }
        if !(sense_distance > 0.0) || !sense_distance.is_finite() {
            return Err(domain(format!(
                "sensing distance must be positive and finite, got {sense_distance}"
            )));
        }
        if threshold < 1 || threshold > agents {
            return Err(domain(format!(
                "decision threshold {threshold} out of range 1..={agents}"
            )));
        }
        Ok(Self {
            agents,
            agent,
            rate,
            sense_distance,
            threshold,
        })
    }
}

/// Outcome of one collective sensing phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeState {
    /// Number of agents activated by the environment.
    pub active: u32,
    pub belief: Belief,
}

/// A node-level belief: a binary decision or a decoded level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Belief {
    Off,
    On,
    Level(u32),
}

impl Belief {
    pub fn is_on(self) -> bool {
        match self {
            Belief::Off => false,
            Belief::On => true,
            Belief::Level(l) => l > 0,
        }
    }
}

/// How agents observe the colony concentration during belief formation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensingMode {
    /// Agents read the exact steady-state concentration.
    Ideal,
    /// Each agent takes a single receptor reading of the concentration and
    /// estimates from that alone.
    Noisy,
}

/// Nearest-level quantizer for a ladder of `max_level + 1` concentrations
/// spaced `spacing` apart above `background`. Ties round down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelQuantizer {
    pub spacing: f64,
    pub background: f64,
    pub max_level: u32,
}

impl LevelQuantizer {
    pub fn new(spacing: f64, background: f64, max_level: u32) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(domain(format!(
                "level spacing must be positive and finite, got {spacing}"
            )));
        }
        if !(background >= 0.0) {
            return Err(domain(format!(
                "background must be nonnegative, got {background}"
            )));
        }
        Ok(Self {
            spacing,
            background,
            max_level,
        })
    }

    /// The quantizer a node applies to its own colony concentration, with
    /// level spacing `rate * G(sense_distance)`.
    pub fn intra_node(node: &NodeConfig, medium: &Medium) -> Result<Self> {
        Self::at_distance(node, medium, node.sense_distance)
    }

    /// The quantizer for signals arriving from a transmitter at `distance`,
    /// with level spacing `rate * G(distance)`.
    pub fn at_distance(node: &NodeConfig, medium: &Medium, distance: f64) -> Result<Self> {
        let spacing = node.rate * greens_steady(distance, medium.diffusion)?;
        Self::new(spacing, medium.background, node.agents)
    }

    /// Decode a concentration to the nearest level, ties toward the lower
    /// level, clamped to `0..=max_level`.
    pub fn quantize(&self, concentration: f64) -> u32 {
        let x = (concentration - self.background) / self.spacing;
        let level = (x - 0.5).ceil();
        if level <= 0.0 {
            0
        } else if level >= self.max_level as f64 {
            self.max_level
        } else {
            level as u32
        }
    }

    /// Exact concentration of level `m`.
    pub fn level_concentration(&self, level: u32) -> f64 {
        self.background + level as f64 * self.spacing
    }
}

/// Number of agents activated when each senses the environment
/// independently with probability `p_env`.
pub fn sense_environment(node: &NodeConfig, p_env: f64, stream: &mut Stream) -> Result<u32> {
    if !(0.0..=1.0).contains(&p_env) {
        return Err(domain(format!(
            "environmental activation probability out of [0, 1]: {p_env}"
        )));
    }
    Ok(stream.binomial(node.agents, p_env))
}

/// Steady-state type-I concentration inside the colony when `active` agents
/// emit: `active * rate * G(sense_distance) + background`.
pub fn intranode_concentration(active: u32, node: &NodeConfig, medium: &Medium) -> Result<f64> {
    if active > node.agents {
        return Err(domain(format!(
            "active count {active} exceeds colony size {}",
            node.agents
        )));
    }
    let g = greens_steady(node.sense_distance, medium.diffusion)?;
    Ok(active as f64 * node.rate * g + medium.background)
}

/// Estimate the number of active agents from a sensed concentration; the
/// exact inverse of [`intranode_concentration`] on noiseless inputs.
pub fn estimate_active_count(concentration: f64, node: &NodeConfig, medium: &Medium) -> Result<u32> {
    if !(concentration >= 0.0) {
        return Err(domain(format!(
            "concentration must be nonnegative, got {concentration}"
        )));
    }
    Ok(LevelQuantizer::intra_node(node, medium)?.quantize(concentration))
}

/// Decode a concentration to one of the node's `n + 1` transmission levels.
/// Identical quantization rule to [`estimate_active_count`].
pub fn quantize_level(concentration: f64, node: &NodeConfig, medium: &Medium) -> Result<u32> {
    estimate_active_count(concentration, node, medium)
}

/// One agent's level estimate from a single noisy reading of `concentration`.
pub(crate) fn agent_level_estimate(
    concentration: f64,
    agent: &AgentConfig,
    quantizer: &LevelQuantizer,
    stream: &mut Stream,
) -> Result<u32> {
    let p = occupancy_prob(concentration, agent.dissociation)?;
    let reading = sample_reading(p, agent.receptors, stream)?;
    if reading.p_hat >= 1.0 {
        return Ok(quantizer.max_level);
    }
    let estimate = inverse_occupancy(reading.p_hat, agent.dissociation)?;
    Ok(quantizer.quantize(estimate))
}

/// Run one full sensing phase: agents sense the environment, the colony
/// concentration forms, and the node decides ON/OFF against its threshold.
///
/// In ideal mode every agent recovers the exact active count, so the node
/// decision is `active >= threshold`. In noisy mode each agent estimates
/// the count from its own single reading and the node takes the strict
/// majority of agent beliefs (ties fall to OFF).
pub fn collective_decision(
    node: &NodeConfig,
    p_env: f64,
    medium: &Medium,
    mode: SensingMode,
    stream: &mut Stream,
) -> Result<NodeState> {
    let active = sense_environment(node, p_env, stream)?;
    let concentration = intranode_concentration(active, node, medium)?;
    let on = match mode {
        SensingMode::Ideal => {
            let estimate = estimate_active_count(concentration, node, medium)?;
            estimate >= node.threshold
        }
        SensingMode::Noisy => {
            let quantizer = LevelQuantizer::intra_node(node, medium)?;
            let mut votes = 0u32;
            for _ in 0..node.agents {
                let estimate =
                    agent_level_estimate(concentration, &node.agent, &quantizer, stream)?;
                if estimate >= node.threshold {
                    votes += 1;
                }
            }
            2 * votes > node.agents
        }
    };
    Ok(NodeState {
        active,
        belief: if on { Belief::On } else { Belief::Off },
    })
}

/// Probability that the ideal-mode decision comes out ON: the binomial tail
/// `Pr(Binomial(n, p_env) >= threshold)`.
pub fn ideal_decision_prob(node: &NodeConfig, p_env: f64) -> Result<f64> {
    activation_prob(node.agents, node.threshold, p_env)
}

//! Multihop relaying over a preformed path of identical nodes.
//!
//! Every hop regenerates: the receiving colony decodes the incoming
//! steady-state concentration and re-emits its decision on the opposite
//! type-II molecule, so a chain composes per-hop transition matrices. The
//! analytic matrices come from exact binomial tails; the Monte Carlo path
//! simulates every receptor and must agree within sampling error.

use crate::agent::{
    activation_prob, binomial_upper_tail, inverse_occupancy, occupancy_prob, sample_reading,
};
use crate::diffusion::{greens_steady, Medium};
use crate::error::{domain, Result};
use crate::node::{agent_level_estimate, LevelQuantizer, NodeConfig};
use crate::rng::Stream;
use rayon::prelude::*;

/// Inter-node signaling molecule; consecutive hops alternate types so a
/// node never transmits on the type it listens to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MoleculeType {
    TypeIiA,
    TypeIiB,
}

/// Symbol alphabet carried by the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayMode {
    /// ON/OFF; an ON decision activates the whole colony.
    Binary,
    /// The decoded level in `0..=n` is re-emitted by that many agents.
    Multilevel,
}

/// What the source node feeds into hop one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinarySource {
    /// The source transmits exactly this bit.
    Fixed(bool),
    /// The source first senses the environment: `truth` is the actual
    /// state and `p_env` the per-agent activation probability it induces,
    /// so the source itself may already transmit the wrong bit.
    Sensed { truth: bool, p_env: f64 },
}

impl BinarySource {
    pub fn truth(self) -> bool {
        match self {
            BinarySource::Fixed(bit) => bit,
            BinarySource::Sensed { truth, .. } => truth,
        }
    }
}

/// A relay path of `h` hops between identical colonies.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayChain {
    /// Inter-node distance per hop, um.
    pub hop_distances: Vec<f64>,
    pub node: NodeConfig,
    pub medium: Medium,
    pub mode: RelayMode,
}

impl RelayChain {
    /// A chain of `hops` equal hops of length `hop_distance`.
    pub fn uniform(
        hops: u32,
        hop_distance: f64,
        node: NodeConfig,
        medium: Medium,
        mode: RelayMode,
    ) -> Result<Self> {
        Self::new(vec![hop_distance; hops as usize], node, medium, mode)
    }

    pub fn new(
        hop_distances: Vec<f64>,
        node: NodeConfig,
        medium: Medium,
        mode: RelayMode,
    ) -> Result<Self> {
        if hop_distances.is_empty() {
            return Err(domain("relay chain needs at least one hop"));
        }
        for (i, d) in hop_distances.iter().enumerate() {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(domain(format!(
                    "hop {i} distance must be positive and finite, got {d}"
                )));
            }
        }
        Ok(Self {
            hop_distances,
            node,
            medium,
            mode,
        })
    }

    pub fn hops(&self) -> usize {
        self.hop_distances.len()
    }

    /// Molecule type carried by hop `hop` (0-based). Alternates so each
    /// node receives on one type and transmits on the other.
    pub fn hop_type(&self, hop: usize) -> MoleculeType {
        if hop.is_multiple_of(2) {
            MoleculeType::TypeIiA
        } else {
            MoleculeType::TypeIiB
        }
    }
}

/// Row-stochastic 2x2 transition of one hop: rows index the transmitted
/// state (OFF, ON), columns the state decided at the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopChannel {
    pub matrix: [[f64; 2]; 2],
}

impl HopChannel {
    pub fn identity() -> Self {
        Self {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Apply `self` first, then `next`.
    pub fn compose(&self, next: &HopChannel) -> Self {
        let a = &self.matrix;
        let b = &next.matrix;
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { matrix: out }
    }

    /// Probability that the receiver decides the opposite of `source_on`.
    pub fn error_given_source(&self, source_on: bool) -> f64 {
        let row = self.matrix[source_on as usize];
        row[!source_on as usize]
    }
}

/// Analytic transition of hop `hop`: the ON row drives the receiver at
/// `c = n r0 G(d_hop) + c_bg`, the OFF row at the bare background, and both
/// pass through receptor activation and the node threshold as exact
/// binomial tails.
pub fn hop_transition(chain: &RelayChain, hop: usize) -> Result<HopChannel> {
    let d = *chain
        .hop_distances
        .get(hop)
        .ok_or_else(|| domain(format!("hop index {hop} out of range")))?;
    let node = &chain.node;
    let g = greens_steady(d, chain.medium.diffusion)?;
    let c_on = node.agents as f64 * node.rate * g + chain.medium.background;
    let c_off = chain.medium.background;

    let decide_on = |c: f64| -> Result<f64> {
        let p0 = occupancy_prob(c, node.agent.dissociation)?;
        let p_agent = activation_prob(node.agent.receptors, node.agent.threshold, p0)?;
        binomial_upper_tail(node.agents, node.threshold, p_agent)
    };

    let on_given_off = decide_on(c_off)?;
    let on_given_on = decide_on(c_on)?;
    Ok(HopChannel {
        matrix: [
            [1.0 - on_given_off, on_given_off],
            [1.0 - on_given_on, on_given_on],
        ],
    })
}

/// Cumulative compositions: entry `h - 1` is the transition of the first
/// `h` hops, so one pass yields the error at every prefix length.
pub fn end_to_end_matrix_prefixes(chain: &RelayChain) -> Result<Vec<HopChannel>> {
    let mut prefixes = Vec::with_capacity(chain.hops());
    let mut total = HopChannel::identity();
    for hop in 0..chain.hops() {
        total = total.compose(&hop_transition(chain, hop)?);
        prefixes.push(total);
    }
    Ok(prefixes)
}

/// Composition of all hop transitions.
pub fn end_to_end_matrix(chain: &RelayChain) -> Result<HopChannel> {
    Ok(*end_to_end_matrix_prefixes(chain)?
        .last()
        .expect("chain has at least one hop"))
}

/// Probability that the terminal node decides differently from the source
/// bit, with the source transmitting its bit exactly.
pub fn end_to_end_error(chain: &RelayChain, source_on: bool) -> Result<f64> {
    Ok(end_to_end_matrix(chain)?.error_given_source(source_on))
}

/// End-to-end error against `truth` when the source transmits ON with
/// probability `p_transmit_on` (its own sensing may already be wrong).
pub fn end_to_end_error_given_tx(
    chain: &RelayChain,
    truth_on: bool,
    p_transmit_on: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_transmit_on) {
        return Err(domain(format!(
            "transmit probability out of [0, 1]: {p_transmit_on}"
        )));
    }
    let m = end_to_end_matrix(chain)?.matrix;
    let p_final_on = (1.0 - p_transmit_on) * m[0][1] + p_transmit_on * m[1][1];
    Ok(if truth_on {
        1.0 - p_final_on
    } else {
        p_final_on
    })
}

/// `log2(n + 1)` bits carried by one use of an `n`-agent node.
pub fn bits_per_use(agents: u32) -> f64 {
    ((agents + 1) as f64).log2()
}

/// Aggregated outcome of a batch of simulated relay trials.
#[derive(Debug, Clone)]
pub struct RelaySimulation {
    pub trials: u64,
    /// Per-trial symbol trace: entry 0 is what the source transmitted,
    /// entry `j >= 1` the symbol decided at node `j + 1`.
    pub traces: Vec<Vec<u32>>,
    /// Fraction of trials whose symbol after hop `j + 1` differs from the
    /// source truth.
    pub per_hop_error: Vec<f64>,
    /// Mismatch rate at the terminal node.
    pub error_rate: f64,
}

fn aggregate(traces: Vec<Vec<u32>>, truth: u32, hops: usize, trials: u64) -> RelaySimulation {
    let mut mismatches = vec![0u64; hops];
    for trace in &traces {
        for (hop, &state) in trace.iter().skip(1).enumerate() {
            if state != truth {
                mismatches[hop] += 1;
            }
        }
    }
    let per_hop_error: Vec<f64> = mismatches
        .iter()
        .map(|&m| m as f64 / trials as f64)
        .collect();
    let error_rate = *per_hop_error.last().unwrap_or(&0.0);
    RelaySimulation {
        trials,
        traces,
        per_hop_error,
        error_rate,
    }
}

/// Simulate `trials` independent binary relays of the chain.
///
/// Trial `t` draws from the substream `(seed, t)`, so the aggregate is
/// reproducible bit for bit at any worker count; error counts are integer
/// sums and independent of evaluation order.
pub fn simulate_relay(
    chain: &RelayChain,
    source: BinarySource,
    trials: u64,
    seed: u64,
) -> Result<RelaySimulation> {
    if trials < 1 {
        return Err(domain("need at least one trial"));
    }
    if let BinarySource::Sensed { p_env, .. } = source {
        if !(0.0..=1.0).contains(&p_env) {
            return Err(domain(format!(
                "source sensing probability out of [0, 1]: {p_env}"
            )));
        }
    }
    let traces: Vec<Vec<u32>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::derive(seed, t);
            run_binary_trial(chain, source, &mut stream)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(
        traces,
        source.truth() as u32,
        chain.hops(),
        trials,
    ))
}

fn run_binary_trial(
    chain: &RelayChain,
    source: BinarySource,
    stream: &mut Stream,
) -> Result<Vec<u32>> {
    let node = &chain.node;
    let mut tx_on = match source {
        BinarySource::Fixed(bit) => bit,
        BinarySource::Sensed { p_env, .. } => {
            stream.binomial(node.agents, p_env) >= node.threshold
        }
    };
    let mut trace = Vec::with_capacity(chain.hops() + 1);
    trace.push(tx_on as u32);
    for &d in &chain.hop_distances {
        let g = greens_steady(d, chain.medium.diffusion)?;
        let c = if tx_on {
            node.agents as f64 * node.rate * g + chain.medium.background
        } else {
            chain.medium.background
        };
        let p0 = occupancy_prob(c, node.agent.dissociation)?;
        let mut active = 0u32;
        for _ in 0..node.agents {
            let reading = sample_reading(p0, node.agent.receptors, stream)?;
            if reading.count >= node.agent.threshold {
                active += 1;
            }
        }
        tx_on = active >= node.threshold;
        trace.push(tx_on as u32);
    }
    Ok(trace)
}

/// Decode a received concentration at hop `hop` to the transmitted level;
/// the node then re-emits with that many active agents.
pub fn relay_level(received: f64, chain: &RelayChain, hop: usize) -> Result<u32> {
    if !(received >= 0.0) {
        return Err(domain(format!(
            "received concentration must be nonnegative, got {received}"
        )));
    }
    let d = *chain
        .hop_distances
        .get(hop)
        .ok_or_else(|| domain(format!("hop index {hop} out of range")))?;
    let quantizer = LevelQuantizer::at_distance(&chain.node, &chain.medium, d)?;
    Ok(quantizer.quantize(received))
}

/// Analytic `(n + 1) x (n + 1)` symbol transition of hop `hop`: entry
/// `[m][t]` is the probability the receiver decodes level `t` when the
/// transmitter emits level `m`.
///
/// A node's decoded level is the `threshold`-th largest of its agents'
/// individual level estimates, so every entry reduces to binomial tails of
/// the per-agent reading channel.
pub fn level_transition_matrix(chain: &RelayChain, hop: usize) -> Result<Vec<Vec<f64>>> {
    let d = *chain
        .hop_distances
        .get(hop)
        .ok_or_else(|| domain(format!("hop index {hop} out of range")))?;
    let node = &chain.node;
    let agent = &node.agent;
    let quantizer = LevelQuantizer::at_distance(node, &chain.medium, d)?;
    let n = node.agents;
    let receptors = agent.receptors;

    // Monotone decode table: reading count -> level estimate.
    let decode: Vec<u32> = (0..=receptors)
        .map(|i| -> Result<u32> {
            if i == receptors {
                return Ok(n);
            }
            let p_hat = i as f64 / receptors as f64;
            let estimate = inverse_occupancy(p_hat, agent.dissociation)?;
            Ok(quantizer.quantize(estimate))
        })
        .collect::<Result<_>>()?;

    // Smallest reading count that decodes to at least level t.
    let first_reading_at_least = |t: u32| -> Option<u32> {
        decode.iter().position(|&lvl| lvl >= t).map(|i| i as u32)
    };

    let mut matrix = Vec::with_capacity(n as usize + 1);
    for m in 0..=n {
        let c = quantizer.level_concentration(m);
        let p0 = occupancy_prob(c, agent.dissociation)?;
        // P(node level >= t) = P(Binomial(n, P(agent level >= t)) >= T).
        let mut node_at_least = Vec::with_capacity(n as usize + 2);
        for t in 0..=n {
            let p_agent = match first_reading_at_least(t) {
                Some(i) => binomial_upper_tail(receptors, i, p0)?,
                None => 0.0,
            };
            node_at_least.push(binomial_upper_tail(n, node.threshold, p_agent)?);
        }
        node_at_least.push(0.0);
        let row: Vec<f64> = (0..=n as usize)
            .map(|t| (node_at_least[t] - node_at_least[t + 1]).max(0.0))
            .collect();
        matrix.push(row);
    }
    Ok(matrix)
}

/// Cumulative level-transition compositions, one per prefix length.
pub fn end_to_end_level_matrix_prefixes(chain: &RelayChain) -> Result<Vec<Vec<Vec<f64>>>> {
    let size = chain.node.agents as usize + 1;
    let mut total: Vec<Vec<f64>> = (0..size)
        .map(|i| (0..size).map(|j| f64::from(i == j)).collect())
        .collect();
    let mut prefixes = Vec::with_capacity(chain.hops());
    for hop in 0..chain.hops() {
        let step = level_transition_matrix(chain, hop)?;
        let mut next = vec![vec![0.0; size]; size];
        for i in 0..size {
            for s in 0..size {
                let w = total[i][s];
                if w == 0.0 {
                    continue;
                }
                for j in 0..size {
                    next[i][j] += w * step[s][j];
                }
            }
        }
        total = next;
        prefixes.push(total.clone());
    }
    Ok(prefixes)
}

/// Composition of the per-hop level transitions over the whole chain.
pub fn end_to_end_level_matrix(chain: &RelayChain) -> Result<Vec<Vec<f64>>> {
    Ok(end_to_end_level_matrix_prefixes(chain)?
        .pop()
        .expect("chain has at least one hop"))
}

/// Probability the terminal node decodes a different level than the source
/// emitted.
pub fn end_to_end_level_error(chain: &RelayChain, source_level: u32) -> Result<f64> {
    if source_level > chain.node.agents {
        return Err(domain(format!(
            "source level {source_level} exceeds alphabet top {}",
            chain.node.agents
        )));
    }
    let total = end_to_end_level_matrix(chain)?;
    Ok(1.0 - total[source_level as usize][source_level as usize])
}

/// Simulate `trials` multilevel relays; same substream contract as
/// [`simulate_relay`].
pub fn simulate_relay_multilevel(
    chain: &RelayChain,
    source_level: u32,
    trials: u64,
    seed: u64,
) -> Result<RelaySimulation> {
    if trials < 1 {
        return Err(domain("need at least one trial"));
    }
    if source_level > chain.node.agents {
        return Err(domain(format!(
            "source level {source_level} exceeds alphabet top {}",
            chain.node.agents
        )));
    }
    let traces: Vec<Vec<u32>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut stream = Stream::derive(seed, t);
            run_level_trial(chain, source_level, &mut stream)
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(traces, source_level, chain.hops(), trials))
}

fn run_level_trial(
    chain: &RelayChain,
    source_level: u32,
    stream: &mut Stream,
) -> Result<Vec<u32>> {
    let node = &chain.node;
    let mut level = source_level;
    let mut trace = Vec::with_capacity(chain.hops() + 1);
    trace.push(level);
    for &d in &chain.hop_distances {
        let quantizer = LevelQuantizer::at_distance(node, &chain.medium, d)?;
        let c = quantizer.level_concentration(level);
        let mut estimates: Vec<u32> = (0..node.agents)
            .map(|_| agent_level_estimate(c, &node.agent, &quantizer, stream))
            .collect::<Result<_>>()?;
        estimates.sort_unstable_by(|a, b| b.cmp(a));
        level = estimates[node.threshold as usize - 1];
        trace.push(level);
    }
    Ok(trace)
}

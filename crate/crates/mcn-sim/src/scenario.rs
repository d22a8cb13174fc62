//! Scenario orchestration: expand sweeps, run the requested experiment,
//! emit CSV plus a manifest.
//!
//! Reproducibility: combination `c` of a sweep uses master seed
//! `seed + c` (wrapping); Monte Carlo trial `t` within a combination draws
//! from substream `(seed + c, t)`. Aggregation is order-independent, so
//! the CSV bytes do not depend on the worker count.

use crate::config::{
    combinations, echo, effective_kind, ConfigError, Kind, RelayModeSection, ScenarioConfig,
    SourceBit,
};
use crate::manifest::{sha256_hex, unix_now, OutputDigest, RunManifest};
use mcn_core::agent::{channel_capacity, channel_mi, chebyshev_grid, AgentConfig, PriorOnP};
use mcn_core::consensus::{spectral_gap, variance_trajectory, ConsensusNetwork};
use mcn_core::diffusion::{greens_steady, step_response, Medium};
use mcn_core::node::NodeConfig;
use mcn_core::relay::{
    end_to_end_level_matrix_prefixes, end_to_end_matrix_prefixes, simulate_relay,
    simulate_relay_multilevel, BinarySource, RelayChain, RelayMode,
};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] mcn_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 1 config, 2 domain, 3 numeric non-convergence,
    /// 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Core(mcn_core::Error::Domain(_)) => 2,
            RunError::Core(mcn_core::Error::NonConvergence { .. }) => 3,
            RunError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
    pub rows: usize,
}

/// Run a fully resolved configuration, writing `<kind>.csv` and
/// `manifest.toml` under `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunArtifacts, RunError> {
    let started = unix_now();
    let base = effective_kind(config);
    let combos = combinations(config)?;

    let (header, mut rows) = (csv_header(base), Vec::new());
    for (index, combo) in combos.iter().enumerate() {
        let combo_seed = config.seed.wrapping_add(index as u64);
        match base {
            Kind::Diffusion => diffusion_rows(combo, &mut rows)?,
            Kind::AgentCapacity => capacity_rows(combo, &mut rows)?,
            Kind::Relay => relay_rows(combo, combo_seed, &mut rows)?,
            Kind::Consensus => consensus_rows(combo, combo_seed, &mut rows)?,
            Kind::Sweep => unreachable!("validated: sweep always names a base kind"),
        }
    }

    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", base.as_str().replace('-', "_")));
    let mut csv = String::with_capacity(rows.len() * 48 + header.len() + 1);
    csv.push_str(header);
    csv.push('\n');
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    std::fs::write(&csv_path, csv.as_bytes())?;

    let manifest = RunManifest {
        tool: "mcn-sim".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        started_unix: started,
        finished_unix: unix_now(),
        outputs: vec![OutputDigest {
            file: csv_path
                .file_name()
                .expect("csv path has a file name")
                .to_string_lossy()
                .into_owned(),
            sha256: sha256_hex(csv.as_bytes()),
        }],
        config: config.clone(),
    };
    let manifest_path = out_dir.join("manifest.toml");
    std::fs::write(&manifest_path, manifest.to_toml())?;

    Ok(RunArtifacts {
        csv_path,
        manifest_path,
        rows: rows.len(),
    })
}

/// Echo helper re-exported for manifest round-trip checks.
pub fn config_echo(config: &ScenarioConfig) -> String {
    echo(config)
}

fn csv_header(kind: Kind) -> &'static str {
    match kind {
        Kind::Diffusion => "d,D,t,rate,step,steady",
        Kind::AgentCapacity => "N,prior,mi_bits,capacity_bits,gap_bits",
        Kind::Relay => "h,n,N,k,T,analytic_error,mc_error,mc_trials,seed",
        Kind::Consensus => "M,range,d_self,iter,analytic_var,empirical_var,lambda2,seed",
        Kind::Sweep => unreachable!("sweep resolves to a base kind"),
    }
}

fn medium_of(config: &ScenarioConfig) -> Result<Medium, RunError> {
    let section = config.medium.as_ref().expect("validated");
    Ok(Medium::new(section.diffusion, section.background)?)
}

fn node_of(config: &ScenarioConfig) -> Result<NodeConfig, RunError> {
    let agent_section = config.agent.as_ref().expect("validated");
    let node_section = config.node.as_ref().expect("validated");
    let agent = AgentConfig::new(
        agent_section.receptors,
        agent_section.threshold,
        agent_section.dissociation,
    )?;
    Ok(NodeConfig::new(
        node_section.agents,
        agent,
        node_section.rate,
        node_section.sense_distance,
        node_section.threshold,
    )?)
}

fn diffusion_rows(config: &ScenarioConfig, rows: &mut Vec<String>) -> Result<(), RunError> {
    let medium = medium_of(config)?;
    let section = config.diffusion.as_ref().expect("validated");
    for &d in &section.distances {
        let steady = section.rate * greens_steady(d, medium.diffusion)?;
        for &t in &section.times {
            let step = step_response(d, medium.diffusion, t, section.rate)?;
            rows.push(format!(
                "{d},{},{t},{},{step},{steady}",
                medium.diffusion, section.rate
            ));
        }
    }
    Ok(())
}

fn capacity_rows(config: &ScenarioConfig, rows: &mut Vec<String>) -> Result<(), RunError> {
    let section = config.capacity.as_ref().expect("validated");
    let grid = chebyshev_grid(section.grid_points as usize);
    let arcsine = PriorOnP::arcsine_on_grid(grid.clone())?;
    for &n in &section.receptor_counts {
        let mi = channel_mi(&arcsine, n)?;
        let cap = channel_capacity(
            n,
            &grid,
            section.tolerance_bits,
            section.max_iterations as usize,
        )?;
        rows.push(format!(
            "{n},arcsine,{mi},{},{}",
            cap.bits,
            cap.bits - mi
        ));
    }
    Ok(())
}

fn relay_rows(
    config: &ScenarioConfig,
    combo_seed: u64,
    rows: &mut Vec<String>,
) -> Result<(), RunError> {
    let medium = medium_of(config)?;
    let node = node_of(config)?;
    let section = config.relay.as_ref().expect("validated");
    let mode = match section.mode {
        RelayModeSection::Binary => RelayMode::Binary,
        RelayModeSection::Multilevel => RelayMode::Multilevel,
    };
    let chain = RelayChain::uniform(section.hops, section.hop_distance, node, medium, mode)?;

    let (analytic, mc): (Vec<f64>, Vec<f64>) = match section.mode {
        RelayModeSection::Binary => {
            let truth_on = section.source == SourceBit::On;
            let (source, p_tx) = if section.include_source_error {
                let p_env = section.source_p0.expect("validated");
                let p_env = if truth_on { p_env } else { 0.0 };
                let p_tx = mcn_core::agent::activation_prob(
                    chain.node.agents,
                    chain.node.threshold,
                    p_env,
                )?;
                (
                    BinarySource::Sensed {
                        truth: truth_on,
                        p_env,
                    },
                    p_tx,
                )
            } else {
                (BinarySource::Fixed(truth_on), f64::from(truth_on))
            };
            let analytic = end_to_end_matrix_prefixes(&chain)?
                .iter()
                .map(|m| {
                    let p_final_on = (1.0 - p_tx) * m.matrix[0][1] + p_tx * m.matrix[1][1];
                    if truth_on {
                        1.0 - p_final_on
                    } else {
                        p_final_on
                    }
                })
                .collect();
            let sim = simulate_relay(&chain, source, config.trials, combo_seed)?;
            (analytic, sim.per_hop_error)
        }
        RelayModeSection::Multilevel => {
            let source = section.source_level.expect("validated");
            if source > chain.node.agents {
                return Err(mcn_core::Error::Domain(format!(
                    "relay.source_level {source} exceeds node.agents {}",
                    chain.node.agents
                ))
                .into());
            }
            let analytic = end_to_end_level_matrix_prefixes(&chain)?
                .iter()
                .map(|m| 1.0 - m[source as usize][source as usize])
                .collect();
            let sim = simulate_relay_multilevel(&chain, source, config.trials, combo_seed)?;
            (analytic, sim.per_hop_error)
        }
    };

    for h in 1..=chain.hops() {
        rows.push(format!(
            "{h},{},{},{},{},{},{},{},{}",
            chain.node.agents,
            chain.node.agent.receptors,
            chain.node.agent.threshold,
            chain.node.threshold,
            analytic[h - 1],
            mc[h - 1],
            config.trials,
            config.seed
        ));
    }
    Ok(())
}

fn consensus_rows(
    config: &ScenarioConfig,
    combo_seed: u64,
    rows: &mut Vec<String>,
) -> Result<(), RunError> {
    let medium = medium_of(config)?;
    let section = config.consensus.as_ref().expect("validated");
    let network = ConsensusNetwork::ring(
        section.nodes as usize,
        section.spacing,
        section.range,
        section.self_distance,
        medium,
        section.mean,
        section.stddev * section.stddev,
    )?;
    let lambda2 = spectral_gap(&network)?;
    let trajectory = variance_trajectory(
        &network,
        section.iterations as usize,
        section.replications as u64,
        combo_seed,
    );
    for l in 0..=section.iterations as usize {
        let empirical = trajectory
            .empirical
            .get(l)
            .copied()
            .map_or_else(|| "nan".to_string(), |v| format!("{v}"));
        rows.push(format!(
            "{},{},{},{l},{},{empirical},{lambda2},{}",
            section.nodes,
            section.range,
            section.self_distance,
            trajectory.analytic[l],
            config.seed
        ));
    }
    Ok(())
}

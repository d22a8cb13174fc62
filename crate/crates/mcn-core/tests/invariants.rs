//! Property tests for the structural invariants of the analytic layer.

use mcn_core::agent::{
    activation_prob, channel_capacity, channel_mi, chebyshev_grid, reading_pmf, AgentConfig,
    PriorOnP,
};
use mcn_core::consensus::ConsensusNetwork;
use mcn_core::diffusion::{greens_steady, step_response, superpose, Medium, PointSource};
use mcn_core::node::{LevelQuantizer, NodeConfig};
use mcn_core::relay::{hop_transition, HopChannel, RelayChain, RelayMode};
use proptest::prelude::*;

proptest! {
    #[test]
    fn greens_scales_inversely_with_distance(
        d in 1e-3f64..1e3,
        diffusion in 1e-3f64..1e3,
        factor in 1e-2f64..1e2,
    ) {
        let base = greens_steady(d, diffusion).unwrap();
        let scaled = greens_steady(factor * d, diffusion).unwrap();
        prop_assert!(((scaled - base / factor) / (base / factor)).abs() < 1e-12);
    }

    #[test]
    fn step_response_is_monotone_and_bounded(
        d in 0.1f64..50.0,
        diffusion in 0.5f64..200.0,
        t_scale in 0.01f64..100.0,
    ) {
        let steady = greens_steady(d, diffusion).unwrap();
        let mut prev = 0.0;
        for i in 1..=32 {
            let t = t_scale * i as f64;
            let c = step_response(d, diffusion, t, 1.0).unwrap();
            prop_assert!(c + 1e-18 >= prev, "decreased at t={t}: {c} < {prev}");
            prop_assert!(c <= steady * (1.0 + 1e-12));
            prev = c;
        }
    }

    #[test]
    fn superposition_is_additive(
        sources in prop::collection::vec(
            ((-50.0f64..50.0, -50.0f64..50.0, -50.0f64..50.0), 0.0f64..10.0),
            1..8,
        ),
        split in 0usize..8,
        background in 0.0f64..1.0,
    ) {
        let medium = Medium::new(25.0, background).unwrap();
        let at = [60.0, 60.0, 60.0]; // outside the source box
        let sources: Vec<PointSource> = sources
            .into_iter()
            .map(|((x, y, z), rate)| PointSource::new([x, y, z], rate).unwrap())
            .collect();
        let split = split.min(sources.len());
        let whole = superpose(&sources, at, &medium).unwrap();
        let left = superpose(&sources[..split], at, &medium).unwrap();
        let right = superpose(&sources[split..], at, &medium).unwrap();
        let recombined = left + right - medium.background;
        prop_assert!(
            (whole - recombined).abs() <= 1e-12 * whole.abs().max(1.0),
            "{whole} vs {recombined}"
        );
    }

    #[test]
    fn pmf_sums_to_one(n in 1u32..=200, p in 0.0f64..=1.0) {
        let total: f64 = (0..=n).map(|i| reading_pmf(i, n, p).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-12, "N={n} p={p}: sum {total}");
    }

    #[test]
    fn activation_equals_pmf_tail(n in 1u32..=150, k_frac in 0.0f64..=1.0, p in 0.0f64..=1.0) {
        let k = (k_frac * n as f64).round() as u32;
        let tail = activation_prob(n, k, p).unwrap();
        let direct: f64 = (k..=n).map(|i| reading_pmf(i, n, p).unwrap()).sum();
        prop_assert!((tail - direct).abs() < 1e-12, "n={n} k={k} p={p}");
    }

    #[test]
    fn quantizer_monotone_and_idempotent(
        spacing in 1e-6f64..1e3,
        background in 0.0f64..10.0,
        max_level in 1u32..200,
        probe in 0.0f64..1.5,
    ) {
        let q = LevelQuantizer::new(spacing, background, max_level).unwrap();
        for m in 0..=max_level {
            prop_assert_eq!(q.quantize(q.level_concentration(m)), m);
        }
        let top = q.level_concentration(max_level) * 1.2;
        let c = background + probe * (top - background);
        let c_later = c + spacing * 0.37;
        prop_assert!(q.quantize(c_later) >= q.quantize(c));
    }

    #[test]
    fn hop_matrices_are_row_stochastic(
        receptors in 1u32..200,
        k_frac in 0.0f64..=1.0,
        agents in 1u32..100,
        t_frac in 0.0f64..=1.0,
        rate in 1.0f64..1e4,
        hop_distance in 1.0f64..100.0,
        background in 0.0f64..0.5,
    ) {
        let k = (k_frac * receptors as f64).round() as u32;
        let threshold = (t_frac * (agents - 1) as f64).round() as u32 + 1;
        let agent = AgentConfig::new(receptors, k, 2.0).unwrap();
        let node = NodeConfig::new(agents, agent, rate, 5.0, threshold).unwrap();
        let medium = Medium::new(50.0, background).unwrap();
        let chain = RelayChain::uniform(1, hop_distance, node, medium, RelayMode::Binary).unwrap();
        let hop = hop_transition(&chain, 0).unwrap();
        for row in hop.matrix {
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12, "row sums to {sum}");
            prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    // Two-state regenerative chains contract toward their stationary point,
    // so with both per-hop error entries below one half the end-to-end
    // error can only grow with hop count.
    #[test]
    fn subcritical_chains_degrade_monotonically(
        e_off in 0.0f64..0.49,
        e_on in 0.0f64..0.49,
    ) {
        let hop = HopChannel {
            matrix: [[1.0 - e_off, e_off], [e_on, 1.0 - e_on]],
        };
        for source_on in [false, true] {
            let mut total = HopChannel::identity();
            let mut prev = 0.0;
            for h in 1..=24 {
                total = total.compose(&hop);
                let e = total.error_given_source(source_on);
                prop_assert!(
                    e + 1e-12 >= prev,
                    "error fell from {prev} to {e} at h={h} (source_on={source_on})"
                );
                prev = e;
            }
        }
    }

    #[test]
    fn mixing_matrix_is_symmetric_and_mean_preserving(
        size in 2usize..24,
        spacing in 1.0f64..50.0,
        neighbors in 1usize..4,
        estimates in prop::collection::vec(-100.0f64..100.0, 24),
    ) {
        let range = spacing * neighbors as f64;
        let medium = Medium::new(50.0, 0.0).unwrap();
        let net = ConsensusNetwork::ring(size, spacing, range, spacing / 4.0, medium, 0.0, 1.0)
            .unwrap();
        let w = net.mixing_matrix();
        for (i, row) in w.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                prop_assert!((v - w[j][i]).abs() < 1e-12 * v.abs().max(1.0));
            }
        }
        let x = &estimates[..size];
        let stepped = mcn_core::consensus::consensus_step(&net, x);
        let before: f64 = x.iter().sum::<f64>() / size as f64;
        let after: f64 = stepped.iter().sum::<f64>() / size as f64;
        prop_assert!(
            (after - before).abs() <= 1e-12 * before.abs().max(1.0),
            "mean drifted from {before} to {after}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    // Random priors on the capacity grid never beat the returned capacity.
    #[test]
    fn capacity_dominates_random_priors(weights in prop::collection::vec(1e-6f64..1.0, 17)) {
        let grid = chebyshev_grid(17);
        let cap = channel_capacity(4, &grid, 1e-7, 500_000).unwrap();
        let total: f64 = weights.iter().sum();
        let mass: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let prior = PriorOnP::new(grid, mass).unwrap();
        let mi = channel_mi(&prior, 4).unwrap();
        prop_assert!(mi <= cap.bits + 1e-7, "MI {mi} above capacity {}", cap.bits);
    }
}

//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its runtime (visible with `--nocapture`).
//!
//! Criteria:
//! 1. closed-form diffusion responses match adaptive quadrature,
//! 2. reception-channel statistics are exact and match sampling,
//! 3. capacity behaves correctly on pinned grids,
//! 4. the relay study (configs/fig3.toml) has the required trends and
//!    Monte Carlo agreement,
//! 5. the consensus study (configs/fig4.toml) preserves means, decays
//!    variance to its floor, and matches sampling,
//! 6. variance decay is spectrally consistent on the pinned 8-ring,
//! 7. every scenario is byte-reproducible, including across worker
//!    counts.

use mcn_core::agent::{
    activation_prob, channel_capacity, channel_mi, chebyshev_grid, reading_pmf, sample_reading,
    PriorOnP,
};
use mcn_core::consensus::{
    consensus_step, lambda2_dft, lambda2_power, variance_trajectory, ConsensusNetwork,
};
use mcn_core::diffusion::{greens_steady, step_response, Medium};
use mcn_core::quadrature::{steady_state_quadrature, step_response_quadrature, Tolerance};
use mcn_core::rng::Stream;
use mcn_sim::config::parse_config;
use mcn_sim::scenario::run_scenario;
use std::path::Path;
use std::time::{Duration, Instant};

fn repo_config(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

fn check_budget(name: &str, elapsed: Duration, budget: Duration) {
    assert!(
        elapsed <= budget,
        "{name} took {elapsed:?}, over the {budget:?} budget"
    );
    println!("acceptance {name}: PASS in {elapsed:?}");
}

struct Csv {
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn load(path: &Path) -> Self {
        let text = std::fs::read_to_string(path).expect("csv readable");
        let mut lines = text.lines();
        let _header = lines.next().expect("header");
        let rows = lines
            .map(|line| line.split(',').map(str::to_string).collect())
            .collect();
        Self { rows }
    }

    fn f64(&self, row: usize, col: usize) -> f64 {
        self.rows[row][col].parse().expect("numeric cell")
    }
}

// 1. Green's function oracle: closed forms vs adaptive quadrature within
//    1e-6 relative over a 5x5x5 (d, D, t) grid; under 10 seconds.
#[test]
fn acceptance_1_greens_function_oracle() {
    let start = Instant::now();
    let distances = [0.5, 1.0, 2.0, 3.0, 5.0];
    let coefficients = [1.0, 2.0, 5.0, 20.0, 50.0];
    let times = [2.0, 5.0, 20.0, 100.0, 500.0];
    let tol = Tolerance {
        abs: 1e-18,
        rel: 1e-9,
    };
    for &d in &distances {
        for &diffusion in &coefficients {
            let closed_steady = greens_steady(d, diffusion).unwrap();
            let quad_steady = steady_state_quadrature(d, diffusion, tol);
            assert!(
                ((closed_steady - quad_steady) / quad_steady).abs() < 1e-6,
                "steady d={d} D={diffusion}: {closed_steady} vs {quad_steady}"
            );
            for &t in &times {
                let closed = step_response(d, diffusion, t, 1.0).unwrap();
                let quad = step_response_quadrature(d, diffusion, t, 1.0, tol);
                assert!(
                    ((closed - quad) / quad).abs() < 1e-6,
                    "step d={d} D={diffusion} t={t}: {closed} vs {quad}"
                );
            }
        }
    }
    check_budget(
        "1 (green's function quadrature oracle)",
        start.elapsed(),
        Duration::from_secs(10),
    );
}

// 2. Reception channel: pmf normalization at 1e-12 over 100 random
//    (N <= 200, p) pairs, tail identity at 1e-12, and Monte Carlo
//    activation within 4 standard errors; under 30 seconds.
#[test]
fn acceptance_2_reception_channel() {
    let start = Instant::now();
    let mut stream = Stream::derive(20_240, 0);
    for case in 0..100 {
        let n = 1 + (stream.next_u64() % 200) as u32;
        let p = stream.uniform();
        let k = (stream.next_u64() % (n as u64 + 1)) as u32;

        let total: f64 = (0..=n).map(|i| reading_pmf(i, n, p).unwrap()).sum();
        assert!(
            (total - 1.0).abs() < 1e-12,
            "case {case}: pmf over N={n}, p={p} sums to {total}"
        );

        let tail = activation_prob(n, k, p).unwrap();
        let direct: f64 = (k..=n).map(|i| reading_pmf(i, n, p).unwrap()).sum();
        assert!(
            (tail - direct).abs() < 1e-12,
            "case {case}: tail vs pmf sum at N={n}, k={k}, p={p}"
        );
    }

    let (n, k, p) = (25u32, 9u32, 0.31);
    let analytic = activation_prob(n, k, p).unwrap();
    let draws = 100_000u64;
    let mut fired = 0u64;
    let mut stream = Stream::derive(20_241, 0);
    for _ in 0..draws {
        if sample_reading(p, n, &mut stream).unwrap().count >= k {
            fired += 1;
        }
    }
    let frequency = fired as f64 / draws as f64;
    let band = 4.0 * (analytic * (1.0 - analytic) / draws as f64).sqrt();
    assert!(
        (frequency - analytic).abs() < band,
        "activation frequency {frequency} vs analytic {analytic} (band {band})"
    );
    check_budget(
        "2 (reception channel statistics)",
        start.elapsed(),
        Duration::from_secs(30),
    );
}

// 3. Capacity: exact 1 bit for a noiseless binary grid, nondecreasing in
//    N on the fixed default grid, and never below the arcsine prior's
//    mutual information; under 60 seconds.
#[test]
fn acceptance_3_capacity() {
    let start = Instant::now();
    let binary = channel_capacity(1, &[0.0, 1.0], 1e-6, 100_000).unwrap();
    assert!(
        (binary.bits - 1.0).abs() < 1e-6,
        "noiseless binary capacity {}",
        binary.bits
    );

    let grid = chebyshev_grid(129);
    let arcsine = PriorOnP::arcsine_on_grid(grid.clone()).unwrap();
    let tol = 1e-5;
    let mut previous = 0.0;
    for n in [1u32, 2, 4, 8, 16, 32] {
        let cap = channel_capacity(n, &grid, tol, 2_000_000).unwrap();
        assert!(
            cap.bits >= previous - 2.0 * tol,
            "capacity fell from {previous} to {} at N={n}",
            cap.bits
        );
        let mi = channel_mi(&arcsine, n).unwrap();
        assert!(
            mi <= cap.bits + tol,
            "N={n}: arcsine MI {mi} above capacity {}",
            cap.bits
        );
        previous = cap.bits;
    }
    check_budget("3 (capacity)", start.elapsed(), Duration::from_secs(60));
}

// 4. Relay study: with configs/fig3.toml, the analytic error is
//    nondecreasing in hop count for every n, nonincreasing in n for every
//    hop count, and Monte Carlo sits within 4 binomial standard errors
//    everywhere; under 2 minutes.
#[test]
fn acceptance_4_relay_study() {
    let start = Instant::now();
    let config = parse_config(&repo_config("fig3.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let artifacts = run_scenario(&config, dir.path()).unwrap();
    let csv = Csv::load(&artifacts.csv_path);
    assert_eq!(csv.rows.len(), 30, "3 agent counts x 10 hop counts");

    // Rows arrive grouped by combination, h ascending within each.
    let trials = config.trials as f64;
    let mut by_n: Vec<(u64, Vec<f64>)> = Vec::new();
    for row in 0..csv.rows.len() {
        let h = csv.f64(row, 0) as usize;
        let n = csv.f64(row, 1) as u64;
        let analytic = csv.f64(row, 5);
        let mc = csv.f64(row, 6);

        let band = 4.0 * (analytic * (1.0 - analytic) / trials).sqrt() + 1e-12;
        assert!(
            (mc - analytic).abs() < band,
            "n={n} h={h}: mc {mc} vs analytic {analytic} (band {band})"
        );

        if by_n.last().map(|(last, _)| *last) != Some(n) {
            by_n.push((n, Vec::new()));
        }
        by_n.last_mut().unwrap().1.push(analytic);
        assert_eq!(by_n.last().unwrap().1.len(), h, "hop counts in order");
    }
    assert_eq!(by_n.len(), 3);

    for (n, curve) in &by_n {
        for pair in curve.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-15,
                "n={n}: error fell from {} to {}",
                pair[0],
                pair[1]
            );
        }
    }
    for h in 0..10 {
        for pair in by_n.windows(2) {
            let (n_small, small) = &pair[0];
            let (n_large, large) = &pair[1];
            assert!(
                large[h] <= small[h] + 1e-15,
                "h={}: error rose from n={n_small} ({}) to n={n_large} ({})",
                h + 1,
                small[h],
                large[h]
            );
        }
    }
    check_budget("4 (relay study)", start.elapsed(), Duration::from_secs(120));
}

// 5. Consensus study: with configs/fig4.toml, means are preserved within
//    1e-12 per round, analytic variance is nonincreasing and reaches
//    within 1% of sigma0^2/M, rounds-to-2x-floor grows with M, empirical
//    variance sits within 4 standard errors at rounds 1, 5, and 20, and
//    a diagonal-coupling control stays flat; under 2 minutes.
#[test]
fn acceptance_5_consensus_study() {
    let start = Instant::now();
    let config = parse_config(&repo_config("fig4.toml")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let artifacts = run_scenario(&config, dir.path()).unwrap();
    let csv = Csv::load(&artifacts.csv_path);

    let section = config.consensus.as_ref().unwrap();
    let rounds = section.iterations as usize;
    let replications = section.replications as f64;
    let medium = Medium::new(
        config.medium.as_ref().unwrap().diffusion,
        config.medium.as_ref().unwrap().background,
    )
    .unwrap();

    // Mean preservation, checked directly on each swept network.
    for &m in &[8usize, 16, 32] {
        let net = ConsensusNetwork::ring(
            m,
            section.spacing,
            section.range,
            section.self_distance,
            medium,
            section.mean,
            section.stddev * section.stddev,
        )
        .unwrap();
        let mut stream = Stream::derive(500, m as u64);
        let mut x: Vec<f64> = (0..m).map(|_| stream.gaussian(0.0, 1.0)).collect();
        let mean0: f64 = x.iter().sum::<f64>() / m as f64;
        for round in 1..=100 {
            x = consensus_step(&net, &x);
            let mean: f64 = x.iter().sum::<f64>() / m as f64;
            assert!(
                (mean - mean0).abs() <= 1e-12 * mean0.abs().max(1.0),
                "M={m} round {round}: mean drifted from {mean0} to {mean}"
            );
        }
    }

    // Per-M variance curves from the CSV.
    let mut rounds_to_target = Vec::new();
    for (group, &m) in [8f64, 16.0, 32.0].iter().enumerate() {
        let base = group * (rounds + 1);
        let floor = 1.0 / m;
        let analytic: Vec<f64> = (0..=rounds).map(|l| csv.f64(base + l, 4)).collect();
        assert_eq!(csv.f64(base, 0), m, "group {group} is M={m}");

        for (l, pair) in analytic.windows(2).enumerate() {
            assert!(
                pair[1] <= pair[0] + 1e-15,
                "M={m}: analytic variance rose at round {}",
                l + 1
            );
        }
        assert!(
            *analytic.last().unwrap() <= floor * 1.01,
            "M={m}: final variance {} above 1% of floor {floor}",
            analytic.last().unwrap()
        );
        for &l in &[1usize, 5, 20] {
            let empirical = csv.f64(base + l, 5);
            let band = 4.0 * analytic[l] * (2.0 / (replications - 1.0)).sqrt();
            assert!(
                (empirical - analytic[l]).abs() < band,
                "M={m} round {l}: empirical {empirical} vs analytic {} (band {band})",
                analytic[l]
            );
        }
        rounds_to_target.push(
            analytic
                .iter()
                .position(|&v| v <= 2.0 * floor)
                .unwrap_or_else(|| panic!("M={m} never reached twice its floor")),
        );
    }
    assert!(
        rounds_to_target.windows(2).all(|w| w[1] >= w[0]),
        "rounds to reach 2x floor must grow with M: {rounds_to_target:?}"
    );

    // Diagonal-coupling control: no communication, flat variance.
    let isolated = ConsensusNetwork::ring(
        8,
        section.spacing,
        section.spacing * 0.5,
        section.self_distance,
        medium,
        0.0,
        1.0,
    )
    .unwrap();
    assert!(!isolated.mixing);
    let control = variance_trajectory(&isolated, 40, 0, 0);
    for (l, v) in control.analytic.iter().enumerate() {
        assert!(
            (v - 1.0).abs() < 1e-12,
            "control variance moved to {v} at round {l}"
        );
    }
    check_budget(
        "5 (consensus study)",
        start.elapsed(),
        Duration::from_secs(120),
    );
}

// 6. Spectral consistency on the pinned 8-ring: successive excess-variance
//    ratios converge to lambda2^2 within 1e-3 by round 50, and the
//    circulant DFT eigenvalue matches power iteration within 1e-10.
#[test]
fn acceptance_6_spectral_consistency() {
    let start = Instant::now();
    let medium = Medium::new(50.0, 0.0).unwrap();
    let net = ConsensusNetwork::ring(8, 10.0, 10.0, 2.0, medium, 0.0, 1.0).unwrap();

    let dft = lambda2_dft(&net).unwrap();
    let power = lambda2_power(&net).unwrap();
    assert!(
        (dft - power).abs() < 1e-10,
        "DFT {dft} vs power iteration {power}"
    );

    let target = dft * dft;
    let trajectory = variance_trajectory(&net, 50, 0, 0);
    let floor = trajectory.floor;
    let excess: Vec<f64> = trajectory.analytic.iter().map(|v| v - floor).collect();
    let mut converged_at = None;
    for l in 1..=50 {
        assert!(
            excess[l - 1] > 1e-9,
            "excess variance lost numerical meaning at round {l}"
        );
        let ratio = excess[l] / excess[l - 1];
        if (ratio - target).abs() <= 1e-3 {
            converged_at.get_or_insert(l);
        } else {
            assert!(
                converged_at.is_none(),
                "ratio left the 1e-3 band at round {l}: {ratio} vs {target}"
            );
        }
    }
    let converged_at = converged_at.expect("decay ratio never reached lambda2^2");
    assert!(converged_at <= 50, "converged only at round {converged_at}");
    check_budget(
        "6 (spectral consistency)",
        start.elapsed(),
        Duration::from_secs(30),
    );
}

// 7. Reproducibility: every scenario kind, rerun with the same config and
//    seed at different worker counts, emits byte-identical CSV.
#[test]
fn acceptance_7_reproducibility() {
    let start = Instant::now();
    let scenarios: &[(&str, &str, &str)] = &[
        (
            "diffusion",
            "diffusion.csv",
            r#"
kind = "diffusion"
seed = 3

[medium]
diffusion = 25.0

[diffusion]
distances = [1.0, 2.0, 5.0]
times = [0.5, 1.0, 10.0]
rate = 2.0
"#,
        ),
        (
            "agent-capacity",
            "agent_capacity.csv",
            r#"
kind = "agent-capacity"
seed = 4

[capacity]
receptor_counts = [1, 4]
grid_points = 33
tolerance_bits = 1e-6
"#,
        ),
        (
            "relay",
            "relay.csv",
            r#"
kind = "relay"
seed = 5
trials = 3000

[medium]
diffusion = 50.0

[agent]
receptors = 10
threshold = 3
dissociation = 2.0

[node]
agents = 20
rate = 230.0
sense_distance = 5.0
threshold = 10

[relay]
hops = 4
hop_distance = 10.0
"#,
        ),
        (
            "consensus",
            "consensus.csv",
            r#"
kind = "consensus"
seed = 6

[medium]
diffusion = 50.0

[consensus]
nodes = 8
spacing = 10.0
range = 10.0
self_distance = 2.0
iterations = 30
replications = 200
"#,
        ),
        (
            "sweep",
            "relay.csv",
            r#"
kind = "sweep"
seed = 8
trials = 2000

[medium]
diffusion = 50.0

[agent]
receptors = 10
threshold = 3
dissociation = 2.0

[node]
agents = 20
rate = 230.0
sense_distance = 5.0
threshold = 10

[relay]
hops = 3
hop_distance = 10.0

[sweep]
scenario = "relay"

[[sweep.axes]]
param = "relay.hop_distance"
values = [8.0, 10.0, 12.0]
"#,
        ),
    ];

    let binary = env!("CARGO_BIN_EXE_mcn-sim");
    for (subcommand, csv_name, config_text) in scenarios {
        let dir = tempfile::tempdir().unwrap();
        let config_path = dir.path().join("scenario.toml");
        std::fs::write(&config_path, config_text).unwrap();

        let mut outputs = Vec::new();
        for (run, threads) in [(0, "2"), (1, "4"), (2, "4")] {
            let out_dir = dir.path().join(format!("out{run}"));
            let status = std::process::Command::new(binary)
                .arg(subcommand)
                .arg("--config")
                .arg(&config_path)
                .arg("--out")
                .arg(&out_dir)
                .arg("--threads")
                .arg(threads)
                .output()
                .expect("binary runs");
            assert!(
                status.status.success(),
                "{subcommand} run {run} failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            outputs.push(std::fs::read(out_dir.join(csv_name)).unwrap());
        }
        assert_eq!(
            outputs[0], outputs[1],
            "{subcommand}: CSV differs between 2 and 4 workers"
        );
        assert_eq!(
            outputs[1], outputs[2],
            "{subcommand}: CSV differs between identical reruns"
        );
    }
    check_budget(
        "7 (reproducibility)",
        start.elapsed(),
        Duration::from_secs(120),
    );
}

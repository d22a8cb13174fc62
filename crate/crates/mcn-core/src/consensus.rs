//! Distributed averaging over colonies coupled by diffusion.
//!
//! Nodes on a ring lattice emit at rates proportional to their current
//! estimates; the steady field each node senses is a coupling-matrix
//! product, so one communication round applies the doubly stochastic
//! mixing matrix `W = G / S`. Estimates converge to the average of the
//! initial beliefs and the per-node variance decays toward the
//! centralized floor `sigma0^2 / M`.

use crate::diffusion::{greens_steady, Medium};
use crate::error::{domain, Error, Result};
use crate::rng::Stream;
use rayon::prelude::*;

/// Node placement rule for the coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Placement {
    /// Evenly spaced nodes on a closed ring; distances are measured along
    /// the lattice with periodic wraparound, which makes the coupling
    /// matrix exactly circulant.
    Ring { spacing: f64 },
    /// Arbitrary 3-D coordinates. Row sums are generally unequal; mean
    /// preservation is then not claimed.
    Points(Vec<[f64; 3]>),
}

/// A network of colonies exchanging estimates through the medium.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusNetwork {
    /// Node count M.
    pub size: usize,
    pub placement: Placement,
    /// Effective communication radius, um.
    pub range: f64,
    /// Distance at which a node senses its own emission, um.
    pub self_distance: f64,
    pub medium: Medium,
    /// Coupling matrix G: `G[i][j] = greens_steady(d_ij)` within range,
    /// `greens_steady(self_distance)` on the diagonal, zero otherwise.
    pub coupling: Vec<Vec<f64>>,
    /// Common row sum S of `G` (row 0's sum when rows are unequal).
    pub row_sum: f64,
    /// Mean of the initial estimates.
    pub mean: f64,
    /// Variance sigma0^2 of the initial estimates.
    pub variance0: f64,
    /// Rows of `G` are cyclic shifts of one another.
    pub circulant: bool,
    /// Row sums agree to within fp noise (true for rings).
    pub uniform_rows: bool,
    /// Some information path connects every pair of nodes.
    pub mixing: bool,
}

impl ConsensusNetwork {
    /// Build a ring lattice of `size` nodes.
    pub fn ring(
        size: usize,
        spacing: f64,
        range: f64,
        self_distance: f64,
        medium: Medium,
        mean: f64,
        variance0: f64,
    ) -> Result<Self> {
        if size < 2 {
            return Err(domain("network needs at least two nodes"));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(domain(format!(
                "spacing must be positive and finite, got {spacing}"
            )));
        }
        check_common(range, self_distance, variance0)?;

        let generator: Vec<f64> = (0..size)
            .map(|offset| {
                let steps = offset.min(size - offset);
                let d = if steps == 0 {
                    self_distance
                } else {
                    steps as f64 * spacing
                };
                if steps == 0 || d <= range {
                    greens_steady(d, medium.diffusion)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_>>()?;

        let coupling: Vec<Vec<f64>> = (0..size)
            .map(|i| (0..size).map(|j| generator[(j + size - i) % size]).collect())
            .collect();
        let row_sum: f64 = generator.iter().sum();
        let mixing = generator[1..].iter().any(|&g| g > 0.0);

        Ok(Self {
            size,
            placement: Placement::Ring { spacing },
            range,
            self_distance,
            medium,
            coupling,
            row_sum,
            mean,
            variance0,
            circulant: true,
            uniform_rows: true,
            mixing,
        })
    }

    /// Build from explicit coordinates. The matrix keeps the same coupling
    /// rule but loses the circulant guarantees; unequal row sums are
    /// recorded in `uniform_rows`.
    pub fn from_points(
        points: Vec<[f64; 3]>,
        range: f64,
        self_distance: f64,
        medium: Medium,
        mean: f64,
        variance0: f64,
    ) -> Result<Self> {
        let size = points.len();
        if size < 2 {
            return Err(domain("network needs at least two nodes"));
        }
        check_common(range, self_distance, variance0)?;

        let mut coupling = vec![vec![0.0; size]; size];
        for i in 0..size {
            for j in 0..size {
                if i == j {
                    coupling[i][j] = greens_steady(self_distance, medium.diffusion)?;
                    continue;
                }
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                let dz = points[i][2] - points[j][2];
                let d = (dx * dx + dy * dy + dz * dz).sqrt();
                if d == 0.0 {
                    return Err(domain(format!("nodes {i} and {j} are co-located")));
                }
                if d <= range {
                    coupling[i][j] = greens_steady(d, medium.diffusion)?;
                }
            }
        }
        Self::from_coupling(
            coupling,
            Placement::Points(points),
            range,
            self_distance,
            medium,
            mean,
            variance0,
        )
    }

    /// Wrap an explicit symmetric nonnegative coupling matrix.
    pub fn from_coupling(
        coupling: Vec<Vec<f64>>,
        placement: Placement,
        range: f64,
        self_distance: f64,
        medium: Medium,
        mean: f64,
        variance0: f64,
    ) -> Result<Self> {
        let size = coupling.len();
        if size < 2 || coupling.iter().any(|row| row.len() != size) {
            return Err(domain("coupling matrix must be square, at least 2x2"));
        }
        for (i, row) in coupling.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(domain(format!("coupling [{i}][{j}] invalid: {v}")));
                }
                if (v - coupling[j][i]).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(domain(format!("coupling not symmetric at [{i}][{j}]")));
                }
            }
        }
        let row_sums: Vec<f64> = coupling.iter().map(|row| row.iter().sum()).collect();
        let row_sum = row_sums[0];
        if !(row_sum > 0.0) {
            return Err(domain("coupling row sum must be positive"));
        }
        let uniform_rows = row_sums
            .iter()
            .all(|&s| (s - row_sum).abs() <= 1e-12 * row_sum);
        let circulant = (0..size).all(|i| {
            (0..size).all(|j| coupling[i][j] == coupling[0][(j + size - i) % size])
        });
        let mixing = connected(&coupling);
        Ok(Self {
            size,
            placement,
            range,
            self_distance,
            medium,
            coupling,
            row_sum,
            mean,
            variance0,
            circulant,
            uniform_rows,
            mixing,
        })
    }

    /// The mixing matrix `W = G / S`.
    pub fn mixing_matrix(&self) -> Vec<Vec<f64>> {
        self.coupling
            .iter()
            .map(|row| row.iter().map(|g| g / self.row_sum).collect())
            .collect()
    }
}

fn check_common(range: f64, self_distance: f64, variance0: f64) -> Result<()> {
    if !(range >= 0.0) || !range.is_finite() {
        return Err(domain(format!(
            "range must be nonnegative and finite, got {range}"
        )));
    }
    if !(self_distance > 0.0) || !self_distance.is_finite() {
        return Err(domain(format!(
            "self-sensing distance must be positive and finite, got {self_distance}"
        )));
    }
    if !(variance0 >= 0.0) || !variance0.is_finite() {
        return Err(domain(format!(
            "initial variance must be nonnegative and finite, got {variance0}"
        )));
    }
    Ok(())
}

fn connected(coupling: &[Vec<f64>]) -> bool {
    let size = coupling.len();
    let mut seen = vec![false; size];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..size {
            if i != j && coupling[i][j] > 0.0 && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// One communication round: every node re-estimates from the field
/// produced by all nodes emitting at `estimate / S`, i.e. `W * estimates`.
///
/// On uniform-row-sum networks the update is applied in the difference
/// form `x_i + sum_j G_ij (x_j - x_i) / S`, which keeps constant vectors
/// exact fixed points in floating point.
pub fn consensus_step(network: &ConsensusNetwork, estimates: &[f64]) -> Vec<f64> {
    assert_eq!(
        estimates.len(),
        network.size,
        "estimate vector length mismatch"
    );
    if network.uniform_rows {
        network
            .coupling
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let xi = estimates[i];
                let flux: f64 = row
                    .iter()
                    .zip(estimates)
                    .map(|(g, xj)| g * (xj - xi))
                    .sum();
                xi + flux / network.row_sum
            })
            .collect()
    } else {
        network
            .coupling
            .iter()
            .map(|row| {
                row.iter()
                    .zip(estimates)
                    .map(|(g, xj)| g * xj)
                    .sum::<f64>()
                    / network.row_sum
            })
            .collect()
    }
}

/// Run `rounds` communication rounds, returning the full trajectory
/// (`rounds + 1` vectors, the first being `initial`).
pub fn run_consensus(
    network: &ConsensusNetwork,
    initial: &[f64],
    rounds: usize,
) -> Vec<Vec<f64>> {
    let mut trajectory = Vec::with_capacity(rounds + 1);
    trajectory.push(initial.to_vec());
    for _ in 0..rounds {
        let next = consensus_step(network, trajectory.last().unwrap());
        trajectory.push(next);
    }
    trajectory
}

/// Analytic and empirical per-node variance across communication rounds.
#[derive(Debug, Clone)]
pub struct VarianceTrajectory {
    /// `analytic[l] = sigma0^2 * (W^{2l})_{ii}`, averaged over `i` (the
    /// entries coincide when `W` is circulant).
    pub analytic: Vec<f64>,
    /// Sample variance over replications, averaged over nodes.
    pub empirical: Vec<f64>,
    /// The centralized floor `sigma0^2 / M`.
    pub floor: f64,
    pub replications: u64,
}

/// Compute `rounds + 1` analytic variances and, with `replications > 0`,
/// matching empirical variances from Gaussian initial estimates drawn on
/// substreams `(seed, replication)`.
pub fn variance_trajectory(
    network: &ConsensusNetwork,
    rounds: usize,
    replications: u64,
    seed: u64,
) -> VarianceTrajectory {
    let size = network.size;
    let w = network.mixing_matrix();

    // Analytic: diagonal of W^{2l} via the running power W^l.
    let mut analytic = Vec::with_capacity(rounds + 1);
    let mut power: Vec<Vec<f64>> = identity(size);
    analytic.push(network.variance0);
    for _ in 1..=rounds {
        power = mat_mul(&power, &w);
        let diag_mean = power
            .iter()
            .map(|row| row.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            / size as f64;
        analytic.push(network.variance0 * diag_mean);
    }

    // Empirical: fixed-size replication chunks keep the reduction order
    // independent of the worker count.
    let mut empirical = Vec::new();
    if replications > 0 {
        const CHUNK: u64 = 64;
        let chunk_count = replications.div_ceil(CHUNK);
        let sd0 = network.variance0.sqrt();
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..chunk_count)
            .into_par_iter()
            .map(|chunk| {
                let lo = chunk * CHUNK;
                let hi = ((chunk + 1) * CHUNK).min(replications);
                let mut sum = vec![0.0; (rounds + 1) * size];
                let mut sum_sq = vec![0.0; (rounds + 1) * size];
                for rep in lo..hi {
                    let mut stream = Stream::derive(seed, rep);
                    let mut x: Vec<f64> = (0..size)
                        .map(|_| stream.gaussian(network.mean, sd0))
                        .collect();
                    for l in 0..=rounds {
                        if l > 0 {
                            x = consensus_step(network, &x);
                        }
                        for (i, &v) in x.iter().enumerate() {
                            sum[l * size + i] += v;
                            sum_sq[l * size + i] += v * v;
                        }
                    }
                }
                (sum, sum_sq)
            })
            .collect();

        let mut sum = vec![0.0; (rounds + 1) * size];
        let mut sum_sq = vec![0.0; (rounds + 1) * size];
        for (s, s2) in &partials {
            for (acc, v) in sum.iter_mut().zip(s) {
                *acc += v;
            }
            for (acc, v) in sum_sq.iter_mut().zip(s2) {
                *acc += v;
            }
        }
        let r = replications as f64;
        empirical = (0..=rounds)
            .map(|l| {
                (0..size)
                    .map(|i| {
                        let s = sum[l * size + i];
                        let s2 = sum_sq[l * size + i];
                        (s2 - s * s / r) / (r - 1.0)
                    })
                    .sum::<f64>()
                    / size as f64
            })
            .collect();
    }

    VarianceTrajectory {
        analytic,
        empirical,
        floor: network.variance0 / size as f64,
        replications,
    }
}

fn identity(size: usize) -> Vec<Vec<f64>> {
    (0..size)
        .map(|i| (0..size).map(|j| f64::from(i == j)).collect())
        .collect()
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let size = a.len();
    let mut out = vec![vec![0.0; size]; size];
    for i in 0..size {
        for k in 0..size {
            let w = a[i][k];
            if w == 0.0 {
                continue;
            }
            for j in 0..size {
                out[i][j] += w * b[k][j];
            }
        }
    }
    out
}

/// Second-largest eigenvalue modulus of `W`, the per-round contraction
/// factor of disagreement. Uses the circulant closed form when available,
/// deflated power iteration otherwise.
pub fn spectral_gap(network: &ConsensusNetwork) -> Result<f64> {
    if network.circulant {
        lambda2_dft(network)
    } else {
        lambda2_power(network)
    }
}

/// Eigenvalues of a circulant `W` are the DFT of its generating row; the
/// gap is the largest modulus among the nonconstant modes.
pub fn lambda2_dft(network: &ConsensusNetwork) -> Result<f64> {
    if !network.circulant {
        return Err(domain("DFT eigenvalues require a circulant network"));
    }
    let size = network.size;
    let row: Vec<f64> = network.coupling[0]
        .iter()
        .map(|g| g / network.row_sum)
        .collect();
    let mut lambda2: f64 = 0.0;
    for k in 1..size {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, &w) in row.iter().enumerate() {
            let angle = std::f64::consts::TAU * (k as f64) * (j as f64) / (size as f64);
            re += w * angle.cos();
            im -= w * angle.sin();
        }
        lambda2 = lambda2.max((re * re + im * im).sqrt());
    }
    Ok(lambda2.min(1.0))
}

/// Power iteration on the mean-deflated mixing matrix.
pub fn lambda2_power(network: &ConsensusNetwork) -> Result<f64> {
    let size = network.size;
    let w = network.mixing_matrix();

    // Deterministic start vector, deflated and normalized.
    let mut stream = Stream::derive(0x6d636e_u64, 0);
    let mut v: Vec<f64> = (0..size).map(|_| stream.uniform() - 0.5).collect();
    deflate(&mut v);
    let mut norm = norm2(&v);
    if norm == 0.0 {
        return Err(domain("degenerate start vector"));
    }
    v.iter_mut().for_each(|x| *x /= norm);

    let max_iterations = 200_000;
    let mut previous_ratio = f64::NAN;
    for iteration in 1..=max_iterations {
        let mut next: Vec<f64> = w
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        deflate(&mut next);
        norm = norm2(&next);
        if norm < 1e-140 {
            // The deflated operator annihilates everything: lambda2 = 0.
            return Ok(0.0);
        }
        let ratio = norm;
        next.iter_mut().for_each(|x| *x /= norm);
        v = next;
        if (ratio - previous_ratio).abs() <= 1e-14 * ratio.max(1.0) && iteration > 8 {
            return Ok(ratio.min(1.0));
        }
        previous_ratio = ratio;
    }
    Err(Error::NonConvergence {
        what: "deflated power iteration",
        iterations: max_iterations,
        residual: (previous_ratio).abs(),
    })
}

fn deflate(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

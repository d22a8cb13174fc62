//! The single-bacterium reception channel.
//!
//! An agent carries `N` identical receptors; each receptor independently
//! holds a molecule with probability `p`, where `p` follows the local
//! concentration through a hyperbolic occupancy law. The agent observes
//! only the trapped count, so its reading is a binomial sample with `N+1`
//! possible outputs. This module provides the reading statistics, the
//! threshold activation rule, the arcsine input prior, and the mutual
//! information / capacity of the reading channel.

use crate::error::{domain, Error, Result};
use crate::rng::Stream;

const LN_2: f64 = std::f64::consts::LN_2;

/// Receptor-level configuration of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentConfig {
    /// Receptor count N.
    pub receptors: u32,
    /// Activation threshold k: the agent fires when at least `k` of its
    /// receptors are occupied.
    pub threshold: u32,
    /// Receptor dissociation constant, molecules/um^3.
    pub dissociation: f64,
}

impl AgentConfig {
    pub fn new(receptors: u32, threshold: u32, dissociation: f64) -> Result<Self> {
        if receptors < 1 {
            return Err(domain("agent needs at least one receptor"));
        }
        if threshold > receptors {
            return Err(domain(format!(
                "activation threshold {threshold} exceeds receptor count {receptors}"
            )));
        }
        if !(dissociation > 0.0) || !dissociation.is_finite() {
            return Err(domain(format!(
                "dissociation constant must be positive and finite, got {dissociation}"
            )));
        }
        Ok(Self {
            receptors,
            threshold,
            dissociation,
        })
    }
}

/// One observation of the receptor bank.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentReading {
    /// Trapped-receptor count, in `0..=N`.
    pub count: u32,
    /// `count / N`, the unbiased occupancy estimate.
    pub p_hat: f64,
}

/// Steady-state probability that a single receptor is occupied at
/// concentration `c`: `p = c / (c + K_d)`.
pub fn occupancy_prob(concentration: f64, dissociation: f64) -> Result<f64> {
    if !(dissociation > 0.0) || !dissociation.is_finite() {
        return Err(domain(format!(
            "dissociation constant must be positive and finite, got {dissociation}"
        )));
    }
    if !(concentration >= 0.0) {
        return Err(domain(format!(
            "concentration must be nonnegative, got {concentration}"
        )));
    }
    Ok(concentration / (concentration + dissociation))
}

/// Inverse of [`occupancy_prob`]: the concentration at which a receptor is
/// occupied with probability `p`. Defined for `p` in `[0, 1)`.
pub fn inverse_occupancy(p: f64, dissociation: f64) -> Result<f64> {
    if !(dissociation > 0.0) || !dissociation.is_finite() {
        return Err(domain(format!(
            "dissociation constant must be positive and finite, got {dissociation}"
        )));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(domain(format!(
            "occupancy probability must lie in [0, 1), got {p}"
        )));
    }
    Ok(dissociation * p / (1.0 - p))
}

/// Log binomial coefficient `ln C(n, i)` by direct summation.
fn ln_choose(n: u32, i: u32) -> f64 {
    debug_assert!(i <= n);
    let i = i.min(n - i);
    let mut acc = 0.0;
    for j in 1..=i {
        acc += (((n - i + j) as f64) / (j as f64)).ln();
    }
    acc
}

/// Probability that the reading equals `i` out of `n` receptors when each
/// receptor is occupied with probability `p` (binomial pmf).
pub fn reading_pmf(i: u32, n: u32, p: f64) -> Result<f64> {
    if i > n {
        return Err(domain(format!("count {i} out of range 0..={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability out of [0, 1]: {p}")));
    }
    if p == 0.0 {
        return Ok(if i == 0 { 1.0 } else { 0.0 });
    }
    if p == 1.0 {
        return Ok(if i == n { 1.0 } else { 0.0 });
    }
    let ln_p = (ln_choose(n, i) + i as f64 * p.ln()) + (n - i) as f64 * (-p).ln_1p();
    Ok(ln_p.exp())
}

/// Full pmf row over counts `0..=n`.
pub fn reading_pmf_row(n: u32, p: f64) -> Result<Vec<f64>> {
    (0..=n).map(|i| reading_pmf(i, n, p)).collect()
}

/// Probability that at least `k` of `n` independent events of probability
/// `p` occur (upper binomial tail).
///
/// Summed directly from the side with the smaller mass, seeding the
/// boundary term in the log domain and extending by the term recurrence,
/// so no normal approximation enters at any size used here.
pub fn binomial_upper_tail(n: u32, k: u32, p: f64) -> Result<f64> {
    if k > n {
        return Err(domain(format!("threshold {k} out of range 0..={n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability out of [0, 1]: {p}")));
    }
    if k == 0 {
        return Ok(1.0);
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }

    let mean = n as f64 * p;
    let ratio = p / (1.0 - p);
    if (k as f64) > mean {
        // Upper tail is the smaller side: sum pmf(k) + pmf(k+1) + ...
        let mut term = reading_pmf(k, n, p)?;
        let mut sum = term;
        for i in k..n {
            term *= (n - i) as f64 / (i + 1) as f64 * ratio;
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
        }
        Ok(sum.min(1.0))
    } else {
        // Complement of the lower tail pmf(0) + ... + pmf(k-1).
        let mut term = reading_pmf(k - 1, n, p)?;
        let mut sum = term;
        let mut i = k - 1;
        while i > 0 {
            term *= i as f64 / (n - i + 1) as f64 / ratio;
            sum += term;
            if term < sum * 1e-18 {
                break;
            }
            i -= 1;
        }
        Ok((1.0 - sum).clamp(0.0, 1.0))
    }
}

/// Probability that an agent with `n` receptors and threshold `k` activates
/// at occupancy `p`.
pub fn activation_prob(n: u32, k: u32, p: f64) -> Result<f64> {
    binomial_upper_tail(n, k, p)
}

/// Draw one reading of `n` receptors at occupancy `p`.
pub fn sample_reading(p: f64, n: u32, stream: &mut Stream) -> Result<AgentReading> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability out of [0, 1]: {p}")));
    }
    let count = stream.binomial(n, p);
    Ok(AgentReading {
        count,
        p_hat: count as f64 / n as f64,
    })
}

/// Arcsine density `1 / (pi sqrt(p (1 - p)))` on the open interval (0, 1).
pub fn arcsine_pdf(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!(
            "arcsine density diverges outside (0, 1), got {p}"
        )));
    }
    Ok(1.0 / (std::f64::consts::PI * (p * (1.0 - p)).sqrt()))
}

/// Arcsine cumulative distribution `(2 / pi) asin(sqrt(p))` on [0, 1].
pub fn arcsine_cdf(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("arcsine CDF argument out of [0, 1]: {p}")));
    }
    Ok(2.0 / std::f64::consts::PI * p.sqrt().asin())
}

/// Draw from the arcsine distribution by inverse CDF:
/// `p = sin^2(pi u / 2)` with `u` uniform.
pub fn arcsine_sample(stream: &mut Stream) -> f64 {
    let u = stream.uniform();
    let s = (std::f64::consts::FRAC_PI_2 * u).sin();
    s * s
}

/// A discrete prior over occupancy values in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PriorOnP {
    grid: Vec<f64>,
    mass: Vec<f64>,
}

impl PriorOnP {
    /// Validate and build a prior: `grid` strictly increasing within
    /// [0, 1], `mass` nonnegative and summing to 1 within 1e-12.
    pub fn new(grid: Vec<f64>, mass: Vec<f64>) -> Result<Self> {
        if grid.is_empty() || grid.len() != mass.len() {
            return Err(domain(format!(
                "prior needs matching nonempty grid/mass, got {} and {}",
                grid.len(),
                mass.len()
            )));
        }
        for w in &grid {
            if !(0.0..=1.0).contains(w) {
                return Err(domain(format!("grid point out of [0, 1]: {w}")));
            }
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("grid must be strictly increasing"));
        }
        let mut total = 0.0;
        for m in &mass {
            if !(*m >= 0.0) {
                return Err(domain(format!("negative prior mass: {m}")));
            }
            total += m;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(domain(format!("prior mass sums to {total}, not 1")));
        }
        Ok(Self { grid, mass })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// All mass on a single occupancy value.
    pub fn point_mass(p: f64) -> Result<Self> {
        Self::new(vec![p], vec![1.0])
    }

    /// Half the mass on each of the noiseless endpoints 0 and 1.
    pub fn endpoints() -> Self {
        Self {
            grid: vec![0.0, 1.0],
            mass: vec![0.5, 0.5],
        }
    }

    /// Equal mass on `points` evenly spaced over [0, 1].
    pub fn uniform(points: usize) -> Result<Self> {
        if points < 2 {
            return Err(domain("uniform prior needs at least two points"));
        }
        let grid = (0..points)
            .map(|j| j as f64 / (points - 1) as f64)
            .collect();
        let mass = vec![1.0 / points as f64; points];
        Self::new(grid, mass)
    }

    /// The arcsine distribution discretized onto `grid` by assigning each
    /// point the CDF mass of the cell bounded by neighboring midpoints.
    pub fn arcsine_on_grid(grid: Vec<f64>) -> Result<Self> {
        if grid.len() < 2 {
            return Err(domain("arcsine discretization needs at least two points"));
        }
        let n = grid.len();
        let mut mass = Vec::with_capacity(n);
        let mut lower = 0.0;
        for j in 0..n {
            let upper = if j + 1 < n {
                arcsine_cdf(0.5 * (grid[j] + grid[j + 1]))?
            } else {
                1.0
            };
            mass.push(upper - lower);
            lower = upper;
        }
        Self::new(grid, mass)
    }
}

/// Occupancy grid with points clustered at both endpoints,
/// `x_j = (1 - cos(pi j / (k - 1))) / 2`.
pub fn chebyshev_grid(points: usize) -> Vec<f64> {
    assert!(points >= 2, "grid needs at least two points");
    (0..points)
        .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / (points - 1) as f64).cos()))
        .map(|x| x.clamp(0.0, 1.0))
        .collect()
}

/// Mutual information in bits between the occupancy drawn from `prior` and
/// the `n`-receptor reading, computed as `H(reading) - H(reading | p)`.
pub fn channel_mi(prior: &PriorOnP, n: u32) -> Result<f64> {
    let rows: Vec<Vec<f64>> = prior
        .grid()
        .iter()
        .map(|&p| reading_pmf_row(n, p))
        .collect::<Result<_>>()?;
    let q = prior.mass();

    let outputs = n as usize + 1;
    let mut p_out = vec![0.0; outputs];
    for (qj, row) in q.iter().zip(&rows) {
        for (acc, w) in p_out.iter_mut().zip(row) {
            *acc += qj * w;
        }
    }

    let h_out: f64 = p_out
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum();
    let h_cond: f64 = q
        .iter()
        .zip(&rows)
        .map(|(qj, row)| {
            qj * row
                .iter()
                .filter(|&&w| w > 0.0)
                .map(|&w| -w * w.ln())
                .sum::<f64>()
        })
        .sum();

    Ok(((h_out - h_cond) / LN_2).max(0.0))
}

/// Result of the capacity iteration.
#[derive(Debug, Clone)]
pub struct Capacity {
    /// Capacity estimate in bits (the mutual information achieved by
    /// `prior`, certified within `gap_bits` of the true grid capacity).
    pub bits: f64,
    /// The optimizing input prior on the requested grid.
    pub prior: PriorOnP,
    /// Final upper-minus-lower bound gap, bits.
    pub gap_bits: f64,
    pub iterations: usize,
}

/// Per-iterate state of the capacity iteration: output distribution,
/// per-atom divergences `D_j = KL(W_j || p_out)`, and the certified bounds
/// `lower = I(q) <= C <= upper = max_j D_j` (nats).
struct CapacityBounds {
    divergence: Vec<f64>,
    lower: f64,
    upper: f64,
}

fn capacity_bounds(q: &[f64], rows: &[Vec<f64>], outputs: usize) -> CapacityBounds {
    let mut p_out = vec![0.0; outputs];
    for (qj, row) in q.iter().zip(rows) {
        if *qj == 0.0 {
            continue;
        }
        for (acc, w) in p_out.iter_mut().zip(row) {
            *acc += qj * w;
        }
    }
    let mut divergence = Vec::with_capacity(rows.len());
    let mut lower = 0.0;
    let mut upper = f64::NEG_INFINITY;
    for (qj, row) in q.iter().zip(rows) {
        let mut d = 0.0;
        for (w, py) in row.iter().zip(&p_out) {
            if *w > 0.0 {
                d += w * (w / py).ln();
            }
        }
        lower += qj * d;
        upper = upper.max(d);
        divergence.push(d);
    }
    CapacityBounds {
        divergence,
        lower,
        upper,
    }
}

/// Capacity of the `n`-receptor reading channel over a discrete input grid,
/// by Blahut-Arimoto fixed-point iteration with monotone over-relaxation.
///
/// The bounds `I(q) <= C <= max_j D_j` certify any iterate, so the update
/// exponent is stretched as long as the lower bound keeps improving and
/// dropped back to the classic step (which never decreases it) otherwise.
/// Stops when the bound gap falls below `tol_bits`; errs with the last gap
/// if `max_iterations` is hit.
pub fn channel_capacity(
    n: u32,
    grid: &[f64],
    tol_bits: f64,
    max_iterations: usize,
) -> Result<Capacity> {
    if grid.len() < 2 {
        return Err(domain("capacity grid needs at least two points"));
    }
    if !(tol_bits > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol_bits}")));
    }
    let uniform = PriorOnP::new(grid.to_vec(), vec![1.0 / grid.len() as f64; grid.len()])?;
    let rows: Vec<Vec<f64>> = uniform
        .grid()
        .iter()
        .map(|&p| reading_pmf_row(n, p))
        .collect::<Result<_>>()?;

    let atoms = grid.len();
    let outputs = n as usize + 1;
    let tol_nats = tol_bits * LN_2;

    let mut q = vec![1.0 / atoms as f64; atoms];
    let mut bounds = capacity_bounds(&q, &rows, outputs);
    let mut gamma = 1.0f64;
    for iteration in 1..=max_iterations {
        let gap = bounds.upper - bounds.lower;
        if gap <= tol_nats {
            let prior = PriorOnP::new(grid.to_vec(), renormalize(&q))?;
            return Ok(Capacity {
                bits: bounds.lower / LN_2,
                prior,
                gap_bits: gap / LN_2,
                iterations: iteration,
            });
        }

        // Candidate q_j' ~ q_j exp(gamma (D_j - max D)); the shift keeps
        // every exponent nonpositive.
        let mut candidate = Vec::with_capacity(atoms);
        let mut total = 0.0;
        for (qj, d) in q.iter().zip(&bounds.divergence) {
            let next = qj * (gamma * (d - bounds.upper)).exp();
            total += next;
            candidate.push(next);
        }
        candidate.iter_mut().for_each(|v| *v /= total);
        let next_bounds = capacity_bounds(&candidate, &rows, outputs);

        if next_bounds.lower >= bounds.lower || gamma <= 1.0 {
            q = candidate;
            bounds = next_bounds;
            gamma = (gamma * 1.25).min(4096.0);
        } else {
            gamma = (gamma / 4.0).max(1.0);
        }
    }

    Err(Error::NonConvergence {
        what: "Blahut-Arimoto capacity iteration",
        iterations: max_iterations,
        residual: (bounds.upper - bounds.lower) / LN_2,
    })
}

fn renormalize(mass: &[f64]) -> Vec<f64> {
    let total: f64 = mass.iter().sum();
    mass.iter().map(|m| m / total).collect()
}

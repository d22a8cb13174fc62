//! Closed-form responses of a point source diffusing in an unbounded 3-D
//! medium, and linear superposition of several sources.
//!
//! Canonical units are micrometers, seconds, and molecules. The medium is
//! boundary-free and non-degrading, so a constant-rate source admits the
//! steady state `rate / (4 pi D d)` at distance `d`.

use crate::error::{domain, Result};

/// An unbounded 3-D diffusive medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Medium {
    /// Diffusion coefficient, um^2/s.
    pub diffusion: f64,
    /// Ambient background concentration, molecules/um^3.
    pub background: f64,
}

impl Medium {
    pub fn new(diffusion: f64, background: f64) -> Result<Self> {
        if !(diffusion > 0.0) || !diffusion.is_finite() {
            return Err(domain(format!(
                "diffusion coefficient must be positive and finite, got {diffusion}"
            )));
        }
        if !(background >= 0.0) || !background.is_finite() {
            return Err(domain(format!(
                "background concentration must be nonnegative and finite, got {background}"
            )));
        }
        Ok(Self {
            diffusion,
            background,
        })
    }
}

/// A point emitter producing molecules at a constant rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    /// Position, um.
    pub position: [f64; 3],
    /// Production rate, molecules/s.
    pub rate: f64,
}

impl PointSource {
    pub fn new(position: [f64; 3], rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(domain(format!(
                "source rate must be nonnegative and finite, got {rate}"
            )));
        }
        Ok(Self { position, rate })
    }
}

fn check_geometry(distance: f64, diffusion: f64) -> Result<()> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(domain(format!(
            "distance must be positive and finite, got {distance}; \
             self-sensing must pass an explicit self distance, never zero"
        )));
    }
    if !(diffusion > 0.0) || !diffusion.is_finite() {
        return Err(domain(format!(
            "diffusion coefficient must be positive and finite, got {diffusion}"
        )));
    }
    Ok(())
}

/// Steady-state concentration per unit emission rate at `distance` from a
/// constant point source: `1 / (4 pi D d)`.
pub fn greens_steady(distance: f64, diffusion: f64) -> Result<f64> {
    check_geometry(distance, diffusion)?;
    Ok(1.0 / (4.0 * std::f64::consts::PI * diffusion * distance))
}

/// Concentration at `distance` and `time` after a source of constant `rate`
/// switches on at time zero:
/// `rate / (4 pi D d) * erfc(d / sqrt(4 D t))`.
///
/// Zero at `time == 0`; nondecreasing in `time`; tends to
/// `rate * greens_steady` as `time` grows.
pub fn step_response(distance: f64, diffusion: f64, time: f64, rate: f64) -> Result<f64> {
    check_geometry(distance, diffusion)?;
    if !(time >= 0.0) {
        return Err(domain(format!("time must be nonnegative, got {time}")));
    }
    if !(rate >= 0.0) || !rate.is_finite() {
        return Err(domain(format!(
            "rate must be nonnegative and finite, got {rate}"
        )));
    }
    if time == 0.0 {
        return Ok(0.0);
    }
    let arg = distance / (4.0 * diffusion * time).sqrt();
    Ok(rate * greens_steady(distance, diffusion)? * libm::erfc(arg))
}

fn distance3(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Steady-state concentration at `at` produced by several constant sources,
/// plus the ambient background: `c_bg + sum_i rate_i * G(|at - x_i|)`.
pub fn superpose(sources: &[PointSource], at: [f64; 3], medium: &Medium) -> Result<f64> {
    let mut total = medium.background;
    for (i, source) in sources.iter().enumerate() {
        let d = distance3(source.position, at);
        if d == 0.0 {
            return Err(domain(format!(
                "source {i} is co-located with the observation point"
            )));
        }
        total += source.rate * greens_steady(d, medium.diffusion)?;
    }
    Ok(total)
}

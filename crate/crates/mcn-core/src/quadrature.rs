//! Numerical integration of the time-domain diffusion kernel.
//!
//! This module is a validation oracle for the closed forms in
//! [`crate::diffusion`]: it integrates the transient point-source kernel
//! directly and never calls the closed-form routines. The test suites
//! compare the two paths; production code has no reason to use this.

/// Absolute/relative tolerance pair for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-8,
        }
    }
}

/// Transient kernel of a unit-rate point source in 3-D:
/// `(4 pi D s)^(-3/2) exp(-d^2 / (4 D s))` at elapsed time `s`.
pub fn kernel(distance: f64, diffusion: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let four_pi_ds = 4.0 * std::f64::consts::PI * diffusion * s;
    let spread = 4.0 * diffusion * s;
    four_pi_ds.powf(-1.5) * (-distance * distance / spread).exp()
}

/// Concentration after integrating the kernel from 0 to `time` for a source
/// of constant `rate`.
pub fn step_response_quadrature(
    distance: f64,
    diffusion: f64,
    time: f64,
    rate: f64,
    tol: Tolerance,
) -> f64 {
    rate * integrate_kernel(distance, diffusion, time, tol)
}

/// Steady-state concentration per unit rate: the kernel integrated to a
/// cutoff chosen so the truncated tail is below tolerance.
pub fn steady_state_quadrature(distance: f64, diffusion: f64, tol: Tolerance) -> f64 {
    integrate_kernel(distance, diffusion, f64::INFINITY, tol)
}

/// Integrate the kernel over `[0, upper]`, where `upper` may be infinite.
///
/// The range is split into geometric segments past the kernel mode so the
/// adaptive rule never faces the full decade span at once. For an infinite
/// upper limit, integration stops once the analytic tail bound
/// `int_T^inf (4 pi D s)^(-3/2) ds = 2 (4 pi D)^(-3/2) / sqrt(T)`
/// falls below the tolerance.
fn integrate_kernel(distance: f64, diffusion: f64, upper: f64, tol: Tolerance) -> f64 {
    assert!(distance > 0.0 && diffusion > 0.0, "oracle needs d, D > 0");
    if upper <= 0.0 {
        return 0.0;
    }

    let mode = distance * distance / (6.0 * diffusion);
    let f = |s: f64| kernel(distance, diffusion, s);

    let mut total: f64 = 0.0;
    let mut lo = 0.0;
    let mut hi = (8.0 * mode).min(upper);
    let tail_coeff = 2.0 * (4.0 * std::f64::consts::PI * diffusion).powf(-1.5);
    loop {
        let seg_tol = (tol.abs + tol.rel * total.abs()) / 16.0;
        total += adaptive_simpson(&f, lo, hi, seg_tol.max(1e-300), 64);
        if hi >= upper {
            break;
        }
        let tail_bound = tail_coeff / hi.sqrt();
        if tail_bound <= tol.abs + tol.rel * total.abs() {
            break;
        }
        lo = hi;
        hi = (hi * 4.0).min(upper);
    }
    total
}

fn simpson(fa: f64, fm: f64, fb: f64, width: f64) -> f64 {
    width / 6.0 * (fa + 4.0 * fm + fb)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    adaptive_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let refined = left + right;
    // The floor stops refinement once the correction is at rounding level,
    // whatever tolerance was requested.
    let tol = tol.max(1e-15 * refined.abs());
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        // Richardson extrapolation of the two estimates.
        return refined + (refined - whole) / 15.0;
    }
    adaptive_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + adaptive_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

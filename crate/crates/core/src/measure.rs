//! Global-error and energy-error measurements.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrator::{integrate_observed, Problem, Reference, RunSummary, SolveSettings, State};
use crate::tableau::MethodTableau;

/// Steps of size `h` per sampling interval, if `interval` is a whole
/// multiple of `h`.
pub fn steps_per_interval(interval: f64, h: f64) -> Result<usize> {
    let ratio = interval / h;
    let n = ratio.round();
    if !(n >= 1.0) || (ratio - n).abs() > 1e-9 * n {
        return Err(Error::InvalidParameter(format!(
            "sampling interval {interval} is not a multiple of h = {h}"
        )));
    }
    Ok(n as usize)
}

/// A run observed at `t0 + k * interval`.
#[derive(Debug, Clone)]
pub struct SampledRun {
    pub summary: RunSummary,
    pub samples: Vec<DVector<f64>>,
}

/// Integrate and keep `q` at every multiple of `interval` (the initial state
/// included).
pub fn sampled_run(
    method: &MethodTableau,
    problem: &Problem,
    initial: &State,
    settings: &SolveSettings,
    interval: f64,
) -> Result<SampledRun> {
    let stride = steps_per_interval(interval, settings.h)?;
    let mut samples = Vec::new();
    let summary = integrate_observed(method, problem, initial, settings, |n, s| {
        if n % stride == 0 {
            samples.push(s.q.clone());
        }
    })?;
    Ok(SampledRun { summary, samples })
}

/// Reference positions at `t0 + k * interval`, `k = 0..count`.
pub fn reference_samples(reference: &Reference, t0: f64, interval: f64, count: usize) -> Vec<DVector<f64>> {
    (0..count).map(|k| reference(t0 + k as f64 * interval).0).collect()
}

/// Max-norm error in `q` over the common samples. Fails if the run stopped
/// early or the reference is shorter.
pub fn max_q_error(run: &SampledRun, reference: &[DVector<f64>]) -> Result<f64> {
    if let Some(e) = &run.summary.error {
        return Err(e.clone());
    }
    if reference.len() < run.samples.len() {
        return Err(Error::InvalidParameter(format!(
            "reference has {} samples, run has {}",
            reference.len(),
            run.samples.len()
        )));
    }
    let mut worst: f64 = 0.0;
    for (q, r) in run.samples.iter().zip(reference) {
        let e = (q - r).amax();
        if !e.is_finite() {
            return Err(Error::NonFinite("global error".into()));
        }
        worst = worst.max(e);
    }
    Ok(worst)
}

/// `max_n |H_n - H_0|` over every step.
pub fn energy_error(
    method: &MethodTableau,
    problem: &Problem,
    initial: &State,
    settings: &SolveSettings,
) -> Result<(RunSummary, f64)> {
    let h0 = problem.hamiltonian(&initial.q, &initial.p);
    let mut worst: f64 = 0.0;
    let summary = integrate_observed(method, problem, initial, settings, |_, s| {
        worst = worst.max((problem.hamiltonian(&s.q, &s.p) - h0).abs());
    })?;
    if let Some(e) = &summary.error {
        return Err(e.clone());
    }
    if !worst.is_finite() {
        return Err(Error::NonFinite("energy error".into()));
    }
    Ok((summary, worst))
}

/// Least-squares slope of `log GE` against `log h`.
pub fn convergence_slope(h: &[f64], ge: &[f64]) -> f64 {
    let xs: Vec<f64> = h.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = ge.iter().map(|x| x.ln()).collect();
    crate::verification::least_squares_slope(&xs, &ys)
}

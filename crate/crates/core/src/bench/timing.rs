//! Per-step cost measurement across problem sizes.
//!
//! The dominant per-iteration work is the inequality block of size
//! `K = (L^2 + 5L + 2)/2`, so the per-step wall time should scale roughly
//! quadratically in the sensor count.

use std::time::Instant;

use crate::dynamics::{NetworkState, Stepper};
use crate::formulation::ProblemInstance;
use crate::model::{generate_measurements, NoiseSpec};
use crate::scenario::build_deterministic;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingPoint {
    pub sensors: usize,
    pub mean_step_seconds: f64,
}

/// Measures the mean wall time of one Euler step (right-hand side plus
/// update) on perimeter instances of each requested size. `repetitions`
/// timed steps per size after a short warmup; zero repetitions yield an
/// empty table.
pub fn timing_scaling(sizes: &[usize], repetitions: usize) -> Result<Vec<TimingPoint>> {
    if repetitions == 0 {
        return Ok(Vec::new());
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let dep = build_deterministic(l, 20.0, vec![2.0, 3.0])?;
        let noise = NoiseSpec::common(0.1, l)?;
        let m = generate_measurements(&dep, &noise, 424242)?;
        let inst = ProblemInstance::from_deployment(&dep, m)?;
        // tiny fixed step keeps the zero-initialized transient bounded for
        // the duration of the measurement
        let tau = 1e-7;
        let mut stepper = Stepper::new(&inst, NetworkState::zeros(inst.dims()));
        for _ in 0..repetitions.min(1000) {
            stepper.advance(tau)?;
        }
        // best of three passes; the minimum is robust against scheduler
        // interference on busy hosts
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let started = Instant::now();
            for _ in 0..repetitions {
                stepper.advance(tau)?;
            }
            best = best.min(started.elapsed().as_secs_f64());
        }
        // keep the state observably alive so the loop cannot be elided
        assert!(stepper.state().time.is_finite());
        points.push(TimingPoint {
            sensors: l,
            mean_step_seconds: best / repetitions as f64,
        });
    }
    Ok(points)
}

/// Ordinary least-squares slope of `ln(time)` against `ln(L)`.
pub fn loglog_slope(points: &[TimingPoint]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| (p.sensors as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_step_seconds.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}

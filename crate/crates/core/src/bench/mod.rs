//! Monte-Carlo benchmark harness.
//!
//! Runs ensembles of localization trials over a scenario, optionally sweeping
//! the noise level `sigma` or the NLOS bound `b`, and aggregates RMSE,
//! empirical CDFs, fault counts, and the LOS lower bound. Trials are
//! distributed over a worker pool; per-trial seeds are derived from the base
//! seed alone, so results do not depend on the worker count.

mod config;
mod crlb;
mod metrics;
mod oracle;
mod report;
mod timing;

pub use config::{load_config, BenchConfig, SolverConfig};
pub use crlb::crlb_los;
pub use metrics::{cdf_at, empirical_cdf, rmse};
pub use oracle::{grid_oracle, GridOracleResult};
pub use report::{write_cdf_csv, write_records_csv, write_summary_csv, write_trace_csv};
pub use timing::{loglog_slope, timing_scaling, TimingPoint};

use rayon::prelude::*;

use crate::dynamics::{self, IntegratorConfig, SolveResult};
use crate::formulation::ProblemInstance;
use crate::kkt::KktReport;
use crate::model::{generate_measurements, Deployment};
use crate::scenario::{build_random_with, ScenarioKind, ScenarioSpec, SourceSpec};
use crate::{Error, Result};

use std::time::Instant;

/// Which solver produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// The robust smoothed-absolute-loss network.
    L1Pnn,
    /// The non-robust squared-loss control on the same machinery.
    L2Baseline,
}

impl Solver {
    pub fn label(&self) -> &'static str {
        match self {
            Solver::L1Pnn => "l1_pnn",
            Solver::L2Baseline => "l2_baseline",
        }
    }
}

/// Trial outcome.
#[derive(Debug, Clone, PartialEq)]
pub enum TrialStatus {
    Converged,
    /// The run aborted; the reason string is the fault diagnostic.
    Faulted(String),
}

/// One Monte-Carlo trial: the deployment snapshot, the estimate, and the
/// final optimality diagnostics. Faulted trials carry no estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub trial_index: usize,
    pub solver: Solver,
    pub deployment: Deployment,
    pub truth: Vec<f64>,
    pub estimate: Option<Vec<f64>>,
    pub onset_estimate: Option<f64>,
    /// `||estimate - truth||_2` (meters).
    pub error: Option<f64>,
    pub kkt: Option<KktReport>,
    pub steps: u64,
    /// Wall-clock seconds for the solve (in-memory diagnostic only; the CSV
    /// emitters skip it to keep outputs byte-reproducible).
    pub wall_time: f64,
    pub status: TrialStatus,
}

impl RunRecord {
    fn from_solve(
        trial_index: usize,
        solver: Solver,
        deployment: Deployment,
        outcome: Result<SolveResult>,
        wall_time: f64,
    ) -> Self {
        let truth = deployment.source().to_vec();
        match outcome {
            Ok(result) => {
                let estimate = result.estimate().to_vec();
                let error = crate::model::euclidean(&estimate, &truth);
                RunRecord {
                    trial_index,
                    solver,
                    deployment,
                    truth,
                    estimate: Some(estimate),
                    onset_estimate: Some(result.state.z.t0()),
                    error: Some(error),
                    kkt: Some(result.kkt),
                    steps: result.steps,
                    wall_time,
                    status: TrialStatus::Converged,
                }
            }
            Err(err) => RunRecord {
                trial_index,
                solver,
                deployment,
                truth,
                estimate: None,
                onset_estimate: None,
                error: None,
                kkt: None,
                steps: 0,
                wall_time,
                status: TrialStatus::Faulted(err.to_string()),
            },
        }
    }
}

/// Sweepable experiment parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Common measurement noise standard deviation (meters).
    Sigma,
    /// Upper bound of the uniform NLOS bias on every listed NLOS path.
    NlosBound,
}

impl SweepParam {
    pub fn label(&self) -> &'static str {
        match self {
            SweepParam::Sigma => "sigma",
            SweepParam::NlosBound => "b",
        }
    }
}

/// Aggregated outcome of one sweep point.
#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub scenario: ScenarioSpec,
    /// The swept parameter and its value at this point, if any.
    pub param: Option<(SweepParam, f64)>,
    /// Noise level in effect at this point.
    pub sigma: f64,
    pub records: Vec<RunRecord>,
    pub baseline_records: Vec<RunRecord>,
    /// RMSE over converged robust-solver trials.
    pub rmse: f64,
    pub baseline_rmse: Option<f64>,
    /// `(error level, fraction of converged trials at or below it)`.
    pub cdf: Vec<(f64, f64)>,
    /// LOS lower bound; present only when every path is LOS. For random
    /// deployments this is the RMS of the per-trial bounds.
    pub crlb: Option<f64>,
    pub fault_count: usize,
    /// Set when more than 10% of trials faulted.
    pub flagged: bool,
}

/// SplitMix64 step; the standard 64-bit mixer used to derive independent
/// per-trial seeds from the base seed.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic seed for (sweep point, trial, stream).
fn trial_seed(base: u64, point: usize, trial: usize, stream: u64) -> u64 {
    let mut s = base
        ^ (point as u64).wrapping_mul(0xa076_1d64_78bd_642f)
        ^ (trial as u64).wrapping_mul(0xe703_7ed1_a0b4_28db)
        ^ stream.wrapping_mul(0x8ebc_6af0_9c88_c6e3);
    splitmix64(&mut s)
}

fn deployment_for_trial(spec: &ScenarioSpec, seed: u64) -> Result<Deployment> {
    match spec.kind {
        ScenarioKind::DeterministicPerimeter => {
            let source = match &spec.source {
                SourceSpec::Fixed(p) => p.clone(),
                SourceSpec::Random => {
                    return Err(Error::InvalidParameter(
                        "deterministic scenarios need a fixed source".into(),
                    ))
                }
            };
            crate::scenario::build_deterministic_with(
                spec.sensors,
                spec.region_side,
                source,
                spec.onset_time,
                spec.propagation_speed,
            )
        }
        ScenarioKind::RandomSquare => {
            let dep = build_random_with(
                spec.sensors,
                spec.region_side,
                seed,
                spec.onset_time,
                spec.propagation_speed,
            )?;
            match &spec.source {
                SourceSpec::Random => Ok(dep),
                SourceSpec::Fixed(p) => Deployment::new(
                    (0..dep.sensor_count())
                        .map(|i| dep.sensor(i).to_vec())
                        .collect(),
                    p.clone(),
                    spec.onset_time,
                    spec.propagation_speed,
                ),
            }
        }
    }
}

/// Solves one instance with the squared-loss control on the identical
/// network machinery and integrator configuration.
pub fn l2_baseline_solve(
    inst: &ProblemInstance,
    config: &IntegratorConfig,
) -> Result<SolveResult> {
    dynamics::solve(&inst.clone().with_squared_loss(), config, None)
}

fn run_trial(
    spec: &ScenarioSpec,
    solver: &SolverConfig,
    sigma: f64,
    point: usize,
    trial: usize,
) -> Result<(RunRecord, Option<RunRecord>)> {
    let deployment = deployment_for_trial(spec, trial_seed(spec.seed, point, trial, 1))?;
    let noise = spec.noise_spec(sigma, trial_seed(spec.seed, point, trial, 2))?;
    let measurements =
        generate_measurements(&deployment, &noise, trial_seed(spec.seed, point, trial, 3));

    // A rejected draw (non-positive timestamp) counts as a faulted trial;
    // silently dropping it would bias the ensemble.
    let measurements = match measurements {
        Ok(m) => m,
        Err(err) => {
            let record = RunRecord {
                trial_index: trial,
                solver: Solver::L1Pnn,
                truth: deployment.source().to_vec(),
                deployment: deployment.clone(),
                estimate: None,
                onset_estimate: None,
                error: None,
                kkt: None,
                steps: 0,
                wall_time: 0.0,
                status: TrialStatus::Faulted(err.to_string()),
            };
            let baseline = solver.baseline.then(|| RunRecord {
                solver: Solver::L2Baseline,
                ..record.clone()
            });
            return Ok((record, baseline));
        }
    };

    let inst = ProblemInstance::new(
        deployment.sensors_flat().to_vec(),
        deployment.dim(),
        measurements,
        deployment.propagation_speed(),
        solver.gamma,
        solver.rho,
    )?;

    let started = Instant::now();
    let outcome = dynamics::solve(&inst, &solver.integrator, None);
    let record = RunRecord::from_solve(
        trial,
        Solver::L1Pnn,
        deployment.clone(),
        outcome,
        started.elapsed().as_secs_f64(),
    );

    let baseline = if solver.baseline {
        let started = Instant::now();
        let outcome = l2_baseline_solve(&inst, &solver.integrator);
        Some(RunRecord::from_solve(
            trial,
            Solver::L2Baseline,
            deployment,
            outcome,
            started.elapsed().as_secs_f64(),
        ))
    } else {
        None
    };
    Ok((record, baseline))
}

fn effective_sigma(base_sigma: f64, param: Option<(SweepParam, f64)>) -> f64 {
    match param {
        Some((SweepParam::Sigma, v)) => v,
        _ => base_sigma,
    }
}

fn effective_scenario(spec: &ScenarioSpec, param: Option<(SweepParam, f64)>) -> ScenarioSpec {
    let mut spec = spec.clone();
    if let Some((SweepParam::NlosBound, b)) = param {
        for (_, omega) in spec.nlos_pattern.iter_mut() {
            *omega = b;
        }
    }
    spec
}

fn run_point(
    spec: &ScenarioSpec,
    solver: &SolverConfig,
    base_sigma: f64,
    point: usize,
    param: Option<(SweepParam, f64)>,
) -> Result<BenchmarkResult> {
    let spec = effective_scenario(spec, param);
    let sigma = effective_sigma(base_sigma, param);
    spec.validate()?;
    solver.integrator.validate()?;

    let outcomes: Vec<Result<(RunRecord, Option<RunRecord>)>> = (0..spec.trials)
        .into_par_iter()
        .map(|trial| run_trial(&spec, solver, sigma, point, trial))
        .collect();

    let mut records = Vec::with_capacity(spec.trials);
    let mut baseline_records = Vec::new();
    for outcome in outcomes {
        let (record, baseline) = outcome?;
        records.push(record);
        if let Some(b) = baseline {
            baseline_records.push(b);
        }
    }

    let errors: Vec<f64> = records.iter().filter_map(|r| r.error).collect();
    let fault_count = records.len() - errors.len();
    let rmse_value = rmse(&errors);
    let baseline_rmse = if baseline_records.is_empty() {
        None
    } else {
        Some(rmse(
            &baseline_records
                .iter()
                .filter_map(|r| r.error)
                .collect::<Vec<_>>(),
        ))
    };

    let los = spec.nlos_pattern.iter().all(|(_, w)| *w == 0.0);
    let crlb = if los && sigma > 0.0 {
        match spec.kind {
            ScenarioKind::DeterministicPerimeter => {
                let dep = deployment_for_trial(&spec, 0)?;
                crlb_los(&dep, sigma).ok()
            }
            ScenarioKind::RandomSquare => {
                // RMS of the per-trial bounds: comparable to RMSE pooled over
                // the random geometries
                let mut acc = 0.0;
                let mut n = 0usize;
                for record in &records {
                    if let Ok(b) = crlb_los(&record.deployment, sigma) {
                        acc += b * b;
                        n += 1;
                    }
                }
                (n > 0).then(|| (acc / n as f64).sqrt())
            }
        }
    } else {
        None
    };

    let flagged = fault_count * 10 > records.len();
    Ok(BenchmarkResult {
        cdf: empirical_cdf(&errors),
        scenario: spec,
        param,
        sigma,
        records,
        baseline_records,
        rmse: rmse_value,
        baseline_rmse,
        crlb,
        fault_count,
        flagged,
    })
}

/// Re-runs one trial of the single-point configuration and returns the full
/// solve outcome (including the sampled trajectory): the `trace` command.
/// Uses the identical seed derivation as the ensemble, so the traced
/// trajectory is the one the benchmark saw.
pub fn trace_trial(
    spec: &ScenarioSpec,
    solver: &SolverConfig,
    sigma: f64,
    trial: usize,
) -> Result<SolveResult> {
    spec.validate()?;
    let deployment = deployment_for_trial(spec, trial_seed(spec.seed, 0, trial, 1))?;
    let noise = spec.noise_spec(sigma, trial_seed(spec.seed, 0, trial, 2))?;
    let measurements =
        generate_measurements(&deployment, &noise, trial_seed(spec.seed, 0, trial, 3))?;
    let inst = ProblemInstance::new(
        deployment.sensors_flat().to_vec(),
        deployment.dim(),
        measurements,
        deployment.propagation_speed(),
        solver.gamma,
        solver.rho,
    )?;
    dynamics::solve(&inst, &solver.integrator, None)
}

/// Runs the scenario at a single configuration point.
pub fn run_single(
    spec: &ScenarioSpec,
    solver: &SolverConfig,
    sigma: f64,
) -> Result<BenchmarkResult> {
    run_point(spec, solver, sigma, 0, None)
}

/// Runs the scenario once per sweep value, varying `param` while keeping
/// everything else (including per-trial seeds) fixed.
pub fn run_benchmark(
    spec: &ScenarioSpec,
    solver: &SolverConfig,
    sigma: f64,
    param: SweepParam,
    values: &[f64],
) -> Result<Vec<BenchmarkResult>> {
    values
        .iter()
        .enumerate()
        .map(|(point, value)| run_point(spec, solver, sigma, point, Some((param, *value))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StepMode;

    fn quick_solver() -> SolverConfig {
        SolverConfig {
            gamma: 100.0,
            rho: 5.0,
            integrator: IntegratorConfig {
                horizon: 6.0,
                mode: StepMode::Adaptive {
                    rel_tol: 1e-4,
                    abs_tol: 1e-8,
                    tau_max: 1e-2,
                },
                ..IntegratorConfig::default()
            },
            baseline: false,
        }
    }

    #[test]
    fn deterministic_point_reproduces_bitwise() {
        let mut spec = ScenarioSpec::deterministic(8, 20.0, vec![2.0, 3.0]);
        spec.trials = 4;
        spec.seed = 11;
        let solver = quick_solver();
        let a = run_single(&spec, &solver, 0.3).unwrap();
        let b = run_single(&spec, &solver, 0.3).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.estimate, rb.estimate);
            assert_eq!(ra.steps, rb.steps);
        }
        assert_eq!(a.rmse, b.rmse);
    }

    #[test]
    fn random_kind_redraws_deployments_per_trial() {
        let mut spec = ScenarioSpec::random(5, 20.0);
        spec.trials = 3;
        spec.seed = 5;
        let solver = quick_solver();
        let result = run_single(&spec, &solver, 0.1).unwrap();
        assert_ne!(
            result.records[0].deployment.sensors_flat(),
            result.records[1].deployment.sensors_flat()
        );
        assert_ne!(result.records[0].truth, result.records[1].truth);
    }

    #[test]
    fn sweep_applies_nlos_bound() {
        let mut spec = ScenarioSpec::deterministic(4, 20.0, vec![2.0, 3.0]);
        spec.trials = 2;
        spec.nlos_pattern = vec![(2, 5.0)];
        let solver = quick_solver();
        let results =
            run_benchmark(&spec, &solver, 0.1, SweepParam::NlosBound, &[0.0, 3.0]).unwrap();
        assert_eq!(results.len(), 2);
        // b = 0 is an LOS point and gets a bound attached
        assert!(results[0].crlb.is_some());
        assert!(results[1].crlb.is_none());
        assert_eq!(results[1].scenario.nlos_pattern[0].1, 3.0);
    }

    #[test]
    fn rmse_of_exact_estimates_is_zero() {
        // noiseless trials recover the source almost exactly; rmse must be
        // tiny and every trial converged
        let mut spec = ScenarioSpec::deterministic(8, 20.0, vec![2.0, 3.0]);
        spec.trials = 2;
        let mut solver = quick_solver();
        solver.integrator.horizon = 40.0;
        let result = run_single(&spec, &solver, 0.0).unwrap();
        assert_eq!(result.fault_count, 0);
        assert!(result.rmse < 0.05, "rmse = {}", result.rmse);
    }
}

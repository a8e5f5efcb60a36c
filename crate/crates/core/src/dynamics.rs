//! Projection-network dynamics and time stepping.
//!
//! The network state carries the packed variables `z` and the multipliers
//! `(mu, lambda)` as neuron activities evolving under
//!
//! ```text
//! dz/dt      = -grad_z L_rho(z, nu)
//! dmu_i/dt   = -mu_i + [mu_i + g_i(z)]^+        i = 1..K
//! dlambda/dt = h(z)
//! ```
//!
//! whose equilibria are exactly the projection-form KKT points. The discrete
//! realization is explicit Euler with all three blocks updated
//! simultaneously from the same state (Jacobi, not Gauss-Seidel: sequential
//! updates would change the discrete dynamics). A step-doubling adaptive
//! mode serves as the default driver because the zero-initialized transient
//! is stiff: the equality multipliers initially integrate `h_i ~ -||x_i||^2`,
//! and fixed steps coarser than ~1e-5 time constants blow up on the shipped
//! 20 m presets.

use std::fmt;

use crate::formulation::{Dims, MultiplierVector, ProblemInstance, VariableVector};
use crate::kkt::{self, KktReport};
use crate::{Error, Result};

/// `[u]^+ = max(u, 0)`, the projection onto the nonnegative half-line.
pub fn project_nonneg(u: f64) -> f64 {
    u.max(0.0)
}

/// Which derivative block a fault was detected in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Variables,
    InequalityMultipliers,
    EqualityMultipliers,
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Block::Variables => write!(f, "z"),
            Block::InequalityMultipliers => write!(f, "mu"),
            Block::EqualityMultipliers => write!(f, "lambda"),
        }
    }
}

/// Why a run was aborted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultKind {
    /// A derivative component became non-finite; usually a step-size or
    /// initialization pathology.
    NonFinite { block: Block, index: usize },
    /// The integrator exceeded its step budget without reaching the horizon.
    StepBudgetExhausted,
}

/// Abort record carried out of a failed integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fault {
    pub kind: FaultKind,
    /// Simulated time at which the fault was detected (time constants).
    pub time: f64,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FaultKind::NonFinite { block, index } => write!(
                f,
                "non-finite derivative in block {block} at component {index}, t = {}",
                self.time
            ),
            FaultKind::StepBudgetExhausted => {
                write!(f, "step budget exhausted at t = {}", self.time)
            }
        }
    }
}

/// Neuron activities: variables, multipliers, and the accumulated time.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub z: VariableVector,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Simulated time in time constants.
    pub time: f64,
}

impl NetworkState {
    /// The all-zero initialization used throughout the experiments.
    pub fn zeros(dims: Dims) -> Self {
        Self {
            z: VariableVector::zeros(dims),
            mu: vec![0.0; dims.inequalities()],
            lambda: vec![0.0; dims.equalities()],
            time: 0.0,
        }
    }

    pub fn multipliers(&self) -> MultiplierVector {
        MultiplierVector {
            mu: self.mu.clone(),
            lambda: self.lambda.clone(),
        }
    }

    fn matches(&self, dims: Dims) -> bool {
        self.z.as_slice().len() == dims.vars()
            && self.mu.len() == dims.inequalities()
            && self.lambda.len() == dims.equalities()
    }
}

/// Step-size policy for the Euler driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepMode {
    /// Plain fixed-step Euler with the configured `tau`.
    Fixed,
    /// Step doubling: one full step is compared against two half steps and
    /// the step size adjusts to keep the disagreement within tolerance.
    Adaptive {
        rel_tol: f64,
        abs_tol: f64,
        /// Upper bound on the step size (time constants).
        tau_max: f64,
    },
}

/// Integration parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    /// Fixed-mode step size, and the initial step in adaptive mode
    /// (time constants).
    pub tau: f64,
    /// Total simulated time (time constants).
    pub horizon: f64,
    /// Trajectory sampling interval (time constants).
    pub record_stride: f64,
    /// Projection scale; the dynamics are defined with `alpha = 1`.
    pub alpha: f64,
    pub mode: StepMode,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tau: 1e-6,
            horizon: 40.0,
            record_stride: 0.1,
            alpha: 1.0,
            mode: StepMode::Adaptive {
                rel_tol: 1e-5,
                abs_tol: 1e-9,
                tau_max: 1e-2,
            },
        }
    }
}

impl IntegratorConfig {
    /// Fixed-step configuration with the given `tau` over the default horizon.
    pub fn fixed(tau: f64) -> Self {
        Self {
            tau,
            mode: StepMode::Fixed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 0.1) {
            return Err(Error::InvalidParameter(format!(
                "tau must lie in (0, 0.1], got {}",
                self.tau
            )));
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if !(self.record_stride > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "record_stride must be positive, got {}",
                self.record_stride
            )));
        }
        if self.alpha != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "the network dynamics fix alpha = 1, got {}",
                self.alpha
            )));
        }
        if let StepMode::Adaptive {
            rel_tol,
            abs_tol,
            tau_max,
        } = self.mode
        {
            if !(rel_tol > 0.0 && abs_tol > 0.0 && tau_max > 0.0 && tau_max <= 0.1) {
                return Err(Error::InvalidParameter(
                    "adaptive tolerances and tau_max must be positive (tau_max <= 0.1)".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Safety cap on accepted steps per solve.
const MAX_STEPS: u64 = 200_000_000;

/// Smallest adaptive step; below this the step is accepted regardless of the
/// local error estimate so the run cannot stall.
const MIN_ADAPTIVE_TAU: f64 = 1e-12;

/// Scratch buffers reused across steps; one per live solve.
struct Workspace {
    g: Vec<f64>,
    h: Vec<f64>,
    dz: Vec<f64>,
    dmu: Vec<f64>,
    dlambda: Vec<f64>,
}

impl Workspace {
    fn new(dims: Dims) -> Self {
        Self {
            g: vec![0.0; dims.inequalities()],
            h: vec![0.0; dims.equalities()],
            dz: vec![0.0; dims.vars()],
            dmu: vec![0.0; dims.inequalities()],
            dlambda: vec![0.0; dims.equalities()],
        }
    }
}

/// Computes the three derivative blocks at `state` into the workspace and
/// checks them for non-finite components.
fn rhs_into(
    inst: &ProblemInstance,
    state: &NetworkState,
    ws: &mut Workspace,
) -> std::result::Result<(), Fault> {
    inst.eval_inequalities_into(&state.z, &mut ws.g);
    inst.eval_equalities_into(&state.z, &mut ws.h);

    inst.grad_augmented_lagrangian_raw(&state.z, &state.mu, &state.lambda, &ws.h, &mut ws.dz);
    for v in ws.dz.iter_mut() {
        *v = -*v;
    }
    for ((dmu, mu), g) in ws.dmu.iter_mut().zip(&state.mu).zip(&ws.g) {
        *dmu = -mu + project_nonneg(mu + g);
    }
    ws.dlambda.copy_from_slice(&ws.h);

    for (block, values) in [
        (Block::Variables, &ws.dz),
        (Block::InequalityMultipliers, &ws.dmu),
        (Block::EqualityMultipliers, &ws.dlambda),
    ] {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Fault {
                kind: FaultKind::NonFinite { block, index },
                time: state.time,
            });
        }
    }
    Ok(())
}

/// The network right-hand side at `state`: `(dz, dmu, dlambda)`.
///
/// The gradients come from the closed forms, not from differentiating
/// numerically; an independent finite-difference path lives in the tests.
pub fn rhs(
    inst: &ProblemInstance,
    state: &NetworkState,
) -> std::result::Result<(Vec<f64>, Vec<f64>, Vec<f64>), Fault> {
    let mut ws = Workspace::new(inst.dims());
    rhs_into(inst, state, &mut ws)?;
    Ok((ws.dz, ws.dmu, ws.dlambda))
}

fn apply_step(state: &mut NetworkState, ws: &Workspace, tau: f64) {
    for (z, dz) in state.z.as_mut_slice().iter_mut().zip(&ws.dz) {
        *z += tau * dz;
    }
    for (mu, dmu) in state.mu.iter_mut().zip(&ws.dmu) {
        *mu += tau * dmu;
    }
    for (lam, dlam) in state.lambda.iter_mut().zip(&ws.dlambda) {
        *lam += tau * dlam;
    }
    state.time += tau;
}

/// One explicit-Euler update of all three blocks simultaneously.
pub fn step(
    inst: &ProblemInstance,
    state: &NetworkState,
    config: &IntegratorConfig,
) -> std::result::Result<NetworkState, Fault> {
    let mut ws = Workspace::new(inst.dims());
    let mut next = state.clone();
    rhs_into(inst, state, &mut ws)?;
    apply_step(&mut next, &ws, config.tau);
    Ok(next)
}

/// Repeated in-place Euler stepping without per-step allocation; the path
/// the timing study measures.
pub struct Stepper<'a> {
    inst: &'a ProblemInstance,
    state: NetworkState,
    ws: Workspace,
}

impl<'a> Stepper<'a> {
    pub fn new(inst: &'a ProblemInstance, state: NetworkState) -> Self {
        let ws = Workspace::new(inst.dims());
        Self { inst, state, ws }
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    /// One right-hand-side evaluation plus Euler update.
    pub fn advance(&mut self, tau: f64) -> std::result::Result<(), Fault> {
        rhs_into(self.inst, &self.state, &mut self.ws)?;
        apply_step(&mut self.state, &self.ws, tau);
        Ok(())
    }
}

/// One trajectory sample; positions are recorded for every stride crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub t0: f64,
    pub x: Vec<f64>,
    pub d: Vec<f64>,
    /// `max(||dz||_inf, ||dmu||_inf, ||dlambda||_inf)` at this state; zero
    /// exactly at the network's equilibria.
    pub kkt_inf_norm: f64,
}

/// Outcome of an integration that ran to its horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub state: NetworkState,
    pub trajectory: Vec<TrajectorySample>,
    /// Full KKT report at the final state.
    pub kkt: KktReport,
    /// Accepted Euler steps (the discrete iteration count).
    pub steps: u64,
}

impl SolveResult {
    /// Final position estimate (the x-neuron outputs).
    pub fn estimate(&self) -> &[f64] {
        self.state.z.x()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sample_from(state: &NetworkState, ws: &Workspace) -> TrajectorySample {
    TrajectorySample {
        time: state.time,
        t0: state.z.t0(),
        x: state.z.x().to_vec(),
        d: state.z.d().to_vec(),
        kkt_inf_norm: inf_norm(&ws.dz).max(inf_norm(&ws.dmu)).max(inf_norm(&ws.dlambda)),
    }
}

/// Integrates the network from `init` (default: all zeros) over
/// `config.horizon` time constants and reports the final state, the sampled
/// x-neuron trajectory, the final KKT residuals, and the step count.
pub fn solve(
    inst: &ProblemInstance,
    config: &IntegratorConfig,
    init: Option<NetworkState>,
) -> Result<SolveResult> {
    config.validate()?;
    let dims = inst.dims();
    let state = init.unwrap_or_else(|| NetworkState::zeros(dims));
    if !state.matches(dims) {
        return Err(Error::InvalidParameter(
            "initial state dimensions do not match the instance".into(),
        ));
    }
    match config.mode {
        StepMode::Fixed => solve_fixed(inst, config, state).map_err(Error::from),
        StepMode::Adaptive {
            rel_tol,
            abs_tol,
            tau_max,
        } => solve_adaptive(inst, config, state, rel_tol, abs_tol, tau_max).map_err(Error::from),
    }
}

fn solve_fixed(
    inst: &ProblemInstance,
    config: &IntegratorConfig,
    mut state: NetworkState,
) -> std::result::Result<SolveResult, Fault> {
    let mut ws = Workspace::new(inst.dims());
    let t_end = state.time + config.horizon;
    let mut next_record = state.time;
    let mut trajectory = Vec::new();
    let mut steps: u64 = 0;
    loop {
        let remaining = t_end - state.time;
        rhs_into(inst, &state, &mut ws)?;
        if state.time >= next_record - 1e-12 {
            trajectory.push(sample_from(&state, &ws));
            next_record += config.record_stride;
        }
        if remaining <= config.tau * 1e-9 {
            break;
        }
        if steps >= MAX_STEPS {
            return Err(Fault {
                kind: FaultKind::StepBudgetExhausted,
                time: state.time,
            });
        }
        apply_step(&mut state, &ws, config.tau.min(remaining));
        steps += 1;
    }
    let kkt = kkt::residuals_default(inst, &state.z, &state.multipliers());
    Ok(SolveResult {
        state,
        trajectory,
        kkt,
        steps,
    })
}

fn solve_adaptive(
    inst: &ProblemInstance,
    config: &IntegratorConfig,
    mut state: NetworkState,
    rel_tol: f64,
    abs_tol: f64,
    tau_max: f64,
) -> std::result::Result<SolveResult, Fault> {
    let mut ws = Workspace::new(inst.dims());
    let mut ws_half = Workspace::new(inst.dims());
    let t_end = state.time + config.horizon;
    let mut next_record = state.time;
    let mut trajectory = Vec::new();
    let mut steps: u64 = 0;
    let mut tau = config.tau.min(tau_max);

    loop {
        let remaining = t_end - state.time;
        rhs_into(inst, &state, &mut ws)?;
        if state.time >= next_record - 1e-12 {
            trajectory.push(sample_from(&state, &ws));
            next_record += config.record_stride;
        }
        if remaining <= 1e-14 * t_end.max(1.0) {
            break;
        }
        if steps >= MAX_STEPS {
            return Err(Fault {
                kind: FaultKind::StepBudgetExhausted,
                time: state.time,
            });
        }
        tau = tau.min(remaining);

        // candidate A: one full step
        let mut full = state.clone();
        apply_step(&mut full, &ws, tau);
        // candidate B: two half steps
        let mut half = state.clone();
        apply_step(&mut half, &ws, 0.5 * tau);
        match rhs_into(inst, &half, &mut ws_half) {
            Ok(()) => {}
            Err(_) => {
                // midpoint blew up; retry with a smaller step unless the
                // floor is already reached, in which case surface the fault
                if tau <= MIN_ADAPTIVE_TAU {
                    rhs_into(inst, &half, &mut ws_half)?;
                }
                tau *= 0.1;
                continue;
            }
        }
        apply_step(&mut half, &ws_half, 0.5 * tau);

        let mut err = 0.0f64;
        for (a, b) in full
            .z
            .as_slice()
            .iter()
            .zip(half.z.as_slice())
            .chain(full.mu.iter().zip(&half.mu))
            .chain(full.lambda.iter().zip(&half.lambda))
        {
            let scale = abs_tol + rel_tol * a.abs().max(b.abs());
            err = err.max((a - b).abs() / scale);
        }

        if err <= 1.0 || tau <= MIN_ADAPTIVE_TAU {
            // keep the finer two-half-step solution
            state = half;
            steps += 1;
            let grow = 0.9 / err.max(1e-10).sqrt();
            tau = (tau * grow.min(2.0)).min(tau_max);
        } else {
            tau *= (0.9 / err.sqrt()).max(0.1);
        }
    }
    let kkt = kkt::residuals_default(inst, &state.z, &state.multipliers());
    Ok(SolveResult {
        state,
        trajectory,
        kkt,
        steps,
    })
}

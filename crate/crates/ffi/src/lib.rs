//! C ABI for the localization toolkit.
//!
//! Opaque problem handles plus plain-old-data results, so the solver can be
//! driven from C, Python (ctypes/cffi), or anything else with a C FFI. All
//! functions return [`nlos_status`]; `nlos_last_error_message` carries the
//! detail of the most recent failure on the calling thread. The generated
//! header lives at `include/nlos_locator.h`.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::ptr;

use nlos_locator::dynamics::{self, IntegratorConfig, StepMode};
use nlos_locator::formulation::ProblemInstance;
use nlos_locator::model::{Deployment, MeasurementSet};

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|c| *c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum nlos_status {
    NLOS_OK = 0,
    /// A required pointer argument was null.
    NLOS_ERR_NULL_POINTER = 1,
    /// Inputs violate a documented invariant; see `nlos_last_error_message`.
    NLOS_ERR_INVALID_ARGUMENT = 2,
    /// The network dynamics faulted (non-finite derivative or step budget).
    NLOS_ERR_FAULT = 3,
}

use nlos_status::*;

/// Opaque localization problem: sensor geometry, received timestamps, and
/// solver parameters.
pub struct nlos_problem {
    instance: ProblemInstance,
}

/// Integration options; zero-initialize and override what you need.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct nlos_solve_options {
    /// Euler step size; `<= 0` picks the default.
    pub tau: f64,
    /// Simulated horizon in time constants; `<= 0` picks the default (40).
    pub horizon: f64,
    /// Nonzero: fixed-step Euler. Zero: adaptive step doubling (default).
    pub fixed_step: i32,
    /// Nonzero: squared-loss control instead of the robust loss.
    pub squared_loss: i32,
}

/// Solver output. `position` holds `dim` meaningful entries.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct nlos_solution {
    pub onset_time: f64,
    pub position: [f64; 3],
    pub kkt_stationarity: f64,
    pub kkt_projection: f64,
    pub kkt_equality: f64,
    pub steps: u64,
}

/// Crate version as a static C string.
#[no_mangle]
pub extern "C" fn nlos_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Detail message for the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlos_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Builds a problem from `sensor_count x dim` row-major sensor coordinates
/// and the received timestamps (seconds). `gamma` and `rho` are the
/// smoothing and penalty parameters; pass `<= 0` to use the defaults
/// (100 and 5).
///
/// # Safety
/// `sensors` must point to `sensor_count * dim` readable doubles,
/// `timestamps` to `sensor_count` readable doubles, and `out` to a writable
/// pointer slot. On success `*out` owns the problem and must be released
/// with [`nlos_problem_free`].
#[no_mangle]
pub unsafe extern "C" fn nlos_problem_new(
    sensors: *const f64,
    sensor_count: usize,
    dim: usize,
    timestamps: *const f64,
    propagation_speed: f64,
    gamma: f64,
    rho: f64,
    out: *mut *mut nlos_problem,
) -> nlos_status {
    if sensors.is_null() || timestamps.is_null() || out.is_null() {
        set_error("null pointer argument");
        return NLOS_ERR_NULL_POINTER;
    }
    if sensor_count == 0 || dim == 0 || sensor_count.checked_mul(dim).is_none() {
        set_error("sensor_count and dim must be positive");
        return NLOS_ERR_INVALID_ARGUMENT;
    }
    let sensors = std::slice::from_raw_parts(sensors, sensor_count * dim).to_vec();
    let timestamps = std::slice::from_raw_parts(timestamps, sensor_count).to_vec();
    let measurements = MeasurementSet {
        tdoas: timestamps[1..].iter().map(|t| t - timestamps[0]).collect(),
        timestamps,
        realization: Vec::new(),
    };
    let gamma = if gamma > 0.0 {
        gamma
    } else {
        nlos_locator::formulation::DEFAULT_GAMMA
    };
    let rho = if rho > 0.0 {
        rho
    } else {
        nlos_locator::formulation::DEFAULT_RHO
    };
    match ProblemInstance::new(sensors, dim, measurements, propagation_speed, gamma, rho) {
        Ok(instance) => {
            *out = Box::into_raw(Box::new(nlos_problem { instance }));
            NLOS_OK
        }
        Err(e) => {
            set_error(&e.to_string());
            NLOS_ERR_INVALID_ARGUMENT
        }
    }
}

/// Releases a problem created by [`nlos_problem_new`]. Null is a no-op.
///
/// # Safety
/// `p` must be null or a pointer returned by `nlos_problem_new` that has not
/// been freed yet.
#[no_mangle]
pub unsafe extern "C" fn nlos_problem_free(p: *mut nlos_problem) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn integrator_from(opts: Option<&nlos_solve_options>) -> IntegratorConfig {
    let mut config = IntegratorConfig::default();
    if let Some(o) = opts {
        if o.horizon > 0.0 {
            config.horizon = o.horizon;
        }
        if o.fixed_step != 0 {
            config.mode = StepMode::Fixed;
            if o.tau <= 0.0 {
                config.tau = 1e-5;
            }
        }
        if o.tau > 0.0 {
            config.tau = o.tau;
        }
    }
    config
}

/// Runs the network from zero initialization and writes the estimate into
/// `out`. `opts` may be null for defaults. `distances`, when non-null, must
/// have room for `sensor_count` doubles and receives the recovered
/// source-sensor distances.
///
/// # Safety
/// `p` must be a live problem handle; `out` must be writable; `distances`
/// must be null or point to `sensor_count` writable doubles; `opts` must be
/// null or point to a readable options struct.
#[no_mangle]
pub unsafe extern "C" fn nlos_solve(
    p: *const nlos_problem,
    opts: *const nlos_solve_options,
    out: *mut nlos_solution,
    distances: *mut f64,
) -> nlos_status {
    if p.is_null() || out.is_null() {
        set_error("null pointer argument");
        return NLOS_ERR_NULL_POINTER;
    }
    let problem = &*p;
    let opts = opts.as_ref();
    let config = integrator_from(opts);
    if let Err(e) = config.validate() {
        set_error(&e.to_string());
        return NLOS_ERR_INVALID_ARGUMENT;
    }
    let instance = if opts.is_some_and(|o| o.squared_loss != 0) {
        problem.instance.clone().with_squared_loss()
    } else {
        problem.instance.clone()
    };
    match dynamics::solve(&instance, &config, None) {
        Ok(result) => {
            let mut position = [0.0f64; 3];
            for (slot, v) in position.iter_mut().zip(result.estimate()) {
                *slot = *v;
            }
            *out = nlos_solution {
                onset_time: result.state.z.t0(),
                position,
                kkt_stationarity: result.kkt.stationarity_inf_norm,
                kkt_projection: result.kkt.projection_residual_inf_norm,
                kkt_equality: result.kkt.primal_equality_inf_norm,
                steps: result.steps,
            };
            if !distances.is_null() {
                let d = result.state.z.d();
                ptr::copy_nonoverlapping(d.as_ptr(), distances, d.len());
            }
            NLOS_OK
        }
        Err(e) => {
            set_error(&e.to_string());
            NLOS_ERR_FAULT
        }
    }
}

/// LOS TDOA position-error lower bound for the given geometry and common
/// noise level `sigma` (meters). Writes the bound into `out`.
///
/// # Safety
/// `sensors` must point to `sensor_count * dim` readable doubles, `source`
/// to `dim` readable doubles, and `out` to a writable double.
#[no_mangle]
pub unsafe extern "C" fn nlos_crlb_los(
    sensors: *const f64,
    sensor_count: usize,
    dim: usize,
    source: *const f64,
    sigma: f64,
    out: *mut f64,
) -> nlos_status {
    if sensors.is_null() || source.is_null() || out.is_null() {
        set_error("null pointer argument");
        return NLOS_ERR_NULL_POINTER;
    }
    if sensor_count == 0 || dim == 0 || sensor_count.checked_mul(dim).is_none() {
        set_error("sensor_count and dim must be positive");
        return NLOS_ERR_INVALID_ARGUMENT;
    }
    let flat = std::slice::from_raw_parts(sensors, sensor_count * dim);
    let positions: Vec<Vec<f64>> = flat.chunks(dim).map(|c| c.to_vec()).collect();
    let source = std::slice::from_raw_parts(source, dim).to_vec();
    let deployment = match Deployment::new(positions, source, 0.0, 1.0) {
        Ok(d) => d,
        Err(e) => {
            set_error(&e.to_string());
            return NLOS_ERR_INVALID_ARGUMENT;
        }
    };
    match nlos_locator::bench::crlb_los(&deployment, sigma) {
        Ok(bound) => {
            *out = bound;
            NLOS_OK
        }
        Err(e) => {
            set_error(&e.to_string());
            NLOS_ERR_INVALID_ARGUMENT
        }
    }
}

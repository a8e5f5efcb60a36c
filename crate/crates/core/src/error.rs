use std::fmt;

use crate::dynamics::Fault;

/// Errors produced by the localization toolkit.
#[derive(Debug)]
pub enum Error {
    /// A deployment violates a geometric invariant (dimensions, coincident
    /// positions, non-positive speed, ...).
    InvalidDeployment(String),
    /// A noise specification is inconsistent with the deployment.
    InvalidNoise(String),
    /// A generated timestamp came out non-positive, which breaks the premise
    /// of the temporal constraints; the offending sensor is reported 1-based.
    NonPositiveTimestamp { sensor: usize, value: f64 },
    /// Sensor index outside `1..=L`.
    SensorIndex { index: usize, len: usize },
    /// A parameter is outside its documented range.
    InvalidParameter(String),
    /// Random deployment generation kept producing degenerate geometry.
    DrawExhausted { attempts: usize },
    /// The network dynamics produced a non-finite derivative component.
    Dynamics(Fault),
    /// Geometry too degenerate for the requested diagnostic (singular FIM).
    DegenerateGeometry(String),
    /// The brute-force oracle found no feasible grid point.
    EmptyFeasibleGrid,
    /// Configuration file problem.
    Config(String),
    /// Filesystem problem while emitting results.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDeployment(msg) => write!(f, "invalid deployment: {msg}"),
            Error::InvalidNoise(msg) => write!(f, "invalid noise spec: {msg}"),
            Error::NonPositiveTimestamp { sensor, value } => write!(
                f,
                "sensor {sensor} received a non-positive timestamp {value}; \
                 the temporal constraints require t_i > 0"
            ),
            Error::SensorIndex { index, len } => {
                write!(f, "sensor index {index} out of range 1..={len}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::DrawExhausted { attempts } => write!(
                f,
                "random deployment still degenerate after {attempts} attempts"
            ),
            Error::Dynamics(fault) => write!(f, "dynamics fault: {fault}"),
            Error::DegenerateGeometry(msg) => write!(f, "degenerate geometry: {msg}"),
            Error::EmptyFeasibleGrid => write!(f, "no feasible point on the oracle grid"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<Fault> for Error {
    fn from(fault: Fault) -> Self {
        Error::Dynamics(fault)
    }
}

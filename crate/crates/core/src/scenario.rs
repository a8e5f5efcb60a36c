//! Benchmark geometries.
//!
//! Two constellation builders: sensors evenly spaced along the perimeter of a
//! square region (the deterministic study), and sensors plus source drawn
//! uniformly from the square (the random study, redrawn per Monte-Carlo run).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::model::{Deployment, NoiseSpec};
use crate::{Error, Result, DEFAULT_ONSET_TIME, DEFAULT_PROPAGATION_SPEED};

/// Minimum sensor-to-source separation accepted in random draws (meters).
/// Prevents degenerate near-zero distances that the model excludes.
pub const MIN_SENSOR_SOURCE_DISTANCE: f64 = 1e-3;

const MAX_DRAW_ATTEMPTS: usize = 100;

/// Which of the two benchmark geometries to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Sensors evenly spaced along the square perimeter, fixed source.
    DeterministicPerimeter,
    /// Sensors and source drawn uniformly from the square each trial.
    RandomSquare,
}

/// Source placement for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Fixed(Vec<f64>),
    Random,
}

/// Top-level description of one benchmark configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Side length of the square region (meters).
    pub region_side: f64,
    /// Sensor count `L`.
    pub sensors: usize,
    pub source: SourceSpec,
    /// `(sensor index 1..=L, omega)` pairs marking NLOS paths.
    pub nlos_pattern: Vec<(usize, f64)>,
    /// When true, the NLOS sensor indices are redrawn per Monte-Carlo run
    /// (keeping the omega values); default keeps the listed set fixed.
    pub nlos_redraw: bool,
    /// Monte-Carlo trial count.
    pub trials: usize,
    /// Base seed; per-trial seeds are derived from it.
    pub seed: u64,
    /// True onset time handed to the deployments (seconds).
    pub onset_time: f64,
    /// Propagation speed (m/s).
    pub propagation_speed: f64,
}

impl ScenarioSpec {
    /// The paper-style deterministic preset: `L` sensors on the perimeter of
    /// a `side x side` square, fixed source, no NLOS paths yet.
    pub fn deterministic(sensors: usize, region_side: f64, source: Vec<f64>) -> Self {
        Self {
            kind: ScenarioKind::DeterministicPerimeter,
            region_side,
            sensors,
            source: SourceSpec::Fixed(source),
            nlos_pattern: Vec::new(),
            nlos_redraw: false,
            trials: 100,
            seed: 0,
            onset_time: DEFAULT_ONSET_TIME,
            propagation_speed: DEFAULT_PROPAGATION_SPEED,
        }
    }

    /// Random-square preset with `L` sensors.
    pub fn random(sensors: usize, region_side: f64) -> Self {
        Self {
            kind: ScenarioKind::RandomSquare,
            region_side,
            sensors,
            source: SourceSpec::Random,
            nlos_pattern: Vec::new(),
            nlos_redraw: false,
            trials: 100,
            seed: 0,
            onset_time: DEFAULT_ONSET_TIME,
            propagation_speed: DEFAULT_PROPAGATION_SPEED,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.region_side > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "region_side must be positive, got {}",
                self.region_side
            )));
        }
        if self.sensors < 3 {
            return Err(Error::InvalidParameter(format!(
                "need at least k+1 = 3 sensors, got {}",
                self.sensors
            )));
        }
        for (i, w) in &self.nlos_pattern {
            if *i == 0 || *i > self.sensors {
                return Err(Error::SensorIndex {
                    index: *i,
                    len: self.sensors,
                });
            }
            if !(*w >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "nlos bound must be >= 0, got {w}"
                )));
            }
        }
        if let SourceSpec::Fixed(p) = &self.source {
            if p.len() != 2 {
                return Err(Error::InvalidParameter(format!(
                    "shipped presets are planar; source must have 2 coordinates, got {}",
                    p.len()
                )));
            }
        }
        Ok(())
    }

    /// Noise spec for one trial: common `sigma` plus this scenario's NLOS
    /// pattern. With `nlos_redraw` the pattern's sensor indices are replaced
    /// by a fresh draw (without replacement) seeded by `redraw_seed`.
    pub fn noise_spec(&self, sigma: f64, redraw_seed: u64) -> Result<NoiseSpec> {
        let mut spec = NoiseSpec::common(sigma, self.sensors)?;
        if self.nlos_pattern.is_empty() {
            return Ok(spec);
        }
        if self.nlos_redraw {
            let mut rng = ChaCha8Rng::seed_from_u64(redraw_seed);
            let mut pool: Vec<usize> = (1..=self.sensors).collect();
            for (_, omega) in &self.nlos_pattern {
                let pick = rng.gen_range(0..pool.len());
                spec = spec.with_nlos(pool.swap_remove(pick), *omega)?;
            }
        } else {
            for (i, omega) in &self.nlos_pattern {
                spec = spec.with_nlos(*i, *omega)?;
            }
        }
        Ok(spec)
    }
}

/// Position on the perimeter of a `side x side` square at arc length `s`
/// from the origin, walking counter-clockwise.
fn perimeter_point(s: f64, side: f64) -> (f64, f64) {
    debug_assert!(s >= 0.0 && s < 4.0 * side);
    if s < side {
        (s, 0.0)
    } else if s < 2.0 * side {
        (side, s - side)
    } else if s < 3.0 * side {
        (side - (s - 2.0 * side), side)
    } else {
        (0.0, side - (s - 3.0 * side))
    }
}

/// Evenly spaced perimeter constellation: `L` sensors at arc-length spacing
/// `4 side / L`, anchored at the corner `(0, 0)` and walking counter-clockwise.
/// A pure function of its arguments.
pub fn build_deterministic(sensors: usize, region_side: f64, source: Vec<f64>) -> Result<Deployment> {
    build_deterministic_with(
        sensors,
        region_side,
        source,
        DEFAULT_ONSET_TIME,
        DEFAULT_PROPAGATION_SPEED,
    )
}

/// [`build_deterministic`] with explicit onset time and propagation speed.
pub fn build_deterministic_with(
    sensors: usize,
    region_side: f64,
    source: Vec<f64>,
    onset_time: f64,
    propagation_speed: f64,
) -> Result<Deployment> {
    if sensors < 3 {
        return Err(Error::InvalidParameter(format!(
            "perimeter constellation needs at least 3 sensors, got {sensors}"
        )));
    }
    if !(region_side > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "region side must be positive, got {region_side}"
        )));
    }
    let spacing = 4.0 * region_side / sensors as f64;
    let positions = (0..sensors)
        .map(|i| {
            let (x, y) = perimeter_point(i as f64 * spacing, region_side);
            vec![x, y]
        })
        .collect();
    Deployment::new(positions, source, onset_time, propagation_speed)
}

/// Uniform random constellation: `L` sensors and one source drawn i.i.d.
/// from `[0, side]^2`, redrawn while any sensor sits closer than
/// [`MIN_SENSOR_SOURCE_DISTANCE`] to the source (at most 100 attempts).
pub fn build_random(sensors: usize, region_side: f64, seed: u64) -> Result<Deployment> {
    build_random_with(
        sensors,
        region_side,
        seed,
        DEFAULT_ONSET_TIME,
        DEFAULT_PROPAGATION_SPEED,
    )
}

/// [`build_random`] with explicit onset time and propagation speed.
pub fn build_random_with(
    sensors: usize,
    region_side: f64,
    seed: u64,
    onset_time: f64,
    propagation_speed: f64,
) -> Result<Deployment> {
    if !(region_side > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "region side must be positive, got {region_side}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_DRAW_ATTEMPTS {
        let positions: Vec<Vec<f64>> = (0..sensors)
            .map(|_| {
                vec![
                    rng.gen_range(0.0..=region_side),
                    rng.gen_range(0.0..=region_side),
                ]
            })
            .collect();
        let source = vec![
            rng.gen_range(0.0..=region_side),
            rng.gen_range(0.0..=region_side),
        ];
        let separated = positions
            .iter()
            .all(|p| crate::model::euclidean(p, &source) >= MIN_SENSOR_SOURCE_DISTANCE);
        if !separated {
            continue;
        }
        match Deployment::new(positions, source, onset_time, propagation_speed) {
            Ok(d) => return Ok(d),
            Err(_) => continue, // coincident sensors; redraw
        }
    }
    Err(Error::DrawExhausted {
        attempts: MAX_DRAW_ATTEMPTS,
    })
}

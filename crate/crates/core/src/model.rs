//! Geometry and measurement model.
//!
//! A [`Deployment`] fixes the sensor constellation, the true source and onset
//! time; [`generate_measurements`] produces received timestamps according to
//!
//! ```text
//! t_i = t0 + (||x - x_i|| + n_i + q_i) / c,      i = 1..L,
//! ```
//!
//! with Gaussian noise `n_i ~ N(0, sigma_i^2)` and a uniform positive NLOS
//! bias `q_i ~ U(0, omega_i)` (`omega_i = 0` marks a line-of-sight path).
//! TDOAs are the differences against sensor 1, which is the fixed reference.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Euclidean distance between two points of equal dimension.
pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Sensor constellation plus the ground truth that generated the data.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    /// Sensor positions, row-major `L x k` (meters).
    sensors: Vec<f64>,
    /// True source position, length `k` (meters).
    source: Vec<f64>,
    /// True signal onset time `t0` (seconds).
    onset_time: f64,
    /// Propagation speed `c` (m/s).
    propagation_speed: f64,
    dim: usize,
}

impl Deployment {
    /// Validates the geometric invariants: `k` in {2,3}, `L >= k+1`,
    /// `c > 0`, `t0 >= 0`, pairwise distinct sensors, and no sensor at the
    /// source position.
    pub fn new(
        sensors: Vec<Vec<f64>>,
        source: Vec<f64>,
        onset_time: f64,
        propagation_speed: f64,
    ) -> Result<Self> {
        let dim = source.len();
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidDeployment(format!(
                "dimension must be 2 or 3, got {dim}"
            )));
        }
        let count = sensors.len();
        if count < dim + 1 {
            return Err(Error::InvalidDeployment(format!(
                "need at least k+1 = {} sensors, got {count}",
                dim + 1
            )));
        }
        if propagation_speed <= 0.0 {
            return Err(Error::InvalidDeployment(format!(
                "propagation speed must be positive, got {propagation_speed}"
            )));
        }
        if onset_time < 0.0 {
            return Err(Error::InvalidDeployment(format!(
                "onset time must be nonnegative, got {onset_time}"
            )));
        }
        let mut flat = Vec::with_capacity(count * dim);
        for (i, s) in sensors.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::InvalidDeployment(format!(
                    "sensor {} has dimension {}, expected {dim}",
                    i + 1,
                    s.len()
                )));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidDeployment(format!(
                    "sensor {} has a non-finite coordinate",
                    i + 1
                )));
            }
            flat.extend_from_slice(s);
        }
        if !source.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidDeployment(
                "source has a non-finite coordinate".into(),
            ));
        }
        for i in 0..count {
            if euclidean(&flat[i * dim..(i + 1) * dim], &source) <= 0.0 {
                return Err(Error::InvalidDeployment(format!(
                    "sensor {} coincides with the source",
                    i + 1
                )));
            }
            for j in (i + 1)..count {
                if flat[i * dim..(i + 1) * dim] == flat[j * dim..(j + 1) * dim] {
                    return Err(Error::InvalidDeployment(format!(
                        "sensors {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            sensors: flat,
            source,
            onset_time,
            propagation_speed,
            dim,
        })
    }

    /// Number of sensors `L`.
    pub fn sensor_count(&self) -> usize {
        self.sensors.len() / self.dim
    }

    /// Spatial dimension `k`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Position of sensor `i` (0-based).
    pub fn sensor(&self, i: usize) -> &[f64] {
        &self.sensors[i * self.dim..(i + 1) * self.dim]
    }

    /// All sensor positions, row-major `L x k`.
    pub fn sensors_flat(&self) -> &[f64] {
        &self.sensors
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }

    pub fn onset_time(&self) -> f64 {
        self.onset_time
    }

    pub fn propagation_speed(&self) -> f64 {
        self.propagation_speed
    }

    /// True source-to-sensor distance `||x - x_i||` for the 1-based sensor
    /// index `i` (the model convention; storage is 0-based internally).
    pub fn true_range(&self, i: usize) -> Result<f64> {
        let count = self.sensor_count();
        if i == 0 || i > count {
            return Err(Error::SensorIndex {
                index: i,
                len: count,
            });
        }
        Ok(euclidean(self.sensor(i - 1), &self.source))
    }
}

/// Per-sensor noise and NLOS bias magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Gaussian standard deviations `sigma_i` (meters); zero is allowed for
    /// noiseless oracle runs.
    sigma: Vec<f64>,
    /// Uniform NLOS upper bounds `omega_i` (meters); zero marks an LOS path.
    nlos_upper: Vec<f64>,
}

impl NoiseSpec {
    /// Common standard deviation for all `count` sensors, all paths LOS.
    pub fn common(sigma: f64, count: usize) -> Result<Self> {
        Self::per_sensor(vec![sigma; count], vec![0.0; count])
    }

    /// Fully general per-sensor specification.
    pub fn per_sensor(sigma: Vec<f64>, nlos_upper: Vec<f64>) -> Result<Self> {
        if sigma.len() != nlos_upper.len() {
            return Err(Error::InvalidNoise(format!(
                "sigma has {} entries but nlos_upper has {}",
                sigma.len(),
                nlos_upper.len()
            )));
        }
        if let Some(s) = sigma.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidNoise(format!("sigma must be >= 0, got {s}")));
        }
        if let Some(w) = nlos_upper.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidNoise(format!(
                "nlos_upper must be >= 0, got {w}"
            )));
        }
        Ok(Self { sigma, nlos_upper })
    }

    /// Marks the path of 1-based sensor `i` as NLOS with bound `omega`.
    pub fn with_nlos(mut self, i: usize, omega: f64) -> Result<Self> {
        if i == 0 || i > self.sigma.len() {
            return Err(Error::SensorIndex {
                index: i,
                len: self.sigma.len(),
            });
        }
        if !(omega >= 0.0) {
            return Err(Error::InvalidNoise(format!(
                "nlos bound must be >= 0, got {omega}"
            )));
        }
        self.nlos_upper[i - 1] = omega;
        Ok(self)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn nlos_upper(&self) -> &[f64] {
        &self.nlos_upper
    }

    /// True when every path is LOS (`omega_i = 0` for all sensors).
    pub fn is_los(&self) -> bool {
        self.nlos_upper.iter().all(|w| *w == 0.0)
    }
}

/// One realization of received timestamps and the TDOAs derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// Received timestamps `t_i` (seconds), length `L`.
    pub timestamps: Vec<f64>,
    /// `t_{i,1} = t_i - t_1` for `i = 2..L` (seconds), length `L-1`.
    pub tdoas: Vec<f64>,
    /// The drawn `(n_i, q_i)` pairs (meters), kept for diagnostics.
    pub realization: Vec<(f64, f64)>,
}

/// Draws one measurement realization. Reproducible: the same seed and inputs
/// yield a bit-identical [`MeasurementSet`].
///
/// Fails if any resulting timestamp is non-positive, because the temporal
/// constraints of the estimator are premised on `t_i > 0`; clamping instead
/// would corrupt the statistical model.
pub fn generate_measurements(
    deployment: &Deployment,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<MeasurementSet> {
    let count = deployment.sensor_count();
    if noise.sigma.len() != count {
        return Err(Error::InvalidNoise(format!(
            "noise spec covers {} sensors, deployment has {count}",
            noise.sigma.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = deployment.propagation_speed();
    let mut timestamps = Vec::with_capacity(count);
    let mut realization = Vec::with_capacity(count);
    for i in 0..count {
        let n = if noise.sigma[i] > 0.0 {
            // Normal::new only fails on non-finite sigma, excluded above.
            Normal::new(0.0, noise.sigma[i]).unwrap().sample(&mut rng)
        } else {
            0.0
        };
        let q = if noise.nlos_upper[i] > 0.0 {
            rng.gen_range(0.0..noise.nlos_upper[i])
        } else {
            0.0
        };
        let range = euclidean(deployment.sensor(i), deployment.source());
        let t = deployment.onset_time() + (range + n + q) / c;
        if t <= 0.0 {
            return Err(Error::NonPositiveTimestamp {
                sensor: i + 1,
                value: t,
            });
        }
        timestamps.push(t);
        realization.push((n, q));
    }
    let tdoas = timestamps[1..].iter().map(|t| t - timestamps[0]).collect();
    Ok(MeasurementSet {
        timestamps,
        tdoas,
        realization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square_deployment() -> Deployment {
        Deployment::new(
            vec![
                vec![0.0, 0.0],
                vec![20.0, 0.0],
                vec![20.0, 20.0],
                vec![0.0, 20.0],
            ],
            vec![2.0, 3.0],
            0.1,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn true_range_known_values() {
        let d = Deployment::new(
            vec![vec![3.0, 4.0], vec![0.0, 0.0], vec![20.0, 0.0]],
            vec![0.0, 0.0],
            0.1,
            1.0,
        );
        // source at a sensor is forbidden
        assert!(matches!(d, Err(Error::InvalidDeployment(_))));

        let d = Deployment::new(
            vec![vec![3.0, 4.0], vec![0.0, 1.0], vec![20.0, 0.0]],
            vec![0.0, 0.0],
            0.1,
            1.0,
        )
        .unwrap();
        assert_eq!(d.true_range(1).unwrap(), 5.0); // 3-4-5 triangle

        let d2 = Deployment::new(
            vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![10.0, 20.0]],
            vec![2.0, 3.0],
            0.1,
            1.0,
        )
        .unwrap();
        assert_relative_eq!(d2.true_range(1).unwrap(), 13.0f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(d2.true_range(2).unwrap(), 333.0f64.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn true_range_index_errors() {
        let d = square_deployment();
        assert!(matches!(d.true_range(0), Err(Error::SensorIndex { .. })));
        assert!(matches!(d.true_range(5), Err(Error::SensorIndex { .. })));
        assert!(d.true_range(4).is_ok());
    }

    #[test]
    fn deployment_invariants_rejected() {
        // too few sensors
        assert!(Deployment::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            vec![5.0, 5.0],
            0.1,
            1.0
        )
        .is_err());
        // duplicate sensors
        assert!(Deployment::new(
            vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0]],
            vec![5.0, 5.0],
            0.1,
            1.0
        )
        .is_err());
        // bad speed / onset
        assert!(Deployment::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![5.0, 5.0],
            0.1,
            0.0
        )
        .is_err());
        assert!(Deployment::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![5.0, 5.0],
            -0.1,
            1.0
        )
        .is_err());
    }

    #[test]
    fn noiseless_timestamps_exact() {
        let d = square_deployment();
        let noise = NoiseSpec::common(0.0, 4).unwrap();
        let m = generate_measurements(&d, &noise, 7).unwrap();
        // t_1 = 0.1 + sqrt(13)
        assert_relative_eq!(m.timestamps[0], 0.1 + 13.0f64.sqrt(), max_relative = 1e-15);
        for i in 0..4 {
            let r = d.true_range(i + 1).unwrap();
            assert_relative_eq!(
                d.propagation_speed() * (m.timestamps[i] - d.onset_time()),
                r,
                max_relative = 1e-14
            );
        }
        // all realizations zero in LOS noiseless mode
        assert!(m.realization.iter().all(|(n, q)| *n == 0.0 && *q == 0.0));
    }

    #[test]
    fn noiseless_tdoa_example() {
        // sensors at (0,0) and (20,0), source [2,3]: t_{2,1} = sqrt(333) - sqrt(13)
        let d = Deployment::new(
            vec![vec![0.0, 0.0], vec![20.0, 0.0], vec![10.0, 20.0]],
            vec![2.0, 3.0],
            0.1,
            1.0,
        )
        .unwrap();
        let noise = NoiseSpec::common(0.0, 3).unwrap();
        let m = generate_measurements(&d, &noise, 0).unwrap();
        assert_relative_eq!(
            m.tdoas[0],
            333.0f64.sqrt() - 13.0f64.sqrt(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn tdoa_identity_is_bitwise() {
        let d = square_deployment();
        let noise = NoiseSpec::common(0.5, 4).unwrap().with_nlos(2, 5.0).unwrap();
        let m = generate_measurements(&d, &noise, 123).unwrap();
        for (i, tdoa) in m.tdoas.iter().enumerate() {
            assert_eq!(*tdoa, m.timestamps[i + 1] - m.timestamps[0]);
        }
    }

    #[test]
    fn seed_determinism() {
        let d = square_deployment();
        let noise = NoiseSpec::common(0.3, 4).unwrap().with_nlos(1, 2.0).unwrap();
        let a = generate_measurements(&d, &noise, 99).unwrap();
        let b = generate_measurements(&d, &noise, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_measurements(&d, &noise, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn los_paths_have_zero_bias() {
        let d = square_deployment();
        let noise = NoiseSpec::common(0.3, 4).unwrap();
        for seed in 0..20 {
            let m = generate_measurements(&d, &noise, seed).unwrap();
            assert!(m.realization.iter().all(|(_, q)| *q == 0.0));
        }
    }

    #[test]
    fn nlos_bias_mean_matches_uniform() {
        // over many draws the sample mean of q_i should sit near omega/2
        let d = square_deployment();
        let omega = 4.0;
        let noise = NoiseSpec::common(0.1, 4).unwrap().with_nlos(3, omega).unwrap();
        let draws = 100_000;
        let mut sum = 0.0;
        for seed in 0..draws {
            let m = generate_measurements(&d, &noise, seed).unwrap();
            sum += m.realization[2].1;
        }
        let mean = sum / draws as f64;
        // U(0, w): mean w/2, variance w^2/12; allow 3 standard errors
        let se = (omega * omega / 12.0 / draws as f64).sqrt();
        assert!(
            (mean - omega / 2.0).abs() < 3.0 * se,
            "mean {mean} outside 3 SE of {}",
            omega / 2.0
        );
    }

    #[test]
    fn non_positive_timestamp_rejected() {
        // a massive negative noise draw will eventually push t below zero:
        // force it deterministically with a tiny onset and huge sigma
        let d = Deployment::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.5, 0.5],
            0.0,
            1.0,
        )
        .unwrap();
        let noise = NoiseSpec::common(100.0, 3).unwrap();
        let mut saw_rejection = false;
        for seed in 0..50 {
            match generate_measurements(&d, &noise, seed) {
                Err(Error::NonPositiveTimestamp { sensor, .. }) => {
                    assert!((1..=3).contains(&sensor));
                    saw_rejection = true;
                    break;
                }
                Ok(_) => continue,
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(saw_rejection, "expected at least one rejection");
    }
}

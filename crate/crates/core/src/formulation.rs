//! Variable packing, objective, constraints, and the augmented Lagrangian.
//!
//! The estimator works on the packed variable vector `z = [t0, x^T, d^T]^T`
//! of length `N = L + k + 1`. The constraint set, in the documented 1-based
//! order (storage is 0-based; [`ProblemInstance::pair_flat_index`] is the one
//! conversion point for the pair block):
//!
//! ```text
//! g_1        = -t0
//! g_{i+1}    = t0 - t_i                     i = 1..L   (temporal)
//! g_{i+L+1}  = -d_i                         i = 1..L   (distance sign)
//! g_{i+2L+1} = d_i - (t_i - t0) c           i = 1..L   (residual lower bound)
//! g_{i,j}    = (2 t0 - t_i - t_j) c + ||x_i - x_j||    1 <= i < j <= L
//!              flattened at (2L-i)(i-1)/2 + j - i + 3L + 1
//! h_i        = d_i^2 - ||x - x_i||^2        i = 1..L   (squared-range ties)
//! ```
//!
//! giving `K = (L^2 + 5L + 2)/2` inequalities and `M = L` equalities.

use crate::model::{euclidean, Deployment, MeasurementSet};
use crate::{Error, Result};

/// Problem sizes derived from the sensor count `L` and dimension `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    /// Sensor count `L`.
    pub sensors: usize,
    /// Spatial dimension `k`.
    pub dim: usize,
}

impl Dims {
    pub fn new(sensors: usize, dim: usize) -> Self {
        Self { sensors, dim }
    }

    /// Variable count `N = L + k + 1`.
    pub fn vars(&self) -> usize {
        self.sensors + self.dim + 1
    }

    /// Inequality count `K = (L^2 + 5L + 2) / 2`.
    pub fn inequalities(&self) -> usize {
        (self.sensors * self.sensors + 5 * self.sensors + 2) / 2
    }

    /// Equality count `M = L`.
    pub fn equalities(&self) -> usize {
        self.sensors
    }
}

/// Residual loss applied to `(t_i - t0) c - d_i`.
///
/// The robust estimator uses the smoothed absolute value; the non-robust
/// control in the benchmark swaps in half the square with the same machinery.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    SmoothedAbs { gamma: f64 },
    HalfSquare,
}

impl Loss {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Loss::SmoothedAbs { gamma } => smoothed_abs(u, *gamma),
            Loss::HalfSquare => 0.5 * u * u,
        }
    }

    /// Derivative with respect to the residual.
    pub fn grad(&self, u: f64) -> f64 {
        match self {
            Loss::SmoothedAbs { gamma } => smoothed_abs_grad(u, *gamma),
            Loss::HalfSquare => u,
        }
    }
}

/// Smooth approximation of `|u|`: `ln((e^{gamma u} + e^{-gamma u}) / 2) / gamma`,
/// evaluated in the overflow-safe form `|u| + ln((1 + e^{-2 gamma |u|}) / 2) / gamma`.
///
/// Even in `u`, bounded above by `|u|`, and within `ln(2)/gamma` of it.
pub fn smoothed_abs(u: f64, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    let a = u.abs();
    a + ((-2.0 * gamma * a).exp().ln_1p() - std::f64::consts::LN_2) / gamma
}

/// Derivative of [`smoothed_abs`]: `tanh(gamma u)`. Odd, range `(-1, 1)`,
/// saturating without overflow for any argument.
pub fn smoothed_abs_grad(u: f64, gamma: f64) -> f64 {
    debug_assert!(gamma > 0.0);
    let v = gamma * u;
    // beyond |v| = 19 the exact tanh rounds to +-1 in f64 (1 - tanh(19) is
    // about 6e-17, under half an ulp); skipping the exp there keeps the
    // saturated sensors of a robust fit cheap
    if v.abs() > 19.0 {
        return if v > 0.0 { 1.0 } else { -1.0 };
    }
    v.tanh()
}

/// Packed optimization variables `z = [t0, x^T, d^T]^T` (onset first).
#[derive(Debug, Clone, PartialEq)]
pub struct VariableVector {
    data: Vec<f64>,
    dims: Dims,
}

impl VariableVector {
    /// All-zero variables, the network's default initial point.
    pub fn zeros(dims: Dims) -> Self {
        Self {
            data: vec![0.0; dims.vars()],
            dims,
        }
    }

    pub fn from_parts(t0: f64, x: &[f64], d: &[f64]) -> Self {
        let dims = Dims::new(d.len(), x.len());
        let mut data = Vec::with_capacity(dims.vars());
        data.push(t0);
        data.extend_from_slice(x);
        data.extend_from_slice(d);
        Self { data, dims }
    }

    pub fn from_vec(data: Vec<f64>, dims: Dims) -> Result<Self> {
        if data.len() != dims.vars() {
            return Err(Error::InvalidParameter(format!(
                "variable vector has {} entries, dims require {}",
                data.len(),
                dims.vars()
            )));
        }
        Ok(Self { data, dims })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn t0(&self) -> f64 {
        self.data[0]
    }

    pub fn x(&self) -> &[f64] {
        &self.data[1..1 + self.dims.dim]
    }

    pub fn d(&self) -> &[f64] {
        &self.data[1 + self.dims.dim..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Inequality and equality multipliers, `nu = [mu^T, lambda^T]^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierVector {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl MultiplierVector {
    pub fn zeros(dims: Dims) -> Self {
        Self {
            mu: vec![0.0; dims.inequalities()],
            lambda: vec![0.0; dims.equalities()],
        }
    }

    pub fn matches(&self, dims: Dims) -> bool {
        self.mu.len() == dims.inequalities() && self.lambda.len() == dims.equalities()
    }
}

/// Default smoothing sharpness for the robust loss.
pub const DEFAULT_GAMMA: f64 = 100.0;

/// Default augmented-Lagrangian weight.
pub const DEFAULT_RHO: f64 = 5.0;

/// One localization problem: measured timestamps, sensor geometry, and the
/// loss/penalty parameters. Immutable once built; evaluators are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    measurements: MeasurementSet,
    sensors: Vec<f64>, // row-major L x k
    dims: Dims,
    c: f64,
    gamma: f64,
    rho: f64,
    loss: Loss,
    /// `||x_i - x_j||` for `i < j`, in pair-block order (constants of the problem).
    pair_dist: Vec<f64>,
}

impl ProblemInstance {
    /// Builds an instance from a deployment and one measurement realization
    /// with the default `gamma` and `rho`.
    pub fn from_deployment(deployment: &Deployment, measurements: MeasurementSet) -> Result<Self> {
        Self::new(
            deployment.sensors_flat().to_vec(),
            deployment.dim(),
            measurements,
            deployment.propagation_speed(),
            DEFAULT_GAMMA,
            DEFAULT_RHO,
        )
    }

    pub fn new(
        sensors: Vec<f64>,
        dim: usize,
        measurements: MeasurementSet,
        c: f64,
        gamma: f64,
        rho: f64,
    ) -> Result<Self> {
        if dim == 0 || sensors.len() % dim != 0 {
            return Err(Error::InvalidParameter(format!(
                "sensor array of {} values is not a multiple of dimension {dim}",
                sensors.len()
            )));
        }
        let count = sensors.len() / dim;
        if measurements.timestamps.len() != count {
            return Err(Error::InvalidParameter(format!(
                "{} timestamps for {count} sensors",
                measurements.timestamps.len()
            )));
        }
        if !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be positive, got {gamma}"
            )));
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rho must be positive, got {rho}"
            )));
        }
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "propagation speed must be positive, got {c}"
            )));
        }
        let dims = Dims::new(count, dim);
        let mut pair_dist = Vec::with_capacity(count * (count - 1) / 2);
        for i in 0..count {
            for j in (i + 1)..count {
                let dist = euclidean(
                    &sensors[i * dim..(i + 1) * dim],
                    &sensors[j * dim..(j + 1) * dim],
                );
                if dist <= 0.0 {
                    return Err(Error::InvalidDeployment(format!(
                        "sensors {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
                pair_dist.push(dist);
            }
        }
        Ok(Self {
            measurements,
            sensors,
            dims,
            c,
            gamma,
            rho,
            loss: Loss::SmoothedAbs { gamma },
            pair_dist,
        })
    }

    /// Same instance with the residual loss replaced by `u^2 / 2`; the
    /// non-robust control used by the benchmark harness.
    pub fn with_squared_loss(mut self) -> Self {
        self.loss = Loss::HalfSquare;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.measurements.timestamps
    }

    pub fn measurements(&self) -> &MeasurementSet {
        &self.measurements
    }

    pub fn sensor(&self, i: usize) -> &[f64] {
        &self.sensors[i * self.dims.dim..(i + 1) * self.dims.dim]
    }

    pub fn sensors_flat(&self) -> &[f64] {
        &self.sensors
    }

    pub fn propagation_speed(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    /// Precomputed `||x_i - x_j||` for the 0-based pair `(i, j)`, `i < j`.
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        self.pair_dist[self.pair_rank(i, j)]
    }

    /// Rank of the 0-based pair `(i, j)` within the `i < j` enumeration.
    fn pair_rank(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j && j < self.dims.sensors);
        let l = self.dims.sensors;
        (2 * l - i - 1) * i / 2 + j - i - 1
    }

    /// 0-based storage index of the pair constraint for 0-based sensors
    /// `(i, j)`, `i < j`. This is the single conversion point from the
    /// documented 1-based layout `(2L-i)(i-1)/2 + j - i + 3L + 1`.
    pub fn pair_flat_index(&self, i: usize, j: usize) -> usize {
        let l = self.dims.sensors;
        debug_assert!(i < j && j < l);
        let (pi, pj) = (i + 1, j + 1);
        (2 * l - pi) * (pi - 1) / 2 + pj - pi + 3 * l + 1 - 1
    }

    /// Inverse of [`Self::pair_flat_index`]: recovers the 0-based `(i, j)`
    /// from a 0-based flat index in `3L+1..K`.
    pub fn pair_from_flat(&self, flat: usize) -> (usize, usize) {
        let l = self.dims.sensors;
        debug_assert!((3 * l + 1..self.dims.inequalities()).contains(&flat));
        let mut rank = flat - (3 * l + 1);
        let mut i = 0;
        while rank >= l - 1 - i {
            rank -= l - 1 - i;
            i += 1;
        }
        (i, i + 1 + rank)
    }

    /// Residual `(t_i - t0) c - d_i` for 0-based sensor `i`.
    pub fn residual(&self, z: &VariableVector, i: usize) -> f64 {
        (self.measurements.timestamps[i] - z.t0()) * self.c - z.d()[i]
    }

    /// Objective: the loss summed over all residuals.
    pub fn objective(&self, z: &VariableVector) -> f64 {
        (0..self.dims.sensors)
            .map(|i| self.loss.value(self.residual(z, i)))
            .sum()
    }

    /// Evaluates all `K` inequality constraints into `out` in the documented
    /// order.
    pub fn eval_inequalities_into(&self, z: &VariableVector, out: &mut [f64]) {
        let l = self.dims.sensors;
        debug_assert_eq!(out.len(), self.dims.inequalities());
        let t = &self.measurements.timestamps;
        let t0 = z.t0();
        let d = z.d();
        out[0] = -t0;
        for i in 0..l {
            out[1 + i] = t0 - t[i];
            out[1 + l + i] = -d[i];
            out[1 + 2 * l + i] = d[i] - (t[i] - t0) * self.c;
        }
        let mut flat = 3 * l + 1;
        let mut rank = 0;
        for i in 0..l {
            for j in (i + 1)..l {
                out[flat] = (2.0 * t0 - t[i] - t[j]) * self.c + self.pair_dist[rank];
                flat += 1;
                rank += 1;
            }
        }
    }

    /// Allocating wrapper around [`Self::eval_inequalities_into`].
    pub fn eval_inequalities(&self, z: &VariableVector) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.inequalities()];
        self.eval_inequalities_into(z, &mut out);
        out
    }

    /// Evaluates the `M` equality constraints `h_i = d_i^2 - ||x - x_i||^2`.
    pub fn eval_equalities_into(&self, z: &VariableVector, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dims.equalities());
        let d = z.d();
        let x = z.x();
        for i in 0..self.dims.sensors {
            let r2: f64 = self
                .sensor(i)
                .iter()
                .zip(x)
                .map(|(s, p)| (p - s) * (p - s))
                .sum();
            out[i] = d[i] * d[i] - r2;
        }
    }

    /// Allocating wrapper around [`Self::eval_equalities_into`].
    pub fn eval_equalities(&self, z: &VariableVector) -> Vec<f64> {
        let mut out = vec![0.0; self.dims.equalities()];
        self.eval_equalities_into(z, &mut out);
        out
    }

    /// The augmented Lagrangian
    /// `L_rho(z, nu) = f(z) + mu^T g(z) + lambda^T h(z)
    ///  + (rho/2) (sum_i [mu_i g_i(z)]^2 + sum_i [lambda_i h_i(z)]^2)`.
    ///
    /// Used for monitoring and finite-difference checks; the integrator works
    /// from the closed-form gradient instead.
    pub fn augmented_lagrangian(&self, z: &VariableVector, nu: &MultiplierVector) -> f64 {
        let g = self.eval_inequalities(z);
        let h = self.eval_equalities(z);
        let mut value = self.objective(z);
        let mut penalty = 0.0;
        for (mu, gi) in nu.mu.iter().zip(&g) {
            value += mu * gi;
            penalty += (mu * gi) * (mu * gi);
        }
        for (lam, hi) in nu.lambda.iter().zip(&h) {
            value += lam * hi;
            penalty += (lam * hi) * (lam * hi);
        }
        value + 0.5 * self.rho * penalty
    }

    /// Closed-form gradient of the augmented Lagrangian with respect to `z`,
    /// written into `grad` (length `N`). `h` must already hold the equality
    /// values for `z` (they are shared with the multiplier dynamics).
    ///
    /// The three blocks, with `s_i` the loss gradient evaluated at
    /// `d_i + (t0 - t_i) c` (for the smoothed-abs loss this is the saturating
    /// `tanh(gamma [d_i + (t0 - t_i) c])`):
    ///
    /// ```text
    /// dL/dt0 = c sum_i s_i - mu_1 + sum_i mu_{i+1} + c sum_i mu_{i+2L+1}
    ///          + 2c sum_{i<j} mu_{ij}
    ///          + rho { mu_1^2 t0 + sum_i mu_{i+1}^2 (t0 - t_i)
    ///                  + c sum_i mu_{i+2L+1}^2 [d_i - (t_i - t0) c]
    ///                  + 2c sum_{i<j} mu_{ij}^2 g_{ij} }
    /// dL/dx  = 2 sum_i [lambda_i + rho lambda_i^2 h_i] (x_i - x)
    /// dL/dd_i = s_i - mu_{i+L+1} + mu_{i+2L+1} + 2 lambda_i d_i
    ///           + rho { mu_{i+L+1}^2 d_i + mu_{i+2L+1}^2 [d_i - (t_i - t0) c]
    ///                   + 2 lambda_i^2 d_i h_i }
    /// ```
    pub fn grad_augmented_lagrangian_raw(
        &self,
        z: &VariableVector,
        mu: &[f64],
        lambda: &[f64],
        h: &[f64],
        grad: &mut [f64],
    ) {
        let l = self.dims.sensors;
        let k = self.dims.dim;
        let c = self.c;
        let rho = self.rho;
        let t = &self.measurements.timestamps;
        let t0 = z.t0();
        let x = z.x();
        let d = z.d();
        debug_assert_eq!(mu.len(), self.dims.inequalities());
        debug_assert_eq!(lambda.len(), self.dims.equalities());
        debug_assert_eq!(grad.len(), self.dims.vars());
        debug_assert_eq!(h.len(), l);

        // one pass over sensors: the loss slope s_i feeds both the t0 and
        // d_i blocks
        let mut dt0 = -mu[0] + rho * mu[0] * mu[0] * t0;
        for i in 0..l {
            let s = self.loss.grad(d[i] + (t0 - t[i]) * c);
            let mu_t = mu[1 + i];
            let mu_d = mu[1 + l + i];
            let mu_b = mu[1 + 2 * l + i];
            let bound = d[i] - (t[i] - t0) * c;
            dt0 += c * s + mu_t + c * mu_b + rho * (mu_t * mu_t * (t0 - t[i]) + c * mu_b * mu_b * bound);
            grad[1 + k + i] = s - mu_d + mu_b + 2.0 * lambda[i] * d[i]
                + rho * (mu_d * mu_d * d[i] + mu_b * mu_b * bound
                    + 2.0 * lambda[i] * lambda[i] * d[i] * h[i]);
        }
        let mut rank = 0;
        for i in 0..l {
            for j in (i + 1)..l {
                let mu_p = mu[3 * l + 1 + rank];
                let g_p = (2.0 * t0 - t[i] - t[j]) * c + self.pair_dist[rank];
                dt0 += 2.0 * c * (mu_p + rho * mu_p * mu_p * g_p);
                rank += 1;
            }
        }
        grad[0] = dt0;

        // dL/dx
        for gx in grad[1..1 + k].iter_mut() {
            *gx = 0.0;
        }
        for i in 0..l {
            let w = 2.0 * (lambda[i] + rho * lambda[i] * lambda[i] * h[i]);
            let xi = self.sensor(i);
            for a in 0..k {
                grad[1 + a] += w * (xi[a] - x[a]);
            }
        }
    }

    /// Allocating wrapper around [`Self::grad_augmented_lagrangian_raw`].
    pub fn grad_augmented_lagrangian(&self, z: &VariableVector, nu: &MultiplierVector) -> Vec<f64> {
        let h = self.eval_equalities(z);
        let mut grad = vec![0.0; self.dims.vars()];
        self.grad_augmented_lagrangian_raw(z, &nu.mu, &nu.lambda, &h, &mut grad);
        grad
    }
}

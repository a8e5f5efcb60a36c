//! LOS Cramér-Rao lower bound for TDOA positioning.
//!
//! With i.i.d. Gaussian range noise `n_i ~ N(0, sigma^2)` and sensor 1 as
//! the reference, the range-difference vector `m_i(x) = ||x - x_i|| -
//! ||x - x_1||` (`i = 2..L`) carries noise `n_i - n_1` with covariance
//! `Sigma = sigma^2 (I + 1 1^T)`. The Fisher information for the source
//! position is then `J^T Sigma^{-1} J` with `J` the Jacobian of `m`, and
//! the bound on the RMSE of any unbiased estimator is
//! `sqrt(trace(FIM^{-1}))`. By Sherman-Morrison,
//! `(I + 1 1^T)^{-1} = I - 1 1^T / L`.

use nalgebra::{DMatrix, DVector};

use crate::model::Deployment;
use crate::{Error, Result};

/// Position-error lower bound (meters) for unbiased estimation from LOS
/// TDOA measurements with common noise level `sigma`.
pub fn crlb_los(deployment: &Deployment, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let l = deployment.sensor_count();
    let k = deployment.dim();
    let x = deployment.source();

    // unit vectors u_i = (x - x_i) / ||x - x_i||
    let unit = |i: usize| -> Result<DVector<f64>> {
        let s = deployment.sensor(i);
        let r = crate::model::euclidean(s, x);
        if r <= 0.0 {
            return Err(Error::DegenerateGeometry(format!(
                "source coincides with sensor {}",
                i + 1
            )));
        }
        Ok(DVector::from_iterator(k, x.iter().zip(s).map(|(a, b)| (a - b) / r)))
    };

    let u1 = unit(0)?;
    let mut jac = DMatrix::zeros(l - 1, k);
    for i in 1..l {
        let ui = unit(i)?;
        for a in 0..k {
            jac[(i - 1, a)] = ui[a] - u1[a];
        }
    }

    // Sigma^{-1} = (I - 1 1^T / L) / sigma^2
    let jt_row_sums: DVector<f64> = jac.row_sum_tr();
    let fim = (jac.transpose() * &jac - (&jt_row_sums * jt_row_sums.transpose()) / l as f64)
        / (sigma * sigma);

    let inv = fim.clone().try_inverse().ok_or_else(|| {
        Error::DegenerateGeometry("singular Fisher information matrix".into())
    })?;
    let trace = inv.trace();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(Error::DegenerateGeometry(
            "Fisher information matrix is numerically singular".into(),
        ));
    }
    Ok(trace.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_deterministic;
    use approx::assert_relative_eq;

    fn preset() -> Deployment {
        build_deterministic(8, 20.0, vec![2.0, 3.0]).unwrap()
    }

    #[test]
    fn bound_scales_linearly_in_sigma() {
        let dep = preset();
        let b1 = crlb_los(&dep, 0.1).unwrap();
        let b2 = crlb_los(&dep, 0.2).unwrap();
        assert_relative_eq!(b2, 2.0 * b1, max_relative = 1e-12);
    }

    #[test]
    fn bound_invariant_under_rigid_rotation() {
        let dep = preset();
        let theta: f64 = 0.77;
        let rot = |p: &[f64]| {
            vec![
                theta.cos() * p[0] - theta.sin() * p[1],
                theta.sin() * p[0] + theta.cos() * p[1],
            ]
        };
        let rotated = Deployment::new(
            (0..8).map(|i| rot(dep.sensor(i))).collect(),
            rot(dep.source()),
            dep.onset_time(),
            dep.propagation_speed(),
        )
        .unwrap();
        assert_relative_eq!(
            crlb_los(&dep, 0.3).unwrap(),
            crlb_los(&rotated, 0.3).unwrap(),
            max_relative = 1e-10
        );
    }

    #[test]
    fn collinear_geometry_is_singular() {
        let dep = Deployment::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]],
            vec![10.0, 0.0],
            0.1,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            crlb_los(&dep, 0.1),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn sigma_validation() {
        assert!(crlb_los(&preset(), 0.0).is_err());
        assert!(crlb_los(&preset(), -1.0).is_err());
    }

    #[test]
    fn matches_direct_fim_assembly() {
        // independent assembly of J^T Sigma^{-1} J with an explicitly
        // inverted covariance, on a small asymmetric geometry
        let dep = Deployment::new(
            vec![
                vec![0.0, 0.0],
                vec![13.0, 1.0],
                vec![4.0, 17.0],
                vec![19.0, 12.0],
                vec![7.0, 3.0],
            ],
            vec![6.0, 5.0],
            0.1,
            1.0,
        )
        .unwrap();
        let sigma = 0.25;
        let l = 5;
        let x = dep.source();
        let mut jac = DMatrix::zeros(l - 1, 2);
        let u = |i: usize| {
            let s = dep.sensor(i);
            let r = crate::model::euclidean(s, x);
            [(x[0] - s[0]) / r, (x[1] - s[1]) / r]
        };
        for i in 1..l {
            let (ui, u1) = (u(i), u(0));
            jac[(i - 1, 0)] = ui[0] - u1[0];
            jac[(i - 1, 1)] = ui[1] - u1[1];
        }
        let cov = DMatrix::from_fn(l - 1, l - 1, |r, c| {
            sigma * sigma * if r == c { 2.0 } else { 1.0 }
        });
        let fim = jac.transpose() * cov.try_inverse().unwrap() * &jac;
        let expected = fim.try_inverse().unwrap().trace().sqrt();
        assert_relative_eq!(crlb_los(&dep, sigma).unwrap(), expected, max_relative = 1e-10);
    }
}

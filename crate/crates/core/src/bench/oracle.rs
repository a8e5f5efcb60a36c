//! Brute-force grid oracle.
//!
//! Desk-scale verification tool: exhaustively minimizes the exact
//! (non-smoothed) absolute-deviation objective
//! `sum_i |(t_i - t0) c - ||x - x_i|||` over a planar `(t0, x)` grid,
//! rejecting grid points that violate the estimator's constraint set — the
//! onset bounds `0 <= t0 <= t_i`, the pairwise triangle constraints, and the
//! residual lower bounds `(t_i - t0) c >= ||x - x_i||`. With the distances
//! eliminated by `d_i = ||x - x_i||`, this searches exactly the feasible set
//! of the constrained program the network solves, independently of the
//! network path.

use crate::formulation::ProblemInstance;
use crate::model::euclidean;
use crate::{Error, Result};

/// Best feasible grid point found by the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOracleResult {
    pub position: Vec<f64>,
    pub onset: f64,
    pub objective: f64,
}

/// Exhaustive constrained search over `x in [lo, hi]^2` and the feasible
/// onset range, both discretized at `resolution` per axis.
pub fn grid_oracle(
    inst: &ProblemInstance,
    region: (f64, f64),
    resolution: f64,
) -> Result<GridOracleResult> {
    let dims = inst.dims();
    if dims.dim != 2 {
        return Err(Error::InvalidParameter(
            "the grid oracle is planar-only".into(),
        ));
    }
    if !(resolution > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let (lo, hi) = region;
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "empty region [{lo}, {hi}]"
        )));
    }
    let l = dims.sensors;
    let t = inst.timestamps();
    let c = inst.propagation_speed();

    // Feasible onset interval from the temporal and triangle constraints;
    // neither involves x once the distances are eliminated.
    let mut t0_hi = t.iter().cloned().fold(f64::INFINITY, f64::min);
    for i in 0..l {
        for j in (i + 1)..l {
            t0_hi = t0_hi.min(((t[i] + t[j]) * c - inst.pair_distance(i, j)) / (2.0 * c));
        }
    }
    if t0_hi < 0.0 {
        return Err(Error::EmptyFeasibleGrid);
    }

    let axis_points = ((hi - lo) / resolution).round() as usize + 1;
    let t0_points = (t0_hi / resolution).floor() as usize + 1;

    let mut best: Option<GridOracleResult> = None;
    let mut ranges = vec![0.0f64; l];
    for ix in 0..axis_points {
        let x0 = lo + ix as f64 * resolution;
        for iy in 0..axis_points {
            let x1 = lo + iy as f64 * resolution;
            let point = [x0, x1];
            // The residual lower bounds cap t0 at min_i (t_i - r_i / c);
            // a grid x whose cap is negative has no feasible onset at all.
            let mut cap = t0_hi;
            for i in 0..l {
                ranges[i] = euclidean(inst.sensor(i), &point);
                cap = cap.min(t[i] - ranges[i] / c);
            }
            if cap < 0.0 {
                continue;
            }
            for it in 0..t0_points {
                let t0 = it as f64 * resolution;
                if t0 > cap {
                    break;
                }
                let objective: f64 = (0..l)
                    .map(|i| ((t[i] - t0) * c - ranges[i]).abs())
                    .sum();
                if best.as_ref().map_or(true, |b| objective < b.objective) {
                    best = Some(GridOracleResult {
                        position: point.to_vec(),
                        onset: t0,
                        objective,
                    });
                }
            }
        }
    }
    best.ok_or(Error::EmptyFeasibleGrid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_measurements, NoiseSpec};
    use crate::scenario::build_deterministic;

    fn noiseless_instance() -> ProblemInstance {
        let dep = build_deterministic(8, 20.0, vec![2.0, 3.0]).unwrap();
        let noise = NoiseSpec::common(0.0, 8).unwrap();
        let m = generate_measurements(&dep, &noise, 0).unwrap();
        ProblemInstance::from_deployment(&dep, m).unwrap()
    }

    #[test]
    fn noiseless_minimizer_lands_on_the_source_cell() {
        let inst = noiseless_instance();
        let result = grid_oracle(&inst, (0.0, 20.0), 0.01).unwrap();
        // the truth cell wins; its objective is bounded by the onset
        // quantization (at most one resolution step below the cap times L)
        assert!((result.position[0] - 2.0).abs() < 0.011, "{result:?}");
        assert!((result.position[1] - 3.0).abs() < 0.011, "{result:?}");
        assert!(result.objective <= 8.0 * 0.011, "{result:?}");
        assert!((result.onset - 0.1).abs() < 0.011, "{result:?}");
    }

    #[test]
    fn refining_the_grid_never_worsens_the_objective() {
        let dep = build_deterministic(8, 20.0, vec![2.0, 3.0]).unwrap();
        let noise = NoiseSpec::common(0.3, 8).unwrap().with_nlos(1, 5.0).unwrap();
        let m = generate_measurements(&dep, &noise, 3).unwrap();
        let inst = ProblemInstance::from_deployment(&dep, m).unwrap();
        let coarse = grid_oracle(&inst, (0.0, 20.0), 0.2).unwrap();
        let fine = grid_oracle(&inst, (0.0, 20.0), 0.1).unwrap();
        assert!(fine.objective <= coarse.objective + 1e-12);
    }

    #[test]
    fn oracle_respects_the_onset_cap() {
        let inst = noiseless_instance();
        let result = grid_oracle(&inst, (0.0, 20.0), 0.05).unwrap();
        let t = inst.timestamps();
        // feasibility at the reported point
        assert!(result.onset >= 0.0);
        for i in 0..8 {
            let r = euclidean(inst.sensor(i), &result.position);
            assert!(result.onset <= t[i]);
            assert!(
                (t[i] - result.onset) * inst.propagation_speed() >= r - 1e-12,
                "residual bound violated at sensor {i}"
            );
        }
    }

    #[test]
    fn three_d_rejected() {
        let dep = crate::model::Deployment::new(
            vec![
                vec![0.0, 0.0, 0.0],
                vec![1.0, 0.0, 0.0],
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
            ],
            vec![0.3, 0.3, 0.3],
            0.1,
            1.0,
        )
        .unwrap();
        let noise = NoiseSpec::common(0.0, 4).unwrap();
        let m = generate_measurements(&dep, &noise, 0).unwrap();
        let inst = ProblemInstance::from_deployment(&dep, m).unwrap();
        assert!(grid_oracle(&inst, (0.0, 1.0), 0.1).is_err());
    }
}

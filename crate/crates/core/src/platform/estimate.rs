use thiserror::Error;

use crate::geometry::{Pose2D, Vec2};
use crate::robot_sim::MatReading;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimateError {
    #[error("pose estimation needs at least 2 valid readings, got {0}")]
    InsufficientReadings(usize),
    #[error("{readings} readings for {mounts} mounts")]
    CountMismatch { readings: usize, mounts: usize },
}

/// Least-squares rigid fit of the platform mount offsets onto the measured
/// robot positions (2D Kabsch, no scaling). `readings[i]` belongs to `mounts[i]`;
/// invalid readings are ignored.
pub fn estimate_platform_pose(readings: &[MatReading], mounts: &[Vec2]) -> Result<Pose2D, EstimateError> {
    if readings.len() != mounts.len() {
        return Err(EstimateError::CountMismatch {
            readings: readings.len(),
            mounts: mounts.len(),
        });
    }
    let pairs: Vec<(Vec2, Vec2)> = readings
        .iter()
        .zip(mounts)
        .filter(|(r, _)| r.valid)
        .map(|(r, &m)| (m, r.measured.position()))
        .collect();
    if pairs.len() < 2 {
        return Err(EstimateError::InsufficientReadings(pairs.len()));
    }
    Ok(fit_rigid(&pairs))
}

/// Minimizes sum |R(theta) m + t - p|^2 over (theta, t).
pub(crate) fn fit_rigid(pairs: &[(Vec2, Vec2)]) -> Pose2D {
    let n = pairs.len() as f64;
    let (sm, sp) = pairs
        .iter()
        .fold((Vec2::ZERO, Vec2::ZERO), |(a, b), &(m, p)| (a + m, b + p));
    let (cm, cp) = (sm * (1.0 / n), sp * (1.0 / n));
    let (mut dot, mut cross) = (0.0, 0.0);
    for &(m, p) in pairs {
        let (a, b) = (m - cm, p - cp);
        dot += a.dot(b);
        cross += a.cross(b);
    }
    let theta = cross.atan2(dot);
    let t = cp - cm.rotated(theta);
    Pose2D::new(t.x, t.y, theta)
}

/// Sum of squared residuals of `pose` against the valid readings.
pub fn registration_cost(pose: &Pose2D, readings: &[MatReading], mounts: &[Vec2]) -> f64 {
    let tf = pose.as_transform();
    readings
        .iter()
        .zip(mounts)
        .filter(|(r, _)| r.valid)
        .map(|(r, &m)| {
            let d = tf.apply_point(m) - r.measured.position();
            d.dot(d)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use std::f64::consts::PI;

    fn reading(id: u32, p: Vec2) -> MatReading {
        MatReading {
            robot_id: id,
            measured: Pose2D::new(p.x, p.y, 0.0),
            timestamp: 0.0,
            valid: true,
        }
    }

    fn readings_for(pose: &Pose2D, mounts: &[Vec2]) -> Vec<MatReading> {
        let tf = pose.as_transform();
        mounts.iter().enumerate().map(|(i, &m)| reading(i as u32, tf.apply_point(m))).collect()
    }

    #[test]
    fn exact_recovery() {
        let mounts = [Vec2::new(0.03, 0.0), Vec2::new(-0.015, 0.026), Vec2::new(-0.015, -0.026)];
        for pose in [Pose2D::new(0.2, 0.3, 0.0), Pose2D::new(0.41, 0.07, 2.9), Pose2D::new(0.1, 0.5, -1.2)] {
            let est = estimate_platform_pose(&readings_for(&pose, &mounts), &mounts).unwrap();
            assert!((est.x - pose.x).abs() < 1e-10);
            assert!((est.y - pose.y).abs() < 1e-10);
            assert!(wrap(est.theta - pose.theta).abs() < 1e-10);
        }
    }

    #[test]
    fn swapped_pair_is_half_turn() {
        let mounts = [Vec2::new(-0.03, 0.0), Vec2::new(0.03, 0.0)];
        let r = [reading(0, Vec2::new(0.33, 0.2)), reading(1, Vec2::new(0.27, 0.2))];
        let est = estimate_platform_pose(&r, &mounts).unwrap();
        assert!((est.theta.abs() - PI).abs() < 1e-12);
        assert!((est.x - 0.3).abs() < 1e-12 && (est.y - 0.2).abs() < 1e-12);
    }

    #[test]
    fn needs_two_valid() {
        let mounts = [Vec2::new(-0.03, 0.0), Vec2::new(0.03, 0.0)];
        let mut r = [reading(0, Vec2::new(0.27, 0.2)), reading(1, Vec2::new(0.33, 0.2))];
        r[1].valid = false;
        assert_eq!(estimate_platform_pose(&r, &mounts), Err(EstimateError::InsufficientReadings(1)));
        assert!(estimate_platform_pose(&r[..1], &mounts).is_err());
    }

    /// Grid search over (x, y, theta) followed by coordinate-wise refinement.
    fn brute_force_fit(readings: &[MatReading], mounts: &[Vec2], near: Vec2) -> f64 {
        let mut best = (Pose2D::default(), f64::INFINITY);
        for i in -10..=10 {
            for j in -10..=10 {
                for k in 0..72 {
                    let p = Pose2D::new(near.x + i as f64 * 1e-3, near.y + j as f64 * 1e-3, k as f64 * PI / 36.0);
                    let c = registration_cost(&p, readings, mounts);
                    if c < best.1 {
                        best = (p, c);
                    }
                }
            }
        }
        let mut step = [1e-3, 1e-3, PI / 36.0];
        for _ in 0..200 {
            for axis in 0..3 {
                for dir in [-1.0, 1.0] {
                    loop {
                        let mut p = best.0;
                        match axis {
                            0 => p.x += dir * step[0],
                            1 => p.y += dir * step[1],
                            _ => p.theta += dir * step[2],
                        }
                        let c = registration_cost(&p, readings, mounts);
                        if c < best.1 {
                            best = (p, c);
                        } else {
                            break;
                        }
                    }
                }
            }
            step.iter_mut().for_each(|s| *s *= 0.7);
        }
        best.1
    }

    #[test]
    fn noisy_fit_matches_brute_force() {
        let mounts = [Vec2::new(0.04, 0.01), Vec2::new(-0.02, 0.03), Vec2::new(-0.01, -0.035)];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.001).unwrap();
        for trial in 0..100 {
            let truth = Pose2D::new(0.1 + 0.003 * trial as f64, 0.25, -3.0 + 0.06 * trial as f64);
            let mut r = readings_for(&truth, &mounts);
            for m in &mut r {
                m.measured.x += noise.sample(&mut rng);
                m.measured.y += noise.sample(&mut rng);
            }
            let est = estimate_platform_pose(&r, &mounts).unwrap();
            let ours = registration_cost(&est, &r, &mounts);
            let oracle = brute_force_fit(&r, &mounts, truth.position());
            assert!(ours <= oracle + 1e-6, "trial {trial}: {ours} vs {oracle}");
            assert!((ours - oracle).abs() < 1e-6);
        }
    }
}

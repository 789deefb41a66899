//! Differential-drive robots and the position-sensing mat they drive on.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::Config;
use crate::geometry::{wrap, Pose2D, Rect, Vec2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step must be > 0 (got {0})")]
    NonPositiveStep(f64),
}

/// Wheel surface speeds, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub left: f64,
    pub right: f64,
}

impl WheelSpeeds {
    pub const fn new(left: f64, right: f64) -> Self {
        Self { left, right }
    }

    pub fn max_abs(&self) -> f64 {
        self.left.abs().max(self.right.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Robot {
    pub id: u32,
    /// Ground truth.
    pub pose: Pose2D,
    pub wheels: WheelSpeeds,
    pub max_wheel_speed: f64,
    pub axle_track: f64,
    /// First-order wheel lag time constant; 0 means commands act immediately.
    pub actuator_lag: f64,
}

impl Robot {
    pub fn from_config(id: u32, pose: Pose2D, config: &Config) -> Self {
        Self {
            id,
            pose,
            wheels: WheelSpeeds::default(),
            max_wheel_speed: config.robot.max_wheel_speed,
            axle_track: config.robot.axle_track,
            actuator_lag: config.robot.actuator_lag,
        }
    }
}

/// Integrates one robot over `dt` with the wheel command held constant.
///
/// Uses the exact circular-arc solution of the unicycle model, so stepping
/// twice by `dt` equals stepping once by `2 dt`.
pub fn step_robot(r: &Robot, cmd: WheelSpeeds, dt: f64) -> Result<Robot, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveStep(dt));
    }
    let m = r.max_wheel_speed;
    let target = WheelSpeeds::new(cmd.left.clamp(-m, m), cmd.right.clamp(-m, m));
    let wheels = if r.actuator_lag > 0.0 {
        let a = 1.0 - (-dt / r.actuator_lag).exp();
        WheelSpeeds::new(
            r.wheels.left + (target.left - r.wheels.left) * a,
            r.wheels.right + (target.right - r.wheels.right) * a,
        )
    } else {
        target
    };
    let v = 0.5 * (wheels.left + wheels.right);
    let omega = (wheels.right - wheels.left) / r.axle_track;
    let Pose2D { x, y, theta } = r.pose;
    let pose = if omega.abs() > 1e-9 {
        let th1 = theta + omega * dt;
        let rad = v / omega;
        Pose2D {
            x: x + rad * (th1.sin() - theta.sin()),
            y: y - rad * (th1.cos() - theta.cos()),
            theta: wrap(th1),
        }
    } else {
        Pose2D {
            x: x + v * dt * theta.cos(),
            y: y + v * dt * theta.sin(),
            theta,
        }
    };
    Ok(Robot {
        pose,
        wheels,
        ..r.clone()
    })
}

/// One pose report from the mat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatReading {
    pub robot_id: u32,
    pub measured: Pose2D,
    pub timestamp: f64,
    pub valid: bool,
}

fn quantize(v: f64, res: f64) -> f64 {
    (v / res).round() * res
}

/// Reads a robot's pose off the mat: Gaussian noise per axis, then quantized.
///
/// A robot whose true position is off the mat reads nothing (`valid = false`).
/// Heading is reported as-is.
pub fn sense_mat<R: Rng + ?Sized>(
    r: &Robot,
    mat: &Rect,
    noise_sigma: f64,
    resolution: f64,
    timestamp: f64,
    rng: &mut R,
) -> MatReading {
    if !mat.contains(r.pose.position()) {
        return MatReading {
            robot_id: r.id,
            measured: Pose2D::default(),
            timestamp,
            valid: false,
        };
    }
    let mut p = r.pose.position();
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("sigma is finite and positive");
        p = p + Vec2::new(normal.sample(rng), normal.sample(rng));
    }
    let q = mat.clamp(Vec2::new(quantize(p.x, resolution), quantize(p.y, resolution)));
    MatReading {
        robot_id: r.id,
        measured: Pose2D {
            x: q.x,
            y: q.y,
            theta: r.pose.theta,
        },
        timestamp,
        valid: true,
    }
}

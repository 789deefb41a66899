use serde::{Deserialize, Serialize};

use super::Twist2D;
use crate::config::Config;
use crate::geometry::{wrap, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains {
    pub kp: f64,
    pub ktheta: f64,
    pub speed_cap: f64,
    pub omega_cap: f64,
    pub deadband_position: f64,
    /// rad
    pub deadband_angle: f64,
}

impl ControlGains {
    pub fn from_config(c: &Config) -> Self {
        Self {
            kp: c.control.kp,
            ktheta: c.control.ktheta,
            speed_cap: c.platform.speed_cap,
            omega_cap: c.platform.omega_cap,
            deadband_position: c.control.deadband_position,
            deadband_angle: c.deadband_angle(),
        }
    }
}

/// True when `estimate` is inside the deadband around `target`.
pub fn in_deadband(estimate: &Pose2D, target: &Pose2D, gains: &ControlGains) -> bool {
    estimate.position().distance(target.position()) <= gains.deadband_position
        && wrap(target.theta - estimate.theta).abs() <= gains.deadband_angle
}

/// Proportional go-to-pose law with speed caps; zero inside the deadband.
pub fn goto_twist(estimate: &Pose2D, target: &Pose2D, gains: &ControlGains) -> Twist2D {
    if in_deadband(estimate, target, gains) {
        return Twist2D::ZERO;
    }
    let err = target.position() - estimate.position();
    let mut v = err * gains.kp;
    let speed = v.norm();
    if speed > gains.speed_cap {
        v = v * (gains.speed_cap / speed);
    }
    let omega = (gains.ktheta * wrap(target.theta - estimate.theta)).clamp(-gains.omega_cap, gains.omega_cap);
    Twist2D { vx: v.x, vy: v.y, omega }
}

//! Rigid transducer platforms carried by two to four pivot-mounted drive robots.
//!
//! Each robot sits on a free pivot under the platform, so it acts as a
//! powered caster: it steers its own heading with differential wheel speeds
//! and pushes the platform along that heading. A team of such nonholonomic
//! modules gives a holonomic platform.

mod controller;
mod estimate;

use serde::{Deserialize, Serialize};

pub use controller::{goto_twist, in_deadband, ControlGains};
pub use estimate::{estimate_platform_pose, registration_cost, EstimateError};

use crate::config::Config;
use crate::geometry::{wrap, Pose2D, Rect, Vec2};
use crate::robot_sim::{SimError, WheelSpeeds};

/// Planar rigid-body velocity in the world frame, referenced to the platform center.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist2D {
    pub vx: f64,
    pub vy: f64,
    pub omega: f64,
}

impl Twist2D {
    pub const ZERO: Twist2D = Twist2D { vx: 0.0, vy: 0.0, omega: 0.0 };

    pub fn linear(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn scaled(&self, s: f64) -> Twist2D {
        Twist2D {
            vx: self.vx * s,
            vy: self.vy * s,
            omega: self.omega * s,
        }
    }

    /// Velocity of the body point at world-frame lever arm `r` from the center.
    pub fn velocity_at(&self, r: Vec2) -> Vec2 {
        self.linear() + r.perp() * self.omega
    }
}

/// Drive-module and workspace limits shared by every platform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformLimits {
    pub max_wheel_speed: f64,
    pub axle_track: f64,
    /// rad/s
    pub steering_rate: f64,
    /// Region the platform center must stay inside.
    pub workspace: Rect,
}

impl PlatformLimits {
    pub fn from_config(c: &Config) -> Self {
        Self {
            max_wheel_speed: c.robot.max_wheel_speed,
            axle_track: c.robot.axle_track,
            steering_rate: c.platform.steering_rate,
            workspace: c.platform_workspace(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Platform {
    pub id: u32,
    pub pose: Pose2D,
    /// Robot positions in the platform frame.
    pub mounts: Vec<Vec2>,
    /// World-frame heading of each pivot-mounted robot.
    pub headings: Vec<f64>,
    /// Ids of the mounted robots, parallel to `mounts`.
    pub robot_ids: Vec<u32>,
    pub footprint_half_extent: f64,
    /// Set when the last step was stopped by the workspace boundary.
    pub edge_limited: bool,
}

impl Platform {
    pub fn new(id: u32, pose: Pose2D, mounts: Vec<Vec2>, robot_ids: Vec<u32>, footprint_half_extent: f64) -> Self {
        assert_eq!(mounts.len(), robot_ids.len(), "one robot per mount");
        let headings = vec![pose.theta; mounts.len()];
        Self {
            id,
            pose,
            mounts,
            headings,
            robot_ids,
            footprint_half_extent,
            edge_limited: false,
        }
    }

    /// World-frame lever arm from the platform center to each mount.
    pub fn lever_arms(&self) -> Vec<Vec2> {
        self.mounts.iter().map(|m| m.rotated(self.pose.theta)).collect()
    }

    /// Ground-truth poses of the mounted robots: positions follow the
    /// platform rigidly, headings are the module steering angles.
    pub fn robot_poses(&self) -> Vec<Pose2D> {
        let tf = self.pose.as_transform();
        self.mounts
            .iter()
            .zip(&self.headings)
            .map(|(&m, &h)| {
                let p = tf.apply_point(m);
                Pose2D { x: p.x, y: p.y, theta: h }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModuleCommand {
    pub wheels: WheelSpeeds,
    /// Heading after this step's bounded steering.
    pub heading: f64,
    /// Speed along the current heading, m/s.
    pub drive: f64,
    /// Velocity the rigid body needs at this mount after scaling.
    pub required: Vec2,
    /// Signed angle from the current heading to `required`.
    pub heading_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub modules: Vec<ModuleCommand>,
    /// Uniform twist scale in (0, 1] keeping every module within wheel limits.
    pub scale: f64,
}

impl Allocation {
    pub fn max_heading_error(&self) -> f64 {
        self.modules.iter().map(|m| m.heading_error.abs()).fold(0.0, f64::max)
    }
}

/// Largest module speed the twist implies, before scaling.
pub fn max_module_speed(platform: &Platform, desired: &Twist2D) -> f64 {
    platform
        .lever_arms()
        .iter()
        .map(|&r| desired.velocity_at(r).norm())
        .fold(0.0, f64::max)
}

/// Splits a platform twist into per-module steering and drive commands over `dt`.
///
/// Module `i` must move at `u_i = v + omega x r_i`. It steers toward `u_i` at
/// no more than the steering rate and meanwhile drives at
/// `|u_i| cos(heading error)`, never in reverse. The twist is scaled by a single
/// factor so that no module speed exceeds the wheel limit.
pub fn twist_to_module_commands(platform: &Platform, limits: &PlatformLimits, desired: &Twist2D, dt: f64) -> Allocation {
    let peak = max_module_speed(platform, desired);
    let scale = if peak > limits.max_wheel_speed {
        limits.max_wheel_speed / peak
    } else {
        1.0
    };
    let twist = desired.scaled(scale);
    let max_steer = limits.steering_rate * dt;
    let modules = platform
        .lever_arms()
        .iter()
        .zip(&platform.headings)
        .map(|(&r, &heading)| {
            let required = twist.velocity_at(r);
            let speed = required.norm();
            if speed < 1e-12 {
                return ModuleCommand {
                    wheels: WheelSpeeds::default(),
                    heading,
                    drive: 0.0,
                    required,
                    heading_error: 0.0,
                };
            }
            let err = wrap(required.y.atan2(required.x) - heading);
            let drive = speed * err.cos().max(0.0);
            let steer = err.clamp(-max_steer, max_steer);
            let turn_rate = if dt > 0.0 { steer / dt } else { 0.0 };
            let diff = 0.5 * turn_rate * limits.axle_track;
            let m = limits.max_wheel_speed;
            ModuleCommand {
                wheels: WheelSpeeds::new((drive - diff).clamp(-m, m), (drive + diff).clamp(-m, m)),
                heading: wrap(heading + steer),
                drive,
                required,
                heading_error: err,
            }
        })
        .collect();
    Allocation { modules, scale }
}

/// Least-squares rigid twist that best explains the given module velocities
/// at the given world-frame lever arms.
pub fn reconstruct_twist(lever_arms: &[Vec2], velocities: &[Vec2]) -> Twist2D {
    let n = lever_arms.len() as f64;
    let c = lever_arms.iter().fold(Vec2::ZERO, |a, &r| a + r) * (1.0 / n);
    let vc = velocities.iter().fold(Vec2::ZERO, |a, &w| a + w) * (1.0 / n);
    let (mut num, mut den) = (0.0, 0.0);
    for (&r, &w) in lever_arms.iter().zip(velocities) {
        let d = r - c;
        num += d.perp().dot(w - vc);
        den += d.dot(d);
    }
    let omega = if den > 0.0 { num / den } else { 0.0 };
    let v = vc - c.perp() * omega;
    Twist2D { vx: v.x, vy: v.y, omega }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub allocation: Allocation,
    /// Twist actually produced by the modules.
    pub realized: Twist2D,
}

/// Exact pose update for a twist held constant in the body frame over `dt`.
fn integrate_screw(pose: &Pose2D, twist: &Twist2D, dt: f64) -> Pose2D {
    let body_v = twist.linear().rotated(-pose.theta);
    let w = twist.omega;
    let wd = w * dt;
    let delta_body = if wd.abs() > 1e-12 {
        let (s, c) = wd.sin_cos();
        Vec2::new(
            (s * body_v.x - (1.0 - c) * body_v.y) / w,
            ((1.0 - c) * body_v.x + s * body_v.y) / w,
        )
    } else {
        body_v * dt
    };
    let d = delta_body.rotated(pose.theta);
    Pose2D {
        x: pose.x + d.x,
        y: pose.y + d.y,
        theta: wrap(pose.theta + wd),
    }
}

/// Advances a platform by `dt` under a desired twist.
///
/// Modules drive along their current headings; the platform moves with the
/// least-squares rigid twist those module velocities imply (equal to the
/// scaled desired twist once the modules are aligned). Headings then advance
/// by the bounded steering step. The center is projected back into the
/// workspace when it would leave it, which sets `edge_limited`.
pub fn step_platform(
    platform: &Platform,
    limits: &PlatformLimits,
    desired: &Twist2D,
    dt: f64,
) -> Result<(Platform, StepReport), SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveStep(dt));
    }
    let allocation = twist_to_module_commands(platform, limits, desired, dt);
    let velocities: Vec<Vec2> = allocation
        .modules
        .iter()
        .zip(&platform.headings)
        .map(|(m, &h)| Vec2::new(h.cos(), h.sin()) * m.drive)
        .collect();
    let realized = reconstruct_twist(&platform.lever_arms(), &velocities);
    let moved = integrate_screw(&platform.pose, &realized, dt);
    let clamped = limits.workspace.clamp(moved.position());
    let edge_limited = clamped != moved.position();
    let mut next = platform.clone();
    next.pose = Pose2D {
        x: clamped.x,
        y: clamped.y,
        theta: moved.theta,
    };
    next.headings = allocation.modules.iter().map(|m| m.heading).collect();
    next.edge_limited = edge_limited;
    Ok((next, StepReport { allocation, realized }))
}

//! Global configuration: one JSON document, every field optional.
//!
//! `docs/config.md` lists each key with its default.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose2D, Rect, Vec2};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatConfig {
    pub width: f64,
    pub height: f64,
}

impl Default for MatConfig {
    fn default() -> Self {
        Self { width: 0.55, height: 0.55 }
    }
}

impl MatConfig {
    pub fn bounds(&self) -> Rect {
        Rect::new(Vec2::ZERO, Vec2::new(self.width, self.height))
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobotConfig {
    /// m/s
    pub max_wheel_speed: f64,
    /// Wheel separation, m.
    pub axle_track: f64,
    /// kg per robot.
    pub payload_capacity: f64,
    /// First-order wheel lag time constant in seconds; 0 disables.
    pub actuator_lag: f64,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            max_wheel_speed: 0.30,
            axle_track: 0.026,
            payload_capacity: 0.2,
            actuator_lag: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    /// Per-axis Gaussian noise, m.
    pub noise_sigma: f64,
    /// Position quantum, m.
    pub resolution: f64,
    /// Readings are delivered this many control ticks late.
    pub delay_ticks: u32,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.0,
            resolution: 0.001,
            delay_ticks: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlatformConfig {
    pub count: usize,
    pub robots_per_platform: usize,
    /// Explicit mount offsets in the platform frame. When absent the robots
    /// sit evenly spaced on a circle of `mount_radius`.
    pub mount_offsets: Option<Vec<[f64; 2]>>,
    pub mount_radius: f64,
    /// Total carried mass per platform, kg.
    pub mass: f64,
    pub footprint_half_extent: f64,
    /// rad/s
    pub steering_rate: f64,
    /// m/s
    pub speed_cap: f64,
    /// rad/s
    pub omega_cap: f64,
    /// `[x, y, theta]` per platform; evenly spread along the mat midline when absent.
    pub initial_poses: Option<Vec<[f64; 3]>>,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            count: 2,
            robots_per_platform: 2,
            mount_offsets: None,
            mount_radius: 0.03,
            mass: 0.35,
            footprint_half_extent: 0.085,
            steering_rate: TAU,
            speed_cap: 0.25,
            omega_cap: 1.0,
            initial_poses: None,
        }
    }
}

impl PlatformConfig {
    pub fn resolved_mounts(&self) -> Vec<Vec2> {
        match &self.mount_offsets {
            Some(m) => m.iter().map(|o| Vec2::new(o[0], o[1])).collect(),
            None => (0..self.robots_per_platform)
                .map(|i| {
                    let a = TAU * i as f64 / self.robots_per_platform as f64;
                    Vec2::new(self.mount_radius * a.cos(), self.mount_radius * a.sin())
                })
                .collect(),
        }
    }

    /// Distance from the platform center to its farthest mounted robot.
    pub fn mount_reach(&self) -> f64 {
        self.resolved_mounts().iter().map(|m| m.norm()).fold(0.0, f64::max)
    }

    pub fn resolved_initial_poses(&self, mat: &MatConfig) -> Vec<Pose2D> {
        match &self.initial_poses {
            Some(p) => p.iter().map(|p| Pose2D::new(p[0], p[1], p[2])).collect(),
            None => (0..self.count)
                .map(|i| {
                    let x = mat.width * (i + 1) as f64 / (self.count + 1) as f64;
                    Pose2D::new(x, 0.5 * mat.height, 0.0)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrustumConfig {
    /// Focus height range above the array surface, m.
    pub z_min: f64,
    pub z_max: f64,
    /// Lateral reach beyond the array footprint, m.
    pub lateral_margin: f64,
}

impl Default for FrustumConfig {
    fn default() -> Self {
        Self {
            z_min: 0.05,
            z_max: 0.40,
            lateral_margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    pub pitch: f64,
    pub element_radius: f64,
    pub frequency: f64,
    /// Pressure amplitude 1 m on-axis from a single element.
    pub reference_amplitude: f64,
    /// Height of the emitting surface above the mat, m.
    pub mount_height: f64,
    /// Foci closer than this to the emitting surface are rejected, m.
    pub min_focus_height: f64,
    pub frustum: FrustumConfig,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            rows: 16,
            cols: 16,
            pitch: 0.010,
            element_radius: 0.0045,
            frequency: 40_000.0,
            reference_amplitude: 1.0,
            mount_height: 0.03,
            min_focus_height: 0.02,
            frustum: FrustumConfig::default(),
        }
    }
}

impl ArrayConfig {
    /// Half-extents (x, y) of the element footprint, element rims included.
    pub fn half_extent(&self) -> (f64, f64) {
        (
            0.5 * (self.cols.saturating_sub(1)) as f64 * self.pitch + self.element_radius,
            0.5 * (self.rows.saturating_sub(1)) as f64 * self.pitch + self.element_radius,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcousticsConfig {
    /// m/s
    pub speed_of_sound: f64,
}

impl Default for AcousticsConfig {
    fn default() -> Self {
        Self { speed_of_sound: 346.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatesConfig {
    pub sim_hz: f64,
    pub control_hz: f64,
    pub snapshot_hz: f64,
}

impl Default for RatesConfig {
    fn default() -> Self {
        Self {
            sim_hz: 1000.0,
            control_hz: 50.0,
            snapshot_hz: 30.0,
        }
    }
}

impl RatesConfig {
    pub fn control_dt(&self) -> f64 {
        1.0 / self.control_hz
    }

    pub fn substeps(&self) -> usize {
        (self.sim_hz / self.control_hz).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    /// 1/s
    pub kp: f64,
    /// 1/s
    pub ktheta: f64,
    pub deadband_position: f64,
    pub deadband_angle_deg: f64,
    /// Seconds between periodic reassignments.
    pub rebalance_period: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            kp: 3.0,
            ktheta: 4.0,
            deadband_position: 0.002,
            deadband_angle_deg: 2.0,
            rebalance_period: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingConfig {
    /// Weight of the newest observation in the position filter.
    pub smoothing: f64,
    pub staleness_timeout: f64,
    /// Extrapolation horizon; one control tick when absent.
    pub prediction_horizon: Option<f64>,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            smoothing: 0.6,
            staleness_timeout: 0.5,
            prediction_horizon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub mat: MatConfig,
    pub robot: RobotConfig,
    pub sensor: SensorConfig,
    pub platform: PlatformConfig,
    pub array: ArrayConfig,
    pub acoustics: AcousticsConfig,
    pub rates: RatesConfig,
    pub control: ControlConfig,
    pub tracking: TrackingConfig,
    pub seed: u64,
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Parse(String),
    PayloadExceeded { mass: f64, robots: usize, capacity: f64 },
    RobotsPerPlatform(usize),
    NonPositive(&'static str, f64),
    OutOfRange(&'static str, String),
    RateRatio { sim_hz: f64, control_hz: f64 },
    ArrayExceedsFootprint { array_half: f64, footprint_half: f64 },
    MountOffsets(String),
    InitialPoses(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Parse(e) => write!(f, "parse error: {e}"),
            Violation::PayloadExceeded { mass, robots, capacity } => write!(
                f,
                "payload exceeded: platform mass {mass} kg > {robots} robots x {capacity} kg = {} kg",
                *robots as f64 * capacity
            ),
            Violation::RobotsPerPlatform(n) => {
                write!(f, "robots_per_platform = {n} outside allowed range 2-4")
            }
            Violation::NonPositive(name, v) => write!(f, "{name} must be > 0 (got {v})"),
            Violation::OutOfRange(name, msg) => write!(f, "{name}: {msg}"),
            Violation::RateRatio { sim_hz, control_hz } => write!(
                f,
                "rates.sim_hz ({sim_hz}) must be an integer multiple of rates.control_hz ({control_hz})"
            ),
            Violation::ArrayExceedsFootprint { array_half, footprint_half } => write!(
                f,
                "array half-extent {array_half} m exceeds platform footprint half-extent {footprint_half} m"
            ),
            Violation::MountOffsets(msg) => write!(f, "platform.mount_offsets: {msg}"),
            Violation::InitialPoses(msg) => write!(f, "platform.initial_poses: {msg}"),
        }
    }
}

/// Every violation found in a configuration document.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigReport {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problems)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl ConfigReport {
    pub fn has(&self, pred: impl Fn(&Violation) -> bool) -> bool {
        self.violations.iter().any(pred)
    }
}

/// Parses and checks a raw configuration document.
pub fn validate_config(raw: &serde_json::Value) -> Result<Config, ConfigReport> {
    let config: Config = serde_json::from_value(raw.clone()).map_err(|e| ConfigReport {
        violations: vec![Violation::Parse(e.to_string())],
    })?;
    config.validated()
}

impl Config {
    pub fn from_json_str(s: &str) -> Result<Config, ConfigReport> {
        let raw: serde_json::Value = serde_json::from_str(s).map_err(|e| ConfigReport {
            violations: vec![Violation::Parse(e.to_string())],
        })?;
        validate_config(&raw)
    }

    pub fn validated(self) -> Result<Config, ConfigReport> {
        let violations = self.check();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ConfigReport { violations })
        }
    }

    /// Lists every violated constraint.
    pub fn check(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut positive = |name: &'static str, x: f64| {
            if !(x > 0.0 && x.is_finite()) {
                v.push(Violation::NonPositive(name, x));
            }
        };
        positive("mat.width", self.mat.width);
        positive("mat.height", self.mat.height);
        positive("robot.max_wheel_speed", self.robot.max_wheel_speed);
        positive("robot.axle_track", self.robot.axle_track);
        positive("robot.payload_capacity", self.robot.payload_capacity);
        positive("sensor.resolution", self.sensor.resolution);
        positive("platform.mass", self.platform.mass);
        positive("platform.footprint_half_extent", self.platform.footprint_half_extent);
        positive("platform.steering_rate", self.platform.steering_rate);
        positive("platform.speed_cap", self.platform.speed_cap);
        positive("platform.omega_cap", self.platform.omega_cap);
        positive("array.pitch", self.array.pitch);
        positive("array.element_radius", self.array.element_radius);
        positive("array.frequency", self.array.frequency);
        positive("array.reference_amplitude", self.array.reference_amplitude);
        positive("array.min_focus_height", self.array.min_focus_height);
        positive("array.frustum.z_min", self.array.frustum.z_min);
        positive("acoustics.speed_of_sound", self.acoustics.speed_of_sound);
        positive("rates.sim_hz", self.rates.sim_hz);
        positive("rates.control_hz", self.rates.control_hz);
        positive("rates.snapshot_hz", self.rates.snapshot_hz);
        positive("control.kp", self.control.kp);
        positive("control.ktheta", self.control.ktheta);
        positive("control.deadband_position", self.control.deadband_position);
        positive("control.deadband_angle_deg", self.control.deadband_angle_deg);
        positive("control.rebalance_period", self.control.rebalance_period);
        positive("tracking.staleness_timeout", self.tracking.staleness_timeout);
        if let Some(h) = self.tracking.prediction_horizon {
            if !(h >= 0.0 && h.is_finite()) {
                v.push(Violation::OutOfRange("tracking.prediction_horizon", format!("must be >= 0 (got {h})")));
            }
        }

        if !(self.sensor.noise_sigma >= 0.0 && self.sensor.noise_sigma.is_finite()) {
            v.push(Violation::OutOfRange("sensor.noise_sigma", "must be >= 0".into()));
        }
        if !(self.robot.actuator_lag >= 0.0 && self.robot.actuator_lag.is_finite()) {
            v.push(Violation::OutOfRange("robot.actuator_lag", "must be >= 0".into()));
        }
        if !(self.tracking.smoothing > 0.0 && self.tracking.smoothing <= 1.0) {
            v.push(Violation::OutOfRange(
                "tracking.smoothing",
                format!("must lie in (0, 1] (got {})", self.tracking.smoothing),
            ));
        }
        if self.array.rows == 0 || self.array.cols == 0 {
            v.push(Violation::OutOfRange("array.rows/cols", "must be >= 1".into()));
        }
        let fr = &self.array.frustum;
        if !(fr.z_max > fr.z_min) {
            v.push(Violation::OutOfRange("array.frustum.z_max", "must exceed z_min".into()));
        }
        if fr.z_min < self.array.min_focus_height {
            v.push(Violation::OutOfRange(
                "array.frustum.z_min",
                "must be >= array.min_focus_height".into(),
            ));
        }
        if !(fr.lateral_margin >= 0.0) {
            v.push(Violation::OutOfRange("array.frustum.lateral_margin", "must be >= 0".into()));
        }

        let (s, c) = (self.rates.sim_hz, self.rates.control_hz);
        if s > 0.0 && c > 0.0 {
            let ratio = s / c;
            if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 {
                v.push(Violation::RateRatio { sim_hz: s, control_hz: c });
            }
        }

        let n = self.platform.robots_per_platform;
        if !(2..=4).contains(&n) {
            v.push(Violation::RobotsPerPlatform(n));
        }
        if self.platform.count == 0 {
            v.push(Violation::OutOfRange("platform.count", "must be >= 1".into()));
        }
        let cap = n as f64 * self.robot.payload_capacity;
        if self.platform.mass > cap {
            v.push(Violation::PayloadExceeded {
                mass: self.platform.mass,
                robots: n,
                capacity: self.robot.payload_capacity,
            });
        }

        let (ax, ay) = self.array.half_extent();
        let half = ax.max(ay);
        if half > self.platform.footprint_half_extent {
            v.push(Violation::ArrayExceedsFootprint {
                array_half: half,
                footprint_half: self.platform.footprint_half_extent,
            });
        }

        if let Some(m) = &self.platform.mount_offsets {
            if m.len() != n {
                v.push(Violation::MountOffsets(format!("{} offsets for {n} robots", m.len())));
            }
        }
        let mounts = self.platform.resolved_mounts();
        for i in 0..mounts.len() {
            if !(mounts[i].x.is_finite() && mounts[i].y.is_finite()) {
                v.push(Violation::MountOffsets(format!("offset {i} is not finite")));
            }
            if mounts[i].norm() > self.platform.footprint_half_extent * std::f64::consts::SQRT_2 {
                v.push(Violation::MountOffsets(format!("offset {i} lies outside the footprint")));
            }
            for j in (i + 1)..mounts.len() {
                if mounts[i].distance(mounts[j]) < 1e-9 {
                    v.push(Violation::MountOffsets(format!("offsets {i} and {j} coincide")));
                }
            }
        }
        let reach = self.platform.mount_reach();
        if reach >= 0.5 * self.mat.width.min(self.mat.height) {
            v.push(Violation::MountOffsets("robots cannot all fit on the mat".into()));
        }

        if let Some(p) = &self.platform.initial_poses {
            if p.len() != self.platform.count {
                v.push(Violation::InitialPoses(format!(
                    "{} poses for {} platforms",
                    p.len(),
                    self.platform.count
                )));
            }
            if p.iter().flatten().any(|x| !x.is_finite()) {
                v.push(Violation::InitialPoses("non-finite value".into()));
            }
        }
        v
    }

    /// Region the platform center may occupy: every mounted robot stays on the mat.
    pub fn platform_workspace(&self) -> Rect {
        self.mat.bounds().inset(self.platform.mount_reach())
    }

    pub fn deadband_angle(&self) -> f64 {
        self.control.deadband_angle_deg * PI / 180.0
    }

    pub fn prediction_horizon(&self) -> f64 {
        self.tracking
            .prediction_horizon
            .unwrap_or_else(|| self.rates.control_dt())
    }

    pub fn wavelength(&self) -> f64 {
        self.acoustics.speed_of_sound / self.array.frequency
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_document_gives_defaults() {
        let c = validate_config(&json!({})).unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.mat.width, 0.55);
        assert_eq!(c.mat.height, 0.55);
        assert_eq!(c.platform.robots_per_platform, 2);
        assert_eq!((c.array.rows, c.array.cols), (16, 16));
    }

    #[test]
    fn payload_exceeded() {
        let r = validate_config(&json!({
            "platform": {"mass": 0.5, "robots_per_platform": 2},
            "robot": {"payload_capacity": 0.2}
        }))
        .unwrap_err();
        assert!(r.has(|v| matches!(v, Violation::PayloadExceeded { .. })));
        assert!(r.to_string().contains("payload exceeded"));
    }

    #[test]
    fn robots_per_platform_range() {
        let r = validate_config(&json!({"platform": {"robots_per_platform": 5}})).unwrap_err();
        assert!(r.has(|v| matches!(v, Violation::RobotsPerPlatform(5))));
        assert!(r.to_string().contains("2-4"));
        for n in 2..=4 {
            validate_config(&json!({"platform": {"robots_per_platform": n}})).unwrap();
        }
    }

    #[test]
    fn reports_every_violation() {
        let r = validate_config(&json!({
            "platform": {"robots_per_platform": 1, "mass": 5.0},
            "rates": {"control_hz": 0.0, "snapshot_hz": -1.0},
            "array": {"rows": 40}
        }))
        .unwrap_err();
        assert!(r.has(|v| matches!(v, Violation::RobotsPerPlatform(1))));
        assert!(r.has(|v| matches!(v, Violation::PayloadExceeded { .. })));
        assert!(r.has(|v| matches!(v, Violation::NonPositive("rates.control_hz", _))));
        assert!(r.has(|v| matches!(v, Violation::NonPositive("rates.snapshot_hz", _))));
        assert!(r.has(|v| matches!(v, Violation::ArrayExceedsFootprint { .. })));
    }

    #[test]
    fn sim_rate_must_be_multiple_of_control_rate() {
        let r = validate_config(&json!({"rates": {"sim_hz": 1000.0, "control_hz": 30.0}})).unwrap_err();
        assert!(r.has(|v| matches!(v, Violation::RateRatio { .. })));
    }

    #[test]
    fn unknown_keys_rejected() {
        let r = validate_config(&json!({"platfrom": {}})).unwrap_err();
        assert!(matches!(r.violations[0], Violation::Parse(_)));
        let r = validate_config(&json!({"platform": {"robots": 3}})).unwrap_err();
        assert!(matches!(r.violations[0], Violation::Parse(_)));
    }

    #[test]
    fn defaulting_is_stable() {
        for raw in [
            json!({}),
            json!({"platform": {"robots_per_platform": 3, "count": 1}, "seed": 9}),
            json!({"tracking": {"prediction_horizon": 0.05}, "mat": {"width": 0.8}}),
        ] {
            let once = validate_config(&raw).unwrap();
            let again = validate_config(&serde_json::to_value(&once).unwrap()).unwrap();
            assert_eq!(once, again);
        }
    }

    #[test]
    fn default_mounts_on_circle() {
        let p = PlatformConfig { robots_per_platform: 4, ..Default::default() };
        let m = p.resolved_mounts();
        assert_eq!(m.len(), 4);
        for o in &m {
            assert!((o.norm() - 0.03).abs() < 1e-15);
        }
    }
}

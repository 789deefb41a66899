//! The closed loop that ties everything together: sense the robots, estimate
//! platform poses, track and predict hands, assign platforms to hands, drive,
//! focus, run the active scene and record metrics.
//!
//! A [`Session`] advances only through [`Session::tick`], which is a pure
//! function of the session state and the queued hand frames. Wall-clock time
//! never enters, so replays and live runs fed the same frames at the same sim
//! times produce the same states.

mod metrics;
mod protocol;
mod replay;
mod snapshot;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::acoustics::{resolve_focus, TransducerArray};
use crate::config::{Config, ConfigReport};
use crate::geometry::{Point3D, Pose2D, Rect, Vec2};
use crate::platform::{estimate_platform_pose, goto_twist, step_platform, ControlGains, Platform, PlatformLimits};
use crate::robot_sim::{sense_mat, MatReading, Robot};
use crate::scenarios::{HandView, Scenario, ScenarioError, ScenarioEvent, ScenarioRuntime};
use crate::tracking::{assign, ingest, predict, FilterParams, Hand, HandFrame, HandTrack, TrackingError};

pub use metrics::{coverage_summary, CoverageSummary, MetricsRow, BASELINE_AREA, METRICS_HEADER};
pub use protocol::{
    decode_client, encode_server, ClientMessage, HandleOutcome, ProtocolError, ScenarioAction, ServerMessage,
    MAX_FRAME_BYTES,
};
pub use replay::{replay, ReplayRun};
pub use snapshot::{HandState, MetricsSummary, PlatformState, RobotState, StateSnapshot};

/// Slack for comparing sim times built from tick counts with file timestamps.
pub(crate) const TIME_EPS: f64 = 1e-9;

/// Upper bound on hand frames waiting for their tick.
pub const MAX_QUEUED_FRAMES: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error(transparent)]
    Config(#[from] ConfigReport),
    #[error(transparent)]
    Frame(#[from] TrackingError),
    #[error("hand frame queue is full ({MAX_QUEUED_FRAMES} frames)")]
    QueueFull,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("cannot write metrics: {0}")]
    Io(String),
}

/// Focus a platform is currently rendering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delivered {
    pub hand: Hand,
    pub focus: Point3D,
    pub requested: Point3D,
    pub quality: f64,
}

/// A scene command waiting to be rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Feedback {
    focus: Point3D,
    /// Sim time at which the burst ends.
    until: f64,
    modulation_hz: f64,
    /// Only the tick right after the command uses its focus.
    fresh: bool,
}

/// Counters that describe traffic, not state; excluded from the state hash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub frames_accepted: u64,
    pub frames_dropped: u64,
    pub malformed_messages: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Session {
    config: Config,
    /// Number of ticks executed; the state describes time `tick * dt`.
    tick: u64,
    rng: ChaCha8Rng,
    robots: Vec<Robot>,
    platforms: Vec<Platform>,
    estimates: Vec<Pose2D>,
    home: Vec<Pose2D>,
    hold: Vec<Pose2D>,
    sensor_queue: VecDeque<Vec<MatReading>>,
    tracks: [HandTrack; 2],
    frames: VecDeque<HandFrame>,
    /// Newest accepted frame time per hand, queued or ingested.
    last_frame: [f64; 2],
    assignment: Vec<Option<Hand>>,
    last_assign: Option<f64>,
    assigned_live: [bool; 2],
    churn: u32,
    delivered: Vec<Option<Delivered>>,
    feedback: [Option<Feedback>; 2],
    scenario: Option<ScenarioRuntime>,
    attractors: Vec<Vec2>,
    pending_events: Vec<ScenarioEvent>,
    #[serde(skip)]
    metrics: Vec<MetricsRow>,
    #[serde(skip)]
    diagnostics: Diagnostics,
}

impl Session {
    /// Builds a session; the configuration is validated first.
    pub fn new(config: Config) -> Result<Session, SessionError> {
        let config = config.validated()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mounts = config.platform.resolved_mounts();
        let rpp = config.platform.robots_per_platform;
        let home = config.platform.resolved_initial_poses(&config.mat);
        let mut platforms = Vec::with_capacity(home.len());
        let mut robots = Vec::new();
        for (p, pose) in home.iter().enumerate() {
            let ids: Vec<u32> = (0..rpp).map(|j| (p * rpp + j) as u32).collect();
            let platform = Platform::new(
                p as u32,
                *pose,
                mounts.clone(),
                ids.clone(),
                config.platform.footprint_half_extent,
            );
            for (id, rp) in ids.iter().zip(platform.robot_poses()) {
                robots.push(Robot::from_config(*id, rp, &config));
            }
            platforms.push(platform);
        }
        let n = platforms.len();
        Ok(Session {
            rng,
            robots,
            estimates: home.clone(),
            hold: home.clone(),
            home,
            platforms,
            sensor_queue: VecDeque::new(),
            tracks: [HandTrack::new(Hand::Left), HandTrack::new(Hand::Right)],
            frames: VecDeque::new(),
            last_frame: [f64::NEG_INFINITY; 2],
            assignment: vec![None; n],
            last_assign: None,
            assigned_live: [false; 2],
            churn: 0,
            delivered: vec![None; n],
            feedback: [None, None],
            scenario: None,
            attractors: Vec::new(),
            pending_events: Vec::new(),
            metrics: Vec::new(),
            diagnostics: Diagnostics::default(),
            tick: 0,
            config,
        })
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn ticks(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.config.rates.control_dt()
    }

    /// Sim time of the current state, which is also the time of the next tick.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt()
    }

    pub fn platforms(&self) -> &[Platform] {
        &self.platforms
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn estimates(&self) -> &[Pose2D] {
        &self.estimates
    }

    pub fn tracks(&self) -> &[HandTrack; 2] {
        &self.tracks
    }

    /// Hand served by each platform.
    pub fn assignment(&self) -> &[Option<Hand>] {
        &self.assignment
    }

    pub fn delivered(&self) -> &[Option<Delivered>] {
        &self.delivered
    }

    pub fn churn(&self) -> u32 {
        self.churn
    }

    pub fn metrics(&self) -> &[MetricsRow] {
        &self.metrics
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diagnostics
    }

    pub fn scenario(&self) -> Option<&ScenarioRuntime> {
        self.scenario.as_ref()
    }

    pub fn load_scenario(&mut self, scenario: Scenario) -> Result<(), SessionError> {
        self.scenario = Some(ScenarioRuntime::new(scenario)?);
        self.attractors.clear();
        self.feedback = [None, None];
        Ok(())
    }

    pub fn stop_scenario(&mut self) {
        self.scenario = None;
        self.attractors.clear();
        self.feedback = [None, None];
    }

    /// Scene events produced since the last call.
    pub fn drain_events(&mut self) -> Vec<ScenarioEvent> {
        std::mem::take(&mut self.pending_events)
    }

    /// Queues a hand frame for the first tick at or after its timestamp.
    ///
    /// Frames must be newer than every earlier frame of the same hand and
    /// tracked frames need a finite position. Rejected frames are counted and
    /// leave the state untouched.
    pub fn push_frame(&mut self, frame: HandFrame) -> Result<(), SessionError> {
        let i = frame.hand.index();
        let check = if !frame.t.is_finite() || frame.t <= self.last_frame[i] {
            Err(SessionError::Frame(TrackingError::OutOfOrder {
                hand: frame.hand,
                t: frame.t,
                last: self.last_frame[i],
            }))
        } else if frame.tracked && !frame.pos.is_finite() {
            Err(SessionError::Frame(TrackingError::NonFinitePosition { hand: frame.hand }))
        } else if self.frames.len() >= MAX_QUEUED_FRAMES {
            Err(SessionError::QueueFull)
        } else {
            Ok(())
        };
        match check {
            Ok(()) => {
                self.last_frame[i] = frame.t;
                self.frames.push_back(frame);
                self.diagnostics.frames_accepted += 1;
                Ok(())
            }
            Err(e) => {
                self.diagnostics.frames_dropped += 1;
                Err(e)
            }
        }
    }

    /// SHA-256 over the canonical JSON of the full state, diagnostics and the
    /// metrics log excluded.
    pub fn state_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("session state serializes");
        let digest = Sha256::digest(&bytes);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Runs one control tick at time `tick * dt`.
    pub fn tick(&mut self) {
        let now = self.time();
        let dt = self.dt();
        let params = FilterParams {
            smoothing: self.config.tracking.smoothing,
            staleness_timeout: self.config.tracking.staleness_timeout,
        };

        self.ingest_due(now, &params);
        for tr in &mut self.tracks {
            tr.refresh(now, &params);
        }
        let mut row = self.measure(now);

        self.sense_and_estimate(now);
        let horizon = self.config.prediction_horizon();
        let predicted: [Option<Point3D>; 2] = [0, 1].map(|i| predict(&self.tracks[i], horizon).ok());
        self.reassign(now, &predicted);
        self.drive(&predicted, dt);
        self.focus(&predicted, now);
        self.run_scenario(dt, now);

        let n = self.platforms.len() as f64;
        row.churn = self.churn;
        row.edge_limited_fraction = self.platforms.iter().filter(|p| p.edge_limited).count() as f64 / n;
        self.metrics.push(row);
        self.tick += 1;
    }

    fn ingest_due(&mut self, now: f64, params: &FilterParams) {
        let mut rest = VecDeque::with_capacity(self.frames.len());
        while let Some(f) = self.frames.pop_front() {
            if f.t <= now + TIME_EPS {
                let i = f.hand.index();
                // frames were order-checked on entry
                if let Ok(next) = ingest(&self.tracks[i], &f, params) {
                    self.tracks[i] = next;
                }
            } else {
                rest.push_back(f);
            }
        }
        self.frames = rest;
    }

    /// Error between the focus being rendered right now and the latest
    /// observation of each hand.
    fn measure(&self, now: f64) -> MetricsRow {
        let mut row = MetricsRow::empty(now);
        for hand in Hand::ALL {
            let tr = &self.tracks[hand.index()];
            if !tr.is_live() {
                continue;
            }
            let Some(obs) = tr.observed else { continue };
            match self.delivered.iter().flatten().find(|d| d.hand == hand) {
                Some(d) => {
                    row.error[hand.index()] = Some(d.focus.lateral().distance(obs.lateral()));
                    row.quality[hand.index()] = Some(d.quality);
                }
                None => row.unserved += 1,
            }
        }
        row
    }

    fn sense_and_estimate(&mut self, now: f64) {
        let mat = self.config.mat.bounds();
        let sensor = &self.config.sensor;
        let readings: Vec<MatReading> = self
            .robots
            .iter()
            .map(|r| sense_mat(r, &mat, sensor.noise_sigma, sensor.resolution, now, &mut self.rng))
            .collect();
        self.sensor_queue.push_back(readings);
        while self.sensor_queue.len() > sensor.delay_ticks as usize + 1 {
            self.sensor_queue.pop_front();
        }
        let used = self.sensor_queue.front().expect("just pushed");
        let rpp = self.config.platform.robots_per_platform;
        for (p, platform) in self.platforms.iter().enumerate() {
            let slice = &used[p * rpp..(p + 1) * rpp];
            if let Ok(est) = estimate_platform_pose(slice, &platform.mounts) {
                self.estimates[p] = est;
            }
        }
    }

    fn reassign(&mut self, now: f64, predicted: &[Option<Point3D>; 2]) {
        let live = [predicted[0].is_some(), predicted[1].is_some()];
        let period = self.config.control.rebalance_period;
        let due = match self.last_assign {
            None => true,
            Some(t0) => now - t0 >= period - TIME_EPS || live != self.assigned_live,
        };
        if !due {
            return;
        }
        let hands: Vec<Hand> = Hand::ALL.into_iter().filter(|h| live[h.index()]).collect();
        let points: Vec<Vec2> = hands
            .iter()
            .map(|h| predicted[h.index()].expect("live").lateral())
            .collect();
        let positions: Vec<Vec2> = self.estimates.iter().map(|e| e.position()).collect();
        let a = assign(&positions, &points);
        let next: Vec<Option<Hand>> = a.mapping.iter().map(|m| m.map(|i| hands[i])).collect();
        let handover = hands.iter().any(|h| {
            let before = self.assignment.iter().position(|a| *a == Some(*h));
            let after = next.iter().position(|a| *a == Some(*h));
            before.is_some() && after.is_some() && before != after
        });
        if handover {
            self.churn += 1;
        }
        self.assignment = next;
        self.last_assign = Some(now);
        self.assigned_live = live;
    }

    fn targets(&mut self, predicted: &[Option<Point3D>; 2]) -> Vec<Pose2D> {
        let ws = self.config.platform_workspace();
        let n = self.platforms.len();
        let mut targets = Vec::with_capacity(n);
        let mut claimed = vec![false; self.attractors.len()];
        for p in 0..n {
            let home_theta = self.home[p].theta;
            let target = match self.assignment[p].and_then(|h| predicted[h.index()]) {
                Some(hand) => {
                    let e = self.estimates[p];
                    self.hold[p] = Pose2D::new(e.x, e.y, home_theta);
                    let c = ws.clamp(hand.lateral());
                    Pose2D::new(c.x, c.y, home_theta)
                }
                None => {
                    let here = self.estimates[p].position();
                    let nearest = self
                        .attractors
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| !claimed[*i])
                        .min_by(|a, b| here.distance(*a.1).total_cmp(&here.distance(*b.1)))
                        .map(|(i, a)| (i, *a));
                    match nearest {
                        Some((i, a)) => {
                            claimed[i] = true;
                            let c = ws.clamp(a);
                            Pose2D::new(c.x, c.y, home_theta)
                        }
                        None => self.hold[p],
                    }
                }
            };
            targets.push(target);
        }
        let serving: Vec<bool> = self.assignment.iter().map(|a| a.is_some()).collect();
        separate(&mut targets, &serving, 2.0 * self.config.platform.footprint_half_extent, &ws);
        targets
    }

    fn drive(&mut self, predicted: &[Option<Point3D>; 2], dt: f64) {
        let targets = self.targets(predicted);
        let gains = ControlGains::from_config(&self.config);
        let limits = PlatformLimits::from_config(&self.config);
        let substeps = self.config.rates.substeps().max(1);
        let h = dt / substeps as f64;
        for (p, target) in targets.iter().enumerate() {
            let twist = goto_twist(&self.estimates[p], target, &gains);
            let mut platform = self.platforms[p].clone();
            let mut edge = false;
            let mut wheels = Vec::new();
            for _ in 0..substeps {
                let (next, report) = step_platform(&platform, &limits, &twist, h).expect("substep is positive");
                edge |= next.edge_limited;
                wheels = report.allocation.modules.iter().map(|m| m.wheels).collect();
                platform = next;
            }
            platform.edge_limited = edge;
            for ((id, pose), w) in platform.robot_ids.iter().zip(platform.robot_poses()).zip(wheels) {
                let robot = &mut self.robots[*id as usize];
                robot.pose = pose;
                robot.wheels = w;
            }
            self.platforms[p] = platform;
        }
    }

    fn focus(&mut self, predicted: &[Option<Point3D>; 2], now: f64) {
        for p in 0..self.platforms.len() {
            let served = self.assignment[p].and_then(|h| predicted[h.index()].map(|pt| (h, pt)));
            self.delivered[p] = served.map(|(hand, point)| {
                let requested = match &self.feedback[hand.index()] {
                    Some(fb) if fb.fresh => fb.focus,
                    _ => point,
                };
                let array = TransducerArray::from_config(&self.config, self.platforms[p].pose.as_transform());
                let sol = resolve_focus(&array, &self.config.array.frustum, requested);
                Delivered {
                    hand,
                    focus: sol.focus,
                    requested,
                    quality: sol.quality,
                }
            });
        }
        for fb in &mut self.feedback {
            if let Some(f) = fb {
                f.fresh = false;
                if now >= f.until - TIME_EPS {
                    *fb = None;
                }
            }
        }
    }

    fn run_scenario(&mut self, dt: f64, now: f64) {
        let Some(sc) = &mut self.scenario else { return };
        let views: Vec<HandView> = self
            .tracks
            .iter()
            .map(|t| HandView {
                hand: t.hand,
                position: t.position,
                live: t.is_live(),
            })
            .collect();
        let out = sc.step(&views, dt, now);
        for c in out.commands {
            self.feedback[c.hand.index()] = Some(Feedback {
                focus: c.focus,
                until: now + c.burst,
                modulation_hz: c.modulation_hz,
                fresh: true,
            });
        }
        self.attractors = out.attractors;
        self.pending_events.extend(out.events);
    }

    /// Modulation frequency of the burst currently playing for `hand`.
    pub fn active_modulation(&self, hand: Hand) -> Option<f64> {
        self.feedback[hand.index()].as_ref().map(|f| f.modulation_hz)
    }

    /// Metrics CSV: header, one row per tick, then the coverage summary.
    pub fn metrics_csv(&self) -> String {
        metrics::render_csv(&self.metrics, &coverage_summary(&self.config))
    }

    pub fn export_metrics(&self, path: &std::path::Path) -> Result<(), SessionError> {
        std::fs::write(path, self.metrics_csv()).map_err(|e| SessionError::Io(format!("{}: {e}", path.display())))
    }
}

/// Pushes targets apart until no two are closer than `min_sep`. Between a
/// serving and an idle platform only the idle one yields.
fn separate(targets: &mut [Pose2D], serving: &[bool], min_sep: f64, ws: &Rect) {
    let n = targets.len();
    for _ in 0..4 {
        let mut moved = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let (a, b) = (targets[i].position(), targets[j].position());
                let d = b - a;
                let dist = d.norm();
                if dist >= min_sep - 1e-12 {
                    continue;
                }
                let dir = if dist > 1e-12 { d * (1.0 / dist) } else { Vec2::new(1.0, 0.0) };
                let gap = min_sep - dist;
                let (wi, wj) = match (serving[i], serving[j]) {
                    (true, false) => (0.0, 1.0),
                    (false, true) => (1.0, 0.0),
                    _ => (0.5, 0.5),
                };
                let na = ws.clamp(a - dir * (gap * wi));
                let nb = ws.clamp(b + dir * (gap * wj));
                targets[i] = Pose2D::new(na.x, na.y, targets[i].theta);
                targets[j] = Pose2D::new(nb.x, nb.y, targets[j].theta);
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
}

//! Interactive scenes that turn hand motion into haptic feedback commands.
//!
//! Scenes are JSON documents (see `docs/scenarios.md`); piano, whack-a-mole
//! and shape-outline rule engines are built in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acoustics::{stm_path, StmPath};
use crate::geometry::{Point3D, Vec2};
use crate::tracking::Hand;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("scenario geometry outside its envelope: {0}")]
    OutsideEnvelope(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown built-in scenario {0:?}")]
    UnknownBuiltin(String),
}

/// Axis-aligned box in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Aabb3 {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Aabb3 {
    fn default() -> Self {
        Self {
            min: [0.0, 0.0, 0.05],
            max: [0.55, 0.55, 0.45],
        }
    }
}

impl Aabb3 {
    pub fn contains(&self, p: Point3D) -> bool {
        let a = p.to_array();
        (0..3).all(|i| a[i] >= self.min[i] - 1e-12 && a[i] <= self.max[i] + 1e-12)
    }

    pub fn clamp(&self, p: Point3D) -> Point3D {
        let a = p.to_array();
        Point3D::new(
            a[0].clamp(self.min[0], self.max[0]),
            a[1].clamp(self.min[1], self.max[1]),
            a[2].clamp(self.min[2], self.max[2]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Key {
    pub name: String,
    /// Lateral rectangle corners on the key plane.
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Key {
    fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }
}

fn default_modulation() -> f64 {
    200.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PianoRules {
    pub keys: Vec<Key>,
    #[serde(default = "PianoRules::default_plane")]
    pub plane_height: f64,
    #[serde(default = "PianoRules::default_hysteresis")]
    pub hysteresis: f64,
    #[serde(default = "PianoRules::default_burst")]
    pub burst: f64,
    #[serde(default = "default_modulation")]
    pub modulation_hz: f64,
}

impl PianoRules {
    fn default_plane() -> f64 {
        0.12
    }
    fn default_hysteresis() -> f64 {
        0.01
    }
    fn default_burst() -> f64 {
        0.150
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoleRules {
    pub spawn_period: f64,
    pub hit_radius: f64,
    pub hit_height: f64,
    pub dwell: f64,
    pub burst: f64,
    pub modulation_hz: f64,
    /// Spawn area `[width, height]`, normally the mat.
    pub area: [f64; 2],
    /// Keeps moles this far from the area edges (a platform footprint).
    pub margin: f64,
}

impl Default for MoleRules {
    fn default() -> Self {
        Self {
            spawn_period: 3.0,
            hit_radius: 0.03,
            hit_height: 0.10,
            dwell: 0.2,
            burst: 0.3,
            modulation_hz: 200.0,
            area: [0.55, 0.55],
            margin: 0.085,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outline {
    pub name: String,
    pub points: Vec<[f64; 3]>,
    /// Focus traversal speed, m/s.
    #[serde(default = "Outline::default_speed")]
    pub speed: f64,
    /// Focal update rate, Hz.
    #[serde(default = "Outline::default_rate")]
    pub rate: f64,
    /// The outline renders while a palm is this close (laterally) to its centroid.
    #[serde(default = "Outline::default_activation")]
    pub activation_radius: f64,
}

impl Outline {
    fn default_speed() -> f64 {
        1.0
    }
    fn default_rate() -> f64 {
        1000.0
    }
    fn default_activation() -> f64 {
        0.08
    }

    fn polyline(&self) -> Vec<Point3D> {
        self.points.iter().copied().map(Point3D::from).collect()
    }

    fn centroid(&self) -> Vec2 {
        let n = self.points.len().max(1) as f64;
        let s = self.points.iter().fold(Vec2::ZERO, |a, p| a + Vec2::new(p[0], p[1]));
        s * (1.0 / n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutlineRules {
    pub outlines: Vec<Outline>,
    #[serde(default = "default_modulation")]
    pub modulation_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rules {
    Piano(PianoRules),
    Mole(MoleRules),
    Outline(OutlineRules),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub envelope: Aabb3,
    #[serde(default)]
    pub seed: u64,
    pub rules: Rules,
}

const PIANO_JSON: &str = include_str!("../data/scenarios/piano.json");
const MOLE_JSON: &str = include_str!("../data/scenarios/mole.json");
const OUTLINE_JSON: &str = include_str!("../data/scenarios/outline.json");

impl Scenario {
    pub fn from_json_str(s: &str) -> Result<Scenario, ScenarioError> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    /// Shipped scenes: `piano`, `mole`, `outline`.
    pub fn builtin(name: &str) -> Result<Scenario, ScenarioError> {
        let text = match name {
            "piano" => PIANO_JSON,
            "mole" => MOLE_JSON,
            "outline" => OUTLINE_JSON,
            _ => return Err(ScenarioError::UnknownBuiltin(name.to_string())),
        };
        Scenario::from_json_str(text)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let env = &self.envelope;
        if (0..3).any(|i| !(env.max[i] >= env.min[i])) || env.min[2] < 0.0 {
            return Err(ScenarioError::Invalid("envelope must be a non-empty box above the mat".into()));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::Invalid(format!("{name} must be > 0")))
            }
        };
        match &self.rules {
            Rules::Piano(p) => {
                positive("plane_height", p.plane_height)?;
                positive("hysteresis", p.hysteresis)?;
                positive("modulation_hz", p.modulation_hz)?;
                if !(p.burst >= 0.0) {
                    return Err(ScenarioError::Invalid("burst must be >= 0".into()));
                }
                for k in &p.keys {
                    for c in [k.min, k.max] {
                        if !env.contains(Point3D::new(c[0], c[1], p.plane_height)) {
                            return Err(ScenarioError::OutsideEnvelope(format!("key {}", k.name)));
                        }
                    }
                }
            }
            Rules::Mole(m) => {
                positive("spawn_period", m.spawn_period)?;
                positive("hit_radius", m.hit_radius)?;
                positive("hit_height", m.hit_height)?;
                positive("dwell", m.dwell)?;
                positive("modulation_hz", m.modulation_hz)?;
                if !(m.burst >= 0.0) || !(m.margin >= 0.0) {
                    return Err(ScenarioError::Invalid("burst and margin must be >= 0".into()));
                }
                if 2.0 * m.margin > m.area[0] || 2.0 * m.margin > m.area[1] {
                    return Err(ScenarioError::Invalid("margin leaves no spawn area".into()));
                }
            }
            Rules::Outline(o) => {
                positive("modulation_hz", o.modulation_hz)?;
                for ol in &o.outlines {
                    positive("activation_radius", ol.activation_radius)?;
                    let pts = ol.polyline();
                    if let Some(p) = pts.iter().find(|p| !env.contains(**p)) {
                        return Err(ScenarioError::OutsideEnvelope(format!("outline {} point {p:?}", ol.name)));
                    }
                    stm_path(&pts, ol.speed, ol.rate)
                        .map_err(|e| ScenarioError::Invalid(format!("outline {}: {e}", ol.name)))?;
                }
            }
        }
        Ok(())
    }
}

/// What a scene sees of one hand at a tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandView {
    pub hand: Hand,
    pub position: Point3D,
    pub live: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackCommand {
    pub hand: Hand,
    pub focus: Point3D,
    /// Seconds.
    pub burst: f64,
    pub modulation_hz: f64,
    /// Outline rendered by spatiotemporal modulation, if any.
    pub shape: Option<Vec<Point3D>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EventKind {
    KeyPress { key: String, hand: Hand },
    MoleSpawn { id: u32, x: f64, y: f64 },
    MoleHit { id: u32, hand: Hand },
    OutlineStart { outline: String, hand: Hand },
    OutlineStop { outline: String, hand: Hand },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepOutput {
    pub commands: Vec<FeedbackCommand>,
    pub events: Vec<ScenarioEvent>,
    /// Mat points idle platforms should wait under.
    pub attractors: Vec<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
enum KeyState {
    Armed,
    /// Below the plane; re-arms above plane + hysteresis.
    Pressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PianoState {
    hands: [Option<KeyState>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Mole {
    id: u32,
    at: Vec2,
    spawned: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MoleState {
    rng: ChaCha8Rng,
    active: Option<Mole>,
    next_id: u32,
    /// When each hand started dwelling on the active mole.
    dwell_start: [Option<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OutlineState {
    paths: Vec<StmPath>,
    /// Outline currently rendered for each hand.
    active: [Option<usize>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum RuleState {
    Piano(PianoState),
    Mole(MoleState),
    Outline(OutlineState),
}

/// A loaded scene plus its mutable rule state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRuntime {
    pub scenario: Scenario,
    state: RuleState,
}

impl ScenarioRuntime {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.validate()?;
        let state = match &scenario.rules {
            Rules::Piano(_) => RuleState::Piano(PianoState { hands: [None; 2] }),
            Rules::Mole(_) => RuleState::Mole(MoleState {
                rng: ChaCha8Rng::seed_from_u64(scenario.seed),
                active: None,
                next_id: 0,
                dwell_start: [None; 2],
            }),
            Rules::Outline(o) => RuleState::Outline(OutlineState {
                paths: o
                    .outlines
                    .iter()
                    .map(|ol| stm_path(&ol.polyline(), ol.speed, ol.rate).expect("validated"))
                    .collect(),
                active: [None; 2],
            }),
        };
        Ok(Self { scenario, state })
    }

    pub fn name(&self) -> &str {
        &self.scenario.name
    }

    /// Advances the scene to time `now` (the end of a `dt` step).
    pub fn step(&mut self, hands: &[HandView], dt: f64, now: f64) -> StepOutput {
        let env = self.scenario.envelope;
        let mut out = match (&self.scenario.rules, &mut self.state) {
            (Rules::Piano(rules), RuleState::Piano(state)) => piano_step(rules, state, hands, now),
            (Rules::Mole(rules), RuleState::Mole(state)) => mole_step(rules, state, hands, dt, now),
            (Rules::Outline(rules), RuleState::Outline(state)) => outline_step(rules, state, hands, dt, now),
            _ => unreachable!("rule state always matches its rules"),
        };
        for c in &mut out.commands {
            c.focus = env.clamp(c.focus);
            if let Some(shape) = &mut c.shape {
                shape.iter_mut().for_each(|p| *p = env.clamp(*p));
            }
        }
        out
    }

    /// Active mole position, if this is a whack-a-mole scene.
    pub fn active_mole(&self) -> Option<Vec2> {
        match &self.state {
            RuleState::Mole(m) => m.active.as_ref().map(|m| m.at),
            _ => None,
        }
    }
}

fn piano_step(rules: &PianoRules, state: &mut PianoState, hands: &[HandView], now: f64) -> StepOutput {
    let mut out = StepOutput::default();
    for h in hands {
        let slot = &mut state.hands[h.hand.index()];
        if !h.live {
            *slot = None;
            continue;
        }
        let z = h.position.z;
        let next = match *slot {
            None => {
                if z >= rules.plane_height {
                    KeyState::Armed
                } else {
                    KeyState::Pressed
                }
            }
            Some(KeyState::Armed) if z < rules.plane_height => {
                if let Some(key) = rules.keys.iter().find(|k| k.contains(h.position.lateral())) {
                    out.events.push(ScenarioEvent {
                        t: now,
                        kind: EventKind::KeyPress {
                            key: key.name.clone(),
                            hand: h.hand,
                        },
                    });
                    out.commands.push(FeedbackCommand {
                        hand: h.hand,
                        focus: h.position,
                        burst: rules.burst,
                        modulation_hz: rules.modulation_hz,
                        shape: None,
                    });
                }
                KeyState::Pressed
            }
            Some(KeyState::Pressed) if z > rules.plane_height + rules.hysteresis => KeyState::Armed,
            Some(s) => s,
        };
        *slot = Some(next);
    }
    out
}

fn spawn(rules: &MoleRules, state: &mut MoleState, now: f64, out: &mut StepOutput) {
    let m = rules.margin;
    let x = state.rng.random_range(m..=rules.area[0] - m);
    let y = state.rng.random_range(m..=rules.area[1] - m);
    let id = state.next_id;
    state.next_id += 1;
    state.active = Some(Mole {
        id,
        at: Vec2::new(x, y),
        spawned: now,
    });
    state.dwell_start = [None; 2];
    out.events.push(ScenarioEvent {
        t: now,
        kind: EventKind::MoleSpawn { id, x, y },
    });
}

fn mole_step(rules: &MoleRules, state: &mut MoleState, hands: &[HandView], _dt: f64, now: f64) -> StepOutput {
    let mut out = StepOutput::default();
    let due = match &state.active {
        None => true,
        Some(m) => now - m.spawned >= rules.spawn_period - TIME_EPS,
    };
    if due {
        spawn(rules, state, now, &mut out);
    }
    let mole = state.active.clone().expect("spawned above");
    let mut hit = None;
    for h in hands {
        let slot = &mut state.dwell_start[h.hand.index()];
        let on = h.live
            && h.position.lateral().distance(mole.at) <= rules.hit_radius
            && h.position.z < rules.hit_height;
        if !on {
            *slot = None;
            continue;
        }
        let start = *slot.get_or_insert(now);
        if hit.is_none() && now - start >= rules.dwell - TIME_EPS {
            hit = Some(*h);
        }
    }
    if let Some(h) = hit {
        out.events.push(ScenarioEvent {
            t: now,
            kind: EventKind::MoleHit { id: mole.id, hand: h.hand },
        });
        out.commands.push(FeedbackCommand {
            hand: h.hand,
            focus: h.position,
            burst: rules.burst,
            modulation_hz: rules.modulation_hz,
            shape: None,
        });
        spawn(rules, state, now, &mut out);
    }
    if let Some(m) = &state.active {
        out.attractors.push(m.at);
    }
    out
}

fn outline_step(rules: &OutlineRules, state: &mut OutlineState, hands: &[HandView], dt: f64, now: f64) -> StepOutput {
    let mut out = StepOutput::default();
    for h in hands {
        let slot = &mut state.active[h.hand.index()];
        let found = if h.live {
            rules
                .outlines
                .iter()
                .position(|ol| h.position.lateral().distance(ol.centroid()) <= ol.activation_radius)
        } else {
            None
        };
        if found != *slot {
            if let Some(old) = *slot {
                out.events.push(ScenarioEvent {
                    t: now,
                    kind: EventKind::OutlineStop {
                        outline: rules.outlines[old].name.clone(),
                        hand: h.hand,
                    },
                });
            }
            if let Some(new) = found {
                out.events.push(ScenarioEvent {
                    t: now,
                    kind: EventKind::OutlineStart {
                        outline: rules.outlines[new].name.clone(),
                        hand: h.hand,
                    },
                });
            }
            *slot = found;
        }
        if let Some(i) = found {
            let path = &state.paths[i];
            let n = (now * path.update_rate + TIME_EPS).floor().max(0.0) as usize;
            out.commands.push(FeedbackCommand {
                hand: h.hand,
                focus: path.at(n),
                burst: dt,
                modulation_hz: rules.modulation_hz,
                shape: Some(rules.outlines[i].polyline()),
            });
        }
    }
    out
}

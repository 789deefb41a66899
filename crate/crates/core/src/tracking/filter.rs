use serde::{Deserialize, Serialize};

use super::TrackingError;
use crate::geometry::Point3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hand {
    Left,
    Right,
}

impl Hand {
    pub const ALL: [Hand; 2] = [Hand::Left, Hand::Right];

    pub fn index(self) -> usize {
        match self {
            Hand::Left => 0,
            Hand::Right => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Hand::Left => "left",
            Hand::Right => "right",
        }
    }
}

mod point_array {
    use crate::geometry::Point3D;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Point3D, s: S) -> Result<S::Ok, S::Error> {
        p.to_array().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Point3D, D::Error> {
        <[f64; 3]>::deserialize(d).map(Point3D::from)
    }
}

/// One timestamped palm observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandFrame {
    pub t: f64,
    pub hand: Hand,
    #[serde(with = "point_array")]
    pub pos: Point3D,
    pub tracked: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Weight of the newest sample in both the position and velocity filters.
    pub smoothing: f64,
    pub staleness_timeout: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            smoothing: 0.6,
            staleness_timeout: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandTrack {
    pub hand: Hand,
    pub position: Point3D,
    /// m/s per axis.
    pub velocity: Point3D,
    /// Time of the last tracked frame.
    pub last_update: f64,
    /// Time of the last accepted frame of any kind; later frames must be newer.
    pub last_frame: f64,
    pub stale: bool,
    /// Most recent raw observation.
    pub observed: Option<Point3D>,
}

impl HandTrack {
    pub fn new(hand: Hand) -> Self {
        Self {
            hand,
            position: Point3D::default(),
            velocity: Point3D::default(),
            last_update: f64::NEG_INFINITY,
            last_frame: f64::NEG_INFINITY,
            stale: true,
            observed: None,
        }
    }

    pub fn is_live(&self) -> bool {
        !self.stale
    }

    /// Re-evaluates staleness at time `now`.
    pub fn refresh(&mut self, now: f64, params: &FilterParams) {
        if self.observed.is_none() || now - self.last_update > params.staleness_timeout {
            self.stale = true;
        }
    }
}

fn lerp(a: Point3D, b: Point3D, w: f64) -> Point3D {
    Point3D::new(a.x + w * (b.x - a.x), a.y + w * (b.y - a.y), a.z + w * (b.z - a.z))
}

/// Folds one frame into a track.
///
/// Position is exponentially smoothed; velocity is the smoothed finite
/// difference of the filtered position. A track that was stale (or never
/// seen) restarts at the observation with zero velocity. Untracked frames
/// only move the ordering clock and may mark the track stale.
pub fn ingest(track: &HandTrack, frame: &HandFrame, params: &FilterParams) -> Result<HandTrack, TrackingError> {
    if !frame.t.is_finite() || frame.t <= track.last_frame {
        return Err(TrackingError::OutOfOrder {
            hand: frame.hand,
            t: frame.t,
            last: track.last_frame,
        });
    }
    if frame.tracked && !frame.pos.is_finite() {
        return Err(TrackingError::NonFinitePosition { hand: frame.hand });
    }
    let mut next = track.clone();
    next.last_frame = frame.t;
    if !frame.tracked {
        next.refresh(frame.t, params);
        return Ok(next);
    }
    let restart = track.observed.is_none() || track.stale || frame.t - track.last_update > params.staleness_timeout;
    if restart {
        next.position = frame.pos;
        next.velocity = Point3D::default();
    } else {
        let a = params.smoothing;
        let dt = frame.t - track.last_update;
        let pos = lerp(track.position, frame.pos, a);
        let diff = Point3D::new(
            (pos.x - track.position.x) / dt,
            (pos.y - track.position.y) / dt,
            (pos.z - track.position.z) / dt,
        );
        next.velocity = lerp(track.velocity, diff, a);
        next.position = pos;
    }
    next.last_update = frame.t;
    next.observed = Some(frame.pos);
    next.stale = false;
    Ok(next)
}

/// Constant-velocity extrapolation `horizon` seconds ahead.
pub fn predict(track: &HandTrack, horizon: f64) -> Result<Point3D, TrackingError> {
    if track.stale {
        return Err(TrackingError::Stale(track.hand));
    }
    let (p, v) = (track.position, track.velocity);
    Ok(Point3D::new(p.x + v.x * horizon, p.y + v.y * horizon, p.z + v.z * horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(t: f64, x: f64) -> HandFrame {
        HandFrame {
            t,
            hand: Hand::Left,
            pos: Point3D::new(x, 0.2, 0.15),
            tracked: true,
        }
    }

    #[test]
    fn first_frame_initializes() {
        let t = ingest(&HandTrack::new(Hand::Left), &frame(0.0, 0.1), &FilterParams::default()).unwrap();
        assert_eq!(t.position, Point3D::new(0.1, 0.2, 0.15));
        assert_eq!(t.velocity, Point3D::default());
        assert!(!t.stale);
    }

    #[test]
    fn converges_on_constant_input() {
        let p = FilterParams::default();
        let mut t = ingest(&HandTrack::new(Hand::Left), &frame(0.0, 0.0), &p).unwrap();
        for n in 1..100 {
            t = ingest(&t, &frame(n as f64 * 0.02, 0.3), &p).unwrap();
        }
        assert!((t.position.x - 0.3).abs() < 1e-12);
        assert!(t.velocity.x.abs() < 1e-12);
    }

    #[test]
    fn ramp_velocity_matches_closed_form() {
        // o_n = v n dt; lag and velocity follow geometric series in b = 1 - a:
        // v_n = v (1 - b^n - a n b^n)
        let p = FilterParams::default();
        let (v, dt, a) = (0.2, 0.02, p.smoothing);
        let b = 1.0 - a;
        let mut t = ingest(&HandTrack::new(Hand::Left), &frame(0.0, 0.0), &p).unwrap();
        for n in 1..=50 {
            t = ingest(&t, &frame(n as f64 * dt, v * n as f64 * dt), &p).unwrap();
            let nf = n as f64;
            let want = v * (1.0 - b.powf(nf) - a * nf * b.powf(nf));
            assert!((t.velocity.x - want).abs() < 1e-12, "n = {n}");
            let lag = v * dt * b * (1.0 - b.powf(nf)) / a;
            assert!((v * nf * dt - t.position.x - lag).abs() < 1e-12);
        }
        assert!((t.velocity.x - 0.2).abs() < 0.01);
    }

    #[test]
    fn rejects_out_of_order_and_non_finite() {
        let p = FilterParams::default();
        let t = ingest(&HandTrack::new(Hand::Left), &frame(1.0, 0.1), &p).unwrap();
        assert!(matches!(ingest(&t, &frame(1.0, 0.1), &p), Err(TrackingError::OutOfOrder { .. })));
        assert!(matches!(ingest(&t, &frame(0.5, 0.1), &p), Err(TrackingError::OutOfOrder { .. })));
        let mut bad = frame(2.0, 0.1);
        bad.pos.y = f64::NAN;
        assert!(matches!(ingest(&t, &bad, &p), Err(TrackingError::NonFinitePosition { .. })));
        bad.tracked = false;
        assert!(ingest(&t, &bad, &p).is_ok());
    }

    #[test]
    fn staleness() {
        let p = FilterParams::default();
        let mut t = ingest(&HandTrack::new(Hand::Left), &frame(0.0, 0.1), &p).unwrap();
        let mut lost = frame(0.2, 0.1);
        lost.tracked = false;
        t = ingest(&t, &lost, &p).unwrap();
        assert!(!t.stale);
        t.refresh(0.5, &p);
        assert!(!t.stale);
        t.refresh(0.51, &p);
        assert!(t.stale);
        // stays stale until a tracked frame arrives
        t.refresh(0.3, &p);
        assert!(t.stale);
        lost.t = 0.6;
        t = ingest(&t, &lost, &p).unwrap();
        assert!(t.stale);
        assert!(predict(&t, 0.02).is_err());
        t = ingest(&t, &frame(0.7, 0.4), &p).unwrap();
        assert!(!t.stale);
        assert_eq!(t.position.x, 0.4);
        assert_eq!(t.velocity.x, 0.0);
    }

    #[test]
    fn prediction() {
        let mut t = HandTrack::new(Hand::Right);
        t.stale = false;
        t.position = Point3D::new(0.1, 0.1, 0.1);
        assert_eq!(predict(&t, 0.1).unwrap(), t.position);
        t.velocity = Point3D::new(0.2, 0.0, 0.0);
        assert!((predict(&t, 0.1).unwrap().x - 0.12).abs() < 1e-15);
    }

    #[test]
    fn jsonl_shape() {
        let f: HandFrame =
            serde_json::from_str(r#"{"t":1.0,"hand":"left","pos":[0.1,0.2,0.15],"tracked":true}"#).unwrap();
        assert_eq!(f, HandFrame { t: 1.0, hand: Hand::Left, pos: Point3D::new(0.1, 0.2, 0.15), tracked: true });
        let back = serde_json::to_string(&f).unwrap();
        assert_eq!(back, r#"{"t":1.0,"hand":"left","pos":[0.1,0.2,0.15],"tracked":true}"#);
    }

    proptest! {
        #[test]
        fn stays_in_hull(steps in proptest::collection::vec((-0.5..0.5f64, -0.5..0.5f64, 0.0..0.5f64), 1..40)) {
            let p = FilterParams::default();
            let mut t = HandTrack::new(Hand::Left);
            for (n, &(x, y, z)) in steps.iter().enumerate() {
                let prev = t.position;
                let was_live = t.observed.is_some();
                let f = HandFrame { t: n as f64 * 0.02, hand: Hand::Left, pos: Point3D::new(x, y, z), tracked: true };
                t = ingest(&t, &f, &p).unwrap();
                if was_live {
                    // t.position = prev + w (obs - prev) with w in [0, 1] on every axis
                    for (a, b, c) in [(prev.x, x, t.position.x), (prev.y, y, t.position.y), (prev.z, z, t.position.z)] {
                        prop_assert!(c >= a.min(b) - 1e-15 && c <= a.max(b) + 1e-15);
                    }
                    let d_prev = t.position.distance(&prev);
                    let d_obs = t.position.distance(&f.pos);
                    prop_assert!((d_prev + d_obs - prev.distance(&f.pos)).abs() < 1e-12);
                }
            }
        }
    }
}

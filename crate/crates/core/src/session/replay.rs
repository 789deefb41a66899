use super::{Session, SessionError, TIME_EPS};
use crate::config::Config;
use crate::scenarios::{Scenario, ScenarioEvent};
use crate::tracking::HandFrame;

/// Result of a headless run over a recorded hand stream.
#[derive(Debug, Clone)]
pub struct ReplayRun {
    pub session: Session,
    /// State hash after every tick.
    pub hashes: Vec<String>,
    pub events: Vec<ScenarioEvent>,
    /// Frames rejected for ordering or bad values.
    pub dropped: u64,
}

/// Feeds `frames` into a fresh session and ticks at the control rate while
/// the tick time does not pass the last frame, so a stream lasting `T`
/// seconds yields `floor(T / dt) + 1` ticks.
pub fn replay(config: Config, frames: &[HandFrame], scenario: Option<Scenario>) -> Result<ReplayRun, SessionError> {
    let mut session = Session::new(config)?;
    if let Some(s) = scenario {
        session.load_scenario(s)?;
    }
    // per-hand ordering is judged in file order; survivors are then fed in time order
    let mut last = [f64::NEG_INFINITY; 2];
    let mut accepted: Vec<HandFrame> = Vec::with_capacity(frames.len());
    for f in frames {
        let i = f.hand.index();
        if f.t.is_finite() && f.t > last[i] && (!f.tracked || f.pos.is_finite()) {
            last[i] = f.t;
            accepted.push(*f);
        }
    }
    let mut dropped = (frames.len() - accepted.len()) as u64;
    accepted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let end = accepted.last().map_or(f64::NEG_INFINITY, |f| f.t);
    let mut next = 0;
    let mut hashes = Vec::new();
    let mut events = Vec::new();
    while session.time() <= end + TIME_EPS {
        while next < accepted.len() && accepted[next].t <= session.time() + TIME_EPS {
            if session.push_frame(accepted[next]).is_err() {
                dropped += 1;
            }
            next += 1;
        }
        session.tick();
        events.extend(session.drain_events());
        hashes.push(session.state_hash());
    }
    Ok(ReplayRun {
        session,
        hashes,
        events,
        dropped,
    })
}

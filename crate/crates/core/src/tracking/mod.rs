//! Hand-stream ingestion, short-horizon prediction and platform assignment.

pub(crate) mod assign;
mod filter;
mod replay;

use thiserror::Error;

pub use assign::{assign, Assignment};
pub use filter::{ingest, predict, FilterParams, Hand, HandFrame, HandTrack};
pub use replay::{read_jsonl, write_jsonl};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackingError {
    #[error("{} frame at t={t} is not newer than t={last}", hand.name())]
    OutOfOrder { hand: Hand, t: f64, last: f64 },
    #[error("{} frame has a non-finite position", hand.name())]
    NonFinitePosition { hand: Hand },
    #[error("{} track is stale", .0.name())]
    Stale(Hand),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("read failed: {0}")]
    Io(String),
}

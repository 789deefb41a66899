use std::io::BufRead;

use super::filter::HandFrame;
use super::TrackingError;

/// Reads a JSON Lines hand stream, one frame per line. Blank lines are skipped;
/// ordering is not checked here (the session drops out-of-order frames).
pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<HandFrame>, TrackingError> {
    let mut frames = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| TrackingError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: HandFrame = serde_json::from_str(&line).map_err(|e| TrackingError::Parse {
            line: n + 1,
            reason: e.to_string(),
        })?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn write_jsonl(frames: &[HandFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        out.push_str(&serde_json::to_string(f).expect("frames serialize"));
        out.push('\n');
    }
    out
}

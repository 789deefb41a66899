use std::fs::File;
use std::io::BufReader;

use hapbot::scenarios::Scenario;
use hapbot::session::replay;
use hapbot::tracking::read_jsonl;

use crate::{load_config, ReplayArgs};

fn load_scenario(arg: &str) -> Result<Scenario, String> {
    match Scenario::builtin(arg) {
        Ok(s) => Ok(s),
        Err(_) => {
            let text = std::fs::read_to_string(arg).map_err(|e| format!("scenario {arg:?}: {e}"))?;
            Scenario::from_json_str(&text).map_err(|e| format!("{arg}: {e}"))
        }
    }
}

pub fn run(args: &ReplayArgs) -> Result<(), String> {
    let config = load_config(args.config.as_deref())?;
    let scenario = args.scenario.as_deref().map(load_scenario).transpose()?;
    let file = File::open(&args.input).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let frames = read_jsonl(BufReader::new(file)).map_err(|e| format!("{}: {e}", args.input.display()))?;
    let run = replay(config, &frames, scenario).map_err(|e| e.to_string())?;
    run.session.export_metrics(&args.metrics).map_err(|e| e.to_string())?;
    if let Some(path) = &args.hashes {
        let mut text = run.hashes.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    if let Some(path) = &args.events {
        let mut text = String::new();
        for e in &run.events {
            text.push_str(&serde_json::to_string(e).expect("events serialize"));
            text.push('\n');
        }
        std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    println!(
        "{} frames, {} dropped, {} ticks, churn {}",
        frames.len(),
        run.dropped,
        run.hashes.len(),
        run.session.churn()
    );
    Ok(())
}

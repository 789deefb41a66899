//! `hapbot` command line: `serve`, `replay`, `field` and `bench`.

mod bench;
mod field;
mod replay;
pub mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hapbot::config::Config;

/// Environment variable holding the log filter (`error`, `warn`, `info`, `debug`, ...).
pub const LOG_ENV: &str = "HAPBOT_LOG";

#[derive(Debug, Parser)]
#[command(name = "hapbot", version, about = "Robot-carried mid-air ultrasound haptics simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the session server (WebSocket, JSON text frames).
    Serve(ServeArgs),
    /// Run a recorded hand stream headless and write the metrics CSV.
    Replay(ReplayArgs),
    /// Render a pressure-magnitude slice of one array focused at a point.
    Field(FieldArgs),
    /// Measure control ticks and pressure evaluations per second.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Session configuration (JSON); built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 8765)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hand frames, JSON Lines.
    #[arg(long)]
    pub input: PathBuf,
    /// Metrics CSV destination.
    #[arg(long)]
    pub metrics: PathBuf,
    /// Scene to run: a built-in name (piano, mole, outline) or a scene file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Also write the state hash after every tick, one per line.
    #[arg(long)]
    pub hashes: Option<PathBuf>,
    /// Also write scene events as JSON Lines.
    #[arg(long)]
    pub events: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Focal point `x,y,z` in meters, array frame (array centered at the origin, emitting at z = 0).
    #[arg(long, value_parser = parse_point)]
    pub focus: [f64; 3],
    /// Slice plane, `x=V`, `y=V` or `z=V`.
    #[arg(long, value_parser = parse_plane)]
    pub plane: (char, f64),
    /// Side length of the square slice, meters.
    #[arg(long)]
    pub extent: f64,
    /// Sample spacing, meters.
    #[arg(long)]
    pub res: f64,
    /// PGM image destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional CSV of the same samples.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Control ticks per timed run.
    #[arg(long, default_value_t = 2000)]
    pub ticks: u64,
}

fn parse_point(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse::<f64>().map_err(|e| format!("{p:?}: {e}"))?;
        if !o.is_finite() {
            return Err(format!("{p:?} is not finite"));
        }
    }
    Ok(out)
}

fn parse_plane(s: &str) -> Result<(char, f64), String> {
    let (axis, value) = s.split_once('=').ok_or_else(|| format!("expected AXIS=VALUE, got {s:?}"))?;
    let axis = match axis.trim() {
        "x" => 'x',
        "y" => 'y',
        "z" => 'z',
        other => return Err(format!("unknown axis {other:?}")),
    };
    let v: f64 = value.trim().parse().map_err(|e| format!("{value:?}: {e}"))?;
    if !v.is_finite() {
        return Err(format!("{value:?} is not finite"));
    }
    Ok((axis, v))
}

pub(crate) fn load_config(path: Option<&Path>) -> Result<Config, String> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Config::from_json_str(&text).map_err(|e| format!("{}: {e}", p.display()))
        }
    }
}

/// Parses `argv` and runs the command. Flag errors exit 2 with usage on
/// standard error, runtime failures exit 1.
pub fn run<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let result = match cli.command {
        Command::Serve(a) => serve::run(&a),
        Command::Replay(a) => replay::run(&a),
        Command::Field(a) => field::run(&a),
        Command::Bench(a) => bench::run(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

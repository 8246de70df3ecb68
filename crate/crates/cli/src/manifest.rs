use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// Record of one invocation, written next to the run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub flags: Value,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub wall_time_secs: f64,
    pub exit_code: i32,
    pub result: Value,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub maxsec: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
}

impl Versions {
    pub fn current() -> Self {
        Self { maxsec: env!("CARGO_PKG_VERSION"), os: std::env::consts::OS, arch: std::env::consts::ARCH }
    }
}

pub struct Recorder {
    pub subcommand: &'static str,
    pub flags: Value,
    pub seed: Option<u64>,
    started: Instant,
}

impl Recorder {
    pub fn start(subcommand: &'static str, flags: impl Serialize, seed: Option<u64>) -> Self {
        let flags = serde_json::to_value(flags).unwrap_or(Value::Null);
        Self { subcommand, flags, seed, started: Instant::now() }
    }

    pub fn finish(self, exit_code: i32, result: Value) -> RunManifest {
        RunManifest {
            subcommand: self.subcommand,
            flags: self.flags,
            seed: self.seed,
            versions: Versions::current(),
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            exit_code,
            result,
        }
    }
}

/// `<out>.manifest.json` when the run has an output file, otherwise
/// `maxsec-<subcommand>.manifest.json` in the working directory.
pub fn default_path(subcommand: &str, out: Option<&Path>) -> PathBuf {
    match out {
        Some(p) => {
            let mut s = p.as_os_str().to_owned();
            s.push(".manifest.json");
            PathBuf::from(s)
        }
        None => PathBuf::from(format!("maxsec-{subcommand}.manifest.json")),
    }
}

pub fn write(m: &RunManifest, path: &Path) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(m).map_err(std::io::Error::other)?;
    std::fs::write(path, text + "\n")
}

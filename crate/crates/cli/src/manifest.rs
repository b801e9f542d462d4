//! Per-run manifest. This is the only output that carries timestamps or
//! wall time, so everything else stays byte-identical across re-runs.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use spherecc::error::Result;

#[derive(Serialize)]
struct Manifest {
    command: String,
    started_unix_s: u64,
    wall_time_s: f64,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

pub struct RunTimer {
    command: &'static str,
    started: SystemTime,
    t0: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl RunTimer {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: SystemTime::now(),
            t0: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    /// Writes `manifest.json` into `dir` and consumes the timer.
    pub fn finish(self, dir: &Path) -> Result<()> {
        let started_unix_s = self
            .started
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            command: self.command.to_string(),
            started_unix_s,
            wall_time_s: self.t0.elapsed().as_secs_f64(),
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dir.join("manifest.json"), json + "\n")?;
        Ok(())
    }
}

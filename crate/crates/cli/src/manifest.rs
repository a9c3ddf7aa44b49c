//! Run manifests and atomic file output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Everything needed to identify and repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Fully resolved configuration; `--from-manifest` replays it.
    pub config: Value,
    pub outputs: BTreeMap<String, PathBuf>,
    pub status: RunStatus,
    #[serde(default)]
    pub error: Option<String>,
    pub metrics: Value,
    /// The only field that differs between identical runs.
    pub wall_clock: WallClock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_secs: f64,
    pub elapsed_secs: f64,
}

/// Tracks one command from start to manifest.
pub struct RunRecorder {
    command: String,
    seed: u64,
    config: Value,
    outputs: BTreeMap<String, PathBuf>,
    started: SystemTime,
    clock: Instant,
}

impl RunRecorder {
    pub fn start(command: &str, seed: u64, config: &impl Serialize) -> Self {
        Self {
            command: command.to_string(),
            seed,
            config: serde_json::to_value(config).expect("config serializes"),
            outputs: BTreeMap::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn output(&mut self, key: &str, path: &Path) {
        self.outputs.insert(key.to_string(), path.to_path_buf());
    }

    pub fn finish(self, status: RunStatus, error: Option<String>, metrics: Value) -> RunManifest {
        RunManifest {
            command: self.command,
            version: version_string(),
            seed: self.seed,
            config: self.config,
            outputs: self.outputs,
            status,
            error,
            metrics,
            wall_clock: WallClock {
                started_unix_secs: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
                elapsed_secs: self.clock.elapsed().as_secs_f64(),
            },
        }
    }
}

impl RunManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| crate::UsageError(format!("manifest {}: {e}", path.display())).into())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_atomic(path, (json + "\n").as_bytes())
    }
}

/// Package version, with `git describe` appended when the binary runs inside
/// a checkout.
pub fn version_string() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    let described = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match described {
        Some(g) => format!("{pkg} ({g})"),
        None => pkg.to_string(),
    }
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Record of one invocation, written last as `manifest.json`.
#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub tool_version: String,
    pub host_description: String,
    #[serde(rename = "timestampUTC")]
    pub timestamp_utc: String,
    pub outputs: Vec<PathBuf>,
}

/// Output directory that remembers every file handed out.
pub struct OutDir {
    root: PathBuf,
    outputs: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_owned(), outputs: Vec::new() })
    }

    /// Path for a new output file, created under the root.
    pub fn file(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(self, command: &str, config: impl Serialize) -> Result<PathBuf> {
        let path = self.root.join("manifest.json");
        let manifest = RunManifest {
            command: command.to_owned(),
            config: serde_json::to_value(config)?,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            host_description: host_description(),
            timestamp_utc: chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string(),
            outputs: self.outputs,
        };
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn host_description() -> String {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let cache = latticebolt::bench::last_level_cache_bytes()
        .map_or_else(|| "unknown last-level cache".to_owned(), |b| format!("{} KiB last-level cache", b / 1024));
    format!("{} {}, {cores} hardware threads, {cache}", std::env::consts::OS, std::env::consts::ARCH)
}

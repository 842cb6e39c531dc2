//! Run manifest: enough to re-run a command and see how it went.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use poolvcm::io::write_atomic;
use poolvcm::Error;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub status: Status,
    pub args: Vec<String>,
    /// sha256 of the configuration text as read
    pub config_hash: String,
    pub config: String,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub timings: BTreeMap<String, f64>,
    pub acceptance: Vec<serde_json::Value>,
    pub failures: usize,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl Manifest {
    /// A manifest marked incomplete; written before work starts so an
    /// aborted run leaves a record.
    pub fn begin(command: &str, config: &str, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("poolvcm".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Manifest {
            command: command.to_string(),
            status: Status::Incomplete,
            args: std::env::args().collect(),
            config_hash: format!("{:x}", Sha256::digest(config.as_bytes())),
            config: config.to_string(),
            seed,
            versions,
            timings: BTreeMap::new(),
            acceptance: Vec::new(),
            failures: 0,
            extra: serde_json::Map::new(),
        }
    }

    pub fn finish(&mut self, status: Status, start: Instant) {
        self.status = status;
        self.timings
            .insert("total_seconds".to_string(), start.elapsed().as_secs_f64());
    }

    pub fn write_as(&self, dir: &Path, name: &str) -> poolvcm::Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invalid(format!("serialising manifest: {e}")))?;
        write_atomic(&dir.join(name), json.as_bytes())
    }

    pub fn write(&self, dir: &Path) -> poolvcm::Result<()> {
        self.write_as(dir, MANIFEST_FILE)
    }
}

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

/// One emitted artifact.
pub struct Output {
    pub name: String,
    pub body: String,
}

#[derive(Debug, Serialize)]
pub struct OutputDigest {
    pub name: String,
    /// File written, or `null` when the output went to stdout.
    pub path: Option<String>,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command_line: Vec<String>,
    pub seed: Option<u64>,
    pub config: Value,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub exit_code: u8,
    pub outputs: Vec<OutputDigest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Writes outputs either into `out_dir` (plus `manifest.json`) or to stdout,
/// and returns their digests.
pub fn emit(outputs: &[Output], out_dir: Option<&Path>) -> io::Result<Vec<OutputDigest>> {
    let mut digests = Vec::new();
    match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            for o in outputs {
                let path = dir.join(&o.name);
                fs::write(&path, &o.body)?;
                log::info!("wrote {}", path.display());
                digests.push(OutputDigest {
                    name: o.name.clone(),
                    path: Some(path.display().to_string()),
                    bytes: o.body.len(),
                    sha256: sha256_hex(o.body.as_bytes()),
                });
            }
        }
        None => {
            let mut out = io::stdout().lock();
            for o in outputs {
                out.write_all(o.body.as_bytes())?;
                digests.push(OutputDigest {
                    name: o.name.clone(),
                    path: None,
                    bytes: o.body.len(),
                    sha256: sha256_hex(o.body.as_bytes()),
                });
            }
            out.flush()?;
        }
    }
    Ok(digests)
}

pub fn write_manifest(manifest: &RunManifest, out_dir: Option<&Path>) -> io::Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    match out_dir {
        Some(dir) => fs::write(dir.join("manifest.json"), text + "\n"),
        None => {
            let mut err = io::stderr().lock();
            writeln!(err, "{}", serde_json::to_string(manifest).expect("manifest serializes"))
        }
    }
}

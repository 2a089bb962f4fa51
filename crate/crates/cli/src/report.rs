use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub command: String,
    pub version: String,
    pub inputs_digest: String,
    pub seed: Option<u64>,
    pub wall_time_seconds: f64,
    pub payload: Value,
    pub warnings: Vec<String>,
}

/// sha256 of the compact JSON of `inputs`; object keys serialize sorted, so
/// the text is canonical.
pub fn digest(inputs: &Value) -> String {
    let text = serde_json::to_string(inputs).expect("JSON values always serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)
}

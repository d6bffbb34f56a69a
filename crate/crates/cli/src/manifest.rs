use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance block emitted with every report.
///
/// The timestamp is the only non-deterministic field; set
/// `SOURCE_DATE_EPOCH` to pin it.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: serde_json::Value,
    pub input_digests: BTreeMap<String, String>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(config: &impl Serialize) -> Self {
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            input_digests: BTreeMap::new(),
            timestamp: timestamp(),
        }
    }

    pub fn add_input(&mut self, name: impl Into<String>, bytes: &[u8]) {
        self.input_digests.insert(name.into(), format!("sha256:{}", sha256_hex(bytes)));
    }

    /// `# key: value` lines for the text and CSV formats.
    pub fn comment_lines(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# tool_version: {}\n", self.tool_version));
        out.push_str(&format!("# config: {}\n", self.config));
        for (name, digest) in &self.input_digests {
            out.push_str(&format!("# input {name}: {digest}\n"));
        }
        out.push_str(&format!("# timestamp: {}\n", self.timestamp));
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn timestamp() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

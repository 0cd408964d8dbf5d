//! Report envelope: a run manifest plus a deterministic body.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::lie::DualVector;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// The published JSON schema for report files.
pub const REPORT_SCHEMA: &str = include_str!("../schemas/report.schema.json");

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub algebra: Option<String>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    pub schema_version: u32,
    /// Seconds since the Unix epoch. The only field allowed to differ between reruns.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            parameters: BTreeMap::new(),
            algebra: None,
            seeds: Vec::new(),
            tool_version: TOOL_VERSION.to_string(),
            schema_version: REPORT_SCHEMA_VERSION,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn algebra(mut self, label: &str) -> Self {
        self.algebra = Some(label.to_string());
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seeds.push(seed);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub manifest: RunManifest,
    pub body: Value,
}

impl Report {
    pub fn new(manifest: RunManifest, body: impl Serialize) -> Result<Self> {
        Ok(Report {
            manifest,
            body: serde_json::to_value(body)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Serialized body alone; reruns with the same manifest must reproduce it exactly.
    pub fn body_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec_pretty(&self.body)?)
    }
}

/// Nonzero coefficients of a dual vector as `(index, "num/den")`.
pub fn lambda_record(lam: &DualVector) -> Vec<(usize, String)> {
    lam.coefficients
        .iter()
        .enumerate()
        .filter(|(_, c)| !num_traits::Zero::is_zero(*c))
        .map(|(i, c)| (i, format!("{}/{}", c.numer(), c.denom())))
        .collect()
}

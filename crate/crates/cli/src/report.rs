//! Report envelope written next to every command's data files.
//!
//! Schema 1: `schema`, `command`, `input`, `config`, `status`, `error`,
//! `results`, `versions`, in that order. `input` and `config` are sorted maps;
//! rationals are `"num/den"` strings and floats use the shortest round-trip form,
//! so two runs with the same settings give byte-identical files.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// The computation ran but a check it performs did not hold.
    VerificationFailed,
    /// The computation stopped; data files hold whatever was finished.
    Failed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::VerificationFailed | Status::Failed => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub schema: u32,
    pub command: String,
    pub input: BTreeMap<String, String>,
    pub config: BTreeMap<String, Value>,
    pub status: Status,
    pub error: Option<String>,
    pub results: Value,
    pub versions: BTreeMap<String, String>,
}

impl ReportEnvelope {
    pub fn new(command: &str, input: BTreeMap<String, String>, config: BTreeMap<String, Value>) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("newton-sublevel".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("sublevel-core".to_string(), sublevel_core::VERSION.to_string());
        ReportEnvelope {
            schema: SCHEMA,
            command: command.to_string(),
            input,
            config,
            status: Status::Ok,
            error: None,
            results: Value::Null,
            versions,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

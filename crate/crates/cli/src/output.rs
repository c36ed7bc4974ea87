//! JSON envelope and the mapping from errors to exit codes.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;
use serde_json::json;

pub const SCHEMA_VERSION: u32 = 1;

/// Raised after the result was printed when IPF cannot converge and repair
/// was not requested.
#[derive(Debug)]
pub struct InfeasibleRun(pub String);

impl std::fmt::Display for InfeasibleRun {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InfeasibleRun {}

/// Bad input that the core library does not see, e.g. a malformed flag value.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    use ipfnet::Error as E;
    for cause in e.chain() {
        if cause.is::<InfeasibleRun>() {
            return 2;
        }
        if cause.is::<InputError>() || cause.is::<std::io::Error>() || cause.is::<csv::Error>() || cause.is::<serde_json::Error>() {
            return 3;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::StructurallyInfeasible { .. } | E::StructurallyInfeasibleColumn { .. } | E::Infeasible { .. } => 2,
                E::DimensionMismatch { .. }
                | E::IndexOutOfRange { .. }
                | E::DuplicateEntry { .. }
                | E::InvalidWeight { .. }
                | E::InvalidMarginal { .. }
                | E::TotalMismatch { .. }
                | E::Empty(_)
                | E::InvalidConfig(_)
                | E::Parse { .. } => 3,
                _ => 1,
            };
        }
    }
    1
}

pub fn hint(e: &anyhow::Error) -> Option<&'static str> {
    (exit_code(e) == 2).then_some(
        "the marginals are not attainable on this support; rerun with --repair or use `ipfnet repair` to add edges",
    )
}

pub struct Emitter<'a> {
    pub out: Option<&'a Path>,
    pub meta: bool,
}

impl Emitter<'_> {
    pub fn emit<T: Serialize>(&self, command: &str, result: &T) -> Result<()> {
        let mut doc = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
        });
        if self.meta {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            doc["meta"] = json!({
                "version": env!("CARGO_PKG_VERSION"),
                "argv": std::env::args().collect::<Vec<_>>(),
                "unix_time": secs,
            });
        }
        doc["result"] = serde_json::to_value(result)?;
        let text = serde_json::to_string_pretty(&doc)? + "\n";
        match self.out {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
        Ok(())
    }
}

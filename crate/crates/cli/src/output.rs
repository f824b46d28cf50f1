//! Run directory layout: manifest, CSV tables, JSON summaries, error records.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use wigner_gaps::runner::ReplicaFailure;

use crate::config::ExperimentConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PARTIAL_MARKER: &str = "PARTIAL";

/// Failure of a run, mapped onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Core {
        error: wigner_gaps::Error,
        replica: Option<(usize, usize)>,
    },
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Core { error, .. } if error.is_convergence_failure() => 3,
            Failure::Core { .. } => 4,
            Failure::Io(_) => 1,
        }
    }

    pub fn record(&self) -> Value {
        let code = self.exit_code();
        match self {
            Failure::Validation(v) => json!({
                "exit_code": code,
                "kind": "config_validation",
                "message": format!("{} configuration violation(s)", v.len()),
                "violations": v,
            }),
            Failure::Core { error, replica } => json!({
                "exit_code": code,
                "kind": if code == 3 { "non_convergence" } else { "numerical" },
                "message": error.to_string(),
                "detail": format!("{error:?}"),
                "failed_replica": replica.map(|r| r.0),
                "completed_replicas": replica.map(|r| r.1),
            }),
            Failure::Io(m) => json!({ "exit_code": code, "kind": "io", "message": m }),
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(v) => {
                writeln!(f, "invalid configuration:")?;
                for s in v {
                    writeln!(f, "  - {s}")?;
                }
                Ok(())
            }
            Failure::Core { error, replica: Some((r, _)) } => write!(f, "replica {r} failed: {error}"),
            Failure::Core { error, .. } => write!(f, "{error}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<wigner_gaps::Error> for Failure {
    fn from(error: wigner_gaps::Error) -> Self {
        Failure::Core { error, replica: None }
    }
}

impl From<ReplicaFailure> for Failure {
    fn from(f: ReplicaFailure) -> Self {
        Failure::Core {
            error: f.error,
            replica: Some((f.replica, f.completed)),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Replica seeds of one parallel batch, listed in the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct SeedBlock {
    pub label: String,
    /// Batch master; replica `i` receives `derive_seed(master, i)`.
    pub master: u64,
    pub seeds: Vec<u64>,
}

impl SeedBlock {
    pub fn new(label: impl Into<String>, master: u64, reps: usize) -> Self {
        Self {
            label: label.into(),
            master,
            seeds: (0..reps as u64).map(|i| wigner_gaps::runner::derive_seed(master, i)).collect(),
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    manifest_id: &'a str,
    artifact: &'static str,
    version: &'static str,
    status: &'a str,
    config: &'a ExperimentConfig,
    seed_derivation: &'static str,
    replica_seeds: &'a [SeedBlock],
    metadata: &'a Value,
}

/// Output directory of one run.
pub struct RunOutput {
    dir: PathBuf,
    manifest_id: String,
    config: ExperimentConfig,
    seeds: Vec<SeedBlock>,
}

pub fn manifest_id(cfg: &ExperimentConfig) -> String {
    let echo = serde_json::to_string(cfg).expect("config serializes");
    let mut h = Sha256::new();
    h.update(VERSION.as_bytes());
    h.update([0]);
    h.update(echo.as_bytes());
    hex::encode(h.finalize())
}

impl RunOutput {
    /// Create the directory and write the manifest with status `running`.
    pub fn create(cfg: &ExperimentConfig, seeds: Vec<SeedBlock>) -> Result<Self, Failure> {
        fs::create_dir_all(&cfg.out)?;
        let _ = fs::remove_file(cfg.out.join(PARTIAL_MARKER));
        let _ = fs::remove_file(cfg.out.join("error.json"));
        let out = Self {
            dir: cfg.out.clone(),
            manifest_id: manifest_id(cfg),
            config: cfg.clone(),
            seeds,
        };
        out.write_manifest("running", &Value::Null)?;
        Ok(out)
    }

    pub fn id(&self) -> &str {
        &self.manifest_id
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_manifest(&self, status: &str, metadata: &Value) -> Result<(), Failure> {
        let m = Manifest {
            manifest_id: &self.manifest_id,
            artifact: "wigner-gaps",
            version: VERSION,
            status,
            config: &self.config,
            seed_derivation: "splitmix64(master + (replica + 1) * 0x9e3779b97f4a7c15)",
            replica_seeds: &self.seeds,
            metadata,
        };
        self.write_json("manifest.json", &m)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        s.push('\n');
        fs::write(self.dir.join(name), s)?;
        Ok(())
    }

    /// Write a CSV with a leading `manifest_id` column.
    pub fn write_csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        let mut head = vec!["manifest_id"];
        head.extend_from_slice(header);
        w.write_record(&head)?;
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            w.write_record(std::iter::once(self.manifest_id.clone()).chain(row))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Record a failure: error record, partial marker, manifest status.
    pub fn fail(&self, failure: &Failure) {
        let _ = self.write_json("error.json", &failure.record());
        let _ = fs::File::create(self.dir.join(PARTIAL_MARKER)).and_then(|mut f| f.write_all(b"run aborted; outputs are incomplete\n"));
        let _ = self.write_manifest("failed", &failure.record());
    }
}

/// Error record for failures that happen before a run directory exists.
pub fn write_early_error(dir: &Path, failure: &Failure) {
    if fs::create_dir_all(dir).is_ok() {
        let s = serde_json::to_string_pretty(&failure.record()).unwrap_or_default();
        let _ = fs::write(dir.join("error.json"), s + "\n");
    }
}

/// Shortest round-trip representation, so tables are byte-stable.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use wigner_gaps::Error;

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::Validation(vec!["x".into()]).exit_code(), 2);
        let conv: Failure = Error::NoConvergence { iterations: 50, residual: 1.0 }.into();
        assert_eq!(conv.exit_code(), 3);
        assert_eq!(conv.record()["kind"], "non_convergence");
        let num: Failure = Error::EigensolveFailure("x".into()).into();
        assert_eq!(num.exit_code(), 4);
        assert_eq!(Failure::Io("disk".into()).exit_code(), 1);
    }

    #[test]
    fn replica_failure_is_recorded() {
        let f: Failure = ReplicaFailure {
            replica: 3,
            completed: 7,
            error: Error::DegenerateFit,
        }
        .into();
        let r = f.record();
        assert_eq!(r["failed_replica"], 3);
        assert_eq!(r["completed_replicas"], 7);
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}

//! Batch scenarios behind the `cloudlapse` binary: JSON config in, CSV and
//! JSON artifacts plus a run manifest out.
//!
//! Exit codes: 0 when every certification passes, 2 when a monitored bound is
//! falsified (the certificates hold the witness), 1 on any operational error.

mod config;
mod scenarios;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    load_config, parse_config, parse_config_str, BoundSpec, BoundarySetup, GravitySpec, IdentityCheck, InitialKinematics,
    Overrides, Physics, PotentialCheck, RaychaudhuriCertify, RegularitySpec, Scenario, ScenarioConfig, ShapeSpec, SphRun,
    SphTolerances, TidalMode, VirialCertify,
};

use crate::admissible::SigmaMode;
use crate::{io, Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Falsified,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Falsified => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub scenario: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub mode: SigmaMode,
    /// `σ < σ†` where σ enters; `None` for scenarios without σ.
    pub conforming: Option<bool>,
    pub seeds: Seeds,
    pub status: Status,
    pub exit_code: i32,
    pub summary: Vec<String>,
    pub artifacts: Vec<Artifact>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: Status,
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code()
    }
}

/// Maps a run result onto the 0/1/2 contract.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(_) => 1,
    }
}

/// Collects artifacts under the output directory.
pub(crate) struct Sink {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::Io(format!("output directory {} does not exist", dir.display())));
        }
        Ok(Self { dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    /// Absolute path for `rel`, creating parent directories, and records it.
    pub(crate) fn file(&mut self, rel: &str, role: &str) -> Result<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.artifacts.push(Artifact { path: rel.to_string(), role: role.to_string() });
        Ok(p)
    }

    pub(crate) fn json<T: Serialize>(&mut self, rel: &str, role: &str, value: &T) -> Result<()> {
        let p = self.file(rel, role)?;
        io::write_json(p, value)
    }
}

/// What a scenario found.
pub(crate) struct Findings {
    pub pass: bool,
    pub conforming: Option<bool>,
    pub summary: Vec<String>,
}

/// Runs a validated scenario into its (existing) output directory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let dir = cfg.output_dir();
    let mut sink = Sink::new(&dir)?;
    let f = scenarios::run(cfg, &mut sink)?;
    let status = if f.pass { Status::Pass } else { Status::Falsified };
    let manifest = Manifest {
        tool: "cloudlapse".into(),
        version: VERSION.into(),
        kind: cfg.scenario.kind().into(),
        mode: cfg.mode,
        conforming: f.conforming,
        seeds: Seeds { scenario: cfg.seed },
        status,
        exit_code: status.exit_code(),
        summary: f.summary,
        artifacts: sink.artifacts,
        config: cfg.clone(),
    };
    let manifest_path = dir.join(MANIFEST);
    io::write_json(&manifest_path, &manifest)?;
    Ok(RunOutcome { status, manifest_path, manifest })
}

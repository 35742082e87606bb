//! On-disk formats: scenario JSON, `events.ndjson` and the snapshot file.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ascsim_core::event::{canonical_json, EventLog, LogError};
use ascsim_core::scenario::{
    load_scenario_with, ScenarioError, ScenarioOverrides, DEFAULT_SCENARIO_JSON,
};
use ascsim_core::world::{FoldError, World};
use ascsim_core::{Scenario, Snapshot};
use thiserror::Error;

pub const EVENTS_FILE: &str = "events.ndjson";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Scenario { path: String, source: ScenarioError },
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error("{path}: {source}")]
    Fold { path: PathBuf, source: FoldError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FileError + '_ {
    move |source| FileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a scenario file, or the bundled case study when `path` is `None`.
pub fn read_scenario(path: Option<&Path>, overrides: ScenarioOverrides) -> Result<Scenario, FileError> {
    let (text, name) = match path {
        Some(p) => (fs::read_to_string(p).map_err(io_err(p))?, p.display().to_string()),
        None => (DEFAULT_SCENARIO_JSON.to_string(), "<bundled default>".to_string()),
    };
    load_scenario_with(&text, overrides).map_err(|source| FileError::Scenario { path: name, source })
}

pub fn read_log(path: &Path) -> Result<EventLog, FileError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    EventLog::from_ndjson(&text).map_err(|source| FileError::Log {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_log(path: &Path, log: &EventLog) -> Result<(), FileError> {
    fs::write(path, log.to_ndjson()).map_err(io_err(path))
}

/// Canonical snapshot text; the same bytes come out of a live run and a replay.
pub fn snapshot_text(snapshot: &Snapshot) -> String {
    let mut s = canonical_json(snapshot);
    s.push('\n');
    s
}

pub fn write_snapshot(path: &Path, snapshot: &Snapshot) -> Result<(), FileError> {
    fs::write(path, snapshot_text(snapshot)).map_err(io_err(path))
}

/// Folds a persisted log into its terminal snapshot.
pub fn replay_file(path: &Path) -> Result<Snapshot, FileError> {
    let log = read_log(path)?;
    let world = World::fold_log(&log).map_err(|source| FileError::Fold {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(world.snapshot())
}

/// Append-only writer for the live log.
pub struct LogWriter {
    path: PathBuf,
    file: fs::File,
}

impl LogWriter {
    pub fn open(path: &Path) -> Result<Self, FileError> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io_err(path))?;
        Ok(LogWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, events: &[ascsim_core::Event]) -> Result<(), FileError> {
        if events.is_empty() {
            return Ok(());
        }
        let mut buf = String::new();
        for e in events {
            buf.push_str(&e.to_canonical_json());
            buf.push('\n');
        }
        self.file
            .write_all(buf.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(io_err(&self.path))
    }
}

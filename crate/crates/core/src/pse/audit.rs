//! Audit records for gate passes and an append-only JSON Lines log.

use std::fs::OpenOptions;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{PerturbationConfig, PseError, Verdict};
use crate::sim::{RealizedWorld, Token};

pub const AUDIT_FORMAT: &str = "simframe-audit/1";

/// Source of timestamps. Tests and golden files use [`LogicalClock`].
pub trait Clock {
    fn now(&mut self) -> u64;
}

/// Counts calls: 0, 1, 2, ...
#[derive(Debug, Default, Clone)]
pub struct LogicalClock(u64);

impl Clock for LogicalClock {
    fn now(&mut self) -> u64 {
        let t = self.0;
        self.0 += 1;
        t
    }
}

/// Milliseconds since the Unix epoch.
#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&mut self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateSeeds {
    pub partial: u64,
    pub complete: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub partial: u64,
    pub complete: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timestamps {
    pub started: u64,
    pub evaluated: u64,
    pub finished: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateStatus {
    Completed,
    Rejected,
    PartialFailed,
    CompleteFailed,
}

/// What one simulator did during a pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub seed: u64,
    pub bound: u64,
    pub input: Vec<Token>,
    pub tokens: Vec<Token>,
    pub realized: Vec<RealizedWorld>,
    pub events: Vec<String>,
    /// Highest complexity among the events selected, if any step ran.
    pub max_selected_complexity: Option<u64>,
    pub error: Option<String>,
}

/// Full account of one gate pass. `complete` is present exactly when the
/// verdict approved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub format: String,
    pub prompt: Vec<Token>,
    pub condition: Vec<Token>,
    pub input: Vec<Token>,
    pub perturbation: Option<PerturbationConfig>,
    pub bounds: Bounds,
    pub budgets: Bounds,
    pub seeds: GateSeeds,
    pub rng: String,
    pub partial: PhaseTrace,
    pub verdict: Verdict,
    pub complete: Option<PhaseTrace>,
    pub status: GateStatus,
    pub timestamps: Timestamps,
}

/// Compact single-line JSON; field order follows the struct.
pub fn audit_export(record: &AuditRecord) -> String {
    serde_json::to_string(record).expect("audit records always serialize")
}

pub fn audit_import(text: &str) -> Result<AuditRecord, PseError> {
    serde_json::from_str(text).map_err(|e| PseError::Audit(e.to_string()))
}

/// Append-only JSON Lines file, one record per line.
#[derive(Debug, Clone)]
pub struct AuditLog {
    path: PathBuf,
}

impl AuditLog {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        AuditLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes the record and its newline in a single call.
    pub fn append(&self, record: &AuditRecord) -> io::Result<()> {
        let mut line = audit_export(record);
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        f.write_all(line.as_bytes())
    }

    pub fn read_all(&self) -> Result<Vec<AuditRecord>, PseError> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| PseError::Audit(e.to_string()))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(audit_import)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pse::Decision;

    fn record(complete: bool) -> AuditRecord {
        let trace = PhaseTrace {
            seed: 3,
            bound: 40,
            input: vec![Token::separator()],
            tokens: vec![Token::new("x")],
            realized: vec![RealizedWorld {
                event: "e".into(),
                world: "w".into(),
            }],
            events: vec!["e".into()],
            max_selected_complexity: Some(40),
            error: None,
        };
        AuditRecord {
            format: AUDIT_FORMAT.into(),
            prompt: vec![],
            condition: vec![],
            input: vec![Token::separator()],
            perturbation: Some(PerturbationConfig::identity(1)),
            bounds: Bounds { partial: 40, complete: 40 },
            budgets: Bounds { partial: 1, complete: 1 },
            seeds: GateSeeds { partial: 3, complete: 4 },
            rng: "r".into(),
            partial: trace.clone(),
            verdict: Verdict {
                decision: if complete { Decision::Approve } else { Decision::Reject },
                rule: "default".into(),
                span: None,
                rationale: "default: no rule matched".into(),
            },
            complete: complete.then_some(trace),
            status: if complete { GateStatus::Completed } else { GateStatus::Rejected },
            timestamps: Timestamps { started: 0, evaluated: 1, finished: 2 },
        }
    }

    #[test]
    fn round_trip_and_null_complete() {
        for approved in [true, false] {
            let r = record(approved);
            let text = audit_export(&r);
            assert_eq!(audit_import(&text).unwrap(), r);
            assert_eq!(text, audit_export(&r));
            assert_eq!(text.contains("\"complete\":null"), !approved);
        }
        assert!(audit_export(&record(true)).starts_with("{\"format\":\"simframe-audit/1\",\"prompt\""));
    }

    #[test]
    fn log_appends_lines() {
        let dir = tempfile::tempdir().unwrap();
        let log = AuditLog::new(dir.path().join("audit.jsonl"));
        log.append(&record(true)).unwrap();
        log.append(&record(false)).unwrap();
        let back = log.read_all().unwrap();
        assert_eq!(back, vec![record(true), record(false)]);
    }

    #[test]
    fn logical_clock_counts() {
        let mut c = LogicalClock::default();
        assert_eq!((c.now(), c.now(), c.now()), (0, 1, 2));
        assert!(SystemClock.now() > 0);
    }
}

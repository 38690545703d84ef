//! Operator-log records and co-occurrence counting.
//!
//! Input is JSON Lines, one record per line:
//! `{"ts": RFC3339, "cohort": "novice"|"intermediate"|"expert", "params": [int], "session": optional}`.
//! Parameter mentions are assumed to be extracted upstream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};

pub const DEFAULT_UNIVERSE: usize = 27;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("universe size must be at least 2, got {0}")]
    Universe(usize),
    #[error("time window must be positive, got {0}")]
    Window(i64),
    #[error("parameter {param} is outside the universe 0..{universe}")]
    ParamOutOfRange { param: usize, universe: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Experience group of the operator who wrote the entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cohort {
    /// Less than one year of experience.
    Novice,
    /// One to four years.
    Intermediate,
    /// More than four years.
    Expert,
}

impl Cohort {
    pub const ALL: [Cohort; 3] = [Cohort::Novice, Cohort::Intermediate, Cohort::Expert];

    pub fn as_str(self) -> &'static str {
        match self {
            Cohort::Novice => "novice",
            Cohort::Intermediate => "intermediate",
            Cohort::Expert => "expert",
        }
    }
}

impl fmt::Display for Cohort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cohort {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "novice" => Ok(Cohort::Novice),
            "intermediate" => Ok(Cohort::Intermediate),
            "expert" => Ok(Cohort::Expert),
            other => Err(format!("unknown cohort {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub timestamp: DateTime<Utc>,
    pub cohort: Cohort,
    pub params: BTreeSet<usize>,
    pub session: Option<String>,
}

/// Wire form of one JSONL line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub ts: String,
    pub cohort: String,
    pub params: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
}

impl LogRecord {
    pub fn to_raw(&self) -> RawRecord {
        RawRecord {
            ts: self
                .timestamp
                .to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            cohort: self.cohort.as_str().to_string(),
            params: self.params.iter().map(|&p| p as i64).collect(),
            session: self.session.clone(),
        }
    }

    /// One JSONL line, without the trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("records always serialize")
    }
}

/// How records are grouped into co-occurrence units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Grouping {
    /// Each log entry is its own unit.
    PerRecord,
    /// Entries falling into the same `floor(unix_seconds / seconds)` bucket
    /// form one unit.
    TimeWindow { seconds: i64 },
    /// Entries sharing a session id form one unit; entries without a session
    /// id stay on their own.
    PerSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    RawCounts,
    /// Counts divided by the number of grouping units.
    PerRecordRate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub universe_size: usize,
    pub grouping: Grouping,
    pub normalization: Normalization,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            universe_size: DEFAULT_UNIVERSE,
            grouping: Grouping::PerRecord,
            normalization: Normalization::RawCounts,
        }
    }
}

impl IngestConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.universe_size < 2 {
            return Err(IngestError::Universe(self.universe_size));
        }
        if let Grouping::TimeWindow { seconds } = self.grouping {
            if seconds <= 0 {
                return Err(IngestError::Window(seconds));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseMode {
    /// Abort at the first bad line.
    Strict,
    /// Skip bad lines and report them.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    /// 1-based line number.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome {
    pub records: Vec<LogRecord>,
    pub errors: Vec<LineError>,
    /// Blank lines are ignored and not counted as records.
    pub blank_lines: usize,
}

fn parse_line(text: &str, universe: usize) -> Result<LogRecord, String> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let timestamp = DateTime::parse_from_rfc3339(&raw.ts)
        .map_err(|e| format!("invalid timestamp {:?}: {e}", raw.ts))?
        .with_timezone(&Utc);
    let cohort = Cohort::from_str(&raw.cohort)?;
    let mut params = BTreeSet::new();
    for p in raw.params {
        if p < 0 || p as u64 >= universe as u64 {
            return Err(format!(
                "parameter index {p} out of range 0..{universe}"
            ));
        }
        params.insert(p as usize);
    }
    Ok(LogRecord {
        timestamp,
        cohort,
        params,
        session: raw.session,
    })
}

/// Parses JSONL lines in order, collecting per-line diagnostics.
pub fn parse_records<I, S>(lines: I, universe: usize, mode: ParseMode) -> Result<ParseOutcome, IngestError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut outcome = ParseOutcome {
        records: Vec::new(),
        errors: Vec::new(),
        blank_lines: 0,
    };
    for (idx, line) in lines.into_iter().enumerate() {
        let text = line.as_ref().trim();
        if text.is_empty() {
            outcome.blank_lines += 1;
            continue;
        }
        match parse_line(text, universe) {
            Ok(record) => outcome.records.push(record),
            Err(message) => {
                if mode == ParseMode::Strict {
                    return Err(IngestError::Line {
                        line: idx + 1,
                        message,
                    });
                }
                outcome.errors.push(LineError {
                    line: idx + 1,
                    message,
                });
            }
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum UnitKey {
    Window(i64),
    Session(String),
}

/// Mergeable co-occurrence state. Shards can be accumulated independently
/// and combined with [`CooccurrenceAccumulator::merge`]; the result does not
/// depend on record order or shard boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceAccumulator {
    grouping: Grouping,
    /// Pair counts from units that are already closed (per-record grouping
    /// and session-less records).
    counts: BTreeMap<(usize, usize), u64>,
    closed_units: u64,
    /// Open units keyed by window or session, merged by set union.
    open: BTreeMap<UnitKey, BTreeSet<usize>>,
}

fn add_pairs(counts: &mut BTreeMap<(usize, usize), u64>, params: &BTreeSet<usize>) {
    let items: Vec<usize> = params.iter().copied().collect();
    for (a, &i) in items.iter().enumerate() {
        for &j in &items[a + 1..] {
            *counts.entry((i, j)).or_insert(0) += 1;
        }
    }
}

impl CooccurrenceAccumulator {
    pub fn new(grouping: Grouping) -> Self {
        Self {
            grouping,
            counts: BTreeMap::new(),
            closed_units: 0,
            open: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, record: &LogRecord) {
        let key = match (&self.grouping, &record.session) {
            (Grouping::PerRecord, _) | (Grouping::PerSession, None) => None,
            (Grouping::TimeWindow { seconds }, _) => {
                Some(UnitKey::Window(record.timestamp.timestamp().div_euclid(*seconds)))
            }
            (Grouping::PerSession, Some(s)) => Some(UnitKey::Session(s.clone())),
        };
        match key {
            None => {
                add_pairs(&mut self.counts, &record.params);
                self.closed_units += 1;
            }
            Some(key) => self
                .open
                .entry(key)
                .or_default()
                .extend(record.params.iter().copied()),
        }
    }

    pub fn merge(&mut self, other: Self) {
        for (pair, c) in other.counts {
            *self.counts.entry(pair).or_insert(0) += c;
        }
        self.closed_units += other.closed_units;
        for (key, params) in other.open {
            self.open.entry(key).or_default().extend(params);
        }
    }

    pub fn units(&self) -> u64 {
        self.closed_units + self.open.len() as u64
    }

    pub fn finish(&self, normalization: Normalization) -> BTreeMap<(usize, usize), f64> {
        let mut counts = self.counts.clone();
        for params in self.open.values() {
            add_pairs(&mut counts, params);
        }
        let scale = match normalization {
            Normalization::RawCounts => 1.0,
            Normalization::PerRecordRate => {
                let units = self.units();
                if units == 0 {
                    1.0
                } else {
                    1.0 / units as f64
                }
            }
        };
        counts
            .into_iter()
            .map(|(pair, c)| (pair, c as f64 * scale))
            .collect()
    }
}

/// Pair weights `(i, j)` with `i < j` over the grouping units of `records`.
pub fn cooccurrence_counts(
    records: &[LogRecord],
    cfg: &IngestConfig,
) -> Result<BTreeMap<(usize, usize), f64>, IngestError> {
    cfg.validate()?;
    let mut acc = CooccurrenceAccumulator::new(cfg.grouping.clone());
    for r in records {
        acc.add(r);
    }
    Ok(acc.finish(cfg.normalization))
}

/// Graph over the full parameter universe built from the records of one cohort.
pub fn build_cohort_graph(
    records: &[LogRecord],
    cohort: Cohort,
    cfg: &IngestConfig,
) -> Result<Graph, IngestError> {
    cfg.validate()?;
    let selected: Vec<LogRecord> = records
        .iter()
        .filter(|r| r.cohort == cohort)
        .cloned()
        .collect();
    for r in &selected {
        if let Some(&param) = r.params.iter().find(|&&p| p >= cfg.universe_size) {
            return Err(IngestError::ParamOutOfRange {
                param,
                universe: cfg.universe_size,
            });
        }
    }
    let counts = cooccurrence_counts(&selected, cfg)?;
    let edges: Vec<_> = counts.into_iter().map(|((i, j), w)| (i, j, w)).collect();
    Ok(Graph::anonymous(cfg.universe_size, &edges)?)
}

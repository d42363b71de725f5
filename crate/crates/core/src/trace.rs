//! The run trace: an append-only sequence of JSONL events, byte-stable
//! for a fixed (scenario, seed, until) triple, plus the replay checker
//! that re-verifies ordering and causality invariants from a file alone.
//!
//! Every line is one self-contained JSON object `{"t":…,"kind":…,
//! "payload":…}`. Payload maps are sorted (serde_json's default map is a
//! BTreeMap), there are no wall-clock timestamps anywhere, and floats are
//! emitted in shortest round-trip form, so identical runs serialize to
//! identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// What happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TraceKind {
    Reading,
    Fact,
    ModeSwitch,
    Analyze,
    Plan,
    NoChange,
    Command,
    Ack,
    Adapt,
    Warning,
}

impl fmt::Display for TraceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub t: u64,
    pub kind: TraceKind,
    pub payload: Value,
}

impl TraceEvent {
    pub fn new(t: u64, kind: TraceKind, payload: Value) -> Self {
        Self { t, kind, payload }
    }

    /// The canonical single-line form (no trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace events always serialize")
    }
}

/// Writes events as JSONL to any sink.
pub fn write_trace<'a, W: Write>(
    sink: &mut W,
    events: impl IntoIterator<Item = &'a TraceEvent>,
) -> std::io::Result<()> {
    for event in events {
        sink.write_all(event.to_line().as_bytes())?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

/// Problems reading a trace back.
#[derive(Debug, Error)]
pub enum TraceReadError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed event: {message}")]
    Malformed { line: usize, message: String },
}

/// Reads a JSONL trace, failing on the first malformed line.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<TraceEvent>, TraceReadError> {
    let mut events = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: TraceEvent =
            serde_json::from_str(&line).map_err(|e| TraceReadError::Malformed {
                line: idx + 1,
                message: e.to_string(),
            })?;
        events.push(event);
    }
    Ok(events)
}

/// A violated replay invariant, naming the rule that broke.
#[derive(Debug, Error, PartialEq)]
pub enum ReplayViolation {
    #[error("monotone-ticks: event {index} at t={t} after t={previous}")]
    NonMonotoneTicks { index: usize, t: u64, previous: u64 },
    #[error("ack-after-command: ack {index} (device `{device}`, seq {seq}) has no prior command")]
    AckWithoutCommand {
        index: usize,
        device: String,
        seq: u64,
    },
    #[error("adapt-after-plan: adapt {index} at t={t} has no plan in the same loop step")]
    AdaptWithoutPlan { index: usize, t: u64 },
    #[error("necessity: adapt {index} at t={t} follows an analyze with no violations")]
    AdaptWithoutViolations { index: usize, t: u64 },
    #[error("event {index}: missing or mistyped payload field `{field}`")]
    BadPayload { index: usize, field: String },
}

/// Per-kind counts plus the number of events, for replay summaries.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ReplaySummary {
    pub events: usize,
    pub by_kind: BTreeMap<String, usize>,
    pub adaptations: usize,
}

fn payload_u64(event: &TraceEvent, index: usize, field: &str) -> Result<u64, ReplayViolation> {
    event
        .payload
        .get(field)
        .and_then(Value::as_u64)
        .ok_or_else(|| ReplayViolation::BadPayload {
            index,
            field: field.to_string(),
        })
}

fn payload_str<'a>(
    event: &'a TraceEvent,
    index: usize,
    field: &str,
) -> Result<&'a str, ReplayViolation> {
    event
        .payload
        .get(field)
        .and_then(Value::as_str)
        .ok_or_else(|| ReplayViolation::BadPayload {
            index,
            field: field.to_string(),
        })
}

/// Re-checks the trace invariants:
///
/// * ticks are monotone non-decreasing;
/// * every Ack names a Command seen earlier (same seq and device);
/// * every Adapt follows a successful Plan in the same loop step;
/// * necessity: the Analyze opening that loop step reported at least one
///   violation.
pub fn verify_trace(events: &[TraceEvent]) -> Result<ReplaySummary, ReplayViolation> {
    let mut summary = ReplaySummary::default();
    let mut last_t: Option<u64> = None;
    // (device, seq) pairs of commands seen so far.
    let mut commands_seen: Vec<(String, u64)> = Vec::new();
    // State of the current loop step (reset by each Analyze).
    let mut step_violations = 0usize;
    let mut step_planned = false;
    let mut step_t = 0u64;

    for (index, event) in events.iter().enumerate() {
        summary.events += 1;
        *summary.by_kind.entry(event.kind.to_string()).or_default() += 1;

        if let Some(prev) = last_t {
            if event.t < prev {
                return Err(ReplayViolation::NonMonotoneTicks {
                    index,
                    t: event.t,
                    previous: prev,
                });
            }
        }
        last_t = Some(event.t);

        match event.kind {
            TraceKind::Analyze => {
                step_t = event.t;
                step_planned = false;
                step_violations = event
                    .payload
                    .get("report")
                    .and_then(|r| r.get("violations"))
                    .and_then(Value::as_array)
                    .map(Vec::len)
                    .ok_or(ReplayViolation::BadPayload {
                        index,
                        field: "report.violations".to_string(),
                    })?;
            }
            TraceKind::Plan => {
                // Only a plan that produced a target opens the door to an
                // Adapt; a planning failure does not.
                step_planned = event.t == step_t && event.payload.get("target").is_some();
            }
            TraceKind::Command => {
                let device = payload_str(event, index, "device")?.to_string();
                let seq = payload_u64(event, index, "seq")?;
                commands_seen.push((device, seq));
            }
            TraceKind::Ack => {
                let device = payload_str(event, index, "device")?.to_string();
                let seq = payload_u64(event, index, "seq")?;
                if !commands_seen.iter().any(|c| c.0 == device && c.1 == seq) {
                    return Err(ReplayViolation::AckWithoutCommand { index, device, seq });
                }
            }
            TraceKind::Adapt => {
                summary.adaptations += 1;
                if !step_planned || event.t != step_t {
                    return Err(ReplayViolation::AdaptWithoutPlan { index, t: event.t });
                }
                if step_violations == 0 {
                    return Err(ReplayViolation::AdaptWithoutViolations { index, t: event.t });
                }
            }
            _ => {}
        }
    }
    Ok(summary)
}

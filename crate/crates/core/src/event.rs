//! Interaction stream: parsing, validation, time normalization and batching.
//!
//! The wire format is header-less CSV, one `u,v,t` record per line. Lines
//! starting with `#` are comments. Node ids are kept verbatim; see
//! [`compact_ids`] for an optional dense relabelling.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = u64;

#[derive(Debug, Error, PartialEq)]
pub enum StreamError {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: timestamp {t} precedes previous timestamp {prev}")]
    NonMonotonicTimestamp { line: usize, prev: f64, t: f64 },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: NodeId },
    #[error("time origin {origin} is larger than the first timestamp {first}")]
    OriginTooLarge { origin: f64, first: f64 },
    #[error("invalid event ({u}, {v}, {t})")]
    InvalidEvent { u: NodeId, v: NodeId, t: f64 },
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<io::Error> for StreamError {
    fn from(e: io::Error) -> Self {
        StreamError::Io(e.to_string())
    }
}

/// One undirected timestamped link.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub u: NodeId,
    pub v: NodeId,
    pub t: f64,
}

impl InteractionEvent {
    /// Validating constructor: rejects self-loops and negative or non-finite times.
    pub fn new(u: NodeId, v: NodeId, t: f64) -> Result<Self, StreamError> {
        if u == v || !t.is_finite() || t < 0.0 {
            return Err(StreamError::InvalidEvent { u, v, t });
        }
        // fold -0.0 into +0.0 so bitwise batching never splits a stamp
        Ok(Self { u, v, t: t + 0.0 })
    }

    /// Endpoints ordered as `(min, max)`.
    #[inline]
    pub fn canonical(&self) -> (NodeId, NodeId) {
        if self.u <= self.v {
            (self.u, self.v)
        } else {
            (self.v, self.u)
        }
    }

    /// The endpoint opposite `node`, if `node` is an endpoint.
    #[inline]
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        if node == self.u {
            Some(self.v)
        } else if node == self.v {
            Some(self.u)
        } else {
            None
        }
    }
}

/// Events sharing one timestamp.
#[derive(Clone, Debug, PartialEq)]
pub struct EventBatch {
    t: f64,
    events: Vec<InteractionEvent>,
}

impl EventBatch {
    /// Returns `None` when `events` is empty or timestamps disagree.
    pub fn new(events: Vec<InteractionEvent>) -> Option<Self> {
        let t = events.first()?.t;
        events.iter().all(|e| e.t.to_bits() == t.to_bits()).then_some(Self { t, events })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn events(&self) -> &[InteractionEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<InteractionEvent> {
        self.events
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub n_hint: Option<usize>,
    pub t_origin: f64,
}

impl StreamHeader {
    /// Header for `events` with the default origin (first timestamp).
    pub fn for_events(events: &[InteractionEvent]) -> Self {
        let n_hint = events.iter().map(|e| e.u.max(e.v) as usize + 1).max();
        Self { n_hint, t_origin: events.first().map_or(0.0, |e| e.t) }
    }
}

fn parse_record(line_no: usize, line: &str) -> Result<InteractionEvent, StreamError> {
    let malformed = |reason: String| StreamError::MalformedRecord { line: line_no, reason };
    let mut fields = line.split(',');
    let (Some(u), Some(v), Some(t), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
        return Err(malformed("expected exactly three fields `u,v,t`".into()));
    };
    let u: NodeId = u.trim().parse().map_err(|e| malformed(format!("node id {u:?}: {e}")))?;
    let v: NodeId = v.trim().parse().map_err(|e| malformed(format!("node id {v:?}: {e}")))?;
    let t: f64 = t.trim().parse().map_err(|e| malformed(format!("timestamp {t:?}: {e}")))?;
    if !t.is_finite() || t < 0.0 {
        return Err(malformed(format!("timestamp {t} must be finite and non-negative")));
    }
    if u == v {
        return Err(StreamError::SelfLoop { line: line_no, node: u });
    }
    Ok(InteractionEvent { u, v, t: t + 0.0 })
}

/// Parses the CSV wire format, enforcing non-decreasing timestamps.
pub fn parse_stream<R: BufRead>(source: R) -> Result<Vec<InteractionEvent>, StreamError> {
    let mut events = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim_end_matches('\r').trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let event = parse_record(line_no, trimmed)?;
        if event.t < prev {
            return Err(StreamError::NonMonotonicTimestamp { line: line_no, prev, t: event.t });
        }
        prev = event.t;
        events.push(event);
    }
    Ok(events)
}

pub fn parse_str(source: &str) -> Result<Vec<InteractionEvent>, StreamError> {
    parse_stream(source.as_bytes())
}

/// Writes events back in the wire format. `f64` display is shortest
/// round-trip, so re-parsing reproduces the exact timestamps.
pub fn write_stream<W: Write>(events: &[InteractionEvent], mut out: W) -> io::Result<()> {
    for e in events {
        writeln!(out, "{},{},{}", e.u, e.v, e.t)?;
    }
    Ok(())
}

/// Groups consecutive runs of bitwise-equal timestamps.
pub fn batch_by_timestamp(events: &[InteractionEvent]) -> Vec<EventBatch> {
    events
        .chunk_by(|a, b| a.t.to_bits() == b.t.to_bits())
        .map(|run| EventBatch { t: run[0].t, events: run.to_vec() })
        .collect()
}

/// Shifts every timestamp by `-t_origin`.
pub fn normalize_times(events: &[InteractionEvent], t_origin: f64) -> Result<Vec<InteractionEvent>, StreamError> {
    if let Some(first) = events.iter().map(|e| e.t).reduce(f64::min) {
        if t_origin > first {
            return Err(StreamError::OriginTooLarge { origin: t_origin, first });
        }
    }
    Ok(events.iter().map(|e| InteractionEvent { t: (e.t - t_origin) + 0.0, ..*e }).collect())
}

/// Relabels node ids densely in order of first appearance.
///
/// Returns the relabelled events and the original id of each dense index.
pub fn compact_ids(events: &[InteractionEvent]) -> (Vec<InteractionEvent>, Vec<NodeId>) {
    let mut index: HashMap<NodeId, NodeId> = HashMap::new();
    let mut original = Vec::new();
    let mut map = |id: NodeId| {
        *index.entry(id).or_insert_with(|| {
            original.push(id);
            original.len() as NodeId - 1
        })
    };
    let relabelled = events.iter().map(|e| InteractionEvent { u: map(e.u), v: map(e.v), t: e.t }).collect();
    (relabelled, original)
}

/// One past the largest node id, i.e. the dense node count.
pub fn node_count(events: &[InteractionEvent]) -> usize {
    events.iter().map(|e| e.u.max(e.v) as usize + 1).max().unwrap_or(0)
}

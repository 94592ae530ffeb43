//! Message traces and the privacy audit over them.
//!
//! The only matrices allowed across the boundary are pseudo-label matrices:
//! `Z_k` going up in `ZkUpload`, the consensus `Z` coming down in
//! `ZBroadcast`/`Converged`. Both are `N x N_c`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::message::{self, MessageKind, RoundMessage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Participant to coordinator.
    Up,
    /// Coordinator to participant.
    Down,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub direction: Direction,
    /// Frame size on the wire, length prefix included.
    pub bytes: usize,
    pub message: RoundMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub num_samples: usize,
    pub num_classes: usize,
    pub num_participants: usize,
}

/// Every message seen by the coordinator, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageTrace {
    pub header: TraceHeader,
    pub entries: Vec<TraceEntry>,
}

impl MessageTrace {
    pub fn new(header: TraceHeader) -> Self {
        MessageTrace {
            header,
            entries: Vec::new(),
        }
    }

    pub fn record(&mut self, direction: Direction, bytes: usize, message: &RoundMessage) {
        self.entries.push(TraceEntry {
            direction,
            bytes,
            message: message.clone(),
        });
    }

    /// JSON lines: the header, then one entry per line. Floats use the same
    /// 17-digit encoding as the wire.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, &self.header)?;
        writeln!(out)?;
        for e in &self.entries {
            let body = String::from_utf8(message::encode_json(&e.message)?)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let dir = serde_json::to_string(&e.direction)?;
            writeln!(
                out,
                "{{\"direction\":{dir},\"bytes\":{},\"message\":{body}}}",
                e.bytes
            )?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("{} is empty", path.display())))??;
        let header: TraceHeader = serde_json::from_str(&header_line)?;
        let mut trace = MessageTrace::new(header);
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            trace.entries.push(serde_json::from_str(&line)?);
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Position in the trace.
    pub index: usize,
    pub round: u64,
    pub participant_id: u64,
    pub kind: MessageKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub messages: usize,
    pub payload_messages: usize,
    pub total_bytes: usize,
    pub bytes_per_round: BTreeMap<u64, usize>,
    pub violations: Vec<Violation>,
}

impl PrivacyReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that only `N x N_c` pseudo-label matrices cross the boundary, in
/// the direction their message kind implies, and tallies bytes per round.
pub fn audit_trace(trace: &MessageTrace) -> PrivacyReport {
    let expected = (trace.header.num_samples, trace.header.num_classes);
    let mut report = PrivacyReport {
        messages: trace.entries.len(),
        payload_messages: 0,
        total_bytes: 0,
        bytes_per_round: BTreeMap::new(),
        violations: Vec::new(),
    };
    for (index, entry) in trace.entries.iter().enumerate() {
        let msg = &entry.message;
        report.total_bytes += entry.bytes;
        *report.bytes_per_round.entry(msg.round).or_default() += entry.bytes;
        let mut flag = |reason: String| {
            report.violations.push(Violation {
                index,
                round: msg.round,
                participant_id: msg.participant_id,
                kind: msg.kind,
                reason,
            })
        };
        let (carries_matrix, direction) = match msg.kind {
            MessageKind::ZkUpload => (true, Direction::Up),
            MessageKind::ZBroadcast | MessageKind::Converged => (true, Direction::Down),
            MessageKind::Register => (false, Direction::Up),
            MessageKind::Abort => (false, entry.direction),
        };
        if entry.direction != direction {
            flag(format!("{} sent in the wrong direction", msg.kind.as_str()));
        }
        match (&msg.payload, carries_matrix) {
            (Some(p), true) => {
                if p.shape() != expected {
                    flag(format!(
                        "payload is {}x{}, only {}x{} pseudo-label matrices may cross",
                        p.nrows(),
                        p.ncols(),
                        expected.0,
                        expected.1
                    ));
                }
            }
            (Some(p), false) => flag(format!(
                "{} must not carry a payload, found {}x{}",
                msg.kind.as_str(),
                p.nrows(),
                p.ncols()
            )),
            (None, true) if msg.kind == MessageKind::ZkUpload => {
                flag("upload without a pseudo-label matrix".into())
            }
            _ => {}
        }
        if msg.payload.is_some() {
            report.payload_messages += 1;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Matrix;

    fn header() -> TraceHeader {
        TraceHeader {
            num_samples: 4,
            num_classes: 2,
            num_participants: 2,
        }
    }

    fn entry(direction: Direction, message: RoundMessage) -> TraceEntry {
        let bytes = message::encode_frame(&message).unwrap().len();
        TraceEntry {
            direction,
            bytes,
            message,
        }
    }

    fn clean_trace() -> MessageTrace {
        let z = Matrix::from_element(4, 2, 0.25);
        let mut t = MessageTrace::new(header());
        for id in 0..2 {
            t.entries
                .push(entry(Direction::Up, RoundMessage::register(id, id == 0)));
        }
        for id in 0..2 {
            t.entries.push(entry(
                Direction::Down,
                RoundMessage::consensus(MessageKind::ZBroadcast, 0, id, z.clone()),
            ));
        }
        for id in 0..2 {
            t.entries.push(entry(
                Direction::Up,
                RoundMessage::upload(1, id, z.clone(), 1.0),
            ));
        }
        for id in 0..2 {
            t.entries.push(entry(
                Direction::Down,
                RoundMessage::consensus(MessageKind::Converged, 1, id, z.clone()),
            ));
        }
        t
    }

    #[test]
    fn clean_trace_has_no_violations() {
        let report = audit_trace(&clean_trace());
        assert!(report.is_clean(), "{:?}", report.violations);
        assert_eq!(report.messages, 8);
        assert_eq!(report.payload_messages, 6);
    }

    #[test]
    fn wrong_shape_payload_is_flagged() {
        let mut t = clean_trace();
        // a d_k x N_c matrix (a W_k) smuggled into an upload
        t.entries[4].message.payload = Some(Matrix::from_element(7, 2, 1.0));
        let report = audit_trace(&t);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].index, 4);
    }

    #[test]
    fn payload_on_register_and_wrong_direction_are_flagged() {
        let mut t = clean_trace();
        t.entries[0].message.payload = Some(Matrix::from_element(4, 2, 1.0));
        t.entries[2].direction = Direction::Up;
        let report = audit_trace(&t);
        assert_eq!(report.violations.len(), 2);
    }

    #[test]
    fn bytes_per_round_sum_frames() {
        let t = clean_trace();
        let report = audit_trace(&t);
        let z = Matrix::from_element(4, 2, 0.25);
        let frame = |m: RoundMessage| message::encode_frame(&m).unwrap().len();
        let round1: usize = (0..2)
            .map(|id| {
                frame(RoundMessage::upload(1, id, z.clone(), 1.0))
                    + frame(RoundMessage::consensus(
                        MessageKind::Converged,
                        1,
                        id,
                        z.clone(),
                    ))
            })
            .sum();
        assert_eq!(report.bytes_per_round[&1], round1);
        assert_eq!(
            report.total_bytes,
            report.bytes_per_round.values().sum::<usize>()
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("messages.jsonl");
        let t = clean_trace();
        t.write_jsonl(&path).unwrap();
        assert_eq!(MessageTrace::read_jsonl(&path).unwrap(), t);
    }
}

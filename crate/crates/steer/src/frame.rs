//! Wire frames: one JSON object per frame, tagged by `"type"`.
//!
//! ```text
//! {"type":"snapshot","iteration":12,"circles":[0,0.1,0.2,1,0.5,0.5],...}
//! {"type":"command","cmd":"drag_move","id":7,"x":0.3,"y":0.4}
//! {"type":"error","message":"..."}
//! ```

use serde::de::Error as _;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use twa_packing::{OverlapReport, SteerCommand};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: u64,
    /// `(id, x, y)`, sent as a flat array.
    #[serde(with = "flat_circles")]
    pub circles: Vec<(usize, f64, f64)>,
    pub radius: f64,
    pub density: f64,
    pub max_overlap: OverlapReport,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Command {
    DragStart { id: usize },
    DragMove { id: usize, x: f64, y: f64 },
    DragEnd { id: usize },
    Vacancy { x: f64, y: f64 },
    Pause,
    Resume,
    SetParam { key: String, value: f64 },
}

impl Command {
    /// The solver-side command, or `None` for run control.
    pub fn to_steer(&self) -> Option<SteerCommand> {
        Some(match self {
            Command::DragStart { id } => SteerCommand::DragStart(*id),
            Command::DragMove { id, x, y } => SteerCommand::DragMove { id: *id, x: *x, y: *y },
            Command::DragEnd { id } => SteerCommand::DragEnd(*id),
            Command::Vacancy { x, y } => SteerCommand::Vacancy { x: *x, y: *y },
            Command::SetParam { key, value } => SteerCommand::SetParam {
                key: key.clone(),
                value: *value,
            },
            Command::Pause | Command::Resume => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Frame {
    Snapshot(Snapshot),
    Command(Command),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("bad frame at byte {offset}: {reason}")]
pub struct DecodeError {
    /// Byte offset of a syntax error; 0 when the JSON is well formed but has
    /// the wrong shape.
    pub offset: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("cannot encode frame: {0}")]
pub struct EncodeError(String);

pub fn encode(frame: &Frame) -> Result<String, EncodeError> {
    serde_json::to_string(frame).map_err(|e| EncodeError(e.to_string()))
}

pub fn decode(text: &str) -> Result<Frame, DecodeError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| DecodeError {
        offset: byte_offset(text, e.line(), e.column()),
        reason: e.to_string(),
    })?;
    serde_json::from_value(value).map_err(|e| DecodeError {
        offset: 0,
        reason: e.to_string(),
    })
}

/// Converts serde_json's 1-based line and column into a byte offset.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

mod flat_circles {
    use super::*;

    pub fn serialize<S: Serializer>(circles: &[(usize, f64, f64)], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(circles.len() * 3))?;
        for &(id, x, y) in circles {
            seq.serialize_element(&id)?;
            seq.serialize_element(&x)?;
            seq.serialize_element(&y)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<(usize, f64, f64)>, D::Error> {
        let flat = Vec::<serde_json::Number>::deserialize(d)?;
        if flat.len() % 3 != 0 {
            return Err(D::Error::custom("circle list length is not a multiple of 3"));
        }
        flat.chunks(3)
            .map(|c| {
                let id = c[0]
                    .as_u64()
                    .ok_or_else(|| D::Error::custom("circle id must be a non-negative integer"))?;
                let coord =
                    |n: &serde_json::Number| n.as_f64().ok_or_else(|| D::Error::custom("coordinate is not a number"));
                Ok((id as usize, coord(&c[1])?, coord(&c[2])?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pause_encoding() {
        let text = encode(&Frame::Command(Command::Pause)).unwrap();
        assert_eq!(text, r#"{"type":"command","cmd":"pause"}"#);
        assert_eq!(decode(&text).unwrap(), Frame::Command(Command::Pause));
    }

    #[test]
    fn drag_move_encoding() {
        let f = Frame::Command(Command::DragMove { id: 7, x: 0.3, y: 0.4 });
        assert_eq!(
            encode(&f).unwrap(),
            r#"{"type":"command","cmd":"drag_move","id":7,"x":0.3,"y":0.4}"#
        );
    }

    #[test]
    fn snapshot_circles_are_flat() {
        let s = Snapshot {
            iteration: 3,
            circles: vec![(0, 0.25, 0.5), (1, 0.75, 1.0)],
            radius: 0.1,
            density: 0.06,
            max_overlap: OverlapReport::default(),
            converged: false,
        };
        let text = encode(&Frame::Snapshot(s.clone())).unwrap();
        assert!(text.contains(r#""circles":[0,0.25,0.5,1,0.75,1.0]"#), "{text}");
        assert_eq!(decode(&text).unwrap(), Frame::Snapshot(s));
    }

    #[test]
    fn truncated_frame_reports_where() {
        let text = r#"{"type":"command","cmd":"pau"#;
        let err = decode(text).unwrap_err();
        // the last byte read before input ran out
        assert_eq!(err.offset, text.len() - 1);
    }

    #[test]
    fn wrong_shapes_are_rejected() {
        assert!(decode(r#"{"type":"command","cmd":"jump"}"#).is_err());
        assert!(decode(r#"{"type":"telemetry"}"#).is_err());
        let bad_circles = r#"{"type":"snapshot","iteration":1,"circles":[0,0.5],"radius":0.1,"density":0.1,"max_overlap":{"circle":null,"depth":0.0},"converged":true}"#;
        assert!(decode(bad_circles).is_err());
    }
}

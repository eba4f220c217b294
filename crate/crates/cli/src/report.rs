use std::io::{self, Write};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    JsonLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    pub fn is_on(self) -> bool {
        self == Switch::On
    }
}

/// Serializes `body` as one JSON object line with `"type"` first.
pub fn json_line(out: &mut impl Write, kind: &str, body: &impl Serialize) -> io::Result<()> {
    let mut map = Map::new();
    map.insert("type".into(), Value::String(kind.into()));
    match serde_json::to_value(body).map_err(io::Error::other)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    writeln!(out, "{}", Value::Object(map))
}

/// Wall-clock figures. Reports keep them under a `timings` key so that
/// runs can be compared with timing masked out.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timing {
    pub solve_seconds: f64,
    pub ms_per_iter: f64,
}

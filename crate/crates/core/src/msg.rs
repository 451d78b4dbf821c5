// Copyright 2026 The mrctl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Built-in message types and the schema registry they validate against.
//!
//! The registry lives in `data/messages.json` and is compiled into the crate.
//! Each type is an ordered list of `(field, kind)` pairs where a kind is a
//! scalar (`f64`, `i64`, `u32`, `i8`, `bool`, `string`), another registered
//! type name, or either of those followed by `[]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::namegraph::GraphName;

const REGISTRY_JSON: &str = include_str!("../data/messages.json");

/// Subscriber-side type wildcard: accepts whatever the publisher sends.
pub const ANY_TYPE: &str = "*";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MsgType {
    Twist,
    Odometry,
    LaserScan,
    Pose2D,
    OccupancyGridMsg,
    TransformStamped,
    GoalMsg,
    String,
}

impl MsgType {
    pub const ALL: [MsgType; 8] = [
        MsgType::Twist,
        MsgType::Odometry,
        MsgType::LaserScan,
        MsgType::Pose2D,
        MsgType::OccupancyGridMsg,
        MsgType::TransformStamped,
        MsgType::GoalMsg,
        MsgType::String,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MsgType::Twist => "Twist",
            MsgType::Odometry => "Odometry",
            MsgType::LaserScan => "LaserScan",
            MsgType::Pose2D => "Pose2D",
            MsgType::OccupancyGridMsg => "OccupancyGridMsg",
            MsgType::TransformStamped => "TransformStamped",
            MsgType::GoalMsg => "GoalMsg",
            MsgType::String => "String",
        }
    }
}

impl fmt::Display for MsgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MsgType {
    type Err = SchemaError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MsgType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownType(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("{path}: {problem}")]
    Invalid { path: String, problem: String },
}

#[derive(Debug, Deserialize)]
struct RegistryFile {
    version: u32,
    types: BTreeMap<String, Vec<(String, String)>>,
}

/// The parsed schema registry.
#[derive(Debug)]
pub struct SchemaRegistry {
    pub version: u32,
    types: BTreeMap<String, Vec<(String, String)>>,
}

impl SchemaRegistry {
    pub fn builtin() -> &'static SchemaRegistry {
        static REG: OnceLock<SchemaRegistry> = OnceLock::new();
        REG.get_or_init(|| {
            let file: RegistryFile =
                serde_json::from_str(REGISTRY_JSON).expect("bundled message registry is valid JSON");
            SchemaRegistry {
                version: file.version,
                types: file.types,
            }
        })
    }

    pub fn fields(&self, msg_type: &str) -> Option<&[(String, String)]> {
        self.types.get(msg_type).map(Vec::as_slice)
    }

    /// Checks `payload` against the named type's fields. Extra fields are
    /// rejected so that typos surface at the publisher.
    pub fn validate(&self, msg_type: &str, payload: &Value) -> Result<(), SchemaError> {
        if !self.types.contains_key(msg_type) {
            return Err(SchemaError::UnknownType(msg_type.to_string()));
        }
        self.check(msg_type, payload, msg_type)
    }

    fn check(&self, kind: &str, v: &Value, path: &str) -> Result<(), SchemaError> {
        let bad = |problem: &str| SchemaError::Invalid {
            path: path.to_string(),
            problem: problem.to_string(),
        };
        if let Some(elem) = kind.strip_suffix("[]") {
            let arr = v.as_array().ok_or_else(|| bad("expected array"))?;
            for (i, item) in arr.iter().enumerate() {
                self.check(elem, item, &format!("{path}[{i}]"))?;
            }
            return Ok(());
        }
        match kind {
            "f64" => v.as_f64().map(|_| ()).ok_or_else(|| bad("expected number")),
            "i64" => v.as_i64().map(|_| ()).ok_or_else(|| bad("expected integer")),
            "u32" => v
                .as_u64()
                .filter(|n| *n <= u32::MAX as u64)
                .map(|_| ())
                .ok_or_else(|| bad("expected u32")),
            "i8" => v
                .as_i64()
                .filter(|n| (-128..=127).contains(n))
                .map(|_| ())
                .ok_or_else(|| bad("expected i8")),
            "bool" => v.as_bool().map(|_| ()).ok_or_else(|| bad("expected bool")),
            "string" => v.as_str().map(|_| ()).ok_or_else(|| bad("expected string")),
            nested => {
                let fields = self
                    .types
                    .get(nested)
                    .ok_or_else(|| SchemaError::UnknownType(nested.to_string()))?;
                let obj = v.as_object().ok_or_else(|| bad("expected object"))?;
                for (name, fkind) in fields {
                    let fv = obj
                        .get(name)
                        .ok_or_else(|| bad(&format!("missing field {name:?}")))?;
                    self.check(fkind, fv, &format!("{path}.{name}"))?;
                }
                if let Some(extra) = obj.keys().find(|k| !fields.iter().any(|(n, _)| n == *k)) {
                    return Err(bad(&format!("unexpected field {extra:?}")));
                }
                Ok(())
            }
        }
    }
}

/// One message on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEnvelope {
    pub topic: GraphName,
    pub msg_type: String,
    /// Nanoseconds since the Unix epoch, stamped by the publisher.
    pub stamp: i64,
    /// Per-publisher sequence number, strictly increasing.
    pub seq: u64,
    pub payload: Value,
}

impl MessageEnvelope {
    pub fn decode<T: DeserializeOwned>(&self) -> Result<T, serde_json::Error> {
        T::deserialize(&self.payload)
    }
}

/// Typed view of a built-in message.
pub trait Message: Serialize + DeserializeOwned + Send + 'static {
    const TYPE: MsgType;

    fn to_payload(&self) -> Value {
        serde_json::to_value(self).expect("message types serialize infallibly")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    pub linear_x: f64,
    pub angular_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Odometry {
    pub frame_id: String,
    pub child_frame_id: String,
    pub pose: Pose2D,
    pub twist: Twist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub frame_id: String,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
}

/// Grid cells use 0 = free, 100 = occupied, -1 = unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGridMsg {
    pub frame_id: String,
    pub width: u32,
    pub height: u32,
    pub resolution: f64,
    pub origin: Pose2D,
    pub data: Vec<i8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformStamped {
    pub parent_frame: String,
    pub child_frame: String,
    pub stamp: i64,
    pub transform: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalMsg {
    pub id: String,
    pub target: Pose2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringMsg {
    pub data: String,
}

macro_rules! impl_message {
    ($($ty:ty => $variant:ident),* $(,)?) => {
        $(impl Message for $ty { const TYPE: MsgType = MsgType::$variant; })*
    };
}

impl_message! {
    Pose2D => Pose2D,
    Twist => Twist,
    Odometry => Odometry,
    LaserScan => LaserScan,
    OccupancyGridMsg => OccupancyGridMsg,
    TransformStamped => TransformStamped,
    GoalMsg => GoalMsg,
    StringMsg => String,
}

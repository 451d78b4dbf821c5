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

//! Coordinate-frame forest.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Pose2;
use crate::msg::TransformStamped;
use crate::namegraph::apply_tf_prefix;

pub const MAP_FRAME: &str = "map";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TfError {
    #[error("no transform path between {from} and {to}")]
    NoPath { from: String, to: String },
    #[error("setting {parent} as parent of {child} would form a cycle")]
    Cycle { child: String, parent: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfEdge {
    pub parent: String,
    /// Pose of the child in the parent frame.
    pub transform: Pose2,
    pub stamp: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfTree {
    pub edges: BTreeMap<String, TfEdge>,
}

impl TfTree {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets or replaces the parent edge of `child`.
    pub fn set(&mut self, child: &str, parent: &str, transform: Pose2, stamp: i64) -> Result<(), TfError> {
        if child == parent || self.ancestors(parent).iter().any(|a| a == child) {
            return Err(TfError::Cycle {
                child: child.into(),
                parent: parent.into(),
            });
        }
        self.edges.insert(
            child.to_string(),
            TfEdge {
                parent: parent.to_string(),
                transform,
                stamp,
            },
        );
        Ok(())
    }

    pub fn apply(&mut self, msg: &TransformStamped) -> Result<(), TfError> {
        self.set(&msg.child_frame, &msg.parent_frame, msg.transform.into(), msg.stamp)
    }

    pub fn parent(&self, frame: &str) -> Option<&str> {
        self.edges.get(frame).map(|e| e.parent.as_str())
    }

    pub fn frames(&self) -> BTreeSet<&str> {
        self.edges
            .iter()
            .flat_map(|(c, e)| [c.as_str(), e.parent.as_str()])
            .collect()
    }

    /// Frames without a parent, sorted.
    pub fn roots(&self) -> Vec<&str> {
        self.frames().into_iter().filter(|f| !self.edges.contains_key(*f)).collect()
    }

    pub fn children(&self, frame: &str) -> Vec<&str> {
        self.edges
            .iter()
            .filter(|(_, e)| e.parent == frame)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    /// `frame` followed by each ancestor up to its root.
    fn ancestors(&self, frame: &str) -> Vec<String> {
        let mut out = vec![frame.to_string()];
        let mut cur = frame;
        while let Some(e) = self.edges.get(cur) {
            cur = &e.parent;
            out.push(cur.to_string());
            if out.len() > self.edges.len() + 1 {
                break;
            }
        }
        out
    }

    /// Pose of `frame` in its root frame, and that root.
    fn to_root(&self, frame: &str) -> (Pose2, String) {
        let mut t = Pose2::IDENTITY;
        let mut cur = frame.to_string();
        while let Some(e) = self.edges.get(&cur) {
            t = e.transform.compose(&t);
            cur = e.parent.clone();
        }
        (t, cur)
    }

    /// The pose of `to` expressed in `from`.
    pub fn lookup_transform(&self, from: &str, to: &str) -> Result<Pose2, TfError> {
        if from == to {
            return Ok(Pose2::IDENTITY);
        }
        let known = self.frames();
        let (ta, ra) = self.to_root(from);
        let (tb, rb) = self.to_root(to);
        if ra != rb || !known.contains(from) || !known.contains(to) {
            return Err(TfError::NoPath {
                from: from.into(),
                to: to.into(),
            });
        }
        Ok(ta.inverse().compose(&tb))
    }

    pub fn to_messages(&self) -> Vec<TransformStamped> {
        self.edges
            .iter()
            .map(|(c, e)| TransformStamped {
                parent_frame: e.parent.clone(),
                child_frame: c.clone(),
                stamp: e.stamp,
                transform: e.transform.into(),
            })
            .collect()
    }
}

pub fn lookup_transform(tf: &TfTree, from: &str, to: &str) -> Result<Pose2, TfError> {
    tf.lookup_transform(from, to)
}

/// Sets `map → {robot}/odom` so that the chain through odom places the
/// robot base at `pose_est`: `T_map_odom = T_map_base ∘ T_odom_base⁻¹`.
pub fn publish_localization(
    tf: &TfTree,
    robot: &str,
    pose_est: &Pose2,
    pose_odom: &Pose2,
    stamp: i64,
) -> Result<TfTree, TfError> {
    let mut out = tf.clone();
    let t = pose_est.compose(&pose_odom.inverse());
    out.set(&apply_tf_prefix("odom", robot), MAP_FRAME, t, stamp)?;
    Ok(out)
}

/// The per-robot frames below `odom`.
pub fn robot_frames(robot: &str) -> (String, String, String) {
    (
        apply_tf_prefix("odom", robot),
        apply_tf_prefix("base_footprint", robot),
        apply_tf_prefix("base_scan", robot),
    )
}

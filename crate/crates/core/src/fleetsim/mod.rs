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

//! Simulated differential-drive fleet: kinematics, LiDAR, TF, Monte Carlo
//! localization, A* planning and goal following, and the nodes that put
//! each robot on the graph under its own namespace.

mod fleet;
pub mod kinematics;
pub mod map_server;
pub mod mcl;
pub mod move_base;
pub mod planner;
pub mod scenarios;
pub mod tf;

use thiserror::Error;

use crate::node::NodeError;

pub use fleet::{
    spawn_fleet, Fleet, FleetConfig, FleetOptions, RobotConfig, RobotSim, RobotSnapshot, TickOutput, DEFAULT_INFLATION,
    DEFAULT_TICK_MS, ROBOT_NODE,
};
pub use kinematics::{integrate, simulate_scan, step_diff_drive, Noise, RobotState, ScanSpec};
pub use map_server::{fetch_static_map, start_map_server, MapServer};
pub use mcl::{estimate, low_variance_resample, mcl_update, LikelihoodField, Mcl, MclConfig, MclUpdate, Particle};
pub use move_base::{move_base_step, move_base_tick, robot_pose, Goal, GoalState, MoveBaseConfig, MoveBaseOutput};
pub use planner::{path_cost, path_is_valid, plan_path, plan_path_with, CellIx, Connectivity, PlanError};
pub use tf::{lookup_transform, publish_localization, robot_frames, TfEdge, TfError, TfTree, MAP_FRAME};

#[derive(Debug, Error)]
pub enum FleetError {
    #[error("duplicate node name {0}")]
    DuplicateNodeName(String),
    #[error("bad fleet config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("cannot start robot thread: {0}")]
    Io(#[from] std::io::Error),
}

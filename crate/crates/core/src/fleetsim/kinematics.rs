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

//! Differential-drive motion and the simulated LiDAR.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Pose2};
use crate::msg::{LaserScan, Twist};
use crate::namegraph::apply_tf_prefix;
use crate::worldmap::{raycast, OccupancyGrid};

/// Below this turn rate the straight-line update is used.
const ARC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub name: String,
    /// Ground truth in the map frame.
    pub pose_true: Pose2,
    /// Dead-reckoned pose in the robot's odom frame.
    pub pose_odom: Pose2,
    pub v: f64,
    pub w: f64,
}

impl RobotState {
    /// A robot at rest whose odom frame coincides with its spawn pose.
    pub fn spawn(name: impl Into<String>, pose: Pose2) -> Self {
        RobotState {
            name: name.into(),
            pose_true: pose,
            pose_odom: Pose2::IDENTITY,
            v: 0.0,
            w: 0.0,
        }
    }
}

/// Actuation noise standard deviations, per unit of commanded speed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Noise {
    #[serde(default)]
    pub sigma_v: f64,
    #[serde(default)]
    pub sigma_w: f64,
}

/// Integrates a unicycle for `dt` seconds along the exact arc.
pub fn integrate(pose: &Pose2, v: f64, w: f64, dt: f64) -> Pose2 {
    let th = pose.theta;
    if w.abs() > ARC_EPS {
        let th2 = th + w * dt;
        Pose2::new(
            pose.x + v / w * (th2.sin() - th.sin()),
            pose.y - v / w * (th2.cos() - th.cos()),
            th2,
        )
    } else {
        Pose2::new(pose.x + v * th.cos() * dt, pose.y + v * th.sin() * dt, th)
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    }
}

/// Advances one step. The true pose follows the command perturbed by
/// actuation noise; odometry integrates the command as issued, so the two
/// drift apart only through that noise.
pub fn step_diff_drive<R: Rng + ?Sized>(
    state: &RobotState,
    cmd: &Twist,
    dt: f64,
    noise: &Noise,
    rng: &mut R,
) -> RobotState {
    let v = cmd.linear_x + gaussian(rng, noise.sigma_v * cmd.linear_x.abs());
    let w = cmd.angular_z + gaussian(rng, noise.sigma_w * cmd.angular_z.abs());
    RobotState {
        name: state.name.clone(),
        pose_true: integrate(&state.pose_true, v, w, dt),
        pose_odom: integrate(&state.pose_odom, cmd.linear_x, cmd.angular_z, dt),
        v,
        w,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanSpec {
    pub n_beams: usize,
    pub max_range: f64,
    pub sigma_range: f64,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            n_beams: 360,
            max_range: 3.5,
            sigma_range: 0.01,
        }
    }
}

/// Beam `i` points at `2πi/n` from the robot heading. Ranges are clipped to
/// `[0, max_range]`.
pub fn simulate_scan<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    pose_true: &Pose2,
    spec: &ScanSpec,
    tf_prefix: &str,
    rng: &mut R,
) -> LaserScan {
    let n = spec.n_beams.max(1);
    let inc = 2.0 * PI / n as f64;
    let ranges = (0..n)
        .map(|i| {
            let heading = normalize_angle(pose_true.theta + inc * i as f64);
            let beam = Pose2 {
                x: pose_true.x,
                y: pose_true.y,
                theta: heading,
            };
            let r = raycast(grid, &beam, spec.max_range);
            (r + gaussian(rng, spec.sigma_range)).clamp(0.0, spec.max_range)
        })
        .collect();
    LaserScan {
        frame_id: apply_tf_prefix("base_scan", tf_prefix),
        angle_min: 0.0,
        angle_increment: inc,
        range_max: spec.max_range,
        ranges,
    }
}

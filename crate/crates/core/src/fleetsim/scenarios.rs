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

//! Reproducible test worlds and a scripted localization trial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kinematics::{simulate_scan, step_diff_drive, Noise, RobotState, ScanSpec};
use super::mcl::{Mcl, MclConfig};
use crate::geom::{angle_diff, Pose2};
use crate::msg::Twist;
use crate::worldmap::{raycast, Cell, MapMeta, OccupancyGrid};

/// A walled 10 m square at 5 cm cells with a stub wall, a box and scattered
/// pillars, laid out so no symmetry survives.
pub fn synthetic_room() -> OccupancyGrid {
    let n = 200i64;
    let mut edits: Vec<(i64, i64, Cell)> = (0..n)
        .flat_map(|i| [(i, 0), (i, n - 1), (0, i), (n - 1, i)])
        .map(|(x, y)| (x, y, Cell::Occupied))
        .collect();
    let blocks = [
        (120, 30, 124, 90),
        (140, 140, 170, 150),
        (40, 50, 50, 60),
        (30, 150, 36, 156),
        (80, 110, 86, 116),
        (165, 60, 171, 66),
        (60, 20, 66, 26),
        (100, 175, 106, 181),
    ];
    for (x0, y0, x1, y1) in blocks {
        for x in x0..x1 {
            for y in y0..y1 {
                edits.push((x, y, Cell::Occupied));
            }
        }
    }
    OccupancyGrid::new(n as usize, n as usize, Cell::Free, MapMeta::new(0.05, [0.0, 0.0, 0.0]))
        .edit_cells(&edits)
        .expect("room edits are in range")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub mcl: MclConfig,
    pub scan: ScanSpec,
    pub noise: Noise,
    pub updates: usize,
    /// Ticks of 20 ms between filter updates.
    pub ticks_per_update: usize,
    /// Start from particles spread over all free space instead of around a
    /// rough initial guess.
    pub global: bool,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            mcl: MclConfig::default(),
            scan: ScanSpec {
                n_beams: 360,
                max_range: 3.5,
                sigma_range: 0.02,
            },
            noise: Noise {
                sigma_v: 0.05,
                sigma_w: 0.05,
            },
            updates: 30,
            ticks_per_update: 25,
            global: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub truth: Pose2,
    pub estimate: Pose2,
    pub position_error: f64,
    pub heading_error: f64,
    /// Position error after each update.
    pub trace: Vec<f64>,
}

/// Drives a robot around `grid` (forward, turning away from anything
/// closer than 0.6 m) while a filter tracks it. The initial guess is off by
/// (0.3, −0.3, 0.2) and the particles are spread (0.5 m, 0.5 m, 0.3 rad)
/// around it.
pub fn mcl_trial(grid: &OccupancyGrid, seed: u64, cfg: &TrialConfig) -> TrialResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Pose2::new(rng.gen_range(4.0..6.0), rng.gen_range(4.0..6.5), rng.gen_range(-3.1..3.1));
    let mut mcl = if cfg.global {
        Mcl::global(grid, cfg.mcl, &mut rng)
    } else {
        let guess = Pose2::new(start.x + 0.3, start.y - 0.3, start.theta + 0.2);
        Mcl::around(grid, guess, (0.5, 0.5, 0.3), cfg.mcl, &mut rng)
    };
    let turn = if seed % 2 == 0 { 0.8 } else { -0.8 };
    let mut robot = RobotState::spawn("tb3_0", start);
    let mut last_odom = robot.pose_odom;
    let mut trace = Vec::with_capacity(cfg.updates);
    for _ in 0..cfg.updates {
        for _ in 0..cfg.ticks_per_update {
            let cmd = if raycast(grid, &robot.pose_true, 1.0) < 0.6 {
                Twist {
                    linear_x: 0.0,
                    angular_z: turn,
                }
            } else {
                Twist {
                    linear_x: 0.2,
                    angular_z: 0.1 * turn,
                }
            };
            robot = step_diff_drive(&robot, &cmd, 0.02, &cfg.noise, &mut rng);
        }
        let scan = simulate_scan(grid, &robot.pose_true, &cfg.scan, "tb3_0", &mut rng);
        let delta = last_odom.between(&robot.pose_odom);
        last_odom = robot.pose_odom;
        mcl.update(&delta, &scan, &mut rng);
        trace.push(mcl.pose_est.distance(&robot.pose_true));
    }
    let est = mcl.pose_est;
    TrialResult {
        truth: robot.pose_true,
        estimate: est,
        position_error: est.distance(&robot.pose_true),
        heading_error: angle_diff(est.theta, robot.pose_true.theta).abs(),
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn room_shape() {
        let g = synthetic_room();
        assert_eq!((g.width, g.height), (200, 200));
        assert_eq!(g.get(0, 0), Some(Cell::Occupied));
        assert_eq!(g.get(100, 100), Some(Cell::Free));
        assert_eq!(g.count(Cell::Unknown), 0);
    }

    #[test]
    fn trials_are_reproducible() {
        let g = synthetic_room();
        let cfg = TrialConfig {
            updates: 3,
            ..TrialConfig::default()
        };
        assert_eq!(mcl_trial(&g, 4, &cfg), mcl_trial(&g, 4, &cfg));
    }
}

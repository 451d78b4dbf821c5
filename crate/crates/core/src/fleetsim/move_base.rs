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

//! Goal tracking: plan on the inflated map, follow the plan, replan when
//! the map changes under it.

use serde::{Deserialize, Serialize};

use super::planner::{plan_path, CellIx};
use super::tf::{TfTree, MAP_FRAME};
use crate::geom::{angle_diff, Pose2};
use crate::msg::Twist;
use crate::namegraph::apply_tf_prefix;
use crate::worldmap::{Cell, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalState {
    Pending,
    Active,
    Succeeded,
    Aborted,
}

impl GoalState {
    pub fn can_become(self, next: GoalState) -> bool {
        use GoalState::*;
        matches!(
            (self, next),
            (Pending, Active) | (Pending, Succeeded) | (Pending, Aborted) | (Active, Succeeded) | (Active, Aborted)
        ) || self == next
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, GoalState::Succeeded | GoalState::Aborted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub target: Pose2,
    pub state: GoalState,
    /// Remaining plan, nearest cell first.
    pub path: Vec<CellIx>,
    /// Set once the position is within tolerance; only heading is left.
    pub xy_reached: bool,
    pub replans: usize,
}

impl Goal {
    pub fn new(id: impl Into<String>, target: Pose2) -> Self {
        Goal {
            id: id.into(),
            target,
            state: GoalState::Pending,
            path: Vec::new(),
            xy_reached: false,
            replans: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MoveBaseConfig {
    pub xy_tol: f64,
    pub theta_tol: f64,
    pub max_v: f64,
    pub max_w: f64,
    /// Heading gain.
    pub k_w: f64,
    pub lookahead: f64,
}

impl Default for MoveBaseConfig {
    fn default() -> Self {
        MoveBaseConfig {
            xy_tol: 0.1,
            theta_tol: 0.1,
            max_v: 0.22,
            max_w: 2.84,
            k_w: 2.0,
            lookahead: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveBaseOutput {
    pub cmd: Twist,
    pub goal: Goal,
}

fn stop(goal: Goal) -> MoveBaseOutput {
    MoveBaseOutput {
        cmd: Twist::default(),
        goal,
    }
}

/// Plans from the robot's cell, which may itself sit in the inflation band.
fn plan_from(grid: &OccupancyGrid, pose: &Pose2, target: &Pose2) -> Option<Vec<CellIx>> {
    let geom = grid.geom();
    let start = geom.world_to_cell(pose.x, pose.y);
    let goal = geom.world_to_cell(target.x, target.y);
    let g = match grid.get(start.0, start.1) {
        Some(Cell::Free) | None => std::borrow::Cow::Borrowed(grid),
        Some(_) => std::borrow::Cow::Owned(grid.edit_cells(&[(start.0, start.1, Cell::Free)]).ok()?),
    };
    plan_path(&g, start, goal).ok()
}

/// Robot pose in the map frame.
pub fn robot_pose(tf: &TfTree, robot: &str) -> Option<Pose2> {
    tf.lookup_transform(MAP_FRAME, &apply_tf_prefix("base_footprint", robot)).ok()
}

/// One control step for `robot`, whose pose is read from `tf`. `grid`
/// should already be inflated.
pub fn move_base_tick(goal: &Goal, robot: &str, tf: &TfTree, grid: &OccupancyGrid, cfg: &MoveBaseConfig) -> MoveBaseOutput {
    match robot_pose(tf, robot) {
        Some(p) => move_base_step(goal, &p, grid, cfg),
        None => stop(goal.clone()),
    }
}

/// As [`move_base_tick`] with the pose given directly.
pub fn move_base_step(goal: &Goal, pose: &Pose2, grid: &OccupancyGrid, cfg: &MoveBaseConfig) -> MoveBaseOutput {
    let mut g = goal.clone();
    if g.state.is_terminal() {
        return stop(g);
    }
    let dist = pose.distance(&g.target);
    let heading_err = angle_diff(g.target.theta, pose.theta);
    if g.state == GoalState::Pending {
        if dist <= cfg.xy_tol && heading_err.abs() <= cfg.theta_tol {
            g.state = GoalState::Succeeded;
            return stop(g);
        }
        match plan_from(grid, pose, &g.target) {
            Some(path) => {
                g.path = path;
                g.state = GoalState::Active;
            }
            None => {
                g.state = GoalState::Aborted;
                return stop(g);
            }
        }
    }

    if dist <= cfg.xy_tol {
        g.xy_reached = true;
    }
    if g.xy_reached {
        if heading_err.abs() <= cfg.theta_tol {
            g.state = GoalState::Succeeded;
            g.path.clear();
            return stop(g);
        }
        let w = (cfg.k_w * heading_err).clamp(-cfg.max_w, cfg.max_w);
        return MoveBaseOutput {
            cmd: Twist {
                linear_x: 0.0,
                angular_z: w,
            },
            goal: g,
        };
    }

    let geom = grid.geom();
    let blocked = g.path.iter().any(|c| grid.get(c.0, c.1).is_some_and(|s| s != Cell::Free));
    if blocked || g.path.is_empty() {
        match plan_from(grid, pose, &g.target) {
            Some(path) => {
                g.path = path;
                g.replans += 1;
            }
            None => {
                g.state = GoalState::Aborted;
                g.path.clear();
                return stop(g);
            }
        }
    }

    // Drop waypoints already behind the lookahead circle.
    let near = |c: &CellIx| {
        let (x, y) = geom.cell_center(c.0, c.1);
        pose.distance(&Pose2::new(x, y, 0.0)) < cfg.lookahead
    };
    while g.path.len() > 1 && near(&g.path[0]) {
        g.path.remove(0);
    }
    let (tx, ty) = if g.path.len() <= 1 {
        (g.target.x, g.target.y)
    } else {
        geom.cell_center(g.path[0].0, g.path[0].1)
    };
    let bearing = (ty - pose.y).atan2(tx - pose.x);
    let e = angle_diff(bearing, pose.theta);
    let w = (cfg.k_w * e).clamp(-cfg.max_w, cfg.max_w);
    let v = if e.abs() < std::f64::consts::FRAC_PI_3 {
        (cfg.max_v * e.cos()).min(dist.max(0.05))
    } else {
        0.0
    };
    MoveBaseOutput {
        cmd: Twist {
            linear_x: v.max(0.0),
            angular_z: w,
        },
        goal: g,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleetsim::kinematics::integrate;
    use crate::worldmap::{inflate, MapMeta};

    fn room() -> OccupancyGrid {
        let n = 60i64;
        let edits: Vec<_> = (0..n)
            .flat_map(|i| [(i, 0), (i, n - 1), (0, i), (n - 1, i)])
            .chain((0..40).map(|y| (30, y)))
            .map(|(x, y)| (x, y, Cell::Occupied))
            .collect();
        let g = OccupancyGrid::new(n as usize, n as usize, Cell::Free, MapMeta::new(0.05, [0.0, 0.0, 0.0]));
        inflate(&g.edit_cells(&edits).unwrap(), 0.105)
    }

    fn drive(grid: &OccupancyGrid, start: Pose2, target: Pose2, budget_s: f64) -> (Goal, Vec<Pose2>) {
        let cfg = MoveBaseConfig::default();
        let mut goal = Goal::new("g", target);
        let mut pose = start;
        let mut trace = vec![pose];
        let dt = 0.02;
        let mut t = 0.0;
        while t < budget_s && !goal.state.is_terminal() {
            let before = goal.state;
            let out = move_base_step(&goal, &pose, grid, &cfg);
            assert!(before.can_become(out.goal.state));
            goal = out.goal;
            pose = integrate(&pose, out.cmd.linear_x, out.cmd.angular_z, dt);
            trace.push(pose);
            t += dt;
        }
        (goal, trace)
    }

    #[test]
    fn goal_at_current_pose() {
        let g = room();
        let p = Pose2::new(0.5, 0.5, 0.3);
        let out = move_base_step(&Goal::new("a", p), &p, &g, &MoveBaseConfig::default());
        assert_eq!(out.goal.state, GoalState::Succeeded);
        assert_eq!(out.cmd, Twist::default());
    }

    #[test]
    fn goal_in_obstacle_aborts() {
        let g = room();
        let out = move_base_step(
            &Goal::new("a", Pose2::new(1.52, 1.0, 0.0)),
            &Pose2::new(0.5, 0.5, 0.0),
            &g,
            &MoveBaseConfig::default(),
        );
        assert_eq!(out.goal.state, GoalState::Aborted);
        assert_eq!(out.cmd, Twist::default());
        let again = move_base_step(&out.goal, &Pose2::new(0.5, 0.5, 0.0), &g, &MoveBaseConfig::default());
        assert_eq!(again.goal.state, GoalState::Aborted);
    }

    #[test]
    fn reaches_goal_around_the_wall() {
        let g = room();
        let target = Pose2::new(2.4, 0.5, -1.0);
        let (goal, trace) = drive(&g, Pose2::new(0.5, 0.5, 0.0), target, 120.0);
        assert_eq!(goal.state, GoalState::Succeeded, "{goal:?}");
        let end = trace.last().unwrap();
        assert!(end.distance(&target) <= 0.1 + 1e-9);
        // The executed path never enters an obstacle cell of the raw map.
        let raw = {
            let n = 60i64;
            let edits: Vec<_> = (0..n)
                .flat_map(|i| [(i, 0), (i, n - 1), (0, i), (n - 1, i)])
                .chain((0..40).map(|y| (30, y)))
                .map(|(x, y)| (x, y, Cell::Occupied))
                .collect();
            OccupancyGrid::new(60, 60, Cell::Free, MapMeta::new(0.05, [0.0, 0.0, 0.0]))
                .edit_cells(&edits)
                .unwrap()
        };
        for p in &trace {
            assert_eq!(raw.at_world(p.x, p.y), Some(Cell::Free), "{p:?}");
        }
    }

    #[test]
    fn replans_when_the_path_is_blocked() {
        let g = room();
        let cfg = MoveBaseConfig::default();
        let pose = Pose2::new(0.5, 0.5, 0.0);
        let out = move_base_step(&Goal::new("a", Pose2::new(2.4, 0.5, 0.0)), &pose, &g, &cfg);
        assert_eq!(out.goal.state, GoalState::Active);
        let mid = out.goal.path[out.goal.path.len() / 2];
        let g2 = g.edit_cells(&[(mid.0, mid.1, Cell::Occupied)]).unwrap();
        let out2 = move_base_step(&out.goal, &pose, &g2, &cfg);
        assert_eq!(out2.goal.replans, 1);
        assert!(!out2.goal.path.contains(&mid));
    }

    #[test]
    fn transitions() {
        use GoalState::*;
        assert!(Pending.can_become(Active));
        assert!(Active.can_become(Aborted));
        assert!(!Succeeded.can_become(Active));
        assert!(!Aborted.can_become(Pending));
        assert!(!Active.can_become(Pending));
    }
}

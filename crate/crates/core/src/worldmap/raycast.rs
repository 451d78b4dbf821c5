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

//! Grid traversal along a ray.

use super::{Cell, GridGeom, OccupancyGrid};
use crate::geom::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RayOptions {
    /// Unknown cells stop the ray like occupied ones.
    pub unknown_blocks: bool,
}

impl Default for RayOptions {
    fn default() -> Self {
        RayOptions {
            unknown_blocks: true,
        }
    }
}

/// Walks the cells crossed by a ray from `(x, y)` at world angle `theta`,
/// calling `visit(cx, cy, t)` with the distance `t` in meters at which the
/// ray enters each cell (0 for the start cell). Stops when `visit` returns
/// true, giving that `t`, or once past `max_range` or out of the grid for
/// good.
pub(crate) fn traverse(
    geom: &GridGeom,
    x: f64,
    y: f64,
    theta: f64,
    max_range: f64,
    mut visit: impl FnMut(i64, i64, f64) -> bool,
) -> Option<f64> {
    let (u, v) = geom.to_local(x, y);
    let (dv, du) = (theta - geom.origin[2]).sin_cos();
    let (mut cx, mut cy) = (u.floor() as i64, v.floor() as i64);
    if visit(cx, cy, 0.0) {
        return Some(0.0);
    }
    let axis = |p: f64, c: i64, d: f64| -> (i64, f64, f64) {
        if d > 0.0 {
            (1, (c as f64 + 1.0 - p) / d, 1.0 / d)
        } else if d < 0.0 {
            (-1, (p - c as f64) / -d, -1.0 / d)
        } else {
            (0, f64::INFINITY, f64::INFINITY)
        }
    };
    let (sx, mut tx, dtx) = axis(u, cx, du);
    let (sy, mut ty, dty) = axis(v, cy, dv);
    let (w, h) = (geom.width as i64, geom.height as i64);
    loop {
        let t = if tx < ty {
            cx += sx;
            let t = tx;
            tx += dtx;
            t
        } else {
            cy += sy;
            let t = ty;
            ty += dty;
            t
        };
        let t_m = t * geom.resolution;
        if !(t_m <= max_range) {
            return None;
        }
        let leaving = (cx < 0 && sx <= 0) || (cx >= w && sx >= 0) || (cy < 0 && sy <= 0) || (cy >= h && sy >= 0);
        if leaving {
            return None;
        }
        if visit(cx, cy, t_m) {
            return Some(t_m);
        }
    }
}

/// Distance from `pose` along its heading to the first blocking cell, or
/// `max_range`. Cells outside the grid never block.
pub fn raycast_with(grid: &OccupancyGrid, pose: &Pose2, max_range: f64, opts: &RayOptions) -> f64 {
    let max_range = max_range.max(0.0);
    let geom = grid.geom();
    let hit = traverse(&geom, pose.x, pose.y, pose.theta, max_range, |cx, cy, _| {
        match grid.get(cx, cy) {
            Some(Cell::Occupied) => true,
            Some(Cell::Unknown) => opts.unknown_blocks,
            _ => false,
        }
    });
    hit.map_or(max_range, |t| t.min(max_range))
}

pub fn raycast(grid: &OccupancyGrid, pose: &Pose2, max_range: f64) -> f64 {
    raycast_with(grid, pose, max_range, &RayOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmap::MapMeta;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn room(res: f64) -> OccupancyGrid {
        let n = (10.0 / res) as usize;
        let mut g = OccupancyGrid::new(n, n, Cell::Free, MapMeta::new(res, [0.0, 0.0, 0.0]));
        let edits: Vec<_> = (0..n as i64)
            .flat_map(|i| [(i, 0), (i, n as i64 - 1), (0, i), (n as i64 - 1, i)])
            .map(|(x, y)| (x, y, Cell::Occupied))
            .collect();
        g = g.edit_cells(&edits).unwrap();
        g
    }

    #[test]
    fn empty_interior_hits_max_range() {
        let g = OccupancyGrid::new(200, 200, Cell::Free, MapMeta::new(0.05, [0.0, 0.0, 0.0]));
        for k in 0..16 {
            let theta = k as f64 * PI / 8.0;
            assert_eq!(raycast(&g, &Pose2::new(5.0, 5.0, theta), 3.5), 3.5);
        }
    }

    #[test]
    fn wall_ahead() {
        let res = 0.05;
        let g = OccupancyGrid::new(200, 100, Cell::Free, MapMeta::new(res, [0.0, 0.0, 0.0]));
        // A wall whose near face is at x = 4.0.
        let edits: Vec<_> = (0..100).map(|y| (80, y, Cell::Occupied)).collect();
        let g = g.edit_cells(&edits).unwrap();
        for x0 in [2.0, 2.012, 2.037, 2.049] {
            let r = raycast(&g, &Pose2::new(x0, 2.5, 0.0), 10.0);
            assert!((r - (4.0 - x0)).abs() <= res / 2.0, "{x0}: {r}");
        }
    }

    #[test]
    fn inside_obstacle_is_zero() {
        let g = room(0.1);
        assert_eq!(raycast(&g, &Pose2::new(0.05, 5.0, 1.0), 3.5), 0.0);
    }

    #[test]
    fn unknown_is_configurable() {
        let g = OccupancyGrid::new(100, 10, Cell::Free, MapMeta::new(0.1, [0.0, 0.0, 0.0]));
        let g = g.edit_cells(&[(50, 5, Cell::Unknown)]).unwrap();
        let p = Pose2::new(1.05, 0.55, 0.0);
        assert!((raycast(&g, &p, 9.0) - 3.95).abs() < 1e-9);
        let pass = RayOptions { unknown_blocks: false };
        assert_eq!(raycast_with(&g, &p, 9.0, &pass), 9.0);
    }

    #[test]
    fn origin_yaw_rotates_the_grid() {
        // A grid rotated by 90°: its +x axis points along world +y.
        let g = OccupancyGrid::new(100, 10, Cell::Free, MapMeta::new(0.1, [0.0, 0.0, PI / 2.0]));
        let g = g.edit_cells(&(0..10).map(|j| (60, j, Cell::Occupied)).collect::<Vec<_>>()).unwrap();
        let r = raycast(&g, &Pose2::new(-0.5, 1.0, PI / 2.0), 20.0);
        assert!((r - 5.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn rays_leaving_the_grid() {
        let g = OccupancyGrid::new(10, 10, Cell::Free, MapMeta::new(1.0, [0.0, 0.0, 0.0]));
        assert_eq!(raycast(&g, &Pose2::new(5.0, 5.0, 0.3), 1e6), 1e6);
        assert_eq!(raycast(&g, &Pose2::new(-5.0, 5.0, PI), 7.0), 7.0);
    }

    // Oracle: march in tiny steps and report the first blocking sample.
    fn march(g: &OccupancyGrid, p: &Pose2, max: f64) -> f64 {
        let step = g.meta.resolution / 2000.0;
        let (s, c) = p.theta.sin_cos();
        let mut t = 0.0;
        while t < max {
            if matches!(g.at_world(p.x + c * t, p.y + s * t), Some(Cell::Occupied | Cell::Unknown)) {
                return t;
            }
            t += step;
        }
        max
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn agrees_with_marching(x in 0.2f64..9.8, y in 0.2f64..9.8, theta in -PI..PI,
                                blocks in prop::collection::vec((1i64..19, 1i64..19), 0..12)) {
            let g = room(0.5);
            let g = g.edit_cells(&blocks.iter().map(|&(a, b)| (a, b, Cell::Occupied)).collect::<Vec<_>>()).unwrap();
            let p = Pose2::new(x, y, theta);
            let r = raycast(&g, &p, 4.0);
            prop_assert!((0.0..=4.0).contains(&r));
            let m = march(&g, &p, 4.0);
            prop_assert!((r - m).abs() <= 0.5 * 0.5 / 1000.0 + 1e-9 || (r == 0.0 && m == 0.0), "dda {r} march {m}");
        }

        #[test]
        fn more_obstacles_never_lengthen_rays(x in 1.0f64..9.0, y in 1.0f64..9.0, theta in -PI..PI,
                                              bx in 1i64..19, by in 1i64..19) {
            let g = room(0.5);
            let p = Pose2::new(x, y, theta);
            let before = raycast(&g, &p, 6.0);
            let after = raycast(&g.edit_cells(&[(bx, by, Cell::Occupied)]).unwrap(), &p, 6.0);
            prop_assert!(after <= before);
        }
    }
}

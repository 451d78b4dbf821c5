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

//! Occupancy mapping from scans taken at known poses.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::raycast::traverse;
use super::{Cell, GridGeom, MapMeta, OccupancyGrid};
use crate::geom::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub l_occ: f64,
    pub l_free: f64,
    pub l_max: f64,
    /// Beams at or beyond this range mark no endpoint.
    pub max_range: f64,
}

impl Default for SensorModel {
    fn default() -> Self {
        SensorModel {
            l_occ: 0.85,
            l_free: -0.4,
            l_max: 5.0,
            max_range: 3.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOddsGrid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub l_max: f64,
    pub meta: MapMeta,
}

impl LogOddsGrid {
    pub fn new(width: usize, height: usize, l_max: f64, meta: MapMeta) -> Self {
        LogOddsGrid {
            width,
            height,
            values: vec![0.0; width * height],
            l_max,
            meta,
        }
    }

    pub fn geom(&self) -> GridGeom {
        GridGeom {
            width: self.width,
            height: self.height,
            resolution: self.meta.resolution,
            origin: self.meta.origin,
        }
    }

    pub fn get(&self, cx: i64, cy: i64) -> Option<f64> {
        self.geom().index(cx, cy).map(|i| self.values[i])
    }

    /// Positive beyond `band` is Occupied, negative beyond it Free, the rest
    /// Unknown.
    pub fn to_occupancy(&self, band: f64) -> OccupancyGrid {
        let cells = self
            .values
            .iter()
            .map(|&v| {
                if v > band {
                    Cell::Occupied
                } else if v < -band {
                    Cell::Free
                } else {
                    Cell::Unknown
                }
            })
            .collect();
        OccupancyGrid {
            width: self.width,
            height: self.height,
            cells,
            meta: self.meta.clone(),
        }
    }
}

/// Applies one scan of `(bearing, range)` beams taken at `pose`. Each beam
/// lowers every cell it crosses before its endpoint by `l_free` and, when
/// shorter than `max_range`, raises the endpoint cell by `l_occ`.
pub fn integrate_scan(lgrid: &LogOddsGrid, pose: &Pose2, scan: &[(f64, f64)], model: &SensorModel) -> LogOddsGrid {
    let geom = lgrid.geom();
    let mut out = lgrid.clone();
    let l_max = lgrid.l_max.abs();
    // Pushes a boundary-exact endpoint into the cell the beam actually hit.
    let nudge = geom.resolution * 1e-3;
    let mut add = |cx: i64, cy: i64, dl: f64| {
        if let Some(i) = geom.index(cx, cy) {
            out.values[i] = (out.values[i] + dl).clamp(-l_max, l_max);
        }
    };
    for &(bearing, range) in scan {
        if !range.is_finite() || range < 0.0 {
            continue;
        }
        let theta = pose.theta + bearing;
        let hit = range < model.max_range;
        let reach = range.min(model.max_range);
        let (s, c) = theta.sin_cos();
        let end = geom.world_to_cell(pose.x + c * (reach + nudge), pose.y + s * (reach + nudge));
        let mut crossed = BTreeSet::new();
        traverse(&geom, pose.x, pose.y, theta, reach, |cx, cy, _| {
            if (cx, cy) != end {
                crossed.insert((cx, cy));
            }
            false
        });
        for (cx, cy) in crossed {
            add(cx, cy, model.l_free);
        }
        if hit {
            add(end.0, end.1, model.l_occ);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmap::raycast;
    use std::f64::consts::PI;

    fn room() -> OccupancyGrid {
        let n = 40;
        let meta = MapMeta::new(0.1, [0.0, 0.0, 0.0]);
        let edits: Vec<_> = (0..n)
            .flat_map(|i| [(i, 0), (i, n - 1), (0, i), (n - 1, i)])
            .map(|(x, y)| (x, y, Cell::Occupied))
            .collect();
        OccupancyGrid::new(n as usize, n as usize, Cell::Free, meta).edit_cells(&edits).unwrap()
    }

    fn scan_at(truth: &OccupancyGrid, pose: &Pose2, max: f64) -> Vec<(f64, f64)> {
        (0..360)
            .map(|i| {
                let b = 2.0 * PI * i as f64 / 360.0;
                (b, raycast(truth, &Pose2::new(pose.x, pose.y, pose.theta + b), max))
            })
            .collect()
    }

    #[test]
    fn no_scans_is_all_unknown() {
        let l = LogOddsGrid::new(5, 5, 5.0, MapMeta::new(0.1, [0.0, 0.0, 0.0]));
        let l = integrate_scan(&l, &Pose2::new(0.25, 0.25, 0.0), &[], &SensorModel::default());
        assert!(l.values.iter().all(|v| *v == 0.0));
        assert_eq!(l.to_occupancy(0.0).count(Cell::Unknown), 25);
    }

    #[test]
    fn square_room_is_recovered() {
        let truth = room();
        let model = SensorModel {
            max_range: 10.0,
            ..SensorModel::default()
        };
        let mut l = LogOddsGrid::new(40, 40, model.l_max, truth.meta.clone());
        for p in [Pose2::new(2.0, 2.0, 0.0), Pose2::new(1.0, 3.0, 0.4), Pose2::new(3.1, 0.9, -1.0)] {
            l = integrate_scan(&l, &p, &scan_at(&truth, &p, model.max_range), &model);
        }
        let map = l.to_occupancy(0.0);
        let (mut interior, mut interior_ok, mut wall, mut wall_ok) = (0, 0, 0, 0);
        for (i, c) in truth.cells.iter().enumerate() {
            if *c == Cell::Occupied {
                wall += 1;
                wall_ok += (map.cells[i] == Cell::Occupied) as usize;
            } else {
                interior += 1;
                interior_ok += (map.cells[i] == Cell::Free) as usize;
            }
        }
        assert!(interior_ok as f64 >= 0.95 * interior as f64, "{interior_ok}/{interior}");
        assert!(wall_ok as f64 >= 0.95 * wall as f64, "{wall_ok}/{wall}");
    }

    #[test]
    fn repeated_scans_clamp() {
        let truth = room();
        let model = SensorModel {
            max_range: 10.0,
            ..SensorModel::default()
        };
        let p = Pose2::new(2.0, 2.0, 0.0);
        let scan = scan_at(&truth, &p, model.max_range);
        let mut l = LogOddsGrid::new(40, 40, model.l_max, truth.meta.clone());
        let mut signs = Vec::new();
        for _ in 0..50 {
            l = integrate_scan(&l, &p, &scan, &model);
            assert!(l.values.iter().all(|v| v.abs() <= model.l_max));
            signs.push(l.values.iter().map(|v| v.signum() as i8).collect::<Vec<_>>());
        }
        assert!(l.values.iter().any(|v| *v == model.l_max));
        assert!(l.values.iter().any(|v| *v == -model.l_max));
        assert_eq!(signs[48], signs[49]);
    }

    #[test]
    fn max_range_beams_mark_no_endpoint() {
        let l = LogOddsGrid::new(50, 1, 5.0, MapMeta::new(0.1, [0.0, 0.0, 0.0]));
        let model = SensorModel {
            max_range: 2.0,
            ..SensorModel::default()
        };
        let l = integrate_scan(&l, &Pose2::new(0.05, 0.05, 0.0), &[(0.0, 2.0)], &model);
        assert!(l.values.iter().all(|v| *v <= 0.0));
        assert_eq!(l.values.iter().filter(|v| **v < 0.0).count(), 20);
    }
}

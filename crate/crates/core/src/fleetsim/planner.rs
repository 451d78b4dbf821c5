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

//! A* over occupancy grids.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::worldmap::{Cell, OccupancyGrid};

pub type CellIx = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Connectivity {
    Four,
    /// Diagonal steps are allowed only when both side neighbors are free.
    #[default]
    Eight,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("no path from {start:?} to {goal:?}")]
    NoPath { start: CellIx, goal: CellIx },
}

const STRAIGHT: [CellIx; 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const DIAGONAL: [CellIx; 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

fn free(grid: &OccupancyGrid, c: CellIx) -> bool {
    grid.get(c.0, c.1) == Some(Cell::Free)
}

/// Free neighbors of `c` with their step cost.
pub fn neighbors(grid: &OccupancyGrid, c: CellIx, conn: Connectivity) -> Vec<(CellIx, f64)> {
    let mut out = Vec::with_capacity(8);
    for (dx, dy) in STRAIGHT {
        let n = (c.0 + dx, c.1 + dy);
        if free(grid, n) {
            out.push((n, 1.0));
        }
    }
    if conn == Connectivity::Eight {
        for (dx, dy) in DIAGONAL {
            let n = (c.0 + dx, c.1 + dy);
            if free(grid, n) && free(grid, (c.0 + dx, c.1)) && free(grid, (c.0, c.1 + dy)) {
                out.push((n, std::f64::consts::SQRT_2));
            }
        }
    }
    out
}

fn heuristic(a: CellIx, b: CellIx, conn: Connectivity) -> f64 {
    let (dx, dy) = ((a.0 - b.0).abs() as f64, (a.1 - b.1).abs() as f64);
    match conn {
        Connectivity::Four => dx + dy,
        Connectivity::Eight => dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy),
    }
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    seq: u64,
    idx: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then prefer deeper nodes, then insertion order.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Shortest 8-connected path, endpoints included.
pub fn plan_path(grid: &OccupancyGrid, start: CellIx, goal: CellIx) -> Result<Vec<CellIx>, PlanError> {
    plan_path_with(grid, start, goal, Connectivity::Eight)
}

pub fn plan_path_with(
    grid: &OccupancyGrid,
    start: CellIx,
    goal: CellIx,
    conn: Connectivity,
) -> Result<Vec<CellIx>, PlanError> {
    let fail = || PlanError::NoPath { start, goal };
    if !free(grid, start) || !free(grid, goal) {
        return Err(fail());
    }
    let geom = grid.geom();
    let ix = |c: CellIx| geom.index(c.0, c.1).expect("free cells are in range");
    let n = grid.cells.len();
    let mut g = vec![f64::INFINITY; n];
    let mut came = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let (s, t) = (ix(start), ix(goal));
    g[s] = 0.0;
    heap.push(Open {
        f: heuristic(start, goal, conn),
        g: 0.0,
        seq,
        idx: s,
    });
    let cell = |i: usize| ((i % grid.width) as i64, (i / grid.width) as i64);
    while let Some(Open { idx, .. }) = heap.pop() {
        if closed[idx] {
            continue;
        }
        if idx == t {
            let mut path = vec![goal];
            let mut cur = t;
            while cur != s {
                cur = came[cur];
                path.push(cell(cur));
            }
            path.reverse();
            return Ok(path);
        }
        closed[idx] = true;
        for (nb, cost) in neighbors(grid, cell(idx), conn) {
            let j = ix(nb);
            let cand = g[idx] + cost;
            if !closed[j] && cand < g[j] - 1e-12 {
                g[j] = cand;
                came[j] = idx;
                seq += 1;
                heap.push(Open {
                    f: cand + heuristic(nb, goal, conn),
                    g: cand,
                    seq,
                    idx: j,
                });
            }
        }
    }
    Err(fail())
}

/// Sum of step lengths along a cell path.
pub fn path_cost(path: &[CellIx]) -> f64 {
    path.windows(2)
        .map(|w| {
            let (dx, dy) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            if dx != 0 && dy != 0 {
                std::f64::consts::SQRT_2
            } else {
                1.0
            }
        })
        .sum()
}

/// Checks that consecutive cells are legal moves through Free cells.
pub fn path_is_valid(grid: &OccupancyGrid, path: &[CellIx], conn: Connectivity) -> bool {
    path.iter().all(|c| free(grid, *c))
        && path
            .windows(2)
            .all(|w| neighbors(grid, w[0], conn).iter().any(|(n, _)| *n == w[1]))
}

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

//! Euclidean distance transform and obstacle inflation.

use super::{Cell, GridGeom, OccupancyGrid};

/// Stand-in for "no obstacle" that keeps the envelope arithmetic finite.
const FAR: f64 = 1e20;

/// Distance in meters from each cell center to the nearest Occupied cell
/// center. Infinite everywhere when the grid has no obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    pub geom: GridGeom,
    pub dist: Vec<f64>,
}

impl DistanceField {
    pub fn get(&self, cx: i64, cy: i64) -> Option<f64> {
        self.geom.index(cx, cy).map(|i| self.dist[i])
    }

    pub fn at_world(&self, x: f64, y: f64) -> Option<f64> {
        let (cx, cy) = self.geom.world_to_cell(x, y);
        self.get(cx, cy)
    }

    /// Largest finite distance, or 0 for an obstacle-free grid.
    pub fn max_finite(&self) -> f64 {
        self.dist.iter().copied().filter(|d| d.is_finite()).fold(0.0, f64::max)
    }
}

// Lower envelope of parabolas (Felzenszwalb and Huttenlocher).
fn edt_1d(f: &[f64], out: &mut [f64], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    if n == 0 {
        return;
    }
    v.clear();
    v.resize(n, 0);
    z.clear();
    z.resize(n + 1, 0.0);
    let inter = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * qf - 2.0 * pf)
    };
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = inter(q, v[k]);
        while s <= z[k] {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

pub fn distance_field(grid: &OccupancyGrid) -> DistanceField {
    let (w, h) = (grid.width, grid.height);
    let mut sq: Vec<f64> = grid
        .cells
        .iter()
        .map(|c| if *c == Cell::Occupied { 0.0 } else { FAR })
        .collect();
    let (mut v, mut z) = (Vec::new(), Vec::new());
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = sq[y * w + x];
        }
        edt_1d(&col, &mut col_out, &mut v, &mut z);
        for y in 0..h {
            sq[y * w + x] = col_out[y];
        }
    }
    let mut row_out = vec![0.0; w];
    for y in 0..h {
        edt_1d(&sq[y * w..(y + 1) * w], &mut row_out, &mut v, &mut z);
        sq[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    let res = grid.meta.resolution;
    let dist = sq
        .into_iter()
        .map(|d| if d >= FAR / 2.0 { f64::INFINITY } else { d.sqrt() * res })
        .collect();
    DistanceField {
        geom: grid.geom(),
        dist,
    }
}

/// Marks every Free cell whose center lies within `radius` meters of an
/// Occupied cell center as Occupied. Unknown cells are left alone.
pub fn inflate(grid: &OccupancyGrid, radius: f64) -> OccupancyGrid {
    if !(radius > 0.0) {
        return grid.clone();
    }
    let field = distance_field(grid);
    let limit = radius + 1e-9 * grid.meta.resolution;
    let mut out = grid.clone();
    for (c, d) in out.cells.iter_mut().zip(&field.dist) {
        if *c == Cell::Free && *d <= limit {
            *c = Cell::Occupied;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmap::MapMeta;
    use proptest::prelude::*;

    fn brute(grid: &OccupancyGrid) -> Vec<f64> {
        let occ: Vec<_> = grid.cells_in(Cell::Occupied).collect();
        (0..grid.height as i64)
            .flat_map(|y| (0..grid.width as i64).map(move |x| (x, y)))
            .map(|(x, y)| {
                occ.iter()
                    .map(|&(ox, oy)| (((x - ox).pow(2) + (y - oy).pow(2)) as f64).sqrt() * grid.meta.resolution)
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    fn grid_from(w: usize, h: usize, cells: &[u8]) -> OccupancyGrid {
        let cells = cells
            .iter()
            .take(w * h)
            .map(|b| match b % 7 {
                0 => Cell::Occupied,
                1 => Cell::Unknown,
                _ => Cell::Free,
            })
            .collect();
        OccupancyGrid::from_cells(w, h, cells, MapMeta::new(0.1, [0.0, 0.0, 0.0])).unwrap()
    }

    #[test]
    fn single_cell_disc() {
        let g = OccupancyGrid::new(11, 11, Cell::Free, MapMeta::new(0.05, [0.0, 0.0, 0.0]));
        let g = g.edit_cells(&[(5, 5, Cell::Occupied)]).unwrap();
        let out = inflate(&g, 2.0 * 0.05);
        assert_eq!(out.count(Cell::Occupied), 13);
        for (x, y) in out.cells_in(Cell::Occupied) {
            assert!((x - 5).pow(2) + (y - 5).pow(2) <= 4);
        }
    }

    #[test]
    fn zero_radius_is_identity() {
        let g = grid_from(9, 7, &(0..63u8).collect::<Vec<_>>());
        assert_eq!(inflate(&g, 0.0), g);
    }

    #[test]
    fn huge_radius() {
        let free = OccupancyGrid::new(8, 8, Cell::Free, MapMeta::new(0.5, [0.0, 0.0, 0.0]));
        assert_eq!(inflate(&free, 1e3), free);
        let g = free.edit_cells(&[(0, 0, Cell::Occupied), (3, 3, Cell::Unknown)]).unwrap();
        let out = inflate(&g, 1e3);
        assert_eq!(out.count(Cell::Occupied), 63);
        assert_eq!(out.get(3, 3), Some(Cell::Unknown));
    }

    #[test]
    fn empty_field_is_infinite() {
        let g = OccupancyGrid::new(4, 3, Cell::Free, MapMeta::new(1.0, [0.0, 0.0, 0.0]));
        let f = distance_field(&g);
        assert!(f.dist.iter().all(|d| d.is_infinite()));
        assert_eq!(f.max_finite(), 0.0);
        assert_eq!(f.at_world(-1.0, 0.0), None);
    }

    proptest! {
        #[test]
        fn field_matches_brute_force(w in 1usize..14, h in 1usize..14,
                                     cells in prop::collection::vec(any::<u8>(), 196)) {
            let g = grid_from(w, h, &cells);
            let fast = distance_field(&g).dist;
            for (a, b) in fast.iter().zip(brute(&g)) {
                prop_assert!((a.is_infinite() && b.is_infinite()) || (a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }

        #[test]
        fn inflation_matches_brute_force(w in 1usize..14, h in 1usize..14, r in 0.0f64..0.6,
                                         cells in prop::collection::vec(any::<u8>(), 196)) {
            let g = grid_from(w, h, &cells);
            let out = inflate(&g, r);
            let d = brute(&g);
            for i in 0..g.cells.len() {
                let expect = match g.cells[i] {
                    Cell::Free if r > 0.0 && d[i] <= r + 1e-10 => Cell::Occupied,
                    c => c,
                };
                prop_assert_eq!(out.cells[i], expect);
            }
        }
    }
}

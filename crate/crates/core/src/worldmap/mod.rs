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

//! Occupancy grids: PGM + YAML map files, ternary cells, editing,
//! raycasting, log-odds mapping and obstacle inflation.
//!
//! Cell `(0, 0)` sits at the map origin, the bottom-left corner of the
//! image. `x` grows to the right and `y` upward.

mod distance;
mod io;
mod logodds;
mod raycast;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::msg::{OccupancyGridMsg, Pose2D};

pub use distance::{distance_field, inflate, DistanceField};
pub use io::{classify, load_map, parse_map_yaml, parse_pgm, pixel_for, save_map, write_map_yaml, write_pgm, Pgm};
pub use logodds::{integrate_scan, LogOddsGrid, SensorModel};
pub use raycast::{raycast, raycast_with, RayOptions};

pub const DEFAULT_FREE_THRESH: f64 = 0.196;
pub const DEFAULT_OCCUPIED_THRESH: f64 = 0.65;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("not a PGM file (magic {0:?})")]
    BadMagic(String),
    #[error("map metadata is missing key {0:?}")]
    MissingMetaKey(&'static str),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid map metadata: {0}")]
    BadMeta(String),
    #[error("invalid PGM: {0}")]
    BadPgm(String),
    #[error("cell ({x}, {y}) is outside the {width}x{height} grid")]
    OutOfRange {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Free,
    Occupied,
    Unknown,
}

impl Cell {
    pub fn to_msg_value(self) -> i8 {
        match self {
            Cell::Free => 0,
            Cell::Occupied => 100,
            Cell::Unknown => -1,
        }
    }

    /// Message values follow the usual costmap convention: negative is
    /// unknown, 65 and above is occupied.
    pub fn from_msg_value(v: i8) -> Cell {
        match v {
            v if v < 0 => Cell::Unknown,
            v if v >= 65 => Cell::Occupied,
            _ => Cell::Free,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    /// Image path as written in the YAML file.
    pub image: String,
    pub resolution: f64,
    /// `[x, y, yaw]` of cell (0, 0)'s outer corner.
    pub origin: [f64; 3],
    pub negate: bool,
    pub occupied_thresh: f64,
    pub free_thresh: f64,
}

impl MapMeta {
    pub fn new(resolution: f64, origin: [f64; 3]) -> Self {
        MapMeta {
            image: String::new(),
            resolution,
            origin,
            negate: false,
            occupied_thresh: DEFAULT_OCCUPIED_THRESH,
            free_thresh: DEFAULT_FREE_THRESH,
        }
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(MapError::BadMeta(format!("resolution {} must be > 0", self.resolution)));
        }
        if !self.origin.iter().all(|v| v.is_finite()) {
            return Err(MapError::BadMeta("origin must be finite".into()));
        }
        let (f, o) = (self.free_thresh, self.occupied_thresh);
        if !(0.0 <= f && f < o && o <= 1.0) {
            return Err(MapError::BadMeta(format!(
                "need 0 <= free_thresh < occupied_thresh <= 1, got {f} and {o}"
            )));
        }
        Ok(())
    }
}

/// Dimensions and placement shared by every grid type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeom {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 3],
}

impl GridGeom {
    pub fn contains(&self, cx: i64, cy: i64) -> bool {
        cx >= 0 && cy >= 0 && (cx as usize) < self.width && (cy as usize) < self.height
    }

    pub fn index(&self, cx: i64, cy: i64) -> Option<usize> {
        self.contains(cx, cy).then(|| cy as usize * self.width + cx as usize)
    }

    /// World point → continuous grid coordinates in cell units.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let [ox, oy, yaw] = self.origin;
        let (dx, dy) = (x - ox, y - oy);
        let (s, c) = yaw.sin_cos();
        ((c * dx + s * dy) / self.resolution, (-s * dx + c * dy) / self.resolution)
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> (i64, i64) {
        let (u, v) = self.to_local(x, y);
        (u.floor() as i64, v.floor() as i64)
    }

    pub fn cell_center(&self, cx: i64, cy: i64) -> (f64, f64) {
        let [ox, oy, yaw] = self.origin;
        let (u, v) = ((cx as f64 + 0.5) * self.resolution, (cy as f64 + 0.5) * self.resolution);
        let (s, c) = yaw.sin_cos();
        (ox + c * u - s * v, oy + s * u + c * v)
    }

    /// World-frame extent `(min_x, min_y, max_x, max_y)` of an unrotated grid.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let [ox, oy, _] = self.origin;
        (
            ox,
            oy,
            ox + self.width as f64 * self.resolution,
            oy + self.height as f64 * self.resolution,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major from the origin row.
    pub cells: Vec<Cell>,
    pub meta: MapMeta,
}

/// Equality ignores `meta.image`, which only says where the grid was stored.
impl PartialEq for OccupancyGrid {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.cells == other.cells
            && self.meta.resolution == other.meta.resolution
            && self.meta.origin == other.meta.origin
            && self.meta.negate == other.meta.negate
            && self.meta.occupied_thresh == other.meta.occupied_thresh
            && self.meta.free_thresh == other.meta.free_thresh
    }
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, fill: Cell, meta: MapMeta) -> Self {
        OccupancyGrid {
            width,
            height,
            cells: vec![fill; width * height],
            meta,
        }
    }

    pub fn from_cells(width: usize, height: usize, cells: Vec<Cell>, meta: MapMeta) -> Result<Self, MapError> {
        if cells.len() != width * height {
            return Err(MapError::SizeMismatch(format!(
                "{} cells for a {width}x{height} grid",
                cells.len()
            )));
        }
        Ok(OccupancyGrid {
            width,
            height,
            cells,
            meta,
        })
    }

    /// Builds a grid from text rows, top row first: `#` occupied, `.` free,
    /// anything else unknown.
    pub fn from_ascii(rows: &[&str], meta: MapMeta) -> Result<Self, MapError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for row in rows.iter().rev() {
            if row.chars().count() != width {
                return Err(MapError::SizeMismatch("ragged rows".into()));
            }
            cells.extend(row.chars().map(|c| match c {
                '#' => Cell::Occupied,
                '.' => Cell::Free,
                _ => Cell::Unknown,
            }));
        }
        Self::from_cells(width, height, cells, meta)
    }

    pub fn geom(&self) -> GridGeom {
        GridGeom {
            width: self.width,
            height: self.height,
            resolution: self.meta.resolution,
            origin: self.meta.origin,
        }
    }

    pub fn get(&self, cx: i64, cy: i64) -> Option<Cell> {
        self.geom().index(cx, cy).map(|i| self.cells[i])
    }

    pub fn at_world(&self, x: f64, y: f64) -> Option<Cell> {
        let (cx, cy) = self.geom().world_to_cell(x, y);
        self.get(cx, cy)
    }

    pub fn count(&self, state: Cell) -> usize {
        self.cells.iter().filter(|c| **c == state).count()
    }

    /// `(cx, cy)` of every cell in `state`.
    pub fn cells_in(&self, state: Cell) -> impl Iterator<Item = (i64, i64)> + '_ {
        self.cells.iter().enumerate().filter(move |(_, c)| **c == state).map(|(i, _)| {
            ((i % self.width) as i64, (i / self.width) as i64)
        })
    }

    pub fn edit_cells(&self, edits: &[(i64, i64, Cell)]) -> Result<OccupancyGrid, MapError> {
        let mut out = self.clone();
        let geom = self.geom();
        for &(x, y, state) in edits {
            let i = geom.index(x, y).ok_or(MapError::OutOfRange {
                x,
                y,
                width: self.width,
                height: self.height,
            })?;
            out.cells[i] = state;
        }
        Ok(out)
    }

    pub fn to_msg(&self, frame_id: &str) -> OccupancyGridMsg {
        OccupancyGridMsg {
            frame_id: frame_id.to_string(),
            width: self.width as u32,
            height: self.height as u32,
            resolution: self.meta.resolution,
            origin: Pose2D {
                x: self.meta.origin[0],
                y: self.meta.origin[1],
                theta: self.meta.origin[2],
            },
            data: self.cells.iter().map(|c| c.to_msg_value()).collect(),
        }
    }

    pub fn from_msg(msg: &OccupancyGridMsg) -> Result<Self, MapError> {
        let meta = MapMeta::new(msg.resolution, [msg.origin.x, msg.origin.y, msg.origin.theta]);
        meta.validate()?;
        Self::from_cells(
            msg.width as usize,
            msg.height as usize,
            msg.data.iter().map(|v| Cell::from_msg_value(*v)).collect(),
            meta,
        )
    }
}

/// Free-standing form of [`OccupancyGrid::edit_cells`].
pub fn edit_cells(grid: &OccupancyGrid, edits: &[(i64, i64, Cell)]) -> Result<OccupancyGrid, MapError> {
    grid.edit_cells(edits)
}

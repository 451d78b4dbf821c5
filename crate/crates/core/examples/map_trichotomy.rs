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

//! Classifies pixel values into free, occupied and unknown, then loads a
//! map, edits a cell and saves it again.
//!
//!     cargo run --example map_trichotomy -- [map.yaml]

use std::path::PathBuf;

use mrctl::worldmap::{classify, load_map, save_map, Cell, MapMeta};

fn main() {
    let meta = MapMeta::new(0.05, [0.0, 0.0, 0.0]);
    println!("thresholds free < {} occupied > {}", meta.free_thresh, meta.occupied_thresh);
    for v in [255u8, 254, 230, 205, 128, 90, 0] {
        println!("  pixel {v:3} -> {:?}", classify(v, &meta));
    }

    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/maps/trichotomy.yaml"));
    let grid = load_map(&path).unwrap();
    let (x0, y0, x1, y1) = grid.geom().bounds();
    println!("{}: {} x {} cells, x {x0:.2}..{x1:.2} y {y0:.2}..{y1:.2}", path.display(), grid.width, grid.height);
    for c in [Cell::Free, Cell::Occupied, Cell::Unknown] {
        println!("  {c:?}: {}", grid.count(c));
    }
    for row in (0..grid.height as i64).rev() {
        let line: String = (0..grid.width as i64)
            .map(|col| match grid.get(col, row) {
                Some(Cell::Free) => '.',
                Some(Cell::Occupied) => '#',
                _ => '?',
            })
            .collect();
        println!("  {line}");
    }

    let edited = grid.edit_cells(&[(1, 1, Cell::Occupied)]).unwrap();
    let dir = tempfile_dir();
    let (pgm, yaml) = save_map(&edited, &dir.join("edited")).unwrap();
    let back = load_map(&yaml).unwrap();
    println!("saved {} and {}; reloaded cell (1,1) is {:?}", pgm.display(), yaml.display(), back.get(1, 1).unwrap());
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("map_trichotomy_{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

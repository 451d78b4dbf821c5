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

//! Plans a path across the house map after inflating obstacles by the robot
//! radius, and draws it over a downsampled view of the map.
//!
//!     cargo run --release --example astar_planning -- [x0 y0 x1 y1]

use std::collections::HashSet;
use std::path::Path;

use mrctl::fleetsim::{path_cost, plan_path, DEFAULT_INFLATION};
use mrctl::worldmap::{inflate, load_map, Cell};

fn main() {
    let yaml = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/packages/turtlebot3_gazebo/maps/house.yaml");
    let world = load_map(&yaml).unwrap();
    let nav = inflate(&world, DEFAULT_INFLATION);
    let v: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let (sx, sy, gx, gy) = if v.len() == 4 { (v[0], v[1], v[2], v[3]) } else { (-7.0, -1.0, 7.0, -1.0) };

    let g = nav.geom();
    let start = g.world_to_cell(sx, sy);
    let goal = g.world_to_cell(gx, gy);
    let path = match plan_path(&nav, start, goal) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("no path from ({sx}, {sy}) to ({gx}, {gy}): {e}");
            std::process::exit(1);
        }
    };
    println!(
        "{} cells, {:.2} m from ({sx}, {sy}) to ({gx}, {gy}); inflation {DEFAULT_INFLATION} m left {} of {} free cells",
        path.len(),
        path_cost(&path) * world.meta.resolution,
        nav.count(Cell::Free),
        world.count(Cell::Free)
    );

    let step = 4i64;
    let on_path: HashSet<(i64, i64)> = path.iter().map(|c| (c.0 / step, c.1 / step)).collect();
    for row in (0..world.height as i64 / step).rev() {
        let line: String = (0..world.width as i64 / step)
            .map(|col| {
                if on_path.contains(&(col, row)) {
                    return '*';
                }
                match world.get(col * step, row * step) {
                    Some(Cell::Free) => ' ',
                    Some(Cell::Occupied) => '#',
                    _ => '.',
                }
            })
            .collect();
        println!("{line}");
    }
}

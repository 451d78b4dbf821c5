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

//! Builds an occupancy map from simulated scans taken at known poses and
//! compares it with the ground truth.
//!
//!     cargo run --release --example mapping_known_poses

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mrctl::fleetsim::scenarios::synthetic_room;
use mrctl::fleetsim::{simulate_scan, ScanSpec};
use mrctl::geom::Pose2;
use mrctl::worldmap::{integrate_scan, Cell, LogOddsGrid, SensorModel};

fn main() {
    let truth = synthetic_room();
    let model = SensorModel::default();
    let spec = ScanSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut lgrid = LogOddsGrid::new(truth.width, truth.height, model.l_max, truth.meta.clone());

    let (x0, y0, x1, y1) = truth.geom().bounds();
    let mut poses = Vec::new();
    for i in 0..6 {
        for j in 0..4 {
            let x = x0 + (x1 - x0) * (i as f64 + 0.5) / 6.0;
            let y = y0 + (y1 - y0) * (j as f64 + 0.5) / 4.0;
            if truth.at_world(x, y) == Some(Cell::Free) {
                poses.push(Pose2::new(x, y, 0.3 * i as f64));
            }
        }
    }
    for pose in &poses {
        let scan = simulate_scan(&truth, pose, &spec, "", &mut rng);
        let beams: Vec<(f64, f64)> = scan
            .ranges
            .iter()
            .enumerate()
            .map(|(k, r)| (scan.angle_min + scan.angle_increment * k as f64, *r))
            .collect();
        lgrid = integrate_scan(&lgrid, pose, &beams, &model);
    }

    let built = lgrid.to_occupancy(0.5);
    let (mut seen, mut agree) = (0, 0);
    for (a, b) in built.cells.iter().zip(&truth.cells) {
        if *a != Cell::Unknown {
            seen += 1;
            agree += (a == b) as usize;
        }
    }
    println!("{} scan poses, {} of {} cells observed", poses.len(), seen, built.cells.len());
    println!("agreement with ground truth on observed cells: {:.1}%", 100.0 * agree as f64 / seen.max(1) as f64);
    for c in [Cell::Free, Cell::Occupied, Cell::Unknown] {
        println!("  {c:?}: built {} truth {}", built.count(c), truth.count(c));
    }
}

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

//! Monte Carlo localization against a known occupancy grid.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geom::{angle_diff, normalize_angle, Pose2};
use crate::msg::LaserScan;
use crate::worldmap::{distance_field, Cell, DistanceField, OccupancyGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose2,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MclConfig {
    /// Odometry noise: rotation from rotation, rotation from translation,
    /// translation from translation, translation from rotation.
    pub alphas: [f64; 4],
    pub sigma_hit: f64,
    pub z_hit: f64,
    pub z_rand: f64,
    pub n_particles: usize,
    /// Beams used per update, evenly subsampled from the scan.
    pub max_beams: usize,
    /// Endpoint distances are capped here; endpoints off the map use it.
    pub max_occ_dist: f64,
    /// Exponent on the joint beam likelihood. Beams are not independent, so
    /// the raw product is overconfident.
    pub likelihood_exponent: f64,
    /// Resample once the effective sample size drops below this fraction.
    pub resample_neff: f64,
    /// Gaussian jitter `(σ_x, σ_y, σ_θ)` added to resampled particles.
    pub roughening: [f64; 3],
}

impl Default for MclConfig {
    fn default() -> Self {
        MclConfig {
            alphas: [0.05; 4],
            sigma_hit: 0.1,
            z_hit: 0.95,
            z_rand: 0.05,
            n_particles: 500,
            max_beams: 60,
            max_occ_dist: 2.0,
            likelihood_exponent: 0.3,
            resample_neff: 0.5,
            roughening: [0.02, 0.02, 0.01],
        }
    }
}

/// A map prepared for the likelihood-field model.
#[derive(Debug, Clone)]
pub struct LikelihoodField {
    pub field: DistanceField,
    free: Vec<(i64, i64)>,
}

impl LikelihoodField {
    pub fn new(grid: &OccupancyGrid) -> Self {
        LikelihoodField {
            field: distance_field(grid),
            free: grid.cells_in(Cell::Free).collect(),
        }
    }

    pub fn free_cells(&self) -> &[(i64, i64)] {
        &self.free
    }

    /// Distance from a world point to the nearest obstacle, capped.
    pub fn obstacle_distance(&self, x: f64, y: f64, cap: f64) -> f64 {
        self.field.at_world(x, y).map_or(cap, |d| d.min(cap))
    }

    /// Log-likelihood of `scan` seen from `pose`.
    pub fn log_likelihood(&self, pose: &Pose2, scan: &LaserScan, cfg: &MclConfig) -> f64 {
        let n = scan.ranges.len();
        if n == 0 {
            return 0.0;
        }
        let step = n.div_ceil(cfg.max_beams.max(1)).max(1);
        let two_s2 = 2.0 * cfg.sigma_hit * cfg.sigma_hit;
        let norm = 1.0 / (cfg.sigma_hit * (2.0 * std::f64::consts::PI).sqrt());
        let rand = cfg.z_rand / scan.range_max.max(f64::MIN_POSITIVE);
        let mut total = 0.0;
        for i in (0..n).step_by(step) {
            let r = scan.ranges[i];
            if !(r < scan.range_max) || r <= 0.0 {
                continue;
            }
            let b = scan.angle_min + scan.angle_increment * i as f64;
            let (s, c) = (pose.theta + b).sin_cos();
            let d = self.obstacle_distance(pose.x + r * c, pose.y + r * s, cfg.max_occ_dist);
            let p = cfg.z_hit * norm * (-d * d / two_s2).exp() + rand;
            total += p.ln();
        }
        total
    }

    pub fn sample_free<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Pose2> {
        if self.free.is_empty() {
            return None;
        }
        let (cx, cy) = self.free[rng.gen_range(0..self.free.len())];
        let (x, y) = self.field.geom.cell_center(cx, cy);
        let res = self.field.geom.resolution;
        Some(Pose2::new(
            x + rng.gen_range(-0.5..0.5) * res,
            y + rng.gen_range(-0.5..0.5) * res,
            rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
        ))
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> f64 {
    if var > 0.0 {
        Normal::new(0.0, var.sqrt()).map_or(0.0, |n| n.sample(rng))
    } else {
        0.0
    }
}

/// Samples a successor of `pose` after an odometry step `delta` expressed
/// in the previous body frame, using the rotate-translate-rotate model.
pub fn sample_motion<R: Rng + ?Sized>(pose: &Pose2, delta: &Pose2, alphas: &[f64; 4], rng: &mut R) -> Pose2 {
    let trans = delta.x.hypot(delta.y);
    let rot1 = if trans < 1e-3 { 0.0 } else { delta.y.atan2(delta.x) };
    let rot2 = angle_diff(delta.theta, rot1);
    // Near-reversing steps are treated as a backwards translation.
    let (rot1_n, rot2_n) = (
        angle_diff(rot1, 0.0).abs().min(angle_diff(rot1, std::f64::consts::PI).abs()),
        angle_diff(rot2, 0.0).abs().min(angle_diff(rot2, std::f64::consts::PI).abs()),
    );
    let [a1, a2, a3, a4] = *alphas;
    let r1 = rot1 - gaussian(rng, a1 * rot1_n * rot1_n + a2 * trans * trans);
    let t = trans - gaussian(rng, a3 * trans * trans + a4 * (rot1_n * rot1_n + rot2_n * rot2_n));
    let r2 = rot2 - gaussian(rng, a1 * rot2_n * rot2_n + a2 * trans * trans);
    let th = pose.theta + r1;
    Pose2::new(pose.x + t * th.cos(), pose.y + t * th.sin(), th + r2)
}

/// Low-variance (systematic) resampling. Output weights are uniform.
pub fn low_variance_resample<R: Rng + ?Sized>(particles: &[Particle], rng: &mut R) -> Vec<Particle> {
    let n = particles.len();
    if n == 0 {
        return Vec::new();
    }
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    let w = 1.0 / n as f64;
    let step = total / n as f64;
    let r = rng.gen_range(0.0..step);
    let mut out = Vec::with_capacity(n);
    let mut c = particles[0].weight;
    let mut i = 0;
    for m in 0..n {
        let u = r + m as f64 * step;
        while u > c && i + 1 < n {
            i += 1;
            c += particles[i].weight;
        }
        out.push(Particle {
            pose: particles[i].pose,
            weight: w,
        });
    }
    out
}

/// Weighted mean position with a circular mean heading.
pub fn estimate(particles: &[Particle]) -> Pose2 {
    let total: f64 = particles.iter().map(|p| p.weight).sum();
    if particles.is_empty() || !(total > 0.0) {
        return Pose2::IDENTITY;
    }
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for p in particles {
        let w = p.weight / total;
        x += w * p.pose.x;
        y += w * p.pose.y;
        s += w * p.pose.theta.sin();
        c += w * p.pose.theta.cos();
    }
    Pose2::new(x, y, s.atan2(c))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MclUpdate {
    pub particles: Vec<Particle>,
    pub pose_est: Pose2,
    /// Every weight vanished and the set was re-seeded over free space.
    pub degenerate: bool,
}

/// One filter step: move, weigh, estimate, and resample when the weights
/// have concentrated.
pub fn mcl_update<R: Rng + ?Sized>(
    particles: &[Particle],
    odom_delta: &Pose2,
    scan: &LaserScan,
    map: &LikelihoodField,
    cfg: &MclConfig,
    rng: &mut R,
) -> MclUpdate {
    let moved: Vec<Pose2> = particles
        .iter()
        .map(|p| sample_motion(&p.pose, odom_delta, &cfg.alphas, rng))
        .collect();
    let logw: Vec<f64> = moved
        .iter()
        .zip(particles)
        .map(|(pose, p)| p.weight.ln() + cfg.likelihood_exponent * map.log_likelihood(pose, scan, cfg))
        .collect();
    let best = logw.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        let n = if particles.is_empty() { cfg.n_particles.max(1) } else { particles.len() };
        let w = 1.0 / n as f64;
        let fresh: Vec<Particle> = (0..n)
            .map(|_| Particle {
                pose: map.sample_free(rng).unwrap_or_default(),
                weight: w,
            })
            .collect();
        return MclUpdate {
            pose_est: estimate(&fresh),
            particles: fresh,
            degenerate: true,
        };
    }
    let mut weighted: Vec<Particle> = moved
        .into_iter()
        .zip(&logw)
        .map(|(pose, lw)| Particle {
            pose,
            weight: if lw.is_nan() { 0.0 } else { (lw - best).exp() },
        })
        .collect();
    let total: f64 = weighted.iter().map(|p| p.weight).sum();
    for p in &mut weighted {
        p.weight /= total;
    }
    let pose_est = estimate(&weighted);
    let neff = 1.0 / weighted.iter().map(|p| p.weight * p.weight).sum::<f64>();
    let particles = if neff < cfg.resample_neff * weighted.len() as f64 {
        let [sx, sy, st] = cfg.roughening;
        let mut out = low_variance_resample(&weighted, rng);
        for p in &mut out {
            p.pose = Pose2::new(
                p.pose.x + gaussian(rng, sx * sx),
                p.pose.y + gaussian(rng, sy * sy),
                p.pose.theta + gaussian(rng, st * st),
            );
        }
        out
    } else {
        weighted
    };
    MclUpdate {
        particles,
        pose_est,
        degenerate: false,
    }
}

/// A running filter with its own particle set.
#[derive(Debug, Clone)]
pub struct Mcl {
    pub cfg: MclConfig,
    pub particles: Vec<Particle>,
    pub pose_est: Pose2,
    pub map: LikelihoodField,
    pub reseeds: usize,
}

impl Mcl {
    /// Starts with particles drawn around `initial` with per-axis standard
    /// deviations `(σ_x, σ_y, σ_θ)`.
    pub fn around<R: Rng + ?Sized>(
        grid: &OccupancyGrid,
        initial: Pose2,
        spread: (f64, f64, f64),
        cfg: MclConfig,
        rng: &mut R,
    ) -> Self {
        let n = cfg.n_particles.max(1);
        let w = 1.0 / n as f64;
        let particles = (0..n)
            .map(|_| Particle {
                pose: Pose2::new(
                    initial.x + gaussian(rng, spread.0 * spread.0),
                    initial.y + gaussian(rng, spread.1 * spread.1),
                    normalize_angle(initial.theta + gaussian(rng, spread.2 * spread.2)),
                ),
                weight: w,
            })
            .collect();
        Mcl {
            cfg,
            particles,
            pose_est: initial,
            map: LikelihoodField::new(grid),
            reseeds: 0,
        }
    }

    /// Particles spread uniformly over the free cells of `grid`.
    pub fn global<R: Rng + ?Sized>(grid: &OccupancyGrid, cfg: MclConfig, rng: &mut R) -> Self {
        let map = LikelihoodField::new(grid);
        let n = cfg.n_particles.max(1);
        let particles: Vec<Particle> = (0..n)
            .map(|_| Particle {
                pose: map.sample_free(rng).unwrap_or_default(),
                weight: 1.0 / n as f64,
            })
            .collect();
        Mcl {
            cfg,
            pose_est: estimate(&particles),
            particles,
            map,
            reseeds: 0,
        }
    }

    pub fn set_map(&mut self, grid: &OccupancyGrid) {
        self.map = LikelihoodField::new(grid);
    }

    pub fn update<R: Rng + ?Sized>(&mut self, odom_delta: &Pose2, scan: &LaserScan, rng: &mut R) -> Pose2 {
        let u = mcl_update(&self.particles, odom_delta, scan, &self.map, &self.cfg, rng);
        self.particles = u.particles;
        self.pose_est = u.pose_est;
        self.reseeds += u.degenerate as usize;
        self.pose_est
    }
}

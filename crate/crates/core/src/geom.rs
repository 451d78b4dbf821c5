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

//! Planar rigid transforms.

use std::f64::consts::PI;
use std::ops::Mul;

use serde::{Deserialize, Serialize};

use crate::msg::Pose2D;

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Signed shortest difference `a − b`, in (−π, π].
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

/// A pose, equivalently the transform from its own frame to the parent.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(
            self.x + c * other.x - s * other.y,
            self.y + s * other.x + c * other.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2::new(-c * self.x - s * self.y, s * self.x - c * self.y, -self.theta)
    }

    /// `self⁻¹ ∘ other`: `other` expressed in this pose's frame.
    pub fn between(&self, other: &Pose2) -> Pose2 {
        self.inverse().compose(other)
    }

    pub fn transform_point(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * x - s * y, self.y + s * x + c * y)
    }

    pub fn distance(&self, other: &Pose2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl Mul for Pose2 {
    type Output = Pose2;
    fn mul(self, rhs: Pose2) -> Pose2 {
        self.compose(&rhs)
    }
}

impl From<Pose2D> for Pose2 {
    fn from(p: Pose2D) -> Self {
        Pose2::new(p.x, p.y, p.theta)
    }
}

impl From<Pose2> for Pose2D {
    fn from(p: Pose2) -> Self {
        Pose2D {
            x: p.x,
            y: p.y,
            theta: p.theta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Pose2, b: &Pose2) -> bool {
        (a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9 && angle_diff(a.theta, b.theta).abs() < 1e-9
    }

    #[test]
    fn normalization_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn compose_known() {
        let a = Pose2::new(1.0, 0.0, PI / 2.0);
        let b = Pose2::new(1.0, 0.0, 0.0);
        assert!(close(&a.compose(&b), &Pose2::new(1.0, 1.0, PI / 2.0)));
    }

    fn pose() -> impl Strategy<Value = Pose2> {
        (-50.0f64..50.0, -50.0f64..50.0, -10.0f64..10.0).prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn inverse_cancels(p in pose()) {
            prop_assert!(close(&p.compose(&p.inverse()), &Pose2::IDENTITY));
            prop_assert!(close(&p.inverse().compose(&p), &Pose2::IDENTITY));
        }

        #[test]
        fn associative(a in pose(), b in pose(), c in pose()) {
            let l = a.compose(&b).compose(&c);
            let r = a.compose(&b.compose(&c));
            prop_assert!((l.x - r.x).abs() < 1e-7 && (l.y - r.y).abs() < 1e-7);
            prop_assert!(angle_diff(l.theta, r.theta).abs() < 1e-9);
        }

        #[test]
        fn angles_stay_in_range(a in -1e4f64..1e4) {
            let n = normalize_angle(a);
            prop_assert!(n > -PI && n <= PI);
            prop_assert!(((a - n) / (2.0 * PI)).round() * 2.0 * PI - (a - n) < 1e-6);
        }
    }
}

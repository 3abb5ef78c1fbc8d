//! Axis-aligned box geometry in the shared world frame (meters).

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

/// Euclidean distance between two points.
pub fn distance(a: Vec3, b: Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Rounds every coordinate to the 6-decimal grid used by the canonical encoding.
pub fn quantize(x: f64) -> f64 {
    let q = (x * 1e6).round() / 1e6;
    if q == 0.0 {
        0.0
    } else {
        q
    }
}

pub fn quantize3(v: Vec3) -> Vec3 {
    [quantize(v[0]), quantize(v[1]), quantize(v[2])]
}

/// Axis-aligned bounding box. `min <= max` holds component-wise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if min.iter().chain(max.iter()).any(|c| !c.is_finite()) {
            return Err(Error::Geometry(format!("non-finite box corner {min:?} / {max:?}")));
        }
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(Error::Geometry(format!("box min {min:?} exceeds max {max:?}")));
        }
        Ok(Self { min, max })
    }

    /// Builds a box from two arbitrary corners, ordering each axis.
    pub fn from_corners(a: Vec3, b: Vec3) -> Result<Self> {
        let mut min = a;
        let mut max = b;
        for i in 0..3 {
            if min[i] > max[i] {
                std::mem::swap(&mut min[i], &mut max[i]);
            }
        }
        Self::new(min, max)
    }

    pub fn from_center_size(center: Vec3, size: Vec3) -> Result<Self> {
        let half = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
        Self::new(
            [center[0] - half[0], center[1] - half[1], center[2] - half[2]],
            [center[0] + half[0], center[1] + half[1], center[2] + half[2]],
        )
    }

    pub fn unit() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn min(&self) -> Vec3 {
        self.min
    }

    pub fn max(&self) -> Vec3 {
        self.max
    }

    /// Side lengths `(b_x, b_y, b_z)`.
    pub fn extents(&self) -> Vec3 {
        [
            self.max[0] - self.min[0],
            self.max[1] - self.min[1],
            self.max[2] - self.min[2],
        ]
    }

    pub fn volume(&self) -> f64 {
        let e = self.extents();
        e[0] * e[1] * e[2]
    }

    /// Longest side.
    pub fn max_length(&self) -> f64 {
        let e = self.extents();
        e[0].max(e[1]).max(e[2])
    }

    pub fn center(&self) -> Vec3 {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
            (self.min[2] + self.max[2]) / 2.0,
        ]
    }

    pub fn contains_point(&self, p: Vec3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn contains(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && other.max[i] <= self.max[i])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] < other.max[i] && other.min[i] < self.max[i])
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        let mut v = 1.0;
        for i in 0..3 {
            let lo = self.min[i].max(other.min[i]);
            let hi = self.max[i].min(other.max[i]);
            if hi <= lo {
                return 0.0;
            }
            v *= hi - lo;
        }
        v
    }

    /// Intersection over union. Two zero-volume boxes score 1 when identical
    /// and 0 otherwise.
    pub fn iou(&self, other: &Aabb) -> f64 {
        let inter = self.intersection_volume(other);
        let union = self.volume() + other.volume() - inter;
        if union <= 0.0 {
            return if self == other { 1.0 } else { 0.0 };
        }
        (inter / union).clamp(0.0, 1.0)
    }

    /// Smallest box containing both inputs.
    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut min = self.min;
        let mut max = self.max;
        for i in 0..3 {
            min[i] = min[i].min(other.min[i]);
            max[i] = max[i].max(other.max[i]);
        }
        Aabb { min, max }
    }

    pub fn translated(&self, d: Vec3) -> Aabb {
        Aabb {
            min: [self.min[0] + d[0], self.min[1] + d[1], self.min[2] + d[2]],
            max: [self.max[0] + d[0], self.max[1] + d[1], self.max[2] + d[2]],
        }
    }

    pub fn clamp_point(&self, p: Vec3) -> Vec3 {
        [
            p[0].clamp(self.min[0], self.max[0]),
            p[1].clamp(self.min[1], self.max[1]),
            p[2].clamp(self.min[2], self.max[2]),
        ]
    }

    pub fn quantized(&self) -> Aabb {
        Aabb {
            min: quantize3(self.min),
            max: quantize3(self.max),
        }
    }
}

pub fn aabb_iou(a: &Aabb, b: &Aabb) -> f64 {
    a.iou(b)
}

pub fn bbox_union(a: &Aabb, b: &Aabb) -> Aabb {
    a.union(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(at: Vec3) -> Aabb {
        Aabb::new(at, [at[0] + 1.0, at[1] + 1.0, at[2] + 1.0]).unwrap()
    }

    #[test]
    fn iou_identity_and_disjoint() {
        assert_eq!(cube([0.0; 3]).iou(&cube([0.0; 3])), 1.0);
        assert_eq!(cube([0.0; 3]).iou(&cube([5.0; 3])), 0.0);
    }

    #[test]
    fn iou_half_shifted_cube_matches_monte_carlo() {
        let a = cube([0.0; 3]);
        let b = Aabb::new([0.5, 0.0, 0.0], [1.5, 1.0, 1.0]).unwrap();
        assert!((a.iou(&b) - 1.0 / 3.0).abs() < 1e-12);

        // Monte-Carlo estimate over the union's bounding region.
        let region = a.union(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut inter, mut uni) = (0u64, 0u64);
        for _ in 0..200_000 {
            let p = [
                rng.random_range(region.min()[0]..region.max()[0]),
                rng.random_range(region.min()[1]..region.max()[1]),
                rng.random_range(region.min()[2]..region.max()[2]),
            ];
            let (ia, ib) = (a.contains_point(p), b.contains_point(p));
            if ia && ib {
                inter += 1;
            }
            if ia || ib {
                uni += 1;
            }
        }
        let estimate = inter as f64 / uni as f64;
        assert!((estimate - 1.0 / 3.0).abs() < 0.01, "{estimate}");
    }

    #[test]
    fn degenerate_boxes() {
        let p = Aabb::new([1.0; 3], [1.0; 3]).unwrap();
        let q = Aabb::new([2.0; 3], [2.0; 3]).unwrap();
        assert_eq!(p.iou(&p), 1.0);
        assert_eq!(p.iou(&q), 0.0);
        assert_eq!(p.iou(&cube([0.0; 3])), 0.0);
    }

    #[test]
    fn rejects_inverted_and_non_finite() {
        assert!(Aabb::new([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]).is_err());
        assert!(Aabb::new([f64::NAN, 0.0, 0.0], [1.0; 3]).is_err());
        assert!(Aabb::from_corners([1.0, 0.0, 0.0], [0.0, 1.0, 1.0]).is_ok());
    }

    #[test]
    fn union_examples() {
        let x = cube([0.0; 3]);
        assert_eq!(x.union(&x), x);
        let u = cube([0.0; 3]).union(&cube([2.0; 3]));
        assert_eq!(u, Aabb::new([0.0; 3], [3.0; 3]).unwrap());
    }

    #[test]
    fn derived_properties() {
        let b = Aabb::new([0.0, 0.0, 0.0], [2.0, 3.0, 0.5]).unwrap();
        assert_eq!(b.volume(), 3.0);
        assert_eq!(b.max_length(), 3.0);
        assert_eq!(b.center(), [1.0, 1.5, 0.25]);
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance([0.0; 3], [0.0; 3]), 0.0);
        assert_eq!(distance([0.0; 3], [3.0, 4.0, 0.0]), 5.0);
    }

    fn arb_box() -> impl Strategy<Value = Aabb> {
        (
            prop::array::uniform3(-10.0f64..10.0),
            prop::array::uniform3(0.0f64..5.0),
        )
            .prop_map(|(min, size)| Aabb::new(min, [min[0] + size[0], min[1] + size[1], min[2] + size[2]]).unwrap())
    }

    proptest! {
        #[test]
        fn iou_is_bounded_and_symmetric(a in arb_box(), b in arb_box()) {
            let ab = a.iou(&b);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, b.iou(&a));
            if a.volume() > 0.0 {
                prop_assert_eq!(a.iou(&a), 1.0);
            }
        }

        #[test]
        fn union_laws(a in arb_box(), b in arb_box(), c in arb_box()) {
            prop_assert_eq!(a.union(&b), b.union(&a));
            prop_assert_eq!(a.union(&a), a);
            prop_assert_eq!(a.union(&b).union(&c), a.union(&b.union(&c)));
            let u = a.union(&b);
            prop_assert!(u.volume() >= a.volume().max(b.volume()));
            prop_assert!(u.contains(&a) && u.contains(&b));
        }

        #[test]
        fn union_contains_sampled_points(a in arb_box(), b in arb_box(), seed in any::<u64>()) {
            let u = a.union(&b);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for bx in [a, b] {
                for _ in 0..1000 {
                    let p = [
                        bx.min()[0] + rng.random::<f64>() * bx.extents()[0],
                        bx.min()[1] + rng.random::<f64>() * bx.extents()[1],
                        bx.min()[2] + rng.random::<f64>() * bx.extents()[2],
                    ];
                    prop_assert!(u.contains_point(p));
                }
            }
        }

        #[test]
        fn distance_matches_componentwise(a in prop::array::uniform3(-50.0f64..50.0), b in prop::array::uniform3(-50.0f64..50.0)) {
            let mut sum = 0.0;
            for i in 0..3 {
                sum += (a[i] - b[i]).powi(2);
            }
            prop_assert!((distance(a, b) - sum.sqrt()).abs() < 1e-12);
            prop_assert_eq!(distance(a, b), distance(b, a));
        }
    }
}

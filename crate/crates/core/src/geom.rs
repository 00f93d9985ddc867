//! Minimal 3-vector used by the transport kernel. Units are millimetres.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn normalized(self) -> Vec3 {
        self * (1.0 / self.norm())
    }

    #[inline]
    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn axis(axis: usize, sign: f64) -> Vec3 {
        match axis {
            0 => Vec3::new(sign, 0.0, 0.0),
            1 => Vec3::new(0.0, sign, 0.0),
            _ => Vec3::new(0.0, 0.0, sign),
        }
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Axis-aligned box in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(other.min) && self.contains(other.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn translated(&self, d: Vec3) -> Aabb {
        Aabb::new(self.min + d, self.max + d)
    }

    /// Distance to the exit face from a point inside the box, with the
    /// outward normal of that face.
    #[inline]
    pub fn exit_from_inside(&self, p: Vec3, dir: Vec3) -> (f64, Vec3) {
        let slab = |o: f64, d: f64, lo: f64, hi: f64| {
            if d > 0.0 {
                ((hi - o) / d, 1.0)
            } else if d < 0.0 {
                ((lo - o) / d, -1.0)
            } else {
                (f64::INFINITY, 0.0)
            }
        };
        let (tx, sx) = slab(p.x, dir.x, self.min.x, self.max.x);
        let (ty, sy) = slab(p.y, dir.y, self.min.y, self.max.y);
        let (tz, sz) = slab(p.z, dir.z, self.min.z, self.max.z);
        let (t, n) = if tx <= ty && tx <= tz {
            (tx, Vec3::new(sx, 0.0, 0.0))
        } else if ty <= tz {
            (ty, Vec3::new(0.0, sy, 0.0))
        } else {
            (tz, Vec3::new(0.0, 0.0, sz))
        };
        (t.max(0.0), n)
    }

    /// Nearest face crossing strictly ahead of `p` along `dir`, as
    /// `(distance, outward face normal)`. Works from inside or outside.
    #[inline]
    pub fn next_face(&self, p: Vec3, dir: Vec3, eps: f64) -> Option<(f64, Vec3)> {
        let mut best: Option<(f64, Vec3)> = None;
        for axis in 0..3 {
            let d = dir.component(axis);
            if d == 0.0 {
                continue;
            }
            let o = p.component(axis);
            for (plane, sign) in [
                (self.min.component(axis), -1.0),
                (self.max.component(axis), 1.0),
            ] {
                let t = (plane - o) / d;
                if t <= eps || best.is_some_and(|(bt, _)| t >= bt) {
                    continue;
                }
                let hit = p + dir * t;
                let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                let inside = hit.component(a) >= self.min.component(a) - eps
                    && hit.component(a) <= self.max.component(a) + eps
                    && hit.component(b) >= self.min.component(b) - eps
                    && hit.component(b) <= self.max.component(b) + eps;
                if inside {
                    best = Some((t, Vec3::axis(axis, sign)));
                }
            }
        }
        best
    }
}

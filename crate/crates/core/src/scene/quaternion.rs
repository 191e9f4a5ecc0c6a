use serde::{Deserialize, Serialize};

use crate::{Mat3, Vec3};

/// Drift from unit norm tolerated before renormalizing.
const RENORM_TOLERANCE: f64 = 1e-12;

/// Unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl From<[f64; 4]> for Quaternion {
    fn from(q: [f64; 4]) -> Self {
        Self { w: q[0], x: q[1], y: q[2], z: q[3] }
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        [q.w, q.x, q.y, q.z]
    }
}

impl Quaternion {
    pub const IDENTITY: Self = Self { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Normalizes `(w, x, y, z)`; the zero vector maps to the identity.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Divides by the norm, repeating while the result still drifts.
    pub fn normalized(self) -> Self {
        let mut q = self;
        for _ in 0..3 {
            let n = q.norm();
            if !(n > 0.0) || !n.is_finite() {
                return Self::IDENTITY;
            }
            if (n - 1.0).abs() <= RENORM_TOLERANCE {
                break;
            }
            q = Self { w: q.w / n, x: q.x / n, y: q.y / n, z: q.z / n };
        }
        q
    }

    /// Same rotation with `w >= 0`.
    pub fn canonical(self) -> Self {
        if self.w < 0.0 {
            Self { w: -self.w, x: -self.x, y: -self.y, z: -self.z }
        } else {
            self
        }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let (s, c) = (angle / 2.0).sin_cos();
        let a = axis / n;
        Self::new(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn conjugate(&self) -> Self {
        Self { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * other` (apply `other` first).
    pub fn mul(&self, o: &Self) -> Self {
        Self {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
        .normalized()
    }

    pub fn to_matrix(&self) -> Mat3 {
        let Self { w, x, y, z } = *self;
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.to_matrix() * v
    }

    /// Rotation taking +z onto the unit vector `d`.
    pub fn aligning_z_to(d: &Vec3) -> Self {
        let z = Vec3::z();
        let d = d.normalize();
        let c = z.dot(&d).clamp(-1.0, 1.0);
        if c > 1.0 - 1e-15 {
            return Self::IDENTITY;
        }
        if c < -1.0 + 1e-15 {
            return Self::from_axis_angle(&Vec3::x(), std::f64::consts::PI);
        }
        Self::from_axis_angle(&z.cross(&d), c.acos())
    }
}

/// Intrinsic ZYZ Euler angles in degrees, `Rz(alpha) Ry(beta) Rz(gamma)`,
/// with the sign chosen so that `w >= 0`.
pub fn euler_to_quaternion(alpha: f64, beta: f64, gamma: f64) -> Quaternion {
    let rz = |deg: f64| Quaternion::from_axis_angle(&Vec3::z(), deg.to_radians());
    let ry = Quaternion::from_axis_angle(&Vec3::y(), beta.to_radians());
    rz(alpha).mul(&ry).mul(&rz(gamma)).canonical()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(q: Quaternion, e: [f64; 4]) -> bool {
        let a: [f64; 4] = q.into();
        a.iter().zip(e).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn euler_examples() {
        assert!(close(euler_to_quaternion(0.0, 0.0, 0.0), [1.0, 0.0, 0.0, 0.0]));
        let h = 0.5f64.sqrt();
        assert!(close(euler_to_quaternion(90.0, 0.0, 0.0), [h, 0.0, 0.0, h]));
        assert!(close(euler_to_quaternion(0.0, 180.0, 0.0), [0.0, 0.0, 1.0, 0.0]));
    }

    #[test]
    fn euler_matches_matrix_product() {
        let (a, b, c) = (30.0f64, 60.0f64, 90.0f64);
        let rz = |t: f64| nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), t.to_radians()).into_inner();
        let ry = |t: f64| nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), t.to_radians()).into_inner();
        let expected = rz(a) * ry(b) * rz(c);
        let got = euler_to_quaternion(a, b, c).to_matrix();
        assert!((expected - got).norm() < 1e-12);
    }

    #[test]
    fn alignment() {
        for d in [Vec3::z(), -Vec3::z(), Vec3::new(1.0, 2.0, -0.5).normalize()] {
            let q = Quaternion::aligning_z_to(&d);
            assert!((q.rotate(&Vec3::z()) - d).norm() < 1e-12);
        }
    }

    #[test]
    fn renormalization() {
        let q = Quaternion { w: 2.0, x: 0.0, y: 0.0, z: 0.0 }.normalized();
        assert_eq!(q, Quaternion::IDENTITY);
        assert_eq!(Quaternion { w: 0.0, x: 0.0, y: 0.0, z: 0.0 }.normalized(), Quaternion::IDENTITY);
    }
}

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PosePair {
    pub r_gt: Mat3,
    pub r_pred: Mat3,
    /// In-plane translation in pixels.
    pub t_gt: Vector2<f64>,
    pub t_pred: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseBatch {
    pub pairs: Vec<PosePair>,
}

fn is_rotation(r: &Mat3) -> bool {
    (r.transpose() * r - Mat3::identity()).abs().max() <= 1e-6 && (r.determinant() - 1.0).abs() <= 1e-6
}

impl PoseBatch {
    pub fn new(pairs: Vec<PosePair>) -> Result<Self, MetricsError> {
        for (i, p) in pairs.iter().enumerate() {
            if !is_rotation(&p.r_gt) || !is_rotation(&p.r_pred) {
                return Err(MetricsError::InvalidRotation(i));
            }
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularError {
    /// Mean angle multiplied by `180 / pi`, i.e. degrees.
    pub literal: f64,
    pub radians: f64,
}

/// Angle between two vectors, accurate near 0 and pi.
fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Mean angle between `R_gt v` and `R_pred v` for `v = (0, 0, 1)`.
pub fn angular_error(batch: &PoseBatch) -> AngularError {
    if batch.is_empty() {
        return AngularError { literal: 0.0, radians: 0.0 };
    }
    let v = Vec3::z();
    let total: f64 = batch
        .pairs
        .iter()
        .map(|p| angle_between(&(p.r_gt * v).normalize(), &(p.r_pred * v).normalize()))
        .sum();
    let radians = total / batch.len() as f64;
    AngularError { literal: 180.0 / std::f64::consts::PI * radians, radians }
}

/// Mean of `|R_gt - R_pred|_F^2 / 9 + |T_gt - T_pred|_1 / 2`.
pub fn pose_loss(batch: &PoseBatch) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .pairs
        .iter()
        .map(|p| (p.r_gt - p.r_pred).norm_squared() / 9.0 + (p.t_gt - p.t_pred).abs().sum() / 2.0)
        .sum();
    total / batch.len() as f64
}

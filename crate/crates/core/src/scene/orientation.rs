//! Orientation distributions on SO(3).

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Quaternion;
use crate::Vec3;

/// Default von Mises-Fisher concentration.
pub const DEFAULT_KAPPA: f64 = 10.0;
/// Default tilt bound, `pi / 6`.
pub const DEFAULT_THETA_MAX: f64 = std::f64::consts::FRAC_PI_6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum OrientationMode {
    /// Haar measure.
    #[default]
    Uniform,
    /// Particle z-axis ~ vMF(axis, kappa), uniform spin about it.
    Preferred {
        #[serde(default = "default_axis")]
        axis: [f64; 3],
        #[serde(default = "default_kappa")]
        kappa: f64,
    },
    /// Tilt from +z ~ half-normal with sigma `theta_max / 2`, truncated at
    /// `theta_max`; uniform azimuth and spin.
    LimitedTilt {
        #[serde(default = "default_theta_max")]
        theta_max: f64,
    },
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}

fn default_theta_max() -> f64 {
    DEFAULT_THETA_MAX
}


impl OrientationMode {
    pub fn preferred(kappa: f64) -> Self {
        Self::Preferred { axis: default_axis(), kappa }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            Self::Uniform => Ok(()),
            Self::Preferred { axis, kappa } => {
                let n = Vec3::from(*axis).norm();
                if !(*kappa > 0.0) || !kappa.is_finite() {
                    Err(format!("kappa must be positive, got {kappa}"))
                } else if !(n > 0.0) || !n.is_finite() {
                    Err("preferred axis must be a non-zero vector".into())
                } else {
                    Ok(())
                }
            }
            Self::LimitedTilt { theta_max } => {
                if *theta_max > 0.0 && *theta_max <= std::f64::consts::PI {
                    Ok(())
                } else {
                    Err(format!("theta_max must lie in (0, pi], got {theta_max}"))
                }
            }
        }
    }
}

/// Draws one orientation.
pub fn sample_orientation<R: Rng + ?Sized>(mode: &OrientationMode, rng: &mut R) -> Quaternion {
    match mode {
        OrientationMode::Uniform => loop {
            let g: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-9 {
                return Quaternion::new(g[0], g[1], g[2], g[3]).canonical();
            }
        },
        OrientationMode::Preferred { axis, kappa } => {
            let mu = Vec3::from(*axis).normalize();
            let d = sample_vmf(&mu, *kappa, rng);
            let spin = uniform_spin(rng);
            Quaternion::aligning_z_to(&d).mul(&spin).canonical()
        }
        OrientationMode::LimitedTilt { theta_max } => {
            let sigma = theta_max / 2.0;
            let normal = Normal::new(0.0, sigma).unwrap();
            let tilt = loop {
                let t: f64 = normal.sample(rng);
                let t = t.abs();
                if t <= *theta_max {
                    break t;
                }
            };
            let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
            let rz = Quaternion::from_axis_angle(&Vec3::z(), azimuth);
            let ry = Quaternion::from_axis_angle(&Vec3::y(), tilt);
            rz.mul(&ry).mul(&uniform_spin(rng)).canonical()
        }
    }
}

fn uniform_spin<R: Rng + ?Sized>(rng: &mut R) -> Quaternion {
    Quaternion::from_axis_angle(&Vec3::z(), rng.random_range(0.0..std::f64::consts::TAU))
}

/// Wood's inversion for the vMF distribution on the 2-sphere.
pub fn sample_vmf<R: Rng + ?Sized>(mu: &Vec3, kappa: f64, rng: &mut R) -> Vec3 {
    let u: f64 = rng.random();
    // w = 1 + log(u + (1 - u) e^{-2 kappa}) / kappa, written stably.
    let w = 1.0 + (u + (1.0 - u) * (-2.0 * kappa).exp()).ln() / kappa;
    let w = w.clamp(-1.0, 1.0);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let helper = if mu.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = mu.cross(&helper).normalize();
    let e2 = mu.cross(&e1);
    let r = (1.0 - w * w).max(0.0).sqrt();
    (mu * w + (e1 * phi.cos() + e2 * phi.sin()) * r).normalize()
}

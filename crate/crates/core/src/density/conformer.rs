use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::formats::AtomicModel;
use crate::scene::Quaternion;
use crate::Vec3;

/// Contiguous atom index range `[start, end)` moved as one rigid body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub start: usize,
    pub end: usize,
}

/// Displacement amplitudes (Å) per confidence stratum.
///
/// Strata: static `> 90`, constrained `(70, 90]`, enhanced `(50, 70]`,
/// flexible `<= 50`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConformerParams {
    pub static_amplitude: f64,
    pub constrained_amplitude: f64,
    pub enhanced_amplitude: f64,
    pub flexible_amplitude: f64,
    pub domains: Vec<Domain>,
    pub rigid_rotation_sigma_deg: f64,
    pub rigid_translation_sigma: f64,
}

impl Default for ConformerParams {
    fn default() -> Self {
        Self {
            static_amplitude: 0.0,
            constrained_amplitude: 0.5,
            enhanced_amplitude: 1.5,
            flexible_amplitude: 3.0,
            domains: Vec::new(),
            rigid_rotation_sigma_deg: 5.0,
            rigid_translation_sigma: 2.0,
        }
    }
}

impl ConformerParams {
    /// All displacements disabled.
    pub fn frozen() -> Self {
        Self {
            static_amplitude: 0.0,
            constrained_amplitude: 0.0,
            enhanced_amplitude: 0.0,
            flexible_amplitude: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let ladder = [self.static_amplitude, self.constrained_amplitude, self.enhanced_amplitude, self.flexible_amplitude];
        if ladder.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err("conformer amplitudes must be finite and non-negative".into());
        }
        if ladder.windows(2).any(|w| w[1] < w[0]) {
            return Err("conformer amplitudes must not decrease from static to flexible".into());
        }
        if !(self.rigid_rotation_sigma_deg >= 0.0) || !(self.rigid_translation_sigma >= 0.0) {
            return Err("rigid-body sigmas must be non-negative".into());
        }
        if let Some(d) = self.domains.iter().find(|d| d.start >= d.end) {
            return Err(format!("empty domain {}..{}", d.start, d.end));
        }
        Ok(())
    }

    /// Amplitude for an atom with the given confidence.
    pub fn amplitude(&self, confidence: f64) -> f64 {
        // The static stratum never moves, whatever its amplitude says.
        if confidence > 90.0 {
            0.0
        } else if confidence > 70.0 {
            self.constrained_amplitude
        } else if confidence > 50.0 {
            self.enhanced_amplitude
        } else {
            self.flexible_amplitude
        }
    }
}

/// Jitters atoms by their stratum amplitude, then moves each domain as a
/// rigid body about its centroid. Atom count and order are preserved.
pub fn perturb_conformer<R: Rng + ?Sized>(model: &AtomicModel, params: &ConformerParams, rng: &mut R) -> AtomicModel {
    let mut out = model.clone();
    for atom in out.atoms.iter_mut() {
        let sigma = params.amplitude(atom.confidence);
        if sigma > 0.0 {
            let d = Vec3::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            );
            atom.position += d * sigma;
        }
    }
    let n = out.atoms.len();
    for domain in &params.domains {
        let (start, end) = (domain.start.min(n), domain.end.min(n));
        if start >= end {
            continue;
        }
        let angle = if params.rigid_rotation_sigma_deg > 0.0 {
            Normal::new(0.0, params.rigid_rotation_sigma_deg.to_radians()).unwrap().sample(rng)
        } else {
            0.0
        };
        let axis = random_unit_vector(rng);
        let rotation = Quaternion::from_axis_angle(&axis, angle).to_matrix();
        let shift = if params.rigid_translation_sigma > 0.0 {
            let normal = Normal::new(0.0, params.rigid_translation_sigma).unwrap();
            Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
        } else {
            Vec3::zeros()
        };
        if angle == 0.0 && shift == Vec3::zeros() {
            continue;
        }
        let atoms = &mut out.atoms[start..end];
        let centroid = atoms.iter().map(|a| a.position).sum::<Vec3>() / atoms.len() as f64;
        for a in atoms.iter_mut() {
            a.position = centroid + rotation * (a.position - centroid) + shift;
        }
    }
    out
}

pub(crate) fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::Atom;
    use crate::rng::stream;

    fn model(confidences: &[f64]) -> AtomicModel {
        let atoms = confidences
            .iter()
            .enumerate()
            .map(|(i, &c)| Atom { element: "C".into(), position: Vec3::new(i as f64, 0.0, 0.0), confidence: c, vdw_radius: 1.7 })
            .collect();
        AtomicModel::new("m", atoms).unwrap()
    }

    #[test]
    fn static_atoms_do_not_move() {
        let m = model(&[100.0, 95.0, 90.5]);
        let out = perturb_conformer(&m, &ConformerParams::default(), &mut stream(1, "t", 0));
        assert_eq!(out, m);
    }

    #[test]
    fn mixed_strata_only_move_uncertain_atoms() {
        let m = model(&[95.0, 80.0, 60.0, 10.0]);
        let out = perturb_conformer(&m, &ConformerParams::default(), &mut stream(1, "t", 0));
        assert_eq!(out.atoms[0].position, m.atoms[0].position);
        for i in 1..4 {
            assert_ne!(out.atoms[i].position, m.atoms[i].position);
        }
    }

    #[test]
    fn constrained_stratum_moment() {
        let m = model(&[80.0]);
        let params = ConformerParams::default();
        let mut rng = stream(3, "moment", 0);
        let n = 10_000;
        let mut sum = Vec3::zeros();
        let mut sq = Vec3::zeros();
        for _ in 0..n {
            let d = perturb_conformer(&m, &params, &mut rng).atoms[0].position - m.atoms[0].position;
            sum += d;
            sq += d.component_mul(&d);
        }
        for k in 0..3 {
            let mean = sum[k] / n as f64;
            let std = (sq[k] / n as f64 - mean * mean).sqrt();
            assert!((std - 0.5).abs() < 0.025, "axis {k}: std {std}");
        }
    }

    #[test]
    fn zero_amplitudes_are_identity_and_seed_is_deterministic() {
        let m = model(&[10.0, 20.0, 60.0]);
        let out = perturb_conformer(&m, &ConformerParams::frozen(), &mut stream(9, "t", 0));
        assert_eq!(out, m);
        let p = ConformerParams { domains: vec![Domain { start: 0, end: 2 }], ..ConformerParams::default() };
        let a = perturb_conformer(&m, &p, &mut stream(9, "t", 0));
        let b = perturb_conformer(&m, &p, &mut stream(9, "t", 0));
        assert_eq!(a, b);
        assert_eq!(a.len(), m.len());
    }

    #[test]
    fn rigid_domain_preserves_internal_distances() {
        let m = model(&[100.0, 100.0, 100.0]);
        let p = ConformerParams { domains: vec![Domain { start: 0, end: 3 }], ..ConformerParams::default() };
        let out = perturb_conformer(&m, &p, &mut stream(4, "rigid", 0));
        let d = |mm: &AtomicModel, i: usize, j: usize| (mm.atoms[i].position - mm.atoms[j].position).norm();
        assert!((d(&out, 0, 2) - d(&m, 0, 2)).abs() < 1e-12);
        assert_ne!(out.atoms[0].position, m.atoms[0].position);
    }

    #[test]
    fn validation() {
        assert!(ConformerParams::default().validate().is_ok());
        let bad = ConformerParams { enhanced_amplitude: 0.1, ..ConformerParams::default() };
        assert!(bad.validate().is_err());
    }
}

use serde::{Deserialize, Serialize};

/// Scale-dependent knobs, all linear in the composite scale factor `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub s: f64,
    pub overlap_threshold: f64,
    pub placement_density: f64,
    pub collision_strictness: f64,
    pub mesh_reduction: f64,
}

impl ScaleParams {
    pub const MIN_S: f64 = 0.2;
    pub const MAX_S: f64 = 1.0;

    /// Derives every field from `s`, clamped to `[0.2, 1.0]`.
    pub fn from_scale(s: f64) -> Self {
        let s = s.clamp(Self::MIN_S, Self::MAX_S);
        Self {
            s,
            overlap_threshold: 0.4 - 0.3 * s,
            placement_density: 0.7 + 0.5 * s,
            collision_strictness: 0.5 + 0.5 * s,
            mesh_reduction: 0.7 - 0.7 * s,
        }
    }

    /// Octree depth limit, `4 + round(4 s)`.
    pub fn octree_max_depth(&self) -> usize {
        4 + (4.0 * self.s).round() as usize
    }

    /// Octree leaf capacity, `round(16 - 8 s)`.
    pub fn octree_leaf_capacity(&self) -> usize {
        (16.0 - 8.0 * self.s).round() as usize
    }

    /// Rejection-sampling attempts per particle.
    pub fn retry_budget(&self) -> usize {
        (1000.0 * self.collision_strictness).round() as usize
    }
}

impl Default for ScaleParams {
    fn default() -> Self {
        Self::from_scale(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_scale() {
        let p = ScaleParams::from_scale(1.0);
        assert!((p.overlap_threshold - 0.1).abs() < 1e-15);
        assert!((p.placement_density - 1.2).abs() < 1e-15);
        assert_eq!(p.collision_strictness, 1.0);
        assert_eq!(p.mesh_reduction, 0.0);
        assert_eq!(p.octree_max_depth(), 8);
        assert_eq!(p.octree_leaf_capacity(), 8);
        assert_eq!(p.retry_budget(), 1000);
    }

    #[test]
    fn clamped_range() {
        assert_eq!(ScaleParams::from_scale(0.0).s, 0.2);
        assert_eq!(ScaleParams::from_scale(3.0).s, 1.0);
    }
}

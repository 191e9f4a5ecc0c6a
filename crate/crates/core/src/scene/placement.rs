//! Collision-aware particle placement.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{sample_orientation, OrientationMode, Placement, Source};
use crate::density::random_unit_vector;
use crate::geometry::{Octree, OctreeItem, ScaleParams, TriangleMesh};
use crate::Vec3;

/// Share of cluster draws taken from the primary component.
pub const CLUSTER_PRIMARY_WEIGHT: f64 = 0.7;
/// Probability that a `cluster` rule grows from an existing particle rather
/// than seeding a new cluster.
const CLUSTER_GROWTH_PROBABILITY: f64 = 0.8;
/// Random sequential packing fraction used to bound how many spheres fit.
const PACKING_FRACTION: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum PlacementError {
    #[error("placed {placed} of {requested} requested {structure} particles (short by {})", requested - placed)]
    Capacity { structure: String, requested: usize, placed: usize },
    #[error("invalid placement request: {0}")]
    Invalid(String),
}

/// Axis-aligned scene box in Å.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extents {
    pub lo: Vec3,
    pub hi: Vec3,
}

impl Extents {
    pub fn new(lo: Vec3, hi: Vec3) -> Self {
        Self { lo, hi }
    }

    pub fn size(&self) -> Vec3 {
        self.hi - self.lo
    }

    pub fn center(&self) -> Vec3 {
        (self.lo + self.hi) / 2.0
    }

    pub fn volume(&self) -> f64 {
        self.size().product()
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|a| p[a] >= self.lo[a] && p[a] <= self.hi[a])
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        Vec3::from_fn(|a, _| {
            if self.hi[a] > self.lo[a] {
                rng.random_range(self.lo[a]..self.hi[a])
            } else {
                self.lo[a]
            }
        })
    }
}

/// Biological arrangement rule for one particle class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum ClassRule {
    /// Free dispersion.
    #[default]
    Uniform,
    /// Grow clusters with neighbours at `spacing` Å.
    Cluster { spacing: f64 },
    /// Stay inside context mesh `mesh`.
    Confined { mesh: usize },
    /// Keep centers at least `min_separation` Å apart.
    Separated { min_separation: f64 },
}


impl ClassRule {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Cluster { .. } => "cluster",
            Self::Confined { .. } => "confined",
            Self::Separated { .. } => "separated",
        }
    }

    fn min_separation(&self) -> f64 {
        match self {
            Self::Separated { min_separation } => *min_separation,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum PlacementStrategy {
    /// Rejection sampling over the whole box.
    #[default]
    Uniform,
    /// Two-component Gaussian mixture.
    Cluster,
    /// Jittered lattice.
    Grid,
    /// Within `tolerance` Å of context mesh `mesh`.
    Interface { mesh: usize, tolerance: f64 },
}


#[derive(Debug, Clone, PartialEq)]
pub struct PlacementRequest {
    pub structure_id: String,
    pub count: usize,
    pub radius: f64,
    pub strategy: PlacementStrategy,
    pub rule: ClassRule,
    pub orientation: OrientationMode,
    /// Confidence stamped on every placement.
    pub confidence: f64,
}

/// Minimum center distance for two spheres, `(r_a + r_b)(1 - overlap)`.
pub fn collision_floor(r_a: f64, r_b: f64, overlap_threshold: f64) -> f64 {
    (r_a + r_b) * (1.0 - overlap_threshold)
}

/// Lattice spacing `2 R (1 - overlap / 2)`.
pub fn grid_spacing(radius: f64, overlap_threshold: f64) -> f64 {
    2.0 * radius * (1.0 - overlap_threshold / 2.0)
}

/// Brute-force list of index pairs that violate the collision floor.
pub fn find_collisions(placements: &[Placement], overlap_threshold: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..placements.len() {
        for j in i + 1..placements.len() {
            let (a, b) = (&placements[i], &placements[j]);
            let d = (a.translation - b.translation).norm();
            if d < collision_floor(a.radius, b.radius, overlap_threshold) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Incremental placer; particles of every request share one collision octree.
pub struct Placer<'a> {
    extents: Extents,
    scale: ScaleParams,
    meshes: &'a [TriangleMesh],
    octree: Octree,
    placements: Vec<Placement>,
    separations: Vec<f64>,
    max_separation: f64,
}

impl<'a> Placer<'a> {
    pub fn new(extents: Extents, scale: ScaleParams, meshes: &'a [TriangleMesh]) -> Result<Self, PlacementError> {
        let octree = Octree::for_scale(extents.lo, extents.hi, &scale)
            .map_err(|e| PlacementError::Invalid(e.to_string()))?;
        Ok(Self { extents, scale, meshes, octree, placements: Vec::new(), separations: Vec::new(), max_separation: 0.0 })
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn into_placements(self) -> Vec<Placement> {
        self.placements
    }

    /// Whether a sphere at `center` clears every placed particle.
    pub fn is_free(&self, center: &Vec3, radius: f64, min_separation: f64) -> bool {
        let overlap = self.scale.overlap_threshold;
        // Any violating item lies within reach + r_item, which bounds the search.
        let reach = radius.max(min_separation).max(self.max_separation);
        self.octree.query_near(center, reach).into_iter().all(|id| {
            let other = &self.placements[id];
            let floor = collision_floor(radius, other.radius, overlap).max(min_separation).max(self.separations[id]);
            (other.translation - center).norm() >= floor
        })
    }

    /// Adds a placement, optionally verifying collisions first.
    pub fn push(&mut self, placement: Placement, min_separation: f64) -> Result<bool, PlacementError> {
        if !self.extents.contains(&placement.translation) {
            return Ok(false);
        }
        if !self.is_free(&placement.translation, placement.radius, min_separation) {
            return Ok(false);
        }
        let id = self.placements.len();
        self.octree
            .insert(OctreeItem { id, center: placement.translation, radius: placement.radius })
            .map_err(|e| PlacementError::Invalid(e.to_string()))?;
        self.placements.push(placement);
        self.separations.push(min_separation);
        self.max_separation = self.max_separation.max(min_separation);
        Ok(true)
    }

    fn mesh(&self, index: usize) -> Result<&'a TriangleMesh, PlacementError> {
        self.meshes
            .get(index)
            .filter(|m| !m.is_empty())
            .ok_or_else(|| PlacementError::Invalid(format!("context mesh {index} does not exist")))
    }

    /// Number of spheres of this request's exclusion size that fit the box.
    fn capacity(&self, req: &PlacementRequest, floor: f64) -> usize {
        if let PlacementStrategy::Grid = req.strategy {
            let d = grid_spacing(req.radius, self.scale.overlap_threshold);
            let size = self.extents.size();
            return (0..3).map(|a| ((size[a] / d).floor() as usize).max(1)).product();
        }
        let exclusion = 4.0 / 3.0 * std::f64::consts::PI * (floor / 2.0).powi(3);
        let volume = (0..3).map(|a| self.extents.size()[a].max(floor)).product::<f64>();
        ((PACKING_FRACTION * volume / exclusion).floor() as usize).max(1)
    }

    /// Places `round(count * placement_density)` particles, clamped to capacity.
    ///
    /// Returns the newly placed particles. Fewer than half of the clamped
    /// request is a capacity error; a smaller shortfall is logged.
    pub fn place<R: Rng + ?Sized>(&mut self, req: &PlacementRequest, rng: &mut R) -> Result<Vec<Placement>, PlacementError> {
        if !(req.radius > 0.0) || !req.radius.is_finite() {
            return Err(PlacementError::Invalid(format!("radius must be positive, got {}", req.radius)));
        }
        match &req.rule {
            ClassRule::Cluster { spacing } if !(*spacing > 0.0) => {
                return Err(PlacementError::Invalid("cluster spacing must be positive".into()))
            }
            ClassRule::Separated { min_separation } if !(*min_separation > 0.0) => {
                return Err(PlacementError::Invalid("min_separation must be positive".into()))
            }
            ClassRule::Confined { mesh } => {
                self.mesh(*mesh)?;
            }
            _ => {}
        }
        if let PlacementStrategy::Interface { mesh, tolerance } = &req.strategy {
            self.mesh(*mesh)?;
            if !(*tolerance >= 0.0) {
                return Err(PlacementError::Invalid("interface tolerance must be non-negative".into()));
            }
        }
        req.orientation.validate().map_err(PlacementError::Invalid)?;

        let min_sep = req.rule.min_separation();
        let floor = collision_floor(req.radius, req.radius, self.scale.overlap_threshold).max(min_sep);
        let wanted = (req.count as f64 * self.scale.placement_density).round() as usize;
        let requested = wanted.min(self.capacity(req, floor));
        if requested < wanted {
            log::warn!("{}: clamping {wanted} requested particles to capacity {requested}", req.structure_id);
        }
        let start = self.placements.len();
        let budget = self.scale.retry_budget().max(1);

        match req.strategy {
            PlacementStrategy::Grid => self.place_grid(req, requested, budget, min_sep, rng)?,
            _ => {
                let mixture = self.cluster_mixture(rng);
                for _ in 0..requested {
                    let mut placed = false;
                    for _ in 0..budget {
                        let Some(t) = self.candidate(req, &mixture, start, rng)? else { continue };
                        if self.accepts_rule(req, &t)? && self.is_free(&t, req.radius, min_sep) {
                            let p = self.make(req, t, rng);
                            placed = self.push(p, min_sep)?;
                            if placed {
                                break;
                            }
                        }
                    }
                    if !placed {
                        break;
                    }
                }
            }
        }

        let placed = self.placements.len() - start;
        if placed * 2 < requested {
            return Err(PlacementError::Capacity { structure: req.structure_id.clone(), requested, placed });
        }
        if placed < requested {
            log::warn!("{}: placed {placed} of {requested} particles", req.structure_id);
        }
        Ok(self.placements[start..].to_vec())
    }

    fn make<R: Rng + ?Sized>(&self, req: &PlacementRequest, t: Vec3, rng: &mut R) -> Placement {
        Placement {
            structure_id: req.structure_id.clone(),
            translation: t,
            rotation: sample_orientation(&req.orientation, rng),
            radius: req.radius,
            source: Source::Synthetic,
            confidence: req.confidence,
            class: req.rule.name().into(),
        }
    }

    fn accepts_rule(&self, req: &PlacementRequest, t: &Vec3) -> Result<bool, PlacementError> {
        Ok(match req.rule {
            ClassRule::Confined { mesh } => self.mesh(mesh)?.contains(t),
            _ => true,
        })
    }

    /// Primary and secondary mixture components for the cluster strategy.
    fn cluster_mixture<R: Rng + ?Sized>(&self, rng: &mut R) -> [(Vec3, f64); 2] {
        let sigma_primary = self.extents.size().min() / 6.0;
        [(self.extents.center(), sigma_primary), (self.extents.sample(rng), 0.7 * sigma_primary)]
    }

    fn candidate<R: Rng + ?Sized>(
        &self,
        req: &PlacementRequest,
        mixture: &[(Vec3, f64); 2],
        start: usize,
        rng: &mut R,
    ) -> Result<Option<Vec3>, PlacementError> {
        if let ClassRule::Cluster { spacing } = req.rule {
            let own = &self.placements[start..];
            if !own.is_empty() && rng.random_bool(CLUSTER_GROWTH_PROBABILITY) {
                let anchor = own[rng.random_range(0..own.len())].translation;
                let t = anchor + random_unit_vector(rng) * spacing;
                return Ok(self.extents.contains(&t).then_some(t));
            }
        }
        let t = match &req.strategy {
            PlacementStrategy::Uniform | PlacementStrategy::Grid => self.extents.sample(rng),
            PlacementStrategy::Cluster => {
                let (center, sigma) = if rng.random_bool(CLUSTER_PRIMARY_WEIGHT) { mixture[0] } else { mixture[1] };
                if sigma > 0.0 {
                    let n = Normal::new(0.0, sigma).unwrap();
                    center + Vec3::new(n.sample(rng), n.sample(rng), n.sample(rng))
                } else {
                    center
                }
            }
            PlacementStrategy::Interface { mesh, tolerance } => {
                let mesh = self.mesh(*mesh)?;
                sample_near_surface(mesh, *tolerance, rng)
            }
        };
        Ok(self.extents.contains(&t).then_some(t))
    }

    fn place_grid<R: Rng + ?Sized>(
        &mut self,
        req: &PlacementRequest,
        requested: usize,
        budget: usize,
        min_sep: f64,
        rng: &mut R,
    ) -> Result<(), PlacementError> {
        let d = grid_spacing(req.radius, self.scale.overlap_threshold);
        let size = self.extents.size();
        let counts: Vec<usize> = (0..3).map(|a| ((size[a] / d).floor() as usize).max(1)).collect();
        let mut sites = Vec::with_capacity(counts.iter().product());
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let idx = [i, j, k];
                    sites.push(Vec3::from_fn(|a, _| {
                        // Lattice centered in the box along each axis.
                        let used = (counts[a] - 1) as f64 * d;
                        self.extents.lo[a] + (size[a] - used) / 2.0 + idx[a] as f64 * d
                    }));
                }
            }
        }
        sites.shuffle(rng);
        let tries = budget.min(64);
        let start = self.placements.len();
        for site in sites {
            if self.placements.len() - start >= requested {
                break;
            }
            for _ in 0..tries {
                let jitter = Vec3::from_fn(|_, _| rng.random_range(-d / 4.0..=d / 4.0));
                let t = site + jitter;
                if self.extents.contains(&t) && self.accepts_rule(req, &t)? && self.is_free(&t, req.radius, min_sep) {
                    let p = self.make(req, t, rng);
                    if self.push(p, min_sep)? {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Uniform point on the surface pushed along the face normal by at most
/// `tolerance`.
fn sample_near_surface<R: Rng + ?Sized>(mesh: &TriangleMesh, tolerance: f64, rng: &mut R) -> Vec3 {
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    let mut pick = rng.random_range(0.0..total);
    let mut face = areas.len() - 1;
    for (f, a) in areas.iter().enumerate() {
        if pick < *a {
            face = f;
            break;
        }
        pick -= a;
    }
    let [a, b, c] = mesh.corners(face);
    let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
    if u + v > 1.0 {
        u = 1.0 - u;
        v = 1.0 - v;
    }
    let n = mesh.face_normal(face).normalize();
    let offset = if tolerance > 0.0 { rng.random_range(-tolerance..=tolerance) } else { 0.0 };
    a + (b - a) * u + (c - a) * v + n * offset
}

/// Convenience wrapper placing one request into an empty scene.
pub fn place_particles<R: Rng + ?Sized>(
    req: &PlacementRequest,
    scale: &ScaleParams,
    extents: &Extents,
    meshes: &[TriangleMesh],
    rng: &mut R,
) -> Result<Vec<Placement>, PlacementError> {
    let mut placer = Placer::new(*extents, *scale, meshes)?;
    placer.place(req, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn request(strategy: PlacementStrategy, rule: ClassRule, count: usize, radius: f64) -> PlacementRequest {
        PlacementRequest {
            structure_id: "p".into(),
            count,
            radius,
            strategy,
            rule,
            orientation: OrientationMode::Uniform,
            confidence: 1.0,
        }
    }

    fn cube(side: f64) -> Extents {
        Extents::new(Vec3::zeros(), Vec3::repeat(side))
    }

    /// Scale parameters with overlap 0.1 and density exactly 1.
    fn unit_density() -> ScaleParams {
        ScaleParams { placement_density: 1.0, ..ScaleParams::from_scale(1.0) }
    }

    #[test]
    fn grid_spacing_and_jitter() {
        let d = grid_spacing(20.0, 0.1);
        assert!((d - 38.0).abs() < 1e-12);
        assert!((d / 4.0 - 9.5).abs() < 1e-12);
    }

    #[test]
    fn uniform_respects_floor() {
        let req = request(PlacementStrategy::Uniform, ClassRule::Uniform, 50, 20.0);
        let p = place_particles(&req, &unit_density(), &cube(400.0), &[], &mut stream(1, "u", 0)).unwrap();
        assert_eq!(p.len(), 50);
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                assert!((p[i].translation - p[j].translation).norm() >= 36.0);
            }
        }
    }

    #[test]
    fn density_multiplier_applies() {
        let req = request(PlacementStrategy::Uniform, ClassRule::Uniform, 10, 5.0);
        let p = place_particles(&req, &ScaleParams::from_scale(1.0), &cube(400.0), &[], &mut stream(1, "u", 0)).unwrap();
        assert_eq!(p.len(), 12);
    }

    #[test]
    fn grid_and_cluster_strategies() {
        let scale = unit_density();
        for strategy in [PlacementStrategy::Grid, PlacementStrategy::Cluster] {
            let req = request(strategy.clone(), ClassRule::Uniform, 40, 20.0);
            let p = place_particles(&req, &scale, &cube(600.0), &[], &mut stream(2, "g", 0)).unwrap();
            assert_eq!(p.len(), 40, "{strategy:?}");
            assert!(find_collisions(&p, scale.overlap_threshold).is_empty());
        }
    }

    #[test]
    fn cluster_sigmas() {
        let placer = Placer::new(cube(600.0), ScaleParams::default(), &[]).unwrap();
        let m = placer.cluster_mixture(&mut stream(0, "c", 0));
        assert_eq!(m[0].1, 100.0);
        assert!((m[1].1 - 70.0).abs() < 1e-12);
        assert_eq!(m[0].0, Vec3::repeat(300.0));
    }

    #[test]
    fn separated_rule_raises_floor() {
        let req = request(PlacementStrategy::Uniform, ClassRule::Separated { min_separation: 80.0 }, 20, 10.0);
        let p = place_particles(&req, &unit_density(), &cube(500.0), &[], &mut stream(3, "s", 0)).unwrap();
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                assert!((p[i].translation - p[j].translation).norm() >= 80.0);
            }
        }
    }

    #[test]
    fn cluster_rule_keeps_neighbours_close() {
        let req = request(PlacementStrategy::Uniform, ClassRule::Cluster { spacing: 40.0 }, 30, 15.0);
        let p = place_particles(&req, &unit_density(), &cube(1000.0), &[], &mut stream(4, "c", 0)).unwrap();
        let near = p
            .iter()
            .filter(|a| p.iter().any(|b| ((a.translation - b.translation).norm() - 40.0).abs() < 1e-6))
            .count();
        assert!(near >= p.len() / 2, "{near}");
    }

    #[test]
    fn confined_and_interface() {
        let sphere = TriangleMesh::icosphere(3, 100.0);
        let shifted = TriangleMesh::new(sphere.vertices.iter().map(|v| v + Vec3::repeat(200.0)).collect(), sphere.faces.clone());
        let meshes = vec![shifted];
        let scale = unit_density();
        let req = request(PlacementStrategy::Uniform, ClassRule::Confined { mesh: 0 }, 10, 10.0);
        let p = place_particles(&req, &scale, &cube(400.0), &meshes, &mut stream(5, "conf", 0)).unwrap();
        assert!(p.iter().all(|x| meshes[0].contains(&x.translation)));

        let req = request(PlacementStrategy::Interface { mesh: 0, tolerance: 5.0 }, ClassRule::Uniform, 10, 10.0);
        let p = place_particles(&req, &scale, &cube(400.0), &meshes, &mut stream(5, "iface", 0)).unwrap();
        assert!(p.iter().all(|x| meshes[0].distance_to(&x.translation) <= 5.0 + 1e-9));

        let req = request(PlacementStrategy::Uniform, ClassRule::Confined { mesh: 3 }, 10, 10.0);
        assert!(matches!(place_particles(&req, &scale, &cube(400.0), &meshes, &mut stream(5, "x", 0)), Err(PlacementError::Invalid(_))));
    }

    #[test]
    fn overfull_box_is_capacity_error() {
        // The box holds many particles but the confining sphere only a few.
        let req = request(PlacementStrategy::Uniform, ClassRule::Confined { mesh: 0 }, 50, 25.0);
        let sphere = TriangleMesh::icosphere(2, 30.0);
        let meshes = vec![TriangleMesh::new(sphere.vertices.iter().map(|v| v + Vec3::repeat(50.0)).collect(), sphere.faces.clone())];
        let err = place_particles(&req, &unit_density(), &cube(300.0), &meshes, &mut stream(6, "cap", 0)).unwrap_err();
        assert!(matches!(err, PlacementError::Capacity { .. }), "{err:?}");
    }

    #[test]
    fn deterministic() {
        let req = request(PlacementStrategy::Uniform, ClassRule::Uniform, 30, 12.0);
        let a = place_particles(&req, &unit_density(), &cube(300.0), &[], &mut stream(8, "d", 0)).unwrap();
        let b = place_particles(&req, &unit_density(), &cube(300.0), &[], &mut stream(8, "d", 0)).unwrap();
        assert_eq!(a, b);
    }
}

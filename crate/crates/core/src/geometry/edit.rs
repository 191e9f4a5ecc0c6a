//! Topology-preserving mesh edits: edge collapse and edge flip.
//!
//! Collapses obey the link condition (the two endpoints share exactly the two
//! opposite vertices of the edge's faces), so every operation keeps the mesh a
//! 2-manifold and leaves `V - E + F` unchanged.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use thiserror::Error;

use super::{ScaleParams, TriangleMesh};
use crate::Vec3;

/// Faces with a smaller interior angle are repaired by [`clean_mesh`].
pub const MIN_ANGLE_DEG: f64 = 1.0;
/// Faces with a larger aspect ratio are repaired by [`clean_mesh`].
pub const MAX_ASPECT_RATIO: f64 = 50.0;
/// Reduction factors below this skip decimation.
const DECIMATION_SKIP: f64 = 0.05;
/// Minimum cosine between a face normal before and after an edit.
const MAX_NORMAL_TURN_COS: f64 = 0.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("mesh is not a manifold: {0}")]
    NonManifold(String),
}

/// Fraction of faces removed by decimation, `0.6 (1 - s)`.
pub fn decimation_factor(s: f64) -> f64 {
    0.6 * (1.0 - s)
}

struct EditMesh {
    positions: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    face_alive: Vec<bool>,
    vertex_faces: Vec<Vec<u32>>,
    vertex_alive: Vec<bool>,
    version: Vec<u32>,
    alive_faces: usize,
}

impl EditMesh {
    fn new(mesh: &TriangleMesh) -> Self {
        let mut vertex_faces = vec![Vec::new(); mesh.vertices.len()];
        for (i, f) in mesh.faces.iter().enumerate() {
            for &v in f {
                vertex_faces[v as usize].push(i as u32);
            }
        }
        Self {
            positions: mesh.vertices.clone(),
            faces: mesh.faces.clone(),
            face_alive: vec![true; mesh.faces.len()],
            vertex_alive: vertex_faces.iter().map(|f| !f.is_empty()).collect(),
            version: vec![0; mesh.vertices.len()],
            vertex_faces,
            alive_faces: mesh.faces.len(),
        }
    }

    fn into_mesh(self) -> TriangleMesh {
        let faces = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &alive)| alive)
            .map(|(f, _)| *f)
            .collect();
        let mut mesh = TriangleMesh { vertices: self.positions, faces, normals: Vec::new() };
        mesh.compact();
        mesh
    }

    fn corners(&self, f: u32) -> [Vec3; 3] {
        self.faces[f as usize].map(|v| self.positions[v as usize])
    }

    fn normal(&self, f: u32) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    fn min_angle_deg(&self, f: u32) -> f64 {
        min_angle_deg(&self.corners(f))
    }

    fn is_bad(&self, f: u32) -> bool {
        let p = self.corners(f);
        let area2 = (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        area2 <= 0.0 || min_angle_deg(&p) < MIN_ANGLE_DEG || aspect_ratio(&p) > MAX_ASPECT_RATIO
    }

    fn neighbors(&self, v: u32) -> HashSet<u32> {
        self.vertex_faces[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&w| w != v)
            .collect()
    }

    /// Alive faces containing both `a` and `b`.
    fn edge_faces(&self, a: u32, b: u32) -> Vec<u32> {
        self.vertex_faces[a as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f as usize].contains(&b))
            .collect()
    }

    fn opposite(&self, f: u32, a: u32, b: u32) -> u32 {
        *self.faces[f as usize].iter().find(|&&v| v != a && v != b).unwrap()
    }

    /// Collapses edge `(u, v)` onto `v` placed at `target`.
    fn try_collapse(&mut self, u: u32, v: u32, target: Vec3, min_faces: usize) -> bool {
        if u == v || !self.vertex_alive[u as usize] || !self.vertex_alive[v as usize] {
            return false;
        }
        let shared = self.edge_faces(u, v);
        if shared.len() != 2 || self.alive_faces <= min_faces.max(4) + 2 {
            return false;
        }
        let common: HashSet<u32> = self.neighbors(u).intersection(&self.neighbors(v)).copied().collect();
        let expected: HashSet<u32> = shared.iter().map(|&f| self.opposite(f, u, v)).collect();
        if common != expected || expected.len() != 2 {
            return false;
        }
        // Each surviving face around u or v must keep its orientation and area.
        for &w in &[u, v] {
            for &f in &self.vertex_faces[w as usize] {
                if shared.contains(&f) {
                    continue;
                }
                let before = self.normal(f);
                let after = {
                    let p = self.faces[f as usize]
                        .map(|x| if x == u || x == v { target } else { self.positions[x as usize] });
                    (p[1] - p[0]).cross(&(p[2] - p[0]))
                };
                let (lb, la) = (before.norm(), after.norm());
                if la <= 1e-12 * (1.0 + lb) {
                    return false;
                }
                if lb > 1e-12 && before.dot(&after) <= MAX_NORMAL_TURN_COS * lb * la {
                    return false;
                }
            }
        }
        for &f in &shared {
            self.face_alive[f as usize] = false;
            for &x in &self.faces[f as usize] {
                self.vertex_faces[x as usize].retain(|&g| g != f);
            }
        }
        self.alive_faces -= 2;
        let moved = std::mem::take(&mut self.vertex_faces[u as usize]);
        for &f in &moved {
            for x in self.faces[f as usize].iter_mut() {
                if *x == u {
                    *x = v;
                }
            }
        }
        self.vertex_faces[v as usize].extend(moved);
        self.vertex_alive[u as usize] = false;
        self.positions[v as usize] = target;
        self.version[v as usize] += 1;
        self.version[u as usize] += 1;
        true
    }

    /// Replaces the diagonal `(a, b)` with the opposite diagonal when that
    /// raises the smaller of the two faces' minimum angles.
    fn try_flip(&mut self, a: u32, b: u32) -> bool {
        let shared = self.edge_faces(a, b);
        if shared.len() != 2 {
            return false;
        }
        // Orient so that shared[0] runs a -> b.
        let (f1, f2) = {
            let f = self.faces[shared[0] as usize];
            let k = f.iter().position(|&x| x == a).unwrap();
            if f[(k + 1) % 3] == b {
                (shared[0], shared[1])
            } else {
                (shared[1], shared[0])
            }
        };
        let c = self.opposite(f1, a, b);
        let d = self.opposite(f2, a, b);
        if c == d || self.neighbors(c).contains(&d) {
            return false;
        }
        let new1 = [c, a, d];
        let new2 = [d, b, c];
        let p = |f: [u32; 3]| f.map(|x| self.positions[x as usize]);
        let old_normal = self.normal(f1) + self.normal(f2);
        for f in [new1, new2] {
            let q = p(f);
            let n = (q[1] - q[0]).cross(&(q[2] - q[0]));
            if n.norm() <= 0.0 || n.dot(&old_normal) <= 0.0 {
                return false;
            }
        }
        let before = self.min_angle_deg(f1).min(self.min_angle_deg(f2));
        let after = min_angle_deg(&p(new1)).min(min_angle_deg(&p(new2)));
        if after <= before {
            return false;
        }
        self.faces[f1 as usize] = new1;
        self.faces[f2 as usize] = new2;
        self.vertex_faces[a as usize].retain(|&f| f != f2);
        self.vertex_faces[b as usize].retain(|&f| f != f1);
        self.vertex_faces[c as usize].push(f2);
        self.vertex_faces[d as usize].push(f1);
        for x in [a, b, c, d] {
            self.version[x as usize] += 1;
        }
        true
    }

    /// Tries to repair one bad face. Returns whether anything changed.
    fn repair(&mut self, f: u32) -> bool {
        let tri = self.faces[f as usize];
        let p = self.corners(f);
        let mut edges: Vec<(f64, u32, u32)> =
            (0..3).map(|k| ((p[(k + 1) % 3] - p[k]).norm(), tri[k], tri[(k + 1) % 3])).collect();
        edges.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
        let (_, la, lb) = edges[2];
        // Caps: flipping the long edge removes the obtuse corner.
        if self.try_flip(la, lb) {
            return true;
        }
        for &(_, a, b) in &edges {
            let (pa, pb) = (self.positions[a as usize], self.positions[b as usize]);
            for target in [(pa + pb) / 2.0, pb, pa] {
                let (from, to) = if target == pa { (b, a) } else { (a, b) };
                if self.try_collapse(from, to, target, 0) {
                    return true;
                }
            }
        }
        false
    }
}

fn min_angle_deg(p: &[Vec3; 3]) -> f64 {
    let mut min = f64::INFINITY;
    for k in 0..3 {
        let u = p[(k + 1) % 3] - p[k];
        let v = p[(k + 2) % 3] - p[k];
        let denom = u.norm() * v.norm();
        let angle = if denom > 0.0 { (u.dot(&v) / denom).clamp(-1.0, 1.0).acos() } else { 0.0 };
        min = min.min(angle);
    }
    min.to_degrees()
}

fn aspect_ratio(p: &[Vec3; 3]) -> f64 {
    let l = [(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()];
    let area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
    if area <= 0.0 {
        return f64::INFINITY;
    }
    l.iter().copied().fold(0.0, f64::max) * l.iter().sum::<f64>() / (4.0 * 3f64.sqrt() * area)
}

/// Removes degenerate and badly shaped faces by edge flips and collapses.
///
/// A face is bad when its area is zero, its smallest angle is below
/// [`MIN_ANGLE_DEG`] or its aspect ratio exceeds [`MAX_ASPECT_RATIO`].
pub fn clean_mesh(mesh: &TriangleMesh) -> TriangleMesh {
    if mesh.is_empty() {
        return mesh.clone();
    }
    let mut edit = EditMesh::new(mesh);
    for _pass in 0..8 {
        let bad: Vec<u32> =
            (0..edit.faces.len() as u32).filter(|&f| edit.face_alive[f as usize] && edit.is_bad(f)).collect();
        if bad.is_empty() {
            break;
        }
        let mut changed = false;
        for f in bad {
            if edit.face_alive[f as usize] && edit.is_bad(f) {
                changed |= edit.repair(f);
            }
        }
        if !changed {
            break;
        }
    }
    edit.into_mesh()
}

#[derive(PartialEq)]
struct Candidate {
    length: f64,
    a: u32,
    b: u32,
    versions: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Shortest edge first; ties broken by index for determinism.
        other
            .length
            .partial_cmp(&self.length)
            .unwrap_or(Ordering::Equal)
            .then_with(|| (other.a, other.b).cmp(&(self.a, self.b)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest-edge-first collapse down to `round(F (1 - 0.6 (1 - s)))` faces.
///
/// Skipped entirely when the reduction factor is below 0.05. Edges on an open
/// boundary are never collapsed. Non-manifold input is rejected.
pub fn decimate_mesh(mesh: &TriangleMesh, scale: &ScaleParams) -> Result<TriangleMesh, GeometryError> {
    mesh.check_manifold().map_err(GeometryError::NonManifold)?;
    let factor = decimation_factor(scale.s);
    if factor < DECIMATION_SKIP || mesh.is_empty() {
        return Ok(mesh.clone());
    }
    let target = (mesh.face_count() as f64 * (1.0 - factor)).round() as usize;
    let mut edit = EditMesh::new(mesh);
    let push = |edit: &EditMesh, heap: &mut BinaryHeap<Candidate>, a: u32, b: u32| {
        let length = (edit.positions[a as usize] - edit.positions[b as usize]).norm();
        heap.push(Candidate { length, a, b, versions: (edit.version[a as usize], edit.version[b as usize]) });
    };
    let mut heap = BinaryHeap::new();
    for (a, b) in mesh.edges() {
        push(&edit, &mut heap, a, b);
    }
    while edit.alive_faces > target {
        let Some(c) = heap.pop() else { break };
        if !edit.vertex_alive[c.a as usize]
            || !edit.vertex_alive[c.b as usize]
            || (edit.version[c.a as usize], edit.version[c.b as usize]) != c.versions
        {
            continue;
        }
        let mid = (edit.positions[c.a as usize] + edit.positions[c.b as usize]) / 2.0;
        if edit.try_collapse(c.a, c.b, mid, target.saturating_sub(2)) {
            let ring: Vec<u32> = edit.neighbors(c.b).into_iter().collect();
            let mut ring = ring;
            ring.sort_unstable();
            for w in ring {
                push(&edit, &mut heap, c.b.min(w), c.b.max(w));
            }
        }
    }
    Ok(edit.into_mesh())
}

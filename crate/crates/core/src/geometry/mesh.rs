use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use crate::Vec3;

/// Indexed triangle surface. Faces are counter-clockwise seen from outside.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Vec<Vec3>,
}

impl TriangleMesh {
    /// Builds a mesh with area-weighted vertex normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        let mut mesh = Self { vertices, faces, normals: Vec::new() };
        mesh.recompute_normals();
        mesh
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Unnormalized face normal; its length is twice the area.
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_normal(f).norm()
    }

    /// Sums the area-weighted face normals at each vertex.
    pub fn recompute_normals(&mut self) {
        let mut normals = vec![Vec3::zeros(); self.vertices.len()];
        for f in 0..self.faces.len() {
            let n = self.face_normal(f);
            for &v in &self.faces[f] {
                normals[v as usize] += n;
            }
        }
        for n in normals.iter_mut() {
            let len = n.norm();
            *n = if len > 0.0 { *n / len } else { Vec3::z() };
        }
        self.normals = normals;
    }

    /// Undirected edges, each once with the smaller index first.
    pub fn edges(&self) -> HashSet<(u32, u32)> {
        let mut edges = HashSet::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        edges
    }

    /// `V - E + F`, counting only vertices referenced by a face.
    pub fn euler_characteristic(&self) -> i64 {
        let used: HashSet<u32> = self.faces.iter().flatten().copied().collect();
        used.len() as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Checks that every directed edge appears once and every undirected edge
    /// borders at most two faces with opposite orientation.
    pub fn check_manifold(&self) -> Result<(), String> {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for (i, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&v| v as usize >= self.vertices.len()) {
                return Err(format!("face {i} references a missing vertex"));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(format!("face {i} repeats a vertex"));
            }
            for k in 0..3 {
                if directed.insert((f[k], f[(k + 1) % 3]), i).is_some() {
                    return Err(format!("edge {}-{} is used twice in the same direction", f[k], f[(k + 1) % 3]));
                }
            }
        }
        Ok(())
    }

    /// True when no edge lacks its opposite twin.
    pub fn is_closed(&self) -> bool {
        let directed: HashSet<(u32, u32)> =
            self.faces.iter().flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3]))).collect();
        directed.iter().all(|&(a, b)| directed.contains(&(b, a)))
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.inf(v), hi.sup(v))))
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Smallest interior angle of a face in degrees.
    pub fn min_angle_deg(&self, f: usize) -> f64 {
        let p = self.corners(f);
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

    /// `longest edge * perimeter / (4 sqrt(3) area)`; 1 for equilateral faces.
    pub fn aspect_ratio(&self, f: usize) -> f64 {
        let p = self.corners(f);
        let lengths = [(p[1] - p[0]).norm(), (p[2] - p[1]).norm(), (p[0] - p[2]).norm()];
        let longest = lengths.iter().copied().fold(0.0, f64::max);
        let perimeter: f64 = lengths.iter().sum();
        let area = self.face_area(f);
        if area <= 0.0 {
            return f64::INFINITY;
        }
        longest * perimeter / (4.0 * 3f64.sqrt() * area)
    }

    /// Drops vertices that no face references and renumbers faces.
    pub fn compact(&mut self) {
        let mut map = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        for f in self.faces.iter_mut() {
            for v in f.iter_mut() {
                let slot = &mut map[*v as usize];
                if *slot == u32::MAX {
                    *slot = vertices.len() as u32;
                    vertices.push(self.vertices[*v as usize]);
                }
                *v = *slot;
            }
        }
        self.vertices = vertices;
        self.recompute_normals();
    }

    /// Ray-parity point containment for closed meshes.
    pub fn contains(&self, p: &Vec3) -> bool {
        // Irrational direction so rays rarely graze edges or vertices.
        let dir = Vec3::new(0.5773502691896258, 0.5345224838248488, 0.6172133998483676).normalize();
        let mut hits = 0usize;
        for f in 0..self.faces.len() {
            if ray_hits_triangle(p, &dir, &self.corners(f)) {
                hits += 1;
            }
        }
        hits % 2 == 1
    }

    /// Euclidean distance from `p` to the nearest point on the surface.
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        (0..self.faces.len())
            .map(|f| (closest_point_on_triangle(p, &self.corners(f)) - p).norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Geodesic sphere by repeated 4-to-1 subdivision of an icosahedron.
    pub fn icosphere(subdivisions: usize, radius: f64) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut vertices: Vec<Vec3> = [
            (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
            (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
            (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut faces: Vec<[u32; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
            let mut midpoint = |a: u32, b: u32, vertices: &mut Vec<Vec3>| -> u32 {
                *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    vertices.push(((vertices[a as usize] + vertices[b as usize]) / 2.0).normalize());
                    (vertices.len() - 1) as u32
                })
            };
            let mut next = Vec::with_capacity(faces.len() * 4);
            for [a, b, c] in faces {
                let ab = midpoint(a, b, &mut vertices);
                let bc = midpoint(b, c, &mut vertices);
                let ca = midpoint(c, a, &mut vertices);
                next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            faces = next;
        }
        for v in vertices.iter_mut() {
            *v *= radius;
        }
        Self::new(vertices, faces)
    }

    /// ASCII Wavefront OBJ with vertex normals.
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 64 + self.faces.len() * 32);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for n in &self.normals {
            let _ = writeln!(out, "vn {} {} {}", n.x, n.y, n.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {0}//{0} {1}//{1} {2}//{2}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }
}

fn ray_hits_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> bool {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return false;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    e2.dot(&q) * inv > 0.0
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
pub(crate) fn closest_point_on_triangle(p: &Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

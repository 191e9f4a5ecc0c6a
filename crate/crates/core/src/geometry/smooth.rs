use super::{ScaleParams, TriangleMesh};
use crate::Vec3;

/// Laplacian relaxation factor.
pub const RELAXATION: f64 = 0.2;

/// `round(max(1, 5 s))`.
pub fn smoothing_iterations(s: f64) -> usize {
    (5.0 * s).max(1.0).round() as usize
}

/// Umbrella-operator Laplacian smoothing with simultaneous updates.
///
/// Vertex and face counts are unchanged; normals are recomputed from
/// area-weighted face normals.
pub fn smooth_mesh(mesh: &TriangleMesh, scale: &ScaleParams) -> TriangleMesh {
    let mut out = mesh.clone();
    if mesh.is_empty() {
        return out;
    }
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertices.len()];
    let mut edges: Vec<(u32, u32)> = mesh.edges().into_iter().collect();
    edges.sort_unstable();
    for (a, b) in edges {
        neighbors[a as usize].push(b);
        neighbors[b as usize].push(a);
    }
    for _ in 0..smoothing_iterations(scale.s) {
        let current = out.vertices.clone();
        for (v, ring) in neighbors.iter().enumerate() {
            if ring.is_empty() {
                continue;
            }
            let mean = ring.iter().map(|&w| current[w as usize]).sum::<Vec3>() / ring.len() as f64;
            out.vertices[v] = current[v] + (mean - current[v]) * RELAXATION;
        }
    }
    out.recompute_normals();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_law() {
        assert_eq!(smoothing_iterations(1.0), 5);
        assert_eq!(smoothing_iterations(0.1), 1);
        assert_eq!(smoothing_iterations(0.5), 3);
    }

    #[test]
    fn topology_preserved_and_shrinks() {
        let m = TriangleMesh::icosphere(2, 10.0);
        let s = smooth_mesh(&m, &ScaleParams::from_scale(1.0));
        assert_eq!(s.vertex_count(), m.vertex_count());
        assert_eq!(s.faces, m.faces);
        assert_eq!(s.euler_characteristic(), 2);
        let vol = |m: &TriangleMesh| {
            let (lo, hi) = m.bounding_box().unwrap();
            (hi - lo).product()
        };
        assert!(vol(&s) <= vol(&m));
        for n in &s.normals {
            assert!((n.norm() - 1.0).abs() < 1e-9);
        }
    }
}

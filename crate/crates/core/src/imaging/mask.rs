use super::{Micrograph, Provenance};
use crate::scene::Placement;

/// Binary occupancy: 1 where a pixel center falls inside the projected
/// bounding disk of any placement.
pub fn render_mask(placements: &[Placement], width: usize, height: usize, pixel_size: f64, origin: [f64; 2]) -> Micrograph {
    let mut m = Micrograph::zeros(width, height, pixel_size, origin, Provenance::Mask);
    for p in placements {
        let (cx, cy) = (p.translation.x, p.translation.y);
        let r = p.radius;
        let to_px = |c: f64, o: f64| (c - o) / pixel_size;
        let i_lo = to_px(cx - r, origin[0]).ceil().max(0.0) as usize;
        let i_hi = to_px(cx + r, origin[0]).floor().min(width as f64 - 1.0);
        let j_lo = to_px(cy - r, origin[1]).ceil().max(0.0) as usize;
        let j_hi = to_px(cy + r, origin[1]).floor().min(height as f64 - 1.0);
        if i_hi < 0.0 || j_hi < 0.0 {
            continue;
        }
        for j in j_lo..=j_hi as usize {
            let y = origin[1] + j as f64 * pixel_size - cy;
            for i in i_lo..=i_hi as usize {
                let x = origin[0] + i as f64 * pixel_size - cx;
                if x * x + y * y <= r * r {
                    m.data[j * width + i] = 1.0;
                }
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Quaternion, Source};
    use crate::Vec3;

    fn at(x: f64, y: f64, r: f64) -> Placement {
        Placement {
            structure_id: "a".into(),
            translation: Vec3::new(x, y, 0.0),
            rotation: Quaternion::IDENTITY,
            radius: r,
            source: Source::Synthetic,
            confidence: 1.0,
            class: "uniform".into(),
        }
    }

    #[test]
    fn empty_scene() {
        let m = render_mask(&[], 8, 8, 1.0, [0.0, 0.0]);
        assert!(m.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disk_area() {
        let m = render_mask(&[at(64.0, 64.0, 20.0)], 64, 64, 2.0, [0.0, 0.0]);
        let area: f64 = m.data.iter().sum();
        let expect = std::f64::consts::PI * 100.0;
        assert!((area - expect).abs() < 0.05 * expect, "{area}");
        assert!(m.data.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn clipped_at_border() {
        let m = render_mask(&[at(-5.0, 3.0, 8.0), at(-50.0, -50.0, 4.0)], 10, 10, 1.0, [0.0, 0.0]);
        assert!(m.get(0, 3) == 1.0 && m.get(3, 3) == 1.0 && m.get(4, 3) == 0.0);
    }
}

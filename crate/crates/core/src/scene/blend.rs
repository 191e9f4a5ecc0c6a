//! Confidence-weighted mixing of experimental and synthetic poses.

use rand::Rng;
use thiserror::Error;

use super::Placement;
use crate::geometry::{Octree, OctreeItem, ScaleParams};
use crate::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum BlendError {
    #[error("both placement pools are empty")]
    EmptyPools,
    #[error("experimental weight must lie in [0, 1], got {0}")]
    Weight(f64),
}

/// Weighted sampling order without replacement (Efraimidis-Spirakis keys).
fn draw_order<R: Rng + ?Sized>(pool: &[Placement], rng: &mut R) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = pool
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let u: f64 = rng.random();
            let w = p.confidence.clamp(0.0, 1.0);
            (if w > 0.0 { u.powf(1.0 / w) } else { 0.0 }, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, i)| i).collect()
}

/// Fills up to `slots` positions from the two pools.
///
/// Each slot comes from the experimental pool with probability `w_exp` and
/// from the synthetic pool otherwise; within a pool, members are drawn
/// without replacement with probability proportional to confidence. When
/// the chosen pool is exhausted the other one is used. A draw that collides
/// with an already accepted particle is dropped.
pub fn blend_placements<R: Rng + ?Sized>(
    experimental: &[Placement],
    synthetic: &[Placement],
    w_exp: f64,
    slots: usize,
    overlap_threshold: f64,
    rng: &mut R,
) -> Result<Vec<Placement>, BlendError> {
    if !(0.0..=1.0).contains(&w_exp) {
        return Err(BlendError::Weight(w_exp));
    }
    if experimental.is_empty() && synthetic.is_empty() {
        return Err(BlendError::EmptyPools);
    }
    let pools = [experimental, synthetic];
    let orders = [draw_order(experimental, rng), draw_order(synthetic, rng)];
    let mut next = [0usize; 2];

    let (lo, hi) = experimental.iter().chain(synthetic).fold(
        (Vec3::repeat(f64::INFINITY), Vec3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(&p.translation), hi.sup(&p.translation)),
    );
    let pad = Vec3::repeat(1.0);
    let mut octree = Octree::for_scale(lo - pad, hi + pad, &ScaleParams::default()).expect("finite bounds");
    let mut out = Vec::new();

    for _ in 0..slots {
        let want = if rng.random_bool(w_exp) { 0 } else { 1 };
        let pool = if next[want] < pools[want].len() { want } else { 1 - want };
        if next[pool] >= pools[pool].len() {
            break;
        }
        let p = &pools[pool][orders[pool][next[pool]]];
        next[pool] += 1;
        if octree.any_closer_than(&p.translation, p.radius, 1.0 - overlap_threshold) {
            continue;
        }
        octree
            .insert(OctreeItem { id: out.len(), center: p.translation, radius: p.radius })
            .expect("center inside pooled bounds");
        out.push(p.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::scene::{find_collisions, Quaternion, Source};

    fn pool(n: usize, source: Source, offset: f64) -> Vec<Placement> {
        (0..n)
            .map(|i| Placement {
                structure_id: "a".into(),
                translation: Vec3::new((i % 100) as f64 * 10.0, (i / 100) as f64 * 10.0, offset),
                rotation: Quaternion::IDENTITY,
                radius: 1.0,
                source,
                confidence: 1.0,
                class: "uniform".into(),
            })
            .collect()
    }

    #[test]
    fn extremes() {
        let e = pool(50, Source::Experimental, 0.0);
        let s = pool(50, Source::Synthetic, 100.0);
        let all_exp = blend_placements(&e, &s, 1.0, 30, 0.1, &mut stream(1, "b", 0)).unwrap();
        assert!(all_exp.iter().all(|p| p.source == Source::Experimental));
        let all_syn = blend_placements(&e, &s, 0.0, 30, 0.1, &mut stream(1, "b", 0)).unwrap();
        assert!(all_syn.iter().all(|p| p.source == Source::Synthetic));
        assert_eq!(blend_placements(&[], &[], 0.5, 3, 0.1, &mut stream(1, "b", 0)), Err(BlendError::EmptyPools));
        assert!(blend_placements(&e, &s, 1.5, 3, 0.1, &mut stream(1, "b", 0)).is_err());
    }

    #[test]
    fn half_weight_fraction() {
        let e = pool(10_000, Source::Experimental, 0.0);
        let s = pool(10_000, Source::Synthetic, 100.0);
        let out = blend_placements(&e, &s, 0.5, 10_000, 0.1, &mut stream(2, "b", 0)).unwrap();
        assert_eq!(out.len(), 10_000);
        let frac = out.iter().filter(|p| p.source == Source::Experimental).count() as f64 / out.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn colliding_draws_dropped() {
        let e = pool(20, Source::Experimental, 0.0);
        let s = pool(20, Source::Synthetic, 0.5);
        let out = blend_placements(&e, &s, 0.5, 40, 0.1, &mut stream(3, "b", 0)).unwrap();
        assert!(out.len() <= 20);
        assert!(find_collisions(&out, 0.1).is_empty());
    }

    #[test]
    fn low_confidence_drawn_late() {
        let mut e = pool(2, Source::Experimental, 0.0);
        e[0].confidence = 0.0;
        let out = blend_placements(&e, &[], 1.0, 1, 0.1, &mut stream(4, "b", 0)).unwrap();
        assert_eq!(out[0].translation, e[1].translation);
    }
}

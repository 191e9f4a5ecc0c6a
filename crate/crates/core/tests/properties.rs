//! Randomized invariants across modules.

use proptest::prelude::*;

use cryosim::density::{perturb_conformer, ConformerParams, DensityVolume};
use cryosim::formats::{
    format_atom_record, parse_atomic_model, parse_pick_table, parse_scene_config, read_volume, write_pick_table,
    write_volume, Atom, AtomicModel, PickRecord, VolumeHeader,
};
use cryosim::geometry::{Octree, OctreeItem, ScaleParams};
use cryosim::ice::{generate_ice, IceParams};
use cryosim::imaging::{ctf_filter, project, CtfParams, Micrograph, Provenance};
use cryosim::metrics::{angular_error, auprc, fsc, pose_loss, pr_curve, LabeledPick, Pick, PickMatch, PoseBatch, PosePair};
use cryosim::rng::stream;
use cryosim::scene::{
    euler_to_quaternion, place_particles, ClassRule, Extents, OrientationMode, PlacementRequest, PlacementStrategy,
};
use cryosim::{Mat3, Vec3};

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

fn vec3(range: std::ops::Range<f64>) -> impl Strategy<Value = Vec3> {
    (range.clone(), range.clone(), range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn volume(n: usize, data: Vec<f64>) -> DensityVolume {
    DensityVolume { dims: [n; 3], voxel_size: 1.0, origin: Vec3::zeros(), data }
}

fn rotation() -> impl Strategy<Value = Mat3> {
    (-180.0..180.0f64, 0.0..180.0f64, -180.0..180.0f64).prop_map(|(a, b, g)| euler_to_quaternion(a, b, g).to_matrix())
}

fn rot_z(t: f64) -> Mat3 {
    let (s, c) = t.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn labeled(raw: &[(f64, bool)]) -> Vec<LabeledPick> {
    let mut picks: Vec<LabeledPick> = raw
        .iter()
        .map(|&(confidence, true_positive)| LabeledPick { pick: Pick { x: 0.0, y: 0.0, confidence }, true_positive })
        .collect();
    picks.sort_by(|a, b| b.pick.confidence.total_cmp(&a.pick.confidence));
    picks
}

fn auprc_of(picks: Vec<LabeledPick>, fns: usize, levels: usize) -> f64 {
    let tps = picks.iter().filter(|p| p.true_positive).count();
    let m = PickMatch { picks, false_negatives: fns, ground_truth: tps + fns };
    auprc(&pr_curve(&m, levels)).value
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn mrc_round_trip(
        dims in (1usize..6, 1usize..6, 1usize..6),
        voxel in 0.01f32..50.0,
        origin in prop::array::uniform3(-1e3f32..1e3),
        seed in any::<u64>(),
    ) {
        let n = dims.0 * dims.1 * dims.2;
        let grid: Vec<f32> = (0..n as u64).map(|i| f32::from_bits((seed.wrapping_mul(i + 1) >> 17) as u32 & 0x7f7f_ffff)).collect();
        let header = VolumeHeader::new([dims.0, dims.1, dims.2], voxel, origin);
        let bytes = write_volume(&header, &grid).unwrap();
        let (h, g) = read_volume(&bytes).unwrap();
        prop_assert_eq!(h, header);
        prop_assert!(g.iter().zip(&grid).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn parsers_are_total(bytes in prop::collection::vec(any::<u8>(), 0..2048)) {
        let _ = parse_atomic_model("x", &bytes);
        let _ = parse_pick_table(&bytes);
        let _ = read_volume(&bytes);
        let _ = parse_scene_config(&String::from_utf8_lossy(&bytes), std::path::Path::new("."));
    }

    #[test]
    fn pick_table_order_preserved(rows in prop::collection::vec((0.0..4096.0f64, 0.0..4096.0f64, 0.0..=1.0f64), 0..40)) {
        let picks: Vec<PickRecord> = rows.iter().map(|&(x, y, c)| PickRecord { x, y, euler: None, confidence: c }).collect();
        let parsed = parse_pick_table(write_pick_table(&picks).as_bytes()).unwrap();
        prop_assert_eq!(parsed.len(), picks.len());
        for (a, b) in parsed.iter().zip(&picks) {
            prop_assert!((a.x - b.x).abs() < 1e-6 && (a.y - b.y).abs() < 1e-6);
        }
    }

    #[test]
    fn atom_records_round_trip(pos in vec3(-999.0..999.0), b in 0.0..100.0f64) {
        let atom = Atom { element: "C".into(), position: pos, confidence: b, vdw_radius: 1.7 };
        let m = parse_atomic_model("x", format_atom_record(1, &atom).as_bytes()).unwrap();
        prop_assert!((m.atoms[0].position - pos).amax() <= 5e-4);
    }

    #[test]
    fn octree_matches_brute_force(
        spheres in prop::collection::vec((vec3(0.0..500.0), 0.5..30.0f64), 1..400),
        queries in prop::collection::vec((vec3(-20.0..520.0), 0.0..60.0f64), 1..20),
        s in 0.2..1.0f64,
    ) {
        let items: Vec<OctreeItem> =
            spheres.iter().enumerate().map(|(id, &(center, radius))| OctreeItem { id, center, radius }).collect();
        let tree = Octree::build(&items, Vec3::zeros(), Vec3::repeat(500.0), &ScaleParams::from_scale(s)).unwrap();
        for (c, r) in queries {
            let mut got = tree.query_near(&c, r);
            got.sort_unstable();
            let want: Vec<usize> = items.iter().filter(|it| (it.center - c).norm() <= r + it.radius).map(|it| it.id).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn placements_never_collide(
        radius in 10.0..40.0f64,
        count in 1usize..120,
        s in 0.2..1.0f64,
        kind in 0usize..3,
        seed in any::<u64>(),
    ) {
        let scale = ScaleParams::from_scale(s);
        let strategy = [PlacementStrategy::Uniform, PlacementStrategy::Cluster, PlacementStrategy::Grid][kind].clone();
        let req = PlacementRequest {
            structure_id: "p".into(),
            count,
            radius,
            strategy,
            rule: ClassRule::Uniform,
            orientation: OrientationMode::Uniform,
            confidence: 1.0,
        };
        let extents = Extents::new(Vec3::zeros(), Vec3::repeat(900.0));
        let a = place_particles(&req, &scale, &extents, &[], &mut stream(seed, "p", 0)).unwrap();
        let b = place_particles(&req, &scale, &extents, &[], &mut stream(seed, "p", 0)).unwrap();
        prop_assert_eq!(&a, &b);
        let floor = 2.0 * radius * (1.0 - scale.overlap_threshold);
        for i in 0..a.len() {
            prop_assert!(extents.contains(&a[i].translation));
            prop_assert!((a[i].rotation.norm() - 1.0).abs() <= 1e-9);
            for j in i + 1..a.len() {
                prop_assert!((a[i].translation - a[j].translation).norm() >= floor);
            }
        }
    }

    #[test]
    fn euler_quaternions_are_unit(a in -720.0..720.0f64, b in -720.0..720.0f64, g in -720.0..720.0f64) {
        let q = euler_to_quaternion(a, b, g);
        prop_assert!((q.norm() - 1.0).abs() <= 1e-9);
        prop_assert!(q.w >= 0.0);
    }

    #[test]
    fn scale_laws_clamp(s in -2.0..3.0f64) {
        let p = ScaleParams::from_scale(s);
        let c = s.clamp(0.2, 1.0);
        prop_assert_eq!(p.s, c);
        prop_assert!((p.overlap_threshold - (0.4 - 0.3 * c)).abs() <= 1e-12);
        prop_assert!((p.mesh_reduction - (0.7 - 0.7 * c)).abs() <= 1e-12);
    }

    #[test]
    fn ice_thickness_stays_clamped(seed in any::<u64>(), amp in 0.0..500.0f64) {
        let params = IceParams { base_amplitude: amp, ..IceParams::default() };
        let slab = generate_ice(24, 16, 2.0, &params, &mut stream(seed, "ice", 0));
        prop_assert!(slab.thickness.iter().all(|t| (30.0..=300.0).contains(t)));
        prop_assert!(slab.density.iter().all(|d| *d >= 0.0));
    }

    #[test]
    fn zero_amplitude_conformer_is_identity(pos in prop::collection::vec(vec3(-50.0..50.0), 1..30), seed in any::<u64>()) {
        let atoms: Vec<Atom> = pos
            .into_iter()
            .enumerate()
            .map(|(i, p)| Atom { element: "C".into(), position: p, confidence: (i * 7 % 100) as f64, vdw_radius: 1.7 })
            .collect();
        let model = AtomicModel::new("m", atoms).unwrap();
        let params = ConformerParams {
            static_amplitude: 0.0,
            constrained_amplitude: 0.0,
            enhanced_amplitude: 0.0,
            flexible_amplitude: 0.0,
            ..ConformerParams::default()
        };
        prop_assert_eq!(perturb_conformer(&model, &params, &mut stream(seed, "c", 0)), model.clone());
        let p = ConformerParams::default();
        prop_assert_eq!(
            perturb_conformer(&model, &p, &mut stream(seed, "c", 1)),
            perturb_conformer(&model, &p, &mut stream(seed, "c", 1))
        );
    }

    #[test]
    fn ctf_filter_is_linear(seed in any::<u64>(), alpha in -3.0..3.0f64, defocus in 5e3..3e4f64) {
        use rand::Rng;
        let mut r = stream(seed, "ctf", 0);
        let mut img = || {
            let mut m = Micrograph::zeros(32, 24, 1.5, [0.0, 0.0], Provenance::Clean);
            m.data.iter_mut().for_each(|v| *v = r.random_range(-1.0..1.0));
            m
        };
        let (x, y) = (img(), img());
        let ctf = CtfParams { defocus, ..CtfParams::default() };
        let mut mix = x.clone();
        mix.data.iter_mut().zip(&y.data).for_each(|(m, v)| *m = alpha * *m + v);
        let (fx, fy, fm) = (ctf_filter(&x, &ctf).unwrap(), ctf_filter(&y, &ctf).unwrap(), ctf_filter(&mix, &ctf).unwrap());
        for ((m, a), b) in fm.data.iter().zip(&fx.data).zip(&fy.data) {
            prop_assert!((m - (alpha * a + b)).abs() <= 1e-9);
        }
    }

    #[test]
    fn projection_is_linear_on_dyadic_values(a in prop::collection::vec(-256i32..256, 216), b in prop::collection::vec(-256i32..256, 216)) {
        let va = volume(6, a.iter().map(|&v| v as f64 / 4.0).collect());
        let vb = volume(6, b.iter().map(|&v| v as f64 / 4.0).collect());
        let vs = volume(6, va.data.iter().zip(&vb.data).map(|(x, y)| x + y).collect());
        let all = |v: &DensityVolume| project(v, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let (pa, pb, ps) = (all(&va), all(&vb), all(&vs));
        for ((s, x), y) in ps.data.iter().zip(&pa.data).zip(&pb.data) {
            prop_assert_eq!(*s, x + y);
        }
    }

    #[test]
    fn fsc_symmetric_and_scale_invariant(
        a in prop::collection::vec(-1.0..1.0f64, 512),
        b in prop::collection::vec(-1.0..1.0f64, 512),
        alpha in 0.01..100.0f64,
        beta in 0.01..100.0f64,
    ) {
        let (va, vb) = (volume(8, a), volume(8, b));
        let ab = fsc(&va, &vb).unwrap();
        let ba = fsc(&vb, &va).unwrap();
        prop_assert_eq!(&ab, &ba);
        let scaled = |v: &DensityVolume, k: f64| volume(8, v.data.iter().map(|x| x * k).collect());
        let sc = fsc(&scaled(&va, alpha), &scaled(&vb, beta)).unwrap();
        for (x, y) in ab.shells.iter().zip(&sc.shells) {
            prop_assert!((x.correlation - y.correlation).abs() <= 1e-12);
        }
    }

    #[test]
    fn auprc_bounded_and_monotone(
        raw in prop::collection::vec((0.0..=1.0f64, any::<bool>()), 1..25),
        fns in 0usize..4,
        levels in 1usize..60,
        flip in any::<prop::sample::Index>(),
    ) {
        let picks = labeled(&raw);
        let value = auprc_of(picks.clone(), fns, levels);
        prop_assert!((0.0..=1.0).contains(&value));
        let fps: Vec<usize> = (0..picks.len()).filter(|&i| !picks[i].true_positive).collect();
        if !fps.is_empty() {
            // Relabeling an FP as TP while holding total ground truth fixed.
            let i = fps[flip.index(fps.len())];
            let mut better = picks.clone();
            better[i].true_positive = true;
            if fns > 0 {
                prop_assert!(auprc_of(better, fns - 1, levels) >= value - 1e-12);
            }
        }
    }

    #[test]
    fn angular_error_gauge_invariant(r_gt in rotation(), r_pred in rotation(), t in -3.2..3.2f64) {
        let t0 = nalgebra::Vector2::zeros();
        let base = PoseBatch::new(vec![PosePair { r_gt, r_pred, t_gt: t0, t_pred: t0 }]).unwrap();
        let g = rot_z(t);
        let moved = PoseBatch::new(vec![PosePair { r_gt: r_gt * g, r_pred: r_pred * g, t_gt: t0, t_pred: t0 }]).unwrap();
        prop_assert!((angular_error(&base).radians - angular_error(&moved).radians).abs() <= 1e-9);
    }

    #[test]
    fn pose_loss_nonnegative_and_zero_iff_exact(
        r_gt in rotation(),
        r_pred in rotation(),
        t in (-5.0..5.0f64, -5.0..5.0f64),
    ) {
        let tg = nalgebra::Vector2::new(t.0, t.1);
        let exact = PoseBatch::new(vec![PosePair { r_gt, r_pred: r_gt, t_gt: tg, t_pred: tg }]).unwrap();
        prop_assert_eq!(pose_loss(&exact), 0.0);
        let off = PoseBatch::new(vec![PosePair { r_gt, r_pred, t_gt: tg, t_pred: nalgebra::Vector2::zeros() }]).unwrap();
        let loss = pose_loss(&off);
        prop_assert!(loss >= 0.0);
        if (r_gt - r_pred).norm() > 1e-9 || tg.norm() > 0.0 {
            prop_assert!(loss > 0.0);
        }
    }
}

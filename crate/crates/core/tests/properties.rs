//! Randomized invariants across module boundaries.

use dockaug::cloud::fps_downsample;
use dockaug::format::{decode_demo, encode_demo};
use dockaug::geometry::{compose, inverse, relative_transform, transform_points, PlanarPose, Pose};
use dockaug::harness::{pick_scene, place_scene, scripted_demo, source_dock, ScriptConfig};
use dockaug::parser::{parse, DEFAULT_MIN_SEG_LEN, DEFAULT_THRESHOLD};
use dockaug::planner::{retime, MotionPath, PlannerConfig};
use dockaug::sampler::{dock_frame, sample_docks, SamplerConfig};
use dockaug::demo::ValidationRules;
use dockaug::{Label, PointCloud};
use nalgebra::{Point3, UnitQuaternion, Vector3};
use proptest::prelude::*;

fn pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-2.0f64..2.0), prop::array::uniform3(-3.0f64..3.0)).prop_map(|(t, r)| Pose::new(Vector3::from(t), UnitQuaternion::from_scaled_axis(Vector3::from(r))))
}

fn close(a: &Pose, b: &Pose, tol: f64) -> bool {
    a.approx_eq(b, tol)
}

proptest! {
    #[test]
    fn compose_is_associative(a in pose(), b in pose(), c in pose()) {
        prop_assert!(close(&compose(&compose(&a, &b), &c), &compose(&a, &compose(&b, &c)), 1e-12));
    }

    #[test]
    fn relative_transform_maps_src_to_dst(a in pose(), b in pose()) {
        let d = relative_transform(&a, &b);
        prop_assert!(close(&compose(&a, d.as_pose()), &b, 1e-12));
        prop_assert!(close(&compose(&a, &inverse(&a)), &Pose::identity(), 1e-12));
    }

    #[test]
    fn anchored_transform_is_rigid(a in pose(), b in pose(), pts in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 2..30)) {
        let pc = PointCloud::uniform(pts.iter().map(|p| Point3::from(*p)).collect(), Label::Arm);
        let moved = transform_points(&pc, &relative_transform(&a, &b), &a);
        for i in 0..pc.len() {
            for j in 0..pc.len() {
                let d0 = (pc.points()[i] - pc.points()[j]).norm();
                let d1 = (moved.points()[i] - moved.points()[j]).norm();
                prop_assert!((d0 - d1).abs() <= 1e-12 * (1.0 + d0));
            }
        }
        // a point riding on the anchor frame follows it to the new frame
        let local = Point3::new(0.1, -0.2, 0.05);
        let on_a = PointCloud::uniform(vec![a.transform_point(&local)], Label::Arm);
        let got = transform_points(&on_a, &relative_transform(&a, &b), &a).points()[0];
        prop_assert!((got - b.transform_point(&local)).norm() < 1e-12);
    }

    #[test]
    fn fps_returns_distinct_subset(n in 5usize..80, k in 1usize..80, seed in 0u64..50) {
        let pts: Vec<Point3<f64>> = (0..n).map(|i| Point3::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos(), i as f64 * 0.01)).collect();
        let labels: Vec<Label> = (0..n).map(|i| if i % 3 == 0 { Label::Arm } else { Label::Other }).collect();
        let pc = PointCloud::new(pts, labels).unwrap();
        match fps_downsample(&pc, k, seed) {
            Ok(out) => {
                prop_assert!(k <= n);
                prop_assert_eq!(out.len(), k);
                for (p, l) in out.points().iter().zip(out.labels()) {
                    let i = pc.points().iter().position(|q| q == p).unwrap();
                    prop_assert_eq!(pc.labels()[i], *l);
                }
                let mut seen = out.points().to_vec();
                seen.sort_by(|a, b| a.x.total_cmp(&b.x));
                seen.dedup();
                prop_assert_eq!(seen.len(), k);
                prop_assert_eq!(fps_downsample(&pc, k, seed).unwrap(), out);
            }
            Err(_) => prop_assert!(k > n),
        }
    }

    #[test]
    fn retime_keeps_endpoints_and_spacing(a in pose(), b in pose(), n in 2usize..40) {
        let path = MotionPath { waypoints: dockaug::planner::polyline(&a, &[], &b, &PlannerConfig::default()), segment_index: 0 };
        let out = retime(&path, n);
        prop_assert_eq!(out.len(), n);
        prop_assert_eq!(out[0], a);
        prop_assert_eq!(out[n - 1], b);
        let step = path.arc_length() / (n - 1) as f64;
        for w in out.windows(2) {
            prop_assert!((w[0].translation_distance(&w[1]) - step).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn accepted_docks_respect_ratio_bounds(seed in 0u64..1000, lo in 0.7f64..1.0, width in 0.0f64..0.3, place in any::<bool>()) {
        let scene = if place { place_scene() } else { pick_scene() };
        let src = scripted_demo(&scene, &source_dock(), seed, &ScriptConfig::default()).unwrap().demo;
        let parsed = parse(&src, &scene, DEFAULT_THRESHOLD, DEFAULT_MIN_SEG_LEN).unwrap();
        let cfg = SamplerConfig { seed, range_ratio: (lo, lo + width), n_docks: 2, ..Default::default() };
        let frame = dock_frame(&scene, &src, &parsed).unwrap();
        if let Ok(out) = sample_docks(&scene, &src, &parsed, &cfg, &PlannerConfig::default()) {
            for r in out.accepted.iter().chain(&out.rejected) {
                let d = (r.dock.x - frame.center.x).hypot(r.dock.y - frame.center.y);
                prop_assert!(d >= lo * frame.distance - 1e-9 && d <= (lo + width) * frame.distance + 1e-9);
            }
            prop_assert_eq!(sample_docks(&scene, &src, &parsed, &cfg, &PlannerConfig::default()).unwrap(), out);
        }
    }

    #[test]
    fn encoding_round_trips_quantized_demos(seed in 0u64..100, x in -0.95f64..-0.8, y in -0.1f64..0.1) {
        let scene = pick_scene();
        let d = scripted_demo(&scene, &PlanarPose::new(x, y, 0.0), seed, &ScriptConfig::default()).unwrap().demo;
        let rules = ValidationRules { point_count: Some(1024), binary_gripper: true };
        let enc = encode_demo(&d, &rules);
        let (back, r) = decode_demo(&enc.bytes).unwrap();
        prop_assert_eq!(r, rules);
        let mut want = d.clone();
        for f in &mut want.frames {
            f.cloud = f.cloud.quantized();
        }
        prop_assert_eq!(&back, &want);
        prop_assert_eq!(encode_demo(&back, &rules).bytes, enc.bytes);
    }
}

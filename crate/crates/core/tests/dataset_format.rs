//! The on-disk interface read by downstream tools: manifest fields, frame
//! offsets and the binary record layout, checked with a separate decoder.

use dockaug::augment::{augment_source, BatchConfig};
use dockaug::dataset::{write_dataset, Dataset, DatasetSpec};
use dockaug::demo::{Label, Provenance, ValidationRules};
use dockaug::harness::{pick_scene, scripted_demo, source_dock, ScriptConfig};

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn f64_at(b: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn f32_at(b: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

#[test]
fn manifest_and_records_match_a_hand_decoder() {
    let scene = pick_scene();
    let src = scripted_demo(&scene, &source_dock(), 4, &ScriptConfig::default()).unwrap().demo;
    let res = augment_source(&src, &scene, &BatchConfig::default(), &ValidationRules::default());
    let rules = ValidationRules { point_count: Some(1024), binary_gripper: true };
    let mut demos = vec![(&src, res.parsed.as_ref().map(|p| p.segments.clone()))];
    demos.extend(res.augmented.iter().map(|a| (&a.demo, Some(a.segments.segments.clone()))));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds");
    write_dataset(
        &out,
        &DatasetSpec {
            rules,
            fps_seed: 0,
            config: Some(BatchConfig::default()),
            scenes: std::slice::from_ref(&scene),
            demos,
            failures: vec![],
            stats: None,
        },
    )
    .unwrap();

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["point_count"], 1024);
    assert_eq!(manifest["binary_gripper"], true);
    let table: Vec<(u64, String)> = manifest["label_table"].as_array().unwrap().iter().map(|e| (e["code"].as_u64().unwrap(), e["name"].as_str().unwrap().to_string())).collect();
    assert_eq!(table, vec![(0, "other".into()), (1, "arm".into()), (2, "object:0".into())]);

    let ds = Dataset::open(&out).unwrap();
    for entry in &ds.manifest.demos {
        let bytes = std::fs::read(out.join(&entry.file)).unwrap();
        assert_eq!(&bytes[..8], b"DKAGDEMO");
        assert_eq!(u32_at(&bytes, 16), 1024);
        assert_eq!(u32_at(&bytes, 20) as usize, entry.frames);
        let demo = ds.load(entry).unwrap();
        for (t, &off) in entry.frame_offsets.iter().enumerate() {
            let off = off as usize;
            let f = &demo.frames[t];
            assert_eq!(u32_at(&bytes, off), t as u32);
            assert_eq!(u32_at(&bytes, off + 4), 1024);
            let ee = f.state.ee_pose.position();
            assert_eq!(f64_at(&bytes, off + 8), ee.x);
            let cmd_at = off + 8 + 8 * 7 + 8 + 8 * 7;
            assert_eq!(f64_at(&bytes, cmd_at), f.action.gripper_cmd);
            let pts = cmd_at + 8;
            assert_eq!(f32_at(&bytes, pts) as f64, f.cloud.points()[0].x);
            let labels = pts + 1024 * 12;
            assert_eq!(bytes[labels], f.cloud.labels()[0].code());
            assert_eq!(Label::from_code(bytes[labels + 1023]), f.cloud.labels()[1023]);
        }
        match &demo.provenance {
            Provenance::Source => assert!(entry.segments.as_ref().unwrap().len() == 2),
            Provenance::Augmented { source_id, .. } => assert_eq!(source_id, &src.id),
        }
    }
}

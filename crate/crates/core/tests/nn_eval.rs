//! Nearest-neighbour evaluation: memorization, far-dock negative control and
//! the success table consumed by external tools.

use dockaug::harness::{nn_policy_eval, pick_scene, replay, scripted_demo, source_dock, NnConfig, ScriptConfig, SuccessTable};
use dockaug::PlanarPose;

#[test]
fn training_dock_succeeds_and_far_dock_fails() {
    let s = pick_scene();
    let src = scripted_demo(&s, &source_dock(), 0, &ScriptConfig::default()).unwrap().demo;
    assert!(replay(&s, &src, s.task.as_ref().unwrap()).passed());
    // far dock still inside the feasible sector, well outside the training data
    let far = PlanarPose::new(-0.55, -0.6, 0.83);
    assert!(scripted_demo(&s, &far, 0, &ScriptConfig::default()).is_ok(), "task is achievable from the far dock");
    let t = nn_policy_eval(&[src], &s, &[source_dock(), far], &NnConfig::default()).unwrap();
    assert_eq!(t.success, vec![true, false]);
    assert_eq!(t.rate(), 0.5);
}

#[test]
fn success_table_json_shape() {
    let t = SuccessTable { feature_version: 1, docks: vec![PlanarPose::new(1.0, 2.0, 0.5)], success: vec![true] };
    let v: serde_json::Value = serde_json::to_value(&t).unwrap();
    assert_eq!(v, serde_json::json!({"feature_version": 1, "docks": [{"x": 1.0, "y": 2.0, "yaw": 0.5}], "success": [true]}));
    let back: SuccessTable = serde_json::from_value(v).unwrap();
    assert_eq!(back, t);
}

#[test]
fn evaluation_is_deterministic() {
    let s = pick_scene();
    let src = scripted_demo(&s, &source_dock(), 1, &ScriptConfig::default()).unwrap().demo;
    let docks: Vec<_> = (0..6).map(|i| PlanarPose::new(-0.85 + 0.03 * i as f64, -0.05 * i as f64, 0.1 * i as f64)).collect();
    let a = nn_policy_eval(std::slice::from_ref(&src), &s, &docks, &NnConfig::default()).unwrap();
    let b = nn_policy_eval(&[src], &s, &docks, &NnConfig::default()).unwrap();
    assert_eq!(a, b);
}

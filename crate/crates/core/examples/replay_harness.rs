//! Replaying augmented demos in the kinematic world.

use dockaug::augment::{augment_source, BatchConfig};
use dockaug::demo::ValidationRules;
use dockaug::harness::{place_scene, replay, scripted_demo, source_dock, ScriptConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = place_scene();
    let task = scene.task.clone().expect("bundled scenes carry a task");
    let src = scripted_demo(&scene, &source_dock(), 0, &ScriptConfig::default())?.demo;
    let res = augment_source(&src, &scene, &BatchConfig::default(), &ValidationRules::default());
    for demo in std::iter::once(&src).chain(res.augmented.iter().map(|a| &a.demo)) {
        let r = replay(&scene, demo, &task);
        println!(
            "{:<18} passed {:5}  success {:5}  collisions {}  unreachable {}  visible {:.2}  max step {:.4}  grasps {:?}",
            r.demo_id,
            r.passed(),
            r.task_success,
            r.collisions.len(),
            r.unreachable.len(),
            r.min_visible_fraction,
            r.max_step,
            r.grasp_log.iter().map(|g| (g.frame, g.kind)).collect::<Vec<_>>()
        );
    }
    Ok(())
}

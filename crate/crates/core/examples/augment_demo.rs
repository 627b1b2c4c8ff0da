//! Augmenting one source demo to four new docks.

use dockaug::augment::{augment_source, BatchConfig};
use dockaug::demo::ValidationRules;
use dockaug::harness::{pick_scene, scripted_demo, source_dock, ScriptConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = pick_scene();
    let src = scripted_demo(&scene, &source_dock(), 0, &ScriptConfig::default())?.demo;
    let t = std::time::Instant::now();
    let res = augment_source(&src, &scene, &BatchConfig::default(), &ValidationRules::default());
    let took = t.elapsed();
    if let Some(f) = res.failure {
        return Err(f.into());
    }
    println!("{}: {} frames at {:?}", src.id, src.len(), src.docking);
    for a in &res.augmented {
        let kinds: Vec<_> = a.segments.segments.iter().map(|s| format!("{:?}[{},{})", s.kind, s.start, s.end)).collect();
        println!("  {} at ({:.3}, {:.3}, {:.3}): {} frames {}", a.demo.id, a.demo.docking.x, a.demo.docking.y, a.demo.docking.yaw, a.demo.len(), kinds.join(" "));
    }
    println!("{} attempts, {:?}, {took:.2?}", res.attempts, res.rejections);
    Ok(())
}

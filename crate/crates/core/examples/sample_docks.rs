//! Proposing docking poses and reporting which gate rejects each one.

use dockaug::harness::{place_scene, scripted_demo, source_dock, ScriptConfig};
use dockaug::parser::{parse, DEFAULT_MIN_SEG_LEN, DEFAULT_THRESHOLD};
use dockaug::planner::PlannerConfig;
use dockaug::sampler::{sample_docks, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = place_scene();
    let demo = scripted_demo(&scene, &source_dock(), 0, &ScriptConfig::default())?.demo;
    let parsed = parse(&demo, &scene, DEFAULT_THRESHOLD, DEFAULT_MIN_SEG_LEN)?;
    let cfg = SamplerConfig { seed: 2, ..Default::default() };
    let out = sample_docks(&scene, &demo, &parsed, &cfg, &PlannerConfig::default())?;
    let mut all: Vec<_> = out.accepted.iter().chain(&out.rejected).collect();
    all.sort_by_key(|r| r.attempt);
    for r in all {
        println!(
            "#{:<3} ({:6.3}, {:6.3}, {:6.3})  visible {:.2}  reach margin {:7.3}  collision {:?}  {}",
            r.attempt,
            r.dock.x,
            r.dock.y,
            r.dock.yaw,
            r.visibility.value,
            r.reachability.value,
            r.collision_free.value,
            if r.accepted { "accepted" } else { "rejected" }
        );
    }
    println!("rejections: {:?}", out.histogram);
    Ok(())
}

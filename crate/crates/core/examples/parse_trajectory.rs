//! Splitting scripted demos into motion and skill segments.

use dockaug::harness::{pick_scene, place_scene, scripted_demo, source_dock, ScriptConfig};
use dockaug::parser::{parse, parse_distances, FrameDistance, DEFAULT_MIN_SEG_LEN, DEFAULT_THRESHOLD};
use dockaug::ObjectId;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d: Vec<FrameDistance> = [0.3, 0.2, 0.05, 0.04, 0.5].iter().map(|&distance| FrameDistance { distance, nearest: ObjectId(0) }).collect();
    println!("toy sequence: {:?}", parse_distances(&d, 0.1, 1)?.segments);

    for scene in [pick_scene(), place_scene()] {
        let demo = scripted_demo(&scene, &source_dock(), 0, &ScriptConfig::default())?.demo;
        let parsed = parse(&demo, &scene, DEFAULT_THRESHOLD, DEFAULT_MIN_SEG_LEN)?;
        println!("{} ({} frames)", demo.id, demo.len());
        for s in &parsed.segments {
            println!("  {:?} [{}, {}) {:?}", s.kind, s.start, s.end, s.object);
        }
    }
    Ok(())
}

//! Cropping, farthest point sampling and label clusters on a rendered frame.

use dockaug::cloud::{centroid, crop_aabb, extract_cluster, fps_downsample};
use dockaug::harness::scenes::{background_points, default_crop};
use dockaug::harness::{pick_scene, source_dock, KinematicWorld};
use dockaug::Label;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = pick_scene();
    let world = KinematicWorld::new(&scene, &source_dock());
    let background = background_points(&scene, 1400, 0.65, 11);
    let raw = world.raw_cloud(&background);
    let cropped = crop_aabb(&raw, &default_crop());
    println!("raw {} points, {} after crop", raw.len(), cropped.len());

    let sampled = fps_downsample(&cropped, 1024, 0)?;
    for (label, n) in sampled.label_histogram() {
        println!("  {label:<10} {n}");
    }
    let arm = extract_cluster(&sampled, Label::Arm);
    println!("arm centroid {:?}, ee at {:?}", centroid(&arm)?, world.ee().position());
    Ok(())
}

//! Composing poses and moving a point cluster with the gripper.

use dockaug::geometry::{compose, inverse, planar_to_world, relative_transform, transform_points};
use dockaug::{Label, PlanarPose, PointCloud, Pose};
use nalgebra::{Point3, UnitQuaternion, Vector3};

fn main() {
    let grasp = Pose::new(Vector3::new(0.4, 0.0, 0.8), UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.0));
    let moved = Pose::new(Vector3::new(0.3, 0.2, 0.9), UnitQuaternion::from_euler_angles(std::f64::consts::PI, 0.0, 0.5));

    let delta = relative_transform(&grasp, &moved);
    println!("delta: {:?}", delta.as_pose());
    println!("grasp * delta == moved: {}", compose(&grasp, delta.as_pose()).approx_eq(&moved, 1e-12));
    println!("grasp * grasp^-1 == I: {}", compose(&grasp, &inverse(&grasp)).approx_eq(&Pose::identity(), 1e-12));

    // fingertip points expressed around the grasp pose follow it rigidly
    let tips: Vec<Point3<f64>> = [[0.0, 0.04, 0.02], [0.0, -0.04, 0.02]].iter().map(|p| grasp.transform_point(&Point3::from(*p))).collect();
    let cloud = PointCloud::uniform(tips, Label::Arm);
    let out = transform_points(&cloud, &delta, &grasp);
    for (a, b) in cloud.points().iter().zip(out.points()) {
        println!("{a:?} -> {b:?}");
    }

    let dock = PlanarPose::new(-0.85, 0.0, 0.3);
    println!("base pose for {dock:?}: {:?}", planar_to_world(&dock, 0.0));
}

//! Bundled table-top scenes and their point templates.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cloud::Aabb;
use crate::demo::ObjectId;
use crate::geometry::{PlanarPose, Pose};
use crate::harness::SuccessPredicate;
use crate::scene::{Camera, CollisionShape, Polygon, RobotModel, Scene, SceneObject, Workspace};

pub const TABLE_TOP: f64 = 0.7;
pub const OBJECT_RADIUS: f64 = 0.04;
pub const OBJECT_POINTS: usize = 64;
pub const GRIPPER_POINTS: usize = 128;

pub fn source_dock() -> PlanarPose {
    PlanarPose::new(-0.85, 0.0, 0.0)
}

/// Region kept by the preprocessing crop.
pub fn default_crop() -> Aabb {
    Aabb {
        min: [-1.6, -1.2, 0.65],
        max: [1.0, 1.2, 1.6],
    }
}

/// Gripper points in the end-effector frame: a wrist stub, a palm bar along
/// y and two fingers reaching down to the tool point.
pub fn gripper_template() -> Vec<[f64; 3]> {
    let mut pts = Vec::with_capacity(GRIPPER_POINTS);
    for i in 0..16 {
        pts.push([0.0, 0.0, 0.06 + 0.06 * i as f64 / 15.0]);
    }
    for i in 0..32 {
        pts.push([0.0, -0.03 + 0.06 * i as f64 / 31.0, 0.055]);
    }
    for side in [-1.0, 1.0] {
        for i in 0..40 {
            let x = if i % 2 == 0 { -0.008 } else { 0.008 };
            pts.push([x, side * 0.03, 0.055 * (1.0 - (i / 2) as f64 / 19.0)]);
        }
    }
    debug_assert_eq!(pts.len(), GRIPPER_POINTS);
    pts
}

/// Fibonacci lattice on a sphere.
pub fn sphere_points(center: Vector3<f64>, radius: f64, n: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            let p = center + Vector3::new(r * th.cos(), r * th.sin(), z) * radius;
            [p.x, p.y, p.z]
        })
        .collect()
}

fn ball(id: u8, name: &str, c: [f64; 3]) -> SceneObject {
    let center = Vector3::from(c);
    SceneObject {
        id: ObjectId(id),
        name: name.into(),
        pose: Pose::from_translation(c[0], c[1], c[2]),
        shape: CollisionShape::Sphere { center: c, radius: OBJECT_RADIUS },
        points: sphere_points(center, OBJECT_RADIUS, OBJECT_POINTS),
    }
}

fn table() -> CollisionShape {
    CollisionShape::Box {
        pose: Pose::from_translation(0.1, 0.0, TABLE_TOP / 2.0),
        half_extents: [0.45, 0.5, TABLE_TOP / 2.0],
    }
}

fn post(x: f64, y: f64) -> CollisionShape {
    CollisionShape::Box {
        pose: Pose::from_translation(x, y, TABLE_TOP + 0.15),
        half_extents: [0.025, 0.025, 0.15],
    }
}

fn base_scene(id: &str, objects: Vec<SceneObject>, post_at: (f64, f64), task: SuccessPredicate) -> Scene {
    Scene {
        id: id.into(),
        objects,
        static_shapes: vec![table(), post(post_at.0, post_at.1)],
        floorplan: vec![
            Polygon::rectangle([-0.35, -0.5], [0.55, 0.5]),
            Polygon::rectangle([-1.3, 0.35], [-0.95, 0.8]),
        ],
        camera: Camera::looking_at(Vector3::new(-1.6, -0.9, 1.3), Vector3::new(0.0, 0.0, 0.75), 1.2, 1.0),
        workspace: Workspace {
            r_min: 0.3,
            r_max: 1.0,
            z_min: 0.72,
            z_max: 1.4,
        },
        robot: RobotModel {
            footprint_radius: 0.25,
            body_half_extents: [0.2, 0.2],
            body_height: 1.2,
            mount_height: 0.0,
            home: Pose::from_translation(0.35, 0.0, 1.0),
        },
        clearance: 0.03,
        min_visible_fraction: 0.5,
        task: Some(task),
    }
}

/// One ball on the table, lifted 0.05 m or more.
pub fn pick_scene() -> Scene {
    let c = [0.0, 0.0, TABLE_TOP + OBJECT_RADIUS];
    base_scene(
        "pick",
        vec![ball(0, "ball", c)],
        (-0.25, 0.1),
        SuccessPredicate::PickLift { object: ObjectId(0), dz: 0.05 },
    )
}

pub const PLACE_HEIGHT: f64 = 0.08;

/// A ball carried onto a marker ball.
pub fn place_scene() -> Scene {
    let can = [0.0, 0.1, TABLE_TOP + OBJECT_RADIUS];
    let bowl = [0.05, -0.17, TABLE_TOP + OBJECT_RADIUS];
    let top = bowl[2] + PLACE_HEIGHT;
    base_scene(
        "place",
        vec![ball(0, "can", can), ball(1, "bowl", bowl)],
        (-0.25, -0.12),
        SuccessPredicate::PlaceInto {
            object: ObjectId(0),
            region: Aabb {
                min: [bowl[0] - 0.03, bowl[1] - 0.03, top - 0.03],
                max: [bowl[0] + 0.03, bowl[1] + 0.03, top + 0.03],
            },
        },
    )
}

/// Background points sampled on the visible faces of the static solids:
/// every top face, and side faces above `z_floor`. Boxes are assumed upright.
pub fn background_points(scene: &Scene, count: usize, z_floor: f64, seed: u64) -> Vec<[f64; 3]> {
    // (pose, local face origin, two local edge vectors)
    let mut faces: Vec<(Pose, Vector3<f64>, Vector3<f64>, Vector3<f64>)> = Vec::new();
    for s in &scene.static_shapes {
        let CollisionShape::Box { pose, half_extents: h } = s else { continue };
        let h = Vector3::from(*h);
        faces.push((*pose, Vector3::new(-h.x, -h.y, h.z), Vector3::new(2.0 * h.x, 0.0, 0.0), Vector3::new(0.0, 2.0 * h.y, 0.0)));
        let z_lo = (z_floor - pose.position().z).max(-h.z);
        if z_lo >= h.z {
            continue;
        }
        let dz = Vector3::new(0.0, 0.0, h.z - z_lo);
        for (o, e) in [
            (Vector3::new(-h.x, -h.y, z_lo), Vector3::new(2.0 * h.x, 0.0, 0.0)),
            (Vector3::new(-h.x, h.y, z_lo), Vector3::new(2.0 * h.x, 0.0, 0.0)),
            (Vector3::new(-h.x, -h.y, z_lo), Vector3::new(0.0, 2.0 * h.y, 0.0)),
            (Vector3::new(h.x, -h.y, z_lo), Vector3::new(0.0, 2.0 * h.y, 0.0)),
        ] {
            faces.push((*pose, o, e, dz));
        }
    }
    let areas: Vec<f64> = faces.iter().map(|f| f.2.cross(&f.3).norm()).collect();
    let total: f64 = areas.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut acc = 0.0;
    for (k, f) in faces.iter().enumerate() {
        acc += areas[k];
        let upto = if k + 1 == faces.len() { count } else { ((acc / total) * count as f64).round() as usize };
        while out.len() < upto {
            let (u, v) = (rng.gen::<f64>(), rng.gen::<f64>());
            let p = f.0.transform_point(&Point3::from(f.1 + f.2 * u + f.3 * v));
            out.push([p.x, p.y, p.z]);
        }
    }
    out
}

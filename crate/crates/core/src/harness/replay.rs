//! Replays a demonstration in the kinematic world and re-checks the dock with
//! brute-force procedures that share no code with the sampler's checks:
//! ray marching for visibility, per-pose annulus arithmetic for reach, dense
//! point sampling for clearance and footprint.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::demo::{Demonstration, ObjectId};
use crate::geometry::{PlanarPose, Pose};
use crate::harness::world::{GripEvent, KinematicWorld};
use crate::harness::SuccessPredicate;
use crate::scene::{CollisionShape, Scene, ShapeRef};

/// Samples per replayed step for the clearance sweep.
pub const SWEEP_DENSITY: usize = 10;
/// Ray-march increment, meters.
pub const MARCH_STEP: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    /// Frame whose action caused it, `None` for the parked base.
    pub frame: Option<usize>,
    pub shape: ShapeRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspKind {
    Grasp,
    Release,
    Miss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraspRecord {
    pub frame: usize,
    pub kind: GraspKind,
    pub object: Option<ObjectId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub demo_id: String,
    pub task_success: bool,
    pub collisions: Vec<CollisionEvent>,
    /// Frames whose target lies outside the reach annulus (not executed).
    pub unreachable: Vec<usize>,
    /// Lowest visible fraction over the scene objects at the first frame.
    pub min_visible_fraction: f64,
    pub visible: bool,
    pub max_step: f64,
    pub grasp_log: Vec<GraspRecord>,
}

impl ReplayReport {
    pub fn passed(&self) -> bool {
        self.task_success && self.collisions.is_empty() && self.unreachable.is_empty() && self.visible
    }
}

/// Ray-marched fraction of an object's points seen by the camera with the
/// robot body parked at `dock`.
pub fn oracle_visibility(scene: &Scene, dock: &PlanarPose, target: ObjectId) -> f64 {
    let Some(obj) = scene.object(target) else { return 0.0 };
    let eye = scene.camera.pose.position();
    let body = scene.robot.body_box(dock);
    let solids: Vec<&CollisionShape> = scene
        .objects
        .iter()
        .filter(|o| o.id != target)
        .map(|o| &o.shape)
        .chain(&scene.static_shapes)
        .chain(std::iter::once(&body))
        .collect();
    let cam_inv = scene.camera.pose.isometry().inverse();
    let (th, tv) = ((scene.camera.hfov / 2.0).tan(), (scene.camera.vfov / 2.0).tan());
    let mut seen = 0usize;
    for p in obj.points_world() {
        let q = cam_inv.transform_point(&nalgebra::Point3::from(p));
        if !(q.z > 0.0 && q.x.abs() <= th * q.z && q.y.abs() <= tv * q.z) {
            continue;
        }
        let d = p - eye;
        let len = d.norm();
        let n = (len / MARCH_STEP).ceil() as usize;
        let hidden = (1..n).any(|i| {
            let x = eye + d * (i as f64 / n as f64);
            solids.iter().any(|s| s.signed_distance(&x) < 0.0)
        });
        if !hidden {
            seen += 1;
        }
    }
    seen as f64 / obj.points.len() as f64
}

/// Minimum annulus slack over `poses`, from horizontal radius and height.
pub fn oracle_reach_margin(scene: &Scene, dock: &PlanarPose, poses: &[Pose]) -> f64 {
    let w = &scene.workspace;
    poses
        .iter()
        .map(|p| {
            let v = p.position();
            let r = ((v.x - dock.x).powi(2) + (v.y - dock.y).powi(2)).sqrt();
            [r - w.r_min, w.r_max - r, v.z - w.z_min, w.z_max - v.z].into_iter().fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// First solid within clearance of the densely sampled polyline, ignoring
/// the listed objects.
pub fn oracle_sweep(scene: &Scene, poses: &[Pose], ignore: &[ObjectId], density: usize) -> Option<ShapeRef> {
    let solids: Vec<(ShapeRef, &CollisionShape)> = scene
        .objects
        .iter()
        .filter(|o| !ignore.contains(&o.id))
        .map(|o| (ShapeRef::Object(o.id), &o.shape))
        .chain(scene.static_shapes.iter().enumerate().map(|(i, s)| (ShapeRef::Static(i), s)))
        .collect();
    sweep_hits(&solids, poses, scene.clearance, density)
}

fn sweep_hits(solids: &[(ShapeRef, &CollisionShape)], poses: &[Pose], clearance: f64, density: usize) -> Option<ShapeRef> {
    let hit = |x: &Vector3<f64>| solids.iter().find(|(_, s)| s.signed_distance(x) <= clearance).map(|(r, _)| *r);
    if poses.len() == 1 {
        return hit(&poses[0].position());
    }
    for w in poses.windows(2) {
        let (a, b) = (w[0].position(), w[1].position());
        for i in 0..=density {
            if let Some(r) = hit(&(a + (b - a) * (i as f64 / density as f64))) {
                return Some(r);
            }
        }
    }
    None
}

/// Footprint disk against the floor polygons, by sampling the disk boundary
/// and centre and testing polygon vertices inside the disk.
pub fn oracle_footprint(scene: &Scene, dock: &PlanarPose) -> Option<ShapeRef> {
    let c = Vector2::new(dock.x, dock.y);
    let r = scene.robot.footprint_radius;
    for (i, poly) in scene.floorplan.iter().enumerate() {
        let vertex_in = poly.vertices.iter().any(|v| (Vector2::from(*v) - c).norm() < r);
        let rim_in = (0..720).any(|k| {
            let a = k as f64 * std::f64::consts::TAU / 720.0;
            let p = c + Vector2::new(a.cos(), a.sin()) * (r * 0.999);
            point_in_polygon(&poly.vertices, &p)
        });
        let edge_in = poly.vertices.iter().zip(poly.vertices.iter().cycle().skip(1)).any(|(u, v)| {
            (0..=200).any(|k| {
                let p = Vector2::from(*u).lerp(&Vector2::from(*v), k as f64 / 200.0);
                (p - c).norm() < r
            })
        });
        if vertex_in || rim_in || edge_in || point_in_polygon(&poly.vertices, &c) {
            return Some(ShapeRef::Floor(i));
        }
    }
    None
}

/// Even-odd crossing test.
fn point_in_polygon(v: &[[f64; 2]], p: &Vector2<f64>) -> bool {
    let mut inside = false;
    let n = v.len();
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        if (a[1] > p.y) != (b[1] > p.y) {
            let x = a[0] + (p.y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Steps the world through every action of `demo` from the home pose at the
/// demo's dock.
pub fn replay(scene: &Scene, demo: &Demonstration, task: &SuccessPredicate) -> ReplayReport {
    let dock = demo.docking;
    let mut world = KinematicWorld::new(scene, &dock);
    let statics: Vec<(ShapeRef, &CollisionShape)> = scene.static_shapes.iter().enumerate().map(|(i, s)| (ShapeRef::Static(i), s)).collect();
    let mut report = ReplayReport {
        demo_id: demo.id.clone(),
        task_success: false,
        collisions: Vec::new(),
        unreachable: Vec::new(),
        min_visible_fraction: 1.0,
        visible: true,
        max_step: 0.0,
        grasp_log: Vec::new(),
    };
    if let Some(shape) = oracle_footprint(scene, &dock) {
        report.collisions.push(CollisionEvent { frame: None, shape });
    }
    for o in &scene.objects {
        let f = oracle_visibility(scene, &dock, o.id);
        report.min_visible_fraction = report.min_visible_fraction.min(f);
    }
    report.visible = report.min_visible_fraction >= scene.min_visible_fraction;

    for (t, frame) in demo.frames.iter().enumerate() {
        let target = frame.action.target_pose;
        let reachable = oracle_reach_margin(scene, &dock, &[target]) > 0.0;
        let event = if reachable {
            let from = *world.ee();
            report.max_step = report.max_step.max(from.translation_distance(&target));
            if let Some(shape) = sweep_hits(&statics, &[from, target], scene.clearance, SWEEP_DENSITY) {
                report.collisions.push(CollisionEvent { frame: Some(t), shape });
            }
            world.step(Some(&target), frame.action.gripper_cmd)
        } else {
            report.unreachable.push(t);
            world.step(None, frame.action.gripper_cmd)
        };
        if let Some(e) = event {
            let (kind, object) = match e {
                GripEvent::Grasp(id) => (GraspKind::Grasp, Some(id)),
                GripEvent::Release(id) => (GraspKind::Release, Some(id)),
                GripEvent::Miss => (GraspKind::Miss, None),
            };
            report.grasp_log.push(GraspRecord { frame: t, kind, object });
        }
    }
    report.task_success = task.satisfied(&world);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenes::{pick_scene, source_dock};
    use crate::harness::scripted::{scripted_demo, ScriptConfig};
    use crate::sampler::check_visibility;
    use crate::scene::Polygon;

    #[test]
    fn source_replays_cleanly_and_deterministically() {
        let s = pick_scene();
        let d = scripted_demo(&s, &source_dock(), 3, &ScriptConfig::default()).unwrap().demo;
        let task = s.task.clone().unwrap();
        let r = replay(&s, &d, &task);
        assert!(r.passed(), "{r:?}");
        assert_eq!(r.grasp_log.len(), 1);
        assert_eq!(r, replay(&s, &d, &task));
    }

    #[test]
    fn ray_march_agrees_with_slab_visibility() {
        let s = pick_scene();
        for (x, y) in [(-0.85, 0.0), (-0.9, -0.35), (-0.7, -0.45), (-1.0, -0.5)] {
            let dock = PlanarPose::new(x, y, 0.0);
            let a = oracle_visibility(&s, &dock, ObjectId(0));
            let b = check_visibility(&s, &dock, ObjectId(0), 0.5).value;
            assert!((a - b).abs() <= 2.0 / 64.0, "dock ({x},{y}): {a} vs {b}");
        }
    }

    #[test]
    fn footprint_oracle_matches_geometry() {
        let mut s = pick_scene();
        s.floorplan = vec![Polygon::rectangle([0.0, 0.0], [1.0, 1.0])];
        assert!(oracle_footprint(&s, &PlanarPose::new(1.2, 0.5, 0.0)).is_some());
        assert!(oracle_footprint(&s, &PlanarPose::new(1.3, 0.5, 0.0)).is_none());
        assert!(oracle_footprint(&s, &PlanarPose::new(0.5, 0.5, 0.0)).is_some());
        assert!(oracle_footprint(&s, &PlanarPose::new(1.15, 1.15, 0.0)).is_some());
    }
}

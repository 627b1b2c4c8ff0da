use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use crate::cloud::{canonical_order, crop_aabb, fps_downsample, Aabb, CloudOpError};
use crate::demo::{Action, Label, ObjectId, PointCloud};
use crate::geometry::{compose, inverse, PlanarPose, Pose};
use crate::harness::scenes::gripper_template;
use crate::scene::Scene;

pub const GRASP_RADIUS: f64 = 0.05;

/// What happened to the gripper during one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GripEvent {
    Grasp(ObjectId),
    /// Close command with nothing in reach.
    Miss,
    Release(ObjectId),
}

#[derive(Clone, Debug)]
pub struct KinematicWorld {
    scene: Scene,
    ee: Pose,
    gripper: f64,
    /// Held object and its pose in the gripper frame.
    held: Option<(ObjectId, Pose)>,
    objects: BTreeMap<ObjectId, Pose>,
    centroids: BTreeMap<ObjectId, Vector3<f64>>,
    pub grasp_radius: f64,
}

impl KinematicWorld {
    /// Objects at rest, gripper open, arm at home for a base at `dock`.
    pub fn new(scene: &Scene, dock: &PlanarPose) -> Self {
        let objects = scene.objects.iter().map(|o| (o.id, o.pose)).collect();
        let centroids = scene
            .objects
            .iter()
            .map(|o| {
                let sum: Vector3<f64> = o.points_world().sum();
                (o.id, sum / o.points.len() as f64)
            })
            .collect();
        Self {
            ee: scene.home_at(dock),
            scene: scene.clone(),
            gripper: 0.0,
            held: None,
            objects,
            centroids,
            grasp_radius: GRASP_RADIUS,
        }
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn ee(&self) -> &Pose {
        &self.ee
    }

    pub fn gripper(&self) -> f64 {
        self.gripper
    }

    pub fn held(&self) -> Option<ObjectId> {
        self.held.map(|(id, _)| id)
    }

    pub fn object_pose(&self, id: ObjectId) -> Pose {
        self.objects[&id]
    }

    /// Rigid motion of an object since the start.
    pub fn object_motion(&self, id: ObjectId) -> Pose {
        let init = self.scene.object(id).expect("object in scene").pose;
        compose(&self.objects[&id], &inverse(&init))
    }

    pub fn initial_centroid(&self, id: ObjectId) -> Vector3<f64> {
        self.centroids[&id]
    }

    pub fn object_centroid(&self, id: ObjectId) -> Vector3<f64> {
        self.object_motion(id).transform_point(&Point3::from(self.centroids[&id])).coords
    }

    /// Moves the end-effector to `target` (or leaves it when `None`), then
    /// applies the gripper command.
    pub fn step(&mut self, target: Option<&Pose>, gripper_cmd: f64) -> Option<GripEvent> {
        if let Some(t) = target {
            self.ee = *t;
            if let Some((id, offset)) = self.held {
                self.objects.insert(id, compose(&self.ee, &offset));
            }
        }
        let closing = gripper_cmd > 0.5 && self.gripper <= 0.5;
        let opening = gripper_cmd <= 0.5 && self.gripper > 0.5;
        self.gripper = gripper_cmd;
        if closing {
            let p = self.ee.position();
            let nearest = self
                .centroids
                .keys()
                .map(|id| (*id, (self.object_centroid(*id) - p).norm()))
                .filter(|(_, d)| *d <= self.grasp_radius)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            return Some(match nearest {
                Some((id, _)) => {
                    self.held = Some((id, compose(&inverse(&self.ee), &self.objects[&id])));
                    GripEvent::Grasp(id)
                }
                None => GripEvent::Miss,
            });
        }
        if opening {
            if let Some((id, _)) = self.held.take() {
                return Some(GripEvent::Release(id));
            }
        }
        None
    }

    pub fn apply(&mut self, action: &Action) -> Option<GripEvent> {
        self.step(Some(&action.target_pose), action.gripper_cmd)
    }

    /// Every labeled point of the current state before cropping: gripper
    /// template at the end-effector, objects at their current poses, then
    /// the fixed background.
    pub fn raw_cloud(&self, background: &[[f64; 3]]) -> PointCloud {
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for p in gripper_template() {
            pts.push(self.ee.transform_point(&Point3::from(p)));
            labels.push(Label::Arm);
        }
        for o in &self.scene.objects {
            let m = self.object_motion(o.id);
            for p in &o.points {
                pts.push(m.transform_point(&Point3::from(*p)));
                labels.push(Label::Object(o.id));
            }
        }
        for p in background {
            pts.push(Point3::from(*p));
            labels.push(Label::Other);
        }
        PointCloud::new(pts, labels).expect("equal lengths by construction")
    }

    /// Crop, farthest-point downsample, canonical label order.
    pub fn observe(&self, background: &[[f64; 3]], crop: &Aabb, points: usize, fps_seed: u64) -> Result<PointCloud, CloudOpError> {
        let cropped = crop_aabb(&self.raw_cloud(background), crop);
        Ok(canonical_order(&fps_downsample(&cropped, points, fps_seed)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenes::{pick_scene, source_dock};

    #[test]
    fn grasp_only_within_radius() {
        let scene = pick_scene();
        let mut w = KinematicWorld::new(&scene, &source_dock());
        let id = scene.objects[0].id;
        let c = w.object_centroid(id);
        let far = w.ee().with_position(c + Vector3::new(0.0, 0.0, 0.06));
        assert_eq!(w.step(Some(&far), 1.0), Some(GripEvent::Miss));
        assert_eq!(w.held(), None);
        w.step(None, 0.0);
        let near = w.ee().with_position(c + Vector3::new(0.0, 0.0, 0.02));
        assert_eq!(w.step(Some(&near), 1.0), Some(GripEvent::Grasp(id)));
        let up = near.with_position(near.position() + Vector3::new(0.0, 0.0, 0.1));
        w.step(Some(&up), 1.0);
        assert!((w.object_centroid(id) - (c + Vector3::new(0.0, 0.0, 0.1))).norm() < 1e-12);
        assert_eq!(w.step(None, 0.0), Some(GripEvent::Release(id)));
        w.step(Some(&near), 0.0);
        assert!((w.object_centroid(id).z - c.z - 0.1).abs() < 1e-12);
    }
}

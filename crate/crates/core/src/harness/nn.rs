//! One-nearest-neighbour policy over training frames.
//!
//! Feature layout (weights applied before the Euclidean distance):
//! previous commanded position ×1.0, observed end-effector position ×0.5,
//! gripper ×0.1, arm-cluster centroid ×0.5, then every object centroid in
//! ascending id order ×0.5.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{centroid, extract_cluster};
use crate::demo::{Action, Demonstration, Label, ObjectId};
use crate::geometry::PlanarPose;
use crate::harness::scenes::gripper_template;
use crate::harness::world::KinematicWorld;
use crate::scene::Scene;

pub const FEATURE_VERSION: u32 = 1;
pub const W_PREV_ACTION: f64 = 1.0;
pub const W_EE: f64 = 0.5;
pub const W_GRIPPER: f64 = 0.1;
pub const W_ARM: f64 = 0.5;
pub const W_OBJECT: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("empty training set")]
    Empty,
    #[error("training demo `{demo}` frame {frame}: missing arm or object {object:?} points")]
    Features { demo: String, frame: usize, object: Option<ObjectId> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnConfig {
    /// Farthest commanded move the arm will follow in one step.
    pub tracking_limit: f64,
    /// Rollout length as a multiple of the longest training demo.
    pub horizon_factor: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            tracking_limit: 0.06,
            horizon_factor: 1.5,
        }
    }
}

fn push3(f: &mut Vec<f64>, v: &Vector3<f64>, w: f64) {
    f.extend([v.x * w, v.y * w, v.z * w]);
}

pub fn feature(prev: &Vector3<f64>, ee: &Vector3<f64>, gripper: f64, arm: &Vector3<f64>, objects: &[Vector3<f64>]) -> Vec<f64> {
    let mut f = Vec::with_capacity(10 + 3 * objects.len());
    push3(&mut f, prev, W_PREV_ACTION);
    push3(&mut f, ee, W_EE);
    f.push(gripper * W_GRIPPER);
    push3(&mut f, arm, W_ARM);
    for o in objects {
        push3(&mut f, o, W_OBJECT);
    }
    f
}

#[derive(Clone, Debug)]
pub struct NnPolicy {
    objects: Vec<ObjectId>,
    features: Vec<Vec<f64>>,
    actions: Vec<Action>,
    /// Index of the following frame of the same demo.
    next: Vec<Option<usize>>,
    max_len: usize,
}

impl NnPolicy {
    /// Indexes every frame of every demo, in order.
    pub fn fit(train: &[Demonstration], objects: &[ObjectId]) -> Result<Self, NnError> {
        if train.iter().all(|d| d.is_empty()) {
            return Err(NnError::Empty);
        }
        let mut p = Self {
            objects: objects.to_vec(),
            features: Vec::new(),
            actions: Vec::new(),
            next: Vec::new(),
            max_len: 0,
        };
        for d in train {
            p.max_len = p.max_len.max(d.len());
            for (t, fr) in d.frames.iter().enumerate() {
                let err = |object| NnError::Features { demo: d.id.clone(), frame: t, object };
                let prev = if t == 0 { fr.state.ee_pose.position() } else { d.frames[t - 1].action.target_pose.position() };
                let arm = centroid(&extract_cluster(&fr.cloud, Label::Arm)).map_err(|_| err(None))?;
                let objs = objects
                    .iter()
                    .map(|id| centroid(&extract_cluster(&fr.cloud, Label::Object(*id))).map_err(|_| err(Some(*id))))
                    .collect::<Result<Vec<_>, _>>()?;
                p.features.push(feature(&prev, &fr.state.ee_pose.position(), fr.state.gripper, &arm, &objs));
                p.actions.push(fr.action);
                p.next.push((t + 1 < d.len()).then_some(p.actions.len()));
            }
        }
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Nearest training frame; the lowest index wins ties.
    pub fn nearest(&self, f: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, g) in self.features.iter().enumerate() {
            let d: f64 = g.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    fn observe(&self, world: &KinematicWorld, prev: &Vector3<f64>, arm_offset: &Vector3<f64>) -> Vec<f64> {
        let ee = world.ee();
        let arm = ee.transform_point(&Point3::from(*arm_offset)).coords;
        let objs: Vec<Vector3<f64>> = self.objects.iter().map(|id| world.object_centroid(*id)).collect();
        feature(prev, &ee.position(), world.gripper(), &arm, &objs)
    }

    fn is_noop(&self, world: &KinematicWorld, i: usize) -> bool {
        let a = &self.actions[i];
        world.ee().approx_eq(&a.target_pose, 1e-12) && a.gripper_cmd == world.gripper()
    }

    /// Closed-loop rollout from the home pose at `dock`; true on task success.
    pub fn rollout(&self, scene: &Scene, dock: &PlanarPose, cfg: &NnConfig) -> bool {
        let Some(task) = scene.task.as_ref() else { return false };
        let mut world = KinematicWorld::new(scene, dock);
        let tpl = gripper_template();
        let arm_offset = tpl.iter().map(|p| Vector3::from(*p)).sum::<Vector3<f64>>() / tpl.len() as f64;
        let mut prev = world.ee().position();
        let horizon = (self.max_len as f64 * cfg.horizon_factor).ceil() as usize;
        for _ in 0..horizon {
            let f = self.observe(&world, &prev, &arm_offset);
            // Dwell frames alias each other: a matched no-op would repeat
            // forever, so continue along the matched demo instead.
            let mut i = self.nearest(&f);
            while self.is_noop(&world, i) {
                match self.next[i] {
                    Some(j) => i = j,
                    None => break,
                }
            }
            let a = self.actions[i];
            let target = a.target_pose;
            let follows = world.ee().translation_distance(&target) <= cfg.tracking_limit && scene.workspace.margin(dock, &target.position()) > 0.0;
            world.step(follows.then_some(&target), a.gripper_cmd);
            if follows {
                prev = target.position();
            }
        }
        task.satisfied(&world)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuccessTable {
    pub feature_version: u32,
    pub docks: Vec<PlanarPose>,
    pub success: Vec<bool>,
}

impl SuccessTable {
    pub fn rate(&self) -> f64 {
        if self.success.is_empty() {
            return 0.0;
        }
        self.success.iter().filter(|s| **s).count() as f64 / self.success.len() as f64
    }
}

/// Fits the policy on `train` and rolls it out once from every test dock.
pub fn nn_policy_eval(train: &[Demonstration], scene: &Scene, test_docks: &[PlanarPose], cfg: &NnConfig) -> Result<SuccessTable, NnError> {
    let objects: Vec<ObjectId> = scene.objects.iter().map(|o| o.id).collect();
    let policy = NnPolicy::fit(train, &objects)?;
    let success = test_docks.par_iter().map(|d| policy.rollout(scene, d, cfg)).collect();
    Ok(SuccessTable {
        feature_version: FEATURE_VERSION,
        docks: test_docks.to_vec(),
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenes::{pick_scene, source_dock};
    use crate::harness::scripted::{scripted_demo, ScriptConfig};

    #[test]
    fn memorized_dock_succeeds() {
        let s = pick_scene();
        let d = scripted_demo(&s, &source_dock(), 0, &ScriptConfig::default()).unwrap().demo;
        let t = nn_policy_eval(&[d], &s, &[source_dock()], &NnConfig::default()).unwrap();
        assert_eq!(t.success, vec![true]);
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let s = pick_scene();
        assert_eq!(nn_policy_eval(&[], &s, &[source_dock()], &NnConfig::default()).unwrap_err(), NnError::Empty);
    }

    #[test]
    fn ties_resolve_to_lowest_index() {
        let p = NnPolicy {
            objects: vec![],
            features: vec![vec![1.0], vec![-1.0], vec![1.0]],
            actions: vec![Action { target_pose: Default::default(), gripper_cmd: 0.0 }; 3],
            next: vec![Some(1), Some(2), None],
            max_len: 1,
        };
        assert_eq!(p.nearest(&[0.0]), 0);
        assert_eq!(p.nearest(&[1.0]), 0);
        assert_eq!(p.nearest(&[-0.9]), 1);
    }
}

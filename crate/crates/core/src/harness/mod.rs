//! Desk-scale kinematic world: scripted source demonstrations, replay with
//! independent constraint checks, and a nearest-neighbour policy probe.
//!
//! The world is purely kinematic. A held object follows the gripper rigidly,
//! nothing falls, nothing slips. It checks geometric and logical consistency
//! of generated data, not physical plausibility.

pub mod nn;
pub mod replay;
pub mod scenes;
pub mod scripted;
pub mod world;

use serde::{Deserialize, Serialize};

use crate::cloud::Aabb;
use crate::demo::ObjectId;
use crate::geometry::Pose;

pub use nn::{nn_policy_eval, NnConfig, NnError, NnPolicy, SuccessTable};
pub use replay::{replay, ReplayReport};
pub use scenes::{pick_scene, place_scene, source_dock};
pub use scripted::{scripted_demo, Phase, ScriptConfig, ScriptError, Scripted};
pub use world::KinematicWorld;

/// Task success condition evaluated on the final world state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuccessPredicate {
    /// Object raised by at least `dz` and held.
    PickLift { object: ObjectId, dz: f64 },
    /// Object centroid inside `region` and released.
    PlaceInto { object: ObjectId, region: Aabb },
    /// End-effector within `tol` meters of `pose`.
    ReachPose { pose: Pose, tol: f64 },
}

impl SuccessPredicate {
    pub fn is_valid(&self) -> bool {
        match self {
            SuccessPredicate::PickLift { dz, .. } => *dz > 0.0,
            SuccessPredicate::PlaceInto { region, .. } => (0..3).all(|i| region.max[i] > region.min[i]),
            SuccessPredicate::ReachPose { tol, .. } => *tol > 0.0,
        }
    }

    pub fn satisfied(&self, world: &KinematicWorld) -> bool {
        match self {
            SuccessPredicate::PickLift { object, dz } => {
                let lifted = world.object_centroid(*object).z - world.initial_centroid(*object).z;
                world.held() == Some(*object) && lifted >= *dz
            }
            SuccessPredicate::PlaceInto { object, region } => {
                world.held() != Some(*object) && region.contains(&nalgebra::Point3::from(world.object_centroid(*object)))
            }
            SuccessPredicate::ReachPose { pose, tol } => world.ee().translation_distance(pose) <= *tol,
        }
    }
}

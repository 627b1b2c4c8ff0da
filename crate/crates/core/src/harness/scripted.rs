//! Scripted source demonstrations, recorded by stepping a kinematic world.
//!
//! Frame convention: `o_t` is the world before step `t`, `a_t` the command
//! applied at step `t`, so `a_t.target_pose` is the end-effector pose of
//! `o_{t+1}` and the observed gripper state is the previous command.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{Aabb, CloudOpError};
use crate::demo::{Action, DemoFrame, Demonstration, ObjectId, Provenance, RobotState};
use crate::geometry::{PlanarPose, Pose};
use crate::harness::scenes::{background_points, default_crop, PLACE_HEIGHT};
use crate::harness::world::{GripEvent, KinematicWorld};
use crate::harness::SuccessPredicate;
use crate::scene::Scene;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptConfig {
    pub approach_step: f64,
    pub fine_step: f64,
    pub pregrasp_height: f64,
    pub lift: f64,
    /// Frames spent closing or opening the gripper.
    pub dwell: usize,
    /// Horizontal jitter of the pre-grasp point, uniform in ±noise.
    pub noise: f64,
    pub point_count: usize,
    pub fps_seed: u64,
    pub background_points: usize,
    pub background_seed: u64,
    pub crop: Aabb,
}

impl Default for ScriptConfig {
    fn default() -> Self {
        Self {
            approach_step: 0.02,
            fine_step: 0.01,
            pregrasp_height: 0.125,
            lift: 0.08,
            dwell: 3,
            noise: 0.004,
            point_count: 1024,
            fps_seed: 0,
            background_points: 1400,
            background_seed: 11,
            crop: default_crop(),
        }
    }
}

impl ScriptConfig {
    /// Background sized so the crop always leaves `point_count` points.
    pub fn for_points(point_count: usize) -> Self {
        Self {
            point_count,
            background_points: point_count + point_count / 3,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Approach,
    Descend,
    Close,
    Lift,
    Transit,
    Lower,
    Open,
    Retreat,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ScriptError {
    #[error("scene has no task")]
    NoTask,
    #[error("object {0} not in scene")]
    MissingObject(ObjectId),
    #[error("step {step} leaves the reachable workspace of the dock")]
    Unreachable { step: usize },
    #[error("gripper closed at step {step} without reaching an object")]
    GraspFailed { step: usize },
    #[error("scripted run does not satisfy the task")]
    TaskFailed,
    #[error("place task needs a second object to place onto")]
    NoPlaceTarget,
    #[error(transparent)]
    Cloud(#[from] CloudOpError),
}

/// Demo plus the phase of every frame.
#[derive(Clone, Debug)]
pub struct Scripted {
    pub demo: Demonstration,
    pub phases: Vec<Phase>,
}

fn line(from: &Pose, to: Vector3<f64>, step: f64) -> Vec<Pose> {
    let d = (to - from.position()).norm();
    let n = ((d / step).ceil() as usize).max(1);
    (1..=n).map(|i| from.with_position(from.position().lerp(&to, i as f64 / n as f64))).collect()
}

struct Plan {
    actions: Vec<(Pose, f64, Phase)>,
}

impl Plan {
    fn last(&self, home: &Pose) -> Pose {
        self.actions.last().map_or(*home, |a| a.0)
    }

    fn go(&mut self, home: &Pose, to: Vector3<f64>, step: f64, cmd: f64, phase: Phase) {
        let from = self.last(home);
        self.actions.extend(line(&from, to, step).into_iter().map(|p| (p, cmd, phase)));
    }

    fn hold(&mut self, home: &Pose, n: usize, cmd: f64, phase: Phase) {
        let p = self.last(home);
        self.actions.extend(std::iter::repeat_n((p, cmd, phase), n));
    }
}

/// Runs the scripted policy for the scene's task from a base at `dock`.
pub fn scripted_demo(scene: &Scene, dock: &PlanarPose, noise_seed: u64, cfg: &ScriptConfig) -> Result<Scripted, ScriptError> {
    let task = scene.task.clone().ok_or(ScriptError::NoTask)?;
    let mut world = KinematicWorld::new(scene, dock);
    let home = *world.ee();
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let mut jitter = || Vector3::new(rng.gen_range(-1.0..=1.0) * cfg.noise, rng.gen_range(-1.0..=1.0) * cfg.noise, 0.0);
    let up = |h: f64| Vector3::new(0.0, 0.0, h);
    let mut plan = Plan { actions: Vec::new() };

    let mut pick = |plan: &mut Plan, id: ObjectId| -> Result<(), ScriptError> {
        scene.object(id).ok_or(ScriptError::MissingObject(id))?;
        let c = world.object_centroid(id);
        plan.go(&home, c + up(cfg.pregrasp_height) + jitter(), cfg.approach_step, 0.0, Phase::Approach);
        plan.go(&home, c, cfg.fine_step, 0.0, Phase::Descend);
        plan.hold(&home, cfg.dwell, 1.0, Phase::Close);
        plan.go(&home, c + up(cfg.lift), cfg.fine_step, 1.0, Phase::Lift);
        Ok(())
    };

    match &task {
        SuccessPredicate::PickLift { object, .. } => pick(&mut plan, *object)?,
        SuccessPredicate::PlaceInto { object, .. } => {
            pick(&mut plan, *object)?;
            let target = scene.objects.iter().find(|o| o.id != *object).ok_or(ScriptError::NoPlaceTarget)?.id;
            let b = world.object_centroid(target);
            plan.go(&home, b + up(cfg.pregrasp_height) + jitter(), cfg.approach_step, 1.0, Phase::Transit);
            plan.go(&home, b + up(PLACE_HEIGHT), cfg.fine_step, 1.0, Phase::Lower);
            plan.hold(&home, cfg.dwell, 0.0, Phase::Open);
            plan.go(&home, b + up(PLACE_HEIGHT + 0.01), cfg.fine_step / 2.0, 0.0, Phase::Retreat);
        }
        SuccessPredicate::ReachPose { pose, .. } => {
            let from = home;
            plan.actions.extend(line(&from, pose.position(), cfg.approach_step).into_iter().map(|p| (p, 0.0, Phase::Approach)));
        }
    }

    let background = background_points(scene, cfg.background_points, cfg.crop.min[2], cfg.background_seed);
    let mut frames = Vec::with_capacity(plan.actions.len());
    let mut phases = Vec::with_capacity(plan.actions.len());
    for (t, (pose, cmd, phase)) in plan.actions.into_iter().enumerate() {
        if scene.workspace.margin(dock, &pose.position()) <= 0.0 {
            return Err(ScriptError::Unreachable { step: t });
        }
        let cloud = world.observe(&background, &cfg.crop, cfg.point_count, cfg.fps_seed)?;
        let state = RobotState {
            ee_pose: *world.ee(),
            gripper: world.gripper(),
        };
        let action = Action { target_pose: pose, gripper_cmd: cmd };
        frames.push(DemoFrame { t: t as u32, cloud, state, action });
        phases.push(phase);
        if world.apply(&action) == Some(GripEvent::Miss) {
            return Err(ScriptError::GraspFailed { step: t });
        }
    }
    if !task.satisfied(&world) {
        return Err(ScriptError::TaskFailed);
    }
    Ok(Scripted {
        demo: Demonstration {
            id: format!("{}_src{noise_seed}", scene.id),
            scene_id: scene.id.clone(),
            docking: *dock,
            provenance: Provenance::Source,
            frames,
        },
        phases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demo::{validate_demo, ValidationRules};
    use crate::harness::scenes::{pick_scene, place_scene, source_dock};
    use crate::parser::{parse, SegmentKind, DEFAULT_MIN_SEG_LEN};

    fn kinds(s: &Scene, d: &Demonstration) -> Vec<SegmentKind> {
        parse(d, s, 0.1, DEFAULT_MIN_SEG_LEN).unwrap().segments.iter().map(|s| s.kind).collect()
    }

    #[test]
    fn pick_parses_to_motion_then_skill() {
        let s = pick_scene();
        let out = scripted_demo(&s, &source_dock(), 1, &ScriptConfig::default()).unwrap();
        let rules = ValidationRules { point_count: Some(1024), binary_gripper: true };
        assert!(validate_demo(&out.demo, &rules).is_empty());
        assert_eq!(kinds(&s, &out.demo), vec![SegmentKind::Motion, SegmentKind::Skill]);
        // boundary sits inside the descent
        let p = parse(&out.demo, &s, 0.1, DEFAULT_MIN_SEG_LEN).unwrap();
        assert_eq!(out.phases[p.segments[1].start], Phase::Descend);
        assert_eq!(out.phases[p.segments[1].start - 1], Phase::Descend);
    }

    #[test]
    fn place_parses_to_four_segments() {
        let s = place_scene();
        let out = scripted_demo(&s, &source_dock(), 2, &ScriptConfig::default()).unwrap();
        let p = parse(&out.demo, &s, 0.1, DEFAULT_MIN_SEG_LEN).unwrap();
        assert_eq!(p.segments.iter().map(|s| s.kind).collect::<Vec<_>>(), vec![SegmentKind::Motion, SegmentKind::Skill, SegmentKind::Motion, SegmentKind::Skill]);
        // the phase log agrees: the carried transit is the second motion segment
        assert!(p.segments[2].start < p.segments[2].end);
        assert!(out.phases[p.segments[2].start..p.segments[2].end].iter().all(|ph| *ph == Phase::Transit || *ph == Phase::Lift || *ph == Phase::Lower));
        assert_eq!(p.segments[3].object, Some(ObjectId(1)));
    }

    #[test]
    fn far_dock_is_unachievable() {
        let s = pick_scene();
        let err = scripted_demo(&s, &PlanarPose::new(-3.0, 0.0, 0.0), 0, &ScriptConfig::default()).unwrap_err();
        assert!(matches!(err, ScriptError::Unreachable { .. }));
    }
}

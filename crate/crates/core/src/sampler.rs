//! Docking-pose proposal and the three feasibility gates: target visibility
//! from the fixed camera, reachability of every skill waypoint, and
//! collision-free replanning of every motion segment.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{plan_motion_segments, MotionPlan};
use crate::demo::{Demonstration, ObjectId};
use crate::geometry::PlanarPose;
use crate::parser::{object_centroids, ParsedTrajectory};
use crate::planner::{MotionPath, PlannerConfig};
use crate::scene::{Scene, ShapeRef};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_docks: usize,
    /// Multipliers of the source dock-to-object distance.
    pub range_ratio: (f64, f64),
    pub yaw_jitter: f64,
    pub seed: u64,
    pub max_attempts: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_docks: 4,
            range_ratio: (0.8, 1.2),
            yaw_jitter: 0.35,
            seed: 0,
            max_attempts: 200,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        let (lo, hi) = self.range_ratio;
        if !(lo > 0.0 && lo <= hi) || self.n_docks == 0 || !(self.yaw_jitter >= 0.0) {
            return Err(SampleError::Config(format!(
                "need 0 < lo <= hi, n_docks >= 1 and yaw_jitter >= 0 (got range {lo}:{hi}, docks {}, jitter {})",
                self.n_docks, self.yaw_jitter
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check<T> {
    pub pass: bool,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub dock: PlanarPose,
    pub attempt: usize,
    /// Minimum visible fraction over the skill objects.
    pub visibility: Check<f64>,
    /// Minimum annulus margin in meters.
    pub reachability: Check<f64>,
    /// Failing motion segment and solid, if any.
    pub collision_free: Check<Option<CollisionFailure>>,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionFailure {
    /// Motion segment index, or `None` for the base footprint.
    pub segment: Option<usize>,
    pub shape: Option<ShapeRef>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionHistogram {
    pub visibility: usize,
    pub reachability: usize,
    pub collision: usize,
}

impl RejectionHistogram {
    pub fn add(&mut self, r: &FeasibilityReport) {
        self.visibility += usize::from(!r.visibility.pass);
        self.reachability += usize::from(!r.reachability.pass);
        self.collision += usize::from(!r.collision_free.pass);
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("found {found} of {wanted} feasible docks after {attempts} attempts (rejections: visibility {}, reachability {}, collision {})", histogram.visibility, histogram.reachability, histogram.collision)]
    Exhausted {
        wanted: usize,
        found: usize,
        attempts: usize,
        histogram: RejectionHistogram,
    },
    #[error("invalid sampler config: {0}")]
    Config(String),
    #[error("source demonstration has no skill object with a first-frame centroid")]
    NoTarget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleOutcome {
    pub accepted: Vec<FeasibilityReport>,
    pub rejected: Vec<FeasibilityReport>,
    pub histogram: RejectionHistogram,
}

impl SampleOutcome {
    pub fn attempts(&self) -> usize {
        self.accepted.len() + self.rejected.len()
    }
}

/// Fraction of the target's points inside the frustum and not hidden by
/// another solid or by the robot body standing at `dock`.
pub fn check_visibility(scene: &Scene, dock: &PlanarPose, target: ObjectId, min_fraction: f64) -> Check<f64> {
    let Some(obj) = scene.object(target) else {
        return Check { pass: false, value: 0.0 };
    };
    let eye = scene.camera.pose.position();
    let body = scene.robot.body_box(dock);
    let occluders: Vec<_> = scene
        .objects
        .iter()
        .filter(|o| o.id != target)
        .map(|o| &o.shape)
        .chain(scene.static_shapes.iter())
        .chain(std::iter::once(&body))
        .collect();
    let visible = obj
        .points_world()
        .filter(|p| scene.camera.in_frustum(p) && !occluders.iter().any(|s| s.blocks_segment(&eye, p)))
        .count();
    let fraction = visible as f64 / obj.points.len() as f64;
    Check {
        pass: fraction >= min_fraction,
        value: fraction,
    }
}

/// Every skill waypoint inside the reach annulus of the base at `dock`.
pub fn check_reachability(scene: &Scene, dock: &PlanarPose, parsed: &ParsedTrajectory, demo: &Demonstration) -> Check<f64> {
    let margin = parsed
        .skills()
        .flat_map(|s| demo.frames[s.start..s.end].iter())
        .map(|f| scene.workspace.margin(dock, &f.action.target_pose.position()))
        .fold(f64::INFINITY, f64::min);
    Check {
        pass: margin > 0.0,
        value: margin,
    }
}

/// Base footprint clear of the floorplan and every motion path clear of the
/// inflated obstacles. `carried[i]` lists the objects travelling with the
/// gripper along `paths[i]`.
pub fn check_collision_free(scene: &Scene, dock: &PlanarPose, paths: &[MotionPath], carried: &[Vec<ObjectId>]) -> Check<Option<CollisionFailure>> {
    if let Some(shape) = scene.footprint_collision(dock) {
        return Check {
            pass: false,
            value: Some(CollisionFailure { segment: None, shape: Some(shape) }),
        };
    }
    for (i, path) in paths.iter().enumerate() {
        let ignore = carried.get(i).map(Vec::as_slice).unwrap_or(&[]);
        if let Some(fault) = crate::planner::path_fault(&path.waypoints, scene, dock, ignore) {
            let shape = match fault {
                crate::planner::PathFault::Collision(s) => Some(s),
                crate::planner::PathFault::Unreachable => None,
            };
            return Check {
                pass: false,
                value: Some(CollisionFailure {
                    segment: Some(path.segment_index),
                    shape,
                }),
            };
        }
    }
    Check { pass: true, value: None }
}

/// Objects bound by the skill segments, in order of first appearance.
pub fn skill_objects(parsed: &ParsedTrajectory) -> Vec<ObjectId> {
    let mut out = Vec::new();
    for s in parsed.skills() {
        if let Some(o) = s.object {
            if !out.contains(&o) {
                out.push(o);
            }
        }
    }
    out
}

/// Runs all three gates for one candidate.
pub fn evaluate_dock(scene: &Scene, source: &Demonstration, parsed: &ParsedTrajectory, dock: &PlanarPose, planner: &PlannerConfig, plan_seed: u64, attempt: usize) -> (FeasibilityReport, Option<Vec<MotionPlan>>) {
    let vis = skill_objects(parsed)
        .into_iter()
        .map(|o| check_visibility(scene, dock, o, scene.min_visible_fraction))
        .fold(Check { pass: true, value: 1.0f64 }, |acc, c| Check {
            pass: acc.pass && c.pass,
            value: acc.value.min(c.value),
        });
    let reach = check_reachability(scene, dock, parsed, source);
    let (collision, plans) = match plan_motion_segments(scene, source, parsed, dock, planner, plan_seed) {
        Ok(plans) => {
            let paths: Vec<MotionPath> = plans
                .iter()
                .map(|p| MotionPath {
                    waypoints: p.poses.clone(),
                    segment_index: p.segment_index,
                })
                .collect();
            let carried: Vec<Vec<ObjectId>> = plans.iter().map(|p| p.carried.clone()).collect();
            let c = check_collision_free(scene, dock, &paths, &carried);
            let ok = c.pass;
            (c, ok.then_some(plans))
        }
        Err(e) => {
            let shape = match &e {
                crate::planner::PlanError::Blocked { shape, .. } => Some(*shape),
                crate::planner::PlanError::Unreachable { .. } => None,
            };
            let footprint = scene.footprint_collision(dock);
            let value = match footprint {
                Some(s) => CollisionFailure { segment: None, shape: Some(s) },
                None => CollisionFailure {
                    segment: Some(e.segment_index()),
                    shape,
                },
            };
            (Check { pass: false, value: Some(value) }, None)
        }
    };
    let accepted = vis.pass && reach.pass && collision.pass;
    (
        FeasibilityReport {
            dock: *dock,
            attempt,
            visibility: vis,
            reachability: reach,
            collision_free: collision,
            accepted,
        },
        plans,
    )
}

/// Source geometry the proposal distribution is centred on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DockFrame {
    pub target: ObjectId,
    pub center: Vector3<f64>,
    pub distance: f64,
    pub angle: f64,
}

pub fn dock_frame(scene: &Scene, source: &Demonstration, parsed: &ParsedTrajectory) -> Result<DockFrame, SampleError> {
    let target = *skill_objects(parsed).first().ok_or(SampleError::NoTarget)?;
    let center = object_centroids(source, scene)
        .into_iter()
        .find(|(id, _)| *id == target)
        .map(|(_, c)| c)
        .ok_or(SampleError::NoTarget)?;
    let dx = source.docking.x - center.x;
    let dy = source.docking.y - center.y;
    Ok(DockFrame {
        target,
        center,
        distance: dx.hypot(dy),
        angle: dy.atan2(dx),
    })
}

/// Draws one candidate: radius scaled from the source distance, polar angle
/// jittered about the source angle, heading facing the target plus jitter.
pub fn propose(frame: &DockFrame, cfg: &SamplerConfig, rng: &mut impl Rng) -> PlanarPose {
    let (lo, hi) = cfg.range_ratio;
    let mut u = |a: f64, b: f64| a + (b - a) * rng.gen::<f64>();
    let r = frame.distance * u(lo, hi);
    let phi = frame.angle + u(-cfg.yaw_jitter, cfg.yaw_jitter);
    let x = frame.center.x + r * phi.cos();
    let y = frame.center.y + r * phi.sin();
    let facing = (frame.center.y - y).atan2(frame.center.x - x);
    PlanarPose::new(x, y, facing + u(-cfg.yaw_jitter, cfg.yaw_jitter))
}

/// Samples until `cfg.n_docks` candidates pass every gate.
pub fn sample_docks(scene: &Scene, source: &Demonstration, parsed: &ParsedTrajectory, cfg: &SamplerConfig, planner: &PlannerConfig) -> Result<SampleOutcome, SampleError> {
    cfg.validate()?;
    let frame = dock_frame(scene, source, parsed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = SampleOutcome {
        accepted: Vec::new(),
        rejected: Vec::new(),
        histogram: RejectionHistogram::default(),
    };
    for attempt in 0..cfg.max_attempts {
        let dock = propose(&frame, cfg, &mut rng);
        let (report, _) = evaluate_dock(scene, source, parsed, &dock, planner, cfg.seed, attempt);
        if report.accepted {
            out.accepted.push(report);
            if out.accepted.len() == cfg.n_docks {
                return Ok(out);
            }
        } else {
            out.histogram.add(&report);
            out.rejected.push(report);
        }
    }
    Err(SampleError::Exhausted {
        wanted: cfg.n_docks,
        found: out.accepted.len(),
        attempts: cfg.max_attempts,
        histogram: out.histogram,
    })
}

/// World point helper for callers building custom checks.
pub fn to_point(v: &Vector3<f64>) -> Point3<f64> {
    Point3::from(*v)
}

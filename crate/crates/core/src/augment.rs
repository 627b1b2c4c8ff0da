//! Augmented demonstration synthesis for one relocated dock.
//!
//! Skill segments are copied verbatim in the world frame. Motion segments are
//! replanned between the neighbouring skill poses and resampled. Every output
//! frame borrows a source frame (itself for skill frames, the nearest by
//! segment fraction for motion frames) and rigidly moves that frame's arm
//! cluster, plus any bound object, by the change in commanded pose.

use rayon::prelude::*;

use crate::cloud::{concat, extract_cluster};
use crate::demo::{
    validate_demo, Action, DemoFrame, Demonstration, Label, ObjectId, PointCloud, Provenance,
    RobotState, ValidationRules, Violation,
};
use crate::geometry::{compose, relative_transform, transform_points, PlanarPose, Pose, RigidTransform};
use crate::parser::{parse, ParseError, ParsedTrajectory, Segment, SegmentKind};
use crate::planner::{
    matched_waypoint_count, replan, retime, PlanContext, PlanError, PlannerConfig, RetimePolicy,
};
use crate::sampler::{sample_docks, FeasibilityReport, RejectionHistogram, SampleError, SamplerConfig};
use crate::scene::Scene;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("source frame {frame} has no arm-labeled points")]
    Unlabeled { frame: usize },
    #[error("augmented demo failed validation: {}", .0.first().map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Violation>),
    #[error("segment table does not match the source demo: {0}")]
    Segments(String),
}

/// One source demo relocated to one dock.
#[derive(Clone, Copy, Debug)]
pub struct AugmentationJob<'a> {
    pub source: &'a Demonstration,
    pub parsed: &'a ParsedTrajectory,
    pub scene: &'a Scene,
    pub dock: PlanarPose,
    pub dock_id: u32,
    /// Seed for the sampling tier of the planner.
    pub seed: u64,
}

/// Resampled poses for one motion segment.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionPlan {
    /// Index into the parsed segment table.
    pub segment_index: usize,
    /// Full resampled path, both splice endpoints included.
    pub poses: Vec<Pose>,
    /// Sub-range of `poses` that becomes output frames.
    pub emit: std::ops::Range<usize>,
    /// Objects travelling with the gripper along this segment.
    pub carried: Vec<ObjectId>,
}

/// Median translation between consecutive actions inside motion segments.
pub fn median_motion_step(source: &Demonstration, parsed: &ParsedTrajectory) -> Option<f64> {
    let mut steps: Vec<f64> = parsed
        .segments
        .iter()
        .filter(|s| !s.is_skill())
        .flat_map(|s| (s.start + 1..s.end).map(|t| source.frames[t - 1].action.target_pose.translation_distance(&source.frames[t].action.target_pose)))
        .collect();
    if steps.is_empty() {
        return None;
    }
    steps.sort_by(f64::total_cmp);
    let m = steps.len();
    Some(if m % 2 == 1 { steps[m / 2] } else { 0.5 * (steps[m / 2 - 1] + steps[m / 2]) })
}

/// Objects held when motion segment `k` begins: the preceding skill's object
/// if the gripper is still commanded closed on its last frame.
fn carried_into(source: &Demonstration, parsed: &ParsedTrajectory, k: usize) -> Vec<ObjectId> {
    if k == 0 {
        return Vec::new();
    }
    let prev = &parsed.segments[k - 1];
    match prev.object {
        Some(o) if source.frames[prev.end - 1].action.gripper_cmd == 1.0 => vec![o],
        _ => Vec::new(),
    }
}

/// Replans and resamples every motion segment for a base at `dock`.
pub fn plan_motion_segments(scene: &Scene, source: &Demonstration, parsed: &ParsedTrajectory, dock: &PlanarPose, cfg: &PlannerConfig, seed: u64) -> Result<Vec<MotionPlan>, PlanError> {
    let median = median_motion_step(source, parsed).unwrap_or(cfg.max_step);
    let segs = &parsed.segments;
    let mut out = Vec::new();
    for (k, seg) in segs.iter().enumerate() {
        if seg.is_skill() {
            continue;
        }
        let prev_skill = k > 0;
        let next_skill = k + 1 < segs.len();
        let start = if prev_skill {
            source.frames[seg.start - 1].action.target_pose
        } else {
            scene.rebase(&source.frames[0].state.ee_pose, &source.docking, dock)
        };
        let goal = if next_skill {
            source.frames[seg.end].action.target_pose
        } else {
            scene.rebase(&source.frames[seg.end - 1].action.target_pose, &source.docking, dock)
        };
        let carried = carried_into(source, parsed, k);
        let ctx = PlanContext {
            segment_index: k,
            carried: carried.clone(),
            seed,
        };
        let path = replan(&start, &goal, scene, dock, cfg, &ctx)?;
        let drop_tail = usize::from(next_skill);
        let n = match cfg.retime {
            RetimePolicy::MatchSourceSpacing => matched_waypoint_count(&path, median),
            RetimePolicy::SourceLength => seg.len() + 1 + drop_tail,
            RetimePolicy::Fixed(m) => m + 1 + drop_tail,
        }
        .max(2 + drop_tail);
        let poses = retime(&path, n);
        out.push(MotionPlan {
            segment_index: k,
            emit: 1..n - drop_tail,
            poses,
            carried,
        });
    }
    Ok(out)
}

/// Actions of the augmented demo with their bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedActions {
    pub actions: Vec<Action>,
    /// Source frame each output frame borrows its observation from.
    pub source_frame: Vec<usize>,
    /// Objects moved with the arm in each output frame.
    pub bound: Vec<Vec<ObjectId>>,
    pub segments: ParsedTrajectory,
}

/// Source index at fraction `i / (m - 1)` of a segment, rounded to nearest.
fn paired_index(seg: &Segment, i: usize, m: usize) -> usize {
    if m <= 1 || seg.len() == 1 {
        return seg.start;
    }
    let f = i as f64 / (m - 1) as f64;
    seg.start + (f * (seg.len() - 1) as f64).round() as usize
}

pub fn generate_actions(job: &AugmentationJob, cfg: &PlannerConfig) -> Result<GeneratedActions, AugmentError> {
    job.parsed
        .check(job.source.len())
        .map_err(|e| AugmentError::Segments(e.to_string()))?;
    let plans = plan_motion_segments(job.scene, job.source, job.parsed, &job.dock, cfg, job.seed)?;
    let mut plans = plans.into_iter();
    let mut out = GeneratedActions {
        actions: Vec::new(),
        source_frame: Vec::new(),
        bound: Vec::new(),
        segments: ParsedTrajectory {
            segments: Vec::new(),
            threshold: job.parsed.threshold,
        },
    };
    for (k, seg) in job.parsed.segments.iter().enumerate() {
        let start = out.actions.len();
        match seg.kind {
            SegmentKind::Skill => {
                let mut bound = carried_into(job.source, job.parsed, k);
                if let Some(o) = seg.object {
                    if !bound.contains(&o) {
                        bound.push(o);
                    }
                }
                for t in seg.start..seg.end {
                    out.actions.push(job.source.frames[t].action);
                    out.source_frame.push(t);
                    out.bound.push(bound.clone());
                }
            }
            SegmentKind::Motion => {
                let plan = plans.next().expect("one plan per motion segment");
                let poses = &plan.poses[plan.emit.clone()];
                let m = poses.len();
                for (i, pose) in poses.iter().enumerate() {
                    let s = paired_index(seg, i, m);
                    out.actions.push(Action {
                        target_pose: *pose,
                        gripper_cmd: job.source.frames[s].action.gripper_cmd,
                    });
                    out.source_frame.push(s);
                    out.bound.push(plan.carried.clone());
                }
            }
        }
        out.segments.segments.push(Segment {
            start,
            end: out.actions.len(),
            ..*seg
        });
    }
    Ok(out)
}

/// Change of commanded pose; exactly the identity when the poses are equal.
pub fn action_delta(source: &Pose, new: &Pose) -> RigidTransform {
    if source == new {
        RigidTransform::identity()
    } else {
        relative_transform(source, new)
    }
}

/// Observation for one output frame: arm (and bound objects) moved by the
/// action delta about the source commanded pose; state moved so its offset
/// to the commanded pose is preserved.
pub fn synthesize_observation(source_frame: &DemoFrame, new_action: &Action, bound: &[ObjectId]) -> Result<(PointCloud, RobotState), AugmentError> {
    let anchor = source_frame.action.target_pose;
    let delta = action_delta(&anchor, &new_action.target_pose);
    let cloud = &source_frame.cloud;
    if cloud.count_label(Label::Arm) == 0 {
        return Err(AugmentError::Unlabeled {
            frame: source_frame.t as usize,
        });
    }
    let mut object_ids: Vec<ObjectId> = cloud
        .labels()
        .iter()
        .filter_map(|l| match l {
            Label::Object(id) => Some(*id),
            _ => None,
        })
        .collect();
    object_ids.sort_unstable();
    object_ids.dedup();

    let arm = transform_points(&extract_cluster(cloud, Label::Arm), &delta, &anchor);
    let mut parts = vec![arm];
    for id in object_ids {
        let c = extract_cluster(cloud, Label::Object(id));
        parts.push(if bound.contains(&id) { transform_points(&c, &delta, &anchor) } else { c });
    }
    parts.push(extract_cluster(cloud, Label::Other));
    let state = RobotState {
        ee_pose: if delta.is_exact_identity() {
            source_frame.state.ee_pose
        } else {
            compose(&source_frame.state.ee_pose, delta.as_pose())
        },
        gripper: source_frame.state.gripper,
    };
    Ok((concat(parts.iter()), state))
}

/// Output of one augmentation.
#[derive(Clone, Debug, PartialEq)]
pub struct Augmented {
    pub demo: Demonstration,
    pub segments: ParsedTrajectory,
    pub source_frame: Vec<usize>,
}

pub fn augmented_id(source_id: &str, dock_id: u32) -> String {
    format!("{source_id}_dock{dock_id}")
}

pub fn augment(job: &AugmentationJob, cfg: &PlannerConfig, rules: &ValidationRules) -> Result<Augmented, AugmentError> {
    let gen = generate_actions(job, cfg)?;
    let mut frames = Vec::with_capacity(gen.actions.len());
    for (t, action) in gen.actions.iter().enumerate() {
        let src = &job.source.frames[gen.source_frame[t]];
        let (cloud, state) = synthesize_observation(src, action, &gen.bound[t])?;
        frames.push(DemoFrame {
            t: t as u32,
            cloud,
            state,
            action: *action,
        });
    }
    let demo = Demonstration {
        id: augmented_id(&job.source.id, job.dock_id),
        scene_id: job.source.scene_id.clone(),
        docking: job.dock,
        provenance: Provenance::Augmented {
            source_id: job.source.id.clone(),
            dock_id: job.dock_id,
        },
        frames,
    };
    let violations = validate_demo(&demo, rules);
    if !violations.is_empty() {
        return Err(AugmentError::Invalid(violations));
    }
    Ok(Augmented {
        demo,
        segments: gen.segments,
        source_frame: gen.source_frame,
    })
}

/// Settings shared by every source in a batch.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BatchConfig {
    pub threshold: f64,
    pub min_seg_len: usize,
    pub sampler: SamplerConfig,
    pub planner: PlannerConfig,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            threshold: crate::parser::DEFAULT_THRESHOLD,
            min_seg_len: crate::parser::DEFAULT_MIN_SEG_LEN,
            sampler: SamplerConfig::default(),
            planner: PlannerConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SourceFailure {
    #[error("parse: {0}")]
    Parse(#[from] ParseError),
    #[error("sample: {0}")]
    Sample(#[from] SampleError),
    #[error("augment dock {dock_id}: {source}")]
    Augment {
        dock_id: u32,
        #[source]
        source: AugmentError,
    },
    #[error("scene `{0}` not found")]
    MissingScene(String),
}

/// Everything produced for one source demo.
#[derive(Debug)]
pub struct SourceResult {
    pub source_id: String,
    pub parsed: Option<ParsedTrajectory>,
    pub accepted: Vec<FeasibilityReport>,
    pub rejections: RejectionHistogram,
    pub attempts: usize,
    pub augmented: Vec<Augmented>,
    pub failure: Option<SourceFailure>,
}

/// Parse, sample and augment one source.
pub fn augment_source(source: &Demonstration, scene: &Scene, cfg: &BatchConfig, rules: &ValidationRules) -> SourceResult {
    let mut res = SourceResult {
        source_id: source.id.clone(),
        parsed: None,
        accepted: Vec::new(),
        rejections: RejectionHistogram::default(),
        attempts: 0,
        augmented: Vec::new(),
        failure: None,
    };
    let parsed = match parse(source, scene, cfg.threshold, cfg.min_seg_len) {
        Ok(p) => p,
        Err(e) => {
            res.failure = Some(e.into());
            return res;
        }
    };
    res.parsed = Some(parsed.clone());
    let outcome = match sample_docks(scene, source, &parsed, &cfg.sampler, &cfg.planner) {
        Ok(o) => o,
        Err(e) => {
            if let SampleError::Exhausted { histogram, attempts, .. } = &e {
                res.rejections = *histogram;
                res.attempts = *attempts;
            }
            res.failure = Some(e.into());
            return res;
        }
    };
    res.rejections = outcome.histogram;
    res.attempts = outcome.attempts();
    for (k, report) in outcome.accepted.iter().enumerate() {
        let job = AugmentationJob {
            source,
            parsed: &parsed,
            scene,
            dock: report.dock,
            dock_id: k as u32,
            seed: cfg.sampler.seed,
        };
        match augment(&job, &cfg.planner, rules) {
            Ok(a) => res.augmented.push(a),
            Err(source) => {
                res.failure = Some(SourceFailure::Augment { dock_id: k as u32, source });
                res.augmented.clear();
                return res;
            }
        }
    }
    res.accepted = outcome.accepted;
    res
}

/// Runs [`augment_source`] over every source, results in input order.
pub fn augment_batch(sources: &[Demonstration], scenes: &[Scene], cfg: &BatchConfig, rules: &ValidationRules) -> Vec<SourceResult> {
    sources
        .par_iter()
        .map(|d| match scenes.iter().find(|s| s.id == d.scene_id) {
            Some(scene) => augment_source(d, scene, cfg, rules),
            None => SourceResult {
                source_id: d.id.clone(),
                parsed: None,
                accepted: Vec::new(),
                rejections: RejectionHistogram::default(),
                attempts: 0,
                augmented: Vec::new(),
                failure: Some(SourceFailure::MissingScene(d.scene_id.clone())),
            },
        })
        .collect()
}

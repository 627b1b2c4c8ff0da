//! Motion-segment replanning for a relocated base.
//!
//! Three tiers, first success wins:
//! 1. straight SE(3) interpolation (linear position, slerp orientation);
//! 2. one via-point lifted above the first blocking solid;
//! 3. seeded random via-points inside the reach volume, shortest valid path.
//!
//! A path is valid when every waypoint sits inside the reach annulus of the
//! base and every segment between consecutive waypoints keeps the end-effector
//! point farther than the scene clearance from every obstacle.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demo::ObjectId;
use crate::geometry::{PlanarPose, Pose};
use crate::scene::{Scene, ShapeRef};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "frames", rename_all = "snake_case")]
pub enum RetimePolicy {
    /// Spacing close to the median source motion step.
    MatchSourceSpacing,
    /// Same number of frames as the source segment.
    SourceLength,
    /// Fixed number of frames per motion segment.
    Fixed(usize),
}

impl std::str::FromStr for RetimePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "match" => Ok(RetimePolicy::MatchSourceSpacing),
            "source" => Ok(RetimePolicy::SourceLength),
            _ => {
                let n = s
                    .strip_prefix("fixed:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .filter(|n| *n >= 1)
                    .ok_or_else(|| format!("invalid retime policy `{s}` (match | source | fixed:<n>)"))?;
                Ok(RetimePolicy::Fixed(n))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub max_step: f64,
    pub max_rot_step: f64,
    /// Candidate via-points drawn by the sampling tier.
    pub max_iters: usize,
    pub retime: RetimePolicy,
    /// Return the straight line without any checks. Only for negative controls.
    pub unchecked: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_step: 0.02,
            max_rot_step: 0.1,
            max_iters: 200,
            retime: RetimePolicy::MatchSourceSpacing,
            unchecked: false,
        }
    }
}

/// Replanned waypoints for one motion segment.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionPath {
    pub waypoints: Vec<Pose>,
    pub segment_index: usize,
}

impl MotionPath {
    pub fn arc_length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].translation_distance(&w[1])).sum()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("motion segment {segment_index}: blocked by {shape}")]
    Blocked { segment_index: usize, shape: ShapeRef },
    #[error("motion segment {segment_index}: leaves the reachable workspace")]
    Unreachable { segment_index: usize },
}

impl PlanError {
    pub fn segment_index(&self) -> usize {
        match self {
            PlanError::Blocked { segment_index, .. } | PlanError::Unreachable { segment_index } => *segment_index,
        }
    }
}

/// Per-call context: which segment is planned, which objects travel with the
/// gripper (and so are not obstacles), and the tier-3 seed.
#[derive(Clone, Debug, Default)]
pub struct PlanContext {
    pub segment_index: usize,
    pub carried: Vec<ObjectId>,
    pub seed: u64,
}

/// Problem found on a path, if any.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PathFault {
    Collision(ShapeRef),
    Unreachable,
}

/// Checks reachability of each waypoint and clearance of each segment.
pub fn path_fault(waypoints: &[Pose], scene: &Scene, dock: &PlanarPose, carried: &[ObjectId]) -> Option<PathFault> {
    for w in waypoints {
        if scene.workspace.margin(dock, &w.position()) <= 0.0 {
            return Some(PathFault::Unreachable);
        }
    }
    let single = [waypoints.first().copied().unwrap_or_default(); 2];
    let pairs: Vec<[Pose; 2]> = if waypoints.len() < 2 {
        vec![single]
    } else {
        waypoints.windows(2).map(|w| [w[0], w[1]]).collect()
    };
    for [a, b] in pairs {
        let (pa, pb) = (a.position(), b.position());
        for (r, shape) in scene.ee_obstacles(carried) {
            if shape.segment_distance(&pa, &pb) <= scene.clearance {
                return Some(PathFault::Collision(r));
            }
        }
    }
    None
}

fn steps_for(dist: f64, angle: f64, cfg: &PlannerConfig) -> usize {
    let n = (dist / cfg.max_step).ceil().max((angle / cfg.max_rot_step).ceil());
    (n as usize).max(1)
}

/// Densifies the polyline `start -> vias -> goal` at the configured
/// resolution. Orientation is slerped by arc-length fraction over the whole path.
pub fn polyline(start: &Pose, vias: &[Vector3<f64>], goal: &Pose, cfg: &PlannerConfig) -> Vec<Pose> {
    if start == goal {
        return vec![*start];
    }
    let mut corners = vec![start.position()];
    corners.extend_from_slice(vias);
    corners.push(goal.position());
    let lens: Vec<f64> = corners.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    let total: f64 = lens.iter().sum();
    let angle = start.rotation_distance(goal);

    if total == 0.0 {
        let n = steps_for(0.0, angle, cfg);
        return (0..=n).map(|i| start.interpolate(goal, i as f64 / n as f64)).collect();
    }

    let mut out = vec![*start];
    let mut travelled = 0.0;
    for (k, w) in corners.windows(2).enumerate() {
        let leg = lens[k];
        if leg == 0.0 {
            continue;
        }
        let n = steps_for(leg, angle * leg / total, cfg);
        for i in 1..=n {
            let last_leg = k == lens.len() - 1;
            if last_leg && i == n {
                out.push(*goal);
                continue;
            }
            let s = i as f64 / n as f64;
            let p = w[0] + (w[1] - w[0]) * s;
            let f = (travelled + leg * s) / total;
            out.push(start.interpolate(goal, f).with_position(p));
        }
        travelled += leg;
    }
    if out.last() != Some(goal) {
        out.push(*goal);
    }
    out
}

fn path_length(start: &Vector3<f64>, via: &Vector3<f64>, goal: &Vector3<f64>) -> f64 {
    (via - start).norm() + (goal - via).norm()
}

pub fn replan(start: &Pose, goal: &Pose, scene: &Scene, dock: &PlanarPose, cfg: &PlannerConfig, ctx: &PlanContext) -> Result<MotionPath, PlanError> {
    let wrap = |waypoints| MotionPath {
        waypoints,
        segment_index: ctx.segment_index,
    };
    let straight = polyline(start, &[], goal, cfg);
    if cfg.unchecked {
        return Ok(wrap(straight));
    }
    let fault = match path_fault(&straight, scene, dock, &ctx.carried) {
        None => return Ok(wrap(straight)),
        Some(f) => f,
    };
    let to_err = |f: PathFault| match f {
        PathFault::Collision(shape) => PlanError::Blocked {
            segment_index: ctx.segment_index,
            shape,
        },
        PathFault::Unreachable => PlanError::Unreachable {
            segment_index: ctx.segment_index,
        },
    };

    // tier 2: lift over the blocking solid
    if let PathFault::Collision(r) = fault {
        let shape = scene
            .ee_obstacles(&ctx.carried)
            .find(|(s, _)| *s == r)
            .map(|(_, s)| s.clone())
            .expect("fault refers to a scene solid");
        let (a, b) = (start.position(), goal.position());
        let d = b - a;
        let s = if d.norm_squared() > 0.0 { ((shape.center() - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
        let mut via = a + d * s;
        via.z = shape.top_z() + 2.0 * scene.clearance;
        let lifted = polyline(start, &[via], goal, cfg);
        if path_fault(&lifted, scene, dock, &ctx.carried).is_none() {
            return Ok(wrap(lifted));
        }
    }

    // tier 3: random via-points in the reach volume, shortest valid
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed ^ (ctx.segment_index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let ws = &scene.workspace;
    let mut best: Option<(f64, Vec<Pose>)> = None;
    for _ in 0..cfg.max_iters {
        let r = rng.gen_range(ws.r_min..ws.r_max);
        let th = dock.yaw + rng.gen_range(-std::f64::consts::FRAC_PI_2..std::f64::consts::FRAC_PI_2);
        let z = rng.gen_range(ws.z_min..ws.z_max);
        let via = Vector3::new(dock.x + r * th.cos(), dock.y + r * th.sin(), z);
        let len = path_length(&start.position(), &via, &goal.position());
        if best.as_ref().is_some_and(|(l, _)| *l <= len) {
            continue;
        }
        let cand = polyline(start, &[via], goal, cfg);
        if path_fault(&cand, scene, dock, &ctx.carried).is_none() {
            best = Some((len, cand));
        }
    }
    best.map(|(_, w)| wrap(w)).ok_or_else(|| to_err(fault))
}

/// Arc-length-uniform resampling to `n` poses. Endpoints are copied exactly.
pub fn retime(path: &MotionPath, n: usize) -> Vec<Pose> {
    let w = &path.waypoints;
    let n = n.max(2);
    if w.len() == 1 {
        return vec![w[0]; n];
    }
    let cum: Vec<f64> = std::iter::once(0.0)
        .chain(w.windows(2).scan(0.0, |acc, p| {
            *acc += p[0].translation_distance(&p[1]);
            Some(*acc)
        }))
        .collect();
    let total = *cum.last().unwrap();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i == 0 {
            out.push(w[0]);
            continue;
        }
        if i == n - 1 {
            out.push(*w.last().unwrap());
            continue;
        }
        if total == 0.0 {
            // pure rotation: uniform in waypoint index
            let x = i as f64 / (n - 1) as f64 * (w.len() - 1) as f64;
            let k = (x.floor() as usize).min(w.len() - 2);
            out.push(w[k].interpolate(&w[k + 1], x - k as f64));
            continue;
        }
        let s = total * i as f64 / (n - 1) as f64;
        let k = cum.partition_point(|c| *c <= s).saturating_sub(1).min(w.len() - 2);
        let leg = cum[k + 1] - cum[k];
        let f = if leg > 0.0 { (s - cum[k]) / leg } else { 0.0 };
        out.push(w[k].interpolate(&w[k + 1], f));
    }
    out
}

/// Waypoint count for the match-source-spacing policy.
pub fn matched_waypoint_count(path: &MotionPath, median_step: f64) -> usize {
    let arc = path.arc_length();
    if median_step <= 0.0 || arc == 0.0 {
        return 2;
    }
    ((arc / median_step).ceil() as usize + 1).max(2)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::compose;
    use crate::scene::{Camera, CollisionShape, RobotModel, Workspace};

    pub(crate) fn open_scene() -> Scene {
        Scene {
            id: "open".into(),
            objects: vec![],
            static_shapes: vec![],
            floorplan: vec![],
            camera: Camera::looking_at(Vector3::new(-2.0, 0.0, 2.0), Vector3::zeros(), 1.2, 1.0),
            workspace: Workspace { r_min: 0.0, r_max: 5.0, z_min: -5.0, z_max: 5.0 },
            robot: RobotModel {
                footprint_radius: 0.25,
                body_half_extents: [0.2, 0.2],
                body_height: 1.2,
                mount_height: 0.0,
                home: Pose::from_translation(0.35, 0.0, 1.0),
            },
            clearance: 0.03,
            min_visible_fraction: 0.5,
            task: None,
        }
    }

    fn dock() -> PlanarPose {
        PlanarPose::new(-3.0, 0.0, 0.0)
    }

    #[test]
    fn same_start_goal_single_waypoint() {
        let p = Pose::from_translation(0.1, 0.2, 0.3);
        let path = replan(&p, &p, &open_scene(), &dock(), &PlannerConfig::default(), &PlanContext::default()).unwrap();
        assert_eq!(path.waypoints, vec![p]);
    }

    #[test]
    fn straight_line_count_and_collinearity() {
        let a = Pose::from_translation(0.0, 0.0, 1.0);
        let b = Pose::from_translation(0.5, 0.2, 0.9);
        let path = replan(&a, &b, &open_scene(), &dock(), &PlannerConfig::default(), &PlanContext::default()).unwrap();
        let dist = a.translation_distance(&b);
        assert_eq!(path.waypoints.len(), (dist / 0.02).ceil() as usize + 1);
        assert_eq!(path.waypoints[0], a);
        assert_eq!(*path.waypoints.last().unwrap(), b);
        let dir = (b.position() - a.position()).normalize();
        let mut last_d = f64::INFINITY;
        for w in &path.waypoints {
            let v = w.position() - a.position();
            assert!((v - dir * v.dot(&dir)).norm() < 1e-12);
            let to_goal = w.translation_distance(&b);
            assert!(to_goal < last_d || to_goal == 0.0);
            last_d = to_goal;
        }
        for w in path.waypoints.windows(2) {
            assert!(w[0].translation_distance(&w[1]) <= 0.02 + 1e-12);
        }
    }

    #[test]
    fn rotation_steps_are_bounded() {
        let a = Pose::from_translation(0.0, 0.0, 1.0);
        let b = compose(&Pose::from_translation(0.05, 0.0, 1.0), &Pose::rot_z(1.0));
        let path = replan(&a, &b, &open_scene(), &dock(), &PlannerConfig::default(), &PlanContext::default()).unwrap();
        for w in path.waypoints.windows(2) {
            assert!(w[0].rotation_distance(&w[1]) <= 0.1 + 1e-9);
        }
    }

    #[test]
    fn sphere_obstacle_forces_detour() {
        let mut scene = open_scene();
        scene.static_shapes.push(CollisionShape::Sphere { center: [0.25, 0.0, 1.0], radius: 0.08 });
        let a = Pose::from_translation(0.0, 0.0, 1.0);
        let b = Pose::from_translation(0.5, 0.0, 1.0);
        let path = replan(&a, &b, &scene, &dock(), &PlannerConfig::default(), &PlanContext::default()).unwrap();
        assert!(path.waypoints.len() > 26);
        assert!(path_fault(&path.waypoints, &scene, &dock(), &[]).is_none());
        assert_eq!(path.waypoints[0], a);
        assert_eq!(*path.waypoints.last().unwrap(), b);
    }

    #[test]
    fn enclosed_goal_fails_with_shape() {
        let mut scene = open_scene();
        scene.static_shapes.push(CollisionShape::Sphere { center: [0.5, 0.0, 1.0], radius: 0.2 });
        let a = Pose::from_translation(0.0, 0.0, 1.0);
        let b = Pose::from_translation(0.5, 0.0, 1.0);
        let cfg = PlannerConfig { max_iters: 20, ..Default::default() };
        let err = replan(&a, &b, &scene, &dock(), &cfg, &PlanContext { segment_index: 2, ..Default::default() }).unwrap_err();
        assert_eq!(err, PlanError::Blocked { segment_index: 2, shape: ShapeRef::Static(0) });
    }

    #[test]
    fn retime_linear_and_endpoints() {
        let a = Pose::from_translation(0.0, 0.0, 0.0);
        let b = Pose::from_translation(1.0, 0.0, 0.0);
        let path = MotionPath { waypoints: vec![a, b], segment_index: 0 };
        let r = retime(&path, 5);
        for (i, p) in r.iter().enumerate() {
            assert!((p.position().x - i as f64 * 0.25).abs() < 1e-12);
        }
        assert_eq!(retime(&path, 2), vec![a, b]);
    }

    #[test]
    fn retime_spacing_is_uniform_on_polyline() {
        let a = Pose::from_translation(0.0, 0.0, 1.0);
        let b = Pose::from_translation(0.6, 0.1, 0.9);
        let path = MotionPath {
            waypoints: polyline(&a, &[Vector3::new(0.3, 0.4, 1.3)], &b, &PlannerConfig::default()),
            segment_index: 0,
        };
        let n = 17;
        let r = retime(&path, n);
        let step = path.arc_length() / (n - 1) as f64;
        // arc-length position of each sample along the polyline
        let w = &path.waypoints;
        let arc_of = |p: &Pose| {
            let mut acc = 0.0;
            let mut best = (f64::INFINITY, 0.0);
            for s in w.windows(2) {
                let (u, v) = (s[0].position(), s[1].position());
                let d = v - u;
                let t = ((p.position() - u).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
                let off = (u + d * t - p.position()).norm();
                if off < best.0 {
                    best = (off, acc + d.norm() * t);
                }
                acc += d.norm();
            }
            best.1
        };
        for (i, p) in r.iter().enumerate() {
            assert!((arc_of(p) - step * i as f64).abs() < 1e-6, "sample {i}");
        }
        assert_eq!(r[0], a);
        assert_eq!(r[n - 1], b);
    }

    #[test]
    fn retime_policy_parsing() {
        assert_eq!("match".parse::<RetimePolicy>(), Ok(RetimePolicy::MatchSourceSpacing));
        assert_eq!("fixed:12".parse::<RetimePolicy>(), Ok(RetimePolicy::Fixed(12)));
        assert!("fixed:0".parse::<RetimePolicy>().is_err());
        assert!("warp".parse::<RetimePolicy>().is_err());
    }
}

//! Demonstration data model: labeled clouds, robot state, actions and the
//! per-timestep observation/action pairs of one demonstration.

use std::fmt;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::{PlanarPose, Pose};

/// Numeric id of a scene object. Stored on disk as label code `2 + id`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObjectId(pub u8);

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "object:{}", self.0)
    }
}

/// Per-point semantic tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Other,
    Arm,
    Object(ObjectId),
}

impl Label {
    pub const MAX_OBJECT_ID: u8 = 253;

    pub fn code(self) -> u8 {
        match self {
            Label::Other => 0,
            Label::Arm => 1,
            Label::Object(ObjectId(k)) => 2 + k,
        }
    }

    pub fn from_code(code: u8) -> Self {
        match code {
            0 => Label::Other,
            1 => Label::Arm,
            c => Label::Object(ObjectId(c - 2)),
        }
    }

    /// Canonical ordering used when clouds are assembled: arm, objects by id, other.
    pub fn canonical_rank(self) -> u16 {
        match self {
            Label::Arm => 0,
            Label::Object(ObjectId(k)) => 1 + k as u16,
            Label::Other => 1 + 256,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Other => f.write_str("other"),
            Label::Arm => f.write_str("arm"),
            Label::Object(id) => id.fmt(f),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CloudError {
    #[error("{points} points but {labels} labels")]
    LabelCount { points: usize, labels: usize },
    #[error("{points} points but {colors} colors")]
    ColorCount { points: usize, colors: usize },
}

/// Labeled point set in the world frame.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
    labels: Vec<Label>,
    colors: Option<Vec<[f32; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>, labels: Vec<Label>) -> Result<Self, CloudError> {
        if points.len() != labels.len() {
            return Err(CloudError::LabelCount {
                points: points.len(),
                labels: labels.len(),
            });
        }
        Ok(Self {
            points,
            labels,
            colors: None,
        })
    }

    /// All points share one label.
    pub fn uniform(points: Vec<Point3<f64>>, label: Label) -> Self {
        let labels = vec![label; points.len()];
        Self {
            points,
            labels,
            colors: None,
        }
    }

    pub fn with_colors(mut self, colors: Vec<[f32; 3]>) -> Result<Self, CloudError> {
        if colors.len() != self.points.len() {
            return Err(CloudError::ColorCount {
                points: self.points.len(),
                colors: colors.len(),
            });
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn colors(&self) -> Option<&[[f32; 3]]> {
        self.colors.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.labels.iter().filter(|l| **l == label).count()
    }

    /// Sorted (label, count) histogram.
    pub fn label_histogram(&self) -> Vec<(Label, usize)> {
        let mut h = std::collections::BTreeMap::new();
        for l in &self.labels {
            *h.entry(*l).or_insert(0usize) += 1;
        }
        h.into_iter().collect()
    }

    /// Keeps the points at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    pub fn map_points(&self, mut f: impl FnMut(&Point3<f64>) -> Point3<f64>) -> Self {
        Self {
            points: self.points.iter().map(&mut f).collect(),
            labels: self.labels.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Appends `other`. Colors survive only when both sides carry them.
    pub fn extend(&mut self, other: &PointCloud) {
        let colors = match (self.colors.take(), &other.colors) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if self.points.is_empty() => Some(b.clone()),
            (Some(a), None) if other.points.is_empty() => Some(a),
            _ => None,
        };
        self.points.extend_from_slice(&other.points);
        self.labels.extend_from_slice(&other.labels);
        self.colors = colors;
    }

    /// Rounds every coordinate through `f32`, the on-disk precision.
    pub fn quantized(&self) -> Self {
        self.map_points(|p| p.map(|c| c as f32 as f64))
    }
}

/// End-effector pose plus gripper state (1 = closed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub ee_pose: Pose,
    pub gripper: f64,
}

/// Target end-effector pose plus gripper command (1 = close).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    pub target_pose: Pose,
    pub gripper_cmd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoFrame {
    pub t: u32,
    pub cloud: PointCloud,
    pub state: RobotState,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Source,
    Augmented { source_id: String, dock_id: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Demonstration {
    pub id: String,
    pub scene_id: String,
    pub docking: PlanarPose,
    pub provenance: Provenance,
    pub frames: Vec<DemoFrame>,
}

impl Demonstration {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn actions(&self) -> impl Iterator<Item = &Action> {
        self.frames.iter().map(|f| &f.action)
    }
}

/// What a dataset declares about its demonstrations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationRules {
    /// Required points per frame, when fixed.
    pub point_count: Option<usize>,
    /// Gripper states and commands must be exactly 0 or 1.
    pub binary_gripper: bool,
}

impl Default for ValidationRules {
    fn default() -> Self {
        Self {
            point_count: None,
            binary_gripper: true,
        }
    }
}

pub const QUATERNION_NORM_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    TooFewFrames(usize),
    TimestepGap { frame: usize, expected: u32, found: u32 },
    PointCount { frame: usize, expected: usize, found: usize },
    NonUnitQuaternion { frame: usize, field: &'static str, norm: f64 },
    NonFinite { frame: usize, field: &'static str },
    GripperRange { frame: usize, field: &'static str, value: f64 },
    EmptyId,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TooFewFrames(n) => write!(f, "demonstration has {n} frames, at least 2 required"),
            Violation::TimestepGap { frame, expected, found } => {
                write!(f, "frame {frame}: timestep {found}, expected {expected}")
            }
            Violation::PointCount { frame, expected, found } => {
                write!(f, "frame {frame}: {found} points, expected {expected}")
            }
            Violation::NonUnitQuaternion { frame, field, norm } => {
                write!(f, "frame {frame}: {field} quaternion norm {norm:.12}")
            }
            Violation::NonFinite { frame, field } => write!(f, "frame {frame}: non-finite {field}"),
            Violation::GripperRange { frame, field, value } => {
                write!(f, "frame {frame}: {field} = {value} outside the declared gripper domain")
            }
            Violation::EmptyId => f.write_str("empty demonstration or scene id"),
        }
    }
}

/// Lists every violated invariant; an empty list means the demo is valid.
pub fn validate_demo(d: &Demonstration, rules: &ValidationRules) -> Vec<Violation> {
    let mut out = Vec::new();
    if d.id.is_empty() || d.scene_id.is_empty() {
        out.push(Violation::EmptyId);
    }
    if d.frames.len() < 2 {
        out.push(Violation::TooFewFrames(d.frames.len()));
    }
    for (i, fr) in d.frames.iter().enumerate() {
        if fr.t as usize != i {
            out.push(Violation::TimestepGap {
                frame: i,
                expected: i as u32,
                found: fr.t,
            });
        }
        if let Some(n) = rules.point_count {
            if fr.cloud.len() != n {
                out.push(Violation::PointCount {
                    frame: i,
                    expected: n,
                    found: fr.cloud.len(),
                });
            }
        }
        if fr.cloud.points().iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            out.push(Violation::NonFinite { frame: i, field: "cloud" });
        }
        for (field, pose) in [("state", &fr.state.ee_pose), ("action", &fr.action.target_pose)] {
            let finite = pose.position().iter().chain(pose.wxyz().iter()).all(|c| c.is_finite());
            if !finite {
                out.push(Violation::NonFinite { frame: i, field });
                continue;
            }
            let norm = pose.quaternion_norm();
            if (norm - 1.0).abs() > QUATERNION_NORM_TOL {
                out.push(Violation::NonUnitQuaternion { frame: i, field, norm });
            }
        }
        for (field, value) in [("gripper", fr.state.gripper), ("gripper_cmd", fr.action.gripper_cmd)] {
            let ok = if rules.binary_gripper {
                value == 0.0 || value == 1.0
            } else {
                (0.0..=1.0).contains(&value)
            };
            if !ok {
                out.push(Violation::GripperRange { frame: i, field, value });
            }
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn tiny_demo(n_frames: usize, n_points: usize) -> Demonstration {
        let frames = (0..n_frames)
            .map(|t| {
                let pts: Vec<_> = (0..n_points)
                    .map(|i| Point3::new(i as f64 * 0.01, t as f64 * 0.1, 0.5))
                    .collect();
                let labels = (0..n_points)
                    .map(|i| match i % 3 {
                        0 => Label::Arm,
                        1 => Label::Object(ObjectId(0)),
                        _ => Label::Other,
                    })
                    .collect();
                DemoFrame {
                    t: t as u32,
                    cloud: PointCloud::new(pts, labels).unwrap(),
                    state: RobotState {
                        ee_pose: Pose::from_translation(0.0, t as f64 * 0.1, 1.0),
                        gripper: 0.0,
                    },
                    action: Action {
                        target_pose: Pose::from_translation(0.0, (t + 1) as f64 * 0.1, 1.0),
                        gripper_cmd: if t + 1 == n_frames { 1.0 } else { 0.0 },
                    },
                }
            })
            .collect();
        Demonstration {
            id: "demo".into(),
            scene_id: "scene".into(),
            docking: PlanarPose::new(-0.8, 0.0, 0.0),
            provenance: Provenance::Source,
            frames,
        }
    }

    #[test]
    fn label_codes_round_trip() {
        for c in 0..=255u8 {
            assert_eq!(Label::from_code(c).code(), c);
        }
        assert_eq!(Label::Object(ObjectId(3)).to_string(), "object:3");
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let e = PointCloud::new(vec![Point3::origin(); 3], vec![Label::Arm; 2]).unwrap_err();
        assert_eq!(e, CloudError::LabelCount { points: 3, labels: 2 });
        let c = PointCloud::uniform(vec![Point3::origin(); 2], Label::Arm);
        assert!(c.with_colors(vec![[0.0; 3]]).is_err());
    }

    #[test]
    fn valid_demo_has_empty_report() {
        let d = tiny_demo(3, 1024);
        let rules = ValidationRules {
            point_count: Some(1024),
            binary_gripper: true,
        };
        assert!(validate_demo(&d, &rules).is_empty());
    }

    #[test]
    fn wrong_point_count_names_frame() {
        let mut d = tiny_demo(3, 1024);
        d.frames[1].cloud = d.frames[1].cloud.select(&(0..1000).collect::<Vec<_>>());
        let rules = ValidationRules {
            point_count: Some(1024),
            binary_gripper: true,
        };
        let report = validate_demo(&d, &rules);
        assert_eq!(
            report,
            vec![Violation::PointCount {
                frame: 1,
                expected: 1024,
                found: 1000
            }]
        );
    }

    #[test]
    fn non_unit_quaternion_reports_norm() {
        let mut d = tiny_demo(2, 4);
        d.frames[0].action.target_pose = Pose::from_wxyz_unchecked([0.0; 3], [1.1, 0.0, 0.0, 0.0]);
        let report = validate_demo(&d, &ValidationRules::default());
        assert_eq!(report.len(), 1);
        let msg = report[0].to_string();
        assert!(msg.contains("1.1000"), "{msg}");
    }

    #[test]
    fn gripper_domain_and_timesteps() {
        let mut d = tiny_demo(3, 4);
        d.frames[2].state.gripper = 0.5;
        d.frames[1].t = 5;
        let report = validate_demo(&d, &ValidationRules::default());
        assert_eq!(report.len(), 2);
        let relaxed = ValidationRules {
            point_count: None,
            binary_gripper: false,
        };
        assert_eq!(validate_demo(&d, &relaxed).len(), 1);
        assert_eq!(validate_demo(&tiny_demo(1, 4), &relaxed), vec![Violation::TooFewFrames(1)]);
    }
}

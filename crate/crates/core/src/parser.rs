//! Splits a demonstration into alternating free-space motion and contact-rich
//! skill segments.
//!
//! A frame is a skill frame when its commanded end-effector position lies
//! strictly inside the sphere of radius `threshold` around some object's
//! first-frame centroid. Maximal runs are then debounced: a run shorter than
//! `min_seg_len` is absorbed into the run before it (the first run is kept as
//! is).

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::cloud::centroid;
use crate::cloud::extract_cluster;
use crate::demo::{Demonstration, Label, ObjectId};
use crate::geometry::Pose;
use crate::scene::Scene;

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_MIN_SEG_LEN: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Motion,
    Skill,
}

/// Half-open timestep span `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub start: usize,
    pub end: usize,
    /// Bound object, skill segments only.
    pub object: Option<ObjectId>,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        (self.start..self.end).contains(&t)
    }

    pub fn is_skill(&self) -> bool {
        self.kind == SegmentKind::Skill
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParsedTrajectory {
    pub segments: Vec<Segment>,
    pub threshold: f64,
}

impl ParsedTrajectory {
    pub fn total_len(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end)
    }

    /// Per-frame kinds, reconstructed from the segment table.
    pub fn frame_kinds(&self) -> Vec<SegmentKind> {
        self.segments.iter().flat_map(|s| std::iter::repeat_n(s.kind, s.len())).collect()
    }

    pub fn segment_at(&self, t: usize) -> Option<&Segment> {
        self.segments.iter().find(|s| s.contains(t))
    }

    pub fn skills(&self) -> impl Iterator<Item = &Segment> {
        self.segments.iter().filter(|s| s.is_skill())
    }

    /// Tiling and alternation invariants.
    pub fn check(&self, len: usize) -> Result<(), ParseError> {
        let mut next = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start != next || s.start >= s.end {
                return Err(ParseError::Malformed(format!("segment {i} spans [{}, {})", s.start, s.end)));
            }
            if i > 0 && self.segments[i - 1].kind == s.kind {
                return Err(ParseError::Malformed(format!("segments {} and {i} share a kind", i - 1)));
            }
            next = s.end;
        }
        if next != len {
            return Err(ParseError::Malformed(format!("segments cover {next} of {len} frames")));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ParseError {
    #[error("no skill segment: no frame comes within the threshold of an object")]
    NoSkillSegment,
    #[error("scene has no objects with a first-frame centroid")]
    EmptyScene,
    #[error("demonstration has no frames")]
    EmptyDemo,
    #[error("malformed segment table: {0}")]
    Malformed(String),
}

/// Strictly inside the object sphere.
pub fn object_radius_check(ee: &Pose, obj_centroid: &Vector3<f64>, threshold: f64) -> bool {
    (ee.position() - obj_centroid).norm() < threshold
}

/// Distance of one frame to its nearest object.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameDistance {
    pub distance: f64,
    pub nearest: ObjectId,
}

/// Segmentation from precomputed per-frame distances.
pub fn parse_distances(dist: &[FrameDistance], threshold: f64, min_seg_len: usize) -> Result<ParsedTrajectory, ParseError> {
    if dist.is_empty() {
        return Err(ParseError::EmptyDemo);
    }
    let skill: Vec<bool> = dist.iter().map(|d| d.distance < threshold).collect();

    // maximal runs
    let mut runs: Vec<(bool, usize, usize)> = Vec::new();
    for (t, &s) in skill.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == s => r.2 = t + 1,
            _ => runs.push((s, t, t + 1)),
        }
    }

    // debounce into the predecessor, merging equal neighbours
    let mut merged: Vec<(bool, usize, usize)> = Vec::new();
    for r in runs {
        match merged.last_mut() {
            Some(prev) if r.2 - r.1 < min_seg_len || prev.0 == r.0 => prev.2 = r.2,
            _ => merged.push(r),
        }
    }

    if !merged.iter().any(|r| r.0) {
        return Err(ParseError::NoSkillSegment);
    }
    let segments = merged
        .into_iter()
        .map(|(s, start, end)| Segment {
            kind: if s { SegmentKind::Skill } else { SegmentKind::Motion },
            start,
            end,
            object: s.then_some(dist[start].nearest),
        })
        .collect();
    Ok(ParsedTrajectory { segments, threshold })
}

/// First-frame centroid of every scene object visible in the demo's first cloud.
pub fn object_centroids(demo: &Demonstration, scene: &Scene) -> Vec<(ObjectId, Vector3<f64>)> {
    let Some(first) = demo.frames.first() else {
        return Vec::new();
    };
    scene
        .objects
        .iter()
        .filter_map(|o| {
            let cluster = extract_cluster(&first.cloud, Label::Object(o.id));
            centroid(&cluster).ok().map(|c| (o.id, c))
        })
        .collect()
}

pub fn frame_distances(demo: &Demonstration, centroids: &[(ObjectId, Vector3<f64>)]) -> Vec<FrameDistance> {
    demo.frames
        .iter()
        .map(|f| {
            let p = f.action.target_pose.position();
            let mut best = FrameDistance {
                distance: f64::INFINITY,
                nearest: centroids[0].0,
            };
            for (id, c) in centroids {
                let d = (p - c).norm();
                if d < best.distance {
                    best = FrameDistance { distance: d, nearest: *id };
                }
            }
            best
        })
        .collect()
}

pub fn parse(demo: &Demonstration, scene: &Scene, threshold: f64, min_seg_len: usize) -> Result<ParsedTrajectory, ParseError> {
    if demo.frames.is_empty() {
        return Err(ParseError::EmptyDemo);
    }
    let centroids = object_centroids(demo, scene);
    if centroids.is_empty() {
        return Err(ParseError::EmptyScene);
    }
    parse_distances(&frame_distances(demo, &centroids), threshold, min_seg_len)
}

//! Cloud preprocessing: box crop, farthest-point downsampling, label clusters.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::demo::{Label, PointCloud};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CloudOpError {
    #[error("cannot take {k} points from a cloud of {n}")]
    Size { k: usize, n: usize },
    #[error("operation needs a non-empty cloud")]
    Empty,
    #[error("box min corner exceeds max corner")]
    InvalidBox,
}

/// Axis-aligned box, closed on every face.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self, CloudOpError> {
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(CloudOpError::InvalidBox);
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Points inside the closed box, original order.
pub fn crop_aabb(pc: &PointCloud, bx: &Aabb) -> PointCloud {
    let keep: Vec<usize> = pc
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| bx.contains(p))
        .map(|(i, _)| i)
        .collect();
    pc.select(&keep)
}

/// Greedy farthest-point sampling of `k` points, returned in selection order.
///
/// The first point is `seed mod N`; every later pick maximizes the distance
/// to the selected set, lowest index winning ties.
pub fn fps_indices(points: &[Point3<f64>], k: usize, seed: u64) -> Result<Vec<usize>, CloudOpError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(CloudOpError::Size { k, n });
    }
    let mut selected = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut cur = (seed % n as u64) as usize;
    for _ in 0..k {
        selected.push(cur);
        taken[cur] = true;
        let c = points[cur];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = (points[i] - c).norm_squared();
            if d < min_d2[i] {
                min_d2[i] = d;
            }
            if min_d2[i] > best_d {
                best_d = min_d2[i];
                best = i;
            }
        }
        cur = best;
    }
    Ok(selected)
}

pub fn fps_downsample(pc: &PointCloud, k: usize, seed: u64) -> Result<PointCloud, CloudOpError> {
    Ok(pc.select(&fps_indices(pc.points(), k, seed)?))
}

/// Points carrying `label`, original order.
pub fn extract_cluster(pc: &PointCloud, label: Label) -> PointCloud {
    let keep: Vec<usize> = pc
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l == label)
        .map(|(i, _)| i)
        .collect();
    pc.select(&keep)
}

pub fn centroid(pc: &PointCloud) -> Result<Vector3<f64>, CloudOpError> {
    centroid_of(pc.points())
}

pub fn centroid_of(points: &[Point3<f64>]) -> Result<Vector3<f64>, CloudOpError> {
    if points.is_empty() {
        return Err(CloudOpError::Empty);
    }
    let sum = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords);
    Ok(sum / points.len() as f64)
}

pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud>) -> PointCloud {
    let mut out = PointCloud::default();
    for p in parts {
        out.extend(p);
    }
    out
}

/// Reorders a cloud into canonical label order (arm, objects by id, other),
/// stable within a label.
pub fn canonical_order(pc: &PointCloud) -> PointCloud {
    let mut idx: Vec<usize> = (0..pc.len()).collect();
    idx.sort_by_key(|&i| pc.labels()[i].canonical_rank());
    pc.select(&idx)
}

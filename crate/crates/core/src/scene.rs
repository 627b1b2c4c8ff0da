//! Scene description shared by the sampler, the planner and the replay harness.

use std::fmt;

use nalgebra::{Point3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::demo::ObjectId;
use crate::geometry::{planar_to_world, PlanarPose, Pose};
use crate::harness::SuccessPredicate;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SceneError {
    #[error("scene `{0}`: r_min must be below r_max")]
    Reach(String),
    #[error("scene `{0}`: z_min must be below z_max")]
    Height(String),
    #[error("scene `{0}`: field of view must lie in (0, pi)")]
    Fov(String),
    #[error("scene `{0}`: duplicate object id {1}")]
    DuplicateObject(String, ObjectId),
    #[error("scene `{0}`: object {1} has no points")]
    EmptyObject(String, ObjectId),
}

/// Solid primitive in the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CollisionShape {
    Sphere { center: [f64; 3], radius: f64 },
    Box { pose: Pose, half_extents: [f64; 3] },
}

impl CollisionShape {
    /// Signed distance from `p` to the surface (negative inside).
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            CollisionShape::Sphere { center, radius } => (p - Vector3::from(*center)).norm() - radius,
            CollisionShape::Box { pose, half_extents } => {
                let local = pose.isometry().inverse_transform_point(&Point3::from(*p)).coords;
                let q = local.abs() - Vector3::from(*half_extents);
                let outside = q.map(|c| c.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
        }
    }

    /// Minimum signed distance over the segment `a`..`b`.
    pub fn segment_distance(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
        match self {
            CollisionShape::Sphere { center, radius } => {
                let c = Vector3::from(*center);
                let d = b - a;
                let len2 = d.norm_squared();
                let s = if len2 > 0.0 { ((c - a).dot(&d) / len2).clamp(0.0, 1.0) } else { 0.0 };
                (a + d * s - c).norm() - radius
            }
            CollisionShape::Box { .. } => {
                // The signed distance to a convex solid is convex along a line.
                let f = |s: f64| self.signed_distance(&(a + (b - a) * s));
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                let g = (5f64.sqrt() - 1.0) / 2.0;
                let mut x1 = hi - g * (hi - lo);
                let mut x2 = lo + g * (hi - lo);
                let (mut f1, mut f2) = (f(x1), f(x2));
                for _ in 0..80 {
                    if f1 <= f2 {
                        hi = x2;
                        x2 = x1;
                        f2 = f1;
                        x1 = hi - g * (hi - lo);
                        f1 = f(x1);
                    } else {
                        lo = x1;
                        x1 = x2;
                        f1 = f2;
                        x2 = lo + g * (hi - lo);
                        f2 = f(x2);
                    }
                }
                f1.min(f2).min(f(0.0)).min(f(1.0))
            }
        }
    }

    /// Whether the open segment from `a` to `b` passes through the interior.
    pub fn blocks_segment(&self, a: &Vector3<f64>, b: &Vector3<f64>) -> bool {
        match self {
            CollisionShape::Sphere { .. } => self.segment_distance(a, b) < 0.0,
            CollisionShape::Box { pose, half_extents } => {
                let iso = pose.isometry();
                let la = iso.inverse_transform_point(&Point3::from(*a)).coords;
                let lb = iso.inverse_transform_point(&Point3::from(*b)).coords;
                let d = lb - la;
                let (mut t0, mut t1) = (0.0f64, 1.0f64);
                for k in 0..3 {
                    let h = half_extents[k];
                    if d[k].abs() < 1e-15 {
                        if la[k] <= -h || la[k] >= h {
                            return false;
                        }
                    } else {
                        let mut ta = (-h - la[k]) / d[k];
                        let mut tb = (h - la[k]) / d[k];
                        if ta > tb {
                            std::mem::swap(&mut ta, &mut tb);
                        }
                        t0 = t0.max(ta);
                        t1 = t1.min(tb);
                        if t0 >= t1 {
                            return false;
                        }
                    }
                }
                true
            }
        }
    }

    pub fn top_z(&self) -> f64 {
        match self {
            CollisionShape::Sphere { center, radius } => center[2] + radius,
            CollisionShape::Box { pose, half_extents } => {
                let h = Vector3::from(*half_extents);
                let mut top = f64::NEG_INFINITY;
                for sx in [-1.0, 1.0] {
                    for sy in [-1.0, 1.0] {
                        for sz in [-1.0, 1.0] {
                            let c = pose.transform_point(&Point3::new(sx * h.x, sy * h.y, sz * h.z));
                            top = top.max(c.z);
                        }
                    }
                }
                top
            }
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        match self {
            CollisionShape::Sphere { center, .. } => Vector3::from(*center),
            CollisionShape::Box { pose, .. } => pose.position(),
        }
    }

    /// Same solid after a rigid move `delta` applied in the world frame.
    pub fn moved(&self, delta: &Pose) -> CollisionShape {
        match self {
            CollisionShape::Sphere { center, radius } => {
                let c = delta.transform_point(&Point3::from(*center));
                CollisionShape::Sphere {
                    center: [c.x, c.y, c.z],
                    radius: *radius,
                }
            }
            CollisionShape::Box { pose, half_extents } => CollisionShape::Box {
                pose: crate::geometry::compose(delta, pose),
                half_extents: *half_extents,
            },
        }
    }
}

/// Convex polygon on the floor plane, counter-clockwise or clockwise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<[f64; 2]>,
}

impl Polygon {
    pub fn rectangle(min: [f64; 2], max: [f64; 2]) -> Self {
        Self {
            vertices: vec![min, [max[0], min[1]], max, [min[0], max[1]]],
        }
    }

    pub fn contains(&self, p: &Vector2<f64>) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let mut sign = 0.0f64;
        for i in 0..n {
            let a = Vector2::from(self.vertices[i]);
            let b = Vector2::from(self.vertices[(i + 1) % n]);
            let cross = (b - a).perp(&(p - a));
            if cross.abs() < 1e-15 {
                continue;
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
        true
    }

    pub fn distance_to_boundary(&self, p: &Vector2<f64>) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let a = Vector2::from(self.vertices[i]);
                let b = Vector2::from(self.vertices[(i + 1) % n]);
                let d = b - a;
                let s = if d.norm_squared() > 0.0 { ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0) } else { 0.0 };
                (a + d * s - p).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn intersects_disk(&self, center: &Vector2<f64>, radius: f64) -> bool {
        self.contains(center) || self.distance_to_boundary(center) < radius
    }
}

/// Fixed third-person camera. Optical axis is +z of `pose`, +x right, +y down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub pose: Pose,
    pub hfov: f64,
    pub vfov: f64,
}

impl Camera {
    /// Camera at `eye` looking at `target` with world +z as up.
    pub fn looking_at(eye: Vector3<f64>, target: Vector3<f64>, hfov: f64, vfov: f64) -> Self {
        let z = (target - eye).normalize();
        let x = z.cross(&Vector3::z()).normalize();
        let y = z.cross(&x);
        let m = nalgebra::Matrix3::from_columns(&[x, y, z]);
        let rot = nalgebra::UnitQuaternion::from_matrix(&m);
        Self {
            pose: Pose::new(eye, rot),
            hfov,
            vfov,
        }
    }

    pub fn in_frustum(&self, p: &Vector3<f64>) -> bool {
        let q = self.pose.isometry().inverse_transform_point(&Point3::from(*p));
        q.z > 0.0 && (q.x / q.z).abs() <= (self.hfov / 2.0).tan() && (q.y / q.z).abs() <= (self.vfov / 2.0).tan()
    }
}

/// Reach annulus around the base: horizontal radius and world height bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Workspace {
    /// Signed distance of `p` to the annulus boundary, positive inside.
    pub fn margin(&self, dock: &PlanarPose, p: &Vector3<f64>) -> f64 {
        let r = (Vector2::new(p.x, p.y) - dock.xy()).norm();
        (r - self.r_min).min(self.r_max - r).min(p.z - self.z_min).min(self.z_max - p.z)
    }
}

/// Mobile base geometry and the arm's home pose relative to the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    pub footprint_radius: f64,
    /// Half extents (x, y) of the torso box used as a camera occluder.
    pub body_half_extents: [f64; 2],
    pub body_height: f64,
    /// Height of the base frame above the floor.
    pub mount_height: f64,
    /// End-effector home pose in the base frame.
    pub home: Pose,
}

impl RobotModel {
    pub fn base_pose(&self, dock: &PlanarPose) -> Pose {
        planar_to_world(dock, self.mount_height)
    }

    pub fn body_box(&self, dock: &PlanarPose) -> CollisionShape {
        CollisionShape::Box {
            pose: planar_to_world(dock, self.body_height / 2.0),
            half_extents: [self.body_half_extents[0], self.body_half_extents[1], self.body_height / 2.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: ObjectId,
    pub name: String,
    /// Initial object pose.
    pub pose: Pose,
    /// Collision solid at the initial pose.
    pub shape: CollisionShape,
    /// Labeled surface points at the initial pose (world frame).
    pub points: Vec<[f64; 3]>,
}

impl SceneObject {
    pub fn points_world(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.points.iter().map(|p| Vector3::from(*p))
    }
}

/// Which solid a collision or occlusion refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum ShapeRef {
    Object(ObjectId),
    Static(usize),
    Floor(usize),
    Body,
}

impl fmt::Display for ShapeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeRef::Object(id) => id.fmt(f),
            ShapeRef::Static(i) => write!(f, "static:{i}"),
            ShapeRef::Floor(i) => write!(f, "floor:{i}"),
            ShapeRef::Body => f.write_str("robot-body"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub id: String,
    pub objects: Vec<SceneObject>,
    /// Fixed solids such as the table and posts.
    pub static_shapes: Vec<CollisionShape>,
    /// Floor regions the base footprint must avoid.
    pub floorplan: Vec<Polygon>,
    pub camera: Camera,
    pub workspace: Workspace,
    pub robot: RobotModel,
    /// End-effector clearance used by collision checks.
    pub clearance: f64,
    pub min_visible_fraction: f64,
    pub task: Option<SuccessPredicate>,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SceneError> {
        let w = &self.workspace;
        if !(w.r_min < w.r_max) {
            return Err(SceneError::Reach(self.id.clone()));
        }
        if !(w.z_min < w.z_max) {
            return Err(SceneError::Height(self.id.clone()));
        }
        let fov_ok = |f: f64| f > 0.0 && f < std::f64::consts::PI;
        if !(fov_ok(self.camera.hfov) && fov_ok(self.camera.vfov)) {
            return Err(SceneError::Fov(self.id.clone()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateObject(self.id.clone(), o.id));
            }
            if o.points.is_empty() {
                return Err(SceneError::EmptyObject(self.id.clone(), o.id));
            }
        }
        Ok(())
    }

    pub fn object(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// End-effector home pose in the world for a base at `dock`.
    pub fn home_at(&self, dock: &PlanarPose) -> Pose {
        crate::geometry::compose(&self.robot.base_pose(dock), &self.robot.home)
    }

    /// Re-expresses a world pose taken with the base at `from` for a base at `to`.
    pub fn rebase(&self, pose: &Pose, from: &PlanarPose, to: &PlanarPose) -> Pose {
        use crate::geometry::{compose, inverse};
        let rel = compose(&inverse(&self.robot.base_pose(from)), pose);
        compose(&self.robot.base_pose(to), &rel)
    }

    /// Solids the end-effector must keep clear of, skipping `ignore`d objects.
    pub fn ee_obstacles<'a>(&'a self, ignore: &'a [ObjectId]) -> impl Iterator<Item = (ShapeRef, &'a CollisionShape)> + 'a {
        self.objects
            .iter()
            .filter(move |o| !ignore.contains(&o.id))
            .map(|o| (ShapeRef::Object(o.id), &o.shape))
            .chain(self.static_shapes.iter().enumerate().map(|(i, s)| (ShapeRef::Static(i), s)))
    }

    /// First floorplan polygon hit by the base footprint at `dock`.
    pub fn footprint_collision(&self, dock: &PlanarPose) -> Option<ShapeRef> {
        self.floorplan
            .iter()
            .position(|poly| poly.intersects_disk(&dock.xy(), self.robot.footprint_radius))
            .map(ShapeRef::Floor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_and_box_distances() {
        let s = CollisionShape::Sphere { center: [0.0, 0.0, 0.0], radius: 1.0 };
        assert!((s.signed_distance(&Vector3::new(2.0, 0.0, 0.0)) - 1.0).abs() < 1e-12);
        assert!((s.segment_distance(&Vector3::new(-2.0, 0.5, 0.0), &Vector3::new(2.0, 0.5, 0.0)) + 0.5).abs() < 1e-12);
        let b = CollisionShape::Box { pose: Pose::rot_z(0.3), half_extents: [1.0, 0.5, 0.25] };
        assert!((b.signed_distance(&Vector3::new(0.0, 0.0, 1.25)) - 1.0).abs() < 1e-12);
        assert!((b.signed_distance(&Vector3::zeros()) + 0.25).abs() < 1e-12);
        let d = b.segment_distance(&Vector3::new(-3.0, 0.0, 0.5), &Vector3::new(3.0, 0.0, 0.5));
        assert!((d - 0.25).abs() < 1e-9, "{d}");
        assert!((b.top_z() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn box_slab_blocking() {
        let b = CollisionShape::Box { pose: Pose::identity(), half_extents: [0.5, 0.5, 0.5] };
        assert!(b.blocks_segment(&Vector3::new(-1.0, 0.0, 0.0), &Vector3::new(1.0, 0.0, 0.0)));
        assert!(!b.blocks_segment(&Vector3::new(-1.0, 0.6, 0.0), &Vector3::new(1.0, 0.6, 0.0)));
        assert!(!b.blocks_segment(&Vector3::new(-2.0, 0.0, 0.0), &Vector3::new(-1.0, 0.0, 0.0)));
        // ending on the surface is not blocked
        assert!(!b.blocks_segment(&Vector3::new(0.0, 0.0, 2.0), &Vector3::new(0.0, 0.0, 0.5)));
    }

    #[test]
    fn polygon_disk() {
        let p = Polygon::rectangle([0.0, 0.0], [1.0, 1.0]);
        assert!(p.contains(&Vector2::new(0.5, 0.5)));
        assert!(!p.contains(&Vector2::new(1.5, 0.5)));
        assert!(p.intersects_disk(&Vector2::new(1.2, 0.5), 0.25));
        assert!(!p.intersects_disk(&Vector2::new(1.3, 0.5), 0.25));
    }

    #[test]
    fn camera_frustum() {
        let cam = Camera::looking_at(Vector3::new(0.0, 0.0, 2.0), Vector3::new(1.0, 0.0, 0.0), 1.0, 1.0);
        assert!(cam.in_frustum(&Vector3::new(1.0, 0.0, 0.0)));
        assert!(!cam.in_frustum(&Vector3::new(-1.0, 0.0, 0.0)));
    }

    #[test]
    fn annulus_margin() {
        let w = Workspace { r_min: 0.3, r_max: 1.0, z_min: 0.5, z_max: 1.5 };
        let dock = PlanarPose::new(0.0, 0.0, 0.0);
        assert!((w.margin(&dock, &Vector3::new(0.6, 0.0, 1.0)) - 0.3).abs() < 1e-12);
        assert!(w.margin(&dock, &Vector3::new(10.0, 0.0, 1.0)) < -8.0);
    }
}

//! SE(3) / SE(2) pose algebra and rigid transformation of labeled point sets.
//!
//! Conventions: quaternions are (w, x, y, z), frames are right-handed, all
//! lengths are meters and all angles radians. A [`Pose`] is read as the map
//! from its local frame into the world frame, so `compose(a, b)` applies `b`
//! first and then `a`.
//!
//! The point-cloud edit of an end-effector relocation is a conjugation through
//! the source end-effector frame: a world point is expressed in the source
//! frame, moved by the relative transform, and re-expressed in the world. With
//! an identity relative transform the cloud is untouched, and with a relocated
//! end-effector the cloud moves rigidly with it.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{Isometry3, Point3, Quaternion, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::demo::PointCloud;

/// Rigid pose: position in meters plus a unit quaternion.
#[derive(Clone, Copy, PartialEq)]
pub struct Pose {
    iso: Isometry3<f64>,
}

impl fmt::Debug for Pose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.position();
        let q = self.wxyz();
        write!(
            f,
            "Pose(p=[{:.6}, {:.6}, {:.6}], q=[{:.6}, {:.6}, {:.6}, {:.6}])",
            p.x, p.y, p.z, q[0], q[1], q[2], q[3]
        )
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            iso: Isometry3::identity(),
        }
    }

    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            iso: Isometry3::from_parts(Translation3::from(position), orientation),
        }
    }

    /// Builds a pose from a raw (w, x, y, z) quaternion, normalizing it.
    pub fn from_wxyz(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(Vector3::from(position), UnitQuaternion::from_quaternion(q))
    }

    /// Keeps the quaternion exactly as given. Used by readers that must report
    /// non-unit quaternions instead of silently repairing them.
    pub fn from_wxyz_unchecked(position: [f64; 3], wxyz: [f64; 4]) -> Self {
        let q = Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
        Self::new(Vector3::from(position), UnitQuaternion::new_unchecked(q))
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vector3::new(x, y, z), UnitQuaternion::identity())
    }

    pub fn from_rotation(orientation: UnitQuaternion<f64>) -> Self {
        Self::new(Vector3::zeros(), orientation)
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle))
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::y_axis(), angle))
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_rotation(UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle))
    }

    pub fn position(&self) -> Vector3<f64> {
        self.iso.translation.vector
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.iso.rotation
    }

    pub fn isometry(&self) -> &Isometry3<f64> {
        &self.iso
    }

    /// Quaternion coefficients in (w, x, y, z) order.
    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.iso.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn quaternion_norm(&self) -> f64 {
        self.iso.rotation.quaternion().norm()
    }

    pub fn with_position(mut self, position: Vector3<f64>) -> Self {
        self.iso.translation.vector = position;
        self
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        self.iso.transform_point(p)
    }

    /// Euclidean distance between the two positions.
    pub fn translation_distance(&self, other: &Pose) -> f64 {
        (self.position() - other.position()).norm()
    }

    /// Geodesic rotation angle between the two orientations.
    pub fn rotation_distance(&self, other: &Pose) -> f64 {
        self.orientation().angle_to(&other.orientation())
    }

    /// Position error plus double-cover-aware quaternion distance, both within `tol`.
    pub fn approx_eq(&self, other: &Pose, tol: f64) -> bool {
        (self.position() - other.position()).amax() <= tol
            && quaternion_distance(&self.orientation(), &other.orientation()) <= tol
    }

    /// Pose at fraction `f` along the straight segment to `other`: linear in
    /// position, spherical in orientation along the shorter arc.
    pub fn interpolate(&self, other: &Pose, f: f64) -> Pose {
        if f <= 0.0 {
            return *self;
        }
        if f >= 1.0 {
            return *other;
        }
        let p = self.position().lerp(&other.position(), f);
        Pose::new(p, slerp_shortest(&self.orientation(), &other.orientation(), f))
    }
}

/// min(|q1 - q2|, |q1 + q2|): zero for the same rotation regardless of sign.
pub fn quaternion_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let qa = a.quaternion().coords;
    let qb = b.quaternion().coords;
    (qa - qb).norm().min((qa + qb).norm())
}

fn slerp_shortest(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, f: f64) -> UnitQuaternion<f64> {
    let b = if a.quaternion().dot(b.quaternion()) < 0.0 {
        UnitQuaternion::new_unchecked(-b.into_inner())
    } else {
        *b
    };
    // slerp of nearby rotations drifts off the unit sphere by ~1e-10
    let q = a.try_slerp(&b, f, 1e-12).unwrap_or(*a);
    UnitQuaternion::new_normalize(q.into_inner())
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    position: [f64; 3],
    orientation: [f64; 4],
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let p = self.position();
        PoseRepr {
            position: [p.x, p.y, p.z],
            orientation: self.wxyz(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        let n = r.orientation.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(n.is_finite() && n > 0.5) {
            return Err(serde::de::Error::custom(format!(
                "degenerate quaternion with norm {n}"
            )));
        }
        // Stored unit quaternions come back bit-exact; only drifted ones
        // are renormalized.
        if (n - 1.0).abs() <= 1e-12 {
            Ok(Pose::from_wxyz_unchecked(r.position, r.orientation))
        } else {
            Ok(Pose::from_wxyz(r.position, r.orientation))
        }
    }
}

/// A frame-to-frame rigid map. Same layout as [`Pose`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform(pub Pose);

impl RigidTransform {
    pub fn identity() -> Self {
        Self(Pose::identity())
    }

    pub fn as_pose(&self) -> &Pose {
        &self.0
    }

    /// True when the transform is bit-for-bit the identity.
    pub fn is_exact_identity(&self) -> bool {
        self.0 == Pose::identity()
    }

    pub fn is_identity(&self, tol: f64) -> bool {
        self.0.approx_eq(&Pose::identity(), tol)
    }
}

/// Planar base placement; yaw always lies in (-π, π].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl PlanarPose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn xy(&self) -> nalgebra::Vector2<f64> {
        nalgebra::Vector2::new(self.x, self.y)
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let r = a.rem_euclid(two_pi);
    if r > PI {
        r - two_pi
    } else {
        r
    }
}

pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose { iso: a.iso * b.iso }
}

pub fn inverse(a: &Pose) -> Pose {
    Pose {
        iso: a.iso.inverse(),
    }
}

/// The transform taking `src` onto `dst`: `compose(src, relative_transform(src, dst)) == dst`.
pub fn relative_transform(src: &Pose, dst: &Pose) -> RigidTransform {
    RigidTransform(compose(&inverse(src), dst))
}

/// Moves every point by `t` expressed in the `frame_anchor` frame. Labels,
/// colors and order are kept.
pub fn transform_points(points: &PointCloud, t: &RigidTransform, frame_anchor: &Pose) -> PointCloud {
    if t.is_exact_identity() {
        return points.clone();
    }
    let world_map = frame_anchor.iso * t.0.iso * frame_anchor.iso.inverse();
    points.map_points(|p| world_map.transform_point(p))
}

/// Embeds a planar base pose at the given height above the floor.
pub fn planar_to_world(p: &PlanarPose, base_height: f64) -> Pose {
    compose(&Pose::from_translation(p.x, p.y, base_height), &Pose::rot_z(p.yaw))
}

/// Projects a pose to the floor plane, keeping its heading.
pub fn world_to_planar(p: &Pose) -> PlanarPose {
    let r = p.orientation().to_rotation_matrix();
    let m = r.matrix();
    PlanarPose::new(p.position().x, p.position().y, m[(1, 0)].atan2(m[(0, 0)]))
}

//! Rigid transforms and quaternion helpers shared by every module.
//!
//! Orientation is always a unit quaternion stored and serialized in
//! `(w, x, y, z)` order.

use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type Vec3 = Vector3<f64>;
pub type Quat = UnitQuaternion<f64>;

/// A rigid transform: rotation followed by translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub pos: Vec3,
    pub rot: Quat,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            pos: Vec3::zeros(),
            rot: Quat::identity(),
        }
    }

    pub fn new(pos: Vec3, rot: Quat) -> Self {
        Self { pos, rot }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vec3::new(x, y, z), Quat::identity())
    }

    /// `self * other`: express `other` (given in this frame) in the parent frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            pos: self.pos + self.rot * other.pos,
            rot: self.rot * other.rot,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rot = self.rot.inverse();
        Pose {
            pos: -(rot * self.pos),
            rot,
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.pos + self.rot * p
    }

    /// Pose of `other` expressed in this frame.
    pub fn relative(&self, other: &Pose) -> Pose {
        self.inverse().compose(other)
    }

    pub fn is_finite(&self) -> bool {
        self.pos.iter().all(|v| v.is_finite()) && self.rot.coords.iter().all(|v| v.is_finite())
    }
}

/// Quaternion from raw `(w, x, y, z)` components without normalizing.
pub fn quat_wxyz(w: f64, x: f64, y: f64, z: f64) -> Quat {
    UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z))
}

pub fn quat_to_wxyz(q: &Quat) -> [f64; 4] {
    [q.w, q.i, q.j, q.k]
}

/// Normalized quaternion from `(w, x, y, z)`; `None` for a zero or non-finite input.
pub fn quat_normalized(w: f64, x: f64, y: f64, z: f64) -> Option<Quat> {
    let q = Quaternion::new(w, x, y, z);
    let n = q.norm();
    if !n.is_finite() || n < 1e-12 {
        return None;
    }
    Some(UnitQuaternion::new_unchecked(q / n))
}

/// Geodesic angle in `[0, pi]` between two rotations; `q` and `-q` are the same rotation.
pub fn geodesic_angle(a: &Quat, b: &Quat) -> f64 {
    // The product below is not exactly the identity for equal inputs.
    if a == b {
        return 0.0;
    }
    let rel = a.inverse() * b;
    let v = rel.imag().norm();
    2.0 * v.atan2(rel.w.abs())
}

/// Rotation vector (axis * angle) of `q`, on the shortest branch (angle in `[0, pi]`).
pub fn log_rotation(q: &Quat) -> Vec3 {
    let (w, v) = if q.w < 0.0 {
        (-q.w, -q.imag())
    } else {
        (q.w, q.imag())
    };
    let s = v.norm();
    if s < 1e-300 {
        return Vec3::zeros();
    }
    let angle = 2.0 * s.atan2(w);
    v * (angle / s)
}

/// Inverse of [`log_rotation`].
pub fn exp_rotation(v: &Vec3) -> Quat {
    UnitQuaternion::from_scaled_axis(*v)
}

/// Renormalize a quaternion that has drifted off the unit sphere.
pub fn renormalize(q: &Quat) -> Quat {
    let n = q.quaternion().norm();
    UnitQuaternion::new_unchecked(q.quaternion() / n)
}

/// URDF-style fixed-axis roll/pitch/yaw (`R = Rz(yaw) Ry(pitch) Rx(roll)`).
pub fn quat_from_rpy(roll: f64, pitch: f64, yaw: f64) -> Quat {
    UnitQuaternion::from_euler_angles(roll, pitch, yaw)
}

pub fn quat_to_rpy(q: &Quat) -> (f64, f64, f64) {
    q.euler_angles()
}

/// Rotation from an orthonormal basis given as matrix columns. The columns are
/// re-orthonormalized first.
pub fn quat_from_matrix(m: &Matrix3<f64>) -> Quat {
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix(m))
}

/// Orientation of a camera at `eye` looking at `target`, in the optical
/// convention (local +z forward, +x right, +y down). `up` is the world up hint.
pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3) -> Quat {
    let fwd = (target - eye).normalize();
    let mut right = fwd.cross(up);
    if right.norm() < 1e-9 {
        right = fwd.cross(&Vec3::x());
        if right.norm() < 1e-9 {
            right = fwd.cross(&Vec3::y());
        }
    }
    let right = right.normalize();
    let down = fwd.cross(&right);
    quat_from_matrix(&Matrix3::from_columns(&[right, down, fwd]))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseRepr {
    #[serde(default)]
    pos: [f64; 3],
    #[serde(default = "identity_wxyz")]
    rot: [f64; 4],
}

fn identity_wxyz() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

impl Serialize for Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            pos: [self.pos.x, self.pos.y, self.pos.z],
            rot: quat_to_wxyz(&self.rot),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = PoseRepr::deserialize(d)?;
        Ok(Pose {
            pos: Vec3::new(r.pos[0], r.pos[1], r.pos[2]),
            rot: quat_wxyz(r.rot[0], r.rot[1], r.rot[2], r.rot[3]),
        })
    }
}

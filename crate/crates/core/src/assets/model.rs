use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AssetError;
use crate::config::MaterialParams;
use crate::math::{geodesic_angle, Pose, Vec3};

/// Kinematic tree of bodies connected by joints; the interchange form between
/// URDF and MJCF.
///
/// Every non-root body has exactly one joint whose `child_body` is that body,
/// and `Body::pose_in_parent` equals that joint's `origin`. Bodies are stored
/// in depth-first pre-order from the root and joints in the order of their
/// child bodies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalAsset {
    pub name: String,
    pub bodies: Vec<Body>,
    pub joints: Vec<Joint>,
    pub actuated_order: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub name: String,
    pub parent: Option<String>,
    pub pose_in_parent: Pose,
    pub inertial: Inertial,
    #[serde(default)]
    pub geoms: Vec<Geom>,
}

/// Mass properties with a diagonal inertia; `origin.pos` is the centre of
/// mass and `origin.rot` the principal axes, both in the body frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct Inertial {
    pub mass: f64,
    pub origin: Pose,
    pub diag_inertia: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointKind {
    Fixed,
    Revolute,
    Prismatic,
    Free,
}

impl JointKind {
    pub fn is_actuated(self) -> bool {
        matches!(self, JointKind::Revolute | JointKind::Prismatic)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent_body: String,
    pub child_body: String,
    /// Unit axis in the joint frame.
    pub axis: Vec3,
    /// `[lo, hi]` in rad or m; infinite bounds mean unlimited.
    #[serde(with = "limits_serde")]
    pub limits: [f64; 2],
    /// Child frame in the parent frame at zero joint coordinate.
    pub origin: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geom {
    pub shape: GeomShape,
    pub pose_in_body: Pose,
    #[serde(default)]
    pub material: MaterialParams,
    pub role: GeomRole,
}

/// Dimensions in meters. Box sizes and plane sizes are full extents; a plane
/// size of zero means unbounded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum GeomShape {
    Sphere {
        radius: f64,
    },
    Box {
        size: [f64; 3],
    },
    Plane {
        size: [f64; 2],
    },
    /// Opaque mesh reference, relative to the asset's base directory.
    Mesh {
        path: String,
        scale: [f64; 3],
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeomRole {
    Visual,
    Collision,
}

/// Parse result: the asset plus everything that was ignored or approximated.
#[derive(Clone, Debug)]
pub struct Parsed {
    pub asset: CanonicalAsset,
    pub warnings: Vec<String>,
}

mod limits_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Bound {
        Num(f64),
        Text(String),
    }

    fn to_bound(v: f64) -> Bound {
        if v.is_finite() {
            Bound::Num(v)
        } else if v > 0.0 {
            Bound::Text("inf".into())
        } else {
            Bound::Text("-inf".into())
        }
    }

    pub fn serialize<S: Serializer>(v: &[f64; 2], s: S) -> Result<S::Ok, S::Error> {
        [to_bound(v[0]), to_bound(v[1])].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
        let [a, b] = <[Bound; 2]>::deserialize(d)?;
        let conv = |b: Bound| -> Result<f64, D::Error> {
            match b {
                Bound::Num(v) => Ok(v),
                Bound::Text(t) => t
                    .parse::<f64>()
                    .map_err(|_| serde::de::Error::custom(format!("invalid joint bound `{t}`"))),
            }
        };
        Ok([conv(a)?, conv(b)?])
    }
}

impl CanonicalAsset {
    /// Builds a validated, canonically ordered asset from bodies and joints in
    /// any order. Body `parent`/`pose_in_parent` are derived from the joints.
    pub fn assemble(
        name: impl Into<String>,
        bodies: Vec<Body>,
        joints: Vec<Joint>,
    ) -> Result<Self, AssetError> {
        let mut by_name: BTreeMap<String, Body> = BTreeMap::new();
        let mut file_order = Vec::new();
        for b in bodies {
            if by_name.contains_key(&b.name) {
                return Err(AssetError::DuplicateName(b.name));
            }
            file_order.push(b.name.clone());
            by_name.insert(b.name.clone(), b);
        }
        let mut joint_names = BTreeSet::new();
        let mut parent_joint: BTreeMap<String, usize> = BTreeMap::new();
        for (i, j) in joints.iter().enumerate() {
            if !joint_names.insert(j.name.clone()) {
                return Err(AssetError::DuplicateName(j.name.clone()));
            }
            for link in [&j.parent_body, &j.child_body] {
                if !by_name.contains_key(link) {
                    return Err(AssetError::MissingLinkReference {
                        joint: j.name.clone(),
                        link: link.clone(),
                    });
                }
            }
            if parent_joint.insert(j.child_body.clone(), i).is_some() {
                return Err(AssetError::CyclicBodyGraph(format!(
                    "body `{}` is the child of more than one joint",
                    j.child_body
                )));
            }
        }
        let roots: Vec<String> = file_order
            .iter()
            .filter(|b| !parent_joint.contains_key(*b))
            .cloned()
            .collect();
        match roots.len() {
            0 => {
                return Err(AssetError::CyclicBodyGraph(
                    "every body has a parent joint".into(),
                ))
            }
            1 => {}
            _ => return Err(AssetError::MultipleRoots(roots)),
        }

        let mut children: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, j) in joints.iter().enumerate() {
            children.entry(j.parent_body.as_str()).or_default().push(i);
        }
        let mut body_order = Vec::new();
        let mut joint_order = Vec::new();
        let mut stack = vec![roots[0].clone()];
        while let Some(b) = stack.pop() {
            body_order.push(b.clone());
            if let Some(kids) = children.get(b.as_str()) {
                for &ji in kids.iter().rev() {
                    stack.push(joints[ji].child_body.clone());
                }
            }
        }
        if body_order.len() != file_order.len() {
            let reached: BTreeSet<&String> = body_order.iter().collect();
            let stranded: Vec<&String> =
                file_order.iter().filter(|b| !reached.contains(b)).collect();
            return Err(AssetError::CyclicBodyGraph(format!(
                "bodies not reachable from root `{}`: {stranded:?}",
                roots[0]
            )));
        }
        let mut out_bodies = Vec::with_capacity(body_order.len());
        for name in &body_order {
            let mut b = by_name.remove(name).expect("body present");
            match parent_joint.get(name) {
                Some(&ji) => {
                    joint_order.push(ji);
                    b.parent = Some(joints[ji].parent_body.clone());
                    b.pose_in_parent = joints[ji].origin;
                }
                None => {
                    b.parent = None;
                    b.pose_in_parent = Pose::identity();
                }
            }
            out_bodies.push(b);
        }
        let mut slots: Vec<Option<Joint>> = joints.into_iter().map(Some).collect();
        let out_joints: Vec<Joint> = joint_order
            .iter()
            .map(|&i| slots[i].take().expect("joint used once"))
            .collect();
        let actuated_order = out_joints
            .iter()
            .filter(|j| j.kind.is_actuated())
            .map(|j| j.name.clone())
            .collect();
        let asset = CanonicalAsset {
            name: name.into(),
            bodies: out_bodies,
            joints: out_joints,
            actuated_order,
        };
        asset.validate()?;
        Ok(asset)
    }

    /// Checks every structural invariant of the canonical form.
    pub fn validate(&self) -> Result<(), AssetError> {
        let names: BTreeSet<&str> = self.bodies.iter().map(|b| b.name.as_str()).collect();
        if names.len() != self.bodies.len() {
            return Err(AssetError::InvalidAsset("duplicate body names".into()));
        }
        let roots = self.bodies.iter().filter(|b| b.parent.is_none()).count();
        if roots != 1 {
            return Err(AssetError::InvalidAsset(format!(
                "expected one root body, found {roots}"
            )));
        }
        if self.joints.len() + 1 != self.bodies.len() {
            return Err(AssetError::InvalidAsset(
                "each non-root body needs exactly one joint".into(),
            ));
        }
        let mut seen_children = BTreeSet::new();
        for j in &self.joints {
            for link in [&j.parent_body, &j.child_body] {
                if !names.contains(link.as_str()) {
                    return Err(AssetError::MissingLinkReference {
                        joint: j.name.clone(),
                        link: link.clone(),
                    });
                }
            }
            if !seen_children.insert(j.child_body.as_str()) {
                return Err(AssetError::CyclicBodyGraph(format!(
                    "body `{}` has two parents",
                    j.child_body
                )));
            }
            if j.kind.is_actuated() && (j.axis.norm() - 1.0).abs() >= 1e-9 {
                return Err(AssetError::InvalidAsset(format!(
                    "joint `{}` axis is not unit length",
                    j.name
                )));
            }
            if j.limits[0].is_nan() || j.limits[1].is_nan() || j.limits[0] > j.limits[1] {
                return Err(AssetError::InvalidAsset(format!(
                    "joint `{}` has limits lo > hi",
                    j.name
                )));
            }
            let child = self.body(&j.child_body).expect("checked above");
            if child.parent.as_deref() != Some(j.parent_body.as_str()) {
                return Err(AssetError::InvalidAsset(format!(
                    "body `{}` parent disagrees with joint `{}`",
                    child.name, j.name
                )));
            }
        }
        let expected: Vec<&str> = self
            .joints
            .iter()
            .filter(|j| j.kind.is_actuated())
            .map(|j| j.name.as_str())
            .collect();
        let actual: Vec<&str> = self.actuated_order.iter().map(|s| s.as_str()).collect();
        let mut e_sorted = expected.clone();
        let mut a_sorted = actual.clone();
        e_sorted.sort_unstable();
        a_sorted.sort_unstable();
        if e_sorted != a_sorted {
            return Err(AssetError::InvalidAsset(
                "actuated_order must list exactly the revolute and prismatic joints".into(),
            ));
        }
        Ok(())
    }

    pub fn root(&self) -> &Body {
        self.bodies
            .iter()
            .find(|b| b.parent.is_none())
            .expect("validated asset has a root")
    }

    pub fn body(&self, name: &str) -> Option<&Body> {
        self.bodies.iter().find(|b| b.name == name)
    }

    pub fn joint(&self, name: &str) -> Option<&Joint> {
        self.joints.iter().find(|j| j.name == name)
    }

    pub fn dof_count(&self) -> usize {
        self.actuated_order.len()
    }

    /// Index of an actuated joint in `actuated_order`.
    pub fn dof_index(&self, joint: &str) -> Option<usize> {
        self.actuated_order.iter().position(|j| j == joint)
    }

    /// Limits per actuated coordinate, in `actuated_order`.
    pub fn dof_limits(&self) -> Vec<[f64; 2]> {
        self.actuated_order
            .iter()
            .map(|n| self.joint(n).expect("actuated joint exists").limits)
            .collect()
    }

    /// Longest root-to-leaf chain length, counting bodies below the root.
    pub fn depth(&self) -> usize {
        let mut depth: BTreeMap<&str, usize> = BTreeMap::new();
        let mut best = 0;
        for b in &self.bodies {
            let d = match &b.parent {
                None => 0,
                Some(p) => depth[p.as_str()] + 1,
            };
            best = best.max(d);
            depth.insert(&b.name, d);
        }
        best
    }
}

/// Compares two assets structurally: topology, joint kinds, axes, limits,
/// joint origins and inertials, with numeric tolerance `tol`. Rotations are
/// compared by geodesic angle. Geoms are not compared.
pub fn structural_mismatch(a: &CanonicalAsset, b: &CanonicalAsset, tol: f64) -> Option<String> {
    let close = |x: f64, y: f64| (x == y) || (x - y).abs() <= tol;
    let close_pose =
        |p: &Pose, q: &Pose| (p.pos - q.pos).norm() <= tol && geodesic_angle(&p.rot, &q.rot) <= tol;
    if a.bodies.len() != b.bodies.len() {
        return Some(format!(
            "body count {} vs {}",
            a.bodies.len(),
            b.bodies.len()
        ));
    }
    for (x, y) in a.bodies.iter().zip(&b.bodies) {
        if x.name != y.name || x.parent != y.parent {
            return Some(format!(
                "body `{}` (parent {:?}) vs `{}` (parent {:?})",
                x.name, x.parent, y.name, y.parent
            ));
        }
        if !close_pose(&x.pose_in_parent, &y.pose_in_parent) {
            return Some(format!("body `{}` pose differs", x.name));
        }
        let (ix, iy) = (&x.inertial, &y.inertial);
        if !close(ix.mass, iy.mass) || (ix.diag_inertia - iy.diag_inertia).norm() > tol {
            return Some(format!("body `{}` inertial differs", x.name));
        }
        if ix.mass > 0.0 && (ix.origin.pos - iy.origin.pos).norm() > tol {
            return Some(format!("body `{}` centre of mass differs", x.name));
        }
        let anisotropic = (ix.diag_inertia.x - ix.diag_inertia.y).abs() > tol
            || (ix.diag_inertia.y - ix.diag_inertia.z).abs() > tol;
        if anisotropic && geodesic_angle(&ix.origin.rot, &iy.origin.rot) > tol {
            return Some(format!("body `{}` principal axes differ", x.name));
        }
    }
    if a.joints.len() != b.joints.len() {
        return Some(format!(
            "joint count {} vs {}",
            a.joints.len(),
            b.joints.len()
        ));
    }
    for (x, y) in a.joints.iter().zip(&b.joints) {
        if x.name != y.name
            || x.kind != y.kind
            || x.parent_body != y.parent_body
            || x.child_body != y.child_body
        {
            return Some(format!(
                "joint `{}` ({:?}) vs `{}` ({:?})",
                x.name, x.kind, y.name, y.kind
            ));
        }
        if x.kind.is_actuated() && (x.axis - y.axis).norm() > tol {
            return Some(format!("joint `{}` axis differs", x.name));
        }
        if !close(x.limits[0], y.limits[0]) || !close(x.limits[1], y.limits[1]) {
            return Some(format!(
                "joint `{}` limits {:?} vs {:?}",
                x.name, x.limits, y.limits
            ));
        }
        if !close_pose(&x.origin, &y.origin) {
            return Some(format!("joint `{}` origin differs", x.name));
        }
    }
    if a.actuated_order != b.actuated_order {
        return Some(format!(
            "actuated order {:?} vs {:?}",
            a.actuated_order, b.actuated_order
        ));
    }
    None
}

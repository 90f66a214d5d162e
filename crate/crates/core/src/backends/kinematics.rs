use std::collections::BTreeMap;

use nalgebra::{DMatrix, Unit, UnitQuaternion};

use super::BackendError;
use crate::assets::{CanonicalAsset, JointKind};
use crate::math::{Pose, Vec3};

#[derive(Clone, Debug)]
struct JointInfo {
    kind: JointKind,
    axis: Vec3,
    origin: Pose,
    dof: Option<usize>,
}

/// Index-based view of a canonical asset for repeated FK and Jacobian
/// evaluation. Body `i`'s parent always has a smaller index.
#[derive(Clone, Debug)]
pub struct KinematicModel {
    pub body_names: Vec<String>,
    parents: Vec<Option<usize>>,
    joints: Vec<Option<JointInfo>>,
    pub dof_names: Vec<String>,
    pub dof_limits: Vec<[f64; 2]>,
}

impl KinematicModel {
    pub fn new(asset: &CanonicalAsset) -> Self {
        let index: BTreeMap<&str, usize> = asset
            .bodies
            .iter()
            .enumerate()
            .map(|(i, b)| (b.name.as_str(), i))
            .collect();
        let mut parents = Vec::with_capacity(asset.bodies.len());
        let mut joints = Vec::with_capacity(asset.bodies.len());
        for b in &asset.bodies {
            parents.push(b.parent.as_ref().map(|p| index[p.as_str()]));
            let j = asset.joints.iter().find(|j| j.child_body == b.name);
            joints.push(j.map(|j| JointInfo {
                kind: j.kind,
                axis: j.axis,
                origin: j.origin,
                dof: asset.dof_index(&j.name),
            }));
        }
        Self {
            body_names: asset.bodies.iter().map(|b| b.name.clone()).collect(),
            parents,
            joints,
            dof_names: asset.actuated_order.clone(),
            dof_limits: asset.dof_limits(),
        }
    }

    pub fn dof_count(&self) -> usize {
        self.dof_names.len()
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.body_names.iter().position(|b| b == name)
    }

    pub fn clamp(&self, q: &[f64]) -> Vec<f64> {
        q.iter()
            .zip(&self.dof_limits)
            .map(|(x, l)| x.clamp(l[0], l[1]))
            .collect()
    }

    fn check_len(&self, q: &[f64]) -> Result<(), BackendError> {
        if q.len() != self.dof_count() {
            return Err(BackendError::DofLength {
                expected: self.dof_count(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// World pose of every body. Free joints contribute no motion.
    pub fn fk(&self, base: &Pose, q: &[f64]) -> Result<Vec<Pose>, BackendError> {
        self.check_len(q)?;
        let mut out: Vec<Pose> = Vec::with_capacity(self.parents.len());
        for (i, parent) in self.parents.iter().enumerate() {
            let pose = match (parent, &self.joints[i]) {
                (Some(p), Some(j)) => out[*p].compose(&j.origin).compose(&joint_motion(j, q)),
                (Some(p), None) => out[*p],
                (None, _) => *base,
            };
            out.push(pose);
        }
        Ok(out)
    }

    /// Geometric Jacobian of `body`'s origin: rows 0..3 linear velocity,
    /// rows 3..6 angular velocity, one column per actuated coordinate.
    pub fn jacobian(
        &self,
        base: &Pose,
        q: &[f64],
        body: usize,
    ) -> Result<DMatrix<f64>, BackendError> {
        let poses = self.fk(base, q)?;
        Ok(self.jacobian_from(&poses, body))
    }

    /// Jacobian from precomputed body poses.
    pub fn jacobian_from(&self, poses: &[Pose], body: usize) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(6, self.dof_count());
        let p_ee = poses[body].pos;
        let mut cur = Some(body);
        while let Some(b) = cur {
            if let (Some(parent), Some(j)) = (self.parents[b], &self.joints[b]) {
                if let Some(d) = j.dof {
                    let frame = poses[parent].compose(&j.origin);
                    let a = frame.rot * j.axis;
                    match j.kind {
                        JointKind::Revolute => {
                            let lin = a.cross(&(p_ee - frame.pos));
                            jac.fixed_view_mut::<3, 1>(0, d).copy_from(&lin);
                            jac.fixed_view_mut::<3, 1>(3, d).copy_from(&a);
                        }
                        JointKind::Prismatic => {
                            jac.fixed_view_mut::<3, 1>(0, d).copy_from(&a);
                        }
                        _ => {}
                    }
                }
            }
            cur = self.parents[b];
        }
        jac
    }
}

fn joint_motion(j: &JointInfo, q: &[f64]) -> Pose {
    let Some(d) = j.dof else {
        return Pose::identity();
    };
    match j.kind {
        JointKind::Revolute => Pose::new(
            Vec3::zeros(),
            UnitQuaternion::from_axis_angle(&Unit::new_unchecked(j.axis), q[d]),
        ),
        JointKind::Prismatic => Pose::new(j.axis * q[d], UnitQuaternion::identity()),
        JointKind::Fixed | JointKind::Free => Pose::identity(),
    }
}

/// World pose of every body, keyed by name. The root sits at `base`; each
/// joint applies its origin and then its motion.
pub fn forward_kinematics(
    asset: &CanonicalAsset,
    base: &Pose,
    dof_pos: &[f64],
) -> Result<BTreeMap<String, Pose>, BackendError> {
    let model = KinematicModel::new(asset);
    let poses = model.fk(base, dof_pos)?;
    Ok(model.body_names.into_iter().zip(poses).collect())
}

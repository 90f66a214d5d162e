use std::collections::BTreeMap;
use std::sync::Arc;

use crate::config::{Direction, SuccessChecker};
use crate::math::{geodesic_angle, Pose, Vec3};
use crate::state::EnvState;

/// What a checker needs besides the current state: joint names per
/// articulated entity and the state the episode started from.
#[derive(Clone, Debug, Default)]
pub struct CheckContext {
    pub joints: Arc<BTreeMap<String, Vec<String>>>,
    pub initial: EnvState,
}

impl CheckContext {
    pub fn joint_index(&self, entity: &str, joint: &str) -> Option<usize> {
        self.joints.get(entity)?.iter().position(|j| j == joint)
    }
}

/// Extension point for predicates the structured templates cannot express.
pub type CustomCheck = Arc<dyn Fn(&EnvState, &CheckContext) -> bool + Send + Sync>;

fn pose_of(state: &EnvState, entity: &str) -> Option<Pose> {
    let e = state.get(entity)?;
    Some(Pose::new(e.pos?, e.rot?))
}

/// Evaluates a checker tree on one environment's state. Missing entities,
/// fields or joints make the leaf false.
pub fn check_success(state: &EnvState, checker: &SuccessChecker, ctx: &CheckContext) -> bool {
    match checker {
        SuccessChecker::Never => false,
        SuccessChecker::PositionWithin {
            entity,
            center,
            radius,
        } => state
            .get(entity)
            .and_then(|e| e.pos)
            .is_some_and(|p| (p - Vec3::from(*center)).norm() <= *radius),
        SuccessChecker::PositionShift {
            entity,
            axis,
            min_shift,
        } => {
            let now = state.get(entity).and_then(|e| e.pos);
            let start = ctx.initial.get(entity).and_then(|e| e.pos);
            match (now, start) {
                (Some(a), Some(b)) => {
                    let axis = Vec3::from(*axis);
                    let n = axis.norm();
                    n > 0.0 && (a - b).dot(&(axis / n)) >= *min_shift
                }
                _ => false,
            }
        }
        SuccessChecker::JointPosThreshold {
            entity,
            joint,
            threshold,
            direction,
        } => {
            let Some(k) = ctx.joint_index(entity, joint) else {
                return false;
            };
            let Some(q) = state
                .get(entity)
                .and_then(|e| e.dof_pos.as_ref())
                .and_then(|q| q.get(k))
            else {
                return false;
            };
            match direction {
                Direction::AtLeast => *q >= *threshold,
                Direction::AtMost => *q <= *threshold,
            }
        }
        SuccessChecker::RelativePose {
            entity_a,
            entity_b,
            max_pos_err,
            max_rot_err,
            target_rel,
        } => {
            let (Some(a), Some(b)) = (pose_of(state, entity_a), pose_of(state, entity_b)) else {
                return false;
            };
            let rel = a.relative(&b);
            (rel.pos - target_rel.pos).norm() <= *max_pos_err
                && geodesic_angle(&rel.rot, &target_rel.rot) <= *max_rot_err
        }
        // Both evaluate every branch; no short-circuit.
        SuccessChecker::All { of } => of
            .iter()
            .map(|c| check_success(state, c, ctx))
            .fold(true, |a, b| a & b),
        SuccessChecker::Any { of } => of
            .iter()
            .map(|c| check_success(state, c, ctx))
            .fold(false, |a, b| a | b),
    }
}

use std::f64::consts::FRAC_PI_2;

use super::AugmentError;
use crate::math::{quat_from_rpy, quat_to_rpy, Pose, Quat, Vec3};
use crate::retarget::{Embodiment, IkOptions};
use crate::state::{Action, EnvState, Trajectory};

/// Parameters of the scripted pick-and-place source demonstrations.
#[derive(Clone, Debug)]
pub struct PickPlacePlan {
    pub object: String,
    pub goal: String,
    /// Object position relative to the goal when placed.
    pub goal_offset: Vec3,
    /// Approach height above grasp and place points.
    pub hover: f64,
}

impl Default for PickPlacePlan {
    fn default() -> Self {
        Self {
            object: "cube".into(),
            goal: "target".into(),
            goal_offset: Vec3::new(0.0, 0.0, 0.024),
            hover: 0.15,
        }
    }
}

/// Gripper pointing straight down, rotated `yaw` about the vertical.
fn down(yaw: f64) -> Quat {
    quat_from_rpy(0.0, 0.0, yaw) * quat_from_rpy(0.0, FRAC_PI_2, 0.0)
}

fn entity_pose(state: &EnvState, name: &str) -> Result<Pose, AugmentError> {
    let e = state
        .get(name)
        .ok_or_else(|| AugmentError::UnknownEntity(name.into()))?;
    match (e.pos, e.rot) {
        (Some(p), Some(r)) => Ok(Pose::new(p, r)),
        _ => Err(AugmentError::UnknownEntity(name.into())),
    }
}

/// A waypoint script: approach above the object, descend, close, lift,
/// carry above the goal, lower, open, retreat. Every step is solved by
/// warm-started IK on `robot`.
pub fn scripted_pick_place(
    robot: &Embodiment,
    init: &EnvState,
    plan: &PickPlacePlan,
    scenario: &str,
    ik: &IkOptions,
) -> Result<Trajectory, AugmentError> {
    let mut q = init
        .get(&robot.name)
        .and_then(|e| e.dof_pos.clone())
        .ok_or(AugmentError::NoRobot)?;
    let obj = entity_pose(init, &plan.object)?;
    let goal = entity_pose(init, &plan.goal)?;
    let (_, _, yaw) = quat_to_rpy(&obj.rot);
    let grip_rot = down(yaw);
    let up = Vec3::new(0.0, 0.0, plan.hover);
    let place = goal.pos + goal.rot * plan.goal_offset;

    // (position, open fraction, steps)
    let keys: [(Vec3, f64, usize); 10] = [
        (obj.pos + up, 1.0, 60),
        (obj.pos, 1.0, 30),
        (obj.pos, 1.0, 5),
        (obj.pos, 0.0, 10),
        (obj.pos + up, 0.0, 30),
        (place + up, 0.0, 60),
        (place, 0.0, 30),
        (place, 0.0, 5),
        (place, 1.0, 10),
        (place + up, 1.0, 20),
    ];

    let start = robot.ee_pose(&q)?;
    let mut from = (start.pos, start.rot, robot.gripper_open(&q));
    let mut actions = Vec::new();
    for (pos, open, steps) in keys {
        for i in 1..=steps {
            let t = i as f64 / steps as f64;
            let p = from.0 + (pos - from.0) * t;
            let r = from.1.slerp(&grip_rot, t);
            let target = Pose::new(p, r);
            let sol =
                robot
                    .solve(&target, &q, ik)
                    .map_err(|source| AugmentError::IkUnreachable {
                        segment: 0,
                        step: actions.len(),
                        source,
                    })?;
            q = sol.q;
            robot.set_gripper(&mut q, from.2 + (open - from.2) * t);
            actions.push(Action::for_robot(&robot.name, q.clone()));
        }
        from = (pos, grip_rot, open);
    }
    Ok(Trajectory {
        scenario_name: scenario.to_string(),
        init_state: init.clone(),
        actions,
        ..Default::default()
    })
}

use super::AugmentError;
use crate::config::SubtaskSpec;
use crate::env::{check_success, joint_names, replay, CheckContext, ReplayOptions, TaskEnv};
use crate::math::{Pose, Vec3};
use crate::retarget::{Embodiment, IkOptions, Waypoint};
use crate::state::{Action, EnvState, Trajectory};

/// A contiguous slice of a demonstration belonging to one subtask.
#[derive(Clone, Debug)]
pub struct Segment {
    pub subtask: String,
    pub anchor: String,
    /// Index of the first action.
    pub start: usize,
    /// The segment's actions, verbatim.
    pub actions: Vec<Action>,
    /// Anchor pose in the state just before `start`.
    pub anchor_pose: Pose,
    /// Commanded end-effector pose of each action in the anchor frame.
    pub relative: Vec<Waypoint>,
}

#[derive(Clone, Debug)]
pub struct SegmentedDemo {
    pub source: Trajectory,
    pub robot: String,
    pub segments: Vec<Segment>,
}

impl SegmentedDemo {
    /// Concatenation of the segments' actions.
    pub fn actions(&self) -> Vec<Action> {
        self.segments
            .iter()
            .flat_map(|s| s.actions.iter().cloned())
            .collect()
    }
}

fn pose_in(state: &EnvState, entity: &str) -> Result<Pose, AugmentError> {
    let e = state
        .get(entity)
        .ok_or_else(|| AugmentError::UnknownEntity(entity.to_string()))?;
    match (e.pos, e.rot) {
        (Some(p), Some(r)) => Ok(Pose::new(p, r)),
        _ => Err(AugmentError::UnknownEntity(entity.to_string())),
    }
}

/// Splits `traj` at the first step each subtask's end predicate holds. The
/// last subtask takes every remaining action. States come from the
/// trajectory when stored, otherwise from a replay on `env`.
pub fn segment_demo(
    env: &mut dyn TaskEnv,
    traj: &Trajectory,
    subtasks: &[SubtaskSpec],
    robot: &Embodiment,
) -> Result<SegmentedDemo, AugmentError> {
    let (start, states) = match &traj.states {
        Some(s) if traj.init_state.values().all(|e| e.pos.is_some()) => {
            (traj.init_state.clone(), s.clone())
        }
        _ => {
            let r = replay(env, traj, &ReplayOptions::default())?;
            env.reset_to(&traj.init_state)?;
            let start = env.physics_states()?.envs.swap_remove(0);
            (start, r.states)
        }
    };
    let ctx = CheckContext {
        joints: joint_names(env.physics()),
        initial: start.clone(),
    };

    let mut segments = Vec::with_capacity(subtasks.len());
    let mut s = 0;
    for (i, sub) in subtasks.iter().enumerate() {
        let last = i + 1 == subtasks.len();
        let done = (s..states.len())
            .find(|&k| check_success(&states[k], &sub.end, &ctx))
            .ok_or_else(|| AugmentError::SegmentationFailed(sub.name.clone()))?;
        let end = if last { states.len() } else { done + 1 };
        let before = if s == 0 { &start } else { &states[s - 1] };
        let anchor_pose = pose_in(before, &sub.anchor)?;
        let inv = anchor_pose.inverse();
        let actions = traj.actions[s..end].to_vec();
        let relative = actions
            .iter()
            .map(|a| {
                let q = a.targets.get(&robot.name).ok_or(AugmentError::NoRobot)?;
                Ok(Waypoint {
                    pose: inv.compose(&robot.ee_pose(q)?),
                    gripper_open: robot.gripper_open(q),
                })
            })
            .collect::<Result<Vec<_>, AugmentError>>()?;
        segments.push(Segment {
            subtask: sub.name.clone(),
            anchor: sub.anchor.clone(),
            start: s,
            actions,
            anchor_pose,
            relative,
        });
        s = end;
    }
    Ok(SegmentedDemo {
        source: traj.clone(),
        robot: robot.name.clone(),
        segments,
    })
}

#[derive(Clone, Debug)]
pub struct GenerateOptions {
    pub ik: IkOptions,
    /// Largest per-step joint change when bridging from the current
    /// configuration to the start of the next segment.
    pub interp_max: f64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            ik: IkOptions::default(),
            interp_max: 0.05,
        }
    }
}

/// Re-anchors every segment of `demo` in the scene starting at `init`,
/// solves IK along the way and bridges segment starts by joint
/// interpolation. The result is replayed from `init`; it is returned only if
/// the checker fires.
pub fn generate_augmented(
    env: &mut dyn TaskEnv,
    demo: &SegmentedDemo,
    init: &EnvState,
    robot: &Embodiment,
    opts: &GenerateOptions,
) -> Result<Trajectory, AugmentError> {
    env.reset_to(init)?;
    let start = env.physics_states()?.envs.swap_remove(0);
    let mut q = start
        .get(&robot.name)
        .and_then(|e| e.dof_pos.clone())
        .ok_or(AugmentError::NoRobot)?;
    let mut actions = Vec::new();
    let mut state = start.clone();

    for (si, seg) in demo.segments.iter().enumerate() {
        let anchor = pose_in(&state, &seg.anchor)?;
        for (k, w) in seg.relative.iter().enumerate() {
            let target = anchor.compose(&w.pose);
            let sol = robot.solve(&target, &q, &opts.ik).map_err(|source| {
                AugmentError::IkUnreachable {
                    segment: si,
                    step: k,
                    source,
                }
            })?;
            let mut next = sol.q;
            robot.set_gripper(&mut next, w.gripper_open);
            if k == 0 {
                for b in bridge(&q, &next, opts.interp_max) {
                    let a = Action::for_robot(&robot.name, b);
                    env.advance(&a)?;
                    actions.push(a);
                }
            }
            let a = Action::for_robot(&robot.name, next.clone());
            env.advance(&a)?;
            actions.push(a);
            q = next;
        }
        state = env.physics_states()?.envs.swap_remove(0);
    }

    let mut traj = Trajectory {
        scenario_name: env.config().name.clone(),
        init_state: init.clone(),
        actions,
        states: None,
        success: None,
        extras: demo.source.extras.clone(),
    };
    let r = replay(env, &traj, &ReplayOptions::default())?;
    if !r.success {
        return Err(AugmentError::CheckerFailed);
    }
    traj.states = Some(r.states);
    traj.success = Some(true);
    Ok(traj)
}

/// Intermediate configurations strictly between `from` and `to`, spaced so
/// no coordinate moves more than `cap` per step.
fn bridge(from: &[f64], to: &[f64], cap: f64) -> Vec<Vec<f64>> {
    let span = from
        .iter()
        .zip(to)
        .map(|(a, b)| (b - a).abs())
        .fold(0.0, f64::max);
    let n = if cap > 0.0 {
        (span / cap).ceil() as usize
    } else {
        0
    };
    (1..n)
        .map(|i| {
            let t = i as f64 / n as f64;
            from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
        })
        .collect()
}

/// Moves every entity listed in `poses` and returns the updated state.
pub(crate) fn with_poses(init: &EnvState, poses: &[(String, Pose)]) -> EnvState {
    let mut out = init.clone();
    for (name, p) in poses {
        if let Some(e) = out.get_mut(name) {
            e.pos = Some(p.pos);
            e.rot = Some(p.rot);
            e.lin_vel = Some(Vec3::zeros());
            e.ang_vel = Some(Vec3::zeros());
        }
    }
    out
}

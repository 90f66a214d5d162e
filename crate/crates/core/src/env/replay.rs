use super::{check_success, joint_names, CheckContext, EnvError, StepResult, TaskEnv};
use crate::state::{diff_env, Action, DiffReport, EnvState, Trajectory};

#[derive(Clone, Debug, Default)]
pub struct ReplayOptions {
    /// Extra steps holding the last action after the demonstration ends,
    /// letting tracked joints settle on the dynamic backend.
    pub settle_steps: usize,
}

#[derive(Clone, Debug)]
pub struct ReplayReport {
    /// Env 0 after the last action and any settle steps.
    pub final_state: EnvState,
    pub success: bool,
    /// Env 0 after each demonstration action (settle steps excluded).
    pub states: Vec<EnvState>,
    /// Per-step differences against the stored states, when the trajectory
    /// carries them.
    pub diffs: Option<Vec<DiffReport>>,
}

impl ReplayReport {
    pub fn max_diff(&self) -> Option<f64> {
        self.diffs
            .as_ref()
            .map(|d| d.iter().map(DiffReport::max_any).fold(0.0, f64::max))
    }
}

pub fn replay(
    env: &mut dyn TaskEnv,
    traj: &Trajectory,
    opts: &ReplayOptions,
) -> Result<ReplayReport, EnvError> {
    replay_with(env, traj, opts, &mut |_, _| {})
}

/// Replays `traj` from its initial state, calling `on_step` with the step
/// index and result after every action (settle steps included).
pub fn replay_with(
    env: &mut dyn TaskEnv,
    traj: &Trajectory,
    opts: &ReplayOptions,
    on_step: &mut dyn FnMut(usize, &StepResult),
) -> Result<ReplayReport, EnvError> {
    let expected = &env.config().name;
    if !traj.scenario_name.is_empty() && traj.scenario_name != *expected {
        return Err(EnvError::ScenarioMismatch {
            expected: expected.clone(),
            got: traj.scenario_name.clone(),
        });
    }
    traj.validate()?;
    env.reset_to(&traj.init_state)?;
    let start = env.physics_states()?.envs.swap_remove(0);
    let mut success = {
        let ctx = CheckContext {
            joints: joint_names(env.physics()),
            initial: start.clone(),
        };
        traj.actions.is_empty() && check_success(&start, &env.config().task.checker, &ctx)
    };
    let mut states = Vec::with_capacity(traj.actions.len());
    let mut k = 0;
    for a in &traj.actions {
        let r = env.advance(a)?;
        success |= r.success;
        on_step(k, &r);
        k += 1;
        states.push(env.physics_states()?.envs.swap_remove(0));
    }
    let hold = traj.actions.last().cloned().unwrap_or_else(Action::default);
    if !hold.targets.is_empty() {
        for _ in 0..opts.settle_steps {
            let r = env.advance(&hold)?;
            success |= r.success;
            on_step(k, &r);
            k += 1;
        }
    }
    let final_state = env.physics_states()?.envs.swap_remove(0);
    let diffs = match &traj.states {
        Some(stored) => Some(
            stored
                .iter()
                .zip(&states)
                .map(|(a, b)| diff_env(a, b))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    Ok(ReplayReport {
        final_state,
        success,
        states,
        diffs,
    })
}

#[derive(Clone, Debug, Default)]
pub struct CollectReport {
    /// Passing demonstrations with their replayed states attached.
    pub accepted: Vec<Trajectory>,
    /// Index into the input and the reason it was dropped.
    pub rejected: Vec<(usize, String)>,
}

/// Replays every demonstration and keeps only those whose checker fires.
pub fn collect(env: &mut dyn TaskEnv, demos: &[Trajectory], opts: &ReplayOptions) -> CollectReport {
    let mut out = CollectReport::default();
    for (i, d) in demos.iter().enumerate() {
        match replay(env, d, opts) {
            Ok(r) if r.success => {
                let mut t = d.clone();
                t.scenario_name = env.config().name.clone();
                t.states = Some(r.states);
                t.success = Some(true);
                out.accepted.push(t);
            }
            Ok(_) => out.rejected.push((i, "checker never held".into())),
            Err(e) => out.rejected.push((i, e.to_string())),
        }
    }
    out
}

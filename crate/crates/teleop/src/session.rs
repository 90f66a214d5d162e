use std::collections::VecDeque;

use metasim::env::{Env, EnvError, TaskEnv};
use metasim::math::Pose;
use metasim::retarget::{Embodiment, IkOptions, RetargetError};
use metasim::state::{Action, EnvState, Trajectory};

use crate::protocol::{encode_state, ProtocolError, SeqGate, TeleopCommand};

/// Highest control rate a session accepts, in Hz.
pub const MAX_RATE: u32 = 50;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("control rate {0} Hz is outside 1..={MAX_RATE}")]
    BadRate(u32),
    #[error("scenario has no robot to drive")]
    NoRobot,
    #[error("session is {0:?}")]
    NotRunning(SessionState),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Retarget(#[from] RetargetError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SessionState {
    Running,
    Paused,
    Closed,
}

#[derive(Clone, Debug)]
pub struct SessionOptions {
    /// Commands applied per second.
    pub rate: u32,
    /// End-effector translation speed for a unit intent, m/s.
    pub speed: f64,
    pub ik: IkOptions,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            rate: MAX_RATE,
            speed: 0.1,
            ik: IkOptions::default(),
        }
    }
}

/// Result of applying one command.
#[derive(Clone, Debug)]
pub struct Applied {
    pub action: Action,
    /// Set when IK failed and the target fell back to the last feasible one.
    pub warning: Option<String>,
    /// Wire `STATE` frame for the post-step state.
    pub frame: String,
}

/// Bounded command queue. When full, a new command is merged into the
/// newest queued one instead of growing the queue: intents add up, the
/// latest orientation wins and gripper toggles cancel in pairs.
#[derive(Debug)]
pub struct CommandQueue {
    items: VecDeque<TeleopCommand>,
    capacity: usize,
    coalesced: usize,
}

impl CommandQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            items: VecDeque::with_capacity(capacity.max(1)),
            capacity: capacity.max(1),
            coalesced: 0,
        }
    }

    pub fn push(&mut self, cmd: TeleopCommand) {
        if self.items.len() < self.capacity {
            self.items.push_back(cmd);
            return;
        }
        let last = self.items.back_mut().expect("capacity is at least one");
        for (a, b) in last.translate.iter_mut().zip(cmd.translate) {
            *a += b;
        }
        if cmd.orientation_enabled {
            last.orientation_enabled = true;
            last.orientation = cmd.orientation;
        }
        last.gripper_toggle ^= cmd.gripper_toggle;
        last.seq = cmd.seq;
        last.t_ms = cmd.t_ms;
        self.coalesced += 1;
    }

    pub fn pop(&mut self) -> Option<TeleopCommand> {
        self.items.pop_front()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Commands merged into an earlier one so far.
    pub fn coalesced(&self) -> usize {
        self.coalesced
    }
}

/// A live teleoperation session over one env and its first robot.
pub struct TeleopSession {
    env: Env,
    robot: Embodiment,
    opts: SessionOptions,
    q: Vec<f64>,
    target: Pose,
    gripper_open: bool,
    gate: SeqGate,
    state: SessionState,
    recording: Trajectory,
    success: bool,
    applied: usize,
}

impl TeleopSession {
    pub fn new(mut env: Env, opts: SessionOptions) -> Result<Self, SessionError> {
        if opts.rate == 0 || opts.rate > MAX_RATE {
            return Err(SessionError::BadRate(opts.rate));
        }
        let cfg = env.config().clone();
        let rc = cfg.robots.first().ok_or(SessionError::NoRobot)?;
        let robot = Embodiment::from_config(rc, cfg.base_dir.as_deref())?;
        env.reset()?;
        let init = env.physics_states()?.envs.swap_remove(0);
        let q = init
            .get(&robot.name)
            .and_then(|e| e.dof_pos.clone())
            .ok_or(SessionError::NoRobot)?;
        let target = robot.ee_pose(&q)?;
        let gripper_open = robot.gripper_open(&q) >= 0.5;
        Ok(Self {
            recording: Trajectory {
                scenario_name: cfg.name.clone(),
                init_state: init,
                states: Some(Vec::new()),
                ..Default::default()
            },
            env,
            robot,
            opts,
            q,
            target,
            gripper_open,
            gate: SeqGate::default(),
            state: SessionState::Running,
            success: false,
            applied: 0,
        })
    }

    pub fn rate(&self) -> u32 {
        self.opts.rate
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn pause(&mut self) {
        if self.state == SessionState::Running {
            self.state = SessionState::Paused;
        }
    }

    pub fn resume(&mut self) {
        if self.state == SessionState::Paused {
            self.state = SessionState::Running;
        }
    }

    pub fn target(&self) -> &Pose {
        &self.target
    }

    pub fn gripper_is_open(&self) -> bool {
        self.gripper_open
    }

    pub fn applied(&self) -> usize {
        self.applied
    }

    pub fn robot_name(&self) -> &str {
        &self.robot.name
    }

    /// Accepts a command's sequence number; re-delivered or out-of-order
    /// frames are refused.
    pub fn admit(&mut self, seq: u64) -> Result<(), ProtocolError> {
        self.gate.admit(seq)
    }

    /// Moves the end-effector target, solves IK from the current joints and
    /// steps the env once.
    pub fn apply_command(&mut self, cmd: &TeleopCommand) -> Result<Applied, SessionError> {
        if self.state != SessionState::Running {
            return Err(SessionError::NotRunning(self.state));
        }
        let step = self.opts.speed / self.opts.rate as f64;
        let mut target = self.target;
        for (k, t) in cmd.translate.iter().enumerate() {
            target.pos[k] += t * step;
        }
        if cmd.orientation_enabled {
            if let Some(q) = cmd.quat() {
                target.rot = q;
            }
        }
        if cmd.gripper_toggle {
            self.gripper_open = !self.gripper_open;
        }

        let mut warning = None;
        let mut q = match self.robot.solve(&target, &self.q, &self.opts.ik) {
            Ok(sol) => {
                self.target = target;
                sol.q
            }
            Err(e) => {
                warning = Some(format!(
                    "target unreachable, keeping last feasible pose ({e})"
                ));
                self.q.clone()
            }
        };
        self.robot
            .set_gripper(&mut q, if self.gripper_open { 1.0 } else { 0.0 });
        let action = Action::for_robot(&self.robot.name, q.clone());
        let r = self.env.advance(&action)?;
        self.success |= r.success;
        self.q = q;
        self.applied += 1;
        let state = r.observation.states.envs[0].clone();
        let frame = encode_state(&state, cmd.seq, cmd.t_ms, &[self.robot.name.clone()]);
        self.recording.actions.push(action.clone());
        if let Some(s) = &mut self.recording.states {
            s.push(state);
        }
        Ok(Applied {
            action,
            warning,
            frame,
        })
    }

    /// Current state of env 0.
    pub fn current_state(&self) -> Result<EnvState, SessionError> {
        Ok(self.env.physics_states()?.envs.swap_remove(0))
    }

    /// Ends the session and returns the recording.
    pub fn close(&mut self) -> Trajectory {
        self.state = SessionState::Closed;
        let mut t = self.recording.clone();
        t.success = Some(self.success);
        t
    }
}

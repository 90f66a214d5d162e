//! Gym-style environment over a handler, the physics/render hybrid, and
//! demonstration replay.

mod checker;
mod replay;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use checker::{check_success, CheckContext, CustomCheck};
pub use replay::{collect, replay, replay_with, CollectReport, ReplayOptions, ReplayReport};

use crate::backends::{launch, BackendError, BackendKind, Handler, Image};
use crate::config::ScenarioConfig;
use crate::state::{Action, EntityState, EnvState, SceneState, StateError, StateQuery};

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("episode is over; call reset")]
    EpisodeOver,
    #[error("trajectory was recorded on scenario `{got}`, env runs `{expected}`")]
    ScenarioMismatch { expected: String, got: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub states: SceneState,
    /// First camera of env 0, when image observations are enabled.
    pub image: Option<Image>,
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub success: bool,
    pub termination: bool,
    pub time_out: bool,
    pub per_env_success: Vec<bool>,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Common surface of [`Env`] and [`HybridEnv`].
pub trait TaskEnv {
    fn config(&self) -> &ScenarioConfig;
    fn reset(
        &mut self,
    ) -> Result<(Observation, serde_json::Map<String, serde_json::Value>), EnvError>;
    /// Resets, then teleports to `init` (a one-env partial applies to all).
    fn reset_to(&mut self, init: &EnvState) -> Result<Observation, EnvError>;
    fn step(&mut self, action: &Action) -> Result<StepResult, EnvError>;
    /// Like `step` but ignores episode end; replay uses this to run a
    /// demonstration past the point its checker fires.
    fn advance(&mut self, action: &Action) -> Result<StepResult, EnvError>;
    /// State of the handler that owns the physics.
    fn physics_states(&self) -> Result<SceneState, EnvError>;
    fn physics(&self) -> &dyn Handler;
}

fn action_state(action: &Action) -> SceneState {
    let mut p = EnvState::new();
    for (name, q) in &action.targets {
        p.insert(
            name.clone(),
            EntityState {
                dof_target: Some(q.clone()),
                ..Default::default()
            },
        );
    }
    SceneState::single(p)
}

pub(crate) fn joint_names(h: &dyn Handler) -> Arc<BTreeMap<String, Vec<String>>> {
    let cfg = h.config();
    let mut out = BTreeMap::new();
    let names = cfg
        .robots
        .iter()
        .map(|r| &r.name)
        .chain(cfg.objects.iter().map(|o| &o.name));
    for n in names {
        if let Some(a) = h.asset(n) {
            out.insert(n.clone(), a.actuated_order.clone());
        }
    }
    Arc::new(out)
}

/// Episode bookkeeping shared by both env flavours.
struct Episode {
    joints: Arc<BTreeMap<String, Vec<String>>>,
    contexts: Vec<CheckContext>,
    custom: Option<CustomCheck>,
    steps: u32,
    success: Vec<bool>,
    over: bool,
}

impl Episode {
    fn new(h: &dyn Handler) -> Self {
        Self {
            joints: joint_names(h),
            contexts: Vec::new(),
            custom: None,
            steps: 0,
            success: vec![false; h.num_envs()],
            over: false,
        }
    }

    fn begin(&mut self, start: &SceneState) {
        self.contexts = start
            .envs
            .iter()
            .map(|e| CheckContext {
                joints: self.joints.clone(),
                initial: e.clone(),
            })
            .collect();
        self.steps = 0;
        self.success = vec![false; start.envs.len()];
        self.over = false;
    }

    fn evaluate(&mut self, cfg: &ScenarioConfig, phys: &SceneState) -> (bool, bool) {
        self.steps += 1;
        for (i, s) in phys.envs.iter().enumerate() {
            let ctx = &self.contexts[i];
            let ok = match &self.custom {
                Some(f) => f(s, ctx),
                None => check_success(s, &cfg.task.checker, ctx),
            };
            self.success[i] |= ok;
        }
        let time_out = self.steps >= cfg.task.episode_length;
        let success = self.success[0];
        self.over = success || time_out;
        (success, time_out)
    }

    fn result(
        &self,
        observation: Observation,
        success: bool,
        time_out: bool,
        h: &dyn Handler,
    ) -> StepResult {
        let mut extra = h.extra();
        extra.insert("episode_step".into(), self.steps.into());
        StepResult {
            observation,
            reward: if success { 1.0 } else { 0.0 },
            success,
            termination: success || time_out,
            time_out,
            per_env_success: self.success.clone(),
            extra,
        }
    }
}

fn first_image(h: &dyn Handler, enabled: bool) -> Result<Option<Image>, EnvError> {
    if !enabled {
        return Ok(None);
    }
    match h.config().cameras.first() {
        Some(cam) => Ok(Some(h.render(cam, 0)?)),
        None => Ok(None),
    }
}

/// A task environment over one handler. The initial state is whatever the
/// handler holds when the env is built.
pub struct Env {
    handler: Box<dyn Handler>,
    initial: SceneState,
    episode: Episode,
    images: bool,
}

impl Env {
    pub fn new(handler: Box<dyn Handler>) -> Result<Self, EnvError> {
        let initial = handler.get_states(&StateQuery::all())?;
        let mut episode = Episode::new(handler.as_ref());
        episode.begin(&initial);
        Ok(Self {
            handler,
            initial,
            episode,
            images: false,
        })
    }

    pub fn launch(
        cfg: &ScenarioConfig,
        num_envs: usize,
        kind: BackendKind,
    ) -> Result<Self, EnvError> {
        Self::new(launch(cfg, num_envs, kind)?)
    }

    /// Adds the first camera's image to every observation.
    pub fn with_images(mut self, on: bool) -> Self {
        self.images = on;
        self
    }

    /// Replaces the configured checker with a callback.
    pub fn set_custom_checker(&mut self, f: Option<CustomCheck>) {
        self.episode.custom = f;
    }

    pub fn handler(&self) -> &dyn Handler {
        self.handler.as_ref()
    }

    pub fn handler_mut(&mut self) -> &mut dyn Handler {
        self.handler.as_mut()
    }

    pub fn steps(&self) -> u32 {
        self.episode.steps
    }

    pub fn is_over(&self) -> bool {
        self.episode.over
    }

    fn observe(&self) -> Result<Observation, EnvError> {
        Ok(Observation {
            states: self.handler.get_states(&StateQuery::all())?,
            image: first_image(self.handler.as_ref(), self.images)?,
        })
    }
}

impl TaskEnv for Env {
    fn config(&self) -> &ScenarioConfig {
        self.handler.config()
    }

    fn reset(
        &mut self,
    ) -> Result<(Observation, serde_json::Map<String, serde_json::Value>), EnvError> {
        self.handler.set_states(&self.initial)?;
        self.episode.begin(&self.initial);
        Ok((self.observe()?, self.handler.extra()))
    }

    fn reset_to(&mut self, init: &EnvState) -> Result<Observation, EnvError> {
        self.handler.set_states(&self.initial)?;
        self.handler.set_states(&SceneState::single(init.clone()))?;
        let start = self.handler.get_states(&StateQuery::all())?;
        self.episode.begin(&start);
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        if self.episode.over {
            return Err(EnvError::EpisodeOver);
        }
        self.advance(action)
    }

    fn advance(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        self.handler.set_states(&action_state(action))?;
        self.handler.step(1)?;
        let observation = self.observe()?;
        let cfg = self.handler.config();
        let (success, time_out) = self.episode.evaluate(cfg, &observation.states);
        Ok(self
            .episode
            .result(observation, success, time_out, self.handler.as_ref()))
    }

    fn physics_states(&self) -> Result<SceneState, EnvError> {
        Ok(self.handler.get_states(&StateQuery::all())?)
    }

    fn physics(&self) -> &dyn Handler {
        self.handler.as_ref()
    }
}

/// Physics on one handler, observation from another, kept in lockstep
/// through full-state copies.
pub struct HybridEnv {
    physics: Box<dyn Handler>,
    render: Box<dyn Handler>,
    initial: SceneState,
    episode: Episode,
    images: bool,
}

fn entity_names(s: &SceneState) -> Vec<String> {
    s.envs
        .first()
        .map(|e| e.keys().cloned().collect())
        .unwrap_or_default()
}

impl HybridEnv {
    pub fn new(physics: Box<dyn Handler>, render: Box<dyn Handler>) -> Result<Self, EnvError> {
        let initial = physics.get_states(&StateQuery::all())?;
        let other = render.get_states(&StateQuery::all())?;
        let (a, b) = (entity_names(&initial), entity_names(&other));
        if a != b {
            return Err(StateError::EntitySetMismatch(format!(
                "physics has {a:?}, renderer has {b:?}"
            ))
            .into());
        }
        if physics.num_envs() != render.num_envs() {
            return Err(StateError::EnvCountMismatch(physics.num_envs(), render.num_envs()).into());
        }
        let mut episode = Episode::new(physics.as_ref());
        episode.begin(&initial);
        let mut env = Self {
            physics,
            render,
            initial,
            episode,
            images: false,
        };
        env.sync()?;
        Ok(env)
    }

    pub fn launch(
        cfg: &ScenarioConfig,
        num_envs: usize,
        physics: BackendKind,
        render: BackendKind,
    ) -> Result<Self, EnvError> {
        Self::new(
            launch(cfg, num_envs, physics)?,
            launch(cfg, num_envs, render)?,
        )
    }

    pub fn with_images(mut self, on: bool) -> Self {
        self.images = on;
        self
    }

    pub fn set_custom_checker(&mut self, f: Option<CustomCheck>) {
        self.episode.custom = f;
    }

    pub fn render_handler(&self) -> &dyn Handler {
        self.render.as_ref()
    }

    fn sync(&mut self) -> Result<SceneState, EnvError> {
        let phys = self.physics.get_states(&StateQuery::all())?;
        self.render.set_states(&phys)?;
        self.render.refresh()?;
        Ok(phys)
    }

    fn observe(&self) -> Result<Observation, EnvError> {
        Ok(Observation {
            states: self.render.get_states(&StateQuery::all())?,
            image: first_image(self.render.as_ref(), self.images)?,
        })
    }
}

impl TaskEnv for HybridEnv {
    fn config(&self) -> &ScenarioConfig {
        self.physics.config()
    }

    fn reset(
        &mut self,
    ) -> Result<(Observation, serde_json::Map<String, serde_json::Value>), EnvError> {
        self.physics.set_states(&self.initial)?;
        self.sync()?;
        self.episode.begin(&self.initial);
        Ok((self.observe()?, self.physics.extra()))
    }

    fn reset_to(&mut self, init: &EnvState) -> Result<Observation, EnvError> {
        self.physics.set_states(&self.initial)?;
        self.physics.set_states(&SceneState::single(init.clone()))?;
        let start = self.sync()?;
        self.episode.begin(&start);
        self.observe()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        if self.episode.over {
            return Err(EnvError::EpisodeOver);
        }
        self.advance(action)
    }

    fn advance(&mut self, action: &Action) -> Result<StepResult, EnvError> {
        self.physics.set_states(&action_state(action))?;
        self.physics.step(1)?;
        let phys = self.sync()?;
        let observation = self.observe()?;
        let (success, time_out) = self.episode.evaluate(self.physics.config(), &phys);
        Ok(self
            .episode
            .result(observation, success, time_out, self.physics.as_ref()))
    }

    fn physics_states(&self) -> Result<SceneState, EnvError> {
        Ok(self.physics.get_states(&StateQuery::all())?)
    }

    fn physics(&self) -> &dyn Handler {
        self.physics.as_ref()
    }
}

use rayon::prelude::*;

use super::world::{EntityKind, EnvWorld, SceneModel, Worlds};
use super::{BackendError, BackendKind, Handler, Image};
use crate::assets::CanonicalAsset;
use crate::config::{CameraConfig, ScenarioConfig};
use crate::state::{SceneState, StateQuery};

/// Kinematic replay backend: joints jump to their (limit-clamped) targets,
/// free bodies hold their pose unless carried by a gripper.
pub struct KinHandler {
    worlds: Worlds,
    steps: u64,
}

impl KinHandler {
    pub fn launch(cfg: &ScenarioConfig, num_envs: usize) -> Result<Self, BackendError> {
        Ok(Self {
            worlds: Worlds::launch(cfg, num_envs)?,
            steps: 0,
        })
    }
}

fn advance(model: &SceneModel, w: &mut EnvWorld, substeps: usize) -> Result<(), BackendError> {
    let span = model.cfg.sim.dt * substeps as f64;
    for (e, b) in model.entities.iter().zip(w.bodies.iter_mut()) {
        if let EntityKind::Articulated(a) = &e.kind {
            let target = a.kin.clamp(&b.dof_target);
            for (k, t) in target.into_iter().enumerate() {
                b.dof_vel[k] = if span > 0.0 {
                    (t - b.dof_pos[k]) / span
                } else {
                    0.0
                };
                b.dof_pos[k] = t;
            }
        }
    }
    w.update_grasps(model)?;
    w.time += span;
    w.check_finite(model)
}

impl Handler for KinHandler {
    fn kind(&self) -> BackendKind {
        BackendKind::Kin
    }

    fn config(&self) -> &ScenarioConfig {
        &self.worlds.model.cfg
    }

    fn num_envs(&self) -> usize {
        self.worlds.envs.len()
    }

    fn get_states(&self, q: &StateQuery) -> Result<SceneState, BackendError> {
        Ok(q.apply(&self.worlds.states())?)
    }

    fn set_states(&mut self, partial: &SceneState) -> Result<(), BackendError> {
        self.worlds.set(partial)
    }

    fn step(&mut self, n: usize) -> Result<(), BackendError> {
        if n == 0 {
            return Ok(());
        }
        let model = &self.worlds.model;
        let substeps = n * model.cfg.sim.decimation as usize;
        let mut next = self.worlds.envs.clone();
        next.par_iter_mut()
            .try_for_each(|w| advance(model, w, substeps))?;
        self.worlds.envs = next;
        self.steps += n as u64;
        Ok(())
    }

    fn render(&self, camera: &CameraConfig, env: usize) -> Result<Image, BackendError> {
        let w = self
            .worlds
            .envs
            .get(env)
            .ok_or(BackendError::NoSuchEnv(env))?;
        super::render::render(&self.worlds.model, w, camera)
    }

    fn asset(&self, entity: &str) -> Option<&CanonicalAsset> {
        self.worlds.asset(entity)
    }

    fn extra(&self) -> serde_json::Map<String, serde_json::Value> {
        let mut m = serde_json::Map::new();
        m.insert("backend".into(), "kin".into());
        m.insert("steps".into(), self.steps.into());
        m.insert("sim_time".into(), self.worlds.envs[0].time.into());
        m
    }
}

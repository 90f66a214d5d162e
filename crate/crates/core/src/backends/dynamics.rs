use rayon::prelude::*;

use super::contact;
use super::world::{EntityKind, EnvWorld, SceneModel, Worlds};
use super::{BackendError, BackendKind, Handler, Image, MomentumSample};
use crate::assets::CanonicalAsset;
use crate::config::{CameraConfig, ScenarioConfig};
use crate::math::{exp_rotation, renormalize, Vec3};
use crate::state::{SceneState, StateQuery};

/// Impulse-based rigid-body backend. Free bodies integrate momenta with
/// semi-implicit Euler; articulated joints track their targets with a
/// first-order lag.
pub struct DynHandler {
    worlds: Worlds,
    steps: u64,
}

impl DynHandler {
    pub fn launch(cfg: &ScenarioConfig, num_envs: usize) -> Result<Self, BackendError> {
        Ok(Self {
            worlds: Worlds::launch(cfg, num_envs)?,
            steps: 0,
        })
    }
}

fn substep(model: &SceneModel, w: &mut EnvWorld) -> Result<(), BackendError> {
    let sim = &model.cfg.sim;
    let dt = sim.dt;
    let gravity = Vec3::from(sim.gravity);
    let alpha = 1.0 - (-dt / sim.joint_time_constant).exp();

    for (e, b) in model.entities.iter().zip(w.bodies.iter_mut()) {
        match &e.kind {
            EntityKind::Articulated(a) => {
                let target = a.kin.clamp(&b.dof_target);
                for (k, t) in target.iter().enumerate() {
                    let q = b.dof_pos[k];
                    let next = q + (t - q) * alpha;
                    b.dof_vel[k] = (next - q) / dt;
                    b.dof_pos[k] = next;
                }
            }
            EntityKind::Rigid(r) if r.is_dynamic() && b.attached_to.is_none() => {
                b.momentum += gravity * (r.mass * dt);
                b.sync_velocities(r);
                b.pose.pos += b.lin_vel * dt;
                b.pose.rot = renormalize(&(exp_rotation(&(b.ang_vel * dt)) * b.pose.rot));
                b.sync_velocities(r);
            }
            EntityKind::Rigid(_) => {}
        }
    }

    w.update_grasps(model)?;

    let contacts = contact::detect(model, &w.bodies);
    if !contacts.is_empty() {
        let rest_speed = 1.5 * gravity.norm() * dt;
        contact::resolve_impulses(
            model,
            &mut w.bodies,
            &contacts,
            sim.solver_iterations,
            rest_speed,
        );
        contact::project_positions(model, &mut w.bodies, &contacts, dt);
    }
    w.time += dt;
    w.check_finite(model)
}

fn totals(model: &SceneModel, w: &EnvWorld) -> MomentumSample {
    let mut s = MomentumSample::default();
    for (e, b) in model.entities.iter().zip(&w.bodies) {
        if let EntityKind::Rigid(r) = &e.kind {
            if r.is_dynamic() {
                s.linear += b.momentum;
                s.angular += b.pose.pos.cross(&b.momentum) + b.ang_momentum;
                s.kinetic +=
                    0.5 * b.momentum.dot(&b.lin_vel) + 0.5 * b.ang_momentum.dot(&b.ang_vel);
            }
        }
    }
    s
}

impl Handler for DynHandler {
    fn kind(&self) -> BackendKind {
        BackendKind::Dyn
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
        let model = &self.worlds.model;
        let count = n * model.cfg.sim.decimation as usize;
        let mut next = self.worlds.envs.clone();
        next.par_iter_mut().try_for_each(|w| {
            for _ in 0..count {
                substep(model, w)?;
            }
            Ok::<_, BackendError>(())
        })?;
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
        m.insert("backend".into(), "dyn".into());
        m.insert("steps".into(), self.steps.into());
        m.insert("sim_time".into(), self.worlds.envs[0].time.into());
        m
    }

    fn momentum(&self, env: usize) -> Option<MomentumSample> {
        self.worlds
            .envs
            .get(env)
            .map(|w| totals(&self.worlds.model, w))
    }
}

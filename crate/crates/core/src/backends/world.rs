//! Backend-neutral scene model and per-environment world state shared by
//! both handlers.

use std::collections::BTreeMap;

use nalgebra::Matrix3;

use super::kinematics::KinematicModel;
use super::BackendError;
use crate::assets::{self, CanonicalAsset};
use crate::config::{ObjectKind, PrimitiveShape, ScenarioConfig};
use crate::math::{renormalize, Pose, Quat, Vec3};
use crate::state::{check_entity_against, EntityState, EnvState, Field, SceneState, StateError};

pub(crate) struct GraspModel {
    pub ee_body: usize,
    pub gripper_dofs: Vec<usize>,
    pub radius: f64,
}

pub(crate) struct ArticulatedModel {
    pub asset: CanonicalAsset,
    pub kin: KinematicModel,
    pub grasp: Option<GraspModel>,
}

pub(crate) struct RigidModel {
    pub shape: PrimitiveShape,
    pub dims: Vec<f64>,
    pub mass: f64,
    pub inv_mass: f64,
    /// Principal moments in the body frame.
    pub inertia: Vec3,
    pub inv_inertia: Vec3,
}

impl RigidModel {
    pub fn is_dynamic(&self) -> bool {
        self.inv_mass > 0.0
    }

    pub fn half_extents(&self) -> Vec3 {
        match self.shape {
            PrimitiveShape::Box => Vec3::new(self.dims[0], self.dims[1], self.dims[2]) * 0.5,
            PrimitiveShape::Plane => Vec3::new(self.dims[0] * 0.5, self.dims[1] * 0.5, 0.0),
            PrimitiveShape::Sphere => Vec3::repeat(self.dims[0]),
        }
    }

    pub fn inertia_world(&self, rot: &Quat) -> Matrix3<f64> {
        let r = rot.to_rotation_matrix();
        r.matrix() * Matrix3::from_diagonal(&self.inertia) * r.matrix().transpose()
    }

    pub fn inv_inertia_world(&self, rot: &Quat) -> Matrix3<f64> {
        let r = rot.to_rotation_matrix();
        r.matrix() * Matrix3::from_diagonal(&self.inv_inertia) * r.matrix().transpose()
    }
}

pub(crate) enum EntityKind {
    Articulated(Box<ArticulatedModel>),
    Rigid(RigidModel),
}

pub(crate) struct EntityModel {
    pub name: String,
    pub kind: EntityKind,
    pub collision: bool,
    pub restitution: f64,
}

/// Everything about a scenario that does not change while stepping.
pub(crate) struct SceneModel {
    pub cfg: ScenarioConfig,
    pub entities: Vec<EntityModel>,
}

impl SceneModel {
    pub fn build(cfg: &ScenarioConfig) -> Result<Self, BackendError> {
        let violations = crate::config::validate(cfg);
        if !violations.is_empty() {
            return Err(BackendError::InvalidConfig(violations));
        }
        let base = cfg.base_dir.as_deref();
        let mut entities = Vec::new();
        for r in &cfg.robots {
            let asset = assets::load_ref(&r.asset, base)?.asset;
            let kin = KinematicModel::new(&asset);
            let ee_body = kin.body_index(&r.ee_frame).ok_or_else(|| {
                BackendError::Launch(format!("ee_frame `{}` missing", r.ee_frame))
            })?;
            let gripper_dofs: Vec<usize> = r
                .gripper_joints
                .iter()
                .map(|g| asset.dof_index(g).expect("validated gripper joint"))
                .collect();
            let grasp = (!gripper_dofs.is_empty()).then_some(GraspModel {
                ee_body,
                gripper_dofs,
                radius: r.grasp_radius,
            });
            entities.push(EntityModel {
                name: r.name.clone(),
                kind: EntityKind::Articulated(Box::new(ArticulatedModel { asset, kin, grasp })),
                collision: false,
                restitution: 0.0,
            });
        }
        for o in &cfg.objects {
            let kind = match &o.kind {
                ObjectKind::Primitive { shape, dims } => {
                    let inertia = match shape {
                        PrimitiveShape::Sphere => assets::solid_sphere(o.mass, dims[0]),
                        PrimitiveShape::Box => {
                            assets::solid_box(o.mass, &[dims[0], dims[1], dims[2]])
                        }
                        PrimitiveShape::Plane => Vec3::zeros(),
                    };
                    let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 };
                    let dynamic = o.mass > 0.0;
                    EntityKind::Rigid(RigidModel {
                        shape: *shape,
                        dims: dims.clone(),
                        mass: o.mass,
                        inv_mass: inv(o.mass),
                        inertia,
                        inv_inertia: if dynamic {
                            inertia.map(inv)
                        } else {
                            Vec3::zeros()
                        },
                    })
                }
                ObjectKind::Articulated { asset } => {
                    let asset = assets::load_ref(asset, base)?.asset;
                    let kin = KinematicModel::new(&asset);
                    EntityKind::Articulated(Box::new(ArticulatedModel {
                        asset,
                        kin,
                        grasp: None,
                    }))
                }
            };
            let collision = o.collision && matches!(kind, EntityKind::Rigid(_));
            entities.push(EntityModel {
                name: o.name.clone(),
                kind,
                collision,
                restitution: o.restitution,
            });
        }
        Ok(Self {
            cfg: cfg.clone(),
            entities,
        })
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.entities.iter().position(|e| e.name == name)
    }

    pub fn initial_world(&self) -> EnvWorld {
        let mut bodies = Vec::with_capacity(self.entities.len());
        for (i, e) in self.entities.iter().enumerate() {
            let (pose, v, w, dof) = if i < self.cfg.robots.len() {
                let r = &self.cfg.robots[i];
                (
                    r.base_pose,
                    Vec3::zeros(),
                    Vec3::zeros(),
                    r.default_dof_pos.clone(),
                )
            } else {
                let o = &self.cfg.objects[i - self.cfg.robots.len()];
                (
                    o.base_pose,
                    Vec3::from(o.init_lin_vel),
                    Vec3::from(o.init_ang_vel),
                    o.default_dof_pos.clone(),
                )
            };
            let mut b = BodyRt {
                pose,
                lin_vel: Vec3::zeros(),
                ang_vel: Vec3::zeros(),
                momentum: Vec3::zeros(),
                ang_momentum: Vec3::zeros(),
                dof_pos: Vec::new(),
                dof_vel: Vec::new(),
                dof_target: Vec::new(),
                attached_to: None,
                gripper_closed: false,
            };
            match &e.kind {
                EntityKind::Articulated(a) => {
                    let n = a.kin.dof_count();
                    let q = if dof.is_empty() { vec![0.0; n] } else { dof };
                    b.dof_vel = vec![0.0; n];
                    b.dof_target = q.clone();
                    b.dof_pos = q;
                    b.gripper_closed = gripper_closed(a, &b.dof_pos);
                }
                EntityKind::Rigid(r) => {
                    if r.is_dynamic() {
                        b.set_lin_vel(r, v);
                        b.set_ang_vel(r, w);
                    }
                }
            }
            bodies.push(b);
        }
        EnvWorld { bodies, time: 0.0 }
    }
}

/// Mean normalized opening of the gripper coordinates, in [0, 1].
pub(crate) fn gripper_open_fraction(a: &ArticulatedModel, q: &[f64]) -> Option<f64> {
    let g = a.grasp.as_ref()?;
    let mut sum = 0.0;
    for &d in &g.gripper_dofs {
        let [lo, hi] = a.kin.dof_limits[d];
        let f = if hi > lo && hi.is_finite() && lo.is_finite() {
            (q[d] - lo) / (hi - lo)
        } else {
            0.0
        };
        sum += f.clamp(0.0, 1.0);
    }
    Some(sum / g.gripper_dofs.len() as f64)
}

fn gripper_closed(a: &ArticulatedModel, q: &[f64]) -> bool {
    gripper_open_fraction(a, q).is_some_and(|f| f < 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BodyRt {
    pub pose: Pose,
    pub lin_vel: Vec3,
    pub ang_vel: Vec3,
    /// World-frame linear momentum of dynamic rigid bodies.
    pub momentum: Vec3,
    /// World-frame angular momentum about the body's centre.
    pub ang_momentum: Vec3,
    pub dof_pos: Vec<f64>,
    pub dof_vel: Vec<f64>,
    pub dof_target: Vec<f64>,
    /// Carrying robot and this body's pose in its end-effector frame.
    pub attached_to: Option<(usize, Pose)>,
    pub gripper_closed: bool,
}

impl BodyRt {
    pub fn set_lin_vel(&mut self, r: &RigidModel, v: Vec3) {
        self.lin_vel = v;
        self.momentum = v * r.mass;
    }

    pub fn set_ang_vel(&mut self, r: &RigidModel, w: Vec3) {
        self.ang_vel = w;
        self.ang_momentum = r.inertia_world(&self.pose.rot) * w;
    }

    /// Recomputes velocities from momenta after the pose or momenta changed.
    pub fn sync_velocities(&mut self, r: &RigidModel) {
        self.lin_vel = self.momentum * r.inv_mass;
        self.ang_vel = r.inv_inertia_world(&self.pose.rot) * self.ang_momentum;
    }

    pub fn stop(&mut self) {
        self.lin_vel = Vec3::zeros();
        self.ang_vel = Vec3::zeros();
        self.momentum = Vec3::zeros();
        self.ang_momentum = Vec3::zeros();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct EnvWorld {
    pub bodies: Vec<BodyRt>,
    pub time: f64,
}

impl EnvWorld {
    pub fn to_state(&self, model: &SceneModel) -> EnvState {
        let mut out = EnvState::new();
        for (e, b) in model.entities.iter().zip(&self.bodies) {
            out.insert(
                e.name.clone(),
                EntityState {
                    pos: Some(b.pose.pos),
                    rot: Some(b.pose.rot),
                    lin_vel: Some(b.lin_vel),
                    ang_vel: Some(b.ang_vel),
                    dof_pos: Some(b.dof_pos.clone()),
                    dof_vel: Some(b.dof_vel.clone()),
                    dof_target: Some(b.dof_target.clone()),
                },
            );
        }
        out
    }

    /// Teleports to the given fields. Velocities are kept unless set; a
    /// body whose pose is set is released from any gripper.
    pub fn apply(&mut self, model: &SceneModel, partial: &EnvState) -> Result<(), StateError> {
        let full = self.to_state(model);
        for (name, p) in partial {
            check_entity_against(&full, name, p)?;
        }
        for (name, p) in partial {
            let i = model.index(name).expect("checked");
            let b = &mut self.bodies[i];
            if let Some(v) = p.pos {
                b.pose.pos = v;
            }
            if let Some(q) = p.rot {
                b.pose.rot = q;
            }
            if p.pos.is_some() || p.rot.is_some() {
                b.attached_to = None;
            }
            match &model.entities[i].kind {
                EntityKind::Rigid(r) => {
                    if let Some(v) = p.lin_vel {
                        b.set_lin_vel(r, v);
                    }
                    let w = p.ang_vel.unwrap_or(b.ang_vel);
                    if p.ang_vel.is_some() || p.rot.is_some() {
                        b.set_ang_vel(r, w);
                    }
                }
                EntityKind::Articulated(a) => {
                    if let Some(v) = p.lin_vel {
                        b.lin_vel = v;
                    }
                    if let Some(w) = p.ang_vel {
                        b.ang_vel = w;
                    }
                    if let Some(q) = &p.dof_pos {
                        b.dof_pos = q.clone();
                        b.gripper_closed = gripper_closed(a, q);
                    }
                    if let Some(q) = &p.dof_vel {
                        b.dof_vel = q.clone();
                    }
                    if let Some(q) = &p.dof_target {
                        b.dof_target = q.clone();
                    }
                }
            }
        }
        Ok(())
    }

    /// Opens and closes grasps, then moves carried bodies with their
    /// end effectors.
    pub fn update_grasps(&mut self, model: &SceneModel) -> Result<(), BackendError> {
        let mut ee_poses: BTreeMap<usize, Pose> = BTreeMap::new();
        for (i, e) in model.entities.iter().enumerate() {
            let EntityKind::Articulated(a) = &e.kind else {
                continue;
            };
            let Some(g) = &a.grasp else { continue };
            let b = &self.bodies[i];
            let ee = a.kin.fk(&b.pose, &b.dof_pos)?[g.ee_body];
            ee_poses.insert(i, ee);
            let closed = gripper_closed(a, &b.dof_pos);
            let was_closed = b.gripper_closed;
            self.bodies[i].gripper_closed = closed;
            if !closed {
                for body in &mut self.bodies {
                    if body.attached_to.is_some_and(|(r, _)| r == i) {
                        body.attached_to = None;
                    }
                }
            } else if !was_closed {
                let candidate = model
                    .entities
                    .iter()
                    .enumerate()
                    .filter_map(|(k, e)| match &e.kind {
                        EntityKind::Rigid(r)
                            if r.is_dynamic() && self.bodies[k].attached_to.is_none() =>
                        {
                            let d = (self.bodies[k].pose.pos - ee.pos).norm();
                            (d <= g.radius).then_some((k, d))
                        }
                        _ => None,
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                if let Some((k, _)) = candidate {
                    let rel = ee.inverse().compose(&self.bodies[k].pose);
                    self.bodies[k].attached_to = Some((i, rel));
                }
            }
        }
        for b in &mut self.bodies {
            if let Some((r, rel)) = b.attached_to {
                let ee = ee_poses[&r];
                let mut pose = ee.compose(&rel);
                pose.rot = renormalize(&pose.rot);
                b.pose = pose;
                b.stop();
            }
        }
        Ok(())
    }

    pub fn check_finite(&self, model: &SceneModel) -> Result<(), BackendError> {
        for (e, b) in model.entities.iter().zip(&self.bodies) {
            let st = EntityState {
                pos: Some(b.pose.pos),
                rot: Some(b.pose.rot),
                lin_vel: Some(b.lin_vel),
                ang_vel: Some(b.ang_vel),
                dof_pos: Some(b.dof_pos.clone()),
                dof_vel: Some(b.dof_vel.clone()),
                dof_target: Some(b.dof_target.clone()),
            };
            if let Some(f) = st.non_finite_field() {
                return Err(BackendError::NonFinite {
                    entity: e.name.clone(),
                    field: f.name(),
                });
            }
            if !b
                .momentum
                .iter()
                .chain(b.ang_momentum.iter())
                .all(|x| x.is_finite())
            {
                return Err(BackendError::NonFinite {
                    entity: e.name.clone(),
                    field: Field::LinVel.name(),
                });
            }
        }
        Ok(())
    }
}

/// Shared state-access plumbing for the handlers.
pub(crate) struct Worlds {
    pub model: SceneModel,
    pub envs: Vec<EnvWorld>,
}

impl Worlds {
    pub fn launch(cfg: &ScenarioConfig, num_envs: usize) -> Result<Self, BackendError> {
        if num_envs == 0 {
            return Err(BackendError::Launch("num_envs must be at least 1".into()));
        }
        let model = SceneModel::build(cfg)?;
        let w = model.initial_world();
        Ok(Self {
            envs: vec![w; num_envs],
            model,
        })
    }

    pub fn asset(&self, entity: &str) -> Option<&CanonicalAsset> {
        match &self.model.entities[self.model.index(entity)?].kind {
            EntityKind::Articulated(a) => Some(&a.asset),
            EntityKind::Rigid(_) => None,
        }
    }

    pub fn states(&self) -> SceneState {
        SceneState {
            envs: self.envs.iter().map(|e| e.to_state(&self.model)).collect(),
        }
    }

    pub fn set(&mut self, partial: &SceneState) -> Result<(), BackendError> {
        let n = self.envs.len();
        match partial.envs.len() {
            0 => return Ok(()),
            1 => {}
            m if m == n => {}
            m => return Err(StateError::EnvCountMismatch(n, m).into()),
        }
        // Validate everything before touching any env.
        let mut next = self.envs.clone();
        for (i, env) in next.iter_mut().enumerate() {
            let p = if partial.envs.len() == 1 {
                &partial.envs[0]
            } else {
                &partial.envs[i]
            };
            env.apply(&self.model, p)?;
        }
        self.envs = next;
        Ok(())
    }
}

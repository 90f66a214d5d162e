//! Scene state records, partial merges, diffs and demonstration trajectories.

mod rvt;

use std::collections::BTreeMap;

pub use rvt::{deserialize_trajectory, serialize_trajectory, RVT_MAJOR, RVT_MINOR};

use crate::math::{geodesic_angle, Quat, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StateError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{entity}` has no field `{field}`")]
    UnknownField { entity: String, field: &'static str },
    #[error("`{entity}.{field}` expects {expected} values, got {got}")]
    DofLengthMismatch {
        entity: String,
        field: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("env count mismatch: {0} vs {1}")]
    EnvCountMismatch(usize, usize),
    #[error("entity sets differ: {0}")]
    EntitySetMismatch(String),
    #[error("rotation of `{0}` is not a unit quaternion")]
    NonUnitRotation(String),
    #[error("unsupported format version {major}.{minor}")]
    VersionMismatch { major: u16, minor: u16 },
    #[error("not an RVT1 stream")]
    BadMagic,
    #[error("truncated stream: {0}")]
    TruncatedStream(String),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    ChecksumFailure { stored: u32, computed: u32 },
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Pos,
    Rot,
    LinVel,
    AngVel,
    DofPos,
    DofVel,
    DofTarget,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Pos,
        Field::Rot,
        Field::LinVel,
        Field::AngVel,
        Field::DofPos,
        Field::DofVel,
        Field::DofTarget,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::Pos => "pos",
            Field::Rot => "rot",
            Field::LinVel => "lin_vel",
            Field::AngVel => "ang_vel",
            Field::DofPos => "dof_pos",
            Field::DofVel => "dof_vel",
            Field::DofTarget => "dof_target",
        }
    }

    pub fn from_name(s: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.name() == s)
    }
}

/// One entity's state. A full record has every field; partial records (for
/// `set_states` and query results) leave the rest `None`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityState {
    pub pos: Option<Vec3>,
    /// Unit quaternion, (w, x, y, z) when serialized.
    pub rot: Option<Quat>,
    pub lin_vel: Option<Vec3>,
    pub ang_vel: Option<Vec3>,
    pub dof_pos: Option<Vec<f64>>,
    pub dof_vel: Option<Vec<f64>>,
    pub dof_target: Option<Vec<f64>>,
}

impl EntityState {
    pub fn has(&self, f: Field) -> bool {
        match f {
            Field::Pos => self.pos.is_some(),
            Field::Rot => self.rot.is_some(),
            Field::LinVel => self.lin_vel.is_some(),
            Field::AngVel => self.ang_vel.is_some(),
            Field::DofPos => self.dof_pos.is_some(),
            Field::DofVel => self.dof_vel.is_some(),
            Field::DofTarget => self.dof_target.is_some(),
        }
    }

    fn clear(&mut self, f: Field) {
        match f {
            Field::Pos => self.pos = None,
            Field::Rot => self.rot = None,
            Field::LinVel => self.lin_vel = None,
            Field::AngVel => self.ang_vel = None,
            Field::DofPos => self.dof_pos = None,
            Field::DofVel => self.dof_vel = None,
            Field::DofTarget => self.dof_target = None,
        }
    }

    fn dof(&self, f: Field) -> Option<&Vec<f64>> {
        match f {
            Field::DofPos => self.dof_pos.as_ref(),
            Field::DofVel => self.dof_vel.as_ref(),
            Field::DofTarget => self.dof_target.as_ref(),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        Field::ALL.iter().all(|f| !self.has(*f))
    }

    /// Every field whose value is not finite.
    pub fn non_finite_field(&self) -> Option<Field> {
        let v3 = |v: &Option<Vec3>| v.map(|v| !v.iter().all(|x| x.is_finite())).unwrap_or(false);
        if v3(&self.pos) {
            return Some(Field::Pos);
        }
        if self
            .rot
            .map(|q| !q.coords.iter().all(|x| x.is_finite()))
            .unwrap_or(false)
        {
            return Some(Field::Rot);
        }
        if v3(&self.lin_vel) {
            return Some(Field::LinVel);
        }
        if v3(&self.ang_vel) {
            return Some(Field::AngVel);
        }
        [Field::DofPos, Field::DofVel, Field::DofTarget]
            .into_iter()
            .find(|f| {
                self.dof(*f)
                    .map(|v| !v.iter().all(|x| x.is_finite()))
                    .unwrap_or(false)
            })
    }
}

/// Entity name to state, for one environment.
pub type EnvState = BTreeMap<String, EntityState>;

/// States of every parallel environment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SceneState {
    pub envs: Vec<EnvState>,
}

impl SceneState {
    pub fn single(env: EnvState) -> Self {
        Self { envs: vec![env] }
    }

    /// The same partial record for `n` environments.
    pub fn broadcast(env: EnvState, n: usize) -> Self {
        Self { envs: vec![env; n] }
    }
}

/// Selects entities and fields; `None` selects everything.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateQuery {
    pub entities: Option<Vec<String>>,
    pub fields: Option<Vec<Field>>,
}

impl StateQuery {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn entity_fields(entity: &str, fields: &[Field]) -> Self {
        Self {
            entities: Some(vec![entity.to_string()]),
            fields: Some(fields.to_vec()),
        }
    }

    /// Filters a full state; unknown entity names in the query are errors.
    pub fn apply(&self, full: &SceneState) -> Result<SceneState, StateError> {
        let mut envs = Vec::with_capacity(full.envs.len());
        for env in &full.envs {
            let mut out = EnvState::new();
            match &self.entities {
                None => out = env.clone(),
                Some(names) => {
                    for n in names {
                        let e = env
                            .get(n)
                            .ok_or_else(|| StateError::UnknownEntity(n.clone()))?;
                        out.insert(n.clone(), e.clone());
                    }
                }
            }
            if let Some(fields) = &self.fields {
                for e in out.values_mut() {
                    for f in Field::ALL {
                        if !fields.contains(&f) {
                            e.clear(f);
                        }
                    }
                }
            }
            envs.push(out);
        }
        Ok(SceneState { envs })
    }
}

/// `base` with every field present in `partial` replaced. A partial with one
/// env applies to all envs of `base`.
pub fn merge_states(base: &SceneState, partial: &SceneState) -> Result<SceneState, StateError> {
    let mut out = base.clone();
    if partial.envs.is_empty() {
        return Ok(out);
    }
    if partial.envs.len() != 1 && partial.envs.len() != base.envs.len() {
        return Err(StateError::EnvCountMismatch(
            base.envs.len(),
            partial.envs.len(),
        ));
    }
    for (i, env) in out.envs.iter_mut().enumerate() {
        let p = if partial.envs.len() == 1 {
            &partial.envs[0]
        } else {
            &partial.envs[i]
        };
        merge_env(env, p)?;
    }
    Ok(out)
}

/// In-place form of [`merge_states`] for one environment.
pub fn merge_env(base: &mut EnvState, partial: &EnvState) -> Result<(), StateError> {
    for (name, p) in partial {
        check_entity_against(base, name, p)?;
    }
    for (name, p) in partial {
        let b = base.get_mut(name).expect("checked");
        if let Some(v) = p.pos {
            b.pos = Some(v);
        }
        if let Some(v) = p.rot {
            b.rot = Some(v);
        }
        if let Some(v) = p.lin_vel {
            b.lin_vel = Some(v);
        }
        if let Some(v) = p.ang_vel {
            b.ang_vel = Some(v);
        }
        if let Some(v) = &p.dof_pos {
            b.dof_pos = Some(v.clone());
        }
        if let Some(v) = &p.dof_vel {
            b.dof_vel = Some(v.clone());
        }
        if let Some(v) = &p.dof_target {
            b.dof_target = Some(v.clone());
        }
    }
    Ok(())
}

/// Checks that `p` only names fields `base[name]` has, with matching lengths.
pub fn check_entity_against(
    base: &EnvState,
    name: &str,
    p: &EntityState,
) -> Result<(), StateError> {
    let b = base
        .get(name)
        .ok_or_else(|| StateError::UnknownEntity(name.to_string()))?;
    for f in Field::ALL {
        if p.has(f) && !b.has(f) {
            return Err(StateError::UnknownField {
                entity: name.to_string(),
                field: f.name(),
            });
        }
        if let (Some(pv), Some(bv)) = (p.dof(f), b.dof(f)) {
            if pv.len() != bv.len() {
                return Err(StateError::DofLengthMismatch {
                    entity: name.to_string(),
                    field: f.name(),
                    expected: bv.len(),
                    got: pv.len(),
                });
            }
        }
    }
    if let Some(q) = p.rot {
        if (q.as_ref().norm() - 1.0).abs() >= 1e-6 {
            return Err(StateError::NonUnitRotation(name.to_string()));
        }
    }
    Ok(())
}

/// Largest per-field errors of one entity over all envs; fields missing from
/// either side count as zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EntityDiff {
    pub pos: f64,
    /// Geodesic angle, radians.
    pub rot: f64,
    pub lin_vel: f64,
    pub ang_vel: f64,
    pub dof_pos: f64,
    pub dof_vel: f64,
    pub dof_target: f64,
}

impl EntityDiff {
    pub fn get(&self, f: Field) -> f64 {
        match f {
            Field::Pos => self.pos,
            Field::Rot => self.rot,
            Field::LinVel => self.lin_vel,
            Field::AngVel => self.ang_vel,
            Field::DofPos => self.dof_pos,
            Field::DofVel => self.dof_vel,
            Field::DofTarget => self.dof_target,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffReport {
    pub entities: BTreeMap<String, EntityDiff>,
}

impl DiffReport {
    fn max_of(&self, f: Field) -> f64 {
        self.entities.values().map(|d| d.get(f)).fold(0.0, f64::max)
    }
    pub fn max_pos(&self) -> f64 {
        self.max_of(Field::Pos)
    }
    pub fn max_rot(&self) -> f64 {
        self.max_of(Field::Rot)
    }
    pub fn max_dof(&self) -> f64 {
        self.max_of(Field::DofPos)
    }
    /// Largest error over every field.
    pub fn max_any(&self) -> f64 {
        Field::ALL
            .iter()
            .map(|f| self.max_of(*f))
            .fold(0.0, f64::max)
    }
    pub fn within(&self, tol: f64) -> bool {
        self.max_any() <= tol
    }
}

/// Per-entity max pose, velocity and joint errors between two states.
/// Symmetric in its arguments.
pub fn diff_states(a: &SceneState, b: &SceneState) -> Result<DiffReport, StateError> {
    if a.envs.len() != b.envs.len() {
        return Err(StateError::EnvCountMismatch(a.envs.len(), b.envs.len()));
    }
    let mut report = DiffReport::default();
    for (ea, eb) in a.envs.iter().zip(&b.envs) {
        let d = diff_env(ea, eb)?;
        for (name, x) in d.entities {
            let acc = report.entities.entry(name).or_default();
            for f in Field::ALL {
                let v = acc.get(f).max(x.get(f));
                set_diff(acc, f, v);
            }
        }
    }
    Ok(report)
}

pub fn diff_env(a: &EnvState, b: &EnvState) -> Result<DiffReport, StateError> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        let ka: Vec<_> = a.keys().collect();
        let kb: Vec<_> = b.keys().collect();
        return Err(StateError::EntitySetMismatch(format!("{ka:?} vs {kb:?}")));
    }
    let mut report = DiffReport::default();
    for (name, x) in a {
        let y = &b[name];
        let v3 = |p: Option<Vec3>, q: Option<Vec3>| match (p, q) {
            (Some(p), Some(q)) => (p - q).norm(),
            _ => 0.0,
        };
        let dv = |p: Option<&Vec<f64>>, q: Option<&Vec<f64>>| -> Result<f64, StateError> {
            match (p, q) {
                (Some(p), Some(q)) if p.len() != q.len() => Err(StateError::DofLengthMismatch {
                    entity: name.clone(),
                    field: "dof",
                    expected: p.len(),
                    got: q.len(),
                }),
                (Some(p), Some(q)) => Ok(p
                    .iter()
                    .zip(q)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)),
                _ => Ok(0.0),
            }
        };
        let d = EntityDiff {
            pos: v3(x.pos, y.pos),
            rot: match (x.rot, y.rot) {
                (Some(p), Some(q)) => geodesic_angle(&p, &q),
                _ => 0.0,
            },
            lin_vel: v3(x.lin_vel, y.lin_vel),
            ang_vel: v3(x.ang_vel, y.ang_vel),
            dof_pos: dv(x.dof_pos.as_ref(), y.dof_pos.as_ref())?,
            dof_vel: dv(x.dof_vel.as_ref(), y.dof_vel.as_ref())?,
            dof_target: dv(x.dof_target.as_ref(), y.dof_target.as_ref())?,
        };
        report.entities.insert(name.clone(), d);
    }
    Ok(report)
}

fn set_diff(d: &mut EntityDiff, f: Field, v: f64) {
    match f {
        Field::Pos => d.pos = v,
        Field::Rot => d.rot = v,
        Field::LinVel => d.lin_vel = v,
        Field::AngVel => d.ang_vel = v,
        Field::DofPos => d.dof_pos = v,
        Field::DofVel => d.dof_vel = v,
        Field::DofTarget => d.dof_target = v,
    }
}

/// Joint targets for every robot, keyed by robot name.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Action {
    pub targets: BTreeMap<String, Vec<f64>>,
}

impl Action {
    pub fn for_robot(robot: &str, q: Vec<f64>) -> Self {
        let mut targets = BTreeMap::new();
        targets.insert(robot.to_string(), q);
        Self { targets }
    }
}

/// A demonstration: initial state and actions, optionally with the state
/// after each action.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub scenario_name: String,
    pub init_state: EnvState,
    pub actions: Vec<Action>,
    pub states: Option<Vec<EnvState>>,
    pub success: Option<bool>,
    pub extras: BTreeMap<String, String>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<(), StateError> {
        if let Some(s) = &self.states {
            if s.len() != self.actions.len() {
                return Err(StateError::InvalidTrajectory(format!(
                    "{} states for {} actions",
                    s.len(),
                    self.actions.len()
                )));
            }
        }
        for (i, a) in self.actions.iter().enumerate() {
            for (robot, q) in &a.targets {
                let Some(init) = self.init_state.get(robot) else {
                    return Err(StateError::InvalidTrajectory(format!(
                        "action {i} names unknown robot `{robot}`"
                    )));
                };
                if let Some(d) = &init.dof_pos {
                    if d.len() != q.len() {
                        return Err(StateError::InvalidTrajectory(format!(
                            "action {i} for `{robot}` has {} values, robot has {} DoF",
                            q.len(),
                            d.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The state after the last action, or the initial state when empty.
    pub fn final_state(&self) -> Option<&EnvState> {
        match &self.states {
            Some(s) => s.last().or(Some(&self.init_state)),
            None if self.actions.is_empty() => Some(&self.init_state),
            None => None,
        }
    }
}

//! Scenario configuration: typed tree, text format, validation and
//! command-line overrides.

mod format;
mod types;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde_json::Value;

pub use format::{parse_inline, parse_tree, write_tree, SyntaxError};
pub use types::*;

use crate::assets::{self, AssetError, CanonicalAsset};
use crate::math::Pose;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("unknown field at `{path}`: {message}")]
    UnknownField { path: String, message: String },
    #[error("{}", join_violations(.0))]
    UnknownOrDuplicateEntity(Vec<Violation>),
    #[error("{}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("override path `{0}` does not exist")]
    PathNotFound(String),
    #[error("type mismatch at `{path}`: {message}")]
    TypeMismatch { path: String, message: String },
    #[error("malformed override `{0}`; expected PATH=VALUE")]
    MalformedOverride(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Asset(#[from] AssetError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    /// Duplicate entity name or reference to an entity that does not exist.
    Entity,
    Invariant,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Parses and validates scenario text. Relative asset paths resolve against
/// the working directory; use [`load_scenario`] for files.
pub fn parse_scenario(source: &str) -> Result<ScenarioConfig, ConfigError> {
    parse_scenario_in(source, None)
}

pub fn parse_scenario_in(
    source: &str,
    base_dir: Option<&Path>,
) -> Result<ScenarioConfig, ConfigError> {
    let tree = parse_tree(source)?;
    let mut cfg = from_tree(tree)?;
    cfg.base_dir = base_dir.map(Path::to_path_buf);
    check(&cfg)?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let dir = path.parent().map(|p| {
        if p.as_os_str().is_empty() {
            Path::new(".")
        } else {
            p
        }
    });
    parse_scenario_in(&text, dir)
}

/// Text form that [`parse_scenario`] reads back into an equal config.
pub fn serialize_scenario(cfg: &ScenarioConfig) -> String {
    write_tree(&to_tree(cfg))
}

fn to_tree(cfg: &ScenarioConfig) -> Value {
    serde_json::to_value(cfg).expect("scenario config serializes")
}

fn from_tree(tree: Value) -> Result<ScenarioConfig, ConfigError> {
    serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        if message.starts_with("unknown field") || message.starts_with("unknown variant") {
            ConfigError::UnknownField { path, message }
        } else {
            ConfigError::TypeMismatch { path, message }
        }
    })
}

fn check(cfg: &ScenarioConfig) -> Result<(), ConfigError> {
    let v = validate(cfg);
    if v.is_empty() {
        Ok(())
    } else if v.iter().any(|v| v.kind == ViolationKind::Entity) {
        Err(ConfigError::UnknownOrDuplicateEntity(v))
    } else {
        Err(ConfigError::Invalid(v))
    }
}

/// Applies `dotted.path=value` overrides in order and revalidates. The input
/// is not modified.
pub fn apply_overrides(
    cfg: &ScenarioConfig,
    overrides: &[String],
) -> Result<ScenarioConfig, ConfigError> {
    if overrides.is_empty() {
        return Ok(cfg.clone());
    }
    let mut tree = to_tree(cfg);
    for ov in overrides {
        let (path, raw) = ov
            .split_once('=')
            .ok_or_else(|| ConfigError::MalformedOverride(ov.clone()))?;
        let path = path.trim();
        let raw = raw.trim();
        if path.is_empty() {
            return Err(ConfigError::MalformedOverride(ov.clone()));
        }
        let value = parse_inline(raw, 1, path.len() + 2)?;
        let mut candidate = tree.clone();
        set_path(&mut candidate, path, value.clone())?;
        match from_tree(candidate.clone()) {
            Ok(_) => tree = candidate,
            Err(ConfigError::UnknownField { .. }) => {
                return Err(ConfigError::PathNotFound(path.to_string()))
            }
            Err(ConfigError::TypeMismatch { message, .. }) => {
                // A bare token such as `name=42` may have been meant as text.
                let as_text =
                    !raw.starts_with('"') && !matches!(value, Value::String(_) | Value::Array(_));
                let retry = as_text.then(|| {
                    let mut t = tree.clone();
                    set_path(&mut t, path, Value::String(raw.to_string())).ok()?;
                    from_tree(t.clone()).ok().map(|_| t)
                });
                match retry.flatten() {
                    Some(t) => tree = t,
                    None => {
                        return Err(ConfigError::TypeMismatch {
                            path: path.to_string(),
                            message,
                        })
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }
    let mut out = from_tree(tree)?;
    out.base_dir = cfg.base_dir.clone();
    check(&out)?;
    Ok(out)
}

fn set_path(tree: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let not_found = || ConfigError::PathNotFound(path.to_string());
    let segs: Vec<&str> = path.split('.').collect();
    let mut cur = tree;
    for (i, seg) in segs.iter().enumerate() {
        let last = i + 1 == segs.len();
        cur = match cur {
            Value::Object(map) => {
                if last && !map.contains_key(*seg) {
                    // Optional fields are omitted when unset; the typed layer
                    // rejects names that are not fields at all.
                    map.insert(seg.to_string(), Value::Null);
                }
                map.get_mut(*seg).ok_or_else(not_found)?
            }
            Value::Array(items) => {
                let idx: usize = seg.parse().map_err(|_| not_found())?;
                items.get_mut(idx).ok_or_else(not_found)?
            }
            _ => return Err(not_found()),
        };
    }
    *cur = value;
    Ok(())
}

enum Entity {
    Primitive,
    /// `None` when the asset file is missing or failed to parse.
    Asset(Option<CanonicalAsset>),
}

struct Report {
    out: Vec<Violation>,
}

impl Report {
    fn entity(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.push(path, ViolationKind::Entity, message);
    }
    fn invalid(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.push(path, ViolationKind::Invariant, message);
    }
    fn push(&mut self, path: impl Into<String>, kind: ViolationKind, message: impl Into<String>) {
        self.out.push(Violation {
            path: path.into(),
            kind,
            message: message.into(),
        });
    }
    fn unit(&mut self, path: &str, x: f64) {
        if !(0.0..=1.0).contains(&x) {
            self.invalid(path, format!("{x} is outside [0, 1]"));
        }
    }
    fn pose(&mut self, path: &str, p: &Pose) {
        if !p.is_finite() {
            self.invalid(path, "pose is not finite");
        } else if (p.rot.as_ref().norm() - 1.0).abs() >= 1e-6 {
            self.invalid(format!("{path}.rot"), "quaternion is not unit length");
        }
    }
    fn material(&mut self, path: &str, m: &MaterialParams) {
        self.unit(&format!("{path}.roughness"), m.roughness);
        self.unit(&format!("{path}.specular"), m.specular);
        self.unit(&format!("{path}.metallic"), m.metallic);
        for (i, c) in m.base_color.iter().enumerate() {
            self.unit(&format!("{path}.base_color.{i}"), *c);
        }
    }
}

/// Loads the asset behind a reference for validation; a missing file is
/// reported at launch instead.
fn probe_asset(
    r: &AssetRef,
    cfg: &ScenarioConfig,
    path: &str,
    rep: &mut Report,
) -> Option<CanonicalAsset> {
    match assets::load_ref(r, cfg.base_dir.as_deref()) {
        Ok(p) => Some(p.asset),
        Err(AssetError::AssetNotFound(_)) => None,
        Err(e) => {
            rep.invalid(path, e.to_string());
            None
        }
    }
}

/// Every invariant violation in `cfg`, ordered by path.
pub fn validate(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut rep = Report { out: Vec::new() };
    let mut entities: BTreeMap<&str, Entity> = BTreeMap::new();
    let mut seen = HashSet::new();

    if cfg.name.is_empty() {
        rep.invalid("name", "must not be empty");
    }
    if cfg.robots.is_empty() && cfg.objects.is_empty() {
        rep.invalid("robots", "scenario needs at least one robot or object");
    }

    for (i, r) in cfg.robots.iter().enumerate() {
        let p = format!("robots.{i}");
        if !seen.insert(r.name.as_str()) {
            rep.entity(
                format!("{p}.name"),
                format!("duplicate entity name `{}`", r.name),
            );
        }
        rep.pose(&format!("{p}.base_pose"), &r.base_pose);
        if !(r.grasp_radius >= 0.0) {
            rep.invalid(format!("{p}.grasp_radius"), "must be non-negative");
        }
        let asset = probe_asset(&r.asset, cfg, &format!("{p}.asset"), &mut rep);
        if let Some(a) = &asset {
            dof_len(&mut rep, &p, a, &r.default_dof_pos);
            if a.body(&r.ee_frame).is_none() {
                rep.invalid(
                    format!("{p}.ee_frame"),
                    format!("body `{}` not in asset", r.ee_frame),
                );
            }
            for (k, g) in r.gripper_joints.iter().enumerate() {
                if a.dof_index(g).is_none() {
                    rep.invalid(
                        format!("{p}.gripper_joints.{k}"),
                        format!("no actuated joint `{g}`"),
                    );
                }
            }
        }
        entities.insert(&r.name, Entity::Asset(asset));
    }

    for (i, o) in cfg.objects.iter().enumerate() {
        let p = format!("objects.{i}");
        if !seen.insert(o.name.as_str()) {
            rep.entity(
                format!("{p}.name"),
                format!("duplicate entity name `{}`", o.name),
            );
        }
        rep.pose(&format!("{p}.base_pose"), &o.base_pose);
        if !(o.mass >= 0.0 && o.mass.is_finite()) {
            rep.invalid(format!("{p}.mass"), "must be finite and non-negative");
        }
        rep.unit(&format!("{p}.restitution"), o.restitution);
        rep.material(&format!("{p}.material"), &o.material);
        for (k, v) in o.init_lin_vel.iter().chain(&o.init_ang_vel).enumerate() {
            if !v.is_finite() {
                let field = if k < 3 {
                    "init_lin_vel"
                } else {
                    "init_ang_vel"
                };
                rep.invalid(format!("{p}.{field}.{}", k % 3), "must be finite");
            }
        }
        let asset = match &o.kind {
            ObjectKind::Primitive { shape, dims } => {
                if dims.len() != shape.dims_len() {
                    rep.invalid(
                        format!("{p}.kind.dims"),
                        format!(
                            "{shape:?} needs {} dims, got {}",
                            shape.dims_len(),
                            dims.len()
                        ),
                    );
                }
                for (k, d) in dims.iter().enumerate() {
                    if !(*d > 0.0 && d.is_finite()) {
                        rep.invalid(format!("{p}.kind.dims.{k}"), "must be positive");
                    }
                }
                if *shape == PrimitiveShape::Plane && o.mass != 0.0 {
                    rep.invalid(format!("{p}.mass"), "planes are static and need mass 0");
                }
                if !o.default_dof_pos.is_empty() {
                    rep.invalid(format!("{p}.default_dof_pos"), "primitives have no joints");
                }
                Entity::Primitive
            }
            ObjectKind::Articulated { asset } => {
                let a = probe_asset(asset, cfg, &format!("{p}.kind.asset"), &mut rep);
                if let Some(a) = &a {
                    dof_len(&mut rep, &p, a, &o.default_dof_pos);
                }
                Entity::Asset(a)
            }
        };
        entities.insert(&o.name, asset);
    }

    let mut cam_names = HashSet::new();
    for (i, c) in cfg.cameras.iter().enumerate() {
        let p = format!("cameras.{i}");
        if !cam_names.insert(c.name.as_str()) {
            rep.invalid(
                format!("{p}.name"),
                format!("duplicate camera `{}`", c.name),
            );
        }
        rep.pose(&format!("{p}.pose"), &c.pose);
        if !(c.vertical_fov > 0.0 && c.vertical_fov < 180.0) {
            rep.invalid(format!("{p}.vertical_fov"), "must lie in (0, 180) degrees");
        }
        if c.width == 0 || c.height == 0 {
            rep.invalid(format!("{p}.width"), "image size must be at least 1x1");
        }
    }

    for (i, l) in cfg.lights.iter().enumerate() {
        let p = format!("lights.{i}");
        if !(l.intensity >= 0.0 && l.intensity.is_finite()) {
            rep.invalid(format!("{p}.intensity"), "must be finite and non-negative");
        }
        if !(l.color_temperature > 0.0) {
            rep.invalid(format!("{p}.color_temperature"), "must be positive");
        }
        match &l.kind {
            LightKind::Distant { polar, azimuth } => {
                if !polar.is_finite() || !azimuth.is_finite() {
                    rep.invalid(format!("{p}.kind"), "angles must be finite");
                }
            }
            LightKind::CylinderArray {
                rows,
                cols,
                size,
                height,
            } => {
                if *rows < 1 || *cols < 1 {
                    rep.invalid(format!("{p}.kind.rows"), "rows and cols must be at least 1");
                }
                if !(*size > 0.0) || !height.is_finite() {
                    rep.invalid(
                        format!("{p}.kind.size"),
                        "size must be positive, height finite",
                    );
                }
            }
        }
    }

    for (field, m) in [
        ("table_material", &cfg.scene.table_material),
        ("wall_material", &cfg.scene.wall_material),
        ("ground_material", &cfg.scene.ground_material),
    ] {
        if let Some(m) = m {
            rep.material(&format!("scene.{field}"), m);
        }
    }

    let t = &cfg.task;
    if t.episode_length < 1 {
        rep.invalid("task.episode_length", "must be at least 1");
    }
    checker(&mut rep, "task.checker", &t.checker, &entities);
    for (i, s) in t.subtasks.iter().enumerate() {
        let p = format!("task.subtasks.{i}");
        if !entities.contains_key(s.anchor.as_str()) {
            rep.entity(
                format!("{p}.anchor"),
                format!("unknown entity `{}`", s.anchor),
            );
        }
        checker(&mut rep, &format!("{p}.end"), &s.end, &entities);
    }
    for (i, s) in t.spawn_regions.iter().enumerate() {
        let p = format!("task.spawn_regions.{i}");
        if !entities.contains_key(s.entity.as_str()) {
            rep.entity(
                format!("{p}.entity"),
                format!("unknown entity `{}`", s.entity),
            );
        }
        if (0..3).any(|k| !(s.lo[k] <= s.hi[k]) || !s.lo[k].is_finite() || !s.hi[k].is_finite()) {
            rep.invalid(format!("{p}.lo"), "bounds must be finite with lo <= hi");
        }
        if !(s.yaw >= 0.0 && s.yaw.is_finite()) {
            rep.invalid(format!("{p}.yaw"), "must be finite and non-negative");
        }
    }

    let s = &cfg.sim;
    if !(s.dt > 0.0 && s.dt.is_finite()) {
        rep.invalid("sim.dt", "must be positive");
    }
    if s.decimation < 1 {
        rep.invalid("sim.decimation", "must be at least 1");
    }
    if s.gravity.iter().any(|g| !g.is_finite()) {
        rep.invalid("sim.gravity", "must be finite");
    }
    if !(s.joint_time_constant > 0.0 && s.joint_time_constant.is_finite()) {
        rep.invalid("sim.joint_time_constant", "must be positive");
    }

    rep.out.sort();
    rep.out
}

fn dof_len(rep: &mut Report, prefix: &str, a: &CanonicalAsset, dof: &[f64]) {
    // Empty means "all zeros".
    if !dof.is_empty() && dof.len() != a.dof_count() {
        rep.invalid(
            format!("{prefix}.default_dof_pos"),
            format!("expected {} entries, got {}", a.dof_count(), dof.len()),
        );
    }
    for (k, (q, lim)) in dof.iter().zip(a.dof_limits()).enumerate() {
        if !q.is_finite() || *q < lim[0] || *q > lim[1] {
            rep.invalid(
                format!("{prefix}.default_dof_pos.{k}"),
                format!("{q} is outside joint limits"),
            );
        }
    }
}

fn checker(rep: &mut Report, path: &str, c: &SuccessChecker, entities: &BTreeMap<&str, Entity>) {
    let known = |rep: &mut Report, e: &str| {
        let ok = entities.contains_key(e);
        if !ok {
            rep.entity(path, format!("unknown entity `{e}`"));
        }
        ok
    };
    match c {
        SuccessChecker::Never => {}
        SuccessChecker::PositionWithin {
            entity,
            center,
            radius,
        } => {
            known(rep, entity);
            if !(*radius >= 0.0) || center.iter().any(|x| !x.is_finite()) {
                rep.invalid(path, "radius must be non-negative and center finite");
            }
        }
        SuccessChecker::PositionShift {
            entity,
            axis,
            min_shift,
        } => {
            known(rep, entity);
            let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
            if (n - 1.0).abs() > 1e-6 {
                rep.invalid(path, "axis must be a unit vector");
            }
            if !min_shift.is_finite() {
                rep.invalid(path, "min_shift must be finite");
            }
        }
        SuccessChecker::JointPosThreshold {
            entity,
            joint,
            threshold,
            ..
        } => {
            if known(rep, entity) {
                match &entities[entity.as_str()] {
                    Entity::Asset(Some(a)) if a.dof_index(joint).is_none() => rep.entity(
                        path,
                        format!("entity `{entity}` has no actuated joint `{joint}`"),
                    ),
                    Entity::Primitive => {
                        rep.entity(path, format!("entity `{entity}` has no joints"))
                    }
                    _ => {}
                }
            }
            if !threshold.is_finite() {
                rep.invalid(path, "threshold must be finite");
            }
        }
        SuccessChecker::RelativePose {
            entity_a,
            entity_b,
            max_pos_err,
            max_rot_err,
            target_rel,
        } => {
            known(rep, entity_a);
            known(rep, entity_b);
            if !(*max_pos_err >= 0.0) || !(*max_rot_err >= 0.0) {
                rep.invalid(path, "tolerances must be non-negative");
            }
            rep.pose(&format!("{path}.target_rel"), target_rel);
        }
        SuccessChecker::All { of } | SuccessChecker::Any { of } => {
            for (i, c) in of.iter().enumerate() {
                checker(rep, &format!("{path}.of.{i}"), c, entities);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
name: minimal
objects:
  - name: cube
    kind:
      type: primitive
      shape: box
      dims: [0.05, 0.05, 0.05]
    mass: 0.1
";

    #[test]
    fn minimal_scenario_gets_defaults() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        assert_eq!(cfg.objects.len(), 1);
        assert_eq!(cfg.objects[0].restitution, 0.5);
        assert_eq!(cfg.sim.dt, 1.0 / 60.0);
        assert_eq!(cfg.sim.decimation, 1);
        assert_eq!(cfg.sim.gravity, [0.0, 0.0, -9.81]);
        assert_eq!(cfg.sim.solver_iterations, 8);
        assert_eq!(cfg.task.episode_length, 250);
        assert!(validate(&cfg).is_empty());
    }

    #[test]
    fn duplicate_entity_is_rejected() {
        let src = format!("{MINIMAL}  - name: cube\n    kind:\n      type: primitive\n      shape: sphere\n      dims: [0.1]\n");
        assert!(matches!(
            parse_scenario(&src),
            Err(ConfigError::UnknownOrDuplicateEntity(_))
        ));
    }

    #[test]
    fn unknown_key_is_an_error_but_backend_extras_are_kept() {
        let bad = format!("{MINIMAL}colour: red\n");
        assert!(matches!(
            parse_scenario(&bad),
            Err(ConfigError::UnknownField { .. })
        ));
        let ok =
            format!("{MINIMAL}backend_extras:\n  dyn:\n    solver_type: pgs\n    substeps: 4\n");
        let cfg = parse_scenario(&ok).unwrap();
        assert_eq!(cfg.backend_extras["dyn"]["solver_type"], "pgs");
        assert_eq!(cfg.backend_extras["dyn"]["substeps"], 4);
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_scenario("name: x\nobjects:\n   - name: a\n").unwrap_err();
        let ConfigError::Syntax(e) = err else {
            panic!("{err:?}")
        };
        assert_eq!(e.line, 3);
    }

    #[test]
    fn serialize_round_trips() {
        let mut cfg = parse_scenario(MINIMAL).unwrap();
        cfg.cameras.push(CameraConfig {
            name: "front".into(),
            pose: Pose::from_translation(1.0, 0.0, 0.5),
            vertical_fov: 45.0,
            width: 64,
            height: 48,
        });
        cfg.lights.push(LightConfig {
            kind: LightKind::CylinderArray {
                rows: 2,
                cols: 3,
                size: 0.5,
                height: 2.0,
            },
            intensity: 0.8,
            color_temperature: 5000.0,
        });
        cfg.task.checker = SuccessChecker::All {
            of: vec![SuccessChecker::PositionWithin {
                entity: "cube".into(),
                center: [0.1, 0.2, 0.3],
                radius: 0.1,
            }],
        };
        let text = serialize_scenario(&cfg);
        assert_eq!(parse_scenario(&text).unwrap(), cfg);
    }

    #[test]
    fn overrides_set_fields_in_order() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        let out = apply_overrides(&cfg, &["task.episode_length=250".into()]).unwrap();
        assert_eq!(out.task.episode_length, 250);
        let out = apply_overrides(&cfg, &["sim.dt=0.01".into(), "sim.dt=0.02".into()]).unwrap();
        assert_eq!(out.sim.dt, 0.02);
        let out = apply_overrides(&cfg, &["objects.0.base_pose.pos=[0,0,0.5]".into()]).unwrap();
        assert_eq!(out.objects[0].base_pose.pos.z, 0.5);
        assert_eq!(cfg.objects[0].base_pose.pos.z, 0.0);
        assert_eq!(apply_overrides(&cfg, &[]).unwrap(), cfg);
    }

    #[test]
    fn override_errors() {
        let cfg = parse_scenario(MINIMAL).unwrap();
        assert!(matches!(
            apply_overrides(&cfg, &["sim.nope=1".into()]),
            Err(ConfigError::PathNotFound(_))
        ));
        assert!(matches!(
            apply_overrides(&cfg, &["objects.3.mass=1".into()]),
            Err(ConfigError::PathNotFound(_))
        ));
        assert!(matches!(
            apply_overrides(&cfg, &["sim.dt=fast".into()]),
            Err(ConfigError::TypeMismatch { .. })
        ));
        assert!(matches!(
            apply_overrides(&cfg, &["sim.dt=-1".into()]),
            Err(ConfigError::Invalid(_))
        ));
        let renamed = apply_overrides(&cfg, &["name=42".into()]).unwrap();
        assert_eq!(renamed.name, "42");
    }

    #[test]
    fn violations_are_sorted_and_located() {
        let mut cfg = parse_scenario(MINIMAL).unwrap();
        cfg.objects[0].material.roughness = 1.5;
        cfg.task.checker = SuccessChecker::PositionWithin {
            entity: "mug".into(),
            center: [0.0; 3],
            radius: 0.1,
        };
        let v = validate(&cfg);
        let paths: Vec<_> = v.iter().map(|v| v.path.as_str()).collect();
        assert_eq!(paths, ["objects.0.material.roughness", "task.checker"]);
    }

    #[test]
    fn nine_dof_default_pos_is_accepted() {
        let mut urdf = String::from(r#"<robot name="arm"><link name="l0"/>"#);
        for i in 1..=9 {
            let ty = if i <= 7 { "revolute" } else { "prismatic" };
            urdf.push_str(&format!(
                r#"<link name="l{i}"/><joint name="j{i}" type="{ty}"><parent link="l{}"/><child link="l{i}"/>
                   <axis xyz="0 0 1"/><limit lower="-1" upper="1"/></joint>"#,
                if i == 9 { 7 } else { i - 1 }
            ));
        }
        urdf.push_str("</robot>");
        let src = format!(
            "name: arm\nrobots:\n  - name: franka\n    asset:\n      urdf: {}\n    default_dof_pos: [0, 0, 0, 0, 0, 0, 0, 0.04, 0.04]\n    ee_frame: l7\n",
            serde_json::to_string(&urdf).unwrap()
        );
        let cfg = parse_scenario(&src).unwrap();
        assert_eq!(cfg.robots[0].default_dof_pos.len(), 9);
        let short = src.replace("0.04, 0.04]", "0.04]");
        assert!(matches!(
            parse_scenario(&short),
            Err(ConfigError::Invalid(_))
        ));
    }
}

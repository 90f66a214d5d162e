use std::path::PathBuf;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::assets::CanonicalAsset;
use crate::math::Pose;

/// Simulator-agnostic description of one scenario: who acts, what is in the
/// scene, what counts as success, and the physics parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub robots: Vec<RobotConfig>,
    #[serde(default)]
    pub objects: Vec<ObjectConfig>,
    #[serde(default)]
    pub cameras: Vec<CameraConfig>,
    #[serde(default)]
    pub lights: Vec<LightConfig>,
    #[serde(default)]
    pub scene: SceneDecor,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub sim: SimParams,
    /// Opaque per-backend settings, preserved verbatim.
    #[serde(default)]
    pub backend_extras: IndexMap<String, serde_json::Map<String, serde_json::Value>>,
    /// Directory relative asset paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub name: String,
    pub asset: AssetRef,
    #[serde(default)]
    pub base_pose: Pose,
    #[serde(default)]
    pub default_dof_pos: Vec<f64>,
    pub ee_frame: String,
    #[serde(default)]
    pub gripper_joints: Vec<String>,
    /// Distance from the end-effector origin within which a closing gripper
    /// picks up a free body.
    #[serde(default = "default_grasp_radius")]
    pub grasp_radius: f64,
}

fn default_grasp_radius() -> f64 {
    0.04
}

/// Where a kinematic description comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AssetRef {
    /// URDF (`.urdf`) or MJCF (`.xml`, `.mjcf`) file, relative to the scenario directory.
    Path(String),
    /// URDF document embedded as text.
    Urdf(String),
    /// MJCF document embedded as text.
    Mjcf(String),
    Inline(Box<CanonicalAsset>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub name: String,
    pub kind: ObjectKind,
    #[serde(default)]
    pub base_pose: Pose,
    /// kg; zero marks a static object.
    #[serde(default)]
    pub mass: f64,
    #[serde(default = "default_restitution")]
    pub restitution: f64,
    #[serde(default)]
    pub material: MaterialParams,
    /// Static visual-only markers set this to false.
    #[serde(default = "default_true")]
    pub collision: bool,
    #[serde(default)]
    pub init_lin_vel: [f64; 3],
    #[serde(default)]
    pub init_ang_vel: [f64; 3],
    /// Initial joint coordinates of an articulated object; empty means zeros.
    #[serde(default)]
    pub default_dof_pos: Vec<f64>,
}

fn default_restitution() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum ObjectKind {
    /// `dims`: sphere `[radius]`, box `[x, y, z]` full extents, plane `[x, y]` extents.
    Primitive {
        shape: PrimitiveShape,
        dims: Vec<f64>,
    },
    Articulated {
        asset: AssetRef,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveShape {
    Sphere,
    Box,
    Plane,
}

impl PrimitiveShape {
    pub fn dims_len(self) -> usize {
        match self {
            PrimitiveShape::Sphere => 1,
            PrimitiveShape::Box => 3,
            PrimitiveShape::Plane => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    #[serde(default = "default_episode_length")]
    pub episode_length: u32,
    #[serde(default)]
    pub checker: SuccessChecker,
    #[serde(default)]
    pub instruction: String,
    #[serde(default)]
    pub subtasks: Vec<SubtaskSpec>,
    /// Level-0 task-space ranges for object initial positions.
    #[serde(default)]
    pub spawn_regions: Vec<SpawnRegion>,
}

fn default_episode_length() -> u32 {
    250
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            episode_length: default_episode_length(),
            checker: SuccessChecker::default(),
            instruction: String::new(),
            subtasks: Vec::new(),
            spawn_regions: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnRegion {
    pub entity: String,
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    /// Half-range of a uniform yaw perturbation, radians.
    #[serde(default)]
    pub yaw: f64,
}

/// One annotated step of a task: which object the motion is relative to and
/// when the step is over.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubtaskSpec {
    pub name: String,
    pub anchor: String,
    pub end: SuccessChecker,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

/// Composable success predicate over a scene state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum SuccessChecker {
    /// Never succeeds on its own; the default for tasks without a goal.
    #[default]
    Never,
    PositionWithin {
        entity: String,
        center: [f64; 3],
        radius: f64,
    },
    PositionShift {
        entity: String,
        axis: [f64; 3],
        min_shift: f64,
    },
    JointPosThreshold {
        entity: String,
        joint: String,
        threshold: f64,
        direction: Direction,
    },
    RelativePose {
        entity_a: String,
        entity_b: String,
        max_pos_err: f64,
        max_rot_err: f64,
        target_rel: Pose,
    },
    All {
        of: Vec<SuccessChecker>,
    },
    Any {
        of: Vec<SuccessChecker>,
    },
}

impl SuccessChecker {
    /// Every entity name the checker tree refers to.
    pub fn entities(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_entities(&mut out);
        out
    }

    fn collect_entities<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            SuccessChecker::Never => {}
            SuccessChecker::PositionWithin { entity, .. }
            | SuccessChecker::PositionShift { entity, .. }
            | SuccessChecker::JointPosThreshold { entity, .. } => out.push(entity),
            SuccessChecker::RelativePose {
                entity_a, entity_b, ..
            } => {
                out.push(entity_a);
                out.push(entity_b);
            }
            SuccessChecker::All { of } | SuccessChecker::Any { of } => {
                for c in of {
                    c.collect_entities(out);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    /// Seconds per physics substep.
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Physics substeps per environment step.
    #[serde(default = "default_decimation")]
    pub decimation: u32,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default = "default_solver_iterations")]
    pub solver_iterations: u32,
    /// Time constant of first-order joint tracking on the dynamic backend, seconds.
    #[serde(default = "default_joint_time_constant")]
    pub joint_time_constant: f64,
}

fn default_dt() -> f64 {
    1.0 / 60.0
}
fn default_decimation() -> u32 {
    1
}
fn default_gravity() -> [f64; 3] {
    [0.0, 0.0, -9.81]
}
fn default_solver_iterations() -> u32 {
    8
}
fn default_joint_time_constant() -> f64 {
    0.05
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            decimation: default_decimation(),
            gravity: default_gravity(),
            solver_iterations: default_solver_iterations(),
            joint_time_constant: default_joint_time_constant(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub name: String,
    /// Optical convention: local +z looks forward, +x right, +y down.
    #[serde(default)]
    pub pose: Pose,
    #[serde(default = "default_fov")]
    pub vertical_fov: f64,
    #[serde(default = "default_image_side")]
    pub width: u32,
    #[serde(default = "default_image_side")]
    pub height: u32,
}

fn default_fov() -> f64 {
    60.0
}
fn default_image_side() -> u32 {
    256
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConfig {
    pub kind: LightKind,
    #[serde(default = "default_intensity")]
    pub intensity: f64,
    /// Kelvin.
    #[serde(default = "default_color_temperature")]
    pub color_temperature: f64,
}

fn default_intensity() -> f64 {
    1.0
}
fn default_color_temperature() -> f64 {
    6500.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", deny_unknown_fields)]
pub enum LightKind {
    /// Angles in degrees; polar is measured from the zenith.
    Distant { polar: f64, azimuth: f64 },
    CylinderArray {
        rows: u32,
        cols: u32,
        size: f64,
        height: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Pool identifier, when the material was drawn from a randomization pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default = "default_roughness")]
    pub roughness: f64,
    #[serde(default = "default_specular")]
    pub specular: f64,
    #[serde(default)]
    pub metallic: f64,
    #[serde(default = "default_base_color")]
    pub base_color: [f64; 3],
}

fn default_roughness() -> f64 {
    0.5
}
fn default_specular() -> f64 {
    0.5
}
fn default_base_color() -> [f64; 3] {
    [0.7, 0.7, 0.7]
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            id: None,
            roughness: default_roughness(),
            specular: default_specular(),
            metallic: 0.0,
            base_color: default_base_color(),
        }
    }
}

impl MaterialParams {
    pub fn with_color(r: f64, g: f64, b: f64) -> Self {
        Self {
            base_color: [r, g, b],
            ..Self::default()
        }
    }
}

/// Surrounding-scene dressing touched by scene-level randomization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDecor {
    #[serde(default = "default_layout")]
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_material: Option<MaterialParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_material: Option<MaterialParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_material: Option<MaterialParams>,
}

fn default_layout() -> String {
    "open_floor".to_string()
}

impl Default for SceneDecor {
    fn default() -> Self {
        Self {
            layout: default_layout(),
            table_material: None,
            wall_material: None,
            ground_material: None,
        }
    }
}

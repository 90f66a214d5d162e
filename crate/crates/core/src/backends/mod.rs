//! The handler contract and its two implementations: `dyn` (impulse-based
//! rigid-body dynamics) and `kin` (kinematic replay).

mod contact;
mod dynamics;
mod kin;
mod kinematics;
mod render;
mod world;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub use dynamics::DynHandler;
pub use kin::KinHandler;
pub use kinematics::{forward_kinematics, KinematicModel};

use crate::assets::{AssetError, CanonicalAsset};
use crate::config::{CameraConfig, ScenarioConfig, Violation};
use crate::math::Vec3;
use crate::state::{SceneState, StateError, StateQuery};

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("scenario is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidConfig(Vec<Violation>),
    #[error(transparent)]
    Asset(#[from] AssetError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("expected {expected} joint coordinates, got {got}")]
    DofLength { expected: usize, got: usize },
    #[error("non-finite {field} on `{entity}`; step aborted")]
    NonFinite { entity: String, field: &'static str },
    #[error("degenerate camera: {0}")]
    DegenerateCamera(String),
    #[error("operation requires the dyn backend")]
    NotDynamic,
    #[error("no environment {0}")]
    NoSuchEnv(usize),
    #[error("launch failed: {0}")]
    Launch(String),
    #[error("unknown backend `{0}`; expected dyn or kin")]
    UnknownBackend(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BackendKind {
    Dyn,
    Kin,
}

impl FromStr for BackendKind {
    type Err = BackendError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dyn" => Ok(Self::Dyn),
            "kin" => Ok(Self::Kin),
            other => Err(BackendError::UnknownBackend(other.to_string())),
        }
    }
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Dyn => "dyn",
            Self::Kin => "kin",
        })
    }
}

/// Total linear momentum, angular momentum about the world origin and
/// kinetic energy of all dynamic rigid bodies.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MomentumSample {
    pub linear: Vec3,
    pub angular: Vec3,
    pub kinetic: f64,
}

/// 8-bit RGB raster, row-major from the top-left pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity((width * height * 3) as usize);
        for _ in 0..width * height {
            data.extend_from_slice(&fill);
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, c: [u8; 3]) {
        let i = ((y * self.width + x) * 3) as usize;
        self.data[i..i + 3].copy_from_slice(&c);
    }

    pub fn count(&self, c: [u8; 3]) -> usize {
        self.data.chunks_exact(3).filter(|p| *p == c).count()
    }

    /// Binary PPM (P6).
    pub fn write_ppm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.data)
    }
}

/// A simulator backend. A handler is owned by one thread at a time; batched
/// environments are stepped in parallel internally.
pub trait Handler: Send {
    fn kind(&self) -> BackendKind;
    fn config(&self) -> &ScenarioConfig;
    fn num_envs(&self) -> usize;
    fn get_states(&self, q: &StateQuery) -> Result<SceneState, BackendError>;
    /// Teleports the given fields; a one-env partial applies to every env.
    fn set_states(&mut self, partial: &SceneState) -> Result<(), BackendError>;
    /// Advances `n` environment steps of `decimation` substeps each.
    fn step(&mut self, n: usize) -> Result<(), BackendError>;
    fn render(&self, camera: &CameraConfig, env: usize) -> Result<Image, BackendError>;
    /// Brings derived render data up to date after `set_states`.
    fn refresh(&mut self) -> Result<(), BackendError> {
        Ok(())
    }
    fn close(&mut self) {}
    fn extra(&self) -> serde_json::Map<String, serde_json::Value>;
    /// Kinematic description of a robot or articulated object.
    fn asset(&self, entity: &str) -> Option<&CanonicalAsset>;
    /// Conserved-quantity totals; only the dynamic backend tracks them.
    fn momentum(&self, _env: usize) -> Option<MomentumSample> {
        None
    }
}

pub fn launch(
    cfg: &ScenarioConfig,
    num_envs: usize,
    kind: BackendKind,
) -> Result<Box<dyn Handler>, BackendError> {
    Ok(match kind {
        BackendKind::Dyn => Box::new(DynHandler::launch(cfg, num_envs)?),
        BackendKind::Kin => Box::new(KinHandler::launch(cfg, num_envs)?),
    })
}

/// Momentum and energy totals of env 0 before stepping and after each of
/// `steps` steps (`steps + 1` samples).
pub fn conservation_probe(
    h: &mut dyn Handler,
    steps: usize,
) -> Result<Vec<MomentumSample>, BackendError> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(h.momentum(0).ok_or(BackendError::NotDynamic)?);
    for _ in 0..steps {
        h.step(1)?;
        out.push(h.momentum(0).ok_or(BackendError::NotDynamic)?);
    }
    Ok(out)
}

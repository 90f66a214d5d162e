//! Robot and object descriptions: URDF and MJCF parsing into a canonical
//! kinematic tree, URDF export and MJCF to URDF conversion.

mod export;
mod inertia;
mod mesh;
mod mjcf;
mod model;
mod urdf;

use std::path::{Path, PathBuf};

pub use export::{export_urdf, export_urdf_with_warnings};
pub use inertia::{solid_box, solid_sphere};
pub use mesh::resolve_mesh_refs;
pub use mjcf::parse_mjcf;
pub use model::{
    structural_mismatch, Body, CanonicalAsset, Geom, GeomRole, GeomShape, Inertial, Joint,
    JointKind, Parsed,
};
pub use urdf::parse_urdf;

use crate::config::AssetRef;

#[derive(Debug, thiserror::Error)]
pub enum AssetError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("cyclic body graph: {0}")]
    CyclicBodyGraph(String),
    #[error("joint `{joint}` references missing link `{link}`")]
    MissingLinkReference { joint: String, link: String },
    #[error("multiple root bodies: {0:?}")]
    MultipleRoots(Vec<String>),
    #[error("unsupported joint kind: {0}")]
    UnsupportedJointKind(String),
    #[error("inconsistent default class reference: {0}")]
    InconsistentDefaultClass(String),
    #[error("unrepresentable in URDF: {0}")]
    UnrepresentableInUrdf(String),
    #[error("invalid `{attr}` on <{element}>: {value}")]
    InvalidAttribute {
        element: String,
        attr: String,
        value: String,
    },
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("invalid asset: {0}")]
    InvalidAsset(String),
    #[error("asset not found: {}", .0.display())]
    AssetNotFound(PathBuf),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown asset format for {}", .0.display())]
    UnknownFormat(PathBuf),
}

/// Whitespace-separated floats.
pub(crate) fn floats(s: &str) -> Result<Vec<f64>, std::num::ParseFloatError> {
    s.split_whitespace().map(str::parse).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssetFormat {
    Urdf,
    Mjcf,
}

impl AssetFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "urdf" => Some(Self::Urdf),
            "xml" | "mjcf" => Some(Self::Mjcf),
            _ => None,
        }
    }
}

pub fn parse_text(text: &str, format: AssetFormat) -> Result<Parsed, AssetError> {
    match format {
        AssetFormat::Urdf => parse_urdf(text),
        AssetFormat::Mjcf => parse_mjcf(text),
    }
}

pub fn load_file(path: &Path) -> Result<Parsed, AssetError> {
    let format = AssetFormat::from_path(path)
        .ok_or_else(|| AssetError::UnknownFormat(path.to_path_buf()))?;
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AssetError::AssetNotFound(path.to_path_buf())
        } else {
            AssetError::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    parse_text(&text, format)
}

/// Resolves a scenario asset reference; relative paths are taken from `base_dir`.
pub fn load_ref(r: &AssetRef, base_dir: Option<&Path>) -> Result<Parsed, AssetError> {
    match r {
        AssetRef::Path(p) => {
            let p = Path::new(p);
            let full = match base_dir {
                Some(b) if p.is_relative() => b.join(p),
                _ => p.to_path_buf(),
            };
            load_file(&full)
        }
        AssetRef::Urdf(text) => parse_urdf(text),
        AssetRef::Mjcf(text) => parse_mjcf(text),
        AssetRef::Inline(a) => {
            a.validate()?;
            Ok(Parsed {
                asset: (**a).clone(),
                warnings: Vec::new(),
            })
        }
    }
}

/// MJCF text to URDF text, with parse and export warnings combined.
pub fn convert_mjcf_to_urdf(text: &str) -> Result<(String, Vec<String>), AssetError> {
    let Parsed {
        asset,
        mut warnings,
    } = parse_mjcf(text)?;
    let (urdf, more) = export::export_urdf_with_warnings(&asset)?;
    warnings.extend(more);
    Ok((urdf, warnings))
}

use std::path::{Path, PathBuf};

use super::model::{CanonicalAsset, GeomShape};

const NATIVE: &[&str] = &["obj", "stl", "dae"];
const TEXTURED: &str = "textured.obj";

/// Rewrites mesh references to UV-mapped `.obj` files that already sit next
/// to the referenced mesh.
///
/// For each reference, in `search_dirs` order (or the file's own directory
/// for absolute paths): a same-stem `.obj` wins, then `textured.obj`.
/// References that cannot be matched are kept and produce a warning about
/// possible texture misalignment. Existing `.obj`/`.stl`/`.dae` files are
/// left alone.
pub fn resolve_mesh_refs(
    asset: &CanonicalAsset,
    search_dirs: &[PathBuf],
) -> (CanonicalAsset, Vec<String>) {
    let mut out = asset.clone();
    let mut warnings = Vec::new();
    for body in &mut out.bodies {
        for geom in &mut body.geoms {
            let GeomShape::Mesh { path, .. } = &mut geom.shape else {
                continue;
            };
            match resolve_one(path, search_dirs) {
                Resolution::Keep => {}
                Resolution::Rewrite(p) => *path = p,
                Resolution::Warn(w) => warnings.push(format!("link `{}`: {w}", body.name)),
            }
        }
    }
    (out, warnings)
}

enum Resolution {
    Keep,
    Rewrite(String),
    Warn(String),
}

fn resolve_one(reference: &str, search_dirs: &[PathBuf]) -> Resolution {
    let rel = Path::new(reference);
    let candidates: Vec<PathBuf> = if rel.is_absolute() {
        vec![rel.to_path_buf()]
    } else {
        search_dirs.iter().map(|d| d.join(rel)).collect()
    };
    let ext = rel
        .extension()
        .map(|e| e.to_string_lossy().to_ascii_lowercase())
        .unwrap_or_default();
    let stem = rel
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let native = NATIVE.contains(&ext.as_str());

    for full in &candidates {
        if native && full.is_file() {
            return Resolution::Keep;
        }
        let Some(dir) = full.parent() else { continue };
        for name in [format!("{stem}.obj"), TEXTURED.to_string()] {
            if dir.join(&name).is_file() {
                if name
                    == rel
                        .file_name()
                        .map(|f| f.to_string_lossy().into_owned())
                        .unwrap_or_default()
                {
                    return Resolution::Keep;
                }
                return Resolution::Rewrite(
                    rel.with_file_name(&name).to_string_lossy().into_owned(),
                );
            }
        }
    }
    if native {
        Resolution::Warn(format!(
            "mesh `{reference}` not found in any search directory"
        ))
    } else {
        Resolution::Warn(format!(
            "mesh `{reference}` has no UV-mapped .obj sibling; converted textures may be misaligned"
        ))
    }
}

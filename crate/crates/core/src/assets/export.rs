use std::fmt::Write;

use super::model::{CanonicalAsset, GeomRole, GeomShape, JointKind};
use super::AssetError;
use crate::math::{quat_to_rpy, Pose};

/// Thickness of the box that stands in for a plane, which URDF cannot express.
const PLANE_THICKNESS: f64 = 0.001;
/// Side length used for unbounded planes.
const UNBOUNDED_PLANE_SIZE: f64 = 100.0;

/// Emits URDF text that re-parses into a structurally identical asset.
pub fn export_urdf(asset: &CanonicalAsset) -> Result<String, AssetError> {
    export_urdf_with_warnings(asset).map(|(text, _)| text)
}

/// URDF text plus notes about anything the format cannot express.
pub fn export_urdf_with_warnings(
    asset: &CanonicalAsset,
) -> Result<(String, Vec<String>), AssetError> {
    asset.validate()?;
    let root = asset.root().name.clone();
    for j in &asset.joints {
        if j.kind == JointKind::Free && j.parent_body != root {
            return Err(AssetError::UnrepresentableInUrdf(format!(
                "free joint `{}` attaches `{}` below the root",
                j.name, j.child_body
            )));
        }
    }
    let mut warnings = Vec::new();
    let mut out = String::new();
    writeln!(out, r#"<?xml version="1.0"?>"#).unwrap();
    writeln!(out, r#"<robot name="{}">"#, esc(&asset.name)).unwrap();
    for body in &asset.bodies {
        writeln!(out, r#"  <link name="{}">"#, esc(&body.name)).unwrap();
        let i = &body.inertial;
        let empty = i.mass == 0.0
            && i.diag_inertia == nalgebra::Vector3::zeros()
            && i.origin == Pose::identity();
        if !empty {
            writeln!(out, "    <inertial>").unwrap();
            writeln!(out, "      {}", origin(&i.origin)).unwrap();
            writeln!(out, r#"      <mass value="{}"/>"#, i.mass).unwrap();
            writeln!(
                out,
                r#"      <inertia ixx="{}" ixy="0" ixz="0" iyy="{}" iyz="0" izz="{}"/>"#,
                i.diag_inertia.x, i.diag_inertia.y, i.diag_inertia.z
            )
            .unwrap();
            writeln!(out, "    </inertial>").unwrap();
        }
        for (gi, g) in body.geoms.iter().enumerate() {
            let tag = match g.role {
                GeomRole::Visual => "visual",
                GeomRole::Collision => "collision",
            };
            let geometry = match &g.shape {
                GeomShape::Sphere { radius } => format!(r#"<sphere radius="{radius}"/>"#),
                GeomShape::Box { size } => {
                    format!(r#"<box size="{} {} {}"/>"#, size[0], size[1], size[2])
                }
                GeomShape::Plane { size } => {
                    warnings.push(format!(
                        "link `{}`: plane exported as a {PLANE_THICKNESS} m thick box",
                        body.name
                    ));
                    let side = |s: f64| if s > 0.0 { s } else { UNBOUNDED_PLANE_SIZE };
                    format!(
                        r#"<box size="{} {} {PLANE_THICKNESS}"/>"#,
                        side(size[0]),
                        side(size[1])
                    )
                }
                GeomShape::Mesh { path, scale } => {
                    if *scale == [1.0, 1.0, 1.0] {
                        format!(r#"<mesh filename="{}"/>"#, esc(path))
                    } else {
                        format!(
                            r#"<mesh filename="{}" scale="{} {} {}"/>"#,
                            esc(path),
                            scale[0],
                            scale[1],
                            scale[2]
                        )
                    }
                }
            };
            let mut pose = g.pose_in_body;
            if matches!(g.shape, GeomShape::Plane { .. }) {
                pose = pose.compose(&Pose::from_translation(0.0, 0.0, -PLANE_THICKNESS / 2.0));
            }
            writeln!(out, "    <{tag}>").unwrap();
            writeln!(out, "      {}", origin(&pose)).unwrap();
            writeln!(out, "      <geometry>{geometry}</geometry>").unwrap();
            let c = g.material.base_color;
            let mat_name = g
                .material
                .id
                .clone()
                .unwrap_or_else(|| format!("{}_{tag}{gi}", body.name));
            writeln!(
                out,
                r#"      <material name="{}"><color rgba="{} {} {} 1"/></material>"#,
                esc(&mat_name),
                c[0],
                c[1],
                c[2]
            )
            .unwrap();
            writeln!(out, "    </{tag}>").unwrap();
        }
        writeln!(out, "  </link>").unwrap();
    }
    for j in &asset.joints {
        let ty = match j.kind {
            JointKind::Fixed => "fixed",
            JointKind::Free => "floating",
            JointKind::Revolute if j.limits == [f64::NEG_INFINITY, f64::INFINITY] => "continuous",
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
        };
        writeln!(out, r#"  <joint name="{}" type="{ty}">"#, esc(&j.name)).unwrap();
        writeln!(out, r#"    <parent link="{}"/>"#, esc(&j.parent_body)).unwrap();
        writeln!(out, r#"    <child link="{}"/>"#, esc(&j.child_body)).unwrap();
        writeln!(out, "    {}", origin(&j.origin)).unwrap();
        writeln!(
            out,
            r#"    <axis xyz="{} {} {}"/>"#,
            j.axis.x, j.axis.y, j.axis.z
        )
        .unwrap();
        if ty == "revolute" || ty == "prismatic" {
            writeln!(
                out,
                r#"    <limit lower="{}" upper="{}" effort="0" velocity="0"/>"#,
                j.limits[0], j.limits[1]
            )
            .unwrap();
        }
        writeln!(out, "  </joint>").unwrap();
    }
    writeln!(out, "</robot>").unwrap();
    Ok((out, warnings))
}

fn origin(p: &Pose) -> String {
    let (r, pi, y) = quat_to_rpy(&p.rot);
    format!(
        r#"<origin xyz="{} {} {}" rpy="{} {} {}"/>"#,
        p.pos.x, p.pos.y, p.pos.z, r, pi, y
    )
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{parse_mjcf, parse_urdf, structural_mismatch};

    #[test]
    fn one_body_round_trips() {
        let a = parse_urdf(r#"<robot name="r"><link name="base"/></robot>"#)
            .unwrap()
            .asset;
        let text = export_urdf(&a).unwrap();
        let b = parse_urdf(&text).unwrap().asset;
        assert_eq!(a, b);
    }

    #[test]
    fn internal_free_joint_is_unrepresentable() {
        let a = parse_mjcf(
            r#"<mujoco><worldbody><body name="a"><joint/>
                 <body name="b"><freejoint/></body></body></worldbody></mujoco>"#,
        )
        .unwrap()
        .asset;
        assert!(matches!(
            export_urdf(&a),
            Err(AssetError::UnrepresentableInUrdf(_))
        ));
    }

    #[test]
    fn top_level_free_joint_becomes_floating() {
        let a = parse_mjcf(
            r#"<mujoco><worldbody><body name="a" pos="0 0 1"><freejoint name="f"/>
               <inertial mass="2" diaginertia="0.1 0.2 0.3" quat="0.7071067811865476 0 0.7071067811865476 0"/>
               </body></worldbody></mujoco>"#,
        )
        .unwrap()
        .asset;
        let text = export_urdf(&a).unwrap();
        assert!(text.contains(r#"type="floating""#));
        let b = parse_urdf(&text).unwrap().asset;
        assert_eq!(structural_mismatch(&a, &b, 1e-9), None);
    }
}

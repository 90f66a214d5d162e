use std::collections::BTreeMap;

use roxmltree::{Document, Node};

use super::inertia::{diagonalize, tensor};
use super::model::{
    Body, CanonicalAsset, Geom, GeomRole, GeomShape, Inertial, Joint, JointKind, Parsed,
};
use super::{floats, AssetError};
use crate::config::MaterialParams;
use crate::math::{quat_from_rpy, Pose, Vec3};

/// Parses a URDF 1.0 document. Fixed joints are kept as bodies of their own;
/// `transmission` and `gazebo` blocks are skipped with a warning.
pub fn parse_urdf(text: &str) -> Result<Parsed, AssetError> {
    let doc = Document::parse(text).map_err(|e| AssetError::Xml(e.to_string()))?;
    let robot = doc.root_element();
    if robot.tag_name().name() != "robot" {
        return Err(AssetError::Xml(format!(
            "expected <robot> root element, found <{}>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("robot").to_string();
    let mut warnings = Vec::new();

    let mut materials: BTreeMap<String, [f64; 4]> = BTreeMap::new();
    for m in robot.children().filter(|n| n.has_tag_name("material")) {
        if let (Some(n), Some(rgba)) = (m.attribute("name"), color_of(&m)?) {
            materials.insert(n.to_string(), rgba);
        }
    }

    let mut bodies = Vec::new();
    let mut joints = Vec::new();
    for node in robot.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "link" => bodies.push(parse_link(&node, &materials, &mut warnings)?),
            "joint" => joints.push(parse_joint(&node, &mut warnings)?),
            "material" => {}
            other @ ("transmission" | "gazebo") => {
                warnings.push(format!("ignored unsupported URDF element <{other}>"));
            }
            other => warnings.push(format!("ignored unknown URDF element <{other}>")),
        }
    }
    let asset = CanonicalAsset::assemble(name, bodies, joints)?;
    Ok(Parsed { asset, warnings })
}

fn attr_floats(node: &Node, attr: &str, n: usize) -> Result<Option<Vec<f64>>, AssetError> {
    match node.attribute(attr) {
        None => Ok(None),
        Some(s) => {
            let v = floats(s).map_err(|_| invalid(node, attr, s))?;
            if v.len() != n {
                return Err(invalid(node, attr, s));
            }
            Ok(Some(v))
        }
    }
}

fn invalid(node: &Node, attr: &str, value: &str) -> AssetError {
    AssetError::InvalidAttribute {
        element: node.tag_name().name().to_string(),
        attr: attr.to_string(),
        value: value.to_string(),
    }
}

fn required<'a>(node: &Node<'a, '_>, attr: &str) -> Result<&'a str, AssetError> {
    node.attribute(attr)
        .ok_or_else(|| AssetError::InvalidAttribute {
            element: node.tag_name().name().to_string(),
            attr: attr.to_string(),
            value: "<missing>".into(),
        })
}

fn scalar(node: &Node, attr: &str) -> Result<Option<f64>, AssetError> {
    Ok(attr_floats(node, attr, 1)?.map(|v| v[0]))
}

fn origin_of(parent: &Node) -> Result<Pose, AssetError> {
    let Some(o) = parent.children().find(|n| n.has_tag_name("origin")) else {
        return Ok(Pose::identity());
    };
    let xyz = attr_floats(&o, "xyz", 3)?.unwrap_or_else(|| vec![0.0; 3]);
    let rpy = attr_floats(&o, "rpy", 3)?.unwrap_or_else(|| vec![0.0; 3]);
    Ok(Pose::new(
        Vec3::new(xyz[0], xyz[1], xyz[2]),
        quat_from_rpy(rpy[0], rpy[1], rpy[2]),
    ))
}

fn color_of(material: &Node) -> Result<Option<[f64; 4]>, AssetError> {
    match material.children().find(|n| n.has_tag_name("color")) {
        None => Ok(None),
        Some(c) => {
            let v = attr_floats(&c, "rgba", 4)?.unwrap_or_else(|| vec![1.0; 4]);
            Ok(Some([v[0], v[1], v[2], v[3]]))
        }
    }
}

fn parse_link(
    node: &Node,
    materials: &BTreeMap<String, [f64; 4]>,
    warnings: &mut Vec<String>,
) -> Result<Body, AssetError> {
    let name = required(node, "name")?.to_string();
    let mut inertial = Inertial::default();
    if let Some(inode) = node.children().find(|n| n.has_tag_name("inertial")) {
        let origin = origin_of(&inode)?;
        let mass = match inode.children().find(|n| n.has_tag_name("mass")) {
            Some(m) => scalar(&m, "value")?.unwrap_or(0.0),
            None => 0.0,
        };
        let (diag, axes) = match inode.children().find(|n| n.has_tag_name("inertia")) {
            Some(i) => {
                let g = |a: &str| -> Result<f64, AssetError> { Ok(scalar(&i, a)?.unwrap_or(0.0)) };
                let t = tensor(
                    g("ixx")?,
                    g("iyy")?,
                    g("izz")?,
                    g("ixy")?,
                    g("ixz")?,
                    g("iyz")?,
                );
                diagonalize(&t, origin.rot)
            }
            None => (Vec3::zeros(), origin.rot),
        };
        inertial = Inertial {
            mass,
            origin: Pose::new(origin.pos, axes),
            diag_inertia: diag,
        };
    }
    let mut geoms = Vec::new();
    for g in node.children().filter(|n| n.is_element()) {
        let role = match g.tag_name().name() {
            "visual" => GeomRole::Visual,
            "collision" => GeomRole::Collision,
            "inertial" => continue,
            other => {
                warnings.push(format!("link `{name}`: ignored <{other}>"));
                continue;
            }
        };
        let pose = origin_of(&g)?;
        let Some(geometry) = g.children().find(|n| n.has_tag_name("geometry")) else {
            warnings.push(format!(
                "link `{name}`: <{}> without geometry",
                g.tag_name().name()
            ));
            continue;
        };
        let Some(shape_node) = geometry.children().find(|n| n.is_element()) else {
            continue;
        };
        let shape = match shape_node.tag_name().name() {
            "box" => {
                let s = attr_floats(&shape_node, "size", 3)?
                    .ok_or_else(|| invalid(&shape_node, "size", ""))?;
                GeomShape::Box {
                    size: [s[0], s[1], s[2]],
                }
            }
            "sphere" => GeomShape::Sphere {
                radius: scalar(&shape_node, "radius")?
                    .ok_or_else(|| invalid(&shape_node, "radius", ""))?,
            },
            "mesh" => {
                let path = required(&shape_node, "filename")?.to_string();
                let s = attr_floats(&shape_node, "scale", 3)?.unwrap_or_else(|| vec![1.0; 3]);
                GeomShape::Mesh {
                    path,
                    scale: [s[0], s[1], s[2]],
                }
            }
            other => {
                warnings.push(format!(
                    "link `{name}`: unsupported geometry <{other}> skipped"
                ));
                continue;
            }
        };
        let mut material = MaterialParams::default();
        if let Some(m) = g.children().find(|n| n.has_tag_name("material")) {
            let rgba = match color_of(&m)? {
                Some(c) => Some(c),
                None => m.attribute("name").and_then(|n| materials.get(n).copied()),
            };
            if let Some(c) = rgba {
                material.base_color = [c[0], c[1], c[2]];
            }
            if let Some(n) = m.attribute("name") {
                material.id = Some(n.to_string());
            }
        }
        geoms.push(Geom {
            shape,
            pose_in_body: pose,
            material,
            role,
        });
    }
    Ok(Body {
        name,
        parent: None,
        pose_in_parent: Pose::identity(),
        inertial,
        geoms,
    })
}

fn parse_joint(node: &Node, warnings: &mut Vec<String>) -> Result<Joint, AssetError> {
    let name = required(node, "name")?.to_string();
    let ty = required(node, "type")?;
    let kind = match ty {
        "fixed" => JointKind::Fixed,
        "revolute" | "continuous" => JointKind::Revolute,
        "prismatic" => JointKind::Prismatic,
        "floating" => JointKind::Free,
        other => {
            return Err(AssetError::UnsupportedJointKind(format!(
                "{other} (joint `{name}`)"
            )))
        }
    };
    let link_attr = |tag: &str| -> Result<String, AssetError> {
        let n = node
            .children()
            .find(|n| n.has_tag_name(tag))
            .ok_or_else(|| AssetError::InvalidAttribute {
                element: "joint".into(),
                attr: tag.into(),
                value: format!("<missing> in joint `{name}`"),
            })?;
        Ok(required(&n, "link")?.to_string())
    };
    let parent_body = link_attr("parent")?;
    let child_body = link_attr("child")?;
    let origin = origin_of(node)?;
    let mut axis = match node.children().find(|n| n.has_tag_name("axis")) {
        Some(a) => {
            let v = attr_floats(&a, "xyz", 3)?.unwrap_or_else(|| vec![1.0, 0.0, 0.0]);
            Vec3::new(v[0], v[1], v[2])
        }
        None => Vec3::x(),
    };
    if kind.is_actuated() {
        let n = axis.norm();
        if n < 1e-12 {
            return Err(AssetError::InvalidAttribute {
                element: "axis".into(),
                attr: "xyz".into(),
                value: format!("zero axis in joint `{name}`"),
            });
        }
        if (n - 1.0).abs() >= 1e-9 {
            warnings.push(format!("joint `{name}`: axis normalized"));
            axis /= n;
        }
    }
    let limits = match (kind, ty) {
        (_, "continuous") => [f64::NEG_INFINITY, f64::INFINITY],
        (JointKind::Revolute | JointKind::Prismatic, _) => {
            match node.children().find(|n| n.has_tag_name("limit")) {
                Some(l) => [
                    scalar(&l, "lower")?.unwrap_or(0.0),
                    scalar(&l, "upper")?.unwrap_or(0.0),
                ],
                None => {
                    warnings.push(format!("joint `{name}`: no <limit>, treated as unlimited"));
                    [f64::NEG_INFINITY, f64::INFINITY]
                }
            }
        }
        _ => [0.0, 0.0],
    };
    if limits[0] > limits[1] {
        return Err(AssetError::InvalidAsset(format!(
            "joint `{name}` has lower > upper"
        )));
    }
    Ok(Joint {
        name,
        kind,
        parent_body,
        child_body,
        axis,
        limits,
        origin,
    })
}

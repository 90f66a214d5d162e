use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use nalgebra::{Matrix3, Unit, UnitQuaternion};
use roxmltree::{Document, Node};

use super::inertia::{diagonalize, solid_box, solid_sphere, tensor};
use super::model::{
    Body, CanonicalAsset, Geom, GeomRole, GeomShape, Inertial, Joint, JointKind, Parsed,
};
use super::{floats, AssetError};
use crate::config::MaterialParams;
use crate::math::{quat_from_matrix, quat_normalized, Pose, Quat, Vec3};

const DEFAULT_DENSITY: f64 = 1000.0;
const JOINT_ATTRS: &[&str] = &["name", "type", "pos", "axis", "range", "limited", "class"];
const GEOM_ATTRS: &[&str] = &[
    "name",
    "type",
    "size",
    "pos",
    "quat",
    "euler",
    "axisangle",
    "xyaxes",
    "zaxis",
    "rgba",
    "material",
    "mesh",
    "contype",
    "conaffinity",
    "class",
    "mass",
    "density",
];

type Attrs = BTreeMap<String, String>;

#[derive(Default, Debug)]
struct DefaultClass {
    parent: Option<String>,
    joint: Attrs,
    geom: Attrs,
}

struct Compiler {
    degrees: bool,
    eulerseq: Vec<char>,
}

struct Ctx {
    compiler: Compiler,
    defaults: BTreeMap<String, DefaultClass>,
    meshes: BTreeMap<String, (String, [f64; 3])>,
    materials: BTreeMap<String, [f64; 4]>,
    warnings: Vec<String>,
    ignored_attrs: BTreeSet<String>,
    bodies: Vec<Body>,
    joints: Vec<Joint>,
    unnamed: usize,
}

/// Parses the supported MJCF subset: nested `<body>` trees with hinge, slide
/// and free joints, primitive and mesh geoms, `<default>` classes and the
/// `angle`/`eulerseq` compiler settings. The world body becomes the root
/// body `world`. Everything else is reported in the warning list.
pub fn parse_mjcf(text: &str) -> Result<Parsed, AssetError> {
    let doc = Document::parse(text).map_err(|e| AssetError::Xml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "mujoco" {
        return Err(AssetError::Xml(format!(
            "expected <mujoco> root element, found <{}>",
            root.tag_name().name()
        )));
    }
    let model = root.attribute("model").unwrap_or("mjcf_model").to_string();
    let mut ctx = Ctx {
        compiler: Compiler {
            degrees: true,
            eulerseq: vec!['x', 'y', 'z'],
        },
        defaults: BTreeMap::new(),
        meshes: BTreeMap::new(),
        materials: BTreeMap::new(),
        warnings: Vec::new(),
        ignored_attrs: BTreeSet::new(),
        bodies: Vec::new(),
        joints: Vec::new(),
        unnamed: 0,
    };
    ctx.defaults.insert("main".into(), DefaultClass::default());

    // Settings first: defaults and assets may appear after the worldbody.
    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "compiler" => parse_compiler(&node, &mut ctx)?,
            "default" => parse_default(&node, None, &mut ctx)?,
            "asset" => parse_assets(&node, &mut ctx)?,
            _ => {}
        }
    }
    let mut worldbodies = root.children().filter(|n| n.has_tag_name("worldbody"));
    let world = worldbodies
        .next()
        .ok_or_else(|| AssetError::Xml("missing <worldbody>".into()))?;
    if worldbodies.next().is_some() {
        return Err(AssetError::Xml("more than one <worldbody>".into()));
    }
    for node in root.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "compiler" | "default" | "asset" | "worldbody" => {}
            feature @ ("tendon" | "actuator" | "equality" | "sensor" | "contact" | "keyframe"
            | "include" | "extension" | "custom" | "deformable") => {
                ctx.warnings
                    .push(format!("unsupported MJCF feature <{feature}> ignored"));
            }
            other => ctx.warnings.push(format!("MJCF element <{other}> ignored")),
        }
    }

    let mut world_body = Body {
        name: "world".into(),
        parent: None,
        pose_in_parent: Pose::identity(),
        inertial: Inertial::default(),
        geoms: Vec::new(),
    };
    let mut children = Vec::new();
    for node in world.children().filter(|n| n.is_element()) {
        match node.tag_name().name() {
            "geom" => {
                if let Some(g) = parse_geom(&node, None, &Vec3::zeros(), &mut ctx)? {
                    world_body.geoms.push(g.0);
                }
            }
            "body" => children.push(node),
            other => ctx.warnings.push(format!("worldbody: <{other}> ignored")),
        }
    }
    ctx.bodies.push(world_body);
    for child in children {
        visit_body(&child, "world", None, &mut ctx)?;
    }
    for a in std::mem::take(&mut ctx.ignored_attrs) {
        ctx.warnings.push(format!("attribute {a} ignored"));
    }
    let asset = CanonicalAsset::assemble(model, ctx.bodies, ctx.joints)?;
    Ok(Parsed {
        asset,
        warnings: ctx.warnings,
    })
}

fn invalid(node: &Node, attr: &str, value: &str) -> AssetError {
    AssetError::InvalidAttribute {
        element: node.tag_name().name().to_string(),
        attr: attr.to_string(),
        value: value.to_string(),
    }
}

fn parse_compiler(node: &Node, ctx: &mut Ctx) -> Result<(), AssetError> {
    for a in node.attributes() {
        match a.name() {
            "angle" => {
                ctx.compiler.degrees = match a.value() {
                    "degree" => true,
                    "radian" => false,
                    v => return Err(invalid(node, "angle", v)),
                }
            }
            "eulerseq" => {
                let seq: Vec<char> = a.value().chars().collect();
                if seq.len() != 3 || !seq.iter().all(|c| "xyzXYZ".contains(*c)) {
                    return Err(invalid(node, "eulerseq", a.value()));
                }
                ctx.compiler.eulerseq = seq;
            }
            other => ctx.warnings.push(format!(
                "compiler attribute `{other}` not supported, ignored"
            )),
        }
    }
    Ok(())
}

fn parse_default(node: &Node, parent: Option<&str>, ctx: &mut Ctx) -> Result<(), AssetError> {
    let class = match (node.attribute("class"), parent) {
        (Some(c), _) => c.to_string(),
        (None, None) => "main".to_string(),
        (None, Some(_)) => {
            return Err(AssetError::InconsistentDefaultClass(
                "nested <default> without class".into(),
            ))
        }
    };
    let entry = ctx.defaults.entry(class.clone()).or_default();
    if class != "main" || parent.is_some() {
        entry.parent = Some(parent.unwrap_or("main").to_string());
    }
    for child in node.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "default" => parse_default(&child, Some(&class), ctx)?,
            kind @ ("joint" | "geom") => {
                let attrs: Attrs = child
                    .attributes()
                    .map(|a| (a.name().to_string(), a.value().to_string()))
                    .collect();
                let entry = ctx.defaults.get_mut(&class).expect("inserted above");
                let target = if kind == "joint" {
                    &mut entry.joint
                } else {
                    &mut entry.geom
                };
                target.extend(attrs);
            }
            other => {
                ctx.ignored_attrs.insert(format!("<default> <{other}>"));
            }
        }
    }
    Ok(())
}

fn parse_assets(node: &Node, ctx: &mut Ctx) -> Result<(), AssetError> {
    for child in node.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "mesh" => {
                let file = child
                    .attribute("file")
                    .ok_or_else(|| invalid(&child, "file", "<missing>"))?;
                let name = match child.attribute("name") {
                    Some(n) => n.to_string(),
                    None => Path::new(file)
                        .file_stem()
                        .map(|s| s.to_string_lossy().into_owned())
                        .unwrap_or_else(|| file.to_string()),
                };
                let scale = match child.attribute("scale") {
                    Some(s) => vec3(&child, "scale", s)?,
                    None => Vec3::new(1.0, 1.0, 1.0),
                };
                ctx.meshes
                    .insert(name, (file.to_string(), [scale.x, scale.y, scale.z]));
            }
            "material" => {
                if let (Some(n), Some(rgba)) = (child.attribute("name"), child.attribute("rgba")) {
                    let v = floats(rgba).map_err(|_| invalid(&child, "rgba", rgba))?;
                    if v.len() != 4 {
                        return Err(invalid(&child, "rgba", rgba));
                    }
                    ctx.materials
                        .insert(n.to_string(), [v[0], v[1], v[2], v[3]]);
                }
            }
            other => ctx.warnings.push(format!("asset <{other}> ignored")),
        }
    }
    Ok(())
}

fn vec3(node: &Node, attr: &str, s: &str) -> Result<Vec3, AssetError> {
    let v = floats(s).map_err(|_| invalid(node, attr, s))?;
    if v.len() != 3 {
        return Err(invalid(node, attr, s));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

/// Attributes of a `joint`/`geom` element after default-class inheritance.
fn resolve(
    node: &Node,
    kind: &str,
    childclass: Option<&str>,
    ctx: &Ctx,
) -> Result<Attrs, AssetError> {
    let class = node.attribute("class").or(childclass).unwrap_or("main");
    let mut chain = Vec::new();
    let mut cur = Some(class.to_string());
    while let Some(c) = cur {
        let d = ctx.defaults.get(&c).ok_or_else(|| {
            AssetError::InconsistentDefaultClass(format!("class `{c}` is not defined"))
        })?;
        if chain.contains(&c) {
            return Err(AssetError::InconsistentDefaultClass(format!(
                "class `{c}` inherits from itself"
            )));
        }
        chain.push(c.clone());
        cur = d.parent.clone();
    }
    let mut out = Attrs::new();
    for c in chain.iter().rev() {
        let d = &ctx.defaults[c];
        out.extend(if kind == "joint" {
            d.joint.clone()
        } else {
            d.geom.clone()
        });
    }
    out.remove("class");
    for a in node.attributes() {
        out.insert(a.name().to_string(), a.value().to_string());
    }
    Ok(out)
}

fn attr_vec(
    node: &Node,
    attrs: &Attrs,
    key: &str,
    n: usize,
) -> Result<Option<Vec<f64>>, AssetError> {
    match attrs.get(key) {
        None => Ok(None),
        Some(s) => {
            let v = floats(s).map_err(|_| invalid(node, key, s))?;
            if v.len() < n {
                return Err(invalid(node, key, s));
            }
            Ok(Some(v))
        }
    }
}

fn angle(ctx: &Ctx, v: f64) -> f64 {
    if ctx.compiler.degrees {
        v.to_radians()
    } else {
        v
    }
}

/// Orientation from whichever of quat/axisangle/euler/xyaxes/zaxis is present.
fn orientation(node: &Node, attrs: &Attrs, ctx: &Ctx) -> Result<Quat, AssetError> {
    if let Some(q) = attr_vec(node, attrs, "quat", 4)? {
        return quat_normalized(q[0], q[1], q[2], q[3])
            .ok_or_else(|| invalid(node, "quat", &attrs["quat"]));
    }
    if let Some(a) = attr_vec(node, attrs, "axisangle", 4)? {
        let axis = Vec3::new(a[0], a[1], a[2]);
        if axis.norm() < 1e-12 {
            return Err(invalid(node, "axisangle", &attrs["axisangle"]));
        }
        return Ok(UnitQuaternion::from_axis_angle(
            &Unit::new_normalize(axis),
            angle(ctx, a[3]),
        ));
    }
    if let Some(e) = attr_vec(node, attrs, "euler", 3)? {
        let mut q = Quat::identity();
        for (i, c) in ctx.compiler.eulerseq.iter().enumerate() {
            let axis = match c.to_ascii_lowercase() {
                'x' => Vec3::x_axis(),
                'y' => Vec3::y_axis(),
                _ => Vec3::z_axis(),
            };
            let r = UnitQuaternion::from_axis_angle(&axis, angle(ctx, e[i]));
            // Lowercase axes rotate with the frame, uppercase stay fixed.
            q = if c.is_ascii_lowercase() { q * r } else { r * q };
        }
        return Ok(q);
    }
    if let Some(v) = attr_vec(node, attrs, "xyaxes", 6)? {
        let x = Vec3::new(v[0], v[1], v[2]).normalize();
        let y0 = Vec3::new(v[3], v[4], v[5]);
        let y = (y0 - x * x.dot(&y0)).normalize();
        let z = x.cross(&y);
        return Ok(quat_from_matrix(&Matrix3::from_columns(&[x, y, z])));
    }
    if let Some(v) = attr_vec(node, attrs, "zaxis", 3)? {
        let z = Vec3::new(v[0], v[1], v[2]).normalize();
        return Ok(
            UnitQuaternion::rotation_between(&Vec3::z(), &z).unwrap_or_else(|| {
                UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
            }),
        );
    }
    Ok(Quat::identity())
}

fn node_attrs(node: &Node) -> Attrs {
    node.attributes()
        .map(|a| (a.name().to_string(), a.value().to_string()))
        .collect()
}

fn pose_of(node: &Node, attrs: &Attrs, ctx: &Ctx) -> Result<Pose, AssetError> {
    let pos = match attrs.get("pos") {
        Some(s) => vec3(node, "pos", s)?,
        None => Vec3::zeros(),
    };
    Ok(Pose::new(pos, orientation(node, attrs, ctx)?))
}

struct ParsedJoint {
    name: String,
    kind: JointKind,
    anchor: Vec3,
    axis: Vec3,
    limits: [f64; 2],
}

fn parse_joint(
    node: &Node,
    body: &str,
    index: usize,
    childclass: Option<&str>,
    ctx: &mut Ctx,
) -> Result<ParsedJoint, AssetError> {
    let name_default = format!("{body}_joint{index}");
    if node.has_tag_name("freejoint") {
        return Ok(ParsedJoint {
            name: node
                .attribute("name")
                .map(str::to_string)
                .unwrap_or(name_default),
            kind: JointKind::Free,
            anchor: Vec3::zeros(),
            axis: Vec3::z(),
            limits: [0.0, 0.0],
        });
    }
    let attrs = resolve(node, "joint", childclass, ctx)?;
    for k in attrs.keys() {
        if !JOINT_ATTRS.contains(&k.as_str()) {
            ctx.ignored_attrs.insert(format!("joint `{k}`"));
        }
    }
    let name = attrs.get("name").cloned().unwrap_or(name_default);
    let ty = attrs.get("type").map(String::as_str).unwrap_or("hinge");
    let kind = match ty {
        "hinge" => JointKind::Revolute,
        "slide" => JointKind::Prismatic,
        "free" => JointKind::Free,
        other => {
            return Err(AssetError::UnsupportedJointKind(format!(
                "{other} (joint `{name}`)"
            )))
        }
    };
    let anchor = match attrs.get("pos") {
        Some(s) => vec3(node, "pos", s)?,
        None => Vec3::zeros(),
    };
    let mut axis = match attrs.get("axis") {
        Some(s) => vec3(node, "axis", s)?,
        None => Vec3::z(),
    };
    if kind.is_actuated() {
        let n = axis.norm();
        if n < 1e-12 {
            return Err(invalid(node, "axis", &attrs["axis"]));
        }
        axis /= n;
    }
    let range = attr_vec(node, &attrs, "range", 2)?;
    let limited = match attrs.get("limited").map(String::as_str) {
        Some("true") => true,
        Some("false") => false,
        _ => range.is_some(),
    };
    let limits = match (kind, limited, range) {
        (JointKind::Revolute, true, Some(r)) => [angle(ctx, r[0]), angle(ctx, r[1])],
        (JointKind::Prismatic, true, Some(r)) => [r[0], r[1]],
        (JointKind::Revolute | JointKind::Prismatic, _, _) => [f64::NEG_INFINITY, f64::INFINITY],
        _ => [0.0, 0.0],
    };
    if limits[0] > limits[1] {
        return Err(AssetError::InvalidAsset(format!(
            "joint `{name}` has range lo > hi"
        )));
    }
    Ok(ParsedJoint {
        name,
        kind,
        anchor,
        axis,
        limits,
    })
}

/// Parses a geom; `shift` is subtracted from its position (body frame moved
/// to the joint anchor). Returns the geom and its (mass, com, tensor) share.
fn parse_geom(
    node: &Node,
    childclass: Option<&str>,
    shift: &Vec3,
    ctx: &mut Ctx,
) -> Result<Option<(Geom, Option<(f64, Vec3, Matrix3<f64>)>)>, AssetError> {
    let attrs = resolve(node, "geom", childclass, ctx)?;
    for k in attrs.keys() {
        if !GEOM_ATTRS.contains(&k.as_str()) {
            ctx.ignored_attrs.insert(format!("geom `{k}`"));
        }
    }
    let ty = attrs.get("type").map(String::as_str).unwrap_or("sphere");
    let size = attr_vec(node, &attrs, "size", 0)?.unwrap_or_default();
    let need = |n: usize| -> Result<(), AssetError> {
        if size.len() < n {
            Err(invalid(
                node,
                "size",
                attrs.get("size").map(String::as_str).unwrap_or("<missing>"),
            ))
        } else {
            Ok(())
        }
    };
    let shape = match ty {
        "sphere" => {
            need(1)?;
            GeomShape::Sphere { radius: size[0] }
        }
        "box" => {
            need(3)?;
            GeomShape::Box {
                size: [2.0 * size[0], 2.0 * size[1], 2.0 * size[2]],
            }
        }
        "plane" => {
            let (x, y) = (
                size.first().copied().unwrap_or(0.0),
                size.get(1).copied().unwrap_or(0.0),
            );
            GeomShape::Plane {
                size: [2.0 * x, 2.0 * y],
            }
        }
        "mesh" => {
            let mesh = attrs
                .get("mesh")
                .ok_or_else(|| invalid(node, "mesh", "<missing>"))?;
            let (path, scale) = ctx
                .meshes
                .get(mesh)
                .cloned()
                .ok_or_else(|| invalid(node, "mesh", mesh))?;
            GeomShape::Mesh { path, scale }
        }
        other => {
            let name = attrs.get("name").map(String::as_str).unwrap_or("<unnamed>");
            ctx.warnings.push(format!(
                "geom `{name}`: unsupported geom type `{other}` skipped"
            ));
            return Ok(None);
        }
    };
    let mut pose = pose_of(node, &attrs, ctx)?;
    pose.pos -= shift;
    let mut material = MaterialParams::default();
    let rgba = match attrs.get("rgba") {
        Some(s) => {
            let v = floats(s).map_err(|_| invalid(node, "rgba", s))?;
            (v.len() == 4).then(|| [v[0], v[1], v[2], v[3]])
        }
        None => attrs
            .get("material")
            .and_then(|m| ctx.materials.get(m).copied()),
    };
    if let Some(c) = rgba {
        material.base_color = [c[0], c[1], c[2]];
    }
    if let Some(m) = attrs.get("material") {
        material.id = Some(m.clone());
    }
    let flag = |k: &str| attrs.get(k).map(|v| v.trim() != "0").unwrap_or(true);
    let role = if !flag("contype") && !flag("conaffinity") {
        GeomRole::Visual
    } else {
        GeomRole::Collision
    };
    let volume = match &shape {
        GeomShape::Sphere { radius } => Some(4.0 / 3.0 * std::f64::consts::PI * radius.powi(3)),
        GeomShape::Box { size } => Some(size[0] * size[1] * size[2]),
        _ => None,
    };
    let mass_share = volume.map(|vol| {
        let mass = match (attrs.get("mass"), attrs.get("density")) {
            (Some(m), _) => m.trim().parse().unwrap_or(0.0),
            (None, Some(d)) => d.trim().parse::<f64>().unwrap_or(DEFAULT_DENSITY) * vol,
            (None, None) => DEFAULT_DENSITY * vol,
        };
        let diag = match &shape {
            GeomShape::Sphere { radius } => solid_sphere(mass, *radius),
            GeomShape::Box { size } => solid_box(mass, size),
            _ => unreachable!(),
        };
        let r = pose.rot.to_rotation_matrix().into_inner();
        (
            mass,
            pose.pos,
            r * Matrix3::from_diagonal(&diag) * r.transpose(),
        )
    });
    Ok(Some((
        Geom {
            shape,
            pose_in_body: pose,
            material,
            role,
        },
        mass_share,
    )))
}

fn visit_body(
    node: &Node,
    parent: &str,
    inherited_class: Option<&str>,
    ctx: &mut Ctx,
) -> Result<(), AssetError> {
    let attrs = node_attrs(node);
    let name = match node.attribute("name") {
        Some(n) => n.to_string(),
        None => {
            ctx.unnamed += 1;
            format!("body_{}", ctx.unnamed)
        }
    };
    let childclass_owned = node
        .attribute("childclass")
        .map(str::to_string)
        .or(inherited_class.map(str::to_string));
    let childclass = childclass_owned.as_deref();
    if let Some(c) = childclass {
        if !ctx.defaults.contains_key(c) {
            return Err(AssetError::InconsistentDefaultClass(format!(
                "childclass `{c}` is not defined"
            )));
        }
    }
    let body_pose = pose_of(node, &attrs, ctx)?;

    let mut parsed_joints = Vec::new();
    for (i, j) in node
        .children()
        .filter(|n| n.has_tag_name("joint") || n.has_tag_name("freejoint"))
        .enumerate()
    {
        parsed_joints.push(parse_joint(&j, &name, i, childclass, ctx)?);
    }
    if parsed_joints.len() > 1 && parsed_joints.iter().any(|j| j.kind == JointKind::Free) {
        return Err(AssetError::UnsupportedJointKind(format!(
            "free joint combined with other joints in body `{name}`"
        )));
    }

    // A body with k joints becomes a chain of k-1 massless intermediate bodies
    // plus the body itself, each frame placed at its joint anchor.
    let shift = parsed_joints
        .last()
        .map(|j| j.anchor)
        .unwrap_or_else(Vec3::zeros);
    let mut link_parent = parent.to_string();
    let mut prev_anchor = Vec3::zeros();
    let n = parsed_joints.len();
    for (k, j) in parsed_joints.into_iter().enumerate() {
        let origin = if k == 0 {
            body_pose.compose(&Pose::new(j.anchor, Quat::identity()))
        } else {
            Pose::new(j.anchor - prev_anchor, Quat::identity())
        };
        let child = if k + 1 == n {
            name.clone()
        } else {
            let link = format!("{name}__{}", j.name);
            ctx.bodies.push(Body {
                name: link.clone(),
                parent: None,
                pose_in_parent: Pose::identity(),
                inertial: Inertial::default(),
                geoms: vec![],
            });
            link
        };
        ctx.joints.push(Joint {
            name: j.name,
            kind: j.kind,
            parent_body: link_parent.clone(),
            child_body: child.clone(),
            axis: j.axis,
            limits: j.limits,
            origin,
        });
        prev_anchor = j.anchor;
        link_parent = child;
    }
    if n == 0 {
        ctx.joints.push(Joint {
            name: format!("{name}_weld"),
            kind: JointKind::Fixed,
            parent_body: parent.to_string(),
            child_body: name.clone(),
            axis: Vec3::z(),
            limits: [0.0, 0.0],
            origin: body_pose,
        });
    }

    let mut geoms = Vec::new();
    let mut shares = Vec::new();
    let mut explicit_inertial = None;
    let mut kids = Vec::new();
    for child in node.children().filter(|n| n.is_element()) {
        match child.tag_name().name() {
            "joint" | "freejoint" => {}
            "geom" => {
                if let Some((g, share)) = parse_geom(&child, childclass, &shift, ctx)? {
                    geoms.push(g);
                    if let Some(s) = share {
                        shares.push(s);
                    }
                }
            }
            "inertial" => explicit_inertial = Some(parse_inertial(&child, &shift, ctx)?),
            "body" => kids.push(child),
            other => ctx
                .warnings
                .push(format!("body `{name}`: <{other}> ignored")),
        }
    }
    let inertial = match explicit_inertial {
        Some(i) => i,
        None => inertial_from_geoms(&shares),
    };
    ctx.bodies.push(Body {
        name: name.clone(),
        parent: None,
        pose_in_parent: Pose::identity(),
        inertial,
        geoms,
    });
    for kid in kids {
        if shift != Vec3::zeros() {
            // Child frames are expressed relative to the shifted body frame.
            let pos = kid
                .attribute("pos")
                .map(|s| vec3(&kid, "pos", s))
                .transpose()?
                .unwrap_or_else(Vec3::zeros);
            visit_body_shifted(&kid, &name, childclass, pos - shift, ctx)?;
        } else {
            visit_body(&kid, &name, childclass, ctx)?;
        }
    }
    Ok(())
}

/// Like [`visit_body`] but with the body position replaced by `pos`.
fn visit_body_shifted(
    node: &Node,
    parent: &str,
    class: Option<&str>,
    pos: Vec3,
    ctx: &mut Ctx,
) -> Result<(), AssetError> {
    let before = ctx.joints.len();
    visit_body(node, parent, class, ctx)?;
    let original = node
        .attribute("pos")
        .map(|s| vec3(node, "pos", s))
        .transpose()?
        .unwrap_or_else(Vec3::zeros);
    let delta = pos - original;
    // The first joint created for this body carries the body placement.
    if let Some(j) = ctx.joints.get_mut(before) {
        j.origin.pos += delta;
    }
    Ok(())
}

fn parse_inertial(node: &Node, shift: &Vec3, ctx: &Ctx) -> Result<Inertial, AssetError> {
    let attrs = node_attrs(node);
    let mut pose = pose_of(node, &attrs, ctx)?;
    pose.pos -= shift;
    let mass = match attrs.get("mass") {
        Some(m) => m.trim().parse().map_err(|_| invalid(node, "mass", m))?,
        None => return Err(invalid(node, "mass", "<missing>")),
    };
    let (diag, axes) = if let Some(v) = attr_vec(node, &attrs, "fullinertia", 6)? {
        // MJCF order: Ixx Iyy Izz Ixy Ixz Iyz
        diagonalize(&tensor(v[0], v[1], v[2], v[3], v[4], v[5]), pose.rot)
    } else if let Some(v) = attr_vec(node, &attrs, "diaginertia", 3)? {
        (Vec3::new(v[0], v[1], v[2]), pose.rot)
    } else {
        return Err(invalid(node, "diaginertia", "<missing>"));
    };
    Ok(Inertial {
        mass,
        origin: Pose::new(pose.pos, axes),
        diag_inertia: diag,
    })
}

fn inertial_from_geoms(shares: &[(f64, Vec3, Matrix3<f64>)]) -> Inertial {
    let mass: f64 = shares.iter().map(|s| s.0).sum();
    if mass <= 0.0 {
        return Inertial::default();
    }
    let com = shares.iter().map(|s| s.1 * s.0).sum::<Vec3>() / mass;
    let mut t = Matrix3::zeros();
    for (m, p, i) in shares {
        let d = p - com;
        t += i + (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * *m;
    }
    let (diag, axes) = diagonalize(&t, Quat::identity());
    Inertial {
        mass,
        origin: Pose::new(com, axes),
        diag_inertia: diag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::forward_kinematics;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn free_box() {
        let p = parse_mjcf(
            r#"<mujoco model="m"><worldbody>
                 <body name="box" pos="0 0 1"><freejoint/><geom type="box" size="0.1 0.1 0.1"/></body>
               </worldbody></mujoco>"#,
        )
        .unwrap();
        let a = &p.asset;
        assert_eq!(a.bodies.len(), 2, "world + box");
        assert_eq!(a.joints.len(), 1);
        assert_eq!(a.joints[0].kind, JointKind::Free);
        assert!(a.actuated_order.is_empty());
        let b = a.body("box").unwrap();
        assert!((b.inertial.mass - 8.0).abs() < 1e-12, "1000 kg/m^3 * 0.2^3");
        assert_eq!(
            b.geoms[0].shape,
            GeomShape::Box {
                size: [0.2, 0.2, 0.2]
            }
        );
    }

    #[test]
    fn ball_joint_is_rejected() {
        let e = parse_mjcf(
            r#"<mujoco><worldbody><body name="b"><joint type="ball"/></body></worldbody></mujoco>"#,
        )
        .unwrap_err();
        assert!(matches!(e, AssetError::UnsupportedJointKind(_)));
    }

    #[test]
    fn defaults_inherit_through_classes() {
        let p = parse_mjcf(
            r#"<mujoco>
                 <compiler angle="radian"/>
                 <default>
                   <joint axis="0 1 0" range="-1 1"/>
                   <default class="arm"><joint range="-2 2"/></default>
                 </default>
                 <worldbody>
                   <body name="a" childclass="arm"><joint name="j1"/>
                     <body name="b"><joint name="j2" class="main"/></body>
                   </body>
                 </worldbody></mujoco>"#,
        )
        .unwrap();
        let j1 = p.asset.joint("j1").unwrap();
        assert_eq!(j1.axis, Vec3::y());
        assert_eq!(j1.limits, [-2.0, 2.0]);
        assert_eq!(p.asset.joint("j2").unwrap().limits, [-1.0, 1.0]);
    }

    #[test]
    fn undefined_class_is_inconsistent() {
        let e = parse_mjcf(
            r#"<mujoco><worldbody><body name="b"><joint class="nope"/></body></worldbody></mujoco>"#,
        )
        .unwrap_err();
        assert!(matches!(e, AssetError::InconsistentDefaultClass(_)));
    }

    #[test]
    fn unsupported_features_are_warned() {
        let p =
            parse_mjcf(r#"<mujoco><worldbody/><tendon/><actuator/><equality/></mujoco>"#).unwrap();
        for f in ["tendon", "actuator", "equality"] {
            assert!(
                p.warnings.iter().any(|w| w.contains(f)),
                "{f}: {:?}",
                p.warnings
            );
        }
    }

    #[test]
    fn degrees_are_converted() {
        let p = parse_mjcf(
            r#"<mujoco><worldbody><body name="b"><joint name="j" range="-90 90"/></body></worldbody></mujoco>"#,
        )
        .unwrap();
        let l = p.asset.joint("j").unwrap().limits;
        assert!((l[1] - FRAC_PI_2).abs() < 1e-15 && (l[0] + FRAC_PI_2).abs() < 1e-15);
    }

    /// Hand-derived: a hinge anchored away from the body origin rotates the
    /// body about the anchor, exactly as MuJoCo composes body and joint frames.
    #[test]
    fn offset_anchor_matches_mujoco_composition() {
        let p = parse_mjcf(
            r#"<mujoco><compiler angle="radian"/><worldbody>
                 <body name="b" pos="1 0 0">
                   <joint name="j" pos="0.5 0 0" axis="0 0 1"/>
                   <geom name="g" type="sphere" size="0.1" pos="1 0 0"/>
                   <body name="c" pos="1 0 0"><geom type="sphere" size="0.1"/></body>
                 </body>
               </worldbody></mujoco>"#,
        )
        .unwrap();
        let fk = forward_kinematics(&p.asset, &Pose::identity(), &[FRAC_PI_2]).unwrap();
        // Anchor in world: (1.5, 0, 0). The body origin (1,0,0) is 0.5 behind
        // the anchor; after +90 deg about z it sits at (1.5, -0.5, 0).
        // Body c at body-local (1,0,0) -> anchor + Rz(90)*(0.5,0,0) = (1.5, 0.5, 0).
        let c = fk["c"];
        assert!(
            (c.pos - Vec3::new(1.5, 0.5, 0.0)).norm() < 1e-12,
            "{:?}",
            c.pos
        );
        let b = fk["b"];
        let g = b.compose(&p.asset.body("b").unwrap().geoms[0].pose_in_body);
        assert!((g.pos - Vec3::new(1.5, 0.5, 0.0)).norm() < 1e-12);
        let origin_of_b_mj = b.transform_point(&Vec3::new(-0.5, 0.0, 0.0));
        assert!((origin_of_b_mj - Vec3::new(1.5, -0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn two_joints_in_one_body_make_a_chain() {
        let p = parse_mjcf(
            r#"<mujoco><worldbody><body name="b">
                 <joint name="h" type="hinge"/><joint name="s" type="slide" axis="1 0 0"/>
               </body></worldbody></mujoco>"#,
        )
        .unwrap();
        assert_eq!(p.asset.actuated_order, ["h", "s"]);
        assert_eq!(p.asset.bodies.len(), 3);
        assert!(p.asset.body("b__h").is_some());
    }
}

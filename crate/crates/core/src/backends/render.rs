//! Minimal software rasterizer: spheres as discs, boxes and planes as flat
//! shaded polygons, painter's ordering, one distant light.

use super::world::{EntityKind, EnvWorld, SceneModel};
use super::{BackendError, Image};
use crate::assets::{GeomRole, GeomShape};
use crate::config::{CameraConfig, LightKind, MaterialParams, PrimitiveShape};
use crate::math::{Pose, Vec3};

const NEAR: f64 = 0.01;
const AMBIENT: f64 = 0.35;
const BACKGROUND: [f64; 3] = [0.62, 0.68, 0.75];
const DEFAULT_WALL: [f64; 3] = [0.85, 0.83, 0.78];
const ROOM_HALF: f64 = 2.0;
const GROUND_HALF: f64 = 10.0;

/// Layouts understood by the renderer, as wall planes (centre, normal).
pub(crate) fn layout_walls(layout: &str) -> Vec<(Vec3, Vec3)> {
    let back = (Vec3::new(-ROOM_HALF, 0.0, ROOM_HALF), Vec3::x());
    let left = (Vec3::new(0.0, ROOM_HALF, ROOM_HALF), -Vec3::y());
    let right = (Vec3::new(0.0, -ROOM_HALF, ROOM_HALF), Vec3::y());
    match layout {
        "back_wall" => vec![back],
        "corner" => vec![back, left],
        "room" => vec![back, left, right],
        _ => vec![],
    }
}

struct Light {
    dir: Vec3,
    gain: [f64; 3],
}

fn tint(kelvin: f64) -> [f64; 3] {
    let t = ((kelvin - 6500.0) / 5000.0).clamp(-1.0, 1.0);
    if t < 0.0 {
        [1.0, 1.0 + 0.1 * t, 1.0 + 0.3 * t]
    } else {
        [1.0 - 0.2 * t, 1.0 - 0.05 * t, 1.0]
    }
}

fn light(model: &SceneModel) -> Light {
    let lights = &model.cfg.lights;
    let chosen = lights
        .iter()
        .find(|l| matches!(l.kind, LightKind::Distant { .. }))
        .or(lights.first());
    match chosen {
        None => Light {
            dir: Vec3::new(0.3, 0.2, 1.0).normalize(),
            gain: [1.0; 3],
        },
        Some(l) => {
            let dir = match l.kind {
                LightKind::Distant { polar, azimuth } => {
                    let (p, a) = (polar.to_radians(), azimuth.to_radians());
                    Vec3::new(p.sin() * a.cos(), p.sin() * a.sin(), p.cos())
                }
                LightKind::CylinderArray { .. } => Vec3::z(),
            };
            let t = tint(l.color_temperature);
            Light {
                dir,
                gain: t.map(|c| c * l.intensity),
            }
        }
    }
}

fn shade(color: [f64; 3], normal: &Vec3, light: &Light) -> [u8; 3] {
    let lambert = normal.dot(&light.dir).max(0.0);
    let k = AMBIENT + (1.0 - AMBIENT) * lambert;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = ((color[c] * k * light.gain[c]).clamp(0.0, 1.0) * 255.0).round() as u8;
    }
    out
}

fn to_u8(c: [f64; 3]) -> [u8; 3] {
    c.map(|x| (x.clamp(0.0, 1.0) * 255.0).round() as u8)
}

enum Shape2 {
    Disc { u: f64, v: f64, r: f64 },
    Poly(Vec<(f64, f64)>),
}

struct Prim {
    depth: f64,
    shape: Shape2,
    color: [u8; 3],
}

struct Projector {
    view: Pose,
    f: f64,
    cx: f64,
    cy: f64,
    eye: Vec3,
}

impl Projector {
    fn cam(&self, p: &Vec3) -> Vec3 {
        self.view.transform_point(p)
    }
    fn px(&self, c: &Vec3) -> (f64, f64) {
        (self.cx + self.f * c.x / c.z, self.cy + self.f * c.y / c.z)
    }
}

fn push_sphere(
    out: &mut Vec<Prim>,
    pr: &Projector,
    centre: &Vec3,
    r: f64,
    color: [f64; 3],
    light: &Light,
) {
    let c = pr.cam(centre);
    if c.z - r <= NEAR {
        return;
    }
    let d2 = c.norm_squared();
    let (u, v) = pr.px(&c);
    let radius = pr.f * r / (d2 - r * r).sqrt();
    let towards_eye = (pr.eye - centre).normalize();
    out.push(Prim {
        depth: d2.sqrt(),
        shape: Shape2::Disc { u, v, r: radius },
        color: shade(color, &towards_eye, light),
    });
}

/// Clips a camera-space polygon against the near plane and projects it.
fn push_polygon(
    out: &mut Vec<Prim>,
    pr: &Projector,
    world: &[Vec3],
    normal: Vec3,
    color: [f64; 3],
    light: &Light,
) {
    let centroid = world.iter().fold(Vec3::zeros(), |a, p| a + p) / world.len() as f64;
    let mut normal = normal;
    if normal.dot(&(pr.eye - centroid)) < 0.0 {
        normal = -normal;
    }
    let cam: Vec<Vec3> = world.iter().map(|p| pr.cam(p)).collect();
    let mut clipped = Vec::with_capacity(cam.len() + 2);
    for i in 0..cam.len() {
        let a = cam[i];
        let b = cam[(i + 1) % cam.len()];
        let (ia, ib) = (a.z >= NEAR, b.z >= NEAR);
        if ia {
            clipped.push(a);
        }
        if ia != ib {
            let t = (NEAR - a.z) / (b.z - a.z);
            clipped.push(a + (b - a) * t);
        }
    }
    if clipped.len() < 3 {
        return;
    }
    let pts = clipped.iter().map(|c| pr.px(c)).collect();
    out.push(Prim {
        depth: pr.cam(&centroid).norm(),
        shape: Shape2::Poly(pts),
        color: shade(color, &normal, light),
    });
}

fn push_box(
    out: &mut Vec<Prim>,
    pr: &Projector,
    pose: &Pose,
    size: Vec3,
    color: [f64; 3],
    light: &Light,
) {
    let h = size * 0.5;
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            let mut n = Vec3::zeros();
            n[axis] = sign;
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut face = Vec::with_capacity(4);
            for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mut p = n.component_mul(&h);
                p[u] = su * h[u];
                p[v] = sv * h[v];
                face.push(pose.transform_point(&p));
            }
            let wn = pose.rot * n;
            let centre = pose.transform_point(&n.component_mul(&h));
            // Back faces are hidden by the front ones.
            if wn.dot(&(pr.eye - centre)) <= 0.0 {
                continue;
            }
            push_polygon(out, pr, &face, wn, color, light);
        }
    }
}

fn push_plane(
    out: &mut Vec<Prim>,
    pr: &Projector,
    pose: &Pose,
    sx: f64,
    sy: f64,
    color: [f64; 3],
    light: &Light,
) {
    let (hx, hy) = (sx * 0.5, sy * 0.5);
    let quad: Vec<Vec3> = [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
        .iter()
        .map(|(x, y)| pose.transform_point(&Vec3::new(*x, *y, 0.0)))
        .collect();
    push_polygon(out, pr, &quad, pose.rot * Vec3::z(), color, light);
}

fn material_color(m: &MaterialParams) -> [f64; 3] {
    m.base_color
}

pub(crate) fn render(
    model: &SceneModel,
    w: &EnvWorld,
    cam: &CameraConfig,
) -> Result<Image, BackendError> {
    if !(cam.vertical_fov > 0.0 && cam.vertical_fov < 180.0) {
        return Err(BackendError::DegenerateCamera(format!(
            "vertical_fov {}",
            cam.vertical_fov
        )));
    }
    if cam.width == 0 || cam.height == 0 {
        return Err(BackendError::DegenerateCamera("zero image size".into()));
    }
    if !cam.pose.is_finite() {
        return Err(BackendError::DegenerateCamera("non-finite pose".into()));
    }
    let pr = Projector {
        view: cam.pose.inverse(),
        f: (cam.height as f64 / 2.0) / (cam.vertical_fov.to_radians() / 2.0).tan(),
        cx: cam.width as f64 / 2.0,
        cy: cam.height as f64 / 2.0,
        eye: cam.pose.pos,
    };
    let light = light(model);
    let scene = &model.cfg.scene;
    let mut prims = Vec::new();

    if let Some(g) = &scene.ground_material {
        push_plane(
            &mut prims,
            &pr,
            &Pose::identity(),
            2.0 * GROUND_HALF,
            2.0 * GROUND_HALF,
            material_color(g),
            &light,
        );
    }
    let wall_color = scene
        .wall_material
        .as_ref()
        .map(material_color)
        .unwrap_or(DEFAULT_WALL);
    for (centre, normal) in layout_walls(&scene.layout) {
        let rot =
            nalgebra::UnitQuaternion::rotation_between(&Vec3::z(), &normal).unwrap_or_else(|| {
                nalgebra::UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI)
            });
        let pose = Pose::new(centre, rot);
        push_plane(
            &mut prims,
            &pr,
            &pose,
            2.0 * ROOM_HALF,
            2.0 * ROOM_HALF,
            wall_color,
            &light,
        );
    }

    let n_robots = model.cfg.robots.len();
    for (i, (e, b)) in model.entities.iter().zip(&w.bodies).enumerate() {
        match &e.kind {
            EntityKind::Rigid(r) => {
                let o = &model.cfg.objects[i - n_robots];
                let color = match (&scene.table_material, e.name.as_str()) {
                    (Some(t), "table") => material_color(t),
                    _ => material_color(&o.material),
                };
                match r.shape {
                    PrimitiveShape::Sphere => {
                        push_sphere(&mut prims, &pr, &b.pose.pos, r.dims[0], color, &light)
                    }
                    PrimitiveShape::Box => push_box(
                        &mut prims,
                        &pr,
                        &b.pose,
                        Vec3::new(r.dims[0], r.dims[1], r.dims[2]),
                        color,
                        &light,
                    ),
                    PrimitiveShape::Plane => push_plane(
                        &mut prims, &pr, &b.pose, r.dims[0], r.dims[1], color, &light,
                    ),
                }
            }
            EntityKind::Articulated(a) => {
                let poses = a.kin.fk(&b.pose, &b.dof_pos)?;
                for (body, pose) in a.asset.bodies.iter().zip(&poses) {
                    let has_visual = body.geoms.iter().any(|g| g.role == GeomRole::Visual);
                    for g in &body.geoms {
                        if has_visual && g.role != GeomRole::Visual {
                            continue;
                        }
                        let gp = pose.compose(&g.pose_in_body);
                        let color = material_color(&g.material);
                        match &g.shape {
                            GeomShape::Sphere { radius } => {
                                push_sphere(&mut prims, &pr, &gp.pos, *radius, color, &light)
                            }
                            GeomShape::Box { size } => {
                                push_box(&mut prims, &pr, &gp, Vec3::from(*size), color, &light)
                            }
                            GeomShape::Plane { size } if size[0] > 0.0 && size[1] > 0.0 => {
                                push_plane(&mut prims, &pr, &gp, size[0], size[1], color, &light)
                            }
                            _ => {}
                        }
                    }
                }
            }
        }
    }

    // Far to near; the stable sort keeps scene order for equal depths.
    prims.sort_by(|a, b| b.depth.total_cmp(&a.depth));
    let mut img = Image::new(cam.width, cam.height, to_u8(BACKGROUND));
    for p in &prims {
        fill(&mut img, p);
    }
    Ok(img)
}

fn fill(img: &mut Image, p: &Prim) {
    let (w, h) = (img.width as f64, img.height as f64);
    match &p.shape {
        Shape2::Disc { u, v, r } => {
            let x0 = (u - r).floor().max(0.0) as u32;
            let x1 = (u + r).ceil().min(w) as u32;
            let y0 = (v - r).floor().max(0.0) as u32;
            let y1 = (v + r).ceil().min(h) as u32;
            for y in y0..y1 {
                for x in x0..x1 {
                    let dx = x as f64 + 0.5 - u;
                    let dy = y as f64 + 0.5 - v;
                    if dx * dx + dy * dy <= r * r {
                        img.set(x, y, p.color);
                    }
                }
            }
        }
        Shape2::Poly(pts) => {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for (x, y) in pts {
                x0 = x0.min(*x);
                x1 = x1.max(*x);
                y0 = y0.min(*y);
                y1 = y1.max(*y);
            }
            let xs = x0.floor().max(0.0) as u32;
            let xe = x1.ceil().min(w).max(0.0) as u32;
            let ys = y0.floor().max(0.0) as u32;
            let ye = y1.ceil().min(h).max(0.0) as u32;
            for y in ys..ye {
                for x in xs..xe {
                    if inside(pts, x as f64 + 0.5, y as f64 + 0.5) {
                        img.set(x, y, p.color);
                    }
                }
            }
        }
    }
}

/// Convex polygon containment, either winding.
fn inside(pts: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut sign = 0.0;
    for i in 0..pts.len() {
        let (ax, ay) = pts[i];
        let (bx, by) = pts[(i + 1) % pts.len()];
        let cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax);
        if cross != 0.0 {
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return false;
            }
        }
    }
    true
}

//! Contact detection and impulse resolution for rigid primitives.
//!
//! Supported pairs: sphere-sphere, sphere-plane, sphere-box and box-plane
//! (eight corner points). Box-box contacts are not detected.

use nalgebra::Matrix3;

use super::world::{BodyRt, EntityKind, RigidModel, SceneModel};
use crate::config::PrimitiveShape;
use crate::math::{Pose, Vec3};

#[derive(Clone, Debug)]
pub(crate) struct Contact {
    pub a: usize,
    pub b: usize,
    /// Unit normal pointing from `a` towards `b`.
    pub normal: Vec3,
    pub point: Vec3,
    /// Penetration depth, positive when overlapping.
    pub depth: f64,
}

fn rigid(model: &SceneModel, i: usize) -> Option<&RigidModel> {
    match &model.entities[i].kind {
        EntityKind::Rigid(r) if model.entities[i].collision => Some(r),
        _ => None,
    }
}

/// Every contact between colliding rigid bodies, with at least one side
/// dynamic and free (not carried by a gripper).
pub(crate) fn detect(model: &SceneModel, bodies: &[BodyRt]) -> Vec<Contact> {
    let mut out = Vec::new();
    let n = bodies.len();
    let moving = |i: usize, r: &RigidModel| r.is_dynamic() && bodies[i].attached_to.is_none();
    for i in 0..n {
        let Some(ri) = rigid(model, i) else { continue };
        for j in i + 1..n {
            let Some(rj) = rigid(model, j) else { continue };
            if !moving(i, ri) && !moving(j, rj) {
                continue;
            }
            // Carried bodies act as neither participant.
            if bodies[i].attached_to.is_some() || bodies[j].attached_to.is_some() {
                continue;
            }
            pair(i, ri, &bodies[i].pose, j, rj, &bodies[j].pose, &mut out);
        }
    }
    out
}

fn pair(
    i: usize,
    ri: &RigidModel,
    pi: &Pose,
    j: usize,
    rj: &RigidModel,
    pj: &Pose,
    out: &mut Vec<Contact>,
) {
    use PrimitiveShape::*;
    match (ri.shape, rj.shape) {
        (Sphere, Sphere) => sphere_sphere(i, ri.dims[0], pi, j, rj.dims[0], pj, out),
        (Plane, Sphere) => sphere_plane(i, ri, pi, j, rj.dims[0], pj, out),
        (Sphere, Plane) => sphere_plane(j, rj, pj, i, ri.dims[0], pi, out),
        (Box, Sphere) => sphere_box(i, ri, pi, j, rj.dims[0], pj, out),
        (Sphere, Box) => sphere_box(j, rj, pj, i, ri.dims[0], pi, out),
        (Plane, Box) => box_plane(i, ri, pi, j, rj, pj, out),
        (Box, Plane) => box_plane(j, rj, pj, i, ri, pi, out),
        (Box, Box) | (Plane, Plane) => {}
    }
}

fn sphere_sphere(
    a: usize,
    ra: f64,
    pa: &Pose,
    b: usize,
    rb: f64,
    pb: &Pose,
    out: &mut Vec<Contact>,
) {
    let d = pb.pos - pa.pos;
    let dist = d.norm();
    let depth = ra + rb - dist;
    if depth < 0.0 {
        return;
    }
    let normal = if dist > 1e-12 { d / dist } else { Vec3::z() };
    out.push(Contact {
        a,
        b,
        normal,
        point: pa.pos + normal * ra,
        depth,
    });
}

/// Plane frame: centre at the pose origin, normal along local +z, finite
/// extents from `dims`.
fn plane_local(plane: &RigidModel, pp: &Pose, p: &Vec3) -> Option<Vec3> {
    let local = pp.rot.inverse() * (p - pp.pos);
    let h = plane.half_extents();
    (local.x.abs() <= h.x && local.y.abs() <= h.y).then_some(local)
}

fn sphere_plane(
    a: usize,
    plane: &RigidModel,
    pa: &Pose,
    b: usize,
    r: f64,
    pb: &Pose,
    out: &mut Vec<Contact>,
) {
    let Some(local) = plane_local(plane, pa, &pb.pos) else {
        return;
    };
    let depth = r - local.z;
    // One-sided: only spheres whose centre is on the positive side.
    if depth < 0.0 || local.z < 0.0 {
        return;
    }
    let normal = pa.rot * Vec3::z();
    out.push(Contact {
        a,
        b,
        normal,
        point: pb.pos - normal * r,
        depth,
    });
}

fn box_corners(bx: &RigidModel, pose: &Pose) -> [Vec3; 8] {
    let h = bx.half_extents();
    let mut c = [Vec3::zeros(); 8];
    for (k, item) in c.iter_mut().enumerate() {
        let s = |bit: usize| if k & bit != 0 { 1.0 } else { -1.0 };
        *item = pose.transform_point(&Vec3::new(s(1) * h.x, s(2) * h.y, s(4) * h.z));
    }
    c
}

fn box_plane(
    a: usize,
    plane: &RigidModel,
    pa: &Pose,
    b: usize,
    bx: &RigidModel,
    pb: &Pose,
    out: &mut Vec<Contact>,
) {
    let normal = pa.rot * Vec3::z();
    let centre = pa.rot.inverse() * (pb.pos - pa.pos);
    if centre.z < 0.0 {
        return;
    }
    for c in box_corners(bx, pb) {
        let Some(local) = plane_local(plane, pa, &c) else {
            continue;
        };
        if local.z <= 0.0 {
            out.push(Contact {
                a,
                b,
                normal,
                point: c,
                depth: -local.z,
            });
        }
    }
}

fn sphere_box(
    a: usize,
    bx: &RigidModel,
    pa: &Pose,
    b: usize,
    r: f64,
    pb: &Pose,
    out: &mut Vec<Contact>,
) {
    let h = bx.half_extents();
    let local = pa.rot.inverse() * (pb.pos - pa.pos);
    let clamped = Vec3::new(
        local.x.clamp(-h.x, h.x),
        local.y.clamp(-h.y, h.y),
        local.z.clamp(-h.z, h.z),
    );
    let diff = local - clamped;
    let dist = diff.norm();
    let (n_local, depth, surface) = if dist > 1e-12 {
        if dist > r {
            return;
        }
        (diff / dist, r - dist, clamped)
    } else {
        // Centre inside the box: leave through the nearest face.
        let gaps = [
            h.x - local.x.abs(),
            h.y - local.y.abs(),
            h.z - local.z.abs(),
        ];
        let k = (0..3).min_by(|&x, &y| gaps[x].total_cmp(&gaps[y])).unwrap();
        let mut n = Vec3::zeros();
        n[k] = if local[k] >= 0.0 { 1.0 } else { -1.0 };
        let mut s = local;
        s[k] = n[k] * h[k];
        (n, r + gaps[k], s)
    };
    out.push(Contact {
        a,
        b,
        normal: pa.rot * n_local,
        point: pa.transform_point(&surface),
        depth,
    });
}

struct Side {
    inv_mass: f64,
    inv_inertia: Matrix3<f64>,
    lever: Vec3,
}

fn side<'m>(
    model: &'m SceneModel,
    bodies: &[BodyRt],
    i: usize,
    point: &Vec3,
) -> (Side, Option<&'m RigidModel>) {
    match &model.entities[i].kind {
        EntityKind::Rigid(r) if r.is_dynamic() && bodies[i].attached_to.is_none() => (
            Side {
                inv_mass: r.inv_mass,
                inv_inertia: r.inv_inertia_world(&bodies[i].pose.rot),
                lever: point - bodies[i].pose.pos,
            },
            Some(r),
        ),
        _ => (
            Side {
                inv_mass: 0.0,
                inv_inertia: Matrix3::zeros(),
                lever: point - bodies[i].pose.pos,
            },
            None,
        ),
    }
}

fn point_velocity(b: &BodyRt, lever: &Vec3, moving: bool) -> Vec3 {
    if moving {
        b.lin_vel + b.ang_vel.cross(lever)
    } else {
        Vec3::zeros()
    }
}

/// Sequential normal impulses on approaching contacts, `iterations` sweeps.
/// Restitution is the smaller of the two coefficients; approach speeds
/// below `rest_speed` are treated as resting and get none.
pub(crate) fn resolve_impulses(
    model: &SceneModel,
    bodies: &mut [BodyRt],
    contacts: &[Contact],
    iterations: u32,
    rest_speed: f64,
) {
    let mut first_vn: Vec<Option<f64>> = vec![None; contacts.len()];
    for _ in 0..iterations.max(1) {
        let mut any = false;
        for (ci, c) in contacts.iter().enumerate() {
            let (sa, ma) = side(model, bodies, c.a, &c.point);
            let (sb, mb) = side(model, bodies, c.b, &c.point);
            let va = point_velocity(&bodies[c.a], &sa.lever, ma.is_some());
            let vb = point_velocity(&bodies[c.b], &sb.lever, mb.is_some());
            let vn = (vb - va).dot(&c.normal);
            if vn >= 0.0 {
                continue;
            }
            // Bounce speed is fixed by the first approach so later sweeps
            // only remove residual approach.
            let v0 = *first_vn[ci].get_or_insert(vn);
            let e = model.entities[c.a]
                .restitution
                .min(model.entities[c.b].restitution);
            let e = if -v0 < rest_speed { 0.0 } else { e };
            let ang = |s: &Side| (s.inv_inertia * s.lever.cross(&c.normal)).cross(&s.lever);
            let k = sa.inv_mass + sb.inv_mass + c.normal.dot(&(ang(&sa) + ang(&sb)));
            if k <= 0.0 {
                continue;
            }
            let target = -e * v0;
            let j = (target - vn) / k;
            if j <= 0.0 {
                continue;
            }
            any = true;
            let imp = c.normal * j;
            if let Some(r) = ma {
                let b = &mut bodies[c.a];
                b.momentum -= imp;
                b.ang_momentum -= sa.lever.cross(&imp);
                b.sync_velocities(r);
            }
            if let Some(r) = mb {
                let b = &mut bodies[c.b];
                b.momentum += imp;
                b.ang_momentum += sb.lever.cross(&imp);
                b.sync_velocities(r);
            }
        }
        if !any {
            break;
        }
    }
}

/// Removes the deepest penetration of every body pair along its normal,
/// split by inverse mass. Pairs already separating fast enough to clear the
/// overlap within `dt` are left alone: shifting them along the normal would
/// change the angular momentum of an off-centre collision.
pub(crate) fn project_positions(
    model: &SceneModel,
    bodies: &mut [BodyRt],
    contacts: &[Contact],
    dt: f64,
) {
    let mut deepest: Vec<&Contact> = Vec::new();
    for c in contacts {
        match deepest.iter_mut().find(|d| d.a == c.a && d.b == c.b) {
            Some(d) if d.depth < c.depth => *d = c,
            Some(_) => {}
            None => deepest.push(c),
        }
    }
    for c in deepest {
        if c.depth <= 0.0 {
            continue;
        }
        let point_vel = |i: usize| {
            let b = &bodies[i];
            b.lin_vel + b.ang_vel.cross(&(c.point - b.pose.pos))
        };
        if (point_vel(c.b) - point_vel(c.a)).dot(&c.normal) * dt >= c.depth {
            continue;
        }
        let inv = |i: usize| match &model.entities[i].kind {
            EntityKind::Rigid(r) if bodies[i].attached_to.is_none() => r.inv_mass,
            _ => 0.0,
        };
        let (ia, ib) = (inv(c.a), inv(c.b));
        let total = ia + ib;
        if total <= 0.0 {
            continue;
        }
        bodies[c.a].pose.pos -= c.normal * (c.depth * ia / total);
        bodies[c.b].pose.pos += c.normal * (c.depth * ib / total);
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::MaterialParams;
use crate::math::{look_at, Pose, Vec3};

/// Scene layouts the renderer knows how to draw.
pub const LAYOUTS: [&str; 4] = ["open_floor", "back_wall", "corner", "room"];

/// Where the pool cameras look.
pub const WORKSPACE_CENTER: [f64; 3] = [0.45, 0.0, 0.1];

/// Identifier pools the randomizer draws from.
#[derive(Clone, Debug, PartialEq)]
pub struct Pools {
    pub table_materials: Vec<MaterialParams>,
    pub wall_materials: Vec<MaterialParams>,
    pub ground_materials: Vec<MaterialParams>,
    pub camera_poses: Vec<Pose>,
    pub layouts: Vec<String>,
}

fn materials(prefix: &str, n: usize, stream: u64) -> Vec<MaterialParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d61_7465_7269_616c);
    rng.set_stream(stream);
    (0..n)
        .map(|k| MaterialParams {
            id: Some(format!("{prefix}_{k:03}")),
            base_color: [rng.random(), rng.random(), rng.random()],
            ..MaterialParams::default()
        })
        .collect()
}

/// 59 viewpoints on rings around the workspace: six heights, ten azimuths
/// each, minus the lowest straight-behind view, which the robot occludes.
fn camera_poses() -> Vec<Pose> {
    let center = Vec3::from(WORKSPACE_CENTER);
    let mut out = Vec::with_capacity(59);
    for h in 0..6 {
        let height = 0.35 + 0.2 * h as f64;
        let radius = 1.3 - 0.08 * h as f64;
        for a in 0..10 {
            if h == 0 && a == 0 {
                continue;
            }
            let az = (-70.0 + 140.0 * a as f64 / 9.0).to_radians();
            let eye = center + Vec3::new(radius * az.cos(), radius * az.sin(), height);
            out.push(Pose::new(eye, look_at(&eye, &center, &Vec3::z())));
        }
    }
    out
}

impl Pools {
    /// 300 table materials, 150 wall and 150 ground materials, 59 camera
    /// poses and the renderer's layouts.
    pub fn builtin() -> Self {
        Self {
            table_materials: materials("table", 300, 1),
            wall_materials: materials("wall", 150, 2),
            ground_materials: materials("ground", 150, 3),
            camera_poses: camera_poses(),
            layouts: LAYOUTS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_sizes() {
        let p = Pools::builtin();
        assert_eq!(p.table_materials.len(), 300);
        assert_eq!(p.wall_materials.len(), 150);
        assert_eq!(p.ground_materials.len(), 150);
        assert_eq!(p.camera_poses.len(), 59);
        assert_eq!(p, Pools::builtin());
    }

    #[test]
    fn pool_cameras_face_the_workspace() {
        let c = Vec3::from(WORKSPACE_CENTER);
        for pose in Pools::builtin().camera_poses {
            let fwd = pose.rot * Vec3::z();
            assert!((fwd - (c - pose.pos).normalize()).norm() < 1e-9);
        }
    }
}

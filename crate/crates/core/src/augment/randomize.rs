use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::split::{partition, Split};
use super::{AugmentError, Pools};
use crate::config::{
    validate, CameraConfig, LightConfig, LightKind, MaterialParams, ScenarioConfig,
};
use crate::math::{quat_from_rpy, Pose, Vec3};

/// Cells per side of the grid each spawn region is divided into for the
/// level-0 train/test split.
pub const SPAWN_GRID: usize = 10;

#[derive(Clone, Debug)]
pub struct RandomizationSpec {
    /// 0: object placement; 1: + scene materials and layout; 2: + camera
    /// pose; 3: + lighting and reflection scalars.
    pub level: u8,
    pub seed: u64,
    pub pools: Pools,
}

impl RandomizationSpec {
    pub fn new(level: u8, seed: u64) -> Self {
        Self {
            level,
            seed,
            pools: Pools::builtin(),
        }
    }
}

fn pick<T: Clone>(rng: &mut ChaCha8Rng, items: &[T]) -> T {
    items[rng.random_range(0..items.len())].clone()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn reflections(rng: &mut ChaCha8Rng, m: &mut MaterialParams) {
    m.roughness = rng.random_range(0.0..=1.0);
    m.specular = rng.random_range(0.0..=1.0);
    m.metallic = rng.random_range(0.0..=1.0);
}

/// One randomized variant of `cfg`. The result depends only on
/// (spec.seed, split, draw); pool partitions depend only on spec.seed.
pub fn randomize_scene(
    cfg: &ScenarioConfig,
    spec: &RandomizationSpec,
    split: Split,
    draw: u64,
) -> Result<ScenarioConfig, AugmentError> {
    if spec.level > 3 {
        return Err(AugmentError::BadLevel(spec.level));
    }
    let mut out = cfg.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(draw.wrapping_mul(2) + matches!(split, Split::Test) as u64);

    // Level 0: task-space placement of the listed objects.
    let cells: Vec<(usize, usize)> = (0..SPAWN_GRID)
        .flat_map(|i| (0..SPAWN_GRID).map(move |j| (i, j)))
        .collect();
    for (k, region) in cfg.task.spawn_regions.iter().enumerate() {
        let allowed = partition(
            &cells,
            spec.seed ^ (k as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            split,
        )?;
        let (ci, cj) = pick(&mut rng, &allowed);
        let cell = |axis: usize, c: usize| {
            let w = (region.hi[axis] - region.lo[axis]) / SPAWN_GRID as f64;
            (
                region.lo[axis] + w * c as f64,
                region.lo[axis] + w * (c + 1) as f64,
            )
        };
        let (x0, x1) = cell(0, ci);
        let (y0, y1) = cell(1, cj);
        let pos = Vec3::new(
            uniform(&mut rng, x0, x1),
            uniform(&mut rng, y0, y1),
            uniform(&mut rng, region.lo[2], region.hi[2]),
        );
        let yaw = uniform(&mut rng, -region.yaw, region.yaw);
        let obj = out
            .objects
            .iter_mut()
            .find(|o| o.name == region.entity)
            .ok_or_else(|| AugmentError::UnknownEntity(region.entity.clone()))?;
        obj.base_pose = Pose::new(pos, quat_from_rpy(0.0, 0.0, yaw) * obj.base_pose.rot);
    }

    if spec.level >= 1 {
        let p = &spec.pools;
        out.scene.table_material = Some(pick(
            &mut rng,
            &partition(&p.table_materials, spec.seed, split)?,
        ));
        out.scene.wall_material = Some(pick(
            &mut rng,
            &partition(&p.wall_materials, spec.seed, split)?,
        ));
        out.scene.ground_material = Some(pick(
            &mut rng,
            &partition(&p.ground_materials, spec.seed, split)?,
        ));
        // Too few layouts to hold out a test part; both splits share them.
        if !p.layouts.is_empty() {
            out.scene.layout = pick(&mut rng, &p.layouts);
        }
    }

    if spec.level >= 2 {
        let poses = partition(&spec.pools.camera_poses, spec.seed, split)?;
        if out.cameras.is_empty() {
            out.cameras.push(CameraConfig {
                name: "camera0".into(),
                pose: Pose::identity(),
                vertical_fov: 60.0,
                width: 256,
                height: 256,
            });
        }
        for cam in &mut out.cameras {
            cam.pose = pick(&mut rng, &poses);
        }
    }

    if spec.level >= 3 {
        let kind = if rng.random_bool(0.5) {
            LightKind::Distant {
                polar: uniform(&mut rng, 0.0, 60.0),
                azimuth: uniform(&mut rng, 0.0, 360.0),
            }
        } else {
            LightKind::CylinderArray {
                rows: rng.random_range(1..=4),
                cols: rng.random_range(1..=4),
                size: uniform(&mut rng, 0.5, 2.0),
                height: uniform(&mut rng, 1.5, 3.0),
            }
        };
        out.lights = vec![LightConfig {
            kind,
            intensity: uniform(&mut rng, 0.5, 1.5),
            color_temperature: uniform(&mut rng, 3000.0, 8000.0),
        }];
        for o in &mut out.objects {
            reflections(&mut rng, &mut o.material);
        }
        for m in [
            &mut out.scene.table_material,
            &mut out.scene.wall_material,
            &mut out.scene.ground_material,
        ]
        .into_iter()
        .flatten()
        {
            reflections(&mut rng, m);
        }
    }

    let violations = validate(&out);
    if !violations.is_empty() {
        return Err(AugmentError::Invalid(violations));
    }
    Ok(out)
}

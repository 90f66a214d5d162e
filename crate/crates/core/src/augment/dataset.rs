use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::randomize::{randomize_scene, RandomizationSpec};
use super::segment::{generate_augmented, with_poses, GenerateOptions, SegmentedDemo};
use super::split::Split;
use super::AugmentError;
use crate::backends::BackendKind;
use crate::config::ScenarioConfig;
use crate::env::Env;
use crate::retarget::Embodiment;
use crate::state::Trajectory;

#[derive(Clone, Debug)]
pub struct DatasetOptions {
    /// Number of samples to attempt.
    pub n: usize,
    pub seed: u64,
    pub generate: GenerateOptions,
    pub backend: BackendKind,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            n: 100,
            seed: 0,
            generate: GenerateOptions::default(),
            backend: BackendKind::Kin,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct AugmentReport {
    pub requested: usize,
    /// Accepted samples in sample order, states attached.
    pub accepted: Vec<Trajectory>,
    /// Sample index and rejection reason.
    pub rejected: Vec<(usize, String)>,
}

impl AugmentReport {
    pub fn acceptance_rate(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.accepted.len() as f64 / self.requested as f64
        }
    }
}

/// Attempts `opts.n` augmented demonstrations. Sample `i` picks its source
/// demo and object placement from (seed, i) alone, so a larger request
/// extends a smaller one and results do not depend on thread count.
pub fn augment_dataset(
    cfg: &ScenarioConfig,
    sources: &[SegmentedDemo],
    robot: &Embodiment,
    opts: &DatasetOptions,
) -> Result<AugmentReport, AugmentError> {
    if sources.is_empty() {
        return Ok(AugmentReport {
            requested: opts.n,
            ..Default::default()
        });
    }
    let spec = RandomizationSpec::new(0, opts.seed);
    let results: Vec<Result<Trajectory, AugmentError>> = (0..opts.n)
        .into_par_iter()
        .map_init(
            || Env::launch(cfg, 1, opts.backend),
            |env, i| {
                let env = env
                    .as_mut()
                    .map_err(|e| AugmentError::Env(clone_env_error(e)))?;
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
                rng.set_stream(i as u64);
                let src = &sources[rng.random_range(0..sources.len())];
                let scene = randomize_scene(cfg, &spec, Split::Train, i as u64)?;
                let moved: Vec<_> = cfg
                    .task
                    .spawn_regions
                    .iter()
                    .filter_map(|r| scene.objects.iter().find(|o| o.name == r.entity))
                    .map(|o| (o.name.clone(), o.base_pose))
                    .collect();
                let init = with_poses(&src.source.init_state, &moved);
                let mut t = generate_augmented(env, src, &init, robot, &opts.generate)?;
                t.extras.insert("augment_sample".into(), i.to_string());
                Ok(t)
            },
        )
        .collect();

    let mut report = AugmentReport {
        requested: opts.n,
        ..Default::default()
    };
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => report.accepted.push(t),
            Err(e) if e.is_rejection() => report.rejected.push((i, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

fn clone_env_error(e: &crate::env::EnvError) -> crate::env::EnvError {
    crate::env::EnvError::Backend(crate::backends::BackendError::Launch(e.to_string()))
}

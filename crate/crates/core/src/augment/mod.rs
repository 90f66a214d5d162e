//! Demonstration augmentation: subtask segmentation, object-centric
//! re-targeting of segments into new scenes, scene randomization levels and
//! train/test pool splits.

mod dataset;
mod demo;
mod pools;
mod randomize;
mod segment;
mod split;

pub use dataset::{augment_dataset, AugmentReport, DatasetOptions};
pub use demo::{scripted_pick_place, PickPlacePlan};
pub use pools::{Pools, LAYOUTS, WORKSPACE_CENTER};
pub use randomize::{randomize_scene, RandomizationSpec, SPAWN_GRID};
pub use segment::{generate_augmented, segment_demo, GenerateOptions, Segment, SegmentedDemo};
pub use split::{partition, split_pool, Split, MIN_POOL};

use crate::config::Violation;
use crate::env::EnvError;
use crate::retarget::RetargetError;

#[derive(Debug, thiserror::Error)]
pub enum AugmentError {
    #[error("pool of {len} items is too small to split (need at least {min})")]
    PoolTooSmall { len: usize, min: usize },
    #[error("the requested split of the pool is empty")]
    EmptyPartition,
    #[error("unknown split `{0}` (expected train or test)")]
    BadSplit(String),
    #[error("randomization level {0} is not one of 0..=3")]
    BadLevel(u8),
    #[error("subtask `{0}` never completes in the demonstration")]
    SegmentationFailed(String),
    #[error("IK failed in segment {segment}, step {step}: {source}")]
    IkUnreachable {
        segment: usize,
        step: usize,
        #[source]
        source: RetargetError,
    },
    #[error("generated demonstration did not satisfy the success checker")]
    CheckerFailed,
    #[error("scenario has no robot")]
    NoRobot,
    #[error("no entity `{0}` in the scenario")]
    UnknownEntity(String),
    #[error("randomized scenario is invalid: {0:?}")]
    Invalid(Vec<Violation>),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Retarget(#[from] RetargetError),
}

impl AugmentError {
    /// Whether a generated sample was rejected (as opposed to a setup error).
    pub fn is_rejection(&self) -> bool {
        matches!(
            self,
            AugmentError::IkUnreachable { .. } | AugmentError::CheckerFailed
        )
    }
}

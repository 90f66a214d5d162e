use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::AugmentError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl std::str::FromStr for Split {
    type Err = AugmentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(AugmentError::BadSplit(other.to_string())),
        }
    }
}

/// Smallest pool [`split_pool`] accepts.
pub const MIN_POOL: usize = 10;

/// Seeded shuffle, then the last `round(n / 10)` items form the test part.
pub fn split_pool<T: Clone>(items: &[T], seed: u64) -> Result<(Vec<T>, Vec<T>), AugmentError> {
    let n = items.len();
    if n < MIN_POOL {
        return Err(AugmentError::PoolTooSmall {
            len: n,
            min: MIN_POOL,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = (n as f64 * 0.1).round() as usize;
    let (tr, te) = order.split_at(n - test);
    Ok((
        tr.iter().map(|&i| items[i].clone()).collect(),
        te.iter().map(|&i| items[i].clone()).collect(),
    ))
}

/// The requested side of [`split_pool`].
pub fn partition<T: Clone>(items: &[T], seed: u64, split: Split) -> Result<Vec<T>, AugmentError> {
    let (train, test) = split_pool(items, seed)?;
    let part = match split {
        Split::Train => train,
        Split::Test => test,
    };
    if part.is_empty() {
        return Err(AugmentError::EmptyPartition);
    }
    Ok(part)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_sizes() {
        let sizes = |n: usize| {
            let v: Vec<usize> = (0..n).collect();
            let (a, b) = split_pool(&v, 3).unwrap();
            (a.len(), b.len())
        };
        assert_eq!(sizes(59), (53, 6));
        assert_eq!(sizes(300), (270, 30));
        assert_eq!(sizes(150), (135, 15));
        assert_eq!(sizes(10), (9, 1));
        assert!(matches!(
            split_pool(&[1, 2, 3], 0),
            Err(AugmentError::PoolTooSmall { len: 3, .. })
        ));
    }

    #[test]
    fn same_seed_same_split() {
        let v: Vec<u32> = (0..40).collect();
        assert_eq!(split_pool(&v, 9).unwrap(), split_pool(&v, 9).unwrap());
        assert_ne!(split_pool(&v, 9).unwrap(), split_pool(&v, 10).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_partition(n in 10usize..400, seed: u64) {
            let v: Vec<usize> = (0..n).collect();
            let (a, b) = split_pool(&v, seed).unwrap();
            proptest::prop_assert_eq!(b.len(), (n as f64 / 10.0).round() as usize);
            let mut all: Vec<usize> = a.iter().chain(&b).copied().collect();
            all.sort();
            proptest::prop_assert_eq!(all, v);
        }
    }
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::record::Dataset;

/// A deterministic train/validation partition of one dataset.
#[derive(Debug, Clone)]
pub struct SplitResult {
    pub train: Dataset,
    pub valid: Dataset,
    pub seed: u64,
    pub ratio: f64,
}

/// Shuffles record order with a seeded generator, then cuts at
/// `floor(n * ratio)`: the prefix trains, the remainder validates. The same
/// `(dataset, ratio, seed)` always produces the same partition.
pub fn split_dataset(d: &Dataset, ratio: f64, seed: u64) -> Result<SplitResult> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Argument(format!(
            "split ratio must be strictly between 0 and 1, got {ratio}"
        )));
    }
    let n = d.records.len();
    if n < 2 {
        return Err(Error::Argument(format!("cannot split a dataset of {n} record(s)")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64) * ratio).floor() as usize;
    let part = |ixs: &[usize], tag: &str| Dataset {
        records: ixs.iter().map(|&i| d.records[i].clone()).collect(),
        provenance: format!("{} [{tag} split, ratio {ratio}, seed {seed}]", d.provenance),
    };
    Ok(SplitResult {
        train: part(&order[..cut], "train"),
        valid: part(&order[cut..], "valid"),
        seed,
        ratio,
    })
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::objective::MIN_GROUP_FOR_OT;
use crate::data::CausalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub indices: Vec<usize>,
    /// Set when either group has fewer than two units; the transport term is skipped.
    pub ot_skip: bool,
}

/// Stratified epoch partition: both groups are shuffled (seeded by `seed`, `epoch`)
/// and dealt evenly across `ceil(N / batch_size)` batches.
pub fn make_batches(data: &CausalDataset, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Batch>> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut treated = data.treated_indices();
    let mut untreated = data.untreated_indices();
    if treated.is_empty() || untreated.is_empty() {
        return Err(Error::Stratification("both treatment groups must be present".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ epoch as u64);
    treated.shuffle(&mut rng);
    untreated.shuffle(&mut rng);

    let count = data.len().div_ceil(batch_size);
    let cut = |len: usize, b: usize| b * len / count;
    Ok((0..count)
        .map(|b| {
            let t = &treated[cut(treated.len(), b)..cut(treated.len(), b + 1)];
            let c = &untreated[cut(untreated.len(), b)..cut(untreated.len(), b + 1)];
            Batch {
                indices: t.iter().chain(c).copied().collect(),
                ot_skip: t.len() < MIN_GROUP_FOR_OT || c.len() < MIN_GROUP_FOR_OT,
            }
        })
        .collect())
}

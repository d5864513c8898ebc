use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CausalDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            valid: 0.15,
            test: 0.15,
        }
    }
}

impl SplitRatios {
    fn validate(&self) -> Result<()> {
        let all = [self.train, self.valid, self.test];
        if all.iter().any(|r| !(*r > 0.0)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must be positive and sum to 1: {all:?}")));
        }
        Ok(())
    }
}

/// Sorted row indices of each part.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified partition. Part sizes are fixed from the whole sample, then each
/// part's treated count is rounded from the global treated fraction, so every
/// part is within one unit of that fraction.
pub fn split_indices(data: &CausalDataset, ratios: SplitRatios, seed: u64) -> Result<SplitIndices> {
    ratios.validate()?;
    let n = data.len();
    let p = data.n_treated() as f64 / n as f64;
    let n_valid = (ratios.valid * n as f64).round() as usize;
    let n_test = (ratios.test * n as f64).round() as usize;
    let treated_valid = (p * n_valid as f64).round() as usize;
    let treated_test = (p * n_test as f64).round() as usize;
    let counts = [
        (data.treated_indices(), treated_valid, treated_test),
        (data.untreated_indices(), n_valid - treated_valid, n_test - treated_test),
    ];

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5b11_7000);
    let mut out = SplitIndices {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
    };
    for (mut group, v, t) in counts {
        if v == 0 || t == 0 || v + t >= group.len() {
            return Err(Error::Split(format!(
                "a treatment group of {} units cannot fill all three splits",
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        out.valid.extend_from_slice(&group[..v]);
        out.test.extend_from_slice(&group[v..v + t]);
        out.train.extend_from_slice(&group[v + t..]);
    }
    out.train.sort_unstable();
    out.valid.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

pub fn split_dataset(
    data: &CausalDataset,
    ratios: SplitRatios,
    seed: u64,
) -> Result<(CausalDataset, CausalDataset, CausalDataset)> {
    let idx = split_indices(data, ratios, seed)?;
    Ok((data.subset(&idx.train)?, data.subset(&idx.valid)?, data.subset(&idx.test)?))
}

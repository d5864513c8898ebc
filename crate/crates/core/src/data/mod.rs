//! Causal datasets: in-memory representation, synthetic generator, CSV I/O and
//! stratified splitting.

mod csv_io;
mod split;
mod synthetic;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

pub use csv_io::{load_dataset_csv, read_dataset_csv, save_dataset_csv, write_dataset_csv};
pub use split::{split_dataset, split_indices, SplitIndices, SplitRatios};
pub use synthetic::{generate_synthetic, selection_shift, GenSpec};

/// Observational sample with optional noiseless potential outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalDataset {
    pub x: Array2<f64>,
    pub t: Vec<bool>,
    pub y: Array1<f64>,
    pub mu0: Option<Array1<f64>>,
    pub mu1: Option<Array1<f64>>,
    /// `mu1 - mu0` when both are present.
    pub tau: Option<Array1<f64>>,
}

impl CausalDataset {
    /// Builds and validates a dataset, deriving `tau` from the potential outcomes.
    pub fn new(
        x: Array2<f64>,
        t: Vec<bool>,
        y: Array1<f64>,
        mu0: Option<Array1<f64>>,
        mu1: Option<Array1<f64>>,
    ) -> Result<Self> {
        let n = x.nrows();
        if t.len() != n || y.len() != n {
            return Err(Error::Shape(format!(
                "covariates have {n} rows but t has {} and y has {}",
                t.len(),
                y.len()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Validation("dataset needs at least one covariate".into()));
        }
        for mu in [&mu0, &mu1].into_iter().flatten() {
            if mu.len() != n {
                return Err(Error::Shape(format!("potential outcome has {} rows, expected {n}", mu.len())));
            }
        }
        if mu0.is_some() != mu1.is_some() {
            return Err(Error::Validation("mu0 and mu1 must be provided together".into()));
        }
        let finite = x.iter().chain(y.iter()).chain(mu0.iter().flatten()).chain(mu1.iter().flatten());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("dataset contains non-finite values".into()));
        }
        let treated = t.iter().filter(|v| **v).count();
        if treated == 0 || treated == n {
            return Err(Error::Validation(format!(
                "both treatment groups must be non-empty ({treated} of {n} treated)"
            )));
        }
        let tau = match (&mu0, &mu1) {
            (Some(m0), Some(m1)) => Some(m1 - m0),
            _ => None,
        };
        Ok(Self { x, t, y, mu0, mu1, tau })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_treated(&self) -> usize {
        self.t.iter().filter(|v| **v).count()
    }

    pub fn treated_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.t[i]).collect()
    }

    pub fn untreated_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.t[i]).collect()
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let pick = |v: &Array1<f64>| v.select(Axis(0), idx);
        Self::new(
            self.x.select(Axis(0), idx),
            idx.iter().map(|&i| self.t[i]).collect(),
            pick(&self.y),
            self.mu0.as_ref().map(pick),
            self.mu1.as_ref().map(pick),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn tau_is_derived() {
        let d = CausalDataset::new(
            array![[0.0], [1.0]],
            vec![true, false],
            array![1.0, 2.0],
            Some(array![0.0, 1.0]),
            Some(array![2.0, 4.0]),
        )
        .unwrap();
        assert_eq!(d.tau.unwrap(), array![2.0, 3.0]);
    }

    #[test]
    fn single_group_rejected() {
        let err = CausalDataset::new(array![[0.0], [1.0]], vec![true, true], array![1.0, 2.0], None, None)
            .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }
}

//! Non-neural reference estimators.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::CausalDataset;
use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Linear S-learner: `y ~ intercept + w.x + w_t * t`; the intercept is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub treatment_coef: f64,
    pub intercept: f64,
    pub ridge: f64,
}

impl RidgeModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>, treated: bool) -> Result<Array1<f64>> {
        if x.ncols() != self.weights.len() {
            return Err(Error::Shape(format!(
                "query has {} covariates, model expects {}",
                x.ncols(),
                self.weights.len()
            )));
        }
        let w = ArrayView1::from(&self.weights);
        let shift = self.intercept + if treated { self.treatment_coef } else { 0.0 };
        Ok(x.dot(&w) + shift)
    }

    /// Constant: the treatment coefficient for every query.
    pub fn predict_cate(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(&self.predict(x, true)? - &self.predict(x, false)?)
    }
}

pub fn ols_slearner(data: &CausalDataset, ridge: f64) -> Result<RidgeModel> {
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Config(format!("ridge must be finite and nonnegative, got {ridge}")));
    }
    let (n, d) = (data.len(), data.dim());
    let p = d + 2;
    let mut design = Array2::zeros((n, p));
    design.column_mut(0).fill(1.0);
    design.slice_mut(s![.., 1..=d]).assign(&data.x);
    for i in 0..n {
        design[(i, d + 1)] = if data.t[i] { 1.0 } else { 0.0 };
    }
    let mut gram = design.t().dot(&design);
    for k in 1..p {
        gram[(k, k)] += ridge;
    }
    let rhs = design.t().dot(&data.y);
    let coef = solve_symmetric(gram, rhs)?;
    Ok(RidgeModel {
        weights: coef.slice(s![1..=d]).to_vec(),
        treatment_coef: coef[d + 1],
        intercept: coef[0],
        ridge,
    })
}

/// Gaussian elimination with partial pivoting.
fn solve_symmetric(mut a: Array2<f64>, mut b: Array1<f64>) -> Result<Array1<f64>> {
    let p = b.len();
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .expect("non-empty pivot range");
        if a[(pivot, col)].abs() <= 1e-12 * scale {
            return Err(Error::LinearAlgebra(format!(
                "normal equations are singular at column {col}; use a positive ridge"
            )));
        }
        if pivot != col {
            for k in 0..p {
                a.swap((pivot, k), (col, k));
            }
            b.swap(pivot, col);
        }
        for row in col + 1..p {
            let factor = a[(row, col)] / a[(col, col)];
            if factor == 0.0 {
                continue;
            }
            for k in col..p {
                a[(row, k)] -= factor * a[(col, k)];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = Array1::zeros(p);
    for row in (0..p).rev() {
        let tail: f64 = (row + 1..p).map(|k| a[(row, k)] * x[k]).sum();
        x[row] = (b[row] - tail) / a[(row, row)];
    }
    Ok(x)
}

/// `tau(x)` = mean outcome of the `k` nearest treated units minus that of the
/// `k` nearest untreated units. Distance ties go to the lower row index.
pub fn knn_cate(data: &CausalDataset, k: usize, query: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let treated = data.treated_indices();
    let untreated = data.untreated_indices();
    if k == 0 || k > treated.len() || k > untreated.len() {
        return Err(Error::Config(format!(
            "k = {k} must be in 1..={}",
            treated.len().min(untreated.len())
        )));
    }
    if query.ncols() != data.dim() {
        return Err(Error::Shape(format!(
            "query has {} covariates, data has {}",
            query.ncols(),
            data.dim()
        )));
    }
    let neighbour_mean = |q: ArrayView1<'_, f64>, group: &[usize]| {
        let mut dist: Vec<(f64, usize)> = group
            .iter()
            .map(|&i| {
                let d2: f64 = data.x.row(i).iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist[..k].iter().map(|&(_, i)| data.y[i]).sum::<f64>() / k as f64
    };
    Ok(query
        .outer_iter()
        .map(|q| neighbour_mean(q, &treated) - neighbour_mean(q, &untreated))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_data(n: usize) -> (CausalDataset, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = vec![0.5, -1.5, 2.0];
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
        let t: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let y = Array1::from_iter((0..n).map(|i| {
            x.row(i).dot(&ArrayView1::from(&w)) + if t[i] { 2.0 } else { 0.0 } + 0.25
        }));
        (CausalDataset::new(x, t, y, None, None).unwrap(), w)
    }

    #[test]
    fn recovers_noiseless_linear_model() {
        let (data, w) = linear_data(60);
        let m = ols_slearner(&data, 1e-10).unwrap();
        assert!((m.treatment_coef - 2.0).abs() < 1e-8 * 2.0);
        for (a, b) in m.weights.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
        assert!((m.intercept - 0.25).abs() < 1e-8);
        let tau = m.predict_cate(data.x.view()).unwrap();
        assert!(tau.iter().all(|v| (v - m.treatment_coef).abs() < 1e-12));
    }

    #[test]
    fn heavy_ridge_shrinks_to_zero() {
        let (data, _) = linear_data(60);
        let m = ols_slearner(&data, 1e12).unwrap();
        assert!(m.treatment_coef.abs() < 1e-6);
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
    }

    #[test]
    fn singular_design_without_ridge() {
        let x = array![[1.0], [1.0], [1.0], [1.0]];
        let data = CausalDataset::new(x, vec![true, false, true, false], array![1.0, 2.0, 3.0, 4.0], None, None)
            .unwrap();
        assert!(matches!(ols_slearner(&data, 0.0), Err(Error::LinearAlgebra(_))));
        assert!(ols_slearner(&data, 1e-3).is_ok());
    }

    fn knn_toy() -> CausalDataset {
        CausalDataset::new(
            array![[0.0], [10.0], [0.0], [10.0]],
            vec![true, true, false, false],
            array![1.0, 5.0, 0.0, 3.0],
            None,
            None,
        )
        .unwrap()
    }

    #[test]
    fn knn_hand_lookup() {
        let tau = knn_cate(&knn_toy(), 1, array![[1.0]].view()).unwrap();
        assert_eq!(tau[0], 1.0);
        // query on a treated point: its own outcome enters.
        let tau = knn_cate(&knn_toy(), 1, array![[10.0]].view()).unwrap();
        assert_eq!(tau[0], 5.0 - 3.0);
    }

    #[test]
    fn knn_full_k_is_naive_difference() {
        let tau = knn_cate(&knn_toy(), 2, array![[-4.0], [3.0], [40.0]].view()).unwrap();
        assert!(tau.iter().all(|v| (v - (3.0 - 1.5)).abs() < 1e-12));
    }

    #[test]
    fn knn_rejects_large_k() {
        assert!(matches!(knn_cate(&knn_toy(), 3, array![[0.0]].view()), Err(Error::Config(_))));
    }

    #[test]
    fn knn_permutation_invariant_without_ties() {
        let (data, _) = linear_data(30);
        let q = array![[0.1, 0.2, -0.3], [1.0, -1.0, 0.5]];
        let base = knn_cate(&data, 3, q.view()).unwrap();
        let perm: Vec<usize> = (0..30).rev().collect();
        let shuffled = data.subset(&perm).unwrap();
        let again = knn_cate(&shuffled, 3, q.view()).unwrap();
        for (a, b) in base.iter().zip(again.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

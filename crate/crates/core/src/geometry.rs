//! Ground costs between treated and untreated supports.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::ot::CostMatrix;
use crate::scalar::Scalar;

/// Factual outcomes of both groups and each group's counterfactual predictions.
#[derive(Debug, Clone, Copy)]
pub struct PairedOutcomes<'a, T> {
    pub y_treated: ArrayView1<'a, T>,
    pub y_untreated: ArrayView1<'a, T>,
    /// Untreated-head predictions for the treated units.
    pub yhat_cf_treated: ArrayView1<'a, T>,
    /// Treated-head predictions for the untreated units.
    pub yhat_cf_untreated: ArrayView1<'a, T>,
}

impl<T: Scalar> PairedOutcomes<'_, T> {
    fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.y_treated.len() != n || self.yhat_cf_treated.len() != n {
            return Err(Error::Shape(format!(
                "treated outcome vectors have lengths ({}, {}), expected {n}",
                self.y_treated.len(),
                self.yhat_cf_treated.len()
            )));
        }
        if self.y_untreated.len() != m || self.yhat_cf_untreated.len() != m {
            return Err(Error::Shape(format!(
                "untreated outcome vectors have lengths ({}, {}), expected {m}",
                self.y_untreated.len(),
                self.yhat_cf_untreated.len()
            )));
        }
        let all = [self.y_treated, self.y_untreated, self.yhat_cf_treated, self.yhat_cf_untreated];
        if all.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Input("outcome vectors must be finite".into()));
        }
        Ok(())
    }
}

/// `D_ij = sum_k (A_ik - B_jk)^2`.
pub fn pairwise_sqeuclidean<T: Scalar>(
    a: ArrayView2<'_, T>,
    b: ArrayView2<'_, T>,
) -> Result<CostMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "point dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let d = Array2::from_shape_fn((a.nrows(), b.nrows()), |(i, j)| {
        a.row(i)
            .iter()
            .zip(b.row(j).iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum::<T>()
    });
    CostMatrix::new(d)
}

/// The outcome gap added to the representation cost, before scaling by `gamma`:
/// `(yhat_cf_treated_i - y_untreated_j)^2 + (yhat_cf_untreated_j - y_treated_i)^2`.
pub fn outcome_gap<T: Scalar>(outcomes: &PairedOutcomes<'_, T>) -> Array2<T> {
    let (n, m) = (outcomes.y_treated.len(), outcomes.y_untreated.len());
    Array2::from_shape_fn((n, m), |(i, j)| {
        let a = outcomes.yhat_cf_treated[i] - outcomes.y_untreated[j];
        let b = outcomes.yhat_cf_untreated[j] - outcomes.y_treated[i];
        a * a + b * b
    })
}

/// Representation cost calibrated by proximity of factual and predicted
/// counterfactual outcomes: `D + gamma * outcome_gap`.
pub fn pfor_cost_matrix<T: Scalar>(
    repr_cost: &CostMatrix<T>,
    outcomes: &PairedOutcomes<'_, T>,
    gamma: T,
) -> Result<CostMatrix<T>> {
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(Error::Config(format!("gamma must be finite and nonnegative, got {gamma}")));
    }
    let (n, m) = repr_cost.shape();
    outcomes.validate(n, m)?;
    if gamma == T::zero() {
        return Ok(repr_cost.clone());
    }
    let gap = outcome_gap(outcomes);
    CostMatrix::new(&repr_cost.view() + &gap.mapv(|g| g * gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_distances() {
        let a = array![[0.0], [1.0]];
        let d = pairwise_sqeuclidean(a.view(), a.view()).unwrap();
        assert_eq!(d.view(), array![[0.0, 1.0], [1.0, 0.0]].view());
    }

    #[test]
    fn identical_points_and_pythagoras() {
        let d = pairwise_sqeuclidean(array![[1.0, 2.0]].view(), array![[1.0, 2.0]].view()).unwrap();
        assert_eq!(d.view(), array![[0.0]].view());
        let d = pairwise_sqeuclidean(array![[0.0, 0.0]].view(), array![[3.0, 4.0]].view()).unwrap();
        assert_eq!(d.view(), array![[25.0]].view());
    }

    #[test]
    fn dimension_mismatch() {
        let err = pairwise_sqeuclidean(array![[0.0]].view(), array![[0.0, 1.0]].view()).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn hand_evaluated_pfor_entry() {
        let d = CostMatrix::new(array![[1.0]]).unwrap();
        let (yt, yu, ct, cu) = (array![2.0], array![1.0], array![1.5], array![2.5]);
        let o = PairedOutcomes {
            y_treated: yt.view(),
            y_untreated: yu.view(),
            yhat_cf_treated: ct.view(),
            yhat_cf_untreated: cu.view(),
        };
        let out = pfor_cost_matrix(&d, &o, 0.5).unwrap();
        assert!((out.view()[(0, 0)] - 1.25f64).abs() < 1e-15);
        assert_eq!(pfor_cost_matrix(&d, &o, 0.0).unwrap(), d);
        assert!(matches!(pfor_cost_matrix(&d, &o, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn length_mismatch() {
        let d = CostMatrix::new(array![[1.0, 2.0]]).unwrap();
        let (yt, yu) = (array![2.0], array![1.0]);
        let o = PairedOutcomes {
            y_treated: yt.view(),
            y_untreated: yu.view(),
            yhat_cf_treated: yt.view(),
            yhat_cf_untreated: yu.view(),
        };
        assert!(matches!(pfor_cost_matrix(&d, &o, 1.0), Err(Error::Shape(_))));
    }

    fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0..5.0f64, len)
    }

    proptest! {
        #[test]
        fn pfor_is_monotone_and_linear_in_gamma(
            n in 1usize..5, m in 1usize..5, gamma in 0.0..10.0f64, seed in vec_strategy(40)
        ) {
            let take = |k: usize, off: usize| Array1::from_iter((0..k).map(|i| seed[(off + i) % seed.len()]));
            let (yt, ct) = (take(n, 0), take(n, 7));
            let (yu, cu) = (take(m, 13), take(m, 21));
            let d = CostMatrix::new(Array2::from_shape_fn((n, m), |(i, j)| seed[(i * 5 + j) % 40].abs())).unwrap();
            let o = PairedOutcomes {
                y_treated: yt.view(), y_untreated: yu.view(),
                yhat_cf_treated: ct.view(), yhat_cf_untreated: cu.view(),
            };
            let one = pfor_cost_matrix(&d, &o, gamma).unwrap();
            let two = pfor_cost_matrix(&d, &o, 2.0 * gamma).unwrap();
            for ((x, y), base) in one.view().iter().zip(two.view().iter()).zip(d.view().iter()) {
                prop_assert!(*x >= *base);
                prop_assert!(((y - base) - 2.0 * (x - base)).abs() <= 1e-9 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn pfor_vanishes_when_outcomes_agree(v in -3.0..3.0f64, gamma in 0.0..10.0f64) {
            // yhat_cf_treated_i = y_untreated_j and yhat_cf_untreated_j = y_treated_i for every pair.
            let (yt, yu) = (array![v, v], array![-v]);
            let (ct, cu) = (array![-v, -v], array![v]);
            let o = PairedOutcomes {
                y_treated: yt.view(), y_untreated: yu.view(),
                yhat_cf_treated: ct.view(), yhat_cf_untreated: cu.view(),
            };
            let d = CostMatrix::new(array![[0.3], [1.1]]).unwrap();
            prop_assert_eq!(pfor_cost_matrix(&d, &o, gamma).unwrap(), d);
        }
    }
}

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Weighted point cloud `sum_i mass_i * delta(points_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    points: Array2<T>,
    mass: Array1<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(points: Array2<T>, mass: Array1<T>) -> Result<Self> {
        if points.nrows() != mass.len() {
            return Err(Error::Shape(format!(
                "{} points but {} mass entries",
                points.nrows(),
                mass.len()
            )));
        }
        validate_mass(mass.view(), "mass")?;
        Ok(Self { points, mass })
    }

    /// Uniform weights `1/n` over the rows of `points`.
    pub fn uniform(points: Array2<T>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::Infeasible("uniform measure over zero points".into()));
        }
        let w = T::one() / T::from_usize_lossy(n);
        Self::new(points, Array1::from_elem(n, w))
    }

    pub fn points(&self) -> ArrayView2<'_, T> {
        self.points.view()
    }

    pub fn mass(&self) -> ArrayView1<'_, T> {
        self.mass.view()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.mass.sum()
    }
}

/// Nonnegative entries, at least one strictly positive.
pub(crate) fn validate_mass<T: Scalar>(mass: ArrayView1<'_, T>, name: &str) -> Result<()> {
    if let Some(bad) = mass.iter().find(|w| !w.is_finite() || **w < T::zero()) {
        return Err(Error::Infeasible(format!("{name} has invalid entry {bad}")));
    }
    if !mass.iter().any(|w| *w > T::zero()) {
        return Err(Error::Infeasible(format!("{name} carries no mass")));
    }
    Ok(())
}

/// Pairwise ground cost between two supports; entries finite and nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T>(Array2<T>);

impl<T: Scalar> CostMatrix<T> {
    pub fn new(entries: Array2<T>) -> Result<Self> {
        if let Some(bad) = entries.iter().find(|c| !c.is_finite() || **c < T::zero()) {
            return Err(Error::Input(format!("cost entry {bad} is not finite and nonnegative")));
        }
        Ok(Self(entries))
    }

    pub fn view(&self) -> ArrayView2<'_, T> {
        self.0.view()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn transposed(&self) -> Self {
        Self(self.0.t().to_owned())
    }

    pub fn into_inner(self) -> Array2<T> {
        self.0
    }
}

/// Solved coupling with its achieved cost and recomputed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan<T> {
    pub coupling: Array2<T>,
    /// `<D, coupling>`.
    pub cost: T,
    pub row_marginal: Array1<T>,
    pub col_marginal: Array1<T>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl<T: Scalar> TransportPlan<T> {
    pub(crate) fn from_coupling(
        coupling: Array2<T>,
        cost: &CostMatrix<T>,
        iterations_used: usize,
        converged: bool,
    ) -> Result<Self> {
        let (c, rows, cols) = plan_cost_and_marginals(coupling.view(), cost)?;
        Ok(Self {
            coupling,
            cost: c,
            row_marginal: rows,
            col_marginal: cols,
            iterations_used,
            converged,
        })
    }

    /// L1 distance between the row marginal and `a`.
    pub fn row_violation(&self, a: ArrayView1<'_, T>) -> T {
        l1(self.row_marginal.view(), a)
    }

    pub fn col_violation(&self, b: ArrayView1<'_, T>) -> T {
        l1(self.col_marginal.view(), b)
    }
}

fn l1<T: Scalar>(x: ArrayView1<'_, T>, y: ArrayView1<'_, T>) -> T {
    x.iter().zip(y.iter()).map(|(p, q)| (*p - *q).abs()).sum()
}

/// Recompute `<D, coupling>` and both marginals of a coupling.
pub fn plan_cost_and_marginals<T: Scalar>(
    coupling: ArrayView2<'_, T>,
    cost: &CostMatrix<T>,
) -> Result<(T, Array1<T>, Array1<T>)> {
    if coupling.dim() != cost.shape() {
        return Err(Error::Shape(format!(
            "coupling is {:?} but cost matrix is {:?}",
            coupling.dim(),
            cost.shape()
        )));
    }
    let (n, m) = coupling.dim();
    let mut rows = Array1::zeros(n);
    let mut cols = Array1::zeros(m);
    let mut total = T::zero();
    for ((i, j), &p) in coupling.indexed_iter() {
        rows[i] += p;
        cols[j] += p;
        total += p * cost.view()[(i, j)];
    }
    Ok((total, rows, cols))
}

/// Marginal relaxation strength: finite `kappa > 0`, or hard marginal constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation<T> {
    Balanced,
    Kl(T),
}

impl<T: Scalar> Relaxation<T> {
    /// `inf` maps to the balanced sentinel.
    pub fn from_value(kappa: T) -> Self {
        if kappa.is_infinite() {
            Relaxation::Balanced
        } else {
            Relaxation::Kl(kappa)
        }
    }

    pub fn value(&self) -> T {
        match self {
            Relaxation::Balanced => T::infinity(),
            Relaxation::Kl(k) => *k,
        }
    }

    pub fn is_balanced(&self) -> bool {
        matches!(self, Relaxation::Balanced)
    }
}

impl<T: Scalar> fmt::Display for Relaxation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relaxation::Balanced => f.write_str("inf"),
            Relaxation::Kl(k) => write!(f, "{k}"),
        }
    }
}

// JSON has no infinity, so the sentinel travels as the string "inf".
impl<T: Scalar + Serialize> Serialize for Relaxation<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Relaxation::Balanced => s.serialize_str("inf"),
            Relaxation::Kl(k) => k.serialize(s),
        }
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Relaxation<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct RelaxVisitor<T>(std::marker::PhantomData<T>);

        impl<T: Scalar> Visitor<'_> for RelaxVisitor<T> {
            type Value = Relaxation<T>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Self::Value, E> {
                Ok(Relaxation::from_value(T::lit(v)))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Self::Value, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "balanced" => Ok(Relaxation::Balanced),
                    other => other
                        .parse::<f64>()
                        .map(|x| Relaxation::from_value(T::lit(x)))
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }

        d.deserialize_any(RelaxVisitor(std::marker::PhantomData))
    }
}

impl<T: Scalar> std::str::FromStr for Relaxation<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "balanced" => Ok(Relaxation::Balanced),
            other => other
                .parse::<f64>()
                .map(|x| Relaxation::from_value(T::lit(x)))
                .map_err(|_| Error::Config(format!("kappa `{s}` is neither a number nor `inf`"))),
        }
    }
}

/// Solver knobs shared by the balanced and unbalanced iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct SolverConfig<T> {
    pub epsilon: T,
    pub kappa: Relaxation<T>,
    pub max_iters: usize,
    /// Marginal L1 violation (balanced) or max potential change (unbalanced).
    pub tol: T,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            epsilon: T::lit(0.1),
            kappa: Relaxation::Balanced,
            max_iters: 1000,
            tol: T::lit(1e-6),
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn balanced(epsilon: T) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn unbalanced(epsilon: T, kappa: T) -> Self {
        Self {
            epsilon,
            kappa: Relaxation::from_value(kappa),
            ..Self::default()
        }
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) || !self.epsilon.is_finite() {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Relaxation::Kl(k) = self.kappa {
            if !(k > T::zero()) {
                return Err(Error::Config(format!("kappa must be positive, got {k}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

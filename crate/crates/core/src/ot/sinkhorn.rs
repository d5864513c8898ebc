//! Entropic transport by matrix scaling, carried out on dual potentials.
//!
//! Scalings `u = exp(f/eps)`, `v = exp(g/eps)` overflow once `eps` is small
//! relative to the cost range, so both solvers update `f` and `g` directly
//! with log-sum-exp reductions over `(g_j - D_ij) / eps`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::types::{validate_mass, CostMatrix, Relaxation, SolverConfig, TransportPlan};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, Scalar};

const BALANCE_TOL: f64 = 1e-6;
const STAGE_TOL: f64 = 1e-3;

/// Balanced entropic transport between masses `a` and `b` (equal totals).
pub fn sinkhorn_plan<T: Scalar>(
    a: ArrayView1<'_, T>,
    b: ArrayView1<'_, T>,
    cost: &CostMatrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<TransportPlan<T>> {
    cfg.validate()?;
    check_shapes(a, b, cost)?;
    validate_mass(a, "a")?;
    validate_mass(b, "b")?;
    let (sa, sb) = (a.sum(), b.sum());
    if (sa - sb).abs() > T::lit(BALANCE_TOL) {
        return Err(Error::Infeasible(format!("total masses differ: {sa} vs {sb}")));
    }

    let eps = cfg.epsilon;
    let d = cost.view();
    let log_a = a.mapv(T::ln);
    let log_b = b.mapv(T::ln);
    let (n, m) = cost.shape();
    let mut state = Potentials {
        f: Array1::<T>::zeros(n),
        g: Array1::<T>::zeros(m),
        scratch: Array1::<T>::zeros(n),
    };

    // Warm start through a geometric schedule of larger epsilons; the final
    // stage at the requested epsilon alone decides convergence.
    let range = d.iter().fold(T::zero(), |acc, &c| acc.max(c));
    let stage_tol = cfg.tol.max(T::lit(STAGE_TOL) * sa);
    let mut iters = 0;
    let mut stage_eps = range;
    while stage_eps > eps * T::lit(2.0) && iters < cfg.max_iters {
        let (used, _) = balanced_stage(d, a, &log_a, &log_b, stage_eps, stage_tol, cfg.max_iters - iters, iters, &mut state)?;
        iters += used;
        stage_eps = stage_eps * T::lit(0.5);
    }
    let (used, converged) = balanced_stage(d, a, &log_a, &log_b, eps, cfg.tol, cfg.max_iters - iters, iters, &mut state)?;
    iters += used;
    let Potentials { f, g, .. } = state;

    let coupling = assemble(d, &f, &g, eps, iters)?;
    TransportPlan::from_coupling(coupling, cost, iters, converged)
}

struct Potentials<T> {
    f: Array1<T>,
    g: Array1<T>,
    scratch: Array1<T>,
}

/// Alternating updates at one epsilon until the row violation drops to `tol`
/// or `budget` iterations are spent. Returns (iterations, converged).
#[allow(clippy::too_many_arguments)]
fn balanced_stage<T: Scalar>(
    d: ArrayView2<'_, T>,
    a: ArrayView1<'_, T>,
    log_a: &Array1<T>,
    log_b: &Array1<T>,
    eps: T,
    tol: T,
    budget: usize,
    offset: usize,
    st: &mut Potentials<T>,
) -> Result<(usize, bool)> {
    let n = a.len();
    for it in 1..=budget {
        update_rows(d, &st.g, log_a, eps, T::one(), &mut st.scratch);
        check_finite(&st.scratch, log_a, offset + it, "row potential")?;
        // With g fixed, row i currently carries a_i * exp((f_i - f_next_i) / eps).
        let violation: T = (0..n)
            .filter(|&i| a[i] > T::zero())
            .map(|i| (a[i] * ((st.f[i] - st.scratch[i]) / eps).exp() - a[i]).abs())
            .sum();
        if it > 1 && violation <= tol {
            return Ok((it, true));
        }
        std::mem::swap(&mut st.f, &mut st.scratch);
        update_cols(d, &st.f, log_b, eps, T::one(), &mut st.g);
        check_finite(&st.g, log_b, offset + it, "column potential")?;
    }
    Ok((budget, false))
}

/// Entropic transport with KL-relaxed marginals of strength `cfg.kappa`.
///
/// The balanced sentinel dispatches to [`sinkhorn_plan`]. Each iteration is one
/// row update followed by one column update, each shrunk by `kappa / (eps + kappa)`.
pub fn unbalanced_sinkhorn_plan<T: Scalar>(
    a: ArrayView1<'_, T>,
    b: ArrayView1<'_, T>,
    cost: &CostMatrix<T>,
    cfg: &SolverConfig<T>,
) -> Result<TransportPlan<T>> {
    let kappa = match cfg.kappa {
        Relaxation::Balanced => return sinkhorn_plan(a, b, cost, cfg),
        Relaxation::Kl(k) => k,
    };
    cfg.validate()?;
    check_shapes(a, b, cost)?;
    validate_mass(a, "a")?;
    validate_mass(b, "b")?;

    let eps = cfg.epsilon;
    let shrink = kappa / (eps + kappa);
    let d = cost.view();
    let log_a = a.mapv(T::ln);
    let log_b = b.mapv(T::ln);
    let (n, m) = cost.shape();
    let mut f = Array1::<T>::zeros(n);
    let mut g = Array1::<T>::zeros(m);
    let mut f_next = Array1::<T>::zeros(n);
    let mut g_next = Array1::<T>::zeros(m);

    let mut converged = false;
    let mut iters = 0;
    for it in 1..=cfg.max_iters {
        iters = it;
        update_rows(d, &g, &log_a, eps, shrink, &mut f_next);
        check_finite(&f_next, &log_a, it, "row potential")?;
        update_cols(d, &f_next, &log_b, eps, shrink, &mut g_next);
        check_finite(&g_next, &log_b, it, "column potential")?;
        let change = max_change(&f, &f_next).max(max_change(&g, &g_next));
        std::mem::swap(&mut f, &mut f_next);
        std::mem::swap(&mut g, &mut g_next);
        if change <= cfg.tol {
            converged = true;
            break;
        }
    }

    let coupling = assemble(d, &f, &g, eps, iters)?;
    TransportPlan::from_coupling(coupling, cost, iters, converged)
}

fn check_shapes<T: Scalar>(
    a: ArrayView1<'_, T>,
    b: ArrayView1<'_, T>,
    cost: &CostMatrix<T>,
) -> Result<()> {
    let (n, m) = cost.shape();
    if a.len() != n || b.len() != m {
        return Err(Error::Shape(format!(
            "masses have lengths ({}, {}) but cost matrix is {n}x{m}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// `out_i = shrink * eps * (log a_i - LSE_j((g_j - D_ij) / eps))`.
fn update_rows<T: Scalar>(
    d: ArrayView2<'_, T>,
    g: &Array1<T>,
    log_a: &Array1<T>,
    eps: T,
    shrink: T,
    out: &mut Array1<T>,
) {
    for (i, row) in d.outer_iter().enumerate() {
        let lse = log_sum_exp(row.iter().zip(g.iter()).map(|(&c, &gj)| (gj - c) / eps));
        out[i] = shrink * eps * (log_a[i] - lse);
    }
}

fn update_cols<T: Scalar>(
    d: ArrayView2<'_, T>,
    f: &Array1<T>,
    log_b: &Array1<T>,
    eps: T,
    shrink: T,
    out: &mut Array1<T>,
) {
    for (j, col) in d.columns().into_iter().enumerate() {
        let lse = log_sum_exp(col.iter().zip(f.iter()).map(|(&c, &fi)| (fi - c) / eps));
        out[j] = shrink * eps * (log_b[j] - lse);
    }
}

/// `-inf` is legitimate only where the target mass is zero.
fn check_finite<T: Scalar>(pot: &Array1<T>, log_mass: &Array1<T>, it: usize, what: &str) -> Result<()> {
    for (p, lm) in pot.iter().zip(log_mass.iter()) {
        let ok = p.is_finite() || (*p == T::neg_infinity() && *lm == T::neg_infinity());
        if !ok {
            return Err(Error::numerical(it, format!("{what} became {p}")));
        }
    }
    Ok(())
}

fn max_change<T: Scalar>(old: &Array1<T>, new: &Array1<T>) -> T {
    old.iter()
        .zip(new.iter())
        .filter(|(o, n)| o.is_finite() || n.is_finite())
        .map(|(&o, &n)| (n - o).abs())
        .fold(T::zero(), T::max)
}

fn assemble<T: Scalar>(
    d: ArrayView2<'_, T>,
    f: &Array1<T>,
    g: &Array1<T>,
    eps: T,
    iters: usize,
) -> Result<Array2<T>> {
    let coupling = Array2::from_shape_fn(d.dim(), |(i, j)| ((f[i] + g[j] - d[(i, j)]) / eps).exp());
    if coupling.iter().any(|p| !p.is_finite()) {
        return Err(Error::numerical(iters, "coupling has non-finite entries"));
    }
    Ok(coupling)
}

//! Mini-batch objective: factual risk plus weighted transport discrepancy.
//!
//! The plan is solved on a detached copy of the calibrated cost and then held
//! constant, so the discrepancy gradient is `<dD, plan>` only.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::config::TrainConfig;
use crate::error::{Error, Result};
use crate::geometry::{pairwise_sqeuclidean, pfor_cost_matrix, PairedOutcomes};
use crate::nn::{tarnet_forward, ForwardPass, TarnetParams};
use crate::ot::{unbalanced_sinkhorn_plan, CostMatrix, SolverConfig, TransportPlan};

/// Groups smaller than this skip the transport term.
pub const MIN_GROUP_FOR_OT: usize = 2;

/// Borrowed rows of one mini-batch.
#[derive(Debug, Clone, Copy)]
pub struct BatchView<'a> {
    pub x: ArrayView2<'a, f64>,
    pub t: &'a [bool],
    pub y: ArrayView1<'a, f64>,
}

impl<'a> BatchView<'a> {
    pub fn reborrow<'b>(&'b self) -> BatchView<'b> {
        BatchView {
            x: self.x.reborrow(),
            t: self.t,
            y: self.y.reborrow(),
        }
    }
}

/// Where the transport plan comes from.
#[derive(Debug, Clone, Copy)]
pub enum PlanSource<'a> {
    Solve(&'a SolverConfig<f64>),
    /// A fixed `n_treated x n_untreated` coupling.
    Frozen(ArrayView2<'a, f64>),
}

#[derive(Debug, Clone)]
pub struct ObjectiveValue {
    pub loss_f: f64,
    pub loss_d: f64,
    pub total: f64,
    pub plan: Option<TransportPlan<f64>>,
    /// False when the transport term was skipped for this batch.
    pub ot_active: bool,
}

/// Objective value plus its gradient with respect to the network outputs.
pub(crate) struct ObjectiveTerms {
    pub value: ObjectiveValue,
    pub forward: ForwardPass,
    pub d_yhat0: Array1<f64>,
    pub d_yhat1: Array1<f64>,
    pub d_repr: Array2<f64>,
}

pub fn escfr_objective(params: &TarnetParams, batch: BatchView<'_>, cfg: &TrainConfig) -> Result<ObjectiveValue> {
    let solver = cfg.solver_config();
    Ok(evaluate(params, batch, cfg.lambda, cfg.gamma, PlanSource::Solve(&solver))?.value)
}

pub(crate) fn evaluate(
    params: &TarnetParams,
    batch: BatchView<'_>,
    lambda: f64,
    gamma: f64,
    plan_source: PlanSource<'_>,
) -> Result<ObjectiveTerms> {
    let n = batch.x.nrows();
    if batch.t.len() != n || batch.y.len() != n {
        return Err(Error::Shape(format!(
            "batch has {n} rows but {} treatments and {} outcomes",
            batch.t.len(),
            batch.y.len()
        )));
    }
    let fwd = tarnet_forward(params, batch.x)?;
    let finite = |a: &Array1<f64>| a.iter().all(|v| v.is_finite());
    if !(fwd.repr.iter().all(|v| v.is_finite()) && finite(&fwd.yhat0) && finite(&fwd.yhat1)) {
        return Err(Error::numerical(0, "network outputs are not finite"));
    }
    let treated: Vec<usize> = (0..n).filter(|&i| batch.t[i]).collect();
    let untreated: Vec<usize> = (0..n).filter(|&i| !batch.t[i]).collect();

    let mut d_yhat0 = Array1::zeros(n);
    let mut d_yhat1 = Array1::zeros(n);
    let mut d_repr = Array2::zeros(fwd.repr.dim());

    let mut loss_f = 0.0;
    for (group, yhat, grad) in [(&treated, &fwd.yhat1, &mut d_yhat1), (&untreated, &fwd.yhat0, &mut d_yhat0)] {
        if group.is_empty() {
            continue;
        }
        let scale = 1.0 / group.len() as f64;
        let mut sse = 0.0;
        for &i in group {
            let r = yhat[i] - batch.y[i];
            sse += r * r;
            grad[i] += 2.0 * r * scale;
        }
        loss_f += sse * scale;
    }

    let wants_ot = lambda > 0.0 || matches!(plan_source, PlanSource::Frozen(_));
    let ot_active = wants_ot && treated.len() >= MIN_GROUP_FOR_OT && untreated.len() >= MIN_GROUP_FOR_OT;
    let mut loss_d = 0.0;
    let mut plan = None;
    if ot_active {
        let r_t = fwd.repr.select(Axis(0), &treated);
        let r_c = fwd.repr.select(Axis(0), &untreated);
        let y_t = batch.y.select(Axis(0), &treated);
        let y_c = batch.y.select(Axis(0), &untreated);
        let cf_t = fwd.yhat0.select(Axis(0), &treated);
        let cf_c = fwd.yhat1.select(Axis(0), &untreated);
        let outcomes = PairedOutcomes {
            y_treated: y_t.view(),
            y_untreated: y_c.view(),
            yhat_cf_treated: cf_t.view(),
            yhat_cf_untreated: cf_c.view(),
        };
        let cost = pfor_cost_matrix(&pairwise_sqeuclidean(r_t.view(), r_c.view())?, &outcomes, gamma)?;
        let solved = match plan_source {
            PlanSource::Solve(solver) => {
                let detached = CostMatrix::new(cost.view().to_owned())?;
                let a = Array1::from_elem(treated.len(), 1.0 / treated.len() as f64);
                let b = Array1::from_elem(untreated.len(), 1.0 / untreated.len() as f64);
                unbalanced_sinkhorn_plan(a.view(), b.view(), &detached, solver)?
            }
            PlanSource::Frozen(coupling) => {
                if coupling.dim() != cost.shape() {
                    return Err(Error::Shape(format!(
                        "frozen plan is {:?}, batch needs {:?}",
                        coupling.dim(),
                        cost.shape()
                    )));
                }
                TransportPlan::from_coupling(coupling.to_owned(), &cost, 0, true)?
            }
        };
        loss_d = solved.cost;

        let p = &solved.coupling;
        let rows = &solved.row_marginal;
        let cols = &solved.col_marginal;
        let w = 2.0 * lambda;
        // d/dr_i sum_ij p_ij |r_i - r_j|^2 = 2 (rowsum_i r_i - sum_j p_ij r_j), symmetric for r_j.
        let g_t = (&r_t * &rows.view().insert_axis(Axis(1)) - p.dot(&r_c)) * w;
        let g_c = (&r_c * &cols.view().insert_axis(Axis(1)) - p.t().dot(&r_t)) * w;
        for (a, &i) in treated.iter().enumerate() {
            d_repr.row_mut(i).assign(&g_t.row(a));
        }
        for (b, &j) in untreated.iter().enumerate() {
            d_repr.row_mut(j).assign(&g_c.row(b));
        }
        if gamma > 0.0 {
            let wg = w * gamma;
            for (a, &i) in treated.iter().enumerate() {
                let s: f64 = (0..untreated.len()).map(|b| p[(a, b)] * (cf_t[a] - y_c[b])).sum();
                d_yhat0[i] += wg * s;
            }
            for (b, &j) in untreated.iter().enumerate() {
                let s: f64 = (0..treated.len()).map(|a| p[(a, b)] * (cf_c[b] - y_t[a])).sum();
                d_yhat1[j] += wg * s;
            }
        }
        plan = Some(solved);
    }

    let total = loss_f + lambda * loss_d;
    if !total.is_finite() {
        return Err(Error::numerical(0, format!("objective is {total}")));
    }
    Ok(ObjectiveTerms {
        value: ObjectiveValue {
            loss_f,
            loss_d,
            total,
            plan,
            ot_active,
        },
        forward: fwd,
        d_yhat0,
        d_yhat1,
        d_repr,
    })
}

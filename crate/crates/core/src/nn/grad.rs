//! Exact parameter gradients by reverse accumulation, and a central-difference checker.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{Block, TarnetParams};
use crate::error::{Error, Result};
use crate::training::objective::{evaluate, BatchView, PlanSource};

/// Closed description of a scalar loss over the model parameters.
#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    Constant(f64),
    /// `|W|^2` of one weight matrix.
    WeightSquaredNorm { block: Block, layer: usize },
    /// Mean squared error of the summed first-layer pre-activation against `y`;
    /// quadratic in the first layer's parameters.
    FirstLayerRegression { x: ArrayView2<'a, f64>, y: ArrayView1<'a, f64> },
    /// Factual risk plus `lambda` times the transport discrepancy on one batch.
    Escfr {
        batch: BatchView<'a>,
        lambda: f64,
        gamma: f64,
        plan: PlanSource<'a>,
    },
}

/// Gradient of the loss for every parameter, plus the loss components.
#[derive(Debug, Clone)]
pub struct GradientBundle {
    pub grads: TarnetParams,
    pub factual: f64,
    pub discrepancy: f64,
    pub total: f64,
    /// The transport plan used, when the discrepancy term was active.
    pub plan: Option<ndarray::Array2<f64>>,
}

pub fn grad_eval(params: &TarnetParams, spec: &LossSpec<'_>) -> Result<GradientBundle> {
    let mut grads = params.zeros_like();
    let mut bundle = match *spec {
        LossSpec::Constant(c) => GradientBundle {
            grads: params.zeros_like(),
            factual: 0.0,
            discrepancy: 0.0,
            total: c,
            plan: None,
        },
        LossSpec::WeightSquaredNorm { block, layer } => {
            let w = &params
                .block(block)
                .get(layer)
                .ok_or_else(|| Error::UnsupportedLoss(format!("{block:?} has no layer {layer}")))?
                .weight;
            grads.block_mut(block)[layer].weight = w * 2.0;
            GradientBundle {
                grads: params.zeros_like(),
                factual: 0.0,
                discrepancy: 0.0,
                total: w.iter().map(|v| v * v).sum(),
                plan: None,
            }
        }
        LossSpec::FirstLayerRegression { x, y } => {
            let layer = &params.psi[0];
            if x.ncols() != layer.fan_in() || x.nrows() != y.len() || y.is_empty() {
                return Err(Error::Shape("regression inputs do not match the first layer".into()));
            }
            let pred: Array1<f64> = (x.dot(&layer.weight) + &layer.bias).sum_axis(ndarray::Axis(1));
            let resid = &pred - &y;
            let n = y.len() as f64;
            let g = resid.mapv(|r| 2.0 * r / n);
            let gw = x.t().dot(&g);
            let gb = g.sum();
            let g0 = &mut grads.psi[0];
            for (k, row) in g0.weight.outer_iter_mut().enumerate() {
                let mut row = row;
                row.fill(gw[k]);
            }
            g0.bias.fill(gb);
            GradientBundle {
                grads: params.zeros_like(),
                factual: 0.0,
                discrepancy: 0.0,
                total: resid.iter().map(|r| r * r).sum::<f64>() / n,
                plan: None,
            }
        }
        LossSpec::Escfr {
            batch,
            lambda,
            gamma,
            plan,
        } => {
            let terms = evaluate(params, batch, lambda, gamma, plan)?;
            terms.forward.backward(
                params,
                terms.d_yhat0.view(),
                terms.d_yhat1.view(),
                Some(terms.d_repr.view()),
                &mut grads,
            );
            GradientBundle {
                grads: params.zeros_like(),
                factual: terms.value.loss_f,
                discrepancy: terms.value.loss_d,
                total: terms.value.total,
                plan: terms.value.plan.map(|p| p.coupling),
            }
        }
    };
    if !grads.is_finite() {
        return Err(Error::numerical(0, "gradient contains non-finite entries"));
    }
    bundle.grads = grads;
    Ok(bundle)
}

/// Loss value only.
pub fn loss_value(params: &TarnetParams, spec: &LossSpec<'_>) -> Result<f64> {
    Ok(match *spec {
        LossSpec::Escfr {
            batch,
            lambda,
            gamma,
            plan,
        } => evaluate(params, batch, lambda, gamma, plan)?.value.total,
        _ => grad_eval(params, spec)?.total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub samples: usize,
}

fn reborrow_spec<'b>(spec: &'b LossSpec<'_>) -> LossSpec<'b> {
    match spec {
        LossSpec::Constant(c) => LossSpec::Constant(*c),
        LossSpec::WeightSquaredNorm { block, layer } => LossSpec::WeightSquaredNorm {
            block: *block,
            layer: *layer,
        },
        LossSpec::FirstLayerRegression { x, y } => LossSpec::FirstLayerRegression {
            x: x.reborrow(),
            y: y.reborrow(),
        },
        LossSpec::Escfr { batch, lambda, gamma, plan } => LossSpec::Escfr {
            batch: batch.reborrow(),
            lambda: *lambda,
            gamma: *gamma,
            plan: match plan {
                PlanSource::Solve(c) => PlanSource::Solve(c),
                PlanSource::Frozen(p) => PlanSource::Frozen(p.reborrow()),
            },
        },
    }
}

/// Magnitude below which gradients are compared absolutely.
pub const GRADCHECK_FLOOR: f64 = 1e-6;

/// Compare [`grad_eval`] with central differences on `n_samples` randomly
/// chosen parameters. Relative error is `|a - b| / max(|a|, |b|, 1e-6)`.
///
/// A solved transport plan is frozen at the base point, matching the
/// stop-gradient treatment inside [`grad_eval`].
pub fn gradcheck(
    params: &TarnetParams,
    spec: &LossSpec<'_>,
    n_samples: usize,
    h: f64,
    seed: u64,
) -> Result<GradcheckReport> {
    if !(h > 0.0) {
        return Err(Error::Config(format!("step h must be positive, got {h}")));
    }
    let bundle = grad_eval(params, spec)?;
    let frozen_plan = bundle.plan.clone();
    let probe_spec = match (spec, frozen_plan.as_ref()) {
        (
            LossSpec::Escfr {
                batch,
                lambda,
                gamma,
                plan: PlanSource::Solve(_),
            },
            Some(p),
        ) => LossSpec::Escfr {
            batch: batch.reborrow(),
            lambda: *lambda,
            gamma: *gamma,
            plan: PlanSource::Frozen(p.view()),
        },
        _ => reborrow_spec(spec),
    };

    let total = params.num_params();
    let k = n_samples.min(total);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, total, k).into_vec();
    idx.sort_unstable();

    let mut probe = params.clone();
    let (mut max_err, mut sum_err) = (0.0f64, 0.0f64);
    for &p in &idx {
        let base = params.get_flat(p);
        probe.set_flat(p, base + h);
        let up = loss_value(&probe, &probe_spec)?;
        probe.set_flat(p, base - h);
        let down = loss_value(&probe, &probe_spec)?;
        probe.set_flat(p, base);
        let numeric = (up - down) / (2.0 * h);
        let analytic = bundle.grads.get_flat(p);
        let denom = analytic.abs().max(numeric.abs()).max(GRADCHECK_FLOOR);
        let err = (analytic - numeric).abs() / denom;
        max_err = max_err.max(err);
        sum_err += err;
    }
    Ok(GradcheckReport {
        max_rel_error: max_err,
        mean_rel_error: if k > 0 { sum_err / k as f64 } else { 0.0 },
        samples: k,
    })
}

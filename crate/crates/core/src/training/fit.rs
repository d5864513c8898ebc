use std::time::{Duration, Instant};

use ndarray::{Array1, Axis};
use serde::{Deserialize, Serialize};

use super::adam::{AdamHyper, AdamState};
use super::batches::make_batches;
use super::config::{SelectionMetric, TrainConfig};
use super::objective::{BatchView, PlanSource};
use crate::data::CausalDataset;
use crate::error::{Error, Result};
use crate::eval::{auuc, factual_rmse, pehe_metrics, MetricReport, SplitTag};
use crate::nn::{grad_eval, init_params_with, predict_cate, LossSpec, Standardizer, TarnetModel, TarnetParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLosses {
    pub factual: f64,
    pub discrepancy: f64,
    pub total: f64,
    pub ot_active: bool,
}

/// One Adam step on the batch objective.
pub fn train_step(
    params: &TarnetParams,
    opt: &AdamState,
    batch: BatchView<'_>,
    cfg: &TrainConfig,
) -> Result<(TarnetParams, AdamState, StepLosses)> {
    let mut params = params.clone();
    let mut opt = opt.clone();
    let losses = train_step_in_place(&mut params, &mut opt, batch, cfg)?;
    Ok((params, opt, losses))
}

fn train_step_in_place(
    params: &mut TarnetParams,
    opt: &mut AdamState,
    batch: BatchView<'_>,
    cfg: &TrainConfig,
) -> Result<StepLosses> {
    let solver = cfg.solver_config();
    let spec = LossSpec::Escfr {
        batch: batch.reborrow(),
        lambda: cfg.lambda,
        gamma: cfg.gamma,
        plan: PlanSource::Solve(&solver),
    };
    let bundle = grad_eval(params, &spec)?;
    let hp = AdamHyper {
        learning_rate: cfg.learning_rate,
        beta1: cfg.adam_beta1,
        beta2: cfg.adam_beta2,
        eps: cfg.adam_eps,
        weight_decay: cfg.weight_decay,
    };
    let grads = bundle.grads.tensors();
    opt.apply(&mut params.tensors_mut(), &grads, &hp);
    Ok(StepLosses {
        factual: bundle.factual,
        discrepancy: bundle.discrepancy,
        total: bundle.total,
        ot_active: bundle.plan.is_some(),
    })
}

/// Patience counter over validation rounds.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    metric: SelectionMetric,
    patience: usize,
    best: Option<(usize, f64)>,
    misses: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopper {
    pub fn new(metric: SelectionMetric, patience: usize) -> Self {
        Self {
            metric,
            patience,
            best: None,
            misses: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> Verdict {
        let better = match self.best {
            None => true,
            Some((_, incumbent)) => self.metric.improves(value, incumbent),
        };
        if better {
            self.best = Some((epoch, value));
            self.misses = 0;
            return Verdict::Improved;
        }
        self.misses += 1;
        if self.misses >= self.patience {
            Verdict::Stop
        } else {
            Verdict::Continue
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub factual_loss: f64,
    pub discrepancy_loss: f64,
    pub total_loss: f64,
    pub validation_metric: Option<f64>,
}

/// Training trajectory. Wall-clock times are kept out of the serialized form so
/// the JSON is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub estimator: String,
    pub selection_metric: SelectionMetric,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_epoch: usize,
    pub discrepancy_active: bool,
    pub checkpoint: Option<String>,
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

pub struct FitOutcome {
    pub report: TrainReport,
    /// Parameters from the best validation epoch.
    pub model: TarnetModel,
}

struct PreparedSplit {
    data: CausalDataset,
    y_std: Array1<f64>,
}

fn validation_metric(
    params: &TarnetParams,
    valid: &PreparedSplit,
    metric: SelectionMetric,
) -> Result<f64> {
    match metric {
        SelectionMetric::Auuc => {
            let tau = predict_cate(params, valid.data.x.view())?;
            auuc(tau.view(), &valid.data.t, valid.data.y.view())
        }
        SelectionMetric::FactualLoss => {
            let f = crate::nn::tarnet_forward(params, valid.data.x.view())?;
            let yhat = Array1::from_iter(
                (0..valid.data.len()).map(|i| if valid.data.t[i] { f.yhat1[i] } else { f.yhat0[i] }),
            );
            Ok(factual_rmse(yhat.view(), valid.y_std.view())?.powi(2))
        }
    }
}

/// Train on `train`, select on `valid`, and return the best model with its trajectory.
pub fn fit(train: &CausalDataset, valid: &CausalDataset, cfg: &TrainConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    if train.dim() != valid.dim() {
        return Err(Error::Shape("train and validation covariate dimensions differ".into()));
    }
    let outcome = if cfg.standardize_outcomes {
        Standardizer::fit(train.y.as_slice().expect("contiguous outcomes"))
    } else {
        Standardizer::IDENTITY
    };
    let train_y = train.y.mapv(|v| outcome.forward(v));
    let valid = PreparedSplit {
        y_std: valid.y.mapv(|v| outcome.forward(v)),
        data: valid.clone(),
    };

    let mut params = init_params_with(cfg.architecture(), train.dim(), cfg.seed)?;
    let mut opt = AdamState::for_params(&params);
    let mut stopper = EarlyStopper::new(cfg.selection_metric, cfg.patience);
    let mut best_params = params.clone();
    let mut epochs = Vec::new();
    let mut epoch_seconds = Vec::new();
    let mut discrepancy_active = false;
    let mut stopped_epoch = cfg.max_epochs;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let batches = make_batches(train, cfg.batch_size, cfg.seed, epoch)?;
        let (mut f_sum, mut d_sum, mut tot_sum) = (0.0, 0.0, 0.0);
        for (b, batch) in batches.iter().enumerate() {
            let x = train.x.select(Axis(0), &batch.indices);
            let t: Vec<bool> = batch.indices.iter().map(|&i| train.t[i]).collect();
            let y = train_y.select(Axis(0), &batch.indices);
            let view = BatchView {
                x: x.view(),
                t: &t,
                y: y.view(),
            };
            let losses = train_step_in_place(&mut params, &mut opt, view, cfg).map_err(|e| Error::Training {
                epoch,
                batch: b,
                source: Box::new(e),
            })?;
            discrepancy_active |= losses.ot_active;
            f_sum += losses.factual;
            d_sum += losses.discrepancy;
            tot_sum += losses.total;
        }
        let nb = batches.len() as f64;
        let mut record = EpochRecord {
            epoch,
            factual_loss: f_sum / nb,
            discrepancy_loss: d_sum / nb,
            total_loss: tot_sum / nb,
            validation_metric: None,
        };
        let mut stop = false;
        if epoch % cfg.validate_every == 0 || (epoch == cfg.max_epochs && stopper.best().is_none()) {
            let value = validation_metric(&params, &valid, cfg.selection_metric)?;
            record.validation_metric = Some(value);
            match stopper.observe(epoch, value) {
                Verdict::Improved => best_params = params.clone(),
                Verdict::Continue => {}
                Verdict::Stop => stop = true,
            }
        }
        epochs.push(record);
        epoch_seconds.push(started.elapsed().as_secs_f64());
        if stop {
            stopped_epoch = epoch;
            break;
        }
    }

    let (best_epoch, best_metric) = stopper.best().expect("at least one validation round");
    Ok(FitOutcome {
        report: TrainReport {
            estimator: cfg.estimator_name().to_string(),
            selection_metric: cfg.selection_metric,
            epochs,
            best_epoch,
            best_metric,
            stopped_epoch,
            discrepancy_active,
            checkpoint: None,
            epoch_seconds,
        },
        model: TarnetModel {
            params: best_params,
            outcome,
        },
    })
}

/// Metrics of `model` on `data`; PEHE fields are absent without true effects.
pub fn metric_report(model: &TarnetModel, data: &CausalDataset, split: SplitTag) -> Result<MetricReport> {
    let tau_hat = model.predict_cate(data.x.view())?;
    let (pehe, sqrt_pehe) = match &data.tau {
        Some(tau) => {
            let (p, s) = pehe_metrics(tau_hat.view(), tau.view())?;
            (Some(p), Some(s))
        }
        None => (None, None),
    };
    let yhat = model.predict_factual(data.x.view(), &data.t)?;
    Ok(MetricReport {
        pehe,
        sqrt_pehe,
        auuc: auuc(tau_hat.view(), &data.t, data.y.view())?,
        factual_rmse: factual_rmse(yhat.view(), data.y.view())?,
        split,
    })
}

/// Elapsed time helper for benchmarks and reports.
pub fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, split_dataset, GenSpec, SplitRatios};
    use crate::nn::init_params;

    #[test]
    fn early_stop_arithmetic() {
        // Validation every 2 epochs, patience 1, metric worse after epoch 2.
        let mut s = EarlyStopper::new(SelectionMetric::Auuc, 1);
        assert_eq!(s.observe(2, 0.8), Verdict::Improved);
        assert_eq!(s.observe(4, 0.7), Verdict::Stop);
        assert_eq!(s.best(), Some((2, 0.8)));

        let mut s = EarlyStopper::new(SelectionMetric::FactualLoss, 2);
        assert_eq!(s.observe(1, 1.0), Verdict::Improved);
        assert_eq!(s.observe(2, 0.5), Verdict::Improved);
        assert_eq!(s.observe(3, 0.5), Verdict::Continue);
        assert_eq!(s.observe(4, 0.9), Verdict::Stop);
        assert_eq!(s.best(), Some((2, 0.5)));
    }

    #[test]
    fn train_step_with_zero_rate_keeps_params() {
        let p = init_params(2, 0).unwrap();
        let x = ndarray::array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [0.5, 0.5]];
        let t = [true, false, true, false];
        let y = ndarray::array![1.0, 0.0, 2.0, 0.5];
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let (np, state, losses) = train_step(
            &p,
            &AdamState::for_params(&p),
            BatchView { x: x.view(), t: &t, y: y.view() },
            &cfg,
        )
        .unwrap();
        assert_eq!(np, p);
        assert_eq!(state.step, 1);
        assert!(losses.ot_active);
    }

    fn small_run(lambda: f64) -> TrainConfig {
        TrainConfig {
            lambda,
            max_epochs: 6,
            patience: 2,
            hidden: 8,
            batch_size: 16,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn fit_is_reproducible_and_tracks_best() {
        let data = generate_synthetic(&GenSpec {
            bias_strength: 1.0,
            seed: 2,
            ..GenSpec::new(120, 3)
        })
        .unwrap();
        let (tr, va, _) = split_dataset(&data, SplitRatios::default(), 0).unwrap();
        let cfg = small_run(1.0);
        let a = fit(&tr, &va, &cfg).unwrap();
        let b = fit(&tr, &va, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
        assert_eq!(a.model, b.model);
        let best = a
            .report
            .epochs
            .iter()
            .filter_map(|e| e.validation_metric)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, a.report.best_metric);
        assert!(a.report.discrepancy_active);
        assert_eq!(a.report.estimator, "escfr");
        for e in &a.report.epochs {
            assert!(e.factual_loss.is_finite() && e.discrepancy_loss >= 0.0);
        }
    }

    #[test]
    fn lambda_zero_reports_tarnet_without_discrepancy() {
        let data = generate_synthetic(&GenSpec {
            seed: 4,
            ..GenSpec::new(80, 2)
        })
        .unwrap();
        let (tr, va, te) = split_dataset(&data, SplitRatios::default(), 0).unwrap();
        let out = fit(&tr, &va, &small_run(0.0)).unwrap();
        assert_eq!(out.report.estimator, "tarnet");
        assert!(!out.report.discrepancy_active);
        let m = metric_report(&out.model, &te, SplitTag::OutSample).unwrap();
        let (p, s) = (m.pehe.unwrap(), m.sqrt_pehe.unwrap());
        assert!((s * s - p).abs() <= 1e-12 * p.max(1.0));
    }
}

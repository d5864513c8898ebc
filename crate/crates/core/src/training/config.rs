use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, Architecture, HIDDEN_WIDTH};
use crate::ot::{Relaxation, SolverConfig};

/// Validation criterion used for checkpoint selection and early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMetric {
    /// Out-of-sample AUUC, maximized.
    #[default]
    Auuc,
    /// Validation factual MSE, minimized.
    FactualLoss,
}

impl SelectionMetric {
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            SelectionMetric::Auuc => candidate > incumbent,
            SelectionMetric::FactualLoss => candidate < incumbent,
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Weight of the transport discrepancy in the objective.
    pub lambda: f64,
    pub epsilon: f64,
    pub kappa: Relaxation<f64>,
    /// Weight of the outcome-proximity term in the transport cost.
    pub gamma: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validate_every: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub selection_metric: SelectionMetric,
    pub sinkhorn_max_iters: usize,
    pub sinkhorn_tol: f64,
    pub activation: Activation,
    pub hidden: usize,
    pub standardize_outcomes: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            epsilon: 0.5,
            kappa: Relaxation::Kl(5.0),
            gamma: 1.0,
            batch_size: 32,
            max_epochs: 400,
            patience: 30,
            validate_every: 2,
            learning_rate: 1e-3,
            weight_decay: 1e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            selection_metric: SelectionMetric::Auuc,
            sinkhorn_max_iters: 1000,
            sinkhorn_tol: 1e-6,
            activation: Activation::Elu,
            hidden: HIDDEN_WIDTH,
            standardize_outcomes: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("learning_rate", self.learning_rate),
            ("weight_decay", self.weight_decay),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{name}` must be finite and nonnegative, got {v}")));
            }
        }
        if self.batch_size < 2 {
            return Err(Error::Config("`batch_size` must be at least 2".into()));
        }
        if self.patience < 1 {
            return Err(Error::Config("`patience` must be at least 1".into()));
        }
        if self.validate_every < 1 {
            return Err(Error::Config("`validate_every` must be at least 1".into()));
        }
        if self.max_epochs < 1 {
            return Err(Error::Config("`max_epochs` must be at least 1".into()));
        }
        if self.hidden < 1 {
            return Err(Error::Config("`hidden` must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("Adam betas must lie in [0, 1) and eps must be positive".into()));
        }
        self.solver_config().validate()
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            epsilon: self.epsilon,
            kappa: self.kappa,
            max_iters: self.sinkhorn_max_iters,
            tol: self.sinkhorn_tol,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            hidden: self.hidden,
            activation: self.activation,
            ..Architecture::default()
        }
    }

    /// Name of the estimator this configuration reduces to.
    pub fn estimator_name(&self) -> &'static str {
        match (self.lambda > 0.0, self.gamma > 0.0, self.kappa.is_balanced()) {
            (false, _, _) => "tarnet",
            (true, false, true) => "cfr-wass",
            (true, false, false) => "escfr-rmpr",
            (true, true, true) => "escfr-pfor",
            (true, true, false) => "escfr",
        }
    }
}

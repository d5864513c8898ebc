use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::CausalDataset;
use crate::error::{Error, Result};

const MAX_DRAWS: u64 = 10;

/// Parameters of the synthetic observational design.
///
/// * `x ~ N(0, I_d)`, hidden `h ~ N(0, 1)`
/// * `P(T = 1 | x, h) = logistic(bias_strength * theta.x + hidden_strength * h)`, `|theta| = 1`
/// * `mu0 = w0.x + sin(w1.x) + hidden_strength * h`
/// * `mu1 = mu0 + 1 + x_0`
/// * `y = mu_t + noise_std * N(0, 1)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub bias_strength: f64,
    #[serde(default)]
    pub hidden_strength: f64,
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_noise() -> f64 {
    1.0
}

impl GenSpec {
    pub fn new(n: usize, d: usize) -> Self {
        Self {
            n,
            d,
            bias_strength: 0.0,
            hidden_strength: 0.0,
            noise_std: default_noise(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Config(format!("`N` must be at least 4, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(Error::Config("`d` must be at least 1".into()));
        }
        for (name, v) in [
            ("bias_strength", self.bias_strength),
            ("hidden_strength", self.hidden_strength),
            ("noise_std", self.noise_std),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("`{name}` must be finite and nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    /// Unit-norm selection direction, shared by every draw with this seed.
    pub fn selection_direction(&self) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5e1e_c7ed);
        unit_vector(&mut rng, self.d)
    }
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn generate_synthetic(spec: &GenSpec) -> Result<CausalDataset> {
    spec.validate()?;
    let theta = spec.selection_direction();
    let mut coef_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x0c0e_ff5e);
    let scale = 1.0 / (spec.d as f64).sqrt();
    let w0: Array1<f64> = (0..spec.d).map(|_| normal(&mut coef_rng) * scale).collect();
    let w1: Array1<f64> = (0..spec.d).map(|_| normal(&mut coef_rng) * 2.0 * scale).collect();

    for draw in 0..MAX_DRAWS {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9e37_79b9).wrapping_add(draw));
        let (n, d) = (spec.n, spec.d);
        let x = Array2::from_shape_simple_fn((n, d), || normal(&mut rng));
        let mut t = Vec::with_capacity(n);
        let mut y = Array1::zeros(n);
        let mut mu0 = Array1::zeros(n);
        let mut mu1 = Array1::zeros(n);
        for i in 0..n {
            let xi = x.row(i);
            let h = normal(&mut rng);
            let p = logistic(spec.bias_strength * theta.dot(&xi) + spec.hidden_strength * h);
            let ti = rng.random::<f64>() < p;
            let base = w0.dot(&xi) + w1.dot(&xi).sin() + spec.hidden_strength * h;
            mu0[i] = base;
            mu1[i] = base + 1.0 + xi[0];
            y[i] = if ti { mu1[i] } else { mu0[i] } + spec.noise_std * normal(&mut rng);
            t.push(ti);
        }
        let treated = t.iter().filter(|v| **v).count();
        if treated == 0 || treated == n {
            continue;
        }
        return CausalDataset::new(x, t, y, Some(mu0), Some(mu1));
    }
    Err(Error::Generation(format!(
        "every one of {MAX_DRAWS} draws left a treatment group empty"
    )))
}

/// Standardized mean difference of `theta.x` between treated and untreated units.
pub fn selection_shift(data: &CausalDataset, theta: &Array1<f64>) -> f64 {
    let score = data.x.dot(theta);
    let stats = |want: bool| {
        let v: Vec<f64> = (0..data.len()).filter(|&i| data.t[i] == want).map(|i| score[i]).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
        (mean, var)
    };
    let (m1, v1) = stats(true);
    let (m0, v0) = stats(false);
    (m1 - m0) / ((v1 + v0) / 2.0).sqrt()
}

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of every hidden layer.
pub const HIDDEN_WIDTH: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Elu,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Elu => {
                if z > 0.0 {
                    z
                } else {
                    z.exp_m1()
                }
            }
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative at pre-activation `z`.
    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match (self, z > 0.0) {
            (_, true) => 1.0,
            (Activation::Elu, false) => z.exp(),
            (Activation::Relu, false) => 0.0,
        }
    }
}

/// Affine map `out = input . weight + bias`, weight stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn uniform(fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            weight: Array2::from_shape_simple_fn((fan_in, fan_out), || rng.random_range(-bound..bound)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.nrows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.ncols()
    }
}

/// Which parameter block a layer belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Psi,
    Head0,
    Head1,
}

/// Shared representation `psi` and the untreated/treated outcome heads.
///
/// Every `psi` layer and every head layer except the last is followed by the
/// activation; the head output layer is linear with width one.
#[derive(Debug, Clone, PartialEq)]
pub struct TarnetParams {
    pub psi: Vec<Dense>,
    pub head0: Vec<Dense>,
    pub head1: Vec<Dense>,
    pub activation: Activation,
}

impl TarnetParams {
    pub fn input_dim(&self) -> usize {
        self.psi[0].fan_in()
    }

    pub fn repr_dim(&self) -> usize {
        self.psi.last().map(Dense::fan_out).unwrap_or(0)
    }

    pub fn block(&self, block: Block) -> &[Dense] {
        match block {
            Block::Psi => &self.psi,
            Block::Head0 => &self.head0,
            Block::Head1 => &self.head1,
        }
    }

    pub fn block_mut(&mut self, block: Block) -> &mut Vec<Dense> {
        match block {
            Block::Psi => &mut self.psi,
            Block::Head0 => &mut self.head0,
            Block::Head1 => &mut self.head1,
        }
    }

    /// All-zero tensors of the same shapes.
    pub fn zeros_like(&self) -> Self {
        let z = |layers: &[Dense]| layers.iter().map(|l| Dense::zeros(l.fan_in(), l.fan_out())).collect();
        Self {
            psi: z(&self.psi),
            head0: z(&self.head0),
            head1: z(&self.head1),
            activation: self.activation,
        }
    }

    /// Weights then bias of each layer, psi then head0 then head1.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.psi
            .iter()
            .chain(&self.head0)
            .chain(&self.head1)
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.psi
            .iter_mut()
            .chain(self.head0.iter_mut())
            .chain(self.head1.iter_mut())
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Flat parameter `k` in [`tensors`](Self::tensors) order.
    pub fn get_flat(&self, k: usize) -> f64 {
        let mut k = k;
        for t in self.tensors() {
            if k < t.len() {
                return t[k];
            }
            k -= t.len();
        }
        panic!("flat parameter index out of range");
    }

    pub fn set_flat(&mut self, k: usize, value: f64) {
        let mut k = k;
        for t in self.tensors_mut() {
            if k < t.len() {
                t[k] = value;
                return;
            }
            k -= t.len();
        }
        panic!("flat parameter index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn validate(&self) -> Result<()> {
        let chain = |layers: &[Dense], start: usize| -> Result<usize> {
            let mut width = start;
            for (i, l) in layers.iter().enumerate() {
                if l.fan_in() != width || l.bias.len() != l.fan_out() {
                    return Err(Error::Shape(format!(
                        "layer {i} is {}x{} with bias {}, expected fan-in {width}",
                        l.fan_in(),
                        l.fan_out(),
                        l.bias.len()
                    )));
                }
                width = l.fan_out();
            }
            Ok(width)
        };
        if self.psi.is_empty() || self.head0.is_empty() || self.head1.is_empty() {
            return Err(Error::Shape("every block needs at least one layer".into()));
        }
        let r = chain(&self.psi, self.input_dim())?;
        for head in [&self.head0, &self.head1] {
            if chain(head, r)? != 1 {
                return Err(Error::Shape("outcome heads must end in a single output".into()));
            }
        }
        if !self.is_finite() {
            return Err(Error::Input("parameters contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Layer counts and width; the default is two hidden layers of 60 everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden: usize,
    pub psi_layers: usize,
    pub head_hidden_layers: usize,
    pub activation: Activation,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            hidden: HIDDEN_WIDTH,
            psi_layers: 2,
            head_hidden_layers: 2,
            activation: Activation::Elu,
        }
    }
}

/// Default architecture, seeded fan-in uniform weights and zero biases.
pub fn init_params(input_dim: usize, seed: u64) -> Result<TarnetParams> {
    init_params_with(Architecture::default(), input_dim, seed)
}

pub fn init_params_with(arch: Architecture, input_dim: usize, seed: u64) -> Result<TarnetParams> {
    if input_dim < 1 {
        return Err(Error::Config("input_dim must be at least 1".into()));
    }
    if arch.hidden < 1 || arch.psi_layers < 1 {
        return Err(Error::Config("architecture needs a non-empty representation".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut psi = Vec::with_capacity(arch.psi_layers);
    let mut width = input_dim;
    for _ in 0..arch.psi_layers {
        psi.push(Dense::uniform(width, arch.hidden, &mut rng));
        width = arch.hidden;
    }
    let head = |rng: &mut ChaCha8Rng| {
        let mut layers = Vec::with_capacity(arch.head_hidden_layers + 1);
        for _ in 0..arch.head_hidden_layers {
            layers.push(Dense::uniform(arch.hidden, arch.hidden, rng));
        }
        layers.push(Dense::uniform(arch.hidden, 1, rng));
        layers
    };
    let head0 = head(&mut rng);
    let head1 = head(&mut rng);
    Ok(TarnetParams {
        psi,
        head0,
        head1,
        activation: arch.activation,
    })
}

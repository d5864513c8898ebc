use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::params::{Activation, Dense, TarnetParams};
use crate::error::{Error, Result};

/// Inputs and pre-activations of one layer, kept for the backward sweep.
#[derive(Debug, Clone)]
struct LayerTrace {
    input: Array2<f64>,
    pre: Array2<f64>,
}

/// Outputs of a forward pass plus everything the backward pass needs.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub repr: Array2<f64>,
    pub yhat0: Array1<f64>,
    pub yhat1: Array1<f64>,
    psi: Vec<LayerTrace>,
    head0: Vec<LayerTrace>,
    head1: Vec<LayerTrace>,
}

fn affine(layer: &Dense, input: &Array2<f64>) -> Array2<f64> {
    input.dot(&layer.weight) + &layer.bias
}

/// Returns the output and per-layer traces; the last layer is linear when `linear_last`.
fn run_stack(
    layers: &[Dense],
    input: Array2<f64>,
    act: Activation,
    linear_last: bool,
) -> (Array2<f64>, Vec<LayerTrace>) {
    let mut traces = Vec::with_capacity(layers.len());
    let mut h = input;
    for (i, layer) in layers.iter().enumerate() {
        let pre = affine(layer, &h);
        let out = if linear_last && i + 1 == layers.len() {
            pre.clone()
        } else {
            pre.mapv(|z| act.apply(z))
        };
        traces.push(LayerTrace { input: h, pre });
        h = out;
    }
    (h, traces)
}

/// Representation and both head predictions for every row of `x`.
pub fn tarnet_forward(params: &TarnetParams, x: ArrayView2<'_, f64>) -> Result<ForwardPass> {
    if x.ncols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} columns, model expects {}",
            x.ncols(),
            params.input_dim()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("covariates contain non-finite values".into()));
    }
    let act = params.activation;
    let (repr, psi) = run_stack(&params.psi, x.to_owned(), act, false);
    let (out0, head0) = run_stack(&params.head0, repr.clone(), act, true);
    let (out1, head1) = run_stack(&params.head1, repr.clone(), act, true);
    Ok(ForwardPass {
        repr,
        yhat0: out0.column(0).to_owned(),
        yhat1: out1.column(0).to_owned(),
        psi,
        head0,
        head1,
    })
}

/// `yhat1 - yhat0`, in the units the heads were trained on.
pub fn predict_cate(params: &TarnetParams, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
    let fwd = tarnet_forward(params, x)?;
    Ok(&fwd.yhat1 - &fwd.yhat0)
}

fn backprop_stack(
    layers: &[Dense],
    traces: &[LayerTrace],
    grads: &mut [Dense],
    upstream: Array2<f64>,
    act: Activation,
    linear_last: bool,
) -> Array2<f64> {
    let mut g = upstream;
    for i in (0..layers.len()).rev() {
        let trace = &traces[i];
        if !(linear_last && i + 1 == layers.len()) {
            g.zip_mut_with(&trace.pre, |gv, &z| *gv *= act.derivative(z));
        }
        grads[i].weight += &trace.input.t().dot(&g);
        grads[i].bias += &g.sum_axis(Axis(0));
        g = g.dot(&layers[i].weight.t());
    }
    g
}

impl ForwardPass {
    /// Accumulate parameter gradients into `grads` given the loss gradient
    /// with respect to each head output and (directly) the representation.
    pub fn backward(
        &self,
        params: &TarnetParams,
        d_yhat0: ArrayView1<'_, f64>,
        d_yhat1: ArrayView1<'_, f64>,
        d_repr: Option<ArrayView2<'_, f64>>,
        grads: &mut TarnetParams,
    ) {
        let act = params.activation;
        let col = |v: ArrayView1<'_, f64>| v.to_owned().insert_axis(Axis(1));
        let mut g_repr = backprop_stack(&params.head0, &self.head0, &mut grads.head0, col(d_yhat0), act, true);
        g_repr += &backprop_stack(&params.head1, &self.head1, &mut grads.head1, col(d_yhat1), act, true);
        if let Some(direct) = d_repr {
            g_repr += &direct;
        }
        backprop_stack(&params.psi, &self.psi, &mut grads.psi, g_repr, act, false);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use ndarray::array;

    #[test]
    fn zero_network_predicts_zero() {
        let p = init_params(3, 1).unwrap().zeros_like();
        let x = array![[1.0, -2.0, 0.5], [4.0, 0.0, 1.0]];
        let f = tarnet_forward(&p, x.view()).unwrap();
        assert!(f.yhat0.iter().chain(f.yhat1.iter()).all(|v| *v == 0.0));
        assert!(predict_cate(&p, x.view()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn empty_batch() {
        let p = init_params(2, 1).unwrap();
        let f = tarnet_forward(&p, Array2::zeros((0, 2)).view()).unwrap();
        assert_eq!(f.yhat0.len(), 0);
        assert_eq!(f.repr.dim(), (0, 60));
    }

    #[test]
    fn duplicated_rows_give_duplicated_outputs() {
        let p = init_params(2, 9).unwrap();
        let f = tarnet_forward(&p, array![[0.3, -1.2], [0.3, -1.2]].view()).unwrap();
        assert_eq!(f.yhat0[0], f.yhat0[1]);
        assert_eq!(f.yhat1[0], f.yhat1[1]);
        assert_eq!(f.repr.row(0), f.repr.row(1));
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let p = init_params(2, 9).unwrap();
        assert!(matches!(tarnet_forward(&p, array![[1.0]].view()), Err(Error::Shape(_))));
        assert!(matches!(
            tarnet_forward(&p, array![[1.0, f64::NAN]].view()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn identical_heads_give_zero_effect_and_swapping_negates() {
        let mut p = init_params(3, 4).unwrap();
        let x = array![[0.1, 0.2, 0.3], [-1.0, 2.0, 0.0]];
        let tau = predict_cate(&p, x.view()).unwrap();
        std::mem::swap(&mut p.head0, &mut p.head1);
        let swapped = predict_cate(&p, x.view()).unwrap();
        for (a, b) in tau.iter().zip(swapped.iter()) {
            assert_eq!(*a, -*b);
        }
        p.head0 = p.head1.clone();
        assert!(predict_cate(&p, x.view()).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn hand_set_linear_heads() {
        // psi = identity on a scalar (relu of positive input), heads y1 = 2r, y0 = r.
        let p = TarnetParams {
            psi: vec![Dense {
                weight: array![[1.0]],
                bias: array![0.0],
            }],
            head0: vec![Dense {
                weight: array![[1.0]],
                bias: array![0.0],
            }],
            head1: vec![Dense {
                weight: array![[2.0]],
                bias: array![0.0],
            }],
            activation: Activation::Relu,
        };
        assert!(p.validate().is_ok());
        assert_eq!(predict_cate(&p, array![[3.0]].view()).unwrap()[0], 3.0);
    }

    #[test]
    fn forward_is_bit_deterministic() {
        let p = init_params(4, 2).unwrap();
        let x = Array2::from_shape_fn((7, 4), |(i, j)| (i * 4 + j) as f64 * 0.1 - 1.0);
        let a = tarnet_forward(&p, x.view()).unwrap();
        let b = tarnet_forward(&p, x.view()).unwrap();
        assert_eq!(a.yhat0, b.yhat0);
        assert_eq!(a.yhat1, b.yhat1);
        assert_eq!(a.repr, b.repr);
    }
}

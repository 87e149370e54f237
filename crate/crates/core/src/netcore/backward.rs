use ndarray::{Array1, Array2, Array3, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use super::{forward_to, ArchitectureSpec, LayerTrace, LayerWeights, ModelWeights};
use crate::{Error, Result};

/// Scalar whose gradient defines the sensitivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// Pre-softmax logit of the target class.
    #[default]
    Logit,
    /// Softmax probability of the target class over the frame's logits.
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub class_index: usize,
    pub output_frame: usize,
}

/// Gradients of a target score with respect to every layer's activation.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTrace {
    pub target: Target,
    pub mode: TargetMode,
    /// Gradient with respect to the input spectrogram.
    pub input: Array2<f64>,
    /// `layers[l - 1]` is the gradient with respect to `A_l`.
    pub layers: Vec<Array2<f64>>,
}

impl SensitivityTrace {
    pub fn gradient(&self, l: usize) -> ArrayView2<'_, f64> {
        if l == 0 {
            self.input.view()
        } else {
            self.layers[l - 1].view()
        }
    }
}

/// Gradient of a valid strided convolution with respect to its input.
fn conv1d_backward_input(
    d_pre: ArrayView2<f64>,
    layer: &LayerWeights,
    stride: usize,
    in_frames: usize,
) -> Array2<f64> {
    let (c_out, c_in, kernel) = layer.kernel.dim();
    let mut d_in = Array2::<f64>::zeros((c_in, in_frames));
    for o in 0..c_out {
        let d = d_pre.row(o);
        for i in 0..c_in {
            let mut row = d_in.row_mut(i);
            for k in 0..kernel {
                let w = layer.kernel[[o, i, k]];
                if w == 0.0 {
                    continue;
                }
                for (t, &g) in d.iter().enumerate() {
                    if g != 0.0 {
                        row[t * stride + k] += w * g;
                    }
                }
            }
        }
    }
    d_in
}

fn conv1d_backward_weights(
    d_pre: ArrayView2<f64>,
    input: ArrayView2<f64>,
    kernel: usize,
    stride: usize,
) -> LayerWeights {
    let c_out = d_pre.nrows();
    let c_in = input.nrows();
    let mut d_kernel = Array3::<f64>::zeros((c_out, c_in, kernel));
    let mut d_bias = Array1::<f64>::zeros(c_out);
    for o in 0..c_out {
        let d = d_pre.row(o);
        d_bias[o] = d.sum();
        for i in 0..c_in {
            let x = input.row(i);
            for k in 0..kernel {
                let mut acc = 0.0;
                for (t, &g) in d.iter().enumerate() {
                    acc += g * x[t * stride + k];
                }
                d_kernel[[o, i, k]] = acc;
            }
        }
    }
    LayerWeights {
        kernel: d_kernel,
        bias: d_bias,
    }
}

fn times_derivative(
    spec: &ArchitectureSpec,
    trace: &LayerTrace,
    l: usize,
    d_act: &Array2<f64>,
) -> Array2<f64> {
    let activation = spec.layers[l - 1].activation;
    let mut d_pre = d_act.clone();
    Zip::from(&mut d_pre)
        .and(trace.pre_activation(l))
        .for_each(|d, &z| *d *= activation.derivative(z));
    d_pre
}

/// Propagates a gradient on the pre-activation of layer `top` down to the
/// input. Returns gradients for activations `A_0 .. A_{top-1}`, indexed by
/// layer.
fn backprop_from_preact(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    trace: &LayerTrace,
    top: usize,
    d_pre_top: Array2<f64>,
) -> Vec<Array2<f64>> {
    let mut grads: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); top];
    let mut d_pre = d_pre_top;
    for l in (1..=top).rev() {
        let in_frames = trace.activation(l - 1).ncols();
        let d_act = conv1d_backward_input(
            d_pre.view(),
            &weights.layers[l - 1],
            spec.layers[l - 1].stride,
            in_frames,
        );
        if l > 1 {
            d_pre = times_derivative(spec, trace, l - 1, &d_act);
        }
        grads[l - 1] = d_act;
    }
    grads
}

fn check_target(trace: &LayerTrace, target: Target) -> Result<()> {
    let logits = trace.logits();
    if target.class_index >= logits.nrows() {
        return Err(Error::Index {
            what: "class",
            index: target.class_index,
            len: logits.nrows(),
        });
    }
    if target.output_frame >= logits.ncols() {
        return Err(Error::Index {
            what: "output frame",
            index: target.output_frame,
            len: logits.ncols(),
        });
    }
    Ok(())
}

/// Sensitivities of the score selected by `target` and `mode`.
pub fn backward_target(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    trace: &LayerTrace,
    target: Target,
    mode: TargetMode,
) -> Result<SensitivityTrace> {
    let depth = spec.num_layers();
    if trace.depth() != depth {
        return Err(Error::Config(format!(
            "trace has {} layers, architecture has {depth}",
            trace.depth()
        )));
    }
    check_target(trace, target)?;
    let logits = trace.logits();
    let mut top = Array2::<f64>::zeros(logits.dim());
    let (c, t) = (target.class_index, target.output_frame);
    match mode {
        TargetMode::Logit => top[[c, t]] = 1.0,
        TargetMode::Softmax => {
            let column = logits.column(t);
            let max = column.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let exp: Vec<f64> = column.iter().map(|&v| (v - max).exp()).collect();
            let total: f64 = exp.iter().sum();
            let p_c = exp[c] / total;
            for (j, e) in exp.iter().enumerate() {
                let p_j = e / total;
                top[[j, t]] = p_c * (if j == c { 1.0 } else { 0.0 } - p_j);
            }
        }
    }
    let d_pre = times_derivative(spec, trace, depth, &top);
    let mut grads = backprop_from_preact(spec, weights, trace, depth, d_pre);
    let input = std::mem::take(&mut grads[0]);
    let mut layers: Vec<Array2<f64>> = grads.into_iter().skip(1).collect();
    layers.push(top);
    Ok(SensitivityTrace {
        target,
        mode,
        input,
        layers,
    })
}

/// Sensitivities of the pre-softmax logit `logits[class_index, output_frame]`.
pub fn backward_onehot(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    trace: &LayerTrace,
    class_index: usize,
    output_frame: usize,
) -> Result<SensitivityTrace> {
    backward_target(
        spec,
        weights,
        trace,
        Target {
            class_index,
            output_frame,
        },
        TargetMode::Logit,
    )
}

/// Gradients of `Σ_{c,t} d_logits[c,t] · logits[c,t]` with respect to every
/// kernel and bias.
pub fn weight_gradients(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    trace: &LayerTrace,
    d_logits: ArrayView2<f64>,
) -> Vec<LayerWeights> {
    let depth = spec.num_layers();
    let mut grads: Vec<Option<LayerWeights>> = vec![None; depth];
    let mut d_act = d_logits.to_owned();
    for l in (1..=depth).rev() {
        let layer = &spec.layers[l - 1];
        let d_pre = times_derivative(spec, trace, l, &d_act);
        grads[l - 1] = Some(conv1d_backward_weights(
            d_pre.view(),
            trace.activation(l - 1),
            layer.kernel,
            layer.stride,
        ));
        if l > 1 {
            d_act = conv1d_backward_input(
                d_pre.view(),
                &weights.layers[l - 1],
                layer.stride,
                trace.activation(l - 1).ncols(),
            );
        }
    }
    grads.into_iter().map(|g| g.expect("filled")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    Zero,
}

impl Sign {
    /// Sign with `sign(0) = 0`.
    pub fn of(x: f64) -> Sign {
        if x > 0.0 {
            Sign::Positive
        } else if x < 0.0 {
            Sign::Negative
        } else {
            Sign::Zero
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
            Sign::Zero => 0.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
        }
    }
}

/// Joint pre-activation objective on the input:
///
/// `loss = −Σ_{n:+} Z_l[n, frame] + Σ_{n:−} Z_l[n, frame] + l1·Σ|x| + l2·Σx²`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub layer: usize,
    pub frame: usize,
    pub neurons: Vec<(usize, Sign)>,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputGradient {
    pub loss: f64,
    pub gradient: Array2<f64>,
}

fn check_loss_spec(spec: &ArchitectureSpec, loss: &LossSpec) -> Result<()> {
    if loss.layer == 0 || loss.layer > spec.num_layers() {
        return Err(Error::Index {
            what: "layer",
            index: loss.layer,
            len: spec.num_layers(),
        });
    }
    let channels = spec.channels(loss.layer);
    if let Some(&(n, _)) = loss.neurons.iter().find(|(n, _)| *n >= channels) {
        return Err(Error::Index {
            what: "neuron",
            index: n,
            len: channels,
        });
    }
    Ok(())
}

fn loss_value(trace: &LayerTrace, loss: &LossSpec) -> Result<f64> {
    let pre = trace.pre_activation(loss.layer);
    if loss.frame >= pre.ncols() {
        return Err(Error::Index {
            what: "frame",
            index: loss.frame,
            len: pre.ncols(),
        });
    }
    let objective: f64 = loss
        .neurons
        .iter()
        .map(|&(n, sign)| -sign.value() * pre[[n, loss.frame]])
        .sum();
    let l1: f64 = trace.input.iter().map(|x| x.abs()).sum();
    let l2: f64 = trace.input.iter().map(|x| x * x).sum();
    Ok(objective + loss.l1 * l1 + loss.l2 * l2)
}

/// Value of the joint pre-activation loss for `input`.
pub fn input_loss(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    input: ArrayView2<f64>,
    loss: &LossSpec,
) -> Result<f64> {
    check_loss_spec(spec, loss)?;
    let trace = forward_to(spec, weights, input, loss.layer)?;
    loss_value(&trace, loss)
}

/// Loss value and its gradient with respect to the input. The L1 term uses
/// the subgradient `sign(x)` with `sign(0) = 0`.
pub fn grad_wrt_input(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    input: ArrayView2<f64>,
    loss: &LossSpec,
) -> Result<InputGradient> {
    check_loss_spec(spec, loss)?;
    let trace = forward_to(spec, weights, input, loss.layer)?;
    let value = loss_value(&trace, loss)?;
    let mut d_pre = Array2::<f64>::zeros(trace.pre_activation(loss.layer).dim());
    for &(n, sign) in &loss.neurons {
        d_pre[[n, loss.frame]] -= sign.value();
    }
    let mut grads = backprop_from_preact(spec, weights, &trace, loss.layer, d_pre);
    let mut gradient = std::mem::take(&mut grads[0]);
    Zip::from(&mut gradient)
        .and(&trace.input)
        .for_each(|g, &x| *g += loss.l1 * Sign::of(x).value() + 2.0 * loss.l2 * x);
    Ok(InputGradient {
        loss: value,
        gradient,
    })
}

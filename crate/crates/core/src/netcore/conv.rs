use ndarray::{Array2, ArrayView2};

use super::{receptive_field, ArchitectureSpec, LayerWeights, ModelWeights, ReceptiveField};
use crate::{Error, Result};

/// Valid (unpadded) strided 1D convolution:
/// `out[o, t] = bias[o] + Σ_{i,k} w[o, i, k] · input[i, t·stride + k]`.
pub fn conv1d_forward(
    input: ArrayView2<f64>,
    layer: &LayerWeights,
    stride: usize,
) -> Result<Array2<f64>> {
    let (c_in, frames) = input.dim();
    let (c_out, w_in, kernel) = layer.kernel.dim();
    if c_in != w_in {
        return Err(Error::Config(format!(
            "convolution expects {w_in} input channels, got {c_in}"
        )));
    }
    if stride == 0 {
        return Err(Error::Config("stride must be >= 1".into()));
    }
    if frames < kernel {
        return Err(Error::InputTooShort {
            needed: kernel,
            got: frames,
        });
    }
    let out_frames = (frames - kernel) / stride + 1;
    let mut out = Array2::<f64>::zeros((c_out, out_frames));
    for o in 0..c_out {
        let mut row = out.row_mut(o);
        row.fill(layer.bias[o]);
        for i in 0..c_in {
            let x = input.row(i);
            for k in 0..kernel {
                let w = layer.kernel[[o, i, k]];
                if w == 0.0 {
                    continue;
                }
                for (t, acc) in row.iter_mut().enumerate() {
                    *acc += w * x[t * stride + k];
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub pre_activation: Array2<f64>,
    pub activation: Array2<f64>,
    pub field: ReceptiveField,
}

/// Activations of every computed layer for one input. Layer 0 is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTrace {
    pub input: Array2<f64>,
    pub layers: Vec<LayerState>,
}

impl LayerTrace {
    /// Number of computed conv layers.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn activation(&self, l: usize) -> ArrayView2<'_, f64> {
        if l == 0 {
            self.input.view()
        } else {
            self.layers[l - 1].activation.view()
        }
    }

    pub fn pre_activation(&self, l: usize) -> ArrayView2<'_, f64> {
        assert!(l >= 1, "the input has no pre-activation");
        self.layers[l - 1].pre_activation.view()
    }

    pub fn field(&self, l: usize) -> ReceptiveField {
        if l == 0 {
            ReceptiveField::INPUT
        } else {
            self.layers[l - 1].field
        }
    }

    /// Output of the deepest computed layer.
    pub fn logits(&self) -> ArrayView2<'_, f64> {
        self.activation(self.depth())
    }

    /// Input frame at the center of frame `t` in layer `l`.
    pub fn frame_center(&self, l: usize, t: usize) -> usize {
        self.field(l).center(t)
    }
}

fn check_input(spec: &ArchitectureSpec, input: &ArrayView2<f64>, upto: usize) -> Result<()> {
    if input.nrows() != spec.input_bins {
        return Err(Error::Config(format!(
            "input has {} bins, architecture expects {}",
            input.nrows(),
            spec.input_bins
        )));
    }
    let needed = receptive_field(spec, upto)?.size;
    if input.ncols() < needed {
        return Err(Error::InputTooShort {
            needed,
            got: input.ncols(),
        });
    }
    Ok(())
}

/// Runs layers `1..=upto` and records pre-activations and activations.
pub fn forward_to(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    input: ArrayView2<f64>,
    upto: usize,
) -> Result<LayerTrace> {
    weights.check_shapes(spec)?;
    check_input(spec, &input, upto)?;
    let mut layers: Vec<LayerState> = Vec::with_capacity(upto);
    for l in 1..=upto {
        let layer = &spec.layers[l - 1];
        let prev = match layers.last() {
            Some(state) => state.activation.view(),
            None => input.view(),
        };
        let pre = conv1d_forward(prev, &weights.layers[l - 1], layer.stride)?;
        let act = pre.mapv(|z| layer.activation.apply(z));
        layers.push(LayerState {
            pre_activation: pre,
            activation: act,
            field: receptive_field(spec, l)?,
        });
    }
    Ok(LayerTrace {
        input: input.to_owned(),
        layers,
    })
}

/// Full forward pass; the final layer's activation is the class-logit matrix.
pub fn forward(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    spectrogram: ArrayView2<f64>,
) -> Result<LayerTrace> {
    forward_to(spec, weights, spectrogram, spec.num_layers())
}

/// Continues the forward pass from a given activation of layer `layer`
/// (0 = input) and returns the logits.
pub fn forward_from(
    spec: &ArchitectureSpec,
    weights: &ModelWeights,
    layer: usize,
    activation: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    if layer > spec.num_layers() {
        return Err(Error::Index {
            what: "layer",
            index: layer,
            len: spec.num_layers(),
        });
    }
    weights.check_shapes(spec)?;
    if activation.nrows() != spec.channels(layer) {
        return Err(Error::Config(format!(
            "layer {layer} activation has {} channels, expected {}",
            activation.nrows(),
            spec.channels(layer)
        )));
    }
    let mut current = activation.to_owned();
    for l in layer + 1..=spec.num_layers() {
        let s = &spec.layers[l - 1];
        let pre = conv1d_forward(current.view(), &weights.layers[l - 1], s.stride)?;
        current = pre.mapv(|z| s.activation.apply(z));
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{Activation, LayerSpec};
    use ndarray::{arr2, Array1, Array3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(kernel: &[f64]) -> LayerWeights {
        LayerWeights {
            kernel: Array3::from_shape_vec((1, 1, kernel.len()), kernel.to_vec()).unwrap(),
            bias: Array1::zeros(1),
        }
    }

    #[test]
    fn identity_kernel() {
        let out = conv1d_forward(arr2(&[[1.0, 2.0, 3.0]]).view(), &single(&[1.0]), 1).unwrap();
        assert_eq!(out, arr2(&[[1.0, 2.0, 3.0]]));
    }

    #[test]
    fn shifted_pick() {
        let input = arr2(&[[1.0, 2.0, 3.0, 4.0]]);
        let out = conv1d_forward(input.view(), &single(&[0.0, 1.0, 0.0]), 1).unwrap();
        assert_eq!(out, arr2(&[[2.0, 3.0]]));
    }

    #[test]
    fn too_short_and_channel_mismatch() {
        let input = arr2(&[[1.0, 2.0]]);
        assert!(matches!(
            conv1d_forward(input.view(), &single(&[1.0, 1.0, 1.0]), 1),
            Err(Error::InputTooShort { needed: 3, got: 2 })
        ));
        let two = arr2(&[[1.0, 2.0], [3.0, 4.0]]);
        assert!(matches!(
            conv1d_forward(two.view(), &single(&[1.0]), 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn random_strided_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (c_in, c_out, kernel, stride, frames) = (2, 3, 3, 2, 11);
        let layer = LayerWeights {
            kernel: Array3::from_shape_fn((c_out, c_in, kernel), |_| rng.random_range(-1.0..1.0)),
            bias: Array1::from_shape_fn(c_out, |_| rng.random_range(-1.0..1.0)),
        };
        let input = Array2::from_shape_fn((c_in, frames), |_| rng.random_range(-1.0..1.0));
        let out = conv1d_forward(input.view(), &layer, stride).unwrap();
        let out_frames = (frames - kernel) / stride + 1;
        assert_eq!(out.dim(), (c_out, out_frames));
        for o in 0..c_out {
            for t in 0..out_frames {
                let mut acc = layer.bias[o];
                for i in 0..c_in {
                    for k in 0..kernel {
                        acc += layer.kernel[[o, i, k]] * input[[i, t * stride + k]];
                    }
                }
                assert!((out[[o, t]] - acc).abs() < 1e-12);
            }
        }
    }

    fn spec3() -> ArchitectureSpec {
        let mk = |i, o, k, s, a| LayerSpec {
            in_channels: i,
            out_channels: o,
            kernel: k,
            stride: s,
            activation: a,
        };
        ArchitectureSpec {
            input_bins: 3,
            layers: vec![
                mk(3, 4, 3, 1, Activation::Relu),
                mk(4, 4, 2, 2, Activation::Tanh),
                mk(4, 2, 2, 1, Activation::Identity),
            ],
        }
    }

    #[test]
    fn identity_layer_trace_equals_input() {
        let spec = ArchitectureSpec {
            input_bins: 1,
            layers: vec![LayerSpec {
                in_channels: 1,
                out_channels: 1,
                kernel: 1,
                stride: 1,
                activation: Activation::Identity,
            }],
        };
        let weights = ModelWeights {
            layers: vec![single(&[1.0])],
        };
        let x = arr2(&[[0.5, -1.0, 2.0]]);
        let trace = forward(&spec, &weights, x.view()).unwrap();
        assert_eq!(trace.activation(1), x.view());
    }

    #[test]
    fn relu_on_negative_preactivations_is_zero() {
        let spec = ArchitectureSpec {
            input_bins: 1,
            layers: vec![LayerSpec {
                in_channels: 1,
                out_channels: 1,
                kernel: 1,
                stride: 1,
                activation: Activation::Relu,
            }],
        };
        let mut weights = ModelWeights {
            layers: vec![single(&[1.0])],
        };
        weights.layers[0].bias[0] = -10.0;
        let trace = forward(&spec, &weights, arr2(&[[1.0, 2.0, 3.0]]).view()).unwrap();
        assert!(trace.activation(1).iter().all(|&a| a == 0.0));
    }

    #[test]
    fn logits_match_composed_layers_and_forward_from() {
        let spec = spec3();
        let weights = ModelWeights::init(&spec, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((3, 12), |_| rng.random_range(-1.0..1.0));
        let trace = forward(&spec, &weights, x.view()).unwrap();
        let mut a = x.clone();
        for (s, w) in spec.layers.iter().zip(&weights.layers) {
            a = conv1d_forward(a.view(), w, s.stride)
                .unwrap()
                .mapv(|z| s.activation.apply(z));
        }
        assert_eq!(trace.logits(), a.view());
        for l in 0..=3 {
            let resumed = forward_from(&spec, &weights, l, trace.activation(l)).unwrap();
            assert_eq!(resumed, a);
        }
    }

    #[test]
    fn forward_rejects_short_input_and_wrong_bins() {
        let spec = spec3();
        let weights = ModelWeights::init(&spec, 3);
        let rf = receptive_field(&spec, 3).unwrap().size;
        let short = Array2::zeros((3, rf - 1));
        assert!(matches!(
            forward(&spec, &weights, short.view()),
            Err(Error::InputTooShort { .. })
        ));
        let wrong = Array2::zeros((2, 20));
        assert!(matches!(
            forward(&spec, &weights, wrong.view()),
            Err(Error::Config(_))
        ));
        assert!(forward(&spec, &weights, Array2::zeros((3, rf)).view()).is_ok());
    }

    #[test]
    fn forward_is_deterministic() {
        let spec = spec3();
        let weights = ModelWeights::init(&spec, 9);
        let x = Array2::from_shape_fn((3, 15), |(i, t)| ((i * 7 + t) as f64).sin());
        let a = forward(&spec, &weights, x.view()).unwrap();
        let b = forward(&spec, &weights, x.view()).unwrap();
        assert_eq!(a, b);
    }
}

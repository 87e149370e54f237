use serde::{Deserialize, Serialize};

use super::ArchitectureSpec;
use crate::{Error, Result};

/// Input-frame footprint of one frame of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptiveField {
    /// Input frames influencing one frame of the layer.
    pub size: usize,
    /// Product of strides up to and including the layer.
    pub stride_product: usize,
    /// `(size - 1) / 2`, the offset of the window center from its start.
    pub center_offset: usize,
}

impl ReceptiveField {
    /// The input spectrogram itself.
    pub const INPUT: ReceptiveField = ReceptiveField {
        size: 1,
        stride_product: 1,
        center_offset: 0,
    };

    /// Input frame at the center of layer frame `t`.
    pub fn center(&self, t: usize) -> usize {
        t * self.stride_product + self.center_offset
    }

    /// Inclusive input-frame range feeding layer frame `t`.
    pub fn span(&self, t: usize) -> (usize, usize) {
        let start = t * self.stride_product;
        (start, start + self.size - 1)
    }
}

/// Receptive field of layer `l`; `l == 0` denotes the input and yields
/// [`ReceptiveField::INPUT`].
pub fn receptive_field(spec: &ArchitectureSpec, l: usize) -> Result<ReceptiveField> {
    if l > spec.num_layers() {
        return Err(Error::Index {
            what: "layer",
            index: l,
            len: spec.num_layers(),
        });
    }
    let mut rf = ReceptiveField::INPUT;
    for layer in &spec.layers[..l] {
        let size = rf.size + (layer.kernel - 1) * rf.stride_product;
        let stride_product = rf.stride_product * layer.stride;
        rf = ReceptiveField {
            size,
            stride_product,
            center_offset: (size - 1) / 2,
        };
    }
    Ok(rf)
}

/// Receptive fields of layers `0..=L`.
pub fn receptive_fields(spec: &ArchitectureSpec) -> Vec<ReceptiveField> {
    (0..=spec.num_layers())
        .map(|l| receptive_field(spec, l).expect("in range"))
        .collect()
}

/// Inclusive range of frames in layer `lower` that can influence frame
/// `frame` of layer `upper` (`lower <= upper`).
pub fn receptive_cone(
    spec: &ArchitectureSpec,
    upper: usize,
    frame: usize,
    lower: usize,
) -> (usize, usize) {
    debug_assert!(lower <= upper && upper <= spec.num_layers());
    let (mut a, mut b) = (frame, frame);
    for l in (lower + 1..=upper).rev() {
        let layer = &spec.layers[l - 1];
        a *= layer.stride;
        b = b * layer.stride + layer.kernel - 1;
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{Activation, LayerSpec};

    fn spec(layers: &[(usize, usize)]) -> ArchitectureSpec {
        ArchitectureSpec {
            input_bins: 1,
            layers: layers
                .iter()
                .map(|&(kernel, stride)| LayerSpec {
                    in_channels: 1,
                    out_channels: 1,
                    kernel,
                    stride,
                    activation: Activation::Identity,
                })
                .collect(),
        }
    }

    #[test]
    fn single_layer() {
        let rf = receptive_field(&spec(&[(3, 1)]), 1).unwrap();
        assert_eq!((rf.size, rf.stride_product, rf.center_offset), (3, 1, 1));
    }

    #[test]
    fn unit_kernels_keep_unit_field() {
        let s = spec(&[(1, 1), (1, 2), (1, 1)]);
        for l in 1..=3 {
            assert_eq!(receptive_field(&s, l).unwrap().size, 1);
        }
    }

    #[test]
    fn strided_stack() {
        let s = spec(&[(48, 2), (7, 1)]);
        let rf = receptive_field(&s, 2).unwrap();
        assert_eq!(rf.size, 60);
        assert_eq!(rf.stride_product, 2);
        assert_eq!(rf.center(3), 6 + 29);
    }

    #[test]
    fn out_of_range_layer() {
        assert!(matches!(
            receptive_field(&spec(&[(3, 1)]), 2),
            Err(Error::Index { .. })
        ));
    }

    #[test]
    fn cone_down_to_input_matches_span() {
        let s = spec(&[(5, 2), (3, 3), (2, 1)]);
        let rf = receptive_field(&s, 3).unwrap();
        for t in 0..4 {
            assert_eq!(receptive_cone(&s, 3, t, 0), rf.span(t));
        }
        assert_eq!(receptive_cone(&s, 2, 4, 2), (4, 4));
    }
}

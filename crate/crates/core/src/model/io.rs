use std::fs;
use std::path::Path;

use ndarray::{Array1, Array3};

use crate::netcore::{ArchitectureSpec, LayerWeights, ModelWeights};
use crate::{Error, Result};

pub const WEIGHTS_MAGIC: &[u8; 4] = b"GNW1";

/// Writes `GNW1`, u32 layer count, then per layer u32 (out, in, kernel,
/// stride) followed by the f32 kernel and f32 bias, all little-endian and
/// row-major.
pub fn save_weights(path: &Path, spec: &ArchitectureSpec, weights: &ModelWeights) -> Result<()> {
    weights.check_shapes(spec)?;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(WEIGHTS_MAGIC);
    bytes.extend_from_slice(&(spec.num_layers() as u32).to_le_bytes());
    for (layer, w) in spec.layers.iter().zip(&weights.layers) {
        for v in [
            layer.out_channels,
            layer.in_channels,
            layer.kernel,
            layer.stride,
        ] {
            bytes.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in w.kernel.iter().chain(w.bias.iter()) {
            bytes.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct Cursor<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("truncated at byte {} (need {n} more)", self.pos),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(4 * n)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect())
    }
}

/// Reads a weight file and checks it against `spec`. Nothing is returned
/// unless the whole file parses.
pub fn load_weights(path: &Path, spec: &ArchitectureSpec) -> Result<ModelWeights> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut cur = Cursor {
        path,
        bytes: &bytes,
        pos: 0,
    };
    let magic = cur.take(4)?;
    if &magic[..3] != b"GNW" {
        return Err(Error::format(path, "bad magic"));
    }
    if magic[3] != WEIGHTS_MAGIC[3] {
        return Err(Error::Version {
            what: "weight file",
            found: magic[3].wrapping_sub(b'0') as u32,
            expected: 1,
        });
    }
    let count = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(count);
    for l in 1..=count {
        let (out, inp, kernel, stride) = (
            cur.u32()? as usize,
            cur.u32()? as usize,
            cur.u32()? as usize,
            cur.u32()? as usize,
        );
        if let Some(s) = spec.layers.get(l - 1) {
            if (out, inp, kernel, stride) != (s.out_channels, s.in_channels, s.kernel, s.stride) {
                return Err(Error::ShapeMismatch {
                    layer: l,
                    detail: format!(
                        "file has (out {out}, in {inp}, kernel {kernel}, stride {stride}), \
                         architecture has (out {}, in {}, kernel {}, stride {})",
                        s.out_channels, s.in_channels, s.kernel, s.stride
                    ),
                });
            }
        }
        let kernel_values = cur.f32s(out * inp * kernel)?;
        let bias = cur.f32s(out)?;
        layers.push(LayerWeights {
            kernel: Array3::from_shape_vec((out, inp, kernel), kernel_values).expect("length read"),
            bias: Array1::from(bias),
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(path, "trailing bytes after last layer"));
    }
    let weights = ModelWeights { layers };
    weights.check(spec)?;
    Ok(weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcore::{Activation, LayerSpec};

    fn spec(widths: &[usize]) -> ArchitectureSpec {
        ArchitectureSpec {
            input_bins: widths[0],
            layers: widths
                .windows(2)
                .map(|w| LayerSpec {
                    in_channels: w[0],
                    out_channels: w[1],
                    kernel: 3,
                    stride: 1,
                    activation: Activation::Relu,
                })
                .collect(),
        }
    }

    #[test]
    fn round_trip_is_identical_at_f32() {
        let s = spec(&[4, 3, 2]);
        let w = ModelWeights::init(&s, 5).to_f32_precision();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_weights(&path, &s, &w).unwrap();
        assert_eq!(load_weights(&path, &s).unwrap(), w);
        assert_eq!(&fs::read(&path).unwrap()[..4], b"GNW1");
    }

    #[test]
    fn truncated_file_is_a_format_error() {
        let s = spec(&[4, 3, 2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_weights(&path, &s, &ModelWeights::init(&s, 5)).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_weights(&path, &s), Err(Error::Format { .. })));
    }

    #[test]
    fn other_architecture_names_first_bad_layer() {
        let s = spec(&[4, 3, 2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_weights(&path, &s, &ModelWeights::init(&s, 5)).unwrap();
        match load_weights(&path, &spec(&[4, 3, 5])) {
            Err(Error::ShapeMismatch { layer, .. }) => assert_eq!(layer, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_weights(&path, &spec(&[4, 3, 2, 2])),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let s = spec(&[2, 2]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_weights(&path, &s, &ModelWeights::init(&s, 1)).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[3] = b'2';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_weights(&path, &s),
            Err(Error::Version { found: 2, .. })
        ));
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_weights(&path, &s), Err(Error::Format { .. })));
    }
}

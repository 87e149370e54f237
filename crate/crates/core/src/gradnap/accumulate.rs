use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::AlignedWindow;
use crate::{Error, Result};

/// How mean gradients become a `[0, 1]` mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// `mean|G| / max(mean|G|)`; zero gradients stay zero.
    #[default]
    AbsMax,
    /// `(ḡ − min ḡ) / (max ḡ − min ḡ)` over the mean signed gradient.
    SignedMinMax,
}

/// Running sums for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSums {
    pub activation: Array2<f64>,
    pub gradient: Array2<f64>,
    pub abs_gradient: Array2<f64>,
    pub count: usize,
}

impl LayerSums {
    pub fn zeros(shape: (usize, usize)) -> Self {
        Self {
            activation: Array2::zeros(shape),
            gradient: Array2::zeros(shape),
            abs_gradient: Array2::zeros(shape),
            count: 0,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.activation.dim()
    }

    pub fn accumulate(&mut self, window: &AlignedWindow) -> Result<()> {
        if window.activation.dim() != self.shape() || window.gradient.dim() != self.shape() {
            return Err(Error::Pipeline(format!(
                "layer {} window {:?} does not match accumulator {:?}",
                window.layer,
                window.activation.dim(),
                self.shape()
            )));
        }
        self.activation += &window.activation;
        self.gradient += &window.gradient;
        Zip::from(&mut self.abs_gradient)
            .and(&window.gradient)
            .for_each(|acc, &g| *acc += g.abs());
        self.count += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &LayerSums) -> Result<()> {
        if other.shape() != self.shape() {
            return Err(Error::Pipeline(
                "merging accumulators of different shape".into(),
            ));
        }
        self.activation += &other.activation;
        self.gradient += &other.gradient;
        self.abs_gradient += &other.abs_gradient;
        self.count += other.count;
        Ok(())
    }

    fn mean(&self, sum: &Array2<f64>) -> Array2<f64> {
        let n = self.count as f64;
        sum.mapv(|v| v / n)
    }

    pub fn mean_activation(&self) -> Array2<f64> {
        self.mean(&self.activation)
    }

    pub fn mean_abs_gradient(&self) -> Array2<f64> {
        self.mean(&self.abs_gradient)
    }

    pub fn mean_gradient(&self) -> Array2<f64> {
        self.mean(&self.gradient)
    }
}

/// Per-layer sums for one group (or for the baseline).
#[derive(Debug, Clone, PartialEq)]
pub struct NapAccumulator {
    pub layers: Vec<LayerSums>,
}

impl NapAccumulator {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        Self {
            layers: shapes.iter().map(|&s| LayerSums::zeros(s)).collect(),
        }
    }

    /// Adds one aligned occurrence (a window per layer, input first).
    pub fn accumulate(&mut self, windows: &[AlignedWindow]) -> Result<()> {
        if windows.len() != self.layers.len() {
            return Err(Error::Pipeline(format!(
                "{} windows for {} layers",
                windows.len(),
                self.layers.len()
            )));
        }
        for (sums, window) in self.layers.iter_mut().zip(windows) {
            sums.accumulate(window)?;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &NapAccumulator) -> Result<()> {
        if other.layers.len() != self.layers.len() {
            return Err(Error::Pipeline(
                "merging accumulators of different depth".into(),
            ));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.merge(b)?;
        }
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.layers.first().map_or(0, |l| l.count)
    }
}

/// Gradient mask in `[0, 1]`, or `None` when it is degenerate (all-zero
/// mean gradients, or a constant signed mean).
pub fn gradient_mask(sums: &LayerSums, mode: MaskMode) -> Option<Array2<f64>> {
    match mode {
        MaskMode::AbsMax => {
            let mean = sums.mean_abs_gradient();
            let max = mean.fold(0.0f64, |m, &v| m.max(v));
            (max > 0.0).then(|| mean.mapv(|v| v / max))
        }
        MaskMode::SignedMinMax => {
            let mean = sums.mean_gradient();
            let max = mean.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let min = mean.fold(f64::INFINITY, |m, &v| m.min(v));
            (max > min).then(|| mean.mapv(|v| (v - min) / (max - min)))
        }
    }
}

/// Baseline-subtracted, gradient-masked mean activation of one layer.
/// Returns the matrix and whether the mask was degenerate (then the matrix
/// is all zeros).
pub fn finalize_layer(
    group: &LayerSums,
    baseline: &LayerSums,
    mode: MaskMode,
) -> Result<(Array2<f64>, bool)> {
    if group.count == 0 || baseline.count == 0 {
        return Err(Error::Pipeline(format!(
            "cannot finalize with {} group and {} baseline occurrences",
            group.count, baseline.count
        )));
    }
    if group.shape() != baseline.shape() {
        return Err(Error::Pipeline("group and baseline windows differ".into()));
    }
    let Some(mask) = gradient_mask(group, mode) else {
        return Ok((Array2::zeros(group.shape()), true));
    };
    let mut nap = group.mean_activation() - baseline.mean_activation();
    Zip::from(&mut nap).and(&mask).for_each(|v, &m| {
        *v = if m == 0.0 { 0.0 } else { *v * m };
    });
    Ok((nap, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;

    fn window(act: Array2<f64>, grad: Array2<f64>) -> AlignedWindow {
        AlignedWindow {
            layer: 1,
            center: 0,
            activation: act,
            gradient: grad,
        }
    }

    #[test]
    fn single_window_mean_is_the_window() {
        let w = window(arr2(&[[1.0, -2.0]]), arr2(&[[0.5, -0.5]]));
        let mut sums = LayerSums::zeros((1, 2));
        sums.accumulate(&w).unwrap();
        assert_eq!(sums.mean_activation(), w.activation);
        assert_eq!(sums.mean_abs_gradient(), arr2(&[[0.5, 0.5]]));
    }

    #[test]
    fn opposite_windows_cancel() {
        let a = arr2(&[[1.0, -2.0], [3.0, 0.25]]);
        let mut sums = LayerSums::zeros((2, 2));
        sums.accumulate(&window(a.clone(), a.clone())).unwrap();
        sums.accumulate(&window(-a.clone(), a.clone())).unwrap();
        assert!(sums.mean_activation().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_a_pipeline_error() {
        let mut sums = LayerSums::zeros((1, 3));
        let w = window(arr2(&[[1.0, 2.0]]), arr2(&[[1.0, 2.0]]));
        assert!(matches!(sums.accumulate(&w), Err(Error::Pipeline(_))));
    }

    #[test]
    fn group_equal_to_baseline_is_zero() {
        let mut sums = LayerSums::zeros((2, 3));
        sums.accumulate(&window(
            Array2::from_elem((2, 3), 0.7),
            Array2::from_elem((2, 3), 1.0),
        ))
        .unwrap();
        sums.accumulate(&window(
            Array2::from_elem((2, 3), -0.2),
            Array2::from_elem((2, 3), 0.5),
        ))
        .unwrap();
        let (nap, degenerate) = finalize_layer(&sums, &sums, MaskMode::AbsMax).unwrap();
        assert!(!degenerate);
        assert!(nap.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn constant_gradient_means_unit_mask() {
        let mut group = LayerSums::zeros((1, 3));
        group
            .accumulate(&window(arr2(&[[1.0, 2.0, 3.0]]), arr2(&[[-0.4, 0.4, 0.4]])))
            .unwrap();
        let mut baseline = LayerSums::zeros((1, 3));
        baseline
            .accumulate(&window(arr2(&[[0.5, 0.5, 0.5]]), arr2(&[[1.0, 1.0, 1.0]])))
            .unwrap();
        let (nap, _) = finalize_layer(&group, &baseline, MaskMode::AbsMax).unwrap();
        assert_eq!(nap, arr2(&[[0.5, 1.5, 2.5]]));
    }

    #[test]
    fn mask_matches_direct_formula() {
        let grads = [
            arr2(&[[0.2, -1.0, 0.0], [0.4, 0.1, -0.3]]),
            arr2(&[[-0.6, 0.5, 0.0], [0.0, 0.3, 0.9]]),
        ];
        let acts = [
            arr2(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
            arr2(&[[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]),
        ];
        let mut group = LayerSums::zeros((2, 3));
        for (a, g) in acts.iter().zip(&grads) {
            group.accumulate(&window(a.clone(), g.clone())).unwrap();
        }
        let mut baseline = group.clone();
        baseline
            .accumulate(&window(
                Array2::from_elem((2, 3), 2.0),
                Array2::zeros((2, 3)),
            ))
            .unwrap();
        let (nap, _) = finalize_layer(&group, &baseline, MaskMode::AbsMax).unwrap();
        // oracle, written out entry by entry
        let mean_abs = |i: usize, j: usize| (grads[0][[i, j]].abs() + grads[1][[i, j]].abs()) / 2.0;
        let max = (0..2)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| mean_abs(i, j))
            .fold(0.0, f64::max);
        let mut min_pos = (0, 0);
        for i in 0..2 {
            for j in 0..3 {
                if mean_abs(i, j) < mean_abs(min_pos.0, min_pos.1) {
                    min_pos = (i, j);
                }
                let group_mean = (acts[0][[i, j]] + acts[1][[i, j]]) / 2.0;
                let base_mean = (acts[0][[i, j]] + acts[1][[i, j]] + 2.0) / 3.0;
                let want = (group_mean - base_mean) * mean_abs(i, j) / max;
                assert!((nap[[i, j]] - want).abs() < 1e-12);
            }
        }
        // the zero-gradient position is exactly zero
        assert_eq!(min_pos, (0, 2));
        assert_eq!(nap[[0, 2]].to_bits(), 0.0f64.to_bits());
        let mask = gradient_mask(&group, MaskMode::AbsMax).unwrap();
        assert_eq!(mask[[0, 2]], 0.0);
        assert!(mask.iter().any(|&m| m == 1.0));
    }

    #[test]
    fn all_zero_gradient_is_degenerate() {
        let mut group = LayerSums::zeros((1, 2));
        group
            .accumulate(&window(arr2(&[[1.0, 2.0]]), arr2(&[[0.0, 0.0]])))
            .unwrap();
        let (nap, degenerate) = finalize_layer(&group, &group, MaskMode::AbsMax).unwrap();
        assert!(degenerate);
        assert!(nap.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn signed_min_max_mask_spans_unit_interval() {
        let mut group = LayerSums::zeros((1, 3));
        group
            .accumulate(&window(arr2(&[[1.0, 1.0, 1.0]]), arr2(&[[-2.0, 0.0, 2.0]])))
            .unwrap();
        let mask = gradient_mask(&group, MaskMode::SignedMinMax).unwrap();
        assert_eq!(mask, arr2(&[[0.0, 0.5, 1.0]]));
    }

    #[test]
    fn empty_group_is_an_error() {
        let empty = LayerSums::zeros((1, 1));
        assert!(finalize_layer(&empty, &empty, MaskMode::AbsMax).is_err());
    }

    #[test]
    fn accumulation_order_does_not_matter() {
        use rand::{seq::SliceRandom, Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let windows: Vec<AlignedWindow> = (0..50)
            .map(|_| {
                window(
                    Array2::from_shape_fn((3, 5), |_| rng.random_range(-5.0..5.0)),
                    Array2::from_shape_fn((3, 5), |_| rng.random_range(-1.0..1.0)),
                )
            })
            .collect();
        let mut forward = LayerSums::zeros((3, 5));
        windows.iter().for_each(|w| forward.accumulate(w).unwrap());
        let mut shuffled: Vec<&AlignedWindow> = windows.iter().collect();
        shuffled.shuffle(&mut rng);
        let mut halves = [LayerSums::zeros((3, 5)), LayerSums::zeros((3, 5))];
        for (i, w) in shuffled.iter().enumerate() {
            halves[i % 2].accumulate(w).unwrap();
        }
        let [mut a, b] = halves;
        a.merge(&b).unwrap();
        let diff = (&forward.mean_activation() - &a.mean_activation()).mapv(f64::abs);
        assert!(diff.iter().all(|&d| d < 1e-12));
        assert_eq!(a.count, 50);
    }
}

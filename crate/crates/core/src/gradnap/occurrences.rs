use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

/// One maximal run of identical labels in an example's output-frame track.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupOccurrence {
    pub example: usize,
    pub label: usize,
    /// First output frame of the run.
    pub run_start: usize,
    /// Last output frame of the run (inclusive).
    pub run_end: usize,
    /// Frame within the run where the label's logit peaks.
    pub output_frame: usize,
    /// Predicted class at `output_frame`; the gradient target.
    pub target_class: usize,
}

/// Splits `labels` into maximal runs. Each run's representative frame is
/// the earliest frame of maximal `logits[label, t]` within the run.
pub fn find_occurrences(
    example: usize,
    labels: &[usize],
    logits: ArrayView2<f64>,
    predicted: &[usize],
) -> Vec<GroupOccurrence> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let label = labels[start];
        let mut end = start;
        while end + 1 < labels.len() && labels[end + 1] == label {
            end += 1;
        }
        let mut best = start;
        for t in start..=end {
            if logits[[label, t]] > logits[[label, best]] {
                best = t;
            }
        }
        out.push(GroupOccurrence {
            example,
            label,
            run_start: start,
            run_end: end,
            output_frame: best,
            target_class: predicted[best],
        });
        start = end + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn run_length_semantics() {
        let labels = [0, 0, 1, 1, 1, 0];
        let logits = Array2::<f64>::zeros((2, 6));
        let occ = find_occurrences(3, &labels, logits.view(), &labels);
        let runs: Vec<(usize, usize, usize)> = occ
            .iter()
            .map(|o| (o.label, o.run_start, o.run_end))
            .collect();
        assert_eq!(runs, vec![(0, 0, 1), (1, 2, 4), (0, 5, 5)]);
        assert!(occ.iter().all(|o| o.example == 3));
    }

    #[test]
    fn equal_logits_choose_earliest() {
        let labels = [1, 1];
        let logits = ndarray::arr2(&[[0.0, 0.0], [2.0, 2.0]]);
        let occ = find_occurrences(0, &labels, logits.view(), &labels);
        assert_eq!(occ[0].output_frame, 0);
    }

    #[test]
    fn representative_is_logit_peak_and_target_is_prediction() {
        let labels = [1, 1, 1];
        let predicted = [1, 2, 1];
        let logits = ndarray::arr2(&[[0.0, 0.0, 0.0], [0.1, 0.9, 0.3], [0.0, 1.0, 0.0]]);
        let occ = find_occurrences(0, &labels, logits.view(), &predicted);
        assert_eq!(occ[0].output_frame, 1);
        assert_eq!(occ[0].target_class, 2);
    }

    #[test]
    fn empty_track_gives_no_occurrences() {
        let logits = Array2::<f64>::zeros((2, 0));
        assert!(find_occurrences(0, &[], logits.view(), &[]).is_empty());
    }

    proptest! {
        #[test]
        fn runs_match_linear_scan(labels in prop::collection::vec(0usize..3, 0..40)) {
            let logits = Array2::<f64>::zeros((3, labels.len()));
            let occ = find_occurrences(0, &labels, logits.view(), &labels);
            // oracle: a run starts wherever the label changes
            let starts: Vec<usize> = (0..labels.len())
                .filter(|&t| t == 0 || labels[t] != labels[t - 1])
                .collect();
            prop_assert_eq!(occ.len(), starts.len());
            for (o, &s) in occ.iter().zip(&starts) {
                prop_assert_eq!(o.run_start, s);
                prop_assert_eq!(o.label, labels[s]);
                let next = starts.iter().find(|&&x| x > s).copied().unwrap_or(labels.len());
                prop_assert_eq!(o.run_end, next - 1);
            }
        }
    }
}

//! Neuron responsiveness, optimal-input synthesis and action-potential
//! series.

mod featviz;
mod potentials;

use ndarray::Array2;

use crate::netcore::Sign;
use crate::{Error, Result};

pub use featviz::{optimize_input, FeatVizConfig, OptimalInput};
pub use potentials::{
    action_potentials, read_action_potentials_csv, write_action_potentials_csv, ActionPotentials,
    PotentialSeries,
};

/// Signed per-channel responsiveness:
/// `r_n = sign(Σ_i P[n, i]) · Σ_i |P[n, i]|` with `sign(0) = 0`.
pub fn responsiveness(profile: &Array2<f64>) -> Vec<f64> {
    profile
        .rows()
        .into_iter()
        .map(|row| {
            let total: f64 = row.sum();
            let magnitude: f64 = row.iter().map(|v| v.abs()).sum();
            Sign::of(total).value() * magnitude
        })
        .collect()
}

/// The `k` channels with the largest `|r_n|`, lower index first on ties.
pub fn top_responsive(r: &[f64], k: usize) -> Result<Vec<(usize, Sign)>> {
    if k > r.len() {
        return Err(Error::Index {
            what: "top-k",
            index: k,
            len: r.len(),
        });
    }
    let mut order: Vec<usize> = (0..r.len()).collect();
    order.sort_by(|&a, &b| r[b].abs().total_cmp(&r[a].abs()).then(a.cmp(&b)));
    Ok(order
        .into_iter()
        .take(k)
        .map(|n| (n, Sign::of(r[n])))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::arr2;
    use proptest::prelude::*;

    #[test]
    fn direct_examples() {
        assert_eq!(responsiveness(&arr2(&[[1.0, -2.0, 3.0]])), vec![6.0]);
        assert_eq!(responsiveness(&arr2(&[[-1.0, -1.0]])), vec![-2.0]);
        assert_eq!(responsiveness(&arr2(&[[0.0, 0.0]])), vec![0.0]);
        // sum zero but non-zero entries: sign(0) = 0
        assert_eq!(responsiveness(&arr2(&[[1.0, -1.0]])), vec![0.0]);
    }

    #[test]
    fn top_k_examples() {
        let top = top_responsive(&[6.0, -2.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(top, vec![(0, Sign::Positive), (1, Sign::Negative)]);
        assert_eq!(
            top_responsive(&[3.0, -3.0], 1).unwrap(),
            vec![(0, Sign::Positive)]
        );
        assert!(top_responsive(&[1.0], 2).is_err());
    }

    proptest! {
        #[test]
        fn top_k_matches_full_sort(r in prop::collection::vec(-10.0f64..10.0, 1..20), k in 0usize..20) {
            let k = k.min(r.len());
            let got = top_responsive(&r, k).unwrap();
            // oracle: selection by repeated scanning for the next-largest magnitude
            let mut taken = vec![false; r.len()];
            for &(n, sign) in &got {
                let best = (0..r.len()).filter(|&i| !taken[i]).fold(None, |acc: Option<usize>, i| match acc {
                    Some(b) if r[b].abs() >= r[i].abs() => Some(b),
                    _ => Some(i),
                }).unwrap();
                prop_assert_eq!(n, best);
                prop_assert_eq!(sign, Sign::of(r[n]));
                taken[best] = true;
            }
        }

        #[test]
        fn scaling_and_negation(
            values in prop::collection::vec(-5.0f64..5.0, 12),
            c in 0.01f64..100.0,
        ) {
            let p = Array2::from_shape_vec((4, 3), values).unwrap();
            let r = responsiveness(&p);
            let scaled = responsiveness(&p.mapv(|v| v * c));
            for (a, b) in r.iter().zip(&scaled) {
                prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let top: Vec<usize> = top_responsive(&r, 2).unwrap().into_iter().map(|t| t.0).collect();
            let top_scaled: Vec<usize> =
                top_responsive(&scaled, 2).unwrap().into_iter().map(|t| t.0).collect();
            prop_assert_eq!(top, top_scaled);
            let negated = responsiveness(&p.mapv(|v| -v));
            for (a, b) in r.iter().zip(&negated) {
                prop_assert_eq!(*a, -*b);
            }
            let flipped: Vec<(usize, Sign)> = top_responsive(&r, 2)
                .unwrap()
                .into_iter()
                .map(|(n, s)| (n, s.flip()))
                .collect();
            prop_assert_eq!(top_responsive(&negated, 2).unwrap(), flipped);
        }
    }
}

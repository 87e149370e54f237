//! Complete-linkage clustering of group profiles, percentile cuts and
//! Silhouette scores.

mod io;
mod summary;

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{
    newick, read_silhouette_csv, write_comparison_csv, write_membership_csv, write_silhouette_csv,
    write_silhouette_json,
};
pub use summary::{
    compare_reports, layer_silhouette_summary, ClusterAnalysis, Cut, LayerClustering,
    LayerSilhouette, SilhouetteComparison, SilhouetteReport, SilhouetteRow,
};

pub const PERCENTILES: [f64; 5] = [75.0, 80.0, 85.0, 90.0, 95.0];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide every distance by `sqrt(dim)`.
    Dimension,
}

/// Condensed upper triangle of a symmetric distance matrix, row-major
/// over pairs `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    condensed: Vec<f64>,
}

fn condensed_len(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, condensed: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 items, got {n}")));
        }
        if condensed.len() != condensed_len(n) {
            return Err(Error::Config(format!(
                "{} distances for {n} items (expected {})",
                condensed.len(),
                condensed_len(n)
            )));
        }
        if let Some(d) = condensed.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Numeric(format!("invalid distance {d}")));
        }
        Ok(DistanceMatrix { labels, condensed })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn condensed(&self) -> &[f64] {
        &self.condensed
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        assert!(i < n && j < n, "distance index ({i}, {j}) out of range {n}");
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.condensed[pair_index(n, i, j)],
            std::cmp::Ordering::Greater => self.condensed[pair_index(n, j, i)],
        }
    }

    /// Same distances with items reordered: item `k` of the result is item
    /// `order[k]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let n = self.len();
        assert_eq!(order.len(), n);
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        let mut condensed = Vec::with_capacity(self.condensed.len());
        for a in 0..n {
            for b in a + 1..n {
                condensed.push(self.get(order[a], order[b]));
            }
        }
        DistanceMatrix { labels, condensed }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DistanceMatrix {
            labels: self.labels.clone(),
            condensed: self.condensed.iter().map(|d| d * factor).collect(),
        }
    }
}

fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j);
    n * i - i * (i + 1) / 2 + (j - i - 1)
}

/// Euclidean distances between flattened profiles.
pub fn pairwise_distances(
    labels: &[String],
    profiles: &[&Array2<f64>],
    normalization: Normalization,
) -> Result<DistanceMatrix> {
    if labels.len() != profiles.len() {
        return Err(Error::Config(format!(
            "{} labels for {} profiles",
            labels.len(),
            profiles.len()
        )));
    }
    if let Some(first) = profiles.first() {
        if let Some((k, p)) = profiles
            .iter()
            .enumerate()
            .find(|(_, p)| p.dim() != first.dim())
        {
            return Err(Error::Config(format!(
                "profile `{}` has shape {:?}, expected {:?}",
                labels[k],
                p.dim(),
                first.dim()
            )));
        }
    }
    let n = profiles.len();
    let scale = match normalization {
        Normalization::None => 1.0,
        Normalization::Dimension => {
            let dim = profiles.first().map_or(0, |p| p.len());
            if dim == 0 {
                1.0
            } else {
                (dim as f64).sqrt()
            }
        }
    };
    let mut condensed = Vec::with_capacity(condensed_len(n));
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = profiles[i]
                .iter()
                .zip(profiles[j].iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            condensed.push(sq.sqrt() / scale);
        }
    }
    DistanceMatrix::new(labels.to_vec(), condensed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller of the two cluster ids; leaves are `0..n`, merge `m`
    /// creates cluster `n + m`.
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageTree {
    pub leaves: usize,
    pub merges: Vec<Merge>,
}

impl LinkageTree {
    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        self.merges.iter().map(|m| m.height)
    }

    /// Height of a cluster id: 0 for leaves.
    pub fn height_of(&self, id: usize) -> f64 {
        if id < self.leaves {
            0.0
        } else {
            self.merges[id - self.leaves].height
        }
    }
}

/// Agglomerative clustering under complete linkage. Ties between equal
/// distances go to the lexicographically smallest pair of cluster ids.
pub fn complete_linkage(distances: &DistanceMatrix) -> LinkageTree {
    let n = distances.len();
    // slot-indexed dense matrix; a merged cluster reuses the lower slot
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = distances.get(i, j);
        }
    }
    let mut ids: Vec<Option<usize>> = (0..n).map(Some).collect();
    let mut sizes = vec![1usize; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for m in 0..n.saturating_sub(1) {
        // (height, cluster-id pair, slot pair)
        type Candidate = (f64, (usize, usize), (usize, usize));
        let mut best: Option<Candidate> = None;
        for a in 0..n {
            let Some(ia) = ids[a] else { continue };
            for b in a + 1..n {
                let Some(ib) = ids[b] else { continue };
                let key = (ia.min(ib), ia.max(ib));
                let h = d[a * n + b];
                let better = match best {
                    None => true,
                    Some((bh, bkey, _)) => h < bh || (h == bh && key < bkey),
                };
                if better {
                    best = Some((h, key, (a, b)));
                }
            }
        }
        let (height, (left, right), (a, b)) = best.expect("at least two active clusters");
        for c in 0..n {
            if ids[c].is_some() && c != a && c != b {
                let v = d[a * n + c].max(d[b * n + c]);
                d[a * n + c] = v;
                d[c * n + a] = v;
            }
        }
        sizes[a] += sizes[b];
        ids[a] = Some(n + m);
        ids[b] = None;
        merges.push(Merge {
            left,
            right,
            height,
            size: sizes[a],
        });
    }
    LinkageTree { leaves: n, merges }
}

/// Flat clusters after keeping only merges with `height <= threshold`.
/// Cluster numbers follow the first appearance of each cluster in item
/// order.
pub fn cut_tree(tree: &LinkageTree, threshold: f64) -> Vec<usize> {
    let n = tree.leaves;
    let mut parent: Vec<usize> = (0..n + tree.merges.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (m, merge) in tree.merges.iter().enumerate() {
        if merge.height <= threshold {
            let id = n + m;
            let l = find(&mut parent, merge.left);
            let r = find(&mut parent, merge.right);
            parent[l] = id;
            parent[r] = id;
        }
    }
    let mut numbering = BTreeMap::new();
    (0..n)
        .map(|i| {
            let root = find(&mut parent, i);
            let next = numbering.len();
            *numbering.entry(root).or_insert(next)
        })
        .collect()
}

pub fn cluster_count(assignment: &[usize]) -> usize {
    let mut seen: Vec<usize> = assignment.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Percentile of sorted data, interpolating linearly between the two
/// closest ranks (`rank = p / 100 * (n - 1)`).
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn percentile_thresholds(distances: &DistanceMatrix) -> [f64; 5] {
    let mut sorted = distances.condensed().to_vec();
    sorted.sort_by(f64::total_cmp);
    PERCENTILES.map(|p| percentile(&sorted, p))
}

/// Mean Silhouette width. Singleton items contribute 0; an item whose
/// intra and nearest-cluster distances are both 0 also contributes 0.
pub fn silhouette(distances: &DistanceMatrix, assignment: &[usize]) -> Result<f64> {
    let n = distances.len();
    if assignment.len() != n {
        return Err(Error::Config(format!(
            "assignment covers {} items, distances {n}",
            assignment.len()
        )));
    }
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &c) in assignment.iter().enumerate() {
        clusters.entry(c).or_default().push(i);
    }
    let k = clusters.len();
    if k < 2 || k == n {
        return Err(Error::UndefinedSilhouette {
            clusters: k,
            items: n,
        });
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = &clusters[&assignment[i]];
        if own.len() == 1 {
            continue;
        }
        let a = own.iter().map(|&j| distances.get(i, j)).sum::<f64>() / (own.len() - 1) as f64;
        let b = clusters
            .iter()
            .filter(|(&c, _)| c != assignment[i])
            .map(|(_, members)| {
                members.iter().map(|&j| distances.get(i, j)).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

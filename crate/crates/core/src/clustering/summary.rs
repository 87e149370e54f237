use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    cluster_count, complete_linkage, cut_tree, pairwise_distances, percentile_thresholds,
    silhouette, DistanceMatrix, LinkageTree, Normalization, PERCENTILES,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub percentile: f64,
    pub threshold: f64,
    pub assignment: Vec<usize>,
    pub clusters: usize,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerClustering {
    pub layer: usize,
    pub distances: DistanceMatrix,
    pub tree: LinkageTree,
    pub cuts: Vec<Cut>,
}

impl LayerClustering {
    pub fn from_distances(layer: usize, distances: DistanceMatrix) -> Result<Self> {
        let tree = complete_linkage(&distances);
        let cuts = PERCENTILES
            .iter()
            .zip(percentile_thresholds(&distances))
            .map(|(&percentile, threshold)| {
                let assignment = cut_tree(&tree, threshold);
                let clusters = cluster_count(&assignment);
                let score = match silhouette(&distances, &assignment) {
                    Ok(s) => Some(s),
                    Err(Error::UndefinedSilhouette { .. }) => None,
                    Err(e) => return Err(e),
                };
                Ok(Cut {
                    percentile,
                    threshold,
                    assignment,
                    clusters,
                    score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LayerClustering {
            layer,
            distances,
            tree,
            cuts,
        })
    }

    /// Mean over the defined scores; `None` if every cut is undefined.
    pub fn mean_score(&self) -> Option<f64> {
        let defined: Vec<f64> = self.cuts.iter().filter_map(|c| c.score).collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAnalysis {
    pub labels: Vec<String>,
    pub layers: Vec<LayerClustering>,
}

impl ClusterAnalysis {
    pub fn report(&self, grouping: &str) -> SilhouetteReport {
        SilhouetteReport {
            grouping: grouping.to_string(),
            groups: self.labels.clone(),
            layers: self
                .layers
                .iter()
                .map(|lc| LayerSilhouette {
                    layer: lc.layer,
                    rows: lc
                        .cuts
                        .iter()
                        .map(|c| SilhouetteRow {
                            layer: lc.layer,
                            percentile: c.percentile,
                            threshold: c.threshold,
                            k: c.clusters,
                            score: c.score,
                        })
                        .collect(),
                    mean: lc.mean_score(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteRow {
    pub layer: usize,
    pub percentile: f64,
    pub threshold: f64,
    pub k: usize,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSilhouette {
    pub layer: usize,
    pub rows: Vec<SilhouetteRow>,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteReport {
    pub grouping: String,
    pub groups: Vec<String>,
    pub layers: Vec<LayerSilhouette>,
}

impl SilhouetteReport {
    pub fn rows(&self) -> impl Iterator<Item = &SilhouetteRow> {
        self.layers.iter().flat_map(|l| l.rows.iter())
    }

    /// Layers where no cut produced a defined score.
    pub fn degenerate_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .filter(|l| l.mean.is_none())
            .map(|l| l.layer)
            .collect()
    }
}

/// Clusters every layer. `layers[l][g]` is the profile of group `g` in
/// layer `l`; layers run in parallel.
pub fn layer_silhouette_summary(
    labels: &[String],
    layers: &[Vec<&Array2<f64>>],
    normalization: Normalization,
) -> Result<ClusterAnalysis> {
    if labels.len() < 2 {
        return Err(Error::Pipeline(format!(
            "clustering needs at least 2 groups, got {}",
            labels.len()
        )));
    }
    let layers = layers
        .par_iter()
        .enumerate()
        .map(|(layer, profiles)| {
            let distances = pairwise_distances(labels, profiles, normalization)
                .map_err(|e| Error::Pipeline(format!("layer {layer}: {e}")))?;
            LayerClustering::from_distances(layer, distances)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterAnalysis {
        labels: labels.to_vec(),
        layers,
    })
}

/// Per-layer mean scores side by side for several grouping schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteComparison {
    pub schemes: Vec<String>,
    /// `(layer, mean score per scheme)`
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
}

pub fn compare_reports(reports: &[&SilhouetteReport]) -> SilhouetteComparison {
    let layers = reports.iter().map(|r| r.layers.len()).max().unwrap_or(0);
    let rows = (0..layers)
        .map(|layer| {
            let means = reports
                .iter()
                .map(|r| {
                    r.layers
                        .iter()
                        .find(|l| l.layer == layer)
                        .and_then(|l| l.mean)
                })
                .collect();
            (layer, means)
        })
        .collect();
    SilhouetteComparison {
        schemes: reports.iter().map(|r| r.grouping.clone()).collect(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("g{i}")).collect()
    }

    #[test]
    fn identical_profiles_give_missing_scores() {
        let m = Array2::from_elem((2, 3), 0.5);
        let layers = vec![vec![&m, &m, &m]; 2];
        let analysis = layer_silhouette_summary(&names(3), &layers, Normalization::None).unwrap();
        let report = analysis.report("predicted");
        assert_eq!(report.layers.len(), 2);
        for layer in &report.layers {
            assert_eq!(layer.rows.len(), 5);
            assert!(layer.rows.iter().all(|r| r.score.is_none() && r.k == 1));
            assert_eq!(layer.mean, None);
        }
        assert_eq!(report.degenerate_layers(), vec![0, 1]);
    }

    #[test]
    fn one_group_is_rejected() {
        let m = Array2::zeros((1, 1));
        assert!(layer_silhouette_summary(&names(1), &[vec![&m]], Normalization::None).is_err());
    }

    #[test]
    fn counts_non_increasing_across_percentiles() {
        let ms: Vec<Array2<f64>> = [0.0, 0.1, 1.0, 1.2, 5.0, 9.0]
            .iter()
            .map(|&v| Array2::from_elem((1, 2), v))
            .collect();
        let refs: Vec<&Array2<f64>> = ms.iter().collect();
        let analysis = layer_silhouette_summary(&names(6), &[refs], Normalization::None).unwrap();
        let cuts = &analysis.layers[0].cuts;
        assert!(cuts.windows(2).all(|w| w[0].threshold <= w[1].threshold));
        assert!(cuts.windows(2).all(|w| w[0].clusters >= w[1].clusters));
        let mean = analysis.layers[0].mean_score().unwrap();
        let defined: Vec<f64> = cuts.iter().filter_map(|c| c.score).collect();
        assert!((mean - defined.iter().sum::<f64>() / defined.len() as f64).abs() < 1e-15);
    }

    #[test]
    fn comparison_lines_up_layers() {
        let row = |layer, mean| LayerSilhouette {
            layer,
            rows: vec![],
            mean,
        };
        let a = SilhouetteReport {
            grouping: "predicted".into(),
            groups: vec![],
            layers: vec![row(0, Some(0.5)), row(1, None)],
        };
        let b = SilhouetteReport {
            grouping: "true".into(),
            groups: vec![],
            layers: vec![row(0, Some(0.25))],
        };
        let c = compare_reports(&[&a, &b]);
        assert_eq!(c.schemes, vec!["predicted", "true"]);
        assert_eq!(
            c.rows,
            vec![(0, vec![Some(0.5), Some(0.25)]), (1, vec![None, None])]
        );
    }
}

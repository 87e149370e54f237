use std::fmt::Write as _;
use std::path::Path;

use super::{LayerClustering, LinkageTree, SilhouetteComparison, SilhouetteReport, SilhouetteRow};
use crate::{Error, Result};

fn newick_label(label: &str) -> String {
    let plain = !label.is_empty()
        && !label
            .chars()
            .any(|c| c.is_whitespace() || "()[]':;,".contains(c));
    if plain {
        label.to_string()
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Dendrogram in Newick format. A branch length is the parent's merge
/// height minus the child's, so every leaf sits at depth equal to the
/// root height and each internal node at its merge height below the root.
pub fn newick(tree: &LinkageTree, labels: &[String]) -> String {
    assert_eq!(labels.len(), tree.leaves, "one label per leaf");
    let n = tree.leaves;
    if tree.merges.is_empty() {
        return labels
            .first()
            .map(|l| format!("{};", newick_label(l)))
            .unwrap_or(";".into());
    }
    fn write(tree: &LinkageTree, labels: &[String], id: usize, out: &mut String) {
        let n = tree.leaves;
        if id < n {
            out.push_str(&newick_label(&labels[id]));
            return;
        }
        let m = &tree.merges[id - n];
        out.push('(');
        for (k, child) in [m.left, m.right].into_iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write(tree, labels, child, out);
            let _ = write!(out, ":{}", m.height - tree.height_of(child));
        }
        out.push(')');
    }
    let mut out = String::new();
    write(tree, labels, n + tree.merges.len() - 1, &mut out);
    out.push(';');
    out
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))
}

fn finish(path: &Path, mut writer: csv::Writer<std::fs::File>) -> Result<()> {
    writer.flush().map_err(|e| Error::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map(|s| s.to_string()).unwrap_or_default()
}

/// `layer,percentile,threshold,k,score`; an undefined score is an empty
/// field.
pub fn write_silhouette_csv(path: &Path, report: &SilhouetteReport) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["layer", "percentile", "threshold", "k", "score"])
        .map_err(err)?;
    for r in report.rows() {
        w.write_record([
            r.layer.to_string(),
            r.percentile.to_string(),
            r.threshold.to_string(),
            r.k.to_string(),
            opt(r.score),
        ])
        .map_err(err)?;
    }
    finish(path, w)
}

pub fn read_silhouette_csv(path: &Path) -> Result<Vec<SilhouetteRow>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let bad = |what: &str| Error::format(path, format!("row {i}: bad {what}"));
        let field = |k: usize| record.get(k).map(str::trim).unwrap_or("");
        rows.push(SilhouetteRow {
            layer: field(0).parse().map_err(|_| bad("layer"))?,
            percentile: field(1).parse().map_err(|_| bad("percentile"))?,
            threshold: field(2).parse().map_err(|_| bad("threshold"))?,
            k: field(3).parse().map_err(|_| bad("k"))?,
            score: match field(4) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("score"))?),
            },
        });
    }
    Ok(rows)
}

pub fn write_silhouette_json(path: &Path, report: &SilhouetteReport) -> Result<()> {
    let text =
        serde_json::to_string_pretty(report).map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// One row per group, one column per percentile cut.
pub fn write_membership_csv(path: &Path, labels: &[String], layer: &LayerClustering) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::format(path, e.to_string());
    let mut header = vec!["group".to_string()];
    header.extend(layer.cuts.iter().map(|c| format!("p{}", c.percentile)));
    w.write_record(&header).map_err(err)?;
    for (i, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(layer.cuts.iter().map(|c| c.assignment[i].to_string()));
        w.write_record(&row).map_err(err)?;
    }
    finish(path, w)
}

/// `layer,<scheme>...` with the per-layer mean scores.
pub fn write_comparison_csv(path: &Path, comparison: &SilhouetteComparison) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = |e: csv::Error| Error::format(path, e.to_string());
    let mut header = vec!["layer".to_string()];
    header.extend(comparison.schemes.iter().cloned());
    w.write_record(&header).map_err(err)?;
    for (layer, means) in &comparison.rows {
        let mut row = vec![layer.to_string()];
        row.extend(means.iter().map(|m| opt(*m)));
        w.write_record(&row).map_err(err)?;
    }
    finish(path, w)
}

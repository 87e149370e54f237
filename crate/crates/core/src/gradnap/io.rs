use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GradNap;
use crate::export::{read_matrix_csv, safe_name, write_matrix_csv};
use crate::{Error, Result};

/// JSON sidecar written next to each profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradNapMeta {
    pub group: String,
    pub label: usize,
    pub layer: usize,
    pub count: usize,
    #[serde(rename = "W")]
    pub width: usize,
    pub channels: usize,
    pub skipped: usize,
    pub degenerate: bool,
}

pub fn gradnap_file_stem(group: &str, layer: usize) -> String {
    format!("{}_layer{layer}", safe_name(group))
}

/// Writes `<group>_layer<l>.csv` and `.json`; returns the CSV path.
pub fn write_gradnap(dir: &Path, nap: &GradNap) -> Result<PathBuf> {
    let stem = gradnap_file_stem(&nap.group, nap.layer);
    let csv_path = dir.join(format!("{stem}.csv"));
    write_matrix_csv(&csv_path, &nap.values)?;
    let meta = GradNapMeta {
        group: nap.group.clone(),
        label: nap.label,
        layer: nap.layer,
        count: nap.count,
        width: nap.width(),
        channels: nap.channels(),
        skipped: nap.skipped,
        degenerate: nap.degenerate,
    };
    let json_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(csv_path)
}

/// Reads a profile from its CSV path and the sibling JSON sidecar.
pub fn read_gradnap(csv_path: &Path) -> Result<GradNap> {
    let json_path = csv_path.with_extension("json");
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: GradNapMeta =
        serde_json::from_str(&text).map_err(|e| Error::format(&json_path, e.to_string()))?;
    let values = read_matrix_csv(csv_path)?;
    if values.dim() != (meta.channels, meta.width) {
        return Err(Error::format(
            csv_path,
            format!(
                "matrix is {:?}, sidecar says {}×{}",
                values.dim(),
                meta.channels,
                meta.width
            ),
        ));
    }
    Ok(GradNap {
        group: meta.group,
        label: meta.label,
        layer: meta.layer,
        values,
        count: meta.count,
        skipped: meta.skipped,
        degenerate: meta.degenerate,
    })
}

/// Reads every profile in `dir`, ordered by (layer, label).
pub fn read_gradnaps(dir: &Path) -> Result<Vec<GradNap>> {
    let mut naps = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "csv") && path.with_extension("json").exists() {
            naps.push(read_gradnap(&path)?);
        }
    }
    naps.sort_by_key(|n| (n.layer, n.label));
    Ok(naps)
}

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ClassInfo, Dataset, Example, NormStats};
use crate::{Error, Result};

pub const DATASET_VERSION: u32 = 1;
const DATASET_FORMAT: &str = "gradnap-dataset";
const SPEC_MAGIC: &[u8; 4] = b"GNS1";

#[derive(Serialize, Deserialize)]
struct Meta {
    format: String,
    version: u32,
    bins: usize,
    examples: Vec<String>,
    classes: Vec<ClassInfo>,
    stats: NormStats,
}

/// Writes a `bins × frames` matrix as `GNS1` + u32 bins + u32 frames +
/// row-major little-endian f32.
pub fn write_spec_file(path: &Path, matrix: &Array2<f64>) -> Result<()> {
    let (rows, cols) = matrix.dim();
    let mut bytes = Vec::with_capacity(12 + 4 * rows * cols);
    bytes.extend_from_slice(SPEC_MAGIC);
    bytes.extend_from_slice(&(rows as u32).to_le_bytes());
    bytes.extend_from_slice(&(cols as u32).to_le_bytes());
    for v in matrix.iter() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_spec_file(path: &Path) -> Result<Array2<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 {
        return Err(Error::format(path, "truncated header"));
    }
    if &bytes[..3] != b"GNS" {
        return Err(Error::format(path, "bad magic"));
    }
    if bytes[3] != b'1' {
        return Err(Error::Version {
            what: "spectrogram file",
            found: bytes[3].wrapping_sub(b'0') as u32,
            expected: 1,
        });
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let payload = &bytes[12..];
    if payload.len() != 4 * rows * cols {
        return Err(Error::format(
            path,
            format!(
                "expected {} payload bytes, found {}",
                4 * rows * cols,
                payload.len()
            ),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(["frame_index", "class_index"])
        .map_err(|e| csv_error(path, e))?;
    for (t, label) in labels.iter().enumerate() {
        writer
            .write_record([t.to_string(), label.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn read_labels(path: &Path, id: &str) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let parse = |i: usize| -> Result<usize> {
            record
                .get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Dataset {
                    example: id.to_string(),
                    detail: format!("malformed label row {row}"),
                })
        };
        let (frame, class) = (parse(0)?, parse(1)?);
        if frame != row {
            return Err(Error::Dataset {
                example: id.to_string(),
                detail: format!("label row {row} has frame index {frame}"),
            });
        }
        labels.push(class);
    }
    Ok(labels)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

/// Writes `meta`, `exNNNN.spec` and `exNNNN.lab` into `dir`.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        format: DATASET_FORMAT.to_string(),
        version: DATASET_VERSION,
        bins: dataset.bins,
        examples: dataset.examples.iter().map(|e| e.id.clone()).collect(),
        classes: dataset.classes.clone(),
        stats: dataset.stats.clone(),
    };
    let text =
        toml::to_string(&meta).map_err(|e| Error::format(dir.join("meta"), e.to_string()))?;
    let meta_path = dir.join("meta");
    let mut file = fs::File::create(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    file.write_all(text.as_bytes())
        .map_err(|e| Error::io(&meta_path, e))?;
    for ex in &dataset.examples {
        write_spec_file(&dir.join(format!("{}.spec", ex.id)), &ex.spectrogram)?;
        write_labels(&dir.join(format!("{}.lab", ex.id)), &ex.labels)?;
    }
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    if table.get("format").and_then(|v| v.as_str()) != Some(DATASET_FORMAT) {
        return Err(Error::format(&meta_path, "not a dataset meta file"));
    }
    let version = table
        .get("version")
        .and_then(|v| v.as_integer())
        .ok_or_else(|| Error::format(&meta_path, "missing version"))?;
    if version != DATASET_VERSION as i64 {
        return Err(Error::Version {
            what: "dataset",
            found: version as u32,
            expected: DATASET_VERSION,
        });
    }
    let meta: Meta = toml::from_str(&text).map_err(|e| Error::format(&meta_path, e.to_string()))?;
    if meta.stats.mean.len() != meta.bins || meta.stats.std.len() != meta.bins {
        return Err(Error::format(&meta_path, "stats length differs from bins"));
    }
    let mut examples = Vec::with_capacity(meta.examples.len());
    for id in &meta.examples {
        let spectrogram = read_spec_file(&dir.join(format!("{id}.spec")))?;
        if spectrogram.nrows() != meta.bins {
            return Err(Error::Dataset {
                example: id.clone(),
                detail: format!("{} bins, meta says {}", spectrogram.nrows(), meta.bins),
            });
        }
        let labels = read_labels(&dir.join(format!("{id}.lab")), id)?;
        if labels.len() != spectrogram.ncols() {
            return Err(Error::Dataset {
                example: id.clone(),
                detail: format!(
                    "label file has {} rows, spectrogram has {} frames",
                    labels.len(),
                    spectrogram.ncols()
                ),
            });
        }
        examples.push(Example {
            id: id.clone(),
            spectrogram,
            labels,
        });
    }
    let dataset = Dataset {
        bins: meta.bins,
        classes: meta.classes,
        examples,
        stats: meta.stats,
    };
    dataset.validate()?;
    Ok(dataset)
}

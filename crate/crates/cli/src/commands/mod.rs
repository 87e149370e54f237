//! Stage implementations. Each stage writes into an output directory and
//! records counters in the caller's manifest; the subcommand wrappers in
//! `main.rs` add argument checks and the manifest file.

mod cluster;
mod data;
mod featviz;
mod gradnap;
mod report;
mod run_all;
mod train;

use std::fs;
use std::path::Path;

use crate::error::{io_error, CliError, CliResult};

pub use cluster::{cluster_profiles, ClusterOutcome};
pub use data::generate_data;
pub use featviz::{feature_visualization, FeatVizRecord, FeatVizSummary, FEATVIZ_FILE};
pub use gradnap::{compute_gradnaps, GradNapSummary, GroupSummary, SUMMARY_FILE};
pub use report::{build_report, ReportSummary, REPORT_FILE};
pub use run_all::{run_all, RunLayout};
pub use train::{train_model, ARCH_FILE, LOSS_FILE, WEIGHTS_FILE};

/// An input path given by `flag` must exist.
pub fn require_input(flag: &str, path: &Path) -> CliResult<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "{flag}: {} does not exist",
            path.display()
        )))
    }
}

/// Creates `path` or accepts it if empty; outputs never overwrite.
pub fn prepare_output_dir(flag: &str, path: &Path) -> CliResult<()> {
    if path.exists() {
        if !path.is_dir() {
            return Err(CliError::usage(format!(
                "{flag}: {} exists and is not a directory",
                path.display()
            )));
        }
        let mut entries = fs::read_dir(path).map_err(|e| io_error(path, e))?;
        if entries.next().is_some() {
            return Err(CliError::usage(format!(
                "{flag}: {} is not empty; outputs go to a fresh directory",
                path.display()
            )));
        }
        Ok(())
    } else {
        fs::create_dir_all(path).map_err(|e| io_error(path, e))
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub(crate) fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable");
    write_text(path, &(text + "\n"))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

/// Two-column CSV with a header.
pub(crate) fn write_series_csv(
    path: &Path,
    header: [&str; 2],
    rows: impl IntoIterator<Item = (usize, f64)>,
) -> CliResult<()> {
    let mut text = format!("{},{}\n", header[0], header[1]);
    for (i, v) in rows {
        text.push_str(&format!("{i},{v}\n"));
    }
    write_text(path, &text)
}

pub fn read_series_csv(path: &Path) -> CliResult<Vec<(usize, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let bad = |line: usize| CliError::data(format!("{}: bad row {line}", path.display()));
    text.lines()
        .skip(1)
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let (a, b) = line.split_once(',').ok_or_else(|| bad(i + 1))?;
            Ok((
                a.trim().parse().map_err(|_| bad(i + 1))?,
                b.trim().parse().map_err(|_| bad(i + 1))?,
            ))
        })
        .collect()
}

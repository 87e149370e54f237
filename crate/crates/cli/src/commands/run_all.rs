use std::fs;
use std::path::{Path, PathBuf};

use gradnap_core::data::load_dataset;
use gradnap_core::gradnap::{read_gradnaps, Grouping};
use gradnap_core::model::load_weights;
use gradnap_core::netcore::ArchitectureSpec;

use super::{
    build_report, compute_gradnaps, feature_visualization, generate_data, train_model, write_text,
    ARCH_FILE, WEIGHTS_FILE,
};
use crate::config::ExperimentConfig;
use crate::error::{io_error, CliResult};
use crate::manifest::{stage_seed, RunManifest};

/// Directory layout of a full run below its root.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: &Path) -> Self {
        RunLayout {
            root: root.to_path_buf(),
        }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn train(&self) -> PathBuf {
        self.root.join("train")
    }

    pub fn gradnap(&self, grouping: Grouping) -> PathBuf {
        self.root.join(format!("gradnap_{}", grouping.as_str()))
    }

    pub fn featviz(&self, grouping: Grouping) -> PathBuf {
        self.root.join(format!("featviz_{}", grouping.as_str()))
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn mkdir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

/// generate → train → profiles per grouping → feature visualization →
/// report. Every stage reads its inputs back from disk, so the run is
/// identical to chaining the individual subcommands.
pub fn run_all(config: &ExperimentConfig, out: &Path, manifest: &mut RunManifest) -> CliResult<()> {
    let layout = RunLayout::new(out);
    manifest.config_hash = Some(config.hash());
    write_text(&out.join("config.toml"), &config.to_toml_string())?;
    let seeds = [
        ("master", config.seed),
        ("data", stage_seed(config.seed, "data")),
        ("train", stage_seed(config.seed, "train")),
        ("featviz", stage_seed(config.seed, "featviz")),
    ];
    for (k, v) in seeds {
        manifest.seeds.insert(k.to_string(), v);
    }

    manifest.stage("gen-data", |m| {
        mkdir(&layout.data())?;
        generate_data(&config.data, seeds[1].1, &layout.data(), m)
    })?;

    manifest.stage("train-toy", |m| {
        mkdir(&layout.train())?;
        let dataset = load_dataset(&layout.data())?;
        let spec = config
            .model
            .architecture(dataset.bins, dataset.num_classes());
        train_model(
            &spec,
            &dataset,
            &config.train.train_config(seeds[2].1),
            &layout.train(),
            m,
        )
    })?;

    let spec = ArchitectureSpec::load(&layout.train().join(ARCH_FILE))?;
    for &grouping in &config.gradnap.groupings {
        manifest.stage(&format!("gradnap-{}", grouping.as_str()), |m| {
            let dir = layout.gradnap(grouping);
            mkdir(&dir)?;
            let dataset = load_dataset(&layout.data())?;
            let weights = load_weights(&layout.train().join(WEIGHTS_FILE), &spec)?;
            compute_gradnaps(
                &spec,
                &weights,
                &dataset,
                &config.gradnap.pipeline_config(grouping),
                &dir,
                m,
            )
        })?;
    }

    let fv = &config.featviz;
    for &grouping in &config.gradnap.groupings {
        manifest.stage(&format!("featviz-{}", grouping.as_str()), |m| {
            let dir = layout.featviz(grouping);
            mkdir(&dir)?;
            let weights = load_weights(&layout.train().join(WEIGHTS_FILE), &spec)?;
            let naps = read_gradnaps(&layout.gradnap(grouping))?;
            if naps.iter().all(|n| n.layer != fv.layer) {
                m.warnings.push(format!(
                    "featviz-{}: no profiles, skipped",
                    grouping.as_str()
                ));
                return Ok(());
            }
            feature_visualization(
                &spec,
                &weights,
                &naps,
                fv.layer,
                fv.top,
                &fv.featviz_config(seeds[3].1),
                &dir,
                m,
            )
            .map(|_| ())
        })?;
    }

    manifest.stage("report", |m| {
        mkdir(&layout.report())?;
        let gradnap_dirs: Vec<PathBuf> = config
            .gradnap
            .groupings
            .iter()
            .map(|&g| layout.gradnap(g))
            .collect();
        let featviz_dirs: Vec<PathBuf> = config
            .gradnap
            .groupings
            .iter()
            .map(|&g| layout.featviz(g))
            .filter(|d| d.join(super::FEATVIZ_FILE).exists())
            .collect();
        build_report(
            &gradnap_dirs,
            &featviz_dirs,
            config.cluster.normalization,
            &layout.report(),
            m,
        )
        .map(|_| ())
    })?;
    Ok(())
}

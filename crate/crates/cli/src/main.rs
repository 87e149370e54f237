use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gradnap_cli::commands::{
    build_report, cluster_profiles, compute_gradnaps, feature_visualization, generate_data,
    prepare_output_dir, require_input, run_all, train_model, GradNapSummary, SUMMARY_FILE,
};
use gradnap_cli::config::ExperimentConfig;
use gradnap_cli::error::{CliError, CliResult};
use gradnap_cli::manifest::{stage_seed, RunManifest};
use gradnap_core::clustering::Normalization;
use gradnap_core::data::load_dataset;
use gradnap_core::gradnap::{read_gradnaps, Grouping};
use gradnap_core::model::load_weights;
use gradnap_core::netcore::ArchitectureSpec;

const WORKERS_ENV: &str = "GRADNAP_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "gradnap",
    version,
    about = "Gradient-adjusted neuron activation profiles"
)]
struct Cli {
    /// Worker threads (overrides GRADNAP_WORKERS; default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConfigArg {
    /// Experiment config (TOML); missing sections take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GroupBy {
    Predicted,
    True,
}

impl From<GroupBy> for Grouping {
    fn from(g: GroupBy) -> Self {
        match g {
            GroupBy::Predicted => Grouping::ByPredicted,
            GroupBy::True => Grouping::ByTrueLabel,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Normalize {
    None,
    Dimension,
}

impl From<Normalize> for Normalization {
    fn from(n: Normalize) -> Self {
        match n {
            Normalize::None => Normalization::None,
            Normalize::Dimension => Normalization::Dimension,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic spectrogram dataset.
    GenData {
        #[command(flatten)]
        config: ConfigArg,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the toy network on a dataset.
    TrainToy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Architecture TOML; default comes from the config.
        #[arg(long)]
        arch: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute one profile per group and layer.
    Gradnap {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        group_by: GroupBy,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Optimal inputs and action potentials for the most responsive neurons.
    Featviz {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        arch: PathBuf,
        #[arg(long)]
        layer: Option<usize>,
        #[arg(long)]
        gradnap: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        top: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Hierarchical clustering of group profiles per layer.
    Cluster {
        #[arg(long)]
        gradnap: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        normalize: Option<Normalize>,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Figures and silhouette comparison over several runs.
    Report {
        #[arg(long, required = true, num_args = 1..)]
        gradnap: Vec<PathBuf>,
        #[arg(long, num_args = 1..)]
        featviz: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Every stage end to end into one directory.
    RunAll {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn worker_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                CliError::usage(format!("{WORKERS_ENV}: `{v}` is not a thread count"))
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(CliError::usage("--workers: must be at least 1"));
    }
    Ok(n)
}

fn load_config(arg: &ConfigArg) -> CliResult<ExperimentConfig> {
    match &arg.config {
        Some(path) => {
            require_input("--config", path)?;
            ExperimentConfig::load(path)
        }
        None => Ok(ExperimentConfig::default()),
    }
}

fn inputs(pairs: &[(&str, &Path)]) -> CliResult<()> {
    pairs
        .iter()
        .try_for_each(|(flag, p)| require_input(flag, p))
}

/// Runs `body` under a manifest written to `out` whatever the outcome.
fn with_manifest(
    name: &str,
    out: &Path,
    body: impl FnOnce(&mut RunManifest) -> CliResult<()>,
) -> CliResult<()> {
    prepare_output_dir("--out", out)?;
    let mut manifest = RunManifest::new(name);
    let result = body(&mut manifest);
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
    }
    let written = manifest.finish(out);
    result.and(written.map(|_| ()))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = worker_count(cli.workers)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--workers: {e}")))?;
    }
    match cli.command {
        Command::GenData { config, seed, out } => {
            let cfg = load_config(&config)?;
            let master = seed.unwrap_or(cfg.seed);
            with_manifest("gen-data", &out, |m| {
                m.config_hash = Some(cfg.hash());
                let s = stage_seed(master, "data");
                m.seeds.insert("master".into(), master);
                m.seeds.insert("data".into(), s);
                m.stage("gen-data", |m| generate_data(&cfg.data, s, &out, m))
            })
        }
        Command::TrainToy {
            data,
            out,
            arch,
            config,
            seed,
        } => {
            inputs(&[("--data", &data)])?;
            if let Some(a) = &arch {
                require_input("--arch", a)?;
            }
            let cfg = load_config(&config)?;
            let master = seed.unwrap_or(cfg.seed);
            with_manifest("train-toy", &out, |m| {
                m.config_hash = Some(cfg.hash());
                m.add_input("data", &data)?;
                let s = stage_seed(master, "train");
                m.seeds.insert("master".into(), master);
                m.seeds.insert("train".into(), s);
                m.stage("train-toy", |m| {
                    let dataset = load_dataset(&data)?;
                    let spec = match &arch {
                        Some(a) => {
                            m.add_input("arch", a)?;
                            ArchitectureSpec::load(a)?
                        }
                        None => cfg.model.architecture(dataset.bins, dataset.num_classes()),
                    };
                    train_model(&spec, &dataset, &cfg.train.train_config(s), &out, m).map(|_| ())
                })
            })
        }
        Command::Gradnap {
            weights,
            arch,
            data,
            group_by,
            out,
            config,
        } => {
            inputs(&[
                ("--weights", &weights),
                ("--arch", &arch),
                ("--data", &data),
            ])?;
            let cfg = load_config(&config)?;
            with_manifest("gradnap", &out, |m| {
                m.config_hash = Some(cfg.hash());
                m.add_input("weights", &weights)?;
                m.add_input("arch", &arch)?;
                m.add_input("data", &data)?;
                m.stage("gradnap", |m| {
                    let spec = ArchitectureSpec::load(&arch)?;
                    let w = load_weights(&weights, &spec)?;
                    let dataset = load_dataset(&data)?;
                    let pc = cfg.gradnap.pipeline_config(group_by.into());
                    compute_gradnaps(&spec, &w, &dataset, &pc, &out, m).map(|_| ())
                })
            })
        }
        Command::Featviz {
            weights,
            arch,
            layer,
            gradnap,
            seed,
            top,
            out,
            config,
        } => {
            inputs(&[
                ("--weights", &weights),
                ("--arch", &arch),
                ("--gradnap", &gradnap),
            ])?;
            let cfg = load_config(&config)?;
            let master = seed.unwrap_or(cfg.seed);
            let layer = layer.unwrap_or(cfg.featviz.layer);
            let top = top.unwrap_or(cfg.featviz.top);
            with_manifest("featviz", &out, |m| {
                m.config_hash = Some(cfg.hash());
                m.add_input("weights", &weights)?;
                m.add_input("arch", &arch)?;
                m.add_input("gradnap", &gradnap)?;
                let s = stage_seed(master, "featviz");
                m.seeds.insert("master".into(), master);
                m.seeds.insert("featviz".into(), s);
                m.stage("featviz", |m| {
                    let spec = ArchitectureSpec::load(&arch)?;
                    let w = load_weights(&weights, &spec)?;
                    let naps = read_gradnaps(&gradnap)?;
                    let fc = cfg.featviz.featviz_config(s);
                    feature_visualization(&spec, &w, &naps, layer, top, &fc, &out, m).map(|_| ())
                })
            })
        }
        Command::Cluster {
            gradnap,
            out,
            normalize,
            config,
        } => {
            inputs(&[("--gradnap", &gradnap)])?;
            let cfg = load_config(&config)?;
            let norm = normalize
                .map(Into::into)
                .unwrap_or(cfg.cluster.normalization);
            with_manifest("cluster", &out, |m| {
                m.config_hash = Some(cfg.hash());
                m.add_input("gradnap", &gradnap)?;
                m.hyper("normalization", norm);
                m.stage("cluster", |m| {
                    let naps = read_gradnaps(&gradnap)?;
                    let meta = gradnap.join(SUMMARY_FILE);
                    let (grouping, layers) = if meta.exists() {
                        let text = std::fs::read_to_string(&meta)
                            .map_err(|e| gradnap_cli::error::io_error(&meta, e))?;
                        let s: GradNapSummary = serde_json::from_str(&text)
                            .map_err(|e| CliError::data(format!("{}: {e}", meta.display())))?;
                        (s.grouping.as_str().to_string(), Some(s.layers))
                    } else {
                        ("profiles".to_string(), None)
                    };
                    cluster_profiles(&naps, layers, &grouping, norm, &out, m).map(|_| ())
                })
            })
        }
        Command::Report {
            gradnap,
            featviz,
            out,
            config,
        } => {
            for g in &gradnap {
                require_input("--gradnap", g)?;
            }
            for f in &featviz {
                require_input("--featviz", f)?;
            }
            let cfg = load_config(&config)?;
            with_manifest("report", &out, |m| {
                m.config_hash = Some(cfg.hash());
                for (i, g) in gradnap.iter().enumerate() {
                    m.add_input(&format!("gradnap{i}"), g)?;
                }
                for (i, f) in featviz.iter().enumerate() {
                    m.add_input(&format!("featviz{i}"), f)?;
                }
                m.stage("report", |m| {
                    build_report(&gradnap, &featviz, cfg.cluster.normalization, &out, m).map(|_| ())
                })
            })
        }
        Command::RunAll { config, out } => {
            require_input("--config", &config)?;
            let cfg = ExperimentConfig::load(&config)?;
            with_manifest("run-all", &out, |m| run_all(&cfg, &out, m))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gradnap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gradnap_cli::manifest::{RunManifest, MANIFEST_FILE};

const SMALL: &str = r#"
seed = 11

[data]
examples = 12
bins = 16
frames = 64
silence_min = 3
silence_max = 5

[[data.classes]]
name = "low"
segment_min = 6
segment_max = 10
[data.classes.pattern]
kind = "bands"
[[data.classes.pattern.bands]]
center = 3
width = 1
intensity = 3.0

[[data.classes]]
name = "high"
segment_min = 6
segment_max = 10
[data.classes.pattern]
kind = "bands"
[[data.classes.pattern.bands]]
center = 12
width = 1
intensity = 3.0

[train]
epochs = 3
"#;

fn gradnap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradnap"))
        .args(args)
        .env_remove("GRADNAP_WORKERS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "failed: {}", stderr(&o));
    o
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

fn svgs(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(svgs(&p));
        } else if p.extension().is_some_and(|x| x == "svg") {
            out.push(p);
        }
    }
    out
}

#[test]
fn missing_input_is_a_usage_error_naming_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = tmp.path().join("out");
    let o = gradnap(&["train-toy", "--data", s(&missing), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--data"), "{}", stderr(&o));
    assert!(
        !out.exists(),
        "nothing is created before inputs are checked"
    );
}

#[test]
fn bad_arguments_exit_2_and_help_exits_0() {
    assert_eq!(gradnap(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        gradnap(&["gradnap", "--group-by", "sideways"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(gradnap(&["--help"]).status.code(), Some(0));
    assert_eq!(gradnap(&["--version"]).status.code(), Some(0));
}

#[test]
fn non_empty_output_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("keep.txt"), "x").unwrap();
    let o = gradnap(&["gen-data", "--out", s(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--out"));
    assert_eq!(
        fs::read_to_string(tmp.path().join("keep.txt")).unwrap(),
        "x"
    );
}

#[test]
fn bad_worker_setting_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gradnap"))
        .args(["gen-data", "--out", s(&tmp.path().join("d"))])
        .env("GRADNAP_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("GRADNAP_WORKERS"));
    let o = gradnap(&[
        "--workers",
        "0",
        "gen-data",
        "--out",
        s(&tmp.path().join("e")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[data]\nexamplez = 3\n");
    let o = gradnap(&[
        "gen-data",
        "--config",
        s(&cfg),
        "--out",
        s(&tmp.path().join("d")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_dataset_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    ok(gradnap(&["gen-data", "--out", s(&data)]));
    fs::write(data.join("ex0000.spec"), b"GNS1 but truncated").unwrap();
    let out = tmp.path().join("train");
    let o = gradnap(&["train-toy", "--data", s(&data), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert!(m.error.is_some());
}

#[test]
fn diverging_training_is_a_numeric_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}learning_rate = 1e300\n"));
    let data = tmp.path().join("data");
    ok(gradnap(&[
        "gen-data",
        "--config",
        s(&cfg),
        "--out",
        s(&data),
    ]));
    let out = tmp.path().join("train");
    let o = gradnap(&[
        "train-toy",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("[train-toy]"));
}

#[test]
fn subcommands_chain_and_write_valid_figures() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let cfg = write_config(root, SMALL);
    let c = s(&cfg);
    let (data, train, naps, fv, cl, rep) = (
        root.join("data"),
        root.join("train"),
        root.join("naps"),
        root.join("fv"),
        root.join("cl"),
        root.join("rep"),
    );
    ok(gradnap(&["gen-data", "--config", c, "--out", s(&data)]));
    ok(gradnap(&[
        "train-toy",
        "--config",
        c,
        "--data",
        s(&data),
        "--out",
        s(&train),
    ]));
    let weights = train.join("weights.gnw");
    let arch = train.join("arch.toml");
    ok(gradnap(&[
        "--workers",
        "2",
        "gradnap",
        "--config",
        c,
        "--weights",
        s(&weights),
        "--arch",
        s(&arch),
        "--data",
        s(&data),
        "--group-by",
        "true",
        "--out",
        s(&naps),
    ]));
    ok(gradnap(&[
        "featviz",
        "--config",
        c,
        "--weights",
        s(&weights),
        "--arch",
        s(&arch),
        "--layer",
        "2",
        "--gradnap",
        s(&naps),
        "--seed",
        "3",
        "--top",
        "4",
        "--out",
        s(&fv),
    ]));
    ok(gradnap(&[
        "cluster",
        "--gradnap",
        s(&naps),
        "--normalize",
        "dimension",
        "--out",
        s(&cl),
    ]));
    ok(gradnap(&[
        "report",
        "--gradnap",
        s(&naps),
        "--featviz",
        s(&fv),
        "--out",
        s(&rep),
    ]));

    for dir in [&data, &train, &naps, &fv, &cl, &rep] {
        let m = RunManifest::load(&dir.join(MANIFEST_FILE)).unwrap();
        assert!(m.error.is_none());
        assert!(!m.outputs.is_empty());
    }
    let m = RunManifest::load(&fv.join(MANIFEST_FILE)).unwrap();
    assert_eq!(m.hyperparameters["featviz_top"], 4);
    assert!(m.inputs.keys().any(|k| k.starts_with("gradnap/")));

    // two groups -> one silhouette row per (layer, threshold)
    let csv = fs::read_to_string(cl.join("silhouette_true.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "layer,percentile,threshold,k,score"
    );
    assert_eq!(csv.lines().count(), 1 + 4 * 5);
    assert!(fs::read_to_string(cl.join("dendrogram_true_layer2.nwk"))
        .unwrap()
        .trim_end()
        .ends_with(';'));

    let figures = svgs(root);
    assert!(figures.len() > 10);
    for p in &figures {
        let text = fs::read_to_string(p).unwrap();
        let doc =
            roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let name = p.file_name().unwrap().to_str().unwrap();
        if name.ends_with("_potentials.svg") {
            let csv = fs::read_to_string(p.with_extension("csv")).unwrap();
            let channels: BTreeSet<&str> = csv
                .lines()
                .skip(1)
                .map(|l| l.split(',').next().unwrap())
                .collect();
            let lines = doc
                .descendants()
                .filter(|n| n.has_tag_name("polyline"))
                .count();
            assert_eq!(lines, channels.len(), "{name}");
        }
    }
}

#[test]
fn single_class_run_reports_the_degeneracy() {
    let tmp = tempfile::tempdir().unwrap();
    let one = SMALL
        .split("[[data.classes]]")
        .take(2)
        .collect::<Vec<_>>()
        .join("[[data.classes]]")
        + "\n[train]\nepochs = 2\n"; // the cut also dropped [train]
    let cfg = write_config(tmp.path(), &one);
    let out = tmp.path().join("run");
    ok(gradnap(&["run-all", "--config", s(&cfg), "--out", s(&out)]));
    let m = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert!(
        m.warnings.iter().any(|w| w.contains("only one group")),
        "{:?}",
        m.warnings
    );
    assert!(m.warnings.iter().any(|w| w.contains("clustering skipped")));
    assert!(out.join("report/true/silhouette_true.skipped").exists());
    let report = fs::read_to_string(out.join("report/report.json")).unwrap();
    assert!(report.contains("silhouette report skipped"));
}

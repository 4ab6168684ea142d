use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use abstain::cli::run_from;
use abstain::commands::{
    cmd_reject, cmd_synth, cmd_train, cmd_uncertainty, ModelSource, RejectArgs, SynthArgs,
    TrainConfig, UncertaintyArgs,
};
use abstain::dataset_csv::load_dataset;
use abstain::error::{EXIT_OK, EXIT_USER};
use abstain::experiment::{
    write_experiment, DataSource, ExperimentConfig, ExperimentReport, SyntheticSource,
    HISTOGRAM_COLUMNS, SUMMARY_COLUMNS,
};
use abstain::tables::{load_observations, CURVE_COLUMNS, OBSERVATION_COLUMNS};
use abstain_core::uncertainty::UncertaintyComponent;
use abstain_core::{MlpConfig, PredictorKind};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_abstain"));
    c.env_remove("ABSTAIN_OUT");
    c
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, train_n: usize, test_n: usize, seed: u64) -> Vec<PathBuf> {
    cmd_synth(&SynthArgs {
        source: SyntheticSource {
            train_n,
            test_n,
            ..SyntheticSource::default()
        },
        levels: vec![],
        seed,
        out: dir.to_path_buf(),
    })
    .unwrap()
}

fn quick_mlp() -> MlpConfig {
    MlpConfig {
        epochs: 4,
        hidden_dims: vec![16, 16],
        ..MlpConfig::new(2)
    }
}

#[test]
fn synth_defaults_write_four_files() {
    let dir = TempDir::new().unwrap();
    let status = bin()
        .args(["synth", "--out", s(dir.path())])
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(EXIT_OK));
    let mut names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "test_large.csv",
            "test_none.csv",
            "test_small.csv",
            "train.csv"
        ]
    );
    let train = load_dataset(&dir.path().join("train.csv")).unwrap();
    assert_eq!((train.len(), train.dim()), (2000, 2));
    assert_eq!(
        load_dataset(&dir.path().join("test_large.csv"))
            .unwrap()
            .len(),
        1000
    );
}

#[test]
fn synth_is_seeded_and_level_selectable() {
    let (a, b, c) = (
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
        TempDir::new().unwrap(),
    );
    for d in [&a, &b] {
        run_from([
            "abstain",
            "synth",
            "--seed",
            "9",
            "--n",
            "300",
            "--out",
            s(d.path()),
        ])
        .unwrap();
    }
    for f in [
        "train.csv",
        "test_none.csv",
        "test_small.csv",
        "test_large.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
    run_from([
        "abstain",
        "synth",
        "--seed",
        "9",
        "--n",
        "300",
        "--level",
        "large",
        "--out",
        s(c.path()),
    ])
    .unwrap();
    assert_eq!(fs::read_dir(c.path()).unwrap().count(), 2);
    assert_eq!(
        fs::read(a.path().join("test_large.csv")).unwrap(),
        fs::read(c.path().join("test_large.csv")).unwrap()
    );
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("from_env");
    let status = bin()
        .env("ABSTAIN_OUT", &out)
        .args(["synth", "--n", "50", "--test-n", "10", "--level", "none"])
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(out.join("train.csv").exists() && out.join("test_none.csv").exists());
}

fn write_train_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("train.json");
    fs::write(
        &path,
        format!(r#"{{"train": "data/train.csv", "mlp": {{"epochs": 4, "hidden_dims": [16, 16]}}{extra}}}"#),
    )
    .unwrap();
    path
}

#[test]
fn train_is_deterministic_and_numbers_members() {
    let dir = TempDir::new().unwrap();
    synth(&dir.path().join("data"), 400, 100, 5);
    let config = write_train_config(dir.path(), r#", "seed": 100"#);
    for out in ["a", "b"] {
        let status = bin()
            .args([
                "train",
                "--config",
                s(&config),
                "--out",
                s(&dir.path().join(out)),
            ])
            .output()
            .unwrap()
            .status;
        assert!(status.success());
    }
    let a = dir.path().join("a");
    let members: Vec<PathBuf> = (0..10)
        .map(|m| a.join(format!("ensemble/member_{m:02}.json")))
        .collect();
    for (m, path) in members.iter().enumerate() {
        let doc: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(doc["config"]["seed"], 100 + m as u64);
    }
    assert_eq!(fs::read_dir(a.join("ensemble")).unwrap().count(), 10);
    for f in [
        "model.json",
        "ensemble/member_07.json",
        "train_report.json",
        "standardizer.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
    // the standard / MC Dropout network is ensemble member 0
    assert_eq!(
        fs::read(a.join("model.json")).unwrap(),
        fs::read(a.join("ensemble/member_00.json")).unwrap()
    );
}

#[test]
fn train_user_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let config = write_train_config(dir.path(), "");
    let out = bin()
        .args(["train", "--config", s(&config), "--out", s(dir.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.csv"));

    synth(&dir.path().join("data"), 100, 10, 1);
    fs::write(
        &config,
        r#"{"train": "data/train.csv", "mlp": {"learning_rate": -1}}"#,
    )
    .unwrap();
    let out = bin()
        .args(["train", "--config", s(&config), "--out", s(dir.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
    fs::write(&config, r#"{"train": "data/train.csv", "epochz": 3}"#).unwrap();
    let out = bin()
        .args(["train", "--config", s(&config), "--out", s(dir.path())])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
    let out = bin().args(["train"]).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
}

/// Trains a 3-member ensemble on synthetic data; returns (tempdir, model dir, test CSV).
fn trained() -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data");
    synth(&data, 400, 150, 8);
    let models = dir.path().join("models");
    cmd_train(
        &TrainConfig {
            train: data.join("train.csv"),
            mlp: quick_mlp(),
            ensemble_size: 3,
            ..TrainConfig::default()
        },
        &models,
    )
    .unwrap();
    (dir, models, data.join("test_large.csv"))
}

fn uncertainty(
    models: &Path,
    test: &Path,
    method: PredictorKind,
    passes: usize,
    out: &Path,
) -> Vec<abstain::tables::ObservationRow> {
    cmd_uncertainty(&UncertaintyArgs {
        models: ModelSource::Dir(models.to_path_buf()),
        test: test.to_path_buf(),
        method,
        passes,
        seed: 3,
        standardizer: None,
        out: out.to_path_buf(),
    })
    .unwrap()
}

#[test]
fn uncertainty_outputs() {
    let (dir, models, test) = trained();
    let n = load_dataset(&test).unwrap().len();
    let std_rows = uncertainty(
        &models,
        &test,
        PredictorKind::Standard,
        128,
        &dir.path().join("std"),
    );
    assert_eq!(std_rows.len(), n);
    assert!(std_rows.iter().all(|r| r.u_model == 0.0));
    let one = uncertainty(
        &models,
        &test,
        PredictorKind::McDropout,
        1,
        &dir.path().join("mc1"),
    );
    assert!(one.iter().all(|r| r.u_model == 0.0));
    let mc = uncertainty(
        &models,
        &test,
        PredictorKind::McDropout,
        32,
        &dir.path().join("mc"),
    );
    assert!(mc.iter().any(|r| r.u_model > 0.0));
    let de = uncertainty(
        &models,
        &test,
        PredictorKind::DeepEnsemble,
        0,
        &dir.path().join("de"),
    );
    assert!(de.iter().any(|r| r.u_model > 0.0));
    for r in de.iter().chain(&mc) {
        assert!(r.u_total >= r.u_data && r.u_total <= 1.0 + 1e-9);
        assert_eq!(r.pred_label, u8::from(r.p_class1 > 0.5));
    }
    let written = load_observations(&dir.path().join("de/uncertainty.csv")).unwrap();
    assert_eq!(written.len(), n);
    assert_eq!(
        written.iter().map(|r| r.obs_id).collect::<Vec<_>>(),
        (0..n as u64).collect::<Vec<_>>()
    );
    let header = fs::read_to_string(dir.path().join("de/uncertainty.csv")).unwrap();
    assert_eq!(
        header.lines().next().unwrap(),
        OBSERVATION_COLUMNS.join(",")
    );
    let again = uncertainty(
        &models,
        &test,
        PredictorKind::McDropout,
        32,
        &dir.path().join("mc2"),
    );
    assert_eq!(again, mc);
}

#[test]
fn uncertainty_feature_mismatch_exits_2() {
    let (dir, models, _) = trained();
    let bad = dir.path().join("three.csv");
    fs::write(&bad, "a,b,c,label\n1,2,3,0\n4,5,6,1\n").unwrap();
    let out = bin()
        .args([
            "uncertainty",
            "--models",
            s(&models),
            "--test",
            s(&bad),
            "--method",
            "standard",
            "--out",
            s(dir.path()),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expected 2, got 3"), "{stderr}");
    let out = bin()
        .args([
            "uncertainty",
            "--model",
            s(&models.join("model.json")),
            "--test",
            s(&bad),
            "--method",
            "standard",
            "--out",
            s(dir.path()),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
}

#[test]
fn reject_outputs() {
    let (dir, models, test) = trained();
    let rows = uncertainty(&models, &test, PredictorKind::DeepEnsemble, 0, dir.path());
    let plot = dir.path().join("plots/curve.svg");
    let curve = cmd_reject(&RejectArgs {
        input: dir.path().join("uncertainty.csv"),
        grid: None,
        rank_by: UncertaintyComponent::Total,
        seed: 0,
        out: dir.path().to_path_buf(),
        plot: Some(plot.clone()),
    })
    .unwrap();
    assert_eq!(curve.points.len(), 20);
    let accuracy = rows.iter().filter(|r| r.correct()).count() as f64 / rows.len() as f64;
    assert_eq!(curve.points[0].nra, accuracy);
    let text = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), CURVE_COLUMNS.join(","));
    assert_eq!(text.lines().count(), 21);
    let svg = fs::read_to_string(&plot).unwrap();
    roxmltree::Document::parse(&svg).expect("valid SVG");

    run_from([
        "abstain",
        "reject",
        "--input",
        s(&dir.path().join("uncertainty.csv")),
        "--grid",
        "0,0.5",
        "--rank-by",
        "model",
        "--out",
        s(&dir.path().join("g")),
    ])
    .unwrap();
    assert_eq!(
        fs::read_to_string(dir.path().join("g/curve.csv"))
            .unwrap()
            .lines()
            .count(),
        3
    );
}

#[test]
fn reject_user_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    let head = OBSERVATION_COLUMNS.join(",");
    for body in [
        "x,y\n1,2\n".to_string(),
        format!("{head}\n0,0.4,0,1,0.9,0.5\n"),
        format!("{head}\n0,0.4,0,1,abc,0.5,0.4\n"),
        format!("{head}\n0,0.4,0,1,0.9,0.5,0.4\n0,0.4,0,1,0.9,0.5,0.4\n"),
    ] {
        fs::write(&bad, &body).unwrap();
        let out = bin()
            .args(["reject", "--input", s(&bad), "--out", s(dir.path())])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(EXIT_USER), "{body}");
    }
    fs::write(&bad, format!("{head}\n0,0.4,0,1,0.9,0.5,0.4\n")).unwrap();
    let out = bin()
        .args([
            "reject",
            "--input",
            s(&bad),
            "--grid",
            "0.5,0.1",
            "--out",
            s(dir.path()),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
}

fn small_experiment(runs: usize, methods: Vec<PredictorKind>) -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synthetic(SyntheticSource {
            train_n: 300,
            test_n: 120,
            ..SyntheticSource::default()
        }),
        mlp: quick_mlp(),
        methods,
        mc_passes: 16,
        ensemble_size: 3,
        runs,
        ..ExperimentConfig::default()
    }
}

fn csv_header(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string()
}

#[test]
fn minimal_experiment_report() {
    let dir = TempDir::new().unwrap();
    let cfg = small_experiment(1, vec![PredictorKind::Standard]);
    let report = write_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(report.runs.len(), 1);
    assert_eq!(report.summary.len(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for key in [
        "config",
        "methods",
        "shifts",
        "histogram_edges",
        "summary",
        "runs",
    ] {
        assert!(json.get(key).is_some(), "{key}");
    }
    assert!(json["config"].get("output_dir").is_none());
    let parsed: ExperimentReport = serde_json::from_value(json).unwrap();
    assert_eq!(parsed, report);
    for e in &report.summary {
        assert_eq!(e.accuracy.se, 0.0);
        assert_eq!(e.u_model.mean, 0.0);
        for h in [&e.histograms.total, &e.histograms.data, &e.histograms.model] {
            assert_eq!(h.iter().sum::<f64>(), 120.0);
        }
    }
    let md = fs::read_to_string(dir.path().join("summary.md")).unwrap();
    assert!(md.contains("| Shift | Standard |") && md.contains("| Large |"));
}

#[test]
fn experiment_aggregates_and_schemas() {
    let dir = TempDir::new().unwrap();
    let cfg = small_experiment(3, PredictorKind::ALL.to_vec());
    let report = write_experiment(&cfg, dir.path()).unwrap();
    for e in &report.summary {
        let per_run: Vec<f64> = report
            .runs
            .iter()
            .map(|r| r.result(e.method, &e.shift).unwrap().accuracy)
            .collect();
        let mean = per_run.iter().sum::<f64>() / 3.0;
        assert!((e.accuracy.mean - mean).abs() < 1e-12);
        let sd = (per_run.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / 2.0).sqrt();
        assert!((e.accuracy.se - sd / 3f64.sqrt()).abs() < 1e-12);
        for r in &report.runs {
            let h = &r.result(e.method, &e.shift).unwrap().histograms;
            assert_eq!(h.total.iter().sum::<u64>(), 120);
            assert_eq!(h.model.iter().sum::<u64>(), 120);
        }
        assert!((e.histograms.data.iter().sum::<f64>() - 120.0).abs() < 1e-9);
    }
    let mut checked = 0;
    for sub in ["curves", "observations", "histograms"] {
        for entry in fs::read_dir(dir.path().join(sub)).unwrap() {
            let path = entry.unwrap().path();
            let expected = match sub {
                "curves" => CURVE_COLUMNS.join(","),
                "observations" => OBSERVATION_COLUMNS.join(","),
                _ => HISTOGRAM_COLUMNS.join(","),
            };
            assert_eq!(csv_header(&path), expected, "{}", path.display());
            if sub == "observations" && path.to_string_lossy().contains("standard_") {
                assert!(load_observations(&path)
                    .unwrap()
                    .iter()
                    .all(|o| o.u_model == 0.0));
            }
            checked += 1;
        }
    }
    // 9 (method, shift) cells: mean + 3 run curves, 3 run observation files, 1 histogram file
    assert_eq!(checked, 9 * 4 + 9 * 3 + 9);
    assert_eq!(
        csv_header(&dir.path().join("summary.csv")),
        SUMMARY_COLUMNS.join(",")
    );
    for shift in ["none", "small", "large"] {
        let svg = fs::read_to_string(dir.path().join(format!("plots/{shift}.svg"))).unwrap();
        roxmltree::Document::parse(&svg).unwrap();
    }
}

#[test]
fn experiment_is_deterministic_across_thread_counts() {
    let cfg = small_experiment(2, PredictorKind::ALL.to_vec());
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    write_experiment(&cfg, a.path()).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    pool.install(|| write_experiment(&cfg, b.path())).unwrap();
    for f in [
        "report.json",
        "summary.csv",
        "curves/mc_dropout_large_run01.csv",
        "observations/deep_ensemble_small_run00.csv",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn experiment_matches_synth_data() {
    // run r of an experiment sees the files `synth --seed <run seed>` writes
    let dir = TempDir::new().unwrap();
    let cfg = small_experiment(1, vec![PredictorKind::Standard]);
    let report = write_experiment(&cfg, &dir.path().join("exp")).unwrap();
    synth(&dir.path().join("data"), 300, 120, report.runs[0].seed);
    let test = load_dataset(&dir.path().join("data/test_small.csv")).unwrap();
    let obs =
        load_observations(&dir.path().join("exp/observations/standard_small_run00.csv")).unwrap();
    assert_eq!(
        obs.iter().map(|o| o.true_label).collect::<Vec<_>>(),
        test.labels()
    );
}

#[test]
fn csv_experiment_failures_name_the_stage() {
    let dir = TempDir::new().unwrap();
    synth(&dir.path().join("data"), 200, 50, 2);
    fs::write(dir.path().join("data/wide.csv"), "a,b,c,label\n1,2,3,0\n").unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{"runs": 1, "methods": ["standard"], "mlp": {"epochs": 2},
            "data": {"csv": {"train": "data/train.csv",
                             "tests": [{"name": "ok", "path": "data/test_none.csv"},
                                       {"name": "wide", "path": "data/wide.csv"}]}}}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "experiment",
            "--config",
            s(&config),
            "--out",
            s(&dir.path().join("r")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("stage `run 0: standardize test set 'wide'`"),
        "{stderr}"
    );

    fs::write(
        dir.path().join("data/wide.csv"),
        "a,b,label\n1,2,0\n3,4,1\n",
    )
    .unwrap();
    let out = bin()
        .args([
            "experiment",
            "--config",
            s(&config),
            "--out",
            s(&dir.path().join("r")),
        ])
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(EXIT_OK),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("r/curves/standard_wide.csv").exists());

    fs::write(&config, r#"{"runs": 0}"#).unwrap();
    let out = bin()
        .args([
            "experiment",
            "--config",
            s(&config),
            "--out",
            s(&dir.path().join("r0")),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_USER));
}

use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = "\
n_subcarriers = 32
pilot_spacing = 4
snr_grid_db = 0, 30
classes = A, C
n_train_per_class = 48
n_val_per_class = 16
n_classifier_train = 40
n_classifier_val = 10
n_test_per_point = 20
predictor_max_epochs = 2
classifier_max_epochs = 2
pilot_sweep_spacings = 4, 8
";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tddnet")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> (tempfile::TempDir, String, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("out");
    let (c, o) = (cfg.to_str().unwrap().to_string(), out.to_str().unwrap().to_string());
    (dir, c, o)
}

fn csv_rows(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().map(String::from);
    assert_eq!(lines.next().unwrap(), "experiment,class,x_name,x_value,method,metric,value,n_samples,config_hash,seed");
    lines.collect()
}

#[test]
fn full_pipeline() {
    let (_dir, cfg, out) = setup();
    let common = ["--config", &cfg, "--seed", "7", "--out", &out];
    let with = |cmd: &str, extra: &[&str]| {
        let mut v = vec![cmd];
        v.extend_from_slice(&common);
        v.extend_from_slice(extra);
        ok(&v)
    };

    with("gen-data", &[]);
    let data = Path::new(&out).join("data");
    assert!(data.join("link0_train_A.tdds").exists());
    assert!(data.join("link0_test_C_snr1.tdds").exists());
    assert!(data.join("rf_link0.bin").exists());

    with("train-all", &[]);
    let model = Path::new(&out).join("model");
    for f in ["classifier.mdl", "predictor_A.mdl", "predictor_C.mdl", "manifest.txt"] {
        assert!(model.join(f).exists(), "{f}");
    }
    assert!(!model.join("predictor_B.mdl").exists());

    with("eval-accuracy", &[]);
    let acc = csv_rows(&Path::new(&out).join("accuracy.csv"));
    assert_eq!(acc.len(), 2 * 3);
    assert!(acc.iter().all(|r| r.ends_with(",7")));

    with("eval-mse", &["--oracle-classifier"]);
    assert_eq!(csv_rows(&Path::new(&out).join("mse.csv")).len(), 2 * 2 * 6 * 2);

    with("eval-mismatch", &[]);
    assert_eq!(csv_rows(&Path::new(&out).join("mismatch.csv")).len(), 2 * 2 * 2 * 2);

    with("eval-pilot-sweep", &[]);
    assert_eq!(csv_rows(&Path::new(&out).join("pilot_sweep.csv")).len(), 2 * 5 * 2);
    assert!(Path::new(&out).join("pilot_sweep/predictor_C_spacing8.mdl").exists());
}

#[test]
fn separate_training_steps() {
    let (_dir, cfg, out) = setup();
    let base = ["--config", cfg.as_str(), "--out", out.as_str()];
    let mut args = vec!["train-predictor", "--class", "TDL-C", "--no-noise"];
    args.extend_from_slice(&base);
    ok(&args);

    let mut acc = vec!["eval-accuracy"];
    acc.extend_from_slice(&base);
    let fail = run(&acc);
    assert!(!fail.status.success());
    assert!(String::from_utf8_lossy(&fail.stderr).contains("no trained classifier"));

    let mut args = vec!["train-classifier"];
    args.extend_from_slice(&base);
    ok(&args);
    ok(&acc);
}

#[test]
fn reruns_are_byte_identical() {
    let (_dir, cfg, out) = setup();
    let base = ["--config", cfg.as_str(), "--out", out.as_str()];
    let mut train = vec!["train-all"];
    train.extend_from_slice(&base);
    let mut eval = vec!["eval-mse"];
    eval.extend_from_slice(&base);
    ok(&train);
    ok(&eval);
    let first = std::fs::read(Path::new(&out).join("mse.csv")).unwrap();
    ok(&train);
    ok(&eval);
    assert_eq!(first, std::fs::read(Path::new(&out).join("mse.csv")).unwrap());
}

#[test]
fn bad_inputs_are_reported() {
    let (dir, _cfg, out) = setup();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let r = run(&["gen-data", "--config", bad.to_str().unwrap(), "--out", &out]);
    assert!(!r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("no_such_key"));

    let r = run(&["train-predictor", "--class", "Z", "--out", &out]);
    assert!(!r.status.success());

    let r = run(&["eval-mismatch", "--out", &out]);
    assert!(!r.status.success());
}

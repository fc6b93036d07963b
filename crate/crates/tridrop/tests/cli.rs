use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tridrop::config::{TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use tridrop::idx::encode_idx;
use tridrop::report::AblationReport;
use tridrop_core::Rng;

fn tridrop(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tridrop"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// 6x6 images of noisy bars, so the tiny autoencoder has something to learn.
fn write_tiny_mnist(dir: &Path, train: usize, test: usize) {
    let mut rng = Rng::new(42);
    let mut split = |n: usize, images: &str, labels: &str| {
        let mut pixels = Vec::with_capacity(n * 36);
        let mut digits = Vec::with_capacity(n);
        for _ in 0..n {
            let d = rng.int_inclusive(0, 9) as u8;
            digits.push(d);
            for r in 0..6 {
                for c in 0..6 {
                    let on = (r + c) % 10 == d as usize || c == (d as usize % 6);
                    let noise = rng.int_inclusive(0, 40) as u8;
                    pixels.push(if on { 255 - noise } else { noise });
                }
            }
        }
        fs::write(dir.join(images), encode_idx(&[n, 6, 6], &pixels)).unwrap();
        fs::write(dir.join(labels), encode_idx(&[n], &digits)).unwrap();
    };
    split(train, TRAIN_IMAGES, TRAIN_LABELS);
    split(test, TEST_IMAGES, TEST_LABELS);
}

struct Workspace {
    _tmp: tempfile::TempDir,
    data: PathBuf,
    runs: PathBuf,
}

fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("mnist");
    fs::create_dir(&data).unwrap();
    write_tiny_mnist(&data, 256, 64);
    let runs = tmp.path().join("runs");
    Workspace {
        _tmp: tmp,
        data,
        runs,
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn train_tiny_ae(w: &Workspace, extra: &[&str]) -> Output {
    let mut args = vec![
        "train-ae",
        "--mnist-dir",
        s(&w.data),
        "--out-dir",
        s(&w.runs),
        "--hidden",
        "12",
        "--latent",
        "6",
        "--epochs",
        "3",
        "--batch",
        "32",
        "--lr",
        "0.01",
    ];
    args.extend_from_slice(extra);
    tridrop(&args)
}

#[test]
fn param_count_matches_table_rows() {
    for (w, params, pct) in [("512", "13621224", "89.0%"), ("64", "1674856", "98.6%")] {
        let o = tridrop(&["param-count", "--vgg-width", w]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        assert!(out.contains(&format!("params: {params}")), "{out}");
        assert!(out.contains(&format!("reduction: {pct}")), "{out}");
    }
}

#[test]
fn gradcheck_catalog_passes() {
    let o = tridrop(&["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().count() >= 29);
    assert!(out.lines().all(|l| l.starts_with("PASS")), "{out}");
}

#[test]
fn train_ablate_prune_and_count() {
    let w = workspace();
    let o = train_tiny_ae(&w, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let model = w.runs.join("ae_td_z6.tdrp");
    let log = fs::read_to_string(w.runs.join("ae_td_z6.log")).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("epoch ")).count(), 3);
    assert!(log.contains("lr 0.01"));

    let csv = w.runs.join("ablate.csv");
    let o = tridrop(&[
        "ablate",
        "--model",
        s(&model),
        "--mnist-dir",
        s(&w.data),
        "--out",
        s(&csv),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("# provenance: metric=bce "));
    assert!(text.contains("config_sha256="));
    let report = AblationReport::from_csv(&text).unwrap();
    assert_eq!(report.widths(), (1..=6).collect::<Vec<_>>());
    assert!(report.rows.windows(2).all(|r| r[0].params < r[1].params));

    // The full-width row is the unmasked evaluation.
    let m = tridrop::load_model(&model).unwrap();
    let images = tridrop::idx::load_idx_images(&w.data.join(TEST_IMAGES)).unwrap();
    let full = m.loss.loss(&m.forward(&images).unwrap(), &images).unwrap() as f64;
    assert_eq!(report.at(6), Some(full));

    let pruned = w.runs.join("pruned.tdrp");
    let o = tridrop(&["prune", "--model", s(&model), "--widths", "2", "--out", s(&pruned)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("max_abs_gap"), "{out}");
    let p = tridrop::load_model(&pruned).unwrap();
    assert!(p.tridrop_indices().is_empty());
    assert_eq!(out.lines().last().unwrap(), format!("wrote {}", pruned.display()));

    let o = tridrop(&["param-count", "--model", s(&pruned)]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), p.summarize());
    assert!(stdout(&o).contains(&format!("total params: {}", p.param_count())));
}

#[test]
fn prune_at_full_width_keeps_the_blob() {
    let w = workspace();
    assert!(train_tiny_ae(&w, &["--epochs", "1"]).status.success());
    let model = w.runs.join("ae_td_z6.tdrp");
    let pruned = w.runs.join("full.tdrp");
    let o = tridrop(&["prune", "--model", s(&model), "--widths", "6", "--out", s(&pruned)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = tridrop::load_model(&model).unwrap();
    let b = tridrop::load_model(&pruned).unwrap();
    assert_eq!(a.flat_params(), b.flat_params());
    let tail = |p: &Path, n: usize| {
        let bytes = fs::read(p).unwrap();
        bytes[bytes.len() - 4 * n..].to_vec()
    };
    assert_eq!(tail(&model, a.param_count()), tail(&pruned, b.param_count()));
}

#[test]
fn reruns_are_byte_identical() {
    let w = workspace();
    let run = |tag: &str| {
        assert!(train_tiny_ae(&w, &["--epochs", "2"]).status.success());
        let model = w.runs.join("ae_td_z6.tdrp");
        let csv = w.runs.join("ablate.csv");
        let o = tridrop(&[
            "ablate", "--model", s(&model), "--mnist-dir", s(&w.data), "--out", s(&csv),
        ]);
        assert!(o.status.success(), "{tag}: {}", stderr(&o));
        (
            fs::read(&model).unwrap(),
            fs::read(&csv).unwrap(),
            fs::read(w.runs.join("ae_td_z6.log")).unwrap(),
        )
    };
    assert_eq!(run("first"), run("second"));
}

#[test]
fn plain_models_need_force() {
    let w = workspace();
    assert!(train_tiny_ae(&w, &["--plain-width", "3", "--epochs", "1"]).status.success());
    let model = w.runs.join("ae_plain_z3.tdrp");
    let base = ["ablate", "--model", s(&model), "--mnist-dir", s(&w.data)];
    let o = tridrop(&base);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let mut forced = base.to_vec();
    forced.push("--force");
    let o = tridrop(&forced);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = AblationReport::from_csv(&stdout(&o)).unwrap();
    assert_eq!(report.widths(), vec![1, 2, 3]);
}

#[test]
fn config_file_and_flag_precedence() {
    let w = workspace();
    let cfg = w.runs.with_extension("json");
    fs::write(
        &cfg,
        format!(
            r#"{{"data": {{"mnist_dir": {:?}}}, "hidden": 10, "latent": 5,
                "train": {{"epochs": 1, "batch_size": 32}}, "out_dir": {:?}}}"#,
            s(&w.data),
            s(&w.runs)
        ),
    )
    .unwrap();
    let o = tridrop(&["--config", s(&cfg), "train-ae", "--latent", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = tridrop::load_model(&w.runs.join("ae_td_z4.tdrp")).unwrap();
    assert_eq!(m.layers()[0].params().out_dim(), 10);
    assert_eq!(m.tridrop_widths(), vec![4]);
}

#[test]
fn exit_codes_are_distinct() {
    let w = workspace();
    // Config: unknown key.
    let cfg = w.data.join("bad.json");
    fs::write(&cfg, r#"{"latnt": 3}"#).unwrap();
    assert_eq!(tridrop(&["--config", s(&cfg), "train-ae"]).status.code(), Some(2));
    // I/O: missing data files.
    let o = tridrop(&["train-ae", "--mnist-dir", "/nonexistent/mnist"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    // Format: a corrupted model file.
    let bad = w.data.join("bad.tdrp");
    fs::write(&bad, b"TDRQ\x01").unwrap();
    let o = tridrop(&["param-count", "--model", s(&bad)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("byte"), "{}", stderr(&o));
    // Numeric: a learning rate large enough to diverge.
    let o = train_tiny_ae(&w, &["--lr", "1e300", "--epochs", "2"]);
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    // Range errors are configuration errors.
    assert!(train_tiny_ae(&w, &["--epochs", "1"]).status.success());
    let model = w.runs.join("ae_td_z6.tdrp");
    let o = tridrop(&["ablate", "--model", s(&model), "--mnist-dir", s(&w.data), "--widths", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_distillation_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = tridrop(&[
        "distill",
        "--samples",
        "2048",
        "--hidden",
        "6",
        "--epochs",
        "4",
        "--batch",
        "256",
        "--eval-episodes",
        "5",
        "--out-dir",
        s(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("min_width_at_90"));
    let report = AblationReport::from_csv(
        &fs::read_to_string(dir.path().join("student_middle_h6.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(report.widths(), (1..=6).collect::<Vec<_>>());
    assert!(report.values().iter().all(|v| *v > 0.0));
}

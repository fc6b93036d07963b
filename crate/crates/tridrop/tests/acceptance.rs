//! Acceptance suite. Prints one PASS/FAIL line per criterion, then a summary,
//! and exits nonzero if any criterion fails.
//!
//! MNIST is read from `$TRIDROP_MNIST_DIR`, falling back to `data/mnist` at
//! the workspace root. Trained models are shared between criteria, so the
//! full suite takes roughly forty minutes on one core.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use tridrop::config::{
    AeSettings, CapacitySettings, ClfSettings, DataSettings, DistillSettings, GradcheckSettings,
    StudentVariant,
};
use tridrop::experiments::{
    accuracy_sweep, capacity_member, distill, gradcheck_catalog, prepare_for_ablation,
    prune_checked, reconstruction_sweep, train_autoencoder, train_classifier, Mnist, Trained,
    LINEAR_TOLERANCE,
};
use tridrop::model_file::{decode, encode};
use tridrop::report::{mean_abs_gap, mean_abs_successive_change, spearman, AblationRow};
use tridrop_core::train::{evaluate_loss, EpochLog};
use tridrop_core::{
    ActivationKind, Layer, LayerKind, LossKind, MaskMode, Matrix, Model, ModelSpec,
    ParamCountReport, Rng, TriangularMask,
};

struct Gate {
    verdicts: BTreeMap<u32, (bool, String)>,
    started: Instant,
}

impl Gate {
    fn record(&mut self, id: u32, title: &str, pass: bool, detail: impl Display) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "[{verdict}] {id:>2}. {title}: {detail} [{:.0}s]",
            self.started.elapsed().as_secs_f64()
        );
        self.verdicts.insert(id, (pass, title.to_string()));
    }

    fn error(&mut self, id: u32, title: &str, err: impl Display) {
        self.record(id, title, false, format!("error: {err}"));
    }
}

fn note(text: impl Display) {
    println!("       {text}");
}

fn progress(tag: &str) -> impl FnMut(&EpochLog) + '_ {
    move |e| eprintln!("  [{tag}] epoch {} loss {:.5} lr {}", e.epoch, e.loss, e.lr)
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("TRIDROP_MNIST_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

fn data_settings() -> DataSettings {
    DataSettings {
        mnist_dir: Some(mnist_dir()),
        ..DataSettings::default()
    }
}

fn metrics(rows: &[AblationRow]) -> Vec<f64> {
    rows.iter().map(|r| r.metric).collect()
}

fn at(rows: &[AblationRow], width: usize) -> f64 {
    rows.iter().find(|r| r.width == width).map_or(f64::NAN, |r| r.metric)
}

fn show(rows: &[AblationRow], widths: &[usize]) -> String {
    widths
        .iter()
        .map(|&w| format!("{w}:{:.4}", at(rows, w)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn list(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

fn as_f64(widths: &[usize]) -> Vec<f64> {
    widths.iter().map(|&w| w as f64).collect()
}

// ---------------------------------------------------------------- 1

fn vgg_param_counts(gate: &mut Gate) {
    let rows = [
        (4096, 123_642_856, 0.0),
        (2048, 57_627_624, 53.4),
        (1024, 27_765_736, 77.5),
        (512, 13_621_224, 89.0),
        (256, 6_745_576, 94.5),
        (128, 3_356_904, 97.3),
        (64, 1_674_856, 98.6),
        (32, 836_904, 99.3),
    ];
    let bad: Vec<String> = rows
        .iter()
        .filter_map(|&(w, params, pct)| {
            let r = ParamCountReport::for_vgg_width(w);
            (r.total != params || r.reduction_percent() != pct)
                .then(|| format!("{w} -> {} / {}%", r.total, r.reduction_percent()))
        })
        .collect();
    gate.record(
        1,
        "VGG19 head parameter counts",
        bad.is_empty(),
        if bad.is_empty() {
            "8/8 rows exact, 4096 -> 123642856 / 0.0% ... 32 -> 836904 / 99.3%".to_string()
        } else {
            format!("mismatched rows {bad:?}")
        },
    );
}

// ---------------------------------------------------------------- 2

/// Returns the first `(B, n, row)` whose mask breaks the expected shape.
fn first_bad_mask() -> Option<(usize, usize, usize)> {
    for b in 1..=64 {
        for n in 1..=64 {
            let dense: Matrix = TriangularMask::deterministic(b, n).ok()?.to_matrix();
            let mut prev = 0;
            for i in 0..b {
                let row = dense.row(i);
                let ones = row.iter().take_while(|&&v| v == 1.0).count();
                let prefix = row[ones..].iter().all(|&v| v == 0.0);
                let triangular = b != n || ones == i + 1;
                if !prefix || ones == 0 || ones < prev || !triangular {
                    return Some((b, n, i));
                }
                prev = ones;
            }
            if prev != n {
                return Some((b, n, b - 1));
            }
        }
    }
    None
}

fn mask_correctness(gate: &mut Gate) {
    let t = Instant::now();
    let bad = first_bad_mask();
    let secs = t.elapsed().as_secs_f64();
    gate.record(
        2,
        "Mask correctness over all (B, n) in 1..64 x 1..64",
        bad.is_none() && secs < 1.0,
        match bad {
            None => format!("4096 masks are ones-prefix, non-decreasing, full last row, lower-triangular at B==n; {secs:.3}s (< 1s)"),
            Some(c) => format!("violation at (B, n, row) = {c:?}"),
        },
    );
}

// ---------------------------------------------------------------- 3

fn gradient_oracle(gate: &mut Gate) {
    let title = "Gradient oracle catalog";
    let t = Instant::now();
    let entries = match gradcheck_catalog(&GradcheckSettings::default()) {
        Ok(e) => e,
        Err(e) => return gate.error(3, title, e),
    };
    let secs = t.elapsed().as_secs_f64();
    let failed: Vec<&str> = entries
        .iter()
        .filter(|e| !e.passed())
        .map(|e| e.name.as_str())
        .collect();
    let worst = |linear: bool| {
        entries
            .iter()
            .filter(|e| (e.tolerance == LINEAR_TOLERANCE) == linear)
            .map(|e| e.report.max_error)
            .fold(0.0, f64::max)
    };
    let regimes = ["B<n", "B==n", "B>n"]
        .iter()
        .all(|r| entries.iter().any(|e| e.name.contains(r)));
    gate.record(
        3,
        title,
        failed.is_empty() && regimes && secs < 30.0,
        format!(
            "{} models, worst nonlinear rel err {:.2e} (< 1e-3), worst linear {:.2e} (< 1e-6), \
             mask regimes B<n, B==n, B>n present: {regimes}, {secs:.1}s (< 30s){}",
            entries.len(),
            worst(false),
            worst(true),
            if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
        ),
    );
}

// ---------------------------------------------------------------- 12

fn random_model(rng: &mut Rng, case: usize) -> Model {
    let mut spec = ModelSpec::new(
        &format!("random #{case}"),
        rng.int_inclusive(1, 16),
        LossKind::ALL[rng.int_inclusive(0, LossKind::ALL.len() - 1)],
    )
    .with_seed(rng.next_u64());
    for _ in 0..rng.int_inclusive(1, 5) {
        let kind = if rng.bernoulli(0.5) { LayerKind::TriDrop } else { LayerKind::Dense };
        let act = ActivationKind::ALL[rng.int_inclusive(0, ActivationKind::ALL.len() - 1)];
        spec = spec.layer(kind, rng.int_inclusive(1, 24), act);
    }
    let mut m = Model::from_spec(&spec).expect("valid random spec");
    m.provenance = format!("case={case}\nbackslash \\ and = sign");
    for s in m.param_slices_mut() {
        for v in s.iter_mut() {
            *v = f32::from_bits(rng.next_u64() as u32);
        }
    }
    for layer in m.layers_mut() {
        if let Layer::TriDrop(t) = layer {
            if rng.bernoulli(0.5) {
                t.eval_width = Some(rng.int_inclusive(1, t.width()));
            }
            if rng.bernoulli(0.5) {
                t.mode = MaskMode::RandomPrefix;
            }
        }
    }
    m
}

fn round_trip(gate: &mut Gate) {
    let t = Instant::now();
    let mut rng = Rng::new(12);
    let bits = |m: &Model| m.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let mut bad = Vec::new();
    for case in 0..100 {
        let m = random_model(&mut rng, case);
        let bytes = encode(&m);
        let same = match decode(&bytes) {
            Ok(back) => {
                bits(&back) == bits(&m)
                    && back.spec() == m.spec()
                    && back.provenance == m.provenance
                    && encode(&back) == bytes
            }
            Err(_) => false,
        };
        if !same {
            bad.push(case);
        }
    }
    let secs = t.elapsed().as_secs_f64();
    gate.record(
        12,
        "Model file round trip",
        bad.is_empty() && secs < 10.0,
        format!(
            "100 random specs with arbitrary f32 bit patterns, {} mismatches {bad:?}, {secs:.2}s (< 10s)",
            bad.len()
        ),
    );
}

// ---------------------------------------------------------------- 4

/// Largest masked-versus-pruned gap over every width set, or the first error.
fn worst_prune_gap(model: &Model, width_sets: &[Vec<usize>]) -> Result<f32, String> {
    let mut worst = 0.0f32;
    for (i, w) in width_sets.iter().enumerate() {
        let p = prune_checked(model, w, 1024, i as u64).map_err(|e| format!("widths {w:?}: {e}"))?;
        worst = worst.max(p.gap);
    }
    Ok(worst)
}

fn extraction(gate: &mut Gate, ae: &Model, clf: &Model) {
    let t = Instant::now();
    let ae_sets: Vec<Vec<usize>> = (1..=32).map(|k| vec![k]).collect();
    let mut rng = Rng::new(4);
    let h = clf.tridrop_widths();
    let clf_sets: Vec<Vec<usize>> = (0..16)
        .map(|_| vec![rng.int_inclusive(1, h[0]), rng.int_inclusive(1, h[1])])
        .collect();
    let ae_gap = worst_prune_gap(ae, &ae_sets);
    let clf_gap = worst_prune_gap(clf, &clf_sets);
    let secs = t.elapsed().as_secs_f64();
    let title = "Extraction equivalence of pruned models";
    match (ae_gap, clf_gap) {
        (Ok(a), Ok(c)) => gate.record(
            4,
            title,
            a <= 1e-6 && c <= 1e-6 && secs < 60.0,
            format!(
                "z=32 autoencoder, k in 1..32: max abs gap {a:.2e}; stacked classifier, 16 random (k1, k2) \
                 e.g. {:?}: max abs gap {c:.2e} (both <= 1e-6 over 1024 inputs); {secs:.1}s (< 60s)",
                &clf_sets[..3]
            ),
        ),
        (a, c) => gate.error(4, title, format!("{:?} / {:?}", a.err(), c.err())),
    }
}

// ---------------------------------------------------------------- 5, 6, 7

fn train_ae(gate: &mut Gate, id: u32, s: &AeSettings, data: &tridrop_core::Dataset) -> Option<Trained> {
    let stem = s.file_stem();
    match train_autoencoder(s, data, progress(&stem)) {
        Ok(t) => Some(t),
        Err(e) => {
            gate.error(id, &format!("training {stem}"), e);
            None
        }
    }
}

/// Trains every autoencoder, records 5-7 and returns the TD z=32 model.
fn autoencoders(gate: &mut Gate, mnist: &Mnist, data: &DataSettings) -> Option<Model> {
    let train_set = mnist.autoencoder_train().ok()?;
    let test_set = mnist.autoencoder_test().ok()?;
    let base = AeSettings {
        data: data.clone(),
        ..AeSettings::default()
    };
    note(format!(
        "autoencoders 784-256-z-256-784: Adam lr {}, batch {}, plateau schedule, at most {} epochs",
        base.train.lr, base.train.batch_size, base.train.epochs
    ));
    let widths: Vec<usize> = (1..=32).collect();
    let sweep = |m: &Model, w: &[usize]| reconstruction_sweep(m, &mnist.test_images, w).ok();

    let td = train_ae(gate, 5, &base, &train_set)?;
    let td_curve = sweep(&td.model, &widths)?;
    note(format!(
        "TD z=32 after {} epochs, test BCE by width {}",
        td.report.epochs.len(),
        show(&td_curve, &[1, 2, 4, 8, 16, 32])
    ));

    // 5
    let plain = train_ae(gate, 5, &AeSettings { plain: true, ..base.clone() }, &train_set)?;
    let mut ablated = plain.model.clone();
    prepare_for_ablation(&mut ablated, true, None).ok()?;
    let plain_curve = sweep(&ablated, &widths)?;
    let rho = spearman(&as_f64(&widths), &metrics(&td_curve));
    let below = [4, 8, 16].iter().all(|&k| at(&td_curve, k) < at(&plain_curve, k));
    gate.record(
        5,
        "Autoencoder ablation trend vs ablated plain autoencoder",
        rho <= -0.9 && below,
        format!(
            "Spearman rho(width, BCE) {rho:.4} (<= -0.9); TD {} vs ablated plain {}, TD strictly lower: {below}",
            show(&td_curve, &[4, 8, 16]),
            show(&plain_curve, &[4, 8, 16])
        ),
    );

    // 6
    let mut close = true;
    let mut parts = Vec::new();
    for k in [4, 8, 16] {
        let s = AeSettings { plain_width: Some(k), ..base.clone() };
        let dedicated = train_ae(gate, 6, &s, &train_set)?;
        let loss = evaluate_loss(&dedicated.model, &test_set, 2000).ok()?;
        let rel = (at(&td_curve, k) - loss) / loss;
        close &= rel.abs() <= 0.25;
        parts.push(format!("k={k}: TD {:.4} vs dedicated {loss:.4} ({:+.1}%)", at(&td_curve, k), 100.0 * rel));
    }
    gate.record(6, "TD within 25% of dedicated plain autoencoders", close, parts.join("; "));

    // 7
    let capacity = CapacitySettings {
        data: data.clone(),
        available_widths: vec![4, 8, 16, 32, 64, 128],
        ..CapacitySettings::default()
    };
    let mut curves = Vec::new();
    for &n in &capacity.available_widths {
        let rows = if n == base.latent {
            td_curve.clone()
        } else {
            let trained = train_ae(gate, 7, &capacity_member(&capacity, n), &train_set)?;
            let w: Vec<usize> = (1..=capacity.eval_max_width.min(n)).collect();
            sweep(&trained.model, &w)?
        };
        note(format!("capacity n={n}: {}", show(&rows, &[1, 2, 3, 4])));
        curves.push(rows);
    }
    let at4: Vec<f64> = curves.iter().map(|r| at(r, 4)).collect();
    let in_order = 1 + at4.windows(2).filter(|w| w[1] >= w[0]).count();
    // Successive curves are compared over every width both were evaluated at.
    let gaps: Vec<f64> = curves
        .windows(2)
        .map(|w| mean_abs_gap(&metrics(&w[0]), &metrics(&w[1])))
        .collect();
    let head_gaps: Vec<f64> = curves
        .windows(2)
        .map(|w| mean_abs_gap(&metrics(&w[0][..4]), &metrics(&w[1][..4])))
        .collect();
    let shrinking = gaps.last() < gaps.first();
    gate.record(
        7,
        "Capacity sweep trend",
        in_order >= 5 && shrinking,
        format!(
            "BCE at width 4 for n={:?}: [{}], {in_order}/6 in non-decreasing order (>= 5); \
             successive mean gaps over shared widths: [{}], last < first: {shrinking}",
            capacity.available_widths,
            list(&at4),
            list(&gaps)
        ),
    );
    note(format!("successive mean gaps over widths 1..4 only: [{}]", list(&head_gaps)));
    Some(td.model)
}

// ---------------------------------------------------------------- 8, 9

/// Trains the batch sweep, records 8 and 9 and returns the batch-512 model.
fn classifiers(gate: &mut Gate, mnist: &Mnist, data: &DataSettings) -> Option<Model> {
    let train_set = mnist.classifier_train().ok()?;
    let s = ClfSettings {
        data: data.clone(),
        ..ClfSettings::default()
    };
    note(format!(
        "classifiers 784-{h}(TD)-{h}(TD)-10: Adam lr {}, {} epochs",
        s.train.lr,
        s.train.epochs,
        h = s.hidden
    ));
    let widths: Vec<usize> = (1..=s.hidden).collect();
    let mut curves = BTreeMap::new();
    let mut b512 = None;
    for batch in [64, 128, 256, 512] {
        let stem = s.file_stem(batch);
        let trained = match train_classifier(&s, batch, &train_set, progress(&stem)) {
            Ok(t) => t,
            Err(e) => {
                gate.error(8, &format!("training {stem}"), e);
                return None;
            }
        };
        let rows = accuracy_sweep(&trained.model, &mnist.test_images, &mnist.test_labels, &widths).ok()?;
        note(format!("batch {batch}: accuracy by width {}", show(&rows, &[1, 4, 8, 16, 64, 128, 256])));
        curves.insert(batch, rows);
        if batch == 512 {
            b512 = Some(trained.model);
        }
    }

    let c = &curves[&512];
    let full = at(c, s.hidden);
    let (half, sixteen) = (at(c, 128), at(c, 16));
    gate.record(
        8,
        "Stacked TD classifier width tolerance (batch 512)",
        half >= full - 0.01 && sixteen >= 0.80,
        format!(
            "accuracy full {full:.4}, width 128 {half:.4} (drop {:.2} points, <= 1.0), width 16 {sixteen:.4} (>= 0.80)",
            100.0 * (full - half)
        ),
    );

    let rhos: Vec<f64> = curves.values().map(|r| spearman(&as_f64(&widths), &metrics(r))).collect();
    let rough: Vec<f64> = curves.values().map(|r| mean_abs_successive_change(&metrics(r))).collect();
    let monotone = rhos.iter().all(|&r| r >= 0.8);
    let irregular = rough[0] > rough[3];
    gate.record(
        9,
        "Batch sweep trend and irregularity",
        monotone && irregular,
        format!(
            "batches 64/128/256/512: Spearman rho(width, accuracy) [{}] (all >= 0.8); \
             mean abs successive change [{}], batch 64 > batch 512: {irregular}",
            list(&rhos),
            list(&rough)
        ),
    );
    b512
}

// ---------------------------------------------------------------- 10

fn distillation(gate: &mut Gate) {
    let title = "Distilled student width search";
    let mut results = Vec::new();
    for variant in [StudentVariant::Middle, StudentVariant::All] {
        let s = DistillSettings { variant, ..DistillSettings::default() };
        match distill(&s, progress(&s.file_stem())) {
            Ok(d) => results.push((s.hidden, d)),
            Err(e) => return gate.error(10, title, e),
        }
    }
    let (hidden, middle) = &results[0];
    let all = &results[1].1;
    let score = middle.full_width_score();
    let pass = score >= 0.95
        && middle.search.found
        && middle.search.width < *hidden
        && all.search.width >= middle.search.width;
    gate.record(
        10,
        title,
        pass,
        format!(
            "middle-TD h={hidden}: full-width score {score:.4} (>= 0.95), min_width_at_90 {} (< {hidden}); \
             all-TD: full-width score {:.4}, min_width_at_90 {} (>= middle)",
            middle.search.width,
            all.full_width_score(),
            all.search.width
        ),
    );
}

// ---------------------------------------------------------------- 11

fn run_cli(args: &[String]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tridrop"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir).into_iter().flatten().flatten() {
        if let Ok(bytes) = fs::read(entry.path()) {
            files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
        }
    }
    files
}

/// Runs every experiment command on small settings and returns the output files.
fn cli_session(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let _ = fs::remove_dir_all(dir);
    fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let d = dir.display().to_string();
    let mnist = mnist_dir().display().to_string();
    let data = ["--mnist-dir", &mnist, "--train-limit", "2048", "--test-limit", "500"];
    let cmd = |parts: &[&str], extra: &[&str]| -> Vec<String> {
        parts.iter().chain(extra).map(|s| s.to_string()).collect()
    };
    let model = format!("{d}/ae_td_z8.tdrp");
    let runs = [
        cmd(&["train-ae", "--latent", "8", "--hidden", "32", "--epochs", "2", "--batch", "256", "--out-dir", &d], &data),
        cmd(&["ablate", "--model", &model, "--out", &format!("{d}/ablation.csv")], &data),
        cmd(&["prune", "--model", &model, "--widths", "3", "--out", &format!("{d}/pruned.tdrp")], &[]),
        cmd(&["train-clf", "--hidden", "16", "--epochs", "1", "--batch-sweep", "64,512", "--out-dir", &d], &data),
        cmd(&["capacity-sweep", "--available-widths", "4,8", "--eval-max-width", "4", "--hidden", "32", "--epochs", "1", "--batch", "256", "--out-dir", &d], &data),
        cmd(&["distill", "--samples", "2000", "--hidden", "8", "--epochs", "2", "--batch", "256", "--eval-episodes", "5", "--out-dir", &d], &[]),
    ];
    for args in &runs {
        run_cli(args)?;
    }
    Ok(snapshot(dir))
}

fn determinism(gate: &mut Gate) {
    let title = "CLI reruns are byte-identical";
    let t = Instant::now();
    let dir = std::env::temp_dir().join(format!("tridrop-acceptance-{}", std::process::id()));
    let result = cli_session(&dir).and_then(|first| cli_session(&dir).map(|second| (first, second)));
    let _ = fs::remove_dir_all(&dir);
    let secs = t.elapsed().as_secs_f64();
    match result {
        Ok((first, second)) => {
            let differing: Vec<&String> = first
                .iter()
                .filter(|(name, bytes)| second.get(*name) != Some(bytes))
                .map(|(name, _)| name)
                .collect();
            let covered = |ext: &str| first.keys().filter(|n| n.ends_with(ext)).count();
            gate.record(
                11,
                title,
                differing.is_empty() && first.len() == second.len() && secs < 300.0,
                format!(
                    "train-ae, ablate, prune, train-clf, capacity-sweep, distill run twice: {} files \
                     ({} models, {} CSVs, {} logs), differing {differing:?}; {secs:.0}s (< 300s)",
                    first.len(),
                    covered(".tdrp"),
                    covered(".csv"),
                    covered(".log")
                ),
            );
        }
        Err(e) => gate.error(11, title, e),
    }
}

// ---------------------------------------------------------------- main

fn main() {
    let mut gate = Gate {
        verdicts: BTreeMap::new(),
        started: Instant::now(),
    };
    println!("Triangular Dropout acceptance suite");
    vgg_param_counts(&mut gate);
    mask_correctness(&mut gate);
    gradient_oracle(&mut gate);
    round_trip(&mut gate);

    let data = data_settings();
    match Mnist::load(&data) {
        Ok(mnist) => {
            note(format!(
                "MNIST from {}: {} training and {} test images",
                mnist_dir().display(),
                mnist.train_images.rows(),
                mnist.test_images.rows()
            ));
            let ae = autoencoders(&mut gate, &mnist, &data);
            let clf = classifiers(&mut gate, &mnist, &data);
            match (ae, clf) {
                (Some(ae), Some(clf)) => extraction(&mut gate, &ae, &clf),
                _ => gate.error(4, "Extraction equivalence of pruned models", "trained models unavailable"),
            }
            distillation(&mut gate);
            determinism(&mut gate);
        }
        Err(e) => {
            let why = format!("MNIST not readable at {}: {e}", mnist_dir().display());
            for id in [4, 5, 6, 7, 8, 9, 11] {
                gate.error(id, "needs MNIST", &why);
            }
            distillation(&mut gate);
        }
    }

    println!("summary:");
    for id in 1..=12 {
        match gate.verdicts.get(&id) {
            Some((pass, title)) => println!("  {id:>2} {} {title}", if *pass { "PASS" } else { "FAIL" }),
            None => println!("  {id:>2} FAIL not evaluated"),
        }
    }
    let failed = (1..=12)
        .filter(|id| !gate.verdicts.get(id).is_some_and(|v| v.0))
        .count();
    println!(
        "{} of 12 criteria passed in {:.0}s",
        12 - failed,
        gate.started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

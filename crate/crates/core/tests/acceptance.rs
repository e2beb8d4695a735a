//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each, and exits non-zero if any failed.
//!
//! Pass criterion numbers as arguments to run a subset, e.g.
//! `cargo test --test acceptance -- 1 4`.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::test_runner::{Config as PropConfig, TestCaseError, TestRunner};
use superchars::classifier::{
    conv2d, evaluate, init_model, load_model, maxpool2, save_model, train, Dataset, ModelConfig,
    Prng, Tensor, TrainConfig,
};
use superchars::corpus::{build_dataset, Corpus, LabeledSample};
use superchars::layout::{derive_geometry, plan_layout, LayoutConfig, Segmentation};
use superchars::raster::{encode_png, render, FontHandle};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "layout laws", budget: Duration::from_secs(30), run: layout_laws },
        Criterion { id: 2, name: "geometry fidelity", budget: Duration::from_secs(1), run: geometry },
        Criterion { id: 3, name: "rendering determinism", budget: Duration::from_secs(10), run: rendering },
        Criterion { id: 4, name: "numerical core", budget: Duration::from_secs(60), run: numerics },
        Criterion { id: 5, name: "end-to-end toy experiment", budget: Duration::from_secs(600), run: toy_experiment },
        Criterion { id: 6, name: "cut-length effect", budget: Duration::from_secs(600), run: cut_length_effect },
        Criterion { id: 7, name: "persistence", budget: Duration::from_secs(120), run: persistence },
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();

    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if !selected.is_empty() && !selected.contains(&c.id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|p| {
                let msg = p
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_else(|| "panic".into());
                Err(format!("panicked: {msg}"))
            })
            .and_then(|detail| {
                let took = start.elapsed();
                if took > c.budget {
                    Err(format!("{detail}; took {took:.1?}, budget {:?}", c.budget))
                } else {
                    Ok(detail)
                }
            });
        let took = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("acceptance {} {:<26} PASS ({took:.1}s) {detail}", c.id, c.name),
            Err(detail) => {
                failed += 1;
                println!("acceptance {} {:<26} FAIL ({took:.1}s) {detail}", c.id, c.name);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn layout_laws() -> Outcome {
    let cases = 1000;
    let mut runner = TestRunner::new(PropConfig {
        cases,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let strategy = (common::text_strategy(60), common::config_strategy());
    runner
        .run(&strategy, |(text, config)| {
            common::check_layout_laws(&text, &config)
                .map_err(|m| TestCaseError::fail(format!("{m}; text={text:?} config={config:?}")))
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{cases} random text x config cases, zero failures"))
}

fn geometry() -> Outcome {
    for (size, grid, cell) in [(224, 8, 28), (224, 14, 16), (224, 28, 8), (64, 8, 8)] {
        let config = LayoutConfig::new(size, grid, Segmentation::CharLevel);
        let got = derive_geometry(&config).map_err(|e| e.to_string())?.cell_px;
        ensure(got == cell, || format!("({size},{grid}) gave {got}, expected {cell}"))?;
    }
    Ok("(224,8)->28, (224,14)->16, (224,28)->8".into())
}

fn rendering() -> Outcome {
    let configs = [(224, 8), (224, 14), (224, 28), (64, 8)]
        .map(|(s, g)| LayoutConfig::new(s, g, Segmentation::CharLevel));
    let (font_a, font_b) = (FontHandle::bundled(), FontHandle::bundled());
    let mut rng = Prng::new(2024);
    for i in 0..100 {
        let text = common::random_text(&mut rng, 80);
        let config = &configs[i % configs.len()];
        let plan = plan_layout(&text, config).map_err(|e| e.to_string())?;
        let a = encode_png(&render(&plan, &font_a, config).map_err(|e| e.to_string())?);
        let b = encode_png(&render(&plan, &font_b, config).map_err(|e| e.to_string())?);
        ensure(a == b, || format!("text {text:?} rendered differently"))?;
    }
    for config in &configs {
        let plan = plan_layout("", config).map_err(|e| e.to_string())?;
        let img = render(&plan, &font_a, config).map_err(|e| e.to_string())?;
        ensure(img.pixels.iter().all(|&p| p == 0), || {
            format!("empty text left ink at {}px", config.image_size)
        })?;
    }
    Ok("100 texts byte-identical across two renders; empty text all zero".into())
}

fn numerics() -> Outcome {
    let mut rng = Prng::new(77);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let c = 1 + rng.below(4) as usize;
        let f = 1 + rng.below(4) as usize;
        let h = 2 * (1 + rng.below(8) as usize);
        let w = 2 * (1 + rng.below(8) as usize);
        let input: Vec<f64> = (0..c * h * w).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let kernels: Vec<f64> = (0..f * c * 9).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let bias: Vec<f64> = (0..f).map(|_| rng.uniform(-1.0, 1.0)).collect();

        let expected = common::conv_oracle(&input, (c, h, w), &kernels, &bias);
        let tensor = |shape: Vec<usize>, data: Vec<f64>| Tensor::new(shape, data).unwrap();
        let got = conv2d(
            &tensor(vec![c, h, w], input.clone()),
            &tensor(vec![f, c, 3, 3], kernels),
            &tensor(vec![f], bias),
        )
        .map_err(|e| e.to_string())?;
        for (a, b) in got.data().iter().zip(&expected) {
            worst = worst.max((a - b).abs());
        }
        let pooled = maxpool2(&tensor(vec![c, h, w], input.clone())).map_err(|e| e.to_string())?;
        for (a, b) in pooled.output.data().iter().zip(common::maxpool_oracle(&input, (c, h, w))) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("oracle max abs diff {worst:e}"))?;

    let model = init_model(ModelConfig {
        input_side: 8,
        num_classes: 2,
        conv_channels: vec![2],
        seed: 1,
    })
    .map_err(|e| e.to_string())?;
    let input: Vec<f64> = (0..64).map(|_| rng.next_f64()).collect();
    let (rel, compared) = common::finite_difference_max_rel_error(&model, &input, 1, 1e-5);
    ensure(rel <= 1e-4, || format!("gradient relative error {rel:e}"))?;
    Ok(format!(
        "200 tensors, max abs diff {worst:.1e}; gradient rel error {rel:.1e} over {compared}/{} params (others both < {:e})",
        model.parameter_count(),
        common::GRAD_FLOOR
    ))
}

/// Two classes drawn from disjoint inventories of Latin and CJK characters.
fn disjoint_corpus(n: usize, seed: u64) -> Corpus {
    let inventories: [Vec<char>; 2] = [
        "abcdefghijklm你好超级字符是一种".chars().collect(),
        "nopqrstuvwxyz方法中文人大小上下天".chars().collect(),
    ];
    let mut rng = Prng::new(seed);
    let mut samples: Vec<LabeledSample> = (0..n)
        .map(|i| {
            let class = (i % 2) as u32;
            let inv = &inventories[class as usize];
            let len = 20 + rng.below(41) as usize;
            let text = (0..len).map(|_| inv[rng.below(inv.len() as u64) as usize]).collect();
            LabeledSample { class, text }
        })
        .collect();
    rng.shuffle(&mut samples);
    Corpus {
        name: format!("disjoint-{seed}"),
        num_classes: 2,
        samples,
    }
}

fn split(mut corpus: Corpus, n_test: usize) -> (Corpus, Corpus) {
    let test = corpus.samples.split_off(corpus.samples.len() - n_test);
    let test = Corpus {
        name: format!("{}-test", corpus.name),
        num_classes: corpus.num_classes,
        samples: test,
    };
    (corpus, test)
}

fn toy_experiment() -> Outcome {
    let font = FontHandle::bundled();
    let layout = LayoutConfig::new(64, 8, Segmentation::CharLevel);
    let mut report = Vec::new();
    let mut failures = Vec::new();
    for seed in [1u64, 2, 3] {
        let (train_c, test_c) = split(disjoint_corpus(2000, seed), 500);
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        build_dataset(&train_c, &layout, &font, dir.path(), "train").map_err(|e| e.to_string())?;
        let manifest =
            build_dataset(&test_c, &layout, &font, dir.path(), "test").map_err(|e| e.to_string())?;
        let train_set = Dataset::from_manifest(&manifest, dir.path(), "train").map_err(|e| e.to_string())?;
        let test_set = Dataset::from_manifest(&manifest, dir.path(), "test").map_err(|e| e.to_string())?;
        let model = init_model(ModelConfig {
            input_side: 64,
            num_classes: 2,
            seed,
            ..ModelConfig::default()
        })
        .map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let (model, _) = train(model, &train_set, &cfg, |_| {}).map_err(|e| e.to_string())?;
        let acc = evaluate(&model, &test_set).map_err(|e| e.to_string())?.accuracy;
        report.push(format!("seed {seed}: {:.1}%", 100.0 * acc));
        if acc < 0.95 {
            failures.push(seed);
        }
    }
    let summary = format!("1500 train / 500 test, {} epochs; {}", TrainConfig::default().epochs, report.join(", "));
    ensure(failures.is_empty(), || format!("below 95% for seeds {failures:?}; {summary}"))?;
    Ok(summary)
}

/// Long texts whose first 80-100 characters are shared filler; the class
/// signal only starts after that.
fn write_long_text_csv(path: &Path, n: usize, rng: &mut Prng) -> Result<(), String> {
    let filler: Vec<char> = "0123456789+-*/=#@%&".chars().collect();
    let tails: [Vec<char>; 2] = ["abcdefghijklm".chars().collect(), "nopqrstuvwxyz".chars().collect()];
    let mut rows = String::new();
    for i in 0..n {
        let class = i % 2;
        let mut text: String = (0..80 + rng.below(21))
            .map(|_| filler[rng.below(filler.len() as u64) as usize])
            .collect();
        let inv = &tails[class];
        text.extend((0..60 + rng.below(31)).map(|_| inv[rng.below(inv.len() as u64) as usize]));
        rows.push_str(&format!("{},\"{text}\"\n", class + 1));
    }
    fs::write(path, rows).map_err(|e| e.to_string())
}

fn cut_length_effect() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (train_csv, test_csv) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    let mut rng = Prng::new(6);
    write_long_text_csv(&train_csv, 600, &mut rng)?;
    write_long_text_csv(&test_csv, 200, &mut rng)?;
    let out_dir = dir.path().join("sweep");
    let out = Command::new(env!("CARGO_BIN_EXE_superchars"))
        .args(["sweep", "--classes", "2", "--grids", "8,14", "--image-size", "112"])
        .args(["--seed", "1", "--model-seed", "1"])
        .arg("--csv")
        .arg(&train_csv)
        .arg("--test-csv")
        .arg(&test_csv)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("sweep exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr))
    })?;
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let acc = |grid: u64| -> Result<f64, String> {
        json["rows"]
            .as_array()
            .and_then(|rows| rows.iter().find(|r| r["grid_dim"] == grid))
            .and_then(|r| r["accuracy"].as_f64())
            .ok_or_else(|| format!("no row for grid {grid}"))
    };
    let (a8, a14) = (acc(8)?, acc(14)?);
    let summary = format!("grid 8: {:.1}%, grid 14: {:.1}% (600 train / 200 test, 112px)", 100.0 * a8, 100.0 * a14);
    ensure(a14 >= a8 + 0.10, || format!("gap under 10 points; {summary}"))?;
    Ok(summary)
}

fn persistence() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let font = FontHandle::bundled();
    let layout = LayoutConfig::new(32, 4, Segmentation::CharLevel);
    let corpus = disjoint_corpus(80, 9);
    let manifest = build_dataset(&corpus, &layout, &font, d, "train").map_err(|e| e.to_string())?;
    let data = Dataset::from_manifest(&manifest, d, "train").map_err(|e| e.to_string())?;
    let model = init_model(ModelConfig {
        input_side: 32,
        num_classes: 2,
        conv_channels: vec![4, 8],
        seed: 4,
    })
    .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epochs: 2,
        batch_size: 8,
        ..TrainConfig::default()
    };
    let (model, _) = train(model, &data, &cfg, |_| {}).map_err(|e| e.to_string())?;
    let path = d.join("model.scm");
    save_model(&model, &path).map_err(|e| e.to_string())?;
    let loaded = load_model(&path).map_err(|e| e.to_string())?;
    let bits = |m: &superchars::classifier::Model| -> Vec<u64> {
        m.parameters().flat_map(|t| t.data().iter().map(|x| x.to_bits())).collect()
    };
    ensure(bits(&model) == bits(&loaded), || "parameters differ after reload".into())?;
    ensure(loaded.config == model.config && loaded.dataset_hash == model.dataset_hash, || {
        "config or dataset hash differ after reload".into()
    })?;
    let (e1, e2) = (
        evaluate(&model, &data).map_err(|e| e.to_string())?,
        evaluate(&loaded, &data).map_err(|e| e.to_string())?,
    );
    ensure(e1 == e2, || "evaluate output differs after reload".into())?;

    // A dataset rendered with another grid has a different hash; eval must
    // refuse it with the mismatch exit code.
    let other = d.join("other");
    fs::create_dir_all(&other).map_err(|e| e.to_string())?;
    let other_layout = LayoutConfig::new(32, 8, Segmentation::CharLevel);
    build_dataset(&corpus, &other_layout, &font, &other, "test").map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_superchars"))
        .arg("eval")
        .arg("--manifest")
        .arg(other.join("manifest.json"))
        .arg("--model")
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    let code = status.status.code();
    ensure(code == Some(4), || format!("hash mismatch exited {code:?}, expected 4"))?;
    Ok(format!(
        "{} parameters bit-identical, evaluate identical; hash mismatch exits 4",
        model.parameter_count()
    ))
}

//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails or exceeds its time budget.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use castguard_core::classifiers::{fit, ClassifierKind, ClassifierSpec};
use castguard_core::dataio::{gen_synth, read_fmx, split_dataset, write_fmx, SplitSpec, SynthSpec};
use castguard_core::linalg::dot;
use castguard_core::metrics::{auc, binary_metrics};
use castguard_core::mlp::Activation;
use castguard_core::pca::pca_fit;
use castguard_core::uq::{
    assess, ensemble_train, mean_of, predictive_entropy, uncertainty_accuracy, uq_confusion, EnsembleConfig,
    EnsembleModel, UqAssessment,
};
use castguard_core::{seed, FeatureDataset, Matrix, MlpArchitecture, MlpModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Budget for checks that should complete without noticeable delay.
const INSTANT: Duration = Duration::from_secs(1);

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(s: u64) -> ChaCha8Rng {
    seed::rng(s)
}

fn gradient_check() -> Outcome {
    let archs: [(usize, &[usize], Activation); 4] = [
        (4, &[8], Activation::Relu),
        (6, &[10, 6], Activation::Relu),
        (5, &[12, 8, 4], Activation::Tanh),
        (20, &[24, 12], Activation::Relu),
    ];
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, &(d, hidden, act)) in archs.iter().enumerate() {
        let arch = MlpArchitecture {
            activation: act,
            ..MlpArchitecture::new(d, hidden, 500 + i as u64)
        };
        let mut model = MlpModel::init(&arch).map_err(|e| e.to_string())?;
        let n_params = model.n_parameters();
        ensure(n_params <= 1000, || format!("architecture {i} has {n_params} parameters"))?;
        let mut r = rng(900 + i as u64);
        let mut p = model.parameters();
        p.iter_mut().for_each(|v| *v += r.random_range(-0.2..0.2));
        model.set_parameters(&p).map_err(|e| e.to_string())?;
        let n = 8;
        let x = Matrix::from_vec(n, d, (0..n * d).map(|_| r.random_range(-2.0..2.0)).collect()).unwrap();
        let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let (_, g) = model.gradient(&x, &y).map_err(|e| e.to_string())?;
        let analytic = g.flatten();
        let mut probe = model.clone();
        for k in 0..n_params {
            let mut q = p.clone();
            q[k] = p[k] + h;
            probe.set_parameters(&q).unwrap();
            let up = probe.loss(&x, &y).unwrap();
            q[k] = p[k] - h;
            probe.set_parameters(&q).unwrap();
            let down = probe.loss(&x, &y).unwrap();
            let fd = (up - down) / (2.0 * h);
            let a = analytic[k];
            let err = (a - fd).abs();
            let rel = err / a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            // components that are zero up to rounding compare absolutely
            ensure(rel <= 1e-4 || err < 1e-10, || format!("architecture {i} parameter {k}: analytic {a} vs numeric {fd}"))?;
        }
    }
    Ok(format!("{} architectures, worst relative error {worst:.2e}", archs.len()))
}

fn entropy_values() -> Outcome {
    let h = |p: [f64; 2]| predictive_entropy(&p).map_err(|e| e.to_string());
    let half = h([0.5, 0.5])?;
    let sure = h([1.0, 0.0])?;
    let worked = h([0.7, 0.3])?;
    ensure(half == 1.0, || format!("H(0.5, 0.5) = {half}"))?;
    ensure(sure == 0.0, || format!("H(1, 0) = {sure}"))?;
    ensure((worked - 0.8813).abs() <= 1e-4, || format!("H(0.7, 0.3) = {worked}"))?;
    Ok(format!("H(0.5,0.5)={half}, H(1,0)={sure}, H(0.7,0.3)={worked:.6}"))
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(31);
    for trial in 0..200 {
        let n = r.random_range(1..60);
        let threshold: f64 = r.random_range(0.01..0.99);
        let probs: Vec<[f64; 2]> = (0..n)
            .map(|_| {
                // a share of exact ties and exact certainties
                let p1 = match r.random_range(0..10) {
                    0 => 0.5,
                    1 => 1.0,
                    2 => 0.0,
                    _ => r.random_range(0.0..1.0),
                };
                [1.0 - p1, p1]
            })
            .collect();
        let truths: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let a = UqAssessment::from_probs(&probs, &truths, threshold).map_err(|e| e.to_string())?;
        let c = uq_confusion(&a);
        let ua = uncertainty_accuracy(&c).map_err(|e| e.to_string())?;

        let (mut tc, mut tu, mut fu, mut fc, mut agree) = (0, 0, 0, 0, 0);
        for (p, &t) in probs.iter().zip(&truths) {
            let predicted = if p[1] >= p[0] { 1 } else { 0 };
            let correct = predicted == t;
            let certain = predictive_entropy(p).unwrap() < threshold;
            match (correct, certain) {
                (true, true) => tc += 1,
                (false, false) => tu += 1,
                (true, false) => fu += 1,
                (false, true) => fc += 1,
            }
            agree += usize::from(correct == certain);
        }
        ensure((c.tc, c.tu, c.fu, c.fc) == (tc, tu, fu, fc), || {
            format!("trial {trial}: confusion {c:?} vs brute force ({tc}, {tu}, {fu}, {fc})")
        })?;
        let brute = agree as f64 / n as f64;
        ensure(ua == brute, || format!("trial {trial}: uncertainty accuracy {ua} vs {brute}"))?;
    }

    let arch = MlpArchitecture::new(5, &[7, 3], 77);
    let single = MlpModel::init(&arch).map_err(|e| e.to_string())?;
    let ensemble = EnsembleModel::from_members(vec![single.clone(); 10], EnsembleConfig::default(), None)
        .map_err(|e| e.to_string())?;
    let x = Matrix::from_vec(50, 5, (0..250).map(|_| r.random_range(-3.0f32..3.0)).collect()).unwrap();
    let means = ensemble.mean_probs(&x).map_err(|e| e.to_string())?;
    for (i, m) in means.iter().enumerate() {
        let p = single.forward(&x.row_f64(i)).unwrap();
        ensure(m[0].to_bits() == p[0].to_bits() && m[1].to_bits() == p[1].to_bits(), || {
            format!("row {i}: ensemble mean {m:?} vs member {p:?}")
        })?;
    }
    let two = mean_of(&[[0.6, 0.4], [0.8, 0.2]]);
    ensure((two[0] - 0.7).abs() < 1e-15, || format!("mean of (0.6,0.4),(0.8,0.2) = {two:?}"))?;
    Ok("200 random assessments match brute force; 10 duplicated members reproduce the member bitwise on 50 rows".into())
}

fn separable_data() -> FeatureDataset {
    gen_synth(&SynthSpec {
        n_per_class: 200,
        dim: 20,
        class_separation: 8.0,
        noise_sigma: 1.0,
        seed: 0,
    })
    .expect("valid synth spec")
}

fn separable_benchmark() -> Outcome {
    let data = separable_data();
    let mut report = Vec::new();
    for kind in [ClassifierKind::LinearSvm, ClassifierKind::Mlp] {
        let (mut min_acc, mut min_auc, mut sum_acc) = (f64::INFINITY, f64::INFINITY, 0.0);
        for run in 0..10u64 {
            let split = SplitSpec {
                seed: run,
                ..SplitSpec::default()
            };
            let (train, test) = split_dataset(&data, &split).map_err(|e| e.to_string())?;
            let spec = ClassifierSpec::new(kind, seed::derive(run, seed::stream_id(kind.name())));
            let model = fit(&spec, &train).map_err(|e| format!("{kind} run {run}: {e}"))?;
            let scores = model.score(test.features()).map_err(|e| e.to_string())?;
            let predicted = model.predict(test.features()).map_err(|e| e.to_string())?;
            let acc = binary_metrics(&predicted, test.labels()).map_err(|e| e.to_string())?.accuracy;
            let a = auc(&scores, test.labels()).map_err(|e| e.to_string())?;
            ensure(acc >= 0.98, || format!("{kind} run {run}: accuracy {acc}"))?;
            ensure(a >= 0.99, || format!("{kind} run {run}: AUC {a}"))?;
            min_acc = min_acc.min(acc);
            min_auc = min_auc.min(a);
            sum_acc += acc;
        }
        report.push(format!(
            "{}: mean accuracy {:.4}, min accuracy {min_acc:.4}, min AUC {min_auc:.4}",
            kind.name(),
            sum_acc / 10.0
        ));
    }
    Ok(report.join("; "))
}

fn uq_sanity() -> Outcome {
    let (train, test) = split_dataset(&separable_data(), &SplitSpec::default()).map_err(|e| e.to_string())?;
    let model = ensemble_train(&EnsembleConfig::default(), &train).map_err(|e| e.to_string())?;
    let a = assess(&model, &test, 0.4).map_err(|e| e.to_string())?;
    let c = uq_confusion(&a);
    let ua = uncertainty_accuracy(&c).map_err(|e| e.to_string())?;
    ensure(ua >= 0.95, || format!("uncertainty accuracy {ua} with {c:?}"))?;

    let (correct, incorrect) = a.group_mean_entropy();
    let separation = match (correct, incorrect) {
        (Some(hc), Some(hi)) => {
            ensure(hi > hc, || format!("misclassified mean entropy {hi} <= correct {hc}"))?;
            format!("mean entropy correct {hc:.4} < misclassified {hi:.4}")
        }
        _ => {
            // no errors to compare on the separable data, so the entropy
            // ordering is checked on overlapping classes with the same setup
            let hard = gen_synth(&SynthSpec {
                class_separation: 2.5,
                ..SynthSpec::default()
            })
            .map_err(|e| e.to_string())?;
            let (htrain, htest) = split_dataset(&hard, &SplitSpec::default()).map_err(|e| e.to_string())?;
            let hmodel = ensemble_train(&EnsembleConfig::default(), &htrain).map_err(|e| e.to_string())?;
            let ha = assess(&hmodel, &htest, 0.4).map_err(|e| e.to_string())?;
            match ha.group_mean_entropy() {
                (Some(hc), Some(hi)) => {
                    ensure(hi > hc, || format!("overlapping data: misclassified mean entropy {hi} <= correct {hc}"))?;
                    format!(
                        "0 misclassified on the separable data; on separation 2.5 data mean entropy correct {hc:.4} < misclassified {hi:.4}"
                    )
                }
                _ => return Err("no misclassified samples even on overlapping data".into()),
            }
        }
    };
    Ok(format!(
        "TC={} TU={} FU={} FC={}, uncertainty accuracy {ua:.4}; {separation}",
        c.tc, c.tu, c.fu, c.fc
    ))
}

fn auc_oracle() -> Outcome {
    let mut r = rng(5);
    let mut checked = 0;
    while checked < 100 {
        let n = r.random_range(2..=50);
        // small value range forces ties
        let levels = r.random_range(2..30);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..levels)) * 0.37 - 2.0).collect();
        let truths: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let (pos, neg) = (truths.iter().filter(|&&t| t == 1).count(), truths.iter().filter(|&&t| t == 0).count());
        if pos == 0 || neg == 0 {
            continue;
        }
        let mut twice_wins = 0u64;
        for i in 0..n {
            for j in 0..n {
                if truths[i] == 1 && truths[j] == 0 {
                    twice_wins += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 2,
                        std::cmp::Ordering::Equal => 1,
                        std::cmp::Ordering::Less => 0,
                    };
                }
            }
        }
        let brute = twice_wins as f64 / (2.0 * pos as f64 * neg as f64);
        let fast = auc(&scores, &truths).map_err(|e| e.to_string())?;
        ensure(fast == brute, || format!("vector {checked}: auc {fast} vs pairwise {brute}"))?;
        checked += 1;
    }
    Ok("100 vectors with ties match pairwise counting exactly".into())
}

fn fmx_roundtrip() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut r = rng(8);
    for i in 0..100 {
        let rows = r.random_range(0..40);
        let cols = r.random_range(1..30);
        let values: Vec<f32> = (0..rows * cols)
            .map(|_| loop {
                let v = f32::from_bits(r.random());
                if v.is_finite() {
                    break v;
                }
            })
            .collect();
        let labels: Vec<u8> = (0..rows).map(|_| r.random_range(0..2)).collect();
        let tag: String = (0..r.random_range(0..12)).map(|_| r.random_range('a'..='z')).collect();
        let data = FeatureDataset::new(Matrix::from_vec(rows, cols, values).unwrap(), labels, tag)
            .map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("m{i}.fmx"));
        write_fmx(&data, &path).map_err(|e| e.to_string())?;
        let back = read_fmx(&path).map_err(|e| e.to_string())?;
        let same_bits = back
            .features()
            .as_slice()
            .iter()
            .zip(data.features().as_slice())
            .all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(
            same_bits
                && back.features().rows() == rows
                && back.features().cols() == cols
                && back.labels() == data.labels()
                && back.source_tag() == data.source_tag(),
            || format!("matrix {i} ({rows}x{cols}) changed on roundtrip"),
        )?;
    }
    Ok("100 random matrices roundtrip bit-exactly".into())
}

fn pca_checks() -> Outcome {
    let mut r = rng(12);
    // rank-1 data in 60 dimensions
    let p = 60;
    let mut dir: Vec<f64> = (0..p).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = dot(&dir, &dir).sqrt();
    dir.iter_mut().for_each(|v| *v /= norm);
    let offset: Vec<f64> = (0..p).map(|_| r.random_range(-5.0..5.0)).collect();
    let line: Vec<f64> = (0..200)
        .flat_map(|_| {
            let t: f64 = r.random_range(-3.0..3.0);
            dir.iter().zip(&offset).map(move |(d, o)| o + t * d).collect::<Vec<_>>()
        })
        .collect();
    let model = pca_fit(&Matrix::from_vec(200, p, line).unwrap(), 1).map_err(|e| e.to_string())?;
    let cosine = dot(model.components().row(0), &dir).abs();
    ensure(cosine > 1.0 - 1e-6, || format!("rank-1 cosine {cosine}"))?;

    // generic data with a decaying spectrum, wide enough that the iteration
    // works in a proper subspace
    let (n, p) = (300, 400);
    let scales: Vec<f64> = (0..p).map(|j| 1.0 / (1.0 + j as f64 * 0.05)).collect();
    let data: Vec<f64> = (0..n * p).map(|k| r.random_range(-1.0..1.0) * scales[k % p]).collect();
    let x = Matrix::from_vec(n, p, data).unwrap();
    let q = 6;
    let model = pca_fit(&x, q).map_err(|e| e.to_string())?;
    let c = model.components();
    let mut ortho: f64 = 0.0;
    for i in 0..q {
        for j in 0..q {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot(c.row(i), c.row(j)) - target).abs());
        }
    }
    ensure(ortho <= 1e-8, || format!("component Gram deviation {ortho:e}"))?;

    let z = model.transform(&x).map_err(|e| e.to_string())?;
    let back = model.reconstruct(&z).map_err(|e| e.to_string())?;
    let residual: f64 = back.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / (n - 1) as f64;
    let retained: f64 = model.explained_variance().iter().sum();
    let expected = model.total_variance() - retained;
    let rel = (residual - expected).abs() / expected;
    ensure(rel <= 1e-6, || format!("reconstruction error {residual} vs total - retained {expected}"))?;
    Ok(format!(
        "rank-1 cosine 1-{:.1e}, Gram deviation {ortho:.1e}, reconstruction identity relative error {rel:.1e}",
        1.0 - cosine
    ))
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_castguard"))
        .args(args)
        .current_dir(dir)
        .env_remove("CASTGUARD_SEED")
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("castguard {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|entries| {
            entries
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    run_cli(&["synth", "--n-per-class", "60", "--dim", "8", "--separation", "2", "--seed", "4", "--out", "d.fmx"], dir)?;
    let invocations: [&[&str]; 3] = [
        &["bench", "--input", "d.fmx", "--runs", "3", "--seed", "42"],
        &["uq", "--input", "d.fmx", "--members", "3", "--epochs", "8", "--seed", "42"],
        &["pca-map", "--input", "d.fmx", "--members", "2", "--epochs", "5", "--seed", "42"],
    ];
    let mut compared = 0;
    for (i, args) in invocations.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = format!("run{i}-{rep}");
            let mut full: Vec<&str> = args.to_vec();
            full.extend(["--out", &out]);
            run_cli(&full, dir)?;
            outputs.push(csv_files(&dir.join(&out)));
        }
        ensure(!outputs[0].is_empty(), || format!("{} wrote no CSV files", args[0]))?;
        ensure(outputs[0] == outputs[1], || format!("{} output differs between identical runs", args[0]))?;
        compared += outputs[0].len();
    }
    Ok(format!("bench, uq and pca-map repeated: {compared} CSV files byte-identical"))
}

fn main() {
    let criteria = [
        Criterion {
            name: "gradient correctness (central differences, h=1e-5, rel 1e-4)",
            budget: Some(Duration::from_secs(10)),
            check: gradient_check,
        },
        Criterion {
            name: "predictive entropy values",
            budget: Some(INSTANT),
            check: entropy_values,
        },
        Criterion {
            name: "ensemble mean / uncertainty accuracy oracle equivalence",
            budget: Some(INSTANT),
            check: oracle_equivalence,
        },
        Criterion {
            name: "separable benchmark: linear SVM and MLP, 10 runs",
            budget: Some(Duration::from_secs(60)),
            check: separable_benchmark,
        },
        Criterion {
            name: "UQ sanity: default 10-member ensemble",
            budget: Some(Duration::from_secs(300)),
            check: uq_sanity,
        },
        Criterion {
            name: "AUC oracle on 100 random score vectors",
            budget: Some(INSTANT),
            check: auc_oracle,
        },
        Criterion {
            name: "FMX roundtrip of 100 random matrices",
            budget: Some(INSTANT),
            check: fmx_roundtrip,
        },
        Criterion {
            name: "PCA recovery, orthonormality, reconstruction identity",
            budget: Some(Duration::from_secs(30)),
            check: pca_checks,
        },
        Criterion {
            name: "CLI determinism under a fixed master seed",
            budget: None,
            check: cli_determinism,
        },
    ];

    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let over_budget = c.budget.is_some_and(|b| elapsed > b);
        let budget = c.budget.map(|b| format!(" / budget {} s", b.as_secs())).unwrap_or_default();
        match outcome {
            Ok(detail) if !over_budget => {
                println!("[PASS] {} ({:.2} s{budget}): {detail}", c.name, elapsed.as_secs_f64());
            }
            Ok(detail) => {
                failures += 1;
                println!("[FAIL] {} ({:.2} s{budget}, over time budget): {detail}", c.name, elapsed.as_secs_f64());
            }
            Err(why) => {
                failures += 1;
                println!("[FAIL] {} ({:.2} s{budget}): {why}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}

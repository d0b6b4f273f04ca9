//! The experiment commands. Each one writes into its own output directory:
//! `config-echo.json`, `per-run.csv`, `summary.json` and figure-data CSVs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use castguard_core::classifiers::{fit, ClassifierKind, ClassifierSpec};
use castguard_core::dataio::{gen_synth, read_csv, read_fmx, read_fmx_contents, split_dataset, write_fmx, SplitSpec, SynthSpec};
use castguard_core::metrics::{auc, binary_metrics, summarize, Summary};
use castguard_core::pca::pca_fit;
use castguard_core::uq::{
    assess, ensemble_train, entropy_histogram, threshold_sweep, uncertainty_accuracy, uq_confusion, UqAssessment,
};
use castguard_core::{seed, EnsembleConfig, EnsembleModel, FeatureDataset, Matrix};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// A loaded dataset and the tag that names it in reports.
#[derive(Debug, Clone)]
pub struct Input {
    pub tag: String,
    pub data: FeatureDataset,
}

fn sanitize(tag: &str) -> String {
    let t: String = tag
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect();
    if t.is_empty() {
        "data".into()
    } else {
        t
    }
}

fn load_path(path: &Path, label_column: &str) -> Result<FeatureDataset, CliError> {
    let is_csv = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let data = if is_csv {
        read_csv(path, label_column)?
    } else {
        read_fmx(path)?
    };
    Ok(data)
}

/// Loads every configured input, or the synthetic dataset when there are
/// none. Tags come from the FMX source tag or the file stem and are made
/// unique and filename-safe.
pub fn load_inputs(cfg: &ExperimentConfig) -> Result<Vec<Input>, CliError> {
    if cfg.inputs.is_empty() {
        let data = gen_synth(&cfg.synth)?;
        return Ok(vec![Input {
            tag: "synth".into(),
            data,
        }]);
    }
    let mut out: Vec<Input> = Vec::new();
    for path in &cfg.inputs {
        let data = load_path(path, &cfg.label_column)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
        let base = sanitize(if data.source_tag().is_empty() { stem } else { data.source_tag() });
        let mut tag = base.clone();
        let mut k = 2;
        while out.iter().any(|i| i.tag == tag) {
            tag = format!("{base}-{k}");
            k += 1;
        }
        info!("loaded {} as '{tag}': {} rows x {} features", path.display(), data.len(), data.feature_dim());
        out.push(Input { tag, data });
    }
    Ok(out)
}

fn split_for_run(cfg: &ExperimentConfig, data: &FeatureDataset, run: usize) -> Result<(FeatureDataset, FeatureDataset), CliError> {
    let spec = SplitSpec {
        seed: cfg.master_seed.unwrap_or(0).wrapping_add(run as u64),
        ..cfg.split
    };
    Ok(split_dataset(data, &spec)?)
}

fn prepare_out_dir(cfg: &ExperimentConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    write_json(&cfg.out_dir.join("config-echo.json"), cfg)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row of `per-run.csv`. Metrics that are undefined or unavailable
/// (failed run, single-class test split) are empty cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub classifier: String,
    pub architecture_tag: String,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub auc: Option<f64>,
    pub status: String,
}

impl RunRecord {
    fn failed(run_index: usize, classifier: &str, tag: &str, reason: &str) -> Self {
        RunRecord {
            run_index,
            classifier: classifier.into(),
            architecture_tag: tag.into(),
            accuracy: None,
            sensitivity: None,
            specificity: None,
            auc: None,
            status: format!("failed: {reason}"),
        }
    }

    fn from_outputs(run_index: usize, classifier: &str, tag: &str, predicted: &[u8], scores: &[f64], truth: &[u8]) -> Result<Self, CliError> {
        let m = binary_metrics(predicted, truth)?;
        Ok(RunRecord {
            run_index,
            classifier: classifier.into(),
            architecture_tag: tag.into(),
            accuracy: Some(m.accuracy),
            sensitivity: m.sensitivity,
            specificity: m.specificity,
            auc: auc(scores, truth).ok(),
            status: "ok".into(),
        })
    }
}

pub fn write_per_run(path: &Path, records: &[RunRecord]) -> Result<(), CliError> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "run_index",
        "classifier",
        "architecture_tag",
        "accuracy",
        "sensitivity",
        "specificity",
        "auc",
        "status",
    ])?;
    for r in records {
        w.write_record([
            r.run_index.to_string(),
            r.classifier.clone(),
            r.architecture_tag.clone(),
            cell(r.accuracy),
            cell(r.sensitivity),
            cell(r.specificity),
            cell(r.auc),
            r.status.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Aggregate of one classifier on one input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifierSummary {
    pub runs: usize,
    pub failed: usize,
    pub accuracy: Option<Summary>,
    pub sensitivity: Option<Summary>,
    pub specificity: Option<Summary>,
    pub auc: Option<Summary>,
}

fn summarize_records(records: &[&RunRecord]) -> ClassifierSummary {
    let pick = |f: fn(&RunRecord) -> Option<f64>| {
        let v: Vec<f64> = records.iter().filter_map(|r| f(r)).collect();
        summarize(&v).ok()
    };
    ClassifierSummary {
        runs: records.len(),
        failed: records.iter().filter(|r| r.status != "ok").count(),
        accuracy: pick(|r| r.accuracy),
        sensitivity: pick(|r| r.sensitivity),
        specificity: pick(|r| r.specificity),
        auc: pick(|r| r.auc),
    }
}

/// `tag → classifier → summary`.
pub type BenchSummary = BTreeMap<String, BTreeMap<String, ClassifierSummary>>;

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub summary: BenchSummary,
    /// Classifier × input grid of mean ± std accuracy in percent.
    pub table: String,
}

fn bench_one(cfg: &ExperimentConfig, input: &Input, run: usize) -> Result<Vec<RunRecord>, CliError> {
    let (train, test) = split_for_run(cfg, &input.data, run)?;
    let split_seed = cfg.master_seed.unwrap_or(0).wrapping_add(run as u64);
    let mut out = Vec::with_capacity(cfg.classifiers.len());
    for &kind in &cfg.classifiers {
        let spec = ClassifierSpec {
            hyperparameters: cfg.hyperparams_for(kind),
            seed: seed::derive(split_seed, seed::stream_id(kind.name())),
        };
        let outcome = fit(&spec, &train).and_then(|m| {
            let scores = m.score(test.features())?;
            let predicted = m.predict(test.features())?;
            Ok((scores, predicted))
        });
        let record = match outcome {
            Ok((scores, predicted)) => RunRecord::from_outputs(run, kind.name(), &input.tag, &predicted, &scores, test.labels())?,
            Err(e) => {
                warn!("{} run {run} on '{}' failed: {e}", kind.name(), input.tag);
                RunRecord::failed(run, kind.name(), &input.tag, &e.to_string())
            }
        };
        out.push(record);
    }
    Ok(out)
}

fn format_table(cfg: &ExperimentConfig, inputs: &[Input], summary: &BenchSummary) -> String {
    let mut s = format!("{:<18}", "classifier");
    for i in inputs {
        s.push_str(&format!("{:>22}", i.tag));
    }
    s.push('\n');
    for kind in &cfg.classifiers {
        s.push_str(&format!("{:<18}", kind.display_name()));
        for i in inputs {
            let cell = summary
                .get(&i.tag)
                .and_then(|m| m.get(kind.name()))
                .and_then(|c| c.accuracy.as_ref())
                .map(|a| format!("{:.1}±{:.1}", 100.0 * a.mean, 100.0 * a.std))
                .unwrap_or_else(|| "n/a".into());
            s.push_str(&format!("{cell:>22}"));
        }
        s.push('\n');
    }
    s
}

/// Repeated train/evaluate cycles for every classifier on every input.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport, CliError> {
    let inputs = load_inputs(cfg)?;
    prepare_out_dir(cfg)?;
    let jobs: Vec<(usize, usize)> = (0..inputs.len()).flat_map(|i| (0..cfg.runs).map(move |r| (i, r))).collect();
    info!("benchmarking {} classifiers over {} runs on {} inputs", cfg.classifiers.len(), cfg.runs, inputs.len());
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(i, r)| bench_one(cfg, &inputs[i], r))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut summary = BenchSummary::new();
    for input in &inputs {
        let per_kind = summary.entry(input.tag.clone()).or_default();
        for kind in &cfg.classifiers {
            let rows: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.architecture_tag == input.tag && r.classifier == kind.name())
                .collect();
            per_kind.insert(kind.name().to_string(), summarize_records(&rows));
        }
    }
    write_per_run(&cfg.out_dir.join("per-run.csv"), &records)?;
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    let table = format_table(cfg, &inputs, &summary);
    Ok(BenchReport { records, summary, table })
}

/// Ensemble settings with member seeds tied to the master seed.
pub fn effective_ensemble(cfg: &ExperimentConfig) -> EnsembleConfig {
    let base = seed::derive(cfg.master_seed.unwrap_or(0), seed::stream_id("ensemble"));
    EnsembleConfig {
        member_seed_base: base.wrapping_add(cfg.ensemble.member_seed_base),
        ..cfg.ensemble.clone()
    }
}

/// Table-III style outcome of one input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UqSummary {
    pub n_test: usize,
    pub threshold: f64,
    pub tc: usize,
    pub tu: usize,
    pub fu: usize,
    pub fc: usize,
    pub uncertainty_accuracy: f64,
    pub accuracy: f64,
    pub mean_entropy_correct: Option<f64>,
    pub mean_entropy_incorrect: Option<f64>,
}

fn uq_summary(a: &UqAssessment) -> Result<UqSummary, CliError> {
    let c = uq_confusion(a);
    let (correct, incorrect) = a.group_mean_entropy();
    Ok(UqSummary {
        n_test: a.len(),
        threshold: a.threshold(),
        tc: c.tc,
        tu: c.tu,
        fu: c.fu,
        fc: c.fc,
        uncertainty_accuracy: uncertainty_accuracy(&c)?,
        accuracy: (c.tc + c.fu) as f64 / a.len() as f64,
        mean_entropy_correct: correct,
        mean_entropy_incorrect: incorrect,
    })
}

fn ensemble_record(tag: &str, a: &UqAssessment) -> Result<RunRecord, CliError> {
    let predicted = a.predictions();
    let scores: Vec<f64> = a.records().iter().map(|r| r.mean_probs[1]).collect();
    let truth: Vec<u8> = a.records().iter().map(|r| r.true_label).collect();
    RunRecord::from_outputs(0, "ensemble", tag, &predicted, &scores, &truth)
}

fn write_sweep(path: &Path, a: &UqAssessment, grid: &[f64]) -> Result<(), CliError> {
    let rows = threshold_sweep(&a.entropies(), &a.correctness(), grid)?;
    let mut w = csv_writer(path)?;
    w.write_record(["threshold", "tc", "tu", "fu", "fc", "uncertainty_accuracy"])?;
    for r in rows {
        let c = r.confusion;
        w.write_record([
            r.threshold.to_string(),
            c.tc.to_string(),
            c.tu.to_string(),
            c.fu.to_string(),
            c.fc.to_string(),
            r.uncertainty_accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_histogram(path: &Path, a: &UqAssessment, bins: usize) -> Result<(), CliError> {
    let h = entropy_histogram(a, bins)?;
    let mut w = csv_writer(path)?;
    w.write_record(["bin", "low", "high", "correct", "incorrect"])?;
    for i in 0..h.n_bins() {
        let (lo, hi) = h.bin_edges(i);
        w.write_record([
            i.to_string(),
            lo.to_string(),
            hi.to_string(),
            h.correct[i].to_string(),
            h.incorrect[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct UqReport {
    pub summary: BTreeMap<String, UqSummary>,
    pub table: String,
}

fn uq_table(summary: &BTreeMap<String, UqSummary>) -> String {
    let mut s = format!("{:<20}{:>6}{:>6}{:>6}{:>6}{:>10}\n", "input", "TC", "TU", "FU", "FC", "UA");
    for (tag, u) in summary {
        s.push_str(&format!(
            "{tag:<20}{:>6}{:>6}{:>6}{:>6}{:>9.1}%\n",
            u.tc,
            u.tu,
            u.fu,
            u.fc,
            100.0 * u.uncertainty_accuracy
        ));
    }
    s
}

/// Trains the ensemble on each input's training split and assesses the test
/// split.
pub fn run_uq(cfg: &ExperimentConfig, save_ensemble: bool) -> Result<UqReport, CliError> {
    let inputs = load_inputs(cfg)?;
    prepare_out_dir(cfg)?;
    let ens_cfg = effective_ensemble(cfg);
    let mut summary = BTreeMap::new();
    let mut records = Vec::new();
    for input in &inputs {
        let (train, test) = split_for_run(cfg, &input.data, 0)?;
        info!("training {}-member ensemble on '{}' ({} rows)", ens_cfg.n_members, input.tag, train.len());
        let model = ensemble_train(&ens_cfg, &train)?;
        let a = assess(&model, &test, cfg.threshold)?;
        let tag = &input.tag;
        let file = |name: &str| cfg.out_dir.join(format!("{name}-{tag}.csv"));
        a.write_csv(fs::File::create(file("assessment"))?)?;
        write_sweep(&file("sweep"), &a, &cfg.threshold_grid)?;
        write_histogram(&file("histogram"), &a, cfg.histogram_bins)?;
        if save_ensemble {
            let path = cfg.out_dir.join(format!("ensemble-{tag}.cgmb"));
            fs::write(&path, model.to_bytes())?;
            info!("saved ensemble to {}", path.display());
        }
        records.push(ensemble_record(tag, &a)?);
        summary.insert(tag.clone(), uq_summary(&a)?);
    }
    write_per_run(&cfg.out_dir.join("per-run.csv"), &records)?;
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    let table = uq_table(&summary);
    Ok(UqReport { summary, table })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapSummary {
    pub explained_variance_ratio: Vec<f64>,
    pub trained_on_pca: bool,
    pub uq: UqSummary,
}

fn project(data: &FeatureDataset, coords: &Matrix<f64>) -> Result<FeatureDataset, CliError> {
    Ok(data.with_features(coords.to_f32())?)
}

/// Produces 2D uncertainty-map data: PCA coordinates of the test split next
/// to each sample's entropy and prediction.
pub fn run_pca_map(cfg: &ExperimentConfig, ensemble_path: Option<&Path>) -> Result<BTreeMap<String, MapSummary>, CliError> {
    let inputs = load_inputs(cfg)?;
    if ensemble_path.is_some() && inputs.len() != 1 {
        return Err(CliError::Config("--ensemble needs exactly one input".into()));
    }
    prepare_out_dir(cfg)?;
    let loaded = match ensemble_path {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            Some(EnsembleModel::from_bytes(&bytes)?)
        }
        None => None,
    };
    let mut out = BTreeMap::new();
    let mut records = Vec::new();
    for input in &inputs {
        let (train, test) = split_for_run(cfg, &input.data, 0)?;
        let pca = pca_fit(train.features(), 2)?;
        let coords = pca.transform(test.features())?;
        let (eval_train, eval_test) = if cfg.train_on_pca {
            (project(&train, &pca.transform(train.features())?)?, project(&test, &coords)?)
        } else {
            (train, test)
        };
        let model = match &loaded {
            Some(m) => m.clone(),
            None => ensemble_train(&effective_ensemble(cfg), &eval_train)?,
        };
        let a = assess(&model, &eval_test, cfg.threshold)?;
        let tag = &input.tag;
        let mut w = csv_writer(&cfg.out_dir.join(format!("map-{tag}.csv")))?;
        w.write_record(["sample_index", "pc1", "pc2", "entropy", "predicted", "true"])?;
        for (i, r) in a.records().iter().enumerate() {
            w.write_record([
                i.to_string(),
                coords.get(i, 0).to_string(),
                coords.get(i, 1).to_string(),
                r.entropy.to_string(),
                r.predicted.to_string(),
                r.true_label.to_string(),
            ])?;
        }
        w.flush()?;
        records.push(ensemble_record(tag, &a)?);
        out.insert(
            tag.clone(),
            MapSummary {
                explained_variance_ratio: pca.explained_variance_ratio(),
                trained_on_pca: cfg.train_on_pca,
                uq: uq_summary(&a)?,
            },
        );
    }
    write_per_run(&cfg.out_dir.join("per-run.csv"), &records)?;
    write_json(&cfg.out_dir.join("summary.json"), &out)?;
    Ok(out)
}

/// Writes a synthetic dataset as FMX.
pub fn run_synth(spec: &SynthSpec, out: &Path) -> Result<FeatureDataset, CliError> {
    spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let data = gen_synth(spec)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_fmx(&data, out)?;
    Ok(data)
}

/// Human-readable description of an FMX file's header.
pub fn inspect(path: &PathBuf) -> Result<String, CliError> {
    let c = read_fmx_contents(path)?;
    let mut s = format!(
        "file:       {}\nversion:    {}\nrows:       {}\ncols:       {}\nhas_labels: {}\ntag:        {}\n",
        path.display(),
        c.header.version,
        c.header.rows,
        c.header.cols,
        c.header.has_labels,
        if c.source_tag.is_empty() { "-" } else { &c.source_tag }
    );
    if let Some(labels) = &c.labels {
        let defect = labels.iter().filter(|&&l| l == castguard_core::DEFECT).count();
        s.push_str(&format!("defect:     {defect}\nok:         {}\n", labels.len() - defect));
    }
    Ok(s)
}

/// Classifier kinds from a comma-separated list of names.
pub fn parse_classifiers(list: &str) -> Result<Vec<ClassifierKind>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ClassifierKind>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_are_filename_safe() {
        assert_eq!(sanitize("vgg16 / run#1"), "vgg16___run_1");
        assert_eq!(sanitize(""), "data");
    }

    #[test]
    fn classifier_list_parsing() {
        assert_eq!(
            parse_classifiers("linear_svm, mlp").unwrap(),
            vec![ClassifierKind::LinearSvm, ClassifierKind::Mlp]
        );
        assert!(matches!(parse_classifiers("svm9"), Err(CliError::Config(_))));
    }

    #[test]
    fn empty_cells_for_missing_metrics() {
        assert_eq!(cell(None), "");
        assert_eq!(cell(Some(0.5)), "0.5");
    }
}

//! Command-line experiment runner for castguard.
//!
//! The binary is a thin wrapper over [`run`], which tests can also call
//! directly.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use castguard_core::dataio::SynthSpec;
use clap::{Args, Parser, Subcommand};
use log::info;

pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "castguard", version, about = "Uncertainty-aware casting defect classification experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated train/test benchmark of the classical classifiers and the MLP.
    Bench(ExperimentArgs),
    /// Deep-ensemble uncertainty report: UQ confusion, sweep and histograms.
    Uq {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Also write the trained ensemble as ensemble-<tag>.cgmb.
        #[arg(long)]
        save_ensemble: bool,
    },
    /// 2D PCA map of test samples with their predictive entropy.
    PcaMap {
        #[command(flatten)]
        args: ExperimentArgs,
        /// Use a saved ensemble instead of training one.
        #[arg(long, value_name = "PATH")]
        ensemble: Option<PathBuf>,
        /// Train the ensemble on the 2D projection rather than full features.
        #[arg(long)]
        train_on_pca: bool,
    },
    /// Write a synthetic two-cluster dataset as FMX.
    Synth(SynthArgs),
    /// Print the header of an FMX file.
    Inspect {
        path: PathBuf,
    },
}

/// Flags shared by the experiment commands. Each one overrides the matching
/// config-file field.
#[derive(Debug, Default, Args)]
pub struct ExperimentArgs {
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// FMX or CSV feature file; repeat for several inputs.
    #[arg(long = "input", value_name = "PATH")]
    pub inputs: Vec<PathBuf>,
    /// Comma-separated classifier names.
    #[arg(long, value_name = "LIST")]
    pub classifiers: Option<String>,
    #[arg(long, value_name = "N")]
    pub runs: Option<usize>,
    #[arg(long, value_name = "F")]
    pub threshold: Option<f64>,
    /// Master seed; falls back to CASTGUARD_SEED, then 0.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads for runs and ensemble members.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Ensemble size.
    #[arg(long, value_name = "M")]
    pub members: Option<usize>,
    /// Training epochs for ensemble members.
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
}

impl ExperimentArgs {
    /// Reads the config file (if any) and applies the flags on top.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if !self.inputs.is_empty() {
            cfg.inputs = self.inputs.clone();
        }
        if let Some(list) = &self.classifiers {
            cfg.classifiers = commands::parse_classifiers(list)?;
        }
        if let Some(r) = self.runs {
            cfg.runs = r;
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = Some(s);
        }
        if let Some(j) = self.jobs {
            cfg.jobs = Some(j);
        }
        if let Some(o) = &self.out {
            cfg.out_dir = o.clone();
        }
        if let Some(m) = self.members {
            cfg.ensemble.n_members = m;
        }
        if let Some(e) = self.epochs {
            cfg.ensemble.train_config.epochs = e;
        }
        cfg.resolve_seed()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = SynthSpec::default().n_per_class)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = SynthSpec::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = SynthSpec::default().class_separation)]
    pub separation: f64,
    #[arg(long, default_value_t = SynthSpec::default().noise_sigma)]
    pub sigma: f64,
    /// Falls back to CASTGUARD_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

fn with_jobs<T>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError>
where
    T: Send,
{
    match jobs {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}"))),
    }
}

/// Executes a parsed command line. Reports go to stdout, progress to the log.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(args) => {
            let cfg = args.resolve()?;
            let report = with_jobs(cfg.jobs, || commands::run_bench(&cfg))??;
            print!("{}", report.table);
            info!("wrote results to {}", cfg.out_dir.display());
        }
        Command::Uq { args, save_ensemble } => {
            let cfg = args.resolve()?;
            let report = with_jobs(cfg.jobs, || commands::run_uq(&cfg, save_ensemble))??;
            print!("{}", report.table);
            info!("wrote results to {}", cfg.out_dir.display());
        }
        Command::PcaMap {
            args,
            ensemble,
            train_on_pca,
        } => {
            let mut cfg = args.resolve()?;
            cfg.train_on_pca |= train_on_pca;
            let maps = with_jobs(cfg.jobs, || commands::run_pca_map(&cfg, ensemble.as_deref()))??;
            for (tag, m) in &maps {
                println!(
                    "{tag}: {} test samples, explained variance {:.3} / {:.3}, uncertainty accuracy {:.3}",
                    m.uq.n_test, m.explained_variance_ratio[0], m.explained_variance_ratio[1], m.uq.uncertainty_accuracy
                );
            }
        }
        Command::Synth(a) => {
            let seed = match a.seed {
                Some(s) => s,
                None => ExperimentConfig::default().resolve_seed()?,
            };
            let spec = SynthSpec {
                n_per_class: a.n_per_class,
                dim: a.dim,
                class_separation: a.separation,
                noise_sigma: a.sigma,
                seed,
            };
            let data = commands::run_synth(&spec, &a.out)?;
            println!("wrote {} rows x {} features to {}", data.len(), data.feature_dim(), a.out.display());
        }
        Command::Inspect { path } => print!("{}", commands::inspect(&path)?),
    }
    Ok(())
}

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

/// Bayesian multi-tensor factorization: simulate, fit, predict, report and
/// diagnose.
#[derive(Debug, Parser)]
#[command(name = "mtf", version)]
pub struct Cli {
    /// TOML file with one table per subcommand mirroring its flags; flags
    /// given on the command line take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic collection and its truth.
    Simulate(SimulateArgs),
    /// Run Gibbs chains and write a posterior archive.
    Fit(FitArgs),
    /// Two-stage prediction of masked test entries.
    Predict(PredictArgs),
    /// Component-structure, correlation and RMSE tables over archives.
    Report(ReportArgs),
    /// Convergence diagnostics of an archive.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub simulate: SimulateArgs,
    #[serde(default)]
    pub fit: FitArgs,
    #[serde(default)]
    pub predict: PredictArgs,
    #[serde(default)]
    pub report: ReportArgs,
    #[serde(default)]
    pub diagnose: DiagnoseArgs,
}

macro_rules! merge_fields {
    ($t:ty; $($f:ident),*) => {
        impl $t {
            /// Fills every flag not given on the command line from `file`.
            pub fn merge(mut self, file: Self) -> Self {
                $( if self.$f.is_none() { self.$f = file.$f; } )*
                self
            }
        }
    };
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    /// cp, relaxed-cp or continuum.
    #[arg(long)]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trilinear fraction of the continuum, in [0, 1].
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub noise_var: Option<f64>,
    #[arg(long)]
    pub signal_var: Option<f64>,
    /// Write this many repetitions (seeds seed, seed+1, ...) into
    /// `rep_000`, `rep_001`, ... subdirectories.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
merge_fields!(SimulateArgs; scenario, seed, rho, n, n_test, d1, d2, l, noise_var, signal_var, reps, out);

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct FitArgs {
    /// mtf, rmtf or gfa (tensors unfolded into matrices, then mtf).
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// default or strong-reg.
    #[arg(long)]
    pub preset: Option<String>,
    /// Noise-prior confidence: shape = conf · n_obs / 2 at SNR 1. Overrides
    /// the preset's noise prior.
    #[arg(long)]
    pub noise_conf: Option<f64>,
    /// rMTF λ granularity: global, per-component or per-slab.
    #[arg(long)]
    pub lambda_mode: Option<String>,
    /// Preprocessing: feature (default), fiber or none.
    #[arg(long)]
    pub scale: Option<String>,
    /// Worker threads for chains (default: MTF_JOBS or 1).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Collection manifest or directory.
    pub input: Option<PathBuf>,
    /// Archive directory.
    pub output: Option<PathBuf>,
}
merge_fields!(FitArgs; model, k, chains, burnin, samples, thin, seed, preset, noise_conf, lambda_mode, scale, jobs, input, output);

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PredictArgs {
    /// Posterior archive written by `fit`.
    #[arg(long)]
    pub archive: Option<PathBuf>,
    /// Test collection; its masked entries are the targets.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Fully observed test collection for error columns.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Report path (default: prediction.csv in the archive).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Latent draws per training snapshot.
    #[arg(long)]
    pub stage2_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}
merge_fields!(PredictArgs; archive, test, truth, out, stage2_samples, seed);

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ReportArgs {
    /// Archives, or directories whose subdirectories are archives.
    pub archives: Vec<PathBuf>,
    /// Allow archives of different models in one report.
    #[arg(long)]
    pub allow_mixed: bool,
    /// Write the tables here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ReportArgs {
    pub fn merge(mut self, file: Self) -> Self {
        if self.archives.is_empty() {
            self.archives = file.archives;
        }
        self.allow_mixed |= file.allow_mixed;
        if self.out.is_none() {
            self.out = file.out;
        }
        self
    }
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DiagnoseArgs {
    pub archive: Option<PathBuf>,
}
merge_fields!(DiagnoseArgs; archive);

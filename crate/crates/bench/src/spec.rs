//! Declarative experiment description, read from TOML and patched by flags.

use std::path::{Path, PathBuf};

use antisgd::LossKind;
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Number of seeds used when none are listed.
pub const DEFAULT_SEED_COUNT: u64 = 10;

/// Effective epochs run when `iterations` is unset.
pub const DEFAULT_EPOCHS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum LossArg {
    /// Logistic regression on ±1 labels.
    Logistic,
    /// Logistic regression written as a 0/1 negative log-likelihood.
    Logistic01,
    /// Hinge loss with L2 regularization.
    Svm,
}

impl From<LossArg> for LossKind {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Logistic => LossKind::LogisticPm1,
            LossArg::Logistic01 => LossKind::Logistic01,
            LossArg::Svm => LossKind::HingeL2,
        }
    }
}

/// One experiment: a dataset, a model and a schedule, run under both
/// sampling strategies for every seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: PathBuf,
    /// Prefix of output files; defaults to the dataset file name.
    #[serde(default)]
    pub name: Option<String>,
    pub loss: LossArg,
    pub lambda: f64,
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    /// Defaults to `lambda`.
    #[serde(default)]
    pub eta: Option<f64>,
    /// Defaults to ten passes' worth of batches, `10 n / b`.
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Defaults to ten consecutive seeds starting at `base_seed`.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub base_seed: u64,
    /// Defaults to `n / b`, one checkpoint per effective epoch.
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    /// Loaded if it exists, otherwise built (and written here if given).
    #[serde(default)]
    pub table: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(default)]
    pub scale_features: bool,
    /// Record Monte-Carlo variance estimates instead of the exact value.
    #[serde(default)]
    pub empirical_trials: Option<usize>,
}

fn default_eta0() -> f64 {
    1.0
}

fn default_batch() -> usize {
    2
}

impl ExperimentSpec {
    pub fn new(
        dataset: impl Into<PathBuf>,
        loss: LossArg,
        lambda: f64,
        out: impl Into<PathBuf>,
    ) -> Self {
        Self {
            dataset: dataset.into(),
            name: None,
            loss,
            lambda,
            eta0: default_eta0(),
            eta: None,
            iterations: None,
            batch_size: default_batch(),
            seeds: None,
            base_seed: 0,
            checkpoint_every: None,
            table: None,
            out: out.into(),
            scale_features: false,
            empirical_trials: None,
        }
    }

    /// Parses a TOML spec. Relative paths inside it resolve against the
    /// spec file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading spec {}", path.display()))?;
        let mut spec: Self =
            toml::from_str(&text).with_context(|| format!("parsing spec {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        rebase(&mut spec.dataset);
        rebase(&mut spec.out);
        if let Some(t) = spec.table.as_mut() {
            rebase(t);
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            bail!("lambda must be a nonnegative number, got {}", self.lambda);
        }
        if self.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            bail!("seed list is empty");
        }
        if self.eta.is_none() && self.lambda == 0.0 {
            bail!("eta defaults to lambda, which is 0; set eta explicitly");
        }
        Ok(())
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.dataset
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into())
        })
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(self.lambda)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| {
            (0..DEFAULT_SEED_COUNT)
                .map(|k| self.base_seed + k)
                .collect()
        })
    }

    /// Iteration budget and checkpoint spacing for a dataset of `n` samples.
    pub fn schedule_for(&self, n: usize) -> (usize, usize) {
        let epoch = (n / self.batch_size).max(1);
        let iterations = self.iterations.unwrap_or(DEFAULT_EPOCHS * epoch);
        let every = self.checkpoint_every.unwrap_or(epoch);
        let every = if iterations > 0 {
            every.min(iterations)
        } else {
            every
        };
        (iterations, every.max(1))
    }
}

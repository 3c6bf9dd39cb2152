//! The `build-table`, `run` and `verify` commands as library calls.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use antisgd::sampling::RNG_DESCRIPTION;
use antisgd::scalar::format_real;
use antisgd::{
    build_table_indexed, exact_variance_antithetic, exact_variance_uniform, pairing_stats,
    read_libsvm_file, read_table, run, write_table, AntitheticTable64, Dataset64, Error, LossKind,
    LossModel64, PairingStats, RunConfig, SamplerConfig, StepSchedule, Strategy, TableViolation,
    TraceRecord64, VarianceMode,
};
use anyhow::{anyhow, bail, Context, Result};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::spec::ExperimentSpec;

pub const CSV_HEADER: &str = "t,eta,objective,variance";
pub const SUMMARY_HEADER: &str =
    "t,eta,uniform_objective,antithetic_objective,uniform_variance,antithetic_variance";

pub fn load_dataset(path: &Path, scale_features: bool) -> Result<Dataset64> {
    let ds =
        read_libsvm_file::<f64>(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(if scale_features {
        ds.scaled_max_abs()
    } else {
        ds
    })
}

/// `<table>.stats.json`
pub fn stats_path(table: &Path) -> PathBuf {
    let mut name = table.file_name().unwrap_or_default().to_os_string();
    name.push(".stats.json");
    table.with_file_name(name)
}

#[derive(Debug, Clone, Serialize)]
pub struct TableSummary {
    pub n: usize,
    pub dim: usize,
    pub fraction_negative: f64,
    pub mean_metric: f64,
    pub min_metric: f64,
    pub max_metric: f64,
}

impl TableSummary {
    fn new(ds: &Dataset64, stats: &PairingStats<f64>) -> Self {
        Self {
            n: ds.n(),
            dim: ds.dim(),
            fraction_negative: stats.fraction_negative,
            mean_metric: stats.mean_metric,
            min_metric: stats.min_metric,
            max_metric: stats.max_metric,
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn save_table(table: &AntitheticTable64, ds: &Dataset64, out: &Path) -> Result<TableSummary> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w =
        BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_table(table, &mut w)?;
    w.flush()?;
    let summary = TableSummary::new(ds, &pairing_stats(table, ds)?);
    write_json(&stats_path(out), &summary)?;
    Ok(summary)
}

/// Reads a table file, refusing it if any invariant is violated.
pub fn load_table(path: &Path, ds: &Dataset64) -> Result<AntitheticTable64> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = read_table::<f64, _>(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))?;
    let violations = rows.check(ds);
    if !violations.is_empty() {
        let list: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        bail!(
            "{} is not a valid table:\n  {}",
            path.display(),
            list.join("\n  ")
        );
    }
    Ok(rows.into_table(ds)?)
}

/// Builds the table for a dataset and writes it with its stats sidecar.
pub fn cmd_build_table(dataset: &Path, out: &Path, scale_features: bool) -> Result<TableSummary> {
    let ds = load_dataset(dataset, scale_features)?;
    info!(
        "building table for {} ({} samples)",
        dataset.display(),
        ds.n()
    );
    let table = build_table_indexed(&ds)?;
    save_table(&table, &ds, out)
}

/// Variances of both strategies at `w = 0` for logistic loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroWeightComparison {
    pub batch_size: usize,
    pub uniform: f64,
    pub antithetic: f64,
    pub mean_metric: f64,
    /// Mean metric of two independently drawn samples, `‖(1/n) Σ y_i x_i‖²`.
    pub independent_mean_metric: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub n: usize,
    pub violations: Vec<TableViolation>,
    pub stats: Option<PairingStats<f64>>,
    pub zero_weight: Option<ZeroWeightComparison>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {}", self.n)?;
        if !self.violations.is_empty() {
            writeln!(f, "violations: {}", self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  {v}")?;
            }
            return Ok(());
        }
        writeln!(f, "table: ok")?;
        if let Some(s) = &self.stats {
            writeln!(f, "fraction_negative: {}", s.fraction_negative)?;
            writeln!(f, "mean_metric: {}", format_real(s.mean_metric))?;
            writeln!(f, "min_metric: {}", format_real(s.min_metric))?;
            writeln!(f, "max_metric: {}", format_real(s.max_metric))?;
        }
        if let Some(z) = &self.zero_weight {
            writeln!(
                f,
                "independent_pair_mean_metric: {}",
                format_real(z.independent_mean_metric)
            )?;
            writeln!(f, "variance_at_zero (logistic, b = {}):", z.batch_size)?;
            writeln!(f, "  uniform: {}", format_real(z.uniform))?;
            writeln!(f, "  antithetic: {}", format_real(z.antithetic))?;
        }
        Ok(())
    }
}

/// Checks a table file against its dataset. `Err` means an input could not
/// be read at all; invariant violations are listed in the report.
pub fn cmd_verify(
    dataset: &Path,
    table: &Path,
    scale_features: bool,
    batch_size: usize,
) -> Result<VerifyReport> {
    if batch_size == 0 || !batch_size.is_multiple_of(2) {
        bail!("batch size must be a positive even number, got {batch_size}");
    }
    let ds = load_dataset(dataset, scale_features)?;
    let file = File::open(table).with_context(|| format!("opening {}", table.display()))?;
    let rows = read_table::<f64, _>(BufReader::new(file))
        .with_context(|| format!("reading {}", table.display()))?;
    let violations = rows.check(&ds);
    let mut report = VerifyReport {
        n: ds.n(),
        violations,
        stats: None,
        zero_weight: None,
    };
    if !report.ok() {
        return Ok(report);
    }
    let table = rows.into_table(&ds)?;
    let stats = pairing_stats(&table, &ds)?;
    let model = LossModel64::new(LossKind::LogisticPm1, 0.0)?;
    let w = vec![0.0; ds.dim()];
    let mut mean_yx = vec![0.0; ds.dim()];
    for s in ds.samples() {
        for (k, v) in s.features.iter() {
            mean_yx[k - 1] += s.y() * v / ds.n() as f64;
        }
    }
    report.zero_weight = Some(ZeroWeightComparison {
        batch_size,
        uniform: exact_variance_uniform(&model, &w, &ds, batch_size)?.variance,
        antithetic: exact_variance_antithetic(&model, &w, &ds, &table, batch_size)?.variance,
        mean_metric: stats.mean_metric,
        independent_mean_metric: mean_yx.iter().map(|v| v * v).sum(),
    });
    report.stats = Some(stats);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed(Vec<TraceRecord64>),
    Diverged { iteration: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub seed: u64,
    pub outcome: RunOutcome,
    /// Trace file, absent for diverged runs.
    pub file: Option<PathBuf>,
}

impl RunRecord {
    pub fn trace(&self) -> Option<&[TraceRecord64]> {
        match &self.outcome {
            RunOutcome::Completed(t) => Some(t),
            RunOutcome::Diverged { .. } => None,
        }
    }
}

/// Per-checkpoint means over the completed runs of each strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub eta: f64,
    pub uniform_objective: Option<f64>,
    pub antithetic_objective: Option<f64>,
    pub uniform_variance: Option<f64>,
    pub antithetic_variance: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub n: usize,
    pub dim: usize,
    pub iterations: usize,
    pub checkpoint_every: usize,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub summary_file: PathBuf,
    pub manifest_file: PathBuf,
}

impl RunReport {
    pub fn diverged(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(|r| r.trace().is_none())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    dataset: String,
    n: usize,
    dim: usize,
    scale_features: bool,
    loss: &'static str,
    lambda: f64,
    eta0: f64,
    eta: f64,
    iterations: usize,
    batch_size: usize,
    checkpoint_every: usize,
    variance: String,
    rng: &'static str,
    seeds: Vec<u64>,
    table: TableSummary,
    runs: Vec<ManifestRun>,
}

#[derive(Serialize)]
struct ManifestRun {
    strategy: &'static str,
    seed: u64,
    status: String,
    file: Option<String>,
}

fn trace_csv(trace: &[TraceRecord64]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in trace {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.t,
            format_real(r.eta),
            format_real(r.objective),
            format_real(r.variance)
        ));
    }
    s
}

fn mean_at(runs: &[&[TraceRecord64]], row: usize, field: fn(&TraceRecord64) -> f64) -> Option<f64> {
    if runs.is_empty() {
        return None;
    }
    Some(runs.iter().map(|t| field(&t[row])).sum::<f64>() / runs.len() as f64)
}

fn summarize(runs: &[RunRecord]) -> Vec<SummaryRow> {
    let completed = |s: Strategy| -> Vec<&[TraceRecord64]> {
        runs.iter()
            .filter(|r| r.strategy == s)
            .filter_map(RunRecord::trace)
            .collect()
    };
    let (uni, anti) = (
        completed(Strategy::Uniform),
        completed(Strategy::Antithetic),
    );
    let Some(reference) = uni.first().or(anti.first()) else {
        return Vec::new();
    };
    reference
        .iter()
        .enumerate()
        .map(|(k, r)| SummaryRow {
            t: r.t,
            eta: r.eta,
            uniform_objective: mean_at(&uni, k, |r| r.objective),
            antithetic_objective: mean_at(&anti, k, |r| r.objective),
            uniform_variance: mean_at(&uni, k, |r| r.variance),
            antithetic_variance: mean_at(&anti, k, |r| r.variance),
        })
        .collect()
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let cell = |v: Option<f64>| v.map(format_real).unwrap_or_default();
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.t,
            format_real(r.eta),
            cell(r.uniform_objective),
            cell(r.antithetic_objective),
            cell(r.uniform_variance),
            cell(r.antithetic_variance)
        ));
    }
    s
}

/// Runs every (strategy, seed) combination of `spec` in parallel and writes
/// `<name>_<strategy>_<seed>.csv` per completed run, `<name>_summary.csv`
/// and `<name>_manifest.json`. Divergent runs are reported in the result,
/// not as an error.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<RunReport> {
    spec.validate()?;
    let ds = load_dataset(&spec.dataset, spec.scale_features)?;
    let name = spec.name();
    let table = match &spec.table {
        Some(path) if path.exists() => load_table(path, &ds)?,
        Some(path) => {
            let t = build_table_indexed(&ds)?;
            save_table(&t, &ds, path)?;
            t
        }
        None => build_table_indexed(&ds)?,
    };
    let table_summary = TableSummary::new(&ds, &pairing_stats(&table, &ds)?);
    let (iterations, checkpoint_every) = spec.schedule_for(ds.n());
    let loss = LossModel64::new(spec.loss.into(), spec.lambda)?;
    let schedule = StepSchedule::new(spec.eta0, spec.eta())?;
    let variance = match spec.empirical_trials {
        Some(trials) => VarianceMode::Empirical(trials),
        None => VarianceMode::Exact,
    };
    let seeds = spec.seeds();
    let jobs: Vec<(Strategy, u64)> = [Strategy::Uniform, Strategy::Antithetic]
        .into_iter()
        .flat_map(|s| seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let make_config = |strategy: Strategy, seed: u64| -> Result<RunConfig<f64>> {
        let mut cfg = RunConfig::new(
            loss,
            SamplerConfig::new(strategy, spec.batch_size, seed)?,
            schedule,
            iterations,
            checkpoint_every,
        )?;
        cfg.variance = variance;
        cfg.validate()?;
        Ok(cfg)
    };
    // A spec that is invalid for either strategy fails before any run starts.
    for strategy in [Strategy::Uniform, Strategy::Antithetic] {
        make_config(strategy, seeds[0])?;
    }
    info!(
        "{name}: {} runs, {iterations} iterations, checkpoint every {checkpoint_every}",
        jobs.len()
    );

    let outcomes: Vec<Result<RunOutcome>> = jobs
        .par_iter()
        .map(|&(strategy, seed)| {
            let cfg = make_config(strategy, seed)?;
            match run(&cfg, &ds, Some(&table)) {
                Ok(out) => Ok(RunOutcome::Completed(out.trace)),
                Err(Error::Diverged { iteration, reason }) => {
                    warn!(
                        "{name} {} seed {seed} diverged at t = {iteration}: {reason}",
                        strategy.name()
                    );
                    Ok(RunOutcome::Diverged { iteration, reason })
                }
                Err(e) => Err(anyhow!(e)),
            }
        })
        .collect();

    fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    let mut runs = Vec::with_capacity(jobs.len());
    for (&(strategy, seed), outcome) in jobs.iter().zip(outcomes) {
        let outcome = outcome?;
        let path = spec
            .out
            .join(format!("{name}_{}_{seed}.csv", strategy.name()));
        let file = match &outcome {
            RunOutcome::Completed(trace) => {
                fs::write(&path, trace_csv(trace))
                    .with_context(|| format!("writing {}", path.display()))?;
                Some(path)
            }
            RunOutcome::Diverged { .. } => {
                // A stale trace from an earlier invocation would misreport this run.
                if path.exists() {
                    fs::remove_file(&path)?;
                }
                None
            }
        };
        runs.push(RunRecord {
            strategy,
            seed,
            outcome,
            file,
        });
    }

    let summary = summarize(&runs);
    let summary_file = spec.out.join(format!("{name}_summary.csv"));
    fs::write(&summary_file, summary_csv(&summary))?;

    let manifest = Manifest {
        name: &name,
        dataset: spec.dataset.display().to_string(),
        n: ds.n(),
        dim: ds.dim(),
        scale_features: spec.scale_features,
        loss: LossKind::from(spec.loss).name(),
        lambda: spec.lambda,
        eta0: spec.eta0,
        eta: spec.eta(),
        iterations,
        batch_size: spec.batch_size,
        checkpoint_every,
        variance: match variance {
            VarianceMode::Exact => "exact".into(),
            VarianceMode::Empirical(k) => format!("empirical({k})"),
        },
        rng: RNG_DESCRIPTION,
        seeds,
        table: table_summary,
        runs: runs
            .iter()
            .map(|r| ManifestRun {
                strategy: r.strategy.name(),
                seed: r.seed,
                status: match &r.outcome {
                    RunOutcome::Completed(_) => "completed".into(),
                    RunOutcome::Diverged { iteration, reason } => {
                        format!("diverged at t = {iteration}: {reason}")
                    }
                },
                file: r
                    .file
                    .as_ref()
                    .and_then(|p| p.file_name())
                    .map(|s| s.to_string_lossy().into_owned()),
            })
            .collect(),
    };
    let manifest_file = spec.out.join(format!("{name}_manifest.json"));
    write_json(&manifest_file, &manifest)?;

    Ok(RunReport {
        name,
        n: ds.n(),
        dim: ds.dim(),
        iterations,
        checkpoint_every,
        runs,
        summary,
        summary_file,
        manifest_file,
    })
}

use std::path::PathBuf;
use std::process::ExitCode;

use antisgd_bench::{cmd_build_table, cmd_run, cmd_verify, ExperimentSpec, LossArg, RunOutcome};
use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

/// Exit status when a table violates an invariant.
const EXIT_INVALID: u8 = 1;
/// Exit status for unreadable inputs and bad arguments.
const EXIT_ERROR: u8 = 2;
/// Exit status when at least one run diverged.
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "antisgd",
    version,
    about = "Uniform vs. antithetic mini-batch SGD experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the antithetic table of a dataset.
    BuildTable {
        #[arg(long)]
        dataset: PathBuf,
        /// Output table; a `.stats.json` sidecar is written next to it.
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        scale_features: bool,
    },
    /// Run both strategies over a set of seeds and write trace CSVs.
    Run(Box<RunArgs>),
    /// Check a table against its dataset and compare variances at w = 0.
    Verify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = 2)]
        batch: usize,
        #[arg(long)]
        scale_features: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment spec; flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Loaded if present, otherwise built and written here.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    eta0: Option<f64>,
    /// Defaults to lambda.
    #[arg(long)]
    eta: Option<f64>,
    /// Defaults to 10 n / batch.
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// First of ten consecutive seeds when --seeds is absent.
    #[arg(long)]
    base_seed: Option<u64>,
    /// Defaults to n / batch.
    #[arg(long)]
    checkpoint_every: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prefix of output file names; defaults to the dataset file name.
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    scale_features: bool,
    /// Record Monte-Carlo variance over this many batches instead of the
    /// exact value.
    #[arg(long)]
    empirical_trials: Option<usize>,
}

impl RunArgs {
    fn into_spec(self) -> Result<ExperimentSpec> {
        let mut spec = match &self.spec {
            Some(path) => ExperimentSpec::from_file(path)?,
            None => {
                let (Some(dataset), Some(lambda), Some(out)) =
                    (&self.dataset, self.lambda, &self.out)
                else {
                    bail!("without --spec, --dataset, --lambda and --out are required");
                };
                ExperimentSpec::new(dataset, self.loss.unwrap_or(LossArg::Logistic), lambda, out)
            }
        };
        macro_rules! set {
            ($field:ident, $value:expr) => {
                if let Some(v) = $value {
                    spec.$field = v;
                }
            };
        }
        set!(dataset, self.dataset);
        set!(loss, self.loss);
        set!(lambda, self.lambda);
        set!(eta0, self.eta0);
        set!(batch_size, self.batch);
        set!(base_seed, self.base_seed);
        set!(out, self.out);
        spec.table = self.table.or(spec.table);
        spec.eta = self.eta.or(spec.eta);
        spec.iterations = self.iters.or(spec.iterations);
        spec.seeds = self.seeds.or(spec.seeds);
        spec.checkpoint_every = self.checkpoint_every.or(spec.checkpoint_every);
        spec.name = self.name.or(spec.name);
        spec.empirical_trials = self.empirical_trials.or(spec.empirical_trials);
        spec.scale_features |= self.scale_features;
        Ok(spec)
    }
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::BuildTable {
            dataset,
            table,
            scale_features,
        } => {
            let s = cmd_build_table(&dataset, &table, scale_features)?;
            println!(
                "{}: {} rows, fraction_negative {}, mean_metric {}",
                table.display(),
                s.n,
                s.fraction_negative,
                s.mean_metric
            );
            Ok(0)
        }
        Command::Verify {
            dataset,
            table,
            batch,
            scale_features,
        } => {
            let report = cmd_verify(&dataset, &table, scale_features, batch)?;
            print!("{report}");
            Ok(if report.ok() { 0 } else { EXIT_INVALID })
        }
        Command::Run(args) => {
            let report = cmd_run(&args.into_spec()?)?;
            println!(
                "{}: n = {}, {} iterations, {} runs",
                report.name,
                report.n,
                report.iterations,
                report.runs.len()
            );
            let mut diverged = false;
            for r in &report.runs {
                if let RunOutcome::Diverged { iteration, reason } = &r.outcome {
                    diverged = true;
                    eprintln!(
                        "{} seed {} diverged at t = {iteration}: {reason}",
                        r.strategy.name(),
                        r.seed
                    );
                }
            }
            println!("summary: {}", report.summary_file.display());
            println!("manifest: {}", report.manifest_file.display());
            Ok(if diverged { EXIT_DIVERGED } else { 0 })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ANTISGD_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

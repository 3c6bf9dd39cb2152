//! Mini-batch SGD with a decaying step size, recording checkpoints of the
//! objective and of the exact mini-batch gradient variance.

use crate::antithetic::AntitheticTable;
use crate::data::{axpy, dense_dot, Dataset};
use crate::error::{Error, Result};
use crate::losses::{check_finite, count, LossModel};
use crate::metrics::{empirical_variance, exact_variance};
use crate::sampling::{Sampler, SamplerConfig, Strategy};
use crate::scalar::{norm_sq, Scalar};

/// Iterates with `‖w‖` above this are treated as diverged.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// `η_t = η₀ / (1 + η₀ η t)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule<T> {
    eta0: T,
    eta: T,
}

impl<T: Scalar> StepSchedule<T> {
    pub fn new(eta0: T, eta: T) -> Result<Self> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !ok(eta0) || !ok(eta) {
            return Err(Error::Config(format!(
                "step schedule needs positive finite eta0 and eta, got {eta0} and {eta}"
            )));
        }
        Ok(Self { eta0, eta })
    }

    pub fn eta0(&self) -> T {
        self.eta0
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    /// Step size of iteration `t`; `t = 0` gives `η₀`.
    pub fn step_size(&self, t: usize) -> T {
        self.eta0 / (T::one() + self.eta0 * self.eta * count::<T>(t))
    }
}

/// How checkpoint variances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceMode {
    #[default]
    Exact,
    /// Monte-Carlo estimate over this many batches, drawn from a stream
    /// independent of the optimization stream.
    Empirical(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig<T> {
    pub loss: LossModel<T>,
    pub sampler: SamplerConfig,
    pub schedule: StepSchedule<T>,
    pub iterations: usize,
    pub checkpoint_every: usize,
    /// Starting point; `None` means the zero vector.
    pub w0: Option<Vec<T>>,
    pub variance: VarianceMode,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(
        loss: LossModel<T>,
        sampler: SamplerConfig,
        schedule: StepSchedule<T>,
        iterations: usize,
        checkpoint_every: usize,
    ) -> Result<Self> {
        let config = Self {
            loss,
            sampler,
            schedule,
            iterations,
            checkpoint_every,
            w0: None,
            variance: VarianceMode::Exact,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.checkpoint_every == 0 {
            return Err(Error::Config("checkpoint_every must be positive".into()));
        }
        if self.iterations > 0 && self.checkpoint_every > self.iterations {
            return Err(Error::Config(format!(
                "checkpoint_every ({}) exceeds iterations ({})",
                self.checkpoint_every, self.iterations
            )));
        }
        if let VarianceMode::Empirical(trials) = self.variance {
            if trials < 2 {
                return Err(Error::Config("empirical variance needs >= 2 trials".into()));
            }
        }
        Ok(())
    }

    /// Whether iteration `t` is recorded: `0`, multiples of
    /// `checkpoint_every`, and the last iteration.
    pub fn is_checkpoint(&self, t: usize) -> bool {
        t == 0 || t.is_multiple_of(self.checkpoint_every) || t == self.iterations
    }
}

/// Measurements at one checkpoint, taken at the iterate after `t` updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub t: usize,
    pub eta: T,
    pub objective: T,
    pub variance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput<T> {
    pub trace: Vec<TraceRecord<T>>,
    pub w: Vec<T>,
}

/// One update, as seen by a [`run_observed`] callback.
#[derive(Debug)]
pub struct StepInfo<'a, T> {
    pub t: usize,
    pub eta: T,
    pub batch: &'a [usize],
    pub w_before: &'a [T],
    pub w_after: &'a [T],
}

/// Runs SGD: for `t = 1..=T`,
/// `w_t = w_{t-1} - (η_t / b) Σ_{s ∈ B_t} ∇f_s(w_{t-1})`.
pub fn run<T: Scalar>(
    config: &RunConfig<T>,
    dataset: &Dataset<T>,
    table: Option<&AntitheticTable<T>>,
) -> Result<RunOutput<T>> {
    drive(config, dataset, table, None)
}

/// [`run`], calling `observer` after every update.
pub fn run_observed<T: Scalar>(
    config: &RunConfig<T>,
    dataset: &Dataset<T>,
    table: Option<&AntitheticTable<T>>,
    observer: &mut dyn FnMut(&StepInfo<'_, T>),
) -> Result<RunOutput<T>> {
    drive(config, dataset, table, Some(observer))
}

type Observer<'o, T> = &'o mut dyn FnMut(&StepInfo<'_, T>);

fn drive<T: Scalar>(
    config: &RunConfig<T>,
    dataset: &Dataset<T>,
    table: Option<&AntitheticTable<T>>,
    mut observer: Option<Observer<'_, T>>,
) -> Result<RunOutput<T>> {
    config.validate()?;
    let strategy = config.sampler.strategy;
    let table = match strategy {
        Strategy::Antithetic => Some(
            table
                .ok_or_else(|| Error::Config("antithetic runs need an antithetic table".into()))?,
        ),
        Strategy::Uniform => None,
    };
    let mut sampler = Sampler::new(config.sampler, dataset.n(), table)?;

    let dim = dataset.dim();
    let mut w = match &config.w0 {
        Some(w0) if w0.len() < dim => {
            return Err(Error::Config(format!(
                "w0 has length {} but the data has {dim} features",
                w0.len()
            )))
        }
        Some(w0) => w0.clone(),
        None => vec![T::zero(); dim],
    };
    check_finite(&w)?;

    let loss = &config.loss;
    let samples = dataset.samples();
    let b = config.sampler.batch_size;
    let inv_b = T::one() / count::<T>(b);
    let lambda = loss.lambda();
    let limit = T::lit(DIVERGENCE_NORM);

    let mut trace = Vec::new();
    let mut batch = Vec::with_capacity(b);
    let mut coefs = Vec::with_capacity(b);
    let mut w_before = Vec::new();

    let checkpoint = |t: usize, w: &[T], trace: &mut Vec<TraceRecord<T>>| -> Result<()> {
        let objective = loss.full_objective(w, samples)?;
        let variance = match config.variance {
            VarianceMode::Exact => exact_variance(loss, w, dataset, strategy, table, b)?.variance,
            VarianceMode::Empirical(trials) => {
                let probe = SamplerConfig {
                    seed: probe_seed(config.sampler.seed, t),
                    ..config.sampler
                };
                let mut s = Sampler::new(probe, dataset.n(), table)?;
                empirical_variance(loss, w, dataset, &mut s, trials)?
            }
        };
        trace.push(TraceRecord {
            t,
            eta: config.schedule.step_size(t),
            objective,
            variance,
        });
        Ok(())
    };

    checkpoint(0, &w, &mut trace)?;
    for t in 1..=config.iterations {
        let eta = config.schedule.step_size(t);
        sampler.fill(&mut batch);
        coefs.clear();
        for &s in &batch {
            let sample = &samples[s];
            let score = dense_dot(&w, &sample.features)?;
            coefs.push(loss.coefficient_at(score, sample));
        }
        if observer.is_some() {
            w_before.clone_from(&w);
        }
        if lambda != T::zero() {
            let shrink = T::one() - eta * lambda;
            w.iter_mut().for_each(|v| *v = *v * shrink);
        }
        let step = -eta * inv_b;
        for (&s, &c) in batch.iter().zip(&coefs) {
            if c != T::zero() {
                axpy(step * c, &samples[s].features, &mut w)?;
            }
        }
        guard(&w, t, limit)?;
        if let Some(obs) = observer.as_mut() {
            obs(&StepInfo {
                t,
                eta,
                batch: &batch,
                w_before: &w_before,
                w_after: &w,
            });
        }
        if config.is_checkpoint(t) {
            checkpoint(t, &w, &mut trace)?;
        }
    }
    Ok(RunOutput { trace, w })
}

fn guard<T: Scalar>(w: &[T], t: usize, limit: T) -> Result<()> {
    if let Some(k) = w.iter().position(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            iteration: t,
            reason: format!("w[{k}] is not finite"),
        });
    }
    let norm = norm_sq(w).sqrt();
    if norm > limit {
        return Err(Error::Diverged {
            iteration: t,
            reason: format!("‖w‖ = {norm:e} exceeds {limit:e}"),
        });
    }
    Ok(())
}

/// Seed of the Monte-Carlo stream used at checkpoint `t`.
fn probe_seed(seed: u64, t: usize) -> u64 {
    // splitmix64 finalizer over (seed, t)
    let mut z = seed
        ^ (t as u64)
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

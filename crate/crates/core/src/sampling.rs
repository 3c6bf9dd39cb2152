//! Mini-batch index streams.
//!
//! Uniform batches draw `b` indices i.i.d. with replacement. Antithetic
//! batches draw `b / 2` pair heads i.i.d. with replacement and follow each
//! head `i` with its table partner `S[i]`. Indices are 0-based.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::antithetic::AntitheticTable;
use crate::error::{Error, Result};

/// Generator used for every index stream; recorded in run manifests.
pub const RNG_DESCRIPTION: &str =
    "rand_chacha 0.9 ChaCha8Rng::seed_from_u64, rand 0.9 random_range";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Uniform,
    Antithetic,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Uniform => "uniform",
            Strategy::Antithetic => "antithetic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(strategy: Strategy, batch_size: usize, seed: u64) -> Result<Self> {
        let config = Self {
            strategy,
            batch_size,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.strategy == Strategy::Antithetic && !self.batch_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "antithetic batches hold whole pairs; batch size {} is odd",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
}

/// Seeded generator state for index streams.
#[derive(Debug, Clone)]
pub struct BatchRng {
    rng: ChaCha8Rng,
}

impl BatchRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    pub fn next_batch_uniform(&mut self, n: usize, b: usize) -> MiniBatch {
        let mut indices = Vec::with_capacity(b);
        self.fill_uniform(n, b, &mut indices);
        MiniBatch { indices }
    }

    pub fn next_batch_antithetic<T>(
        &mut self,
        table: &AntitheticTable<T>,
        b: usize,
    ) -> Result<MiniBatch> {
        if b == 0 || !b.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "antithetic batch size must be a positive even number, got {b}"
            )));
        }
        let mut indices = Vec::with_capacity(b);
        self.fill_antithetic(table.partners(), b, &mut indices);
        Ok(MiniBatch { indices })
    }

    fn fill_uniform(&mut self, n: usize, b: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..b {
            out.push(self.index(n));
        }
    }

    fn fill_antithetic(&mut self, partners: &[usize], b: usize, out: &mut Vec<usize>) {
        out.clear();
        for _ in 0..b / 2 {
            let i = self.index(partners.len());
            out.push(i);
            out.push(partners[i]);
        }
    }
}

/// A configured batch source bound to one dataset size (and table).
#[derive(Debug, Clone)]
pub struct Sampler<'a, T> {
    config: SamplerConfig,
    n: usize,
    table: Option<&'a AntitheticTable<T>>,
    rng: BatchRng,
}

impl<'a, T> Sampler<'a, T> {
    pub fn new(
        config: SamplerConfig,
        n: usize,
        table: Option<&'a AntitheticTable<T>>,
    ) -> Result<Self> {
        config.validate()?;
        if n == 0 {
            return Err(Error::Size(0));
        }
        if config.strategy == Strategy::Antithetic {
            let t = table.ok_or_else(|| {
                Error::Config("antithetic sampling needs an antithetic table".into())
            })?;
            if t.partners().len() != n {
                return Err(Error::Consistency(format!(
                    "table has {} rows, dataset has {n} samples",
                    t.partners().len()
                )));
            }
        }
        Ok(Self {
            config,
            n,
            table,
            rng: BatchRng::new(config.seed),
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// Writes the next batch into `out`, reusing its allocation.
    pub fn fill(&mut self, out: &mut Vec<usize>) {
        match (self.config.strategy, self.table) {
            (Strategy::Antithetic, Some(t)) => {
                self.rng
                    .fill_antithetic(t.partners(), self.config.batch_size, out)
            }
            _ => self.rng.fill_uniform(self.n, self.config.batch_size, out),
        }
    }

    pub fn next_batch(&mut self) -> MiniBatch {
        let mut indices = Vec::with_capacity(self.config.batch_size);
        self.fill(&mut indices);
        MiniBatch { indices }
    }
}

//! The antithetic table: a fixed-point-free permutation that pairs every
//! sample with a partner whose gradient tends to point the other way.
//!
//! Partners are chosen greedily by the pairing metric `y_i y_j ⟨x_i, x_j⟩`,
//! which bounds `⟨∇g_i(w), ∇g_j(w)⟩` for every `w` for the logistic and
//! hinge losses. Sample `i` (in index order) takes the remaining sample with
//! the smallest metric, and that sample leaves the pool.
//!
//! Indices are 0-based in memory and 1-based in the table file.

use std::fmt;
use std::io::{self, BufRead, Write};

use rayon::prelude::*;

use crate::data::{dot, Dataset, Sample};
use crate::error::{Error, Result};
use crate::scalar::{format_real, Scalar};

/// Pool size above which one greedy step scans candidates on the rayon pool.
const PARALLEL_SCAN_MIN: usize = 4096;

/// `y_a y_b ⟨x_a, x_b⟩`; exactly symmetric in its arguments.
pub fn pairing_metric<T: Scalar>(a: &Sample<T>, b: &Sample<T>) -> T {
    let d = dot(&a.features, &b.features);
    if a.label == b.label {
        d
    } else {
        -d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntitheticTable<T> {
    partners: Vec<usize>,
    metrics: Vec<T>,
}

impl<T: Scalar> AntitheticTable<T> {
    /// Wraps a 0-based pairing after checking that it is a permutation
    /// without fixed points; metric values are computed from `dataset`.
    pub fn from_pairing(partners: Vec<usize>, dataset: &Dataset<T>) -> Result<Self> {
        let n = dataset.n();
        if partners.len() != n {
            return Err(Error::Consistency(format!(
                "pairing has {} entries for {n} samples",
                partners.len()
            )));
        }
        let mut seen = vec![false; n];
        for (i, &j) in partners.iter().enumerate() {
            if j >= n {
                return Err(Error::Consistency(format!(
                    "partner {j} of {i} out of range"
                )));
            }
            if j == i {
                return Err(Error::Consistency(format!("sample {i} is its own partner")));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::Consistency(format!("sample {j} is a partner twice")));
            }
        }
        let samples = dataset.samples();
        let metrics = partners
            .iter()
            .enumerate()
            .map(|(i, &j)| pairing_metric(&samples[i], &samples[j]))
            .collect();
        Ok(Self { partners, metrics })
    }
}

impl<T> AntitheticTable<T> {
    pub fn len(&self) -> usize {
        self.partners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partners.is_empty()
    }

    /// 0-based partner of sample `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.partners[i]
    }

    pub fn partners(&self) -> &[usize] {
        &self.partners
    }

    /// `pairing_metric(i, partner(i))` for every `i`.
    pub fn metric_values(&self) -> &[T] {
        &self.metrics
    }

    /// The pairing in file convention, `S[i]` with 1-based values.
    pub fn one_based(&self) -> Vec<usize> {
        self.partners.iter().map(|&j| j + 1).collect()
    }
}

/// Candidates are compared by metric, then by index.
#[derive(Debug, Clone, Copy)]
struct Candidate<T> {
    metric: T,
    index: usize,
}

impl<T: Scalar> Candidate<T> {
    fn better_than(&self, other: &Self) -> bool {
        self.metric < other.metric || (self.metric == other.metric && self.index < other.index)
    }
}

fn pick<T: Scalar>(best: Option<Candidate<T>>, c: Candidate<T>) -> Option<Candidate<T>> {
    match best {
        Some(b) if !c.better_than(&b) => Some(b),
        _ => Some(c),
    }
}

fn scan<T: Scalar>(samples: &[Sample<T>], i: usize, pool: &[usize]) -> Option<Candidate<T>> {
    let si = &samples[i];
    let chunk_best = |chunk: &[usize]| {
        chunk.iter().filter(|&&j| j != i).fold(None, |best, &j| {
            pick(
                best,
                Candidate {
                    metric: pairing_metric(si, &samples[j]),
                    index: j,
                },
            )
        })
    };
    if pool.len() < PARALLEL_SCAN_MIN {
        return chunk_best(pool);
    }
    let per_chunk: Vec<Option<Candidate<T>>> = pool.par_chunks(1024).map(chunk_best).collect();
    per_chunk
        .into_iter()
        .flatten()
        .fold(None, |best, c| pick(best, c))
}

/// Greedy construction with an exhaustive scan per step.
///
/// For `i = 0..n`, `S[i]` is the pool member `j != i` with the smallest
/// metric (ties: smallest `j`), and `j` is removed from the pool. If the pool
/// holds only `i` itself at the last step, `i` is swapped into the assigned
/// pair `(p, S[p])` minimizing `metric(i, S[p])`: `S[i] = S[p]`, `S[p] = i`.
pub fn build_table<T: Scalar>(dataset: &Dataset<T>) -> Result<AntitheticTable<T>> {
    let n = dataset.n();
    if n < 2 {
        return Err(Error::Size(n));
    }
    let samples = dataset.samples();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut partners = vec![usize::MAX; n];
    let mut metrics = vec![T::zero(); n];
    for i in 0..n {
        match scan(samples, i, &pool) {
            Some(best) => {
                partners[i] = best.index;
                metrics[i] = best.metric;
                let pos = pool
                    .binary_search(&best.index)
                    .expect("candidate came from pool");
                pool.remove(pos);
            }
            None => repair_last(samples, i, &mut partners, &mut metrics),
        }
    }
    Ok(AntitheticTable { partners, metrics })
}

fn repair_last<T: Scalar>(
    samples: &[Sample<T>],
    i: usize,
    partners: &mut [usize],
    metrics: &mut [T],
) {
    let si = &samples[i];
    let best = (0..partners.len())
        .filter(|&p| p != i)
        .fold(None, |best, p| {
            pick(
                best,
                Candidate {
                    metric: pairing_metric(si, &samples[partners[p]]),
                    index: p,
                },
            )
        })
        .expect("n >= 2 leaves an assigned pair");
    let p = best.index;
    let q = partners[p];
    partners[i] = q;
    metrics[i] = best.metric;
    partners[p] = i;
    metrics[p] = pairing_metric(&samples[p], si);
}

/// Same table as [`build_table`], visiting only samples that share a stored
/// feature with `i`; every other pool member has metric exactly zero.
///
/// Pays off on sparse data. On dense data it degrades to the exhaustive scan.
pub fn build_table_indexed<T: Scalar>(dataset: &Dataset<T>) -> Result<AntitheticTable<T>> {
    let n = dataset.n();
    if n < 2 {
        return Err(Error::Size(n));
    }
    let samples = dataset.samples();
    let mut postings: Vec<Vec<usize>> = vec![Vec::new(); dataset.dim()];
    for (j, s) in samples.iter().enumerate() {
        for &k in s.features.indices() {
            postings[k - 1].push(j);
        }
    }
    let mut in_pool = vec![true; n];
    let mut pool: Vec<usize> = (0..n).collect();
    let mut stamp = vec![usize::MAX; n];
    let mut partners = vec![usize::MAX; n];
    let mut metrics = vec![T::zero(); n];

    for i in 0..n {
        let si = &samples[i];
        stamp[i] = i;
        let mut best: Option<Candidate<T>> = None;
        for &k in si.features.indices() {
            for &j in &postings[k - 1] {
                if !in_pool[j] || stamp[j] == i {
                    continue;
                }
                stamp[j] = i;
                best = pick(
                    best,
                    Candidate {
                        metric: pairing_metric(si, &samples[j]),
                        index: j,
                    },
                );
            }
        }
        if let Some(&j0) = pool.iter().find(|&&j| stamp[j] != i) {
            best = pick(
                best,
                Candidate {
                    metric: T::zero(),
                    index: j0,
                },
            );
        }
        match best {
            Some(b) => {
                // Keep the sign convention of the exhaustive scan for zeros.
                let metric = if b.metric == T::zero() {
                    pairing_metric(si, &samples[b.index])
                } else {
                    b.metric
                };
                partners[i] = b.index;
                metrics[i] = metric;
                in_pool[b.index] = false;
                let pos = pool
                    .binary_search(&b.index)
                    .expect("candidate came from pool");
                pool.remove(pos);
            }
            None => repair_last(samples, i, &mut partners, &mut metrics),
        }
    }
    Ok(AntitheticTable { partners, metrics })
}

/// Summary of the metric values of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingStats<T> {
    pub fraction_negative: f64,
    pub mean_metric: T,
    pub min_metric: T,
    pub max_metric: T,
}

/// Aggregates the table's metric values after recomputing each one from the
/// dataset.
pub fn pairing_stats<T: Scalar>(
    table: &AntitheticTable<T>,
    dataset: &Dataset<T>,
) -> Result<PairingStats<T>> {
    if table.len() != dataset.n() {
        return Err(Error::Consistency(format!(
            "table has {} rows, dataset has {} samples",
            table.len(),
            dataset.n()
        )));
    }
    let samples = dataset.samples();
    let tol = T::lit(1e-12);
    let mut negatives = 0usize;
    let mut sum = T::zero();
    let mut min = T::infinity();
    let mut max = T::neg_infinity();
    for (i, (&j, &stored)) in table.partners.iter().zip(&table.metrics).enumerate() {
        let fresh = pairing_metric(&samples[i], &samples[j]);
        if (fresh - stored).abs() > tol * fresh.abs().max(T::one()) {
            return Err(Error::Consistency(format!(
                "metric of row {} is {stored}, recomputed {fresh}",
                i + 1
            )));
        }
        if stored < T::zero() {
            negatives += 1;
        }
        sum = sum + stored;
        min = min.min(stored);
        max = max.max(stored);
    }
    let n = table.len();
    Ok(PairingStats {
        fraction_negative: negatives as f64 / n as f64,
        mean_metric: sum / T::from_usize(n).expect("row count fits"),
        min_metric: min,
        max_metric: max,
    })
}

/// Writes `i S[i] metric` per line, 1-based.
pub fn write_table<T: Scalar, W: Write>(table: &AntitheticTable<T>, mut out: W) -> io::Result<()> {
    for (i, (&j, &m)) in table.partners.iter().zip(&table.metrics).enumerate() {
        writeln!(out, "{} {} {}", i + 1, j + 1, format_real(m))?;
    }
    Ok(())
}

/// A table file as read from disk, before any validation against a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRows<T> {
    /// `(line, i, S[i], metric)` with the 1-based values found in the file.
    pub rows: Vec<(usize, usize, usize, T)>,
}

pub fn read_table<T: Scalar, R: BufRead>(reader: R) -> Result<TableRows<T>> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = trimmed.split_ascii_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `i S[i] metric`, got {} fields", toks.len()),
            });
        }
        let bad = |what: &str, tok: &str| Error::Parse {
            line: lineno,
            message: format!("invalid {what} `{tok}`"),
        };
        let i: usize = toks[0].parse().map_err(|_| bad("row index", toks[0]))?;
        let j: usize = toks[1].parse().map_err(|_| bad("partner", toks[1]))?;
        let m: T = toks[2].parse().map_err(|_| bad("metric", toks[2]))?;
        rows.push((lineno, i, j, m));
    }
    Ok(TableRows { rows })
}

/// One broken table invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum TableViolation {
    RowCount {
        expected: usize,
        found: usize,
    },
    RowOrder {
        line: usize,
        expected: usize,
        found: usize,
    },
    OutOfRange {
        row: usize,
        partner: usize,
    },
    FixedPoint {
        row: usize,
    },
    DuplicatePartner {
        partner: usize,
        rows: Vec<usize>,
    },
    NeverPartner {
        sample: usize,
    },
    MetricMismatch {
        row: usize,
        stored: f64,
        recomputed: f64,
    },
}

impl fmt::Display for TableViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableViolation::RowCount { expected, found } => {
                write!(f, "row count: expected {expected}, found {found}")
            }
            TableViolation::RowOrder {
                line,
                expected,
                found,
            } => write!(f, "line {line}: expected row {expected}, found {found}"),
            TableViolation::OutOfRange { row, partner } => {
                write!(f, "row {row}: partner {partner} out of range")
            }
            TableViolation::FixedPoint { row } => write!(f, "row {row}: sample is its own partner"),
            TableViolation::DuplicatePartner { partner, rows } => {
                write!(
                    f,
                    "permutation: sample {partner} is the partner of rows {rows:?}"
                )
            }
            TableViolation::NeverPartner { sample } => {
                write!(f, "permutation: sample {sample} is nobody's partner")
            }
            TableViolation::MetricMismatch {
                row,
                stored,
                recomputed,
            } => write!(
                f,
                "row {row}: stored metric {stored}, recomputed {recomputed}"
            ),
        }
    }
}

impl<T: Scalar> TableRows<T> {
    /// Lists every violated invariant, not just the first.
    pub fn check(&self, dataset: &Dataset<T>) -> Vec<TableViolation> {
        let n = dataset.n();
        let samples = dataset.samples();
        let mut out = Vec::new();
        if self.rows.len() != n {
            out.push(TableViolation::RowCount {
                expected: n,
                found: self.rows.len(),
            });
        }
        let mut sources: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, &(line, i, j, m)) in self.rows.iter().enumerate() {
            if i != k + 1 {
                out.push(TableViolation::RowOrder {
                    line,
                    expected: k + 1,
                    found: i,
                });
            }
            if j == 0 || j > n {
                out.push(TableViolation::OutOfRange { row: i, partner: j });
                continue;
            }
            if i == j {
                out.push(TableViolation::FixedPoint { row: i });
            }
            sources[j - 1].push(i);
            if (1..=n).contains(&i) {
                let fresh = pairing_metric(&samples[i - 1], &samples[j - 1]);
                if (fresh - m).abs() > T::lit(1e-12) * fresh.abs().max(T::one()) {
                    out.push(TableViolation::MetricMismatch {
                        row: i,
                        stored: m.as_f64(),
                        recomputed: fresh.as_f64(),
                    });
                }
            }
        }
        for (s, rows) in sources.into_iter().enumerate() {
            match rows.len() {
                0 => out.push(TableViolation::NeverPartner { sample: s + 1 }),
                1 => {}
                _ => out.push(TableViolation::DuplicatePartner {
                    partner: s + 1,
                    rows,
                }),
            }
        }
        out
    }

    /// Validates against `dataset` and converts to an in-memory table.
    pub fn into_table(self, dataset: &Dataset<T>) -> Result<AntitheticTable<T>> {
        let violations = self.check(dataset);
        if !violations.is_empty() {
            let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            return Err(Error::Consistency(msg.join("; ")));
        }
        let partners = self.rows.iter().map(|&(_, _, j, _)| j - 1).collect();
        AntitheticTable::from_pairing(partners, dataset)
    }
}

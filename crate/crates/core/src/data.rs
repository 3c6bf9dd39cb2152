//! Sparse samples, LIBSVM parsing and the handful of linear-algebra kernels
//! the rest of the crate is built on.
//!
//! Feature indices are 1-based everywhere in this module, matching the file
//! format. Dense weight vectors are 0-based, so feature `k` lives in `w[k - 1]`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sparse feature vector with strictly increasing 1-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector<T> {
    indices: Vec<usize>,
    values: Vec<T>,
    dim: usize,
}

impl<T: Scalar> SparseVector<T> {
    /// Builds a vector from `(index, value)` entries.
    ///
    /// Entries must be strictly increasing in index and lie in `1..=dim`.
    /// Explicit zeros are dropped.
    pub fn new(entries: Vec<(usize, T)>, dim: usize) -> Result<Self> {
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut prev = 0usize;
        for (index, value) in entries {
            if index == 0 || index > dim {
                return Err(Error::Dimension { index, len: dim });
            }
            if index <= prev {
                return Err(Error::Schema(format!(
                    "indices must be strictly increasing ({index} follows {prev})"
                )));
            }
            if !value.is_finite() {
                return Err(Error::Domain(format!("non-finite value at index {index}")));
            }
            prev = index;
            if value != T::zero() {
                indices.push(index);
                values.push(value);
            }
        }
        Ok(Self {
            indices,
            values,
            dim,
        })
    }

    /// Builds a vector from a dense slice; `dense[k]` becomes index `k + 1`.
    pub fn from_dense(dense: &[T]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (k, &v) in dense.iter().enumerate() {
            if v != T::zero() {
                indices.push(k + 1);
                values.push(v);
            }
        }
        Self {
            indices,
            values,
            dim: dense.len().max(1),
        }
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Iterates stored `(index, value)` pairs in ascending index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, T)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    /// Value at a 1-based index, zero if not stored.
    pub fn get(&self, index: usize) -> T {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => T::zero(),
        }
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn to_dense(&self, len: usize) -> Vec<T> {
        let mut out = vec![T::zero(); len.max(self.dim)];
        for (i, v) in self.iter() {
            out[i - 1] = v;
        }
        out
    }

    fn with_dim(mut self, dim: usize) -> Self {
        debug_assert!(self.indices.last().is_none_or(|&i| i <= dim));
        self.dim = dim;
        self
    }
}

/// Sparse-sparse inner product.
///
/// Products are accumulated over the common indices in ascending order, so
/// `dot(a, b)` and `dot(b, a)` are bitwise equal.
pub fn dot<T: Scalar>(a: &SparseVector<T>, b: &SparseVector<T>) -> T {
    let (ai, av) = (&a.indices, &a.values);
    let (bi, bv) = (&b.indices, &b.values);
    let (mut p, mut q) = (0, 0);
    let mut acc = T::zero();
    while p < ai.len() && q < bi.len() {
        match ai[p].cmp(&bi[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                acc = acc + av[p] * bv[q];
                p += 1;
                q += 1;
            }
        }
    }
    acc
}

/// Dense-sparse inner product `w'x`.
pub fn dense_dot<T: Scalar>(w: &[T], x: &SparseVector<T>) -> Result<T> {
    let mut acc = T::zero();
    for (i, v) in x.iter() {
        let wi = w.get(i - 1).ok_or(Error::Dimension {
            index: i,
            len: w.len(),
        })?;
        acc = acc + v * *wi;
    }
    Ok(acc)
}

/// `w += alpha * x`, touching only the stored coordinates of `x`.
pub fn axpy<T: Scalar>(alpha: T, x: &SparseVector<T>, w: &mut [T]) -> Result<()> {
    if let Some(&last) = x.indices.last() {
        if last > w.len() {
            return Err(Error::Dimension {
                index: last,
                len: w.len(),
            });
        }
    }
    for (i, v) in x.iter() {
        w[i - 1] = w[i - 1] + alpha * v;
    }
    Ok(())
}

/// A labelled instance. `label` is the canonical ±1 label, `raw_label` is
/// whatever the source file said.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub features: SparseVector<T>,
    pub label: i8,
    pub raw_label: f64,
}

impl<T: Scalar> Sample<T> {
    /// Builds a sample that is already in canonical form (`raw_label == label`).
    pub fn new(features: SparseVector<T>, label: i8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::Schema(format!(
                "label must be -1 or +1, got {label}"
            )));
        }
        Ok(Self {
            features,
            label,
            raw_label: label as f64,
        })
    }

    /// The label as a scalar, `y ∈ {-1, +1}`.
    pub fn y(&self) -> T {
        if self.label > 0 {
            T::one()
        } else {
            -T::one()
        }
    }
}

/// The raw-label to canonical-label bijection of a dataset.
///
/// The smaller raw label maps to -1 and the larger to +1, so `{0, 1}` files
/// get `z = 2y - 1` and `{-1, +1}` files are unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelMap {
    pub negative: f64,
    pub positive: f64,
}

impl LabelMap {
    pub fn canonical(&self, raw: f64) -> Option<i8> {
        if raw == self.negative {
            Some(-1)
        } else if raw == self.positive {
            Some(1)
        } else {
            None
        }
    }

    pub fn raw(&self, label: i8) -> f64 {
        if label > 0 {
            self.positive
        } else {
            self.negative
        }
    }
}

/// Binary classification training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    samples: Vec<Sample<T>>,
    dim: usize,
    label_map: LabelMap,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset from raw-labelled feature vectors, canonicalizing the
    /// labels. The dimension is the largest vector dimension seen.
    pub fn from_raw(rows: Vec<(f64, SparseVector<T>)>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Size(rows.len()));
        }
        let mut distinct = Vec::<f64>::new();
        for (raw, _) in &rows {
            if !raw.is_finite() {
                return Err(Error::Schema(format!("non-finite label {raw}")));
            }
            if !distinct.contains(raw) {
                distinct.push(*raw);
            }
        }
        if distinct.len() != 2 {
            return Err(Error::Schema(format!(
                "expected exactly 2 distinct labels, found {}",
                distinct.len()
            )));
        }
        let (lo, hi) = if distinct[0] < distinct[1] {
            (distinct[0], distinct[1])
        } else {
            (distinct[1], distinct[0])
        };
        let label_map = LabelMap {
            negative: lo,
            positive: hi,
        };
        let dim = rows.iter().map(|(_, x)| x.dim()).max().unwrap_or(1).max(1);
        let samples = rows
            .into_iter()
            .map(|(raw, x)| Sample {
                features: x.with_dim(dim),
                label: label_map.canonical(raw).expect("label collected above"),
                raw_label: raw,
            })
            .collect();
        Ok(Self {
            samples,
            dim,
            label_map,
        })
    }

    /// Builds a dataset from samples that already carry ±1 labels.
    pub fn from_samples(samples: Vec<Sample<T>>) -> Result<Self> {
        Self::from_raw(
            samples
                .into_iter()
                .map(|s| (s.label as f64, s.features))
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Sample<T> {
        &self.samples[i]
    }

    pub fn label_map(&self) -> LabelMap {
        self.label_map
    }

    /// Divides every feature by its largest absolute value over the dataset.
    pub fn scaled_max_abs(&self) -> Self {
        let mut max_abs = vec![T::zero(); self.dim];
        for s in &self.samples {
            for (i, v) in s.features.iter() {
                max_abs[i - 1] = max_abs[i - 1].max(v.abs());
            }
        }
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let x = &s.features;
                let values = x
                    .iter()
                    .map(|(i, v)| v / max_abs[i - 1])
                    .collect::<Vec<_>>();
                Sample {
                    features: SparseVector {
                        indices: x.indices.clone(),
                        values,
                        dim: x.dim,
                    },
                    ..s.clone()
                }
            })
            .collect();
        Self {
            samples,
            dim: self.dim,
            label_map: self.label_map,
        }
    }
}

/// Parses LIBSVM text: one `label idx:val ...` sample per line.
///
/// Blank lines and lines starting with `#` are skipped. Tokens may be
/// separated by any run of ASCII whitespace.
pub fn parse_libsvm<T: Scalar, R: BufRead>(reader: R) -> Result<Dataset<T>> {
    let mut rows = Vec::new();
    let mut max_index = 0usize;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_ascii_whitespace();
        let label_tok = tokens.next().expect("line is non-empty");
        let raw: f64 = label_tok
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(lineno, format!("invalid label `{label_tok}`")))?;

        let mut entries = Vec::new();
        let mut prev = 0usize;
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:val, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| parse_err(lineno, format!("invalid index `{idx}`")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "indices are 1-based, got 0".into()));
            }
            if idx == prev {
                return Err(parse_err(lineno, format!("duplicate index {idx}")));
            }
            if idx < prev {
                return Err(parse_err(
                    lineno,
                    format!("index {idx} is not ascending (follows {prev})"),
                ));
            }
            let v: T = val
                .parse()
                .ok()
                .filter(|v: &T| v.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("invalid value `{val}`")))?;
            prev = idx;
            entries.push((idx, v));
        }
        max_index = max_index.max(prev);
        rows.push((raw, entries));
    }
    let dim = max_index.max(1);
    let rows = rows
        .into_iter()
        .map(|(raw, entries)| SparseVector::new(entries, dim).map(|x| (raw, x)))
        .collect::<Result<Vec<_>>>()?;
    Dataset::from_raw(rows)
}

fn parse_err(line: usize, message: String) -> Error {
    Error::Parse { line, message }
}

pub fn parse_libsvm_str<T: Scalar>(text: &str) -> Result<Dataset<T>> {
    parse_libsvm(text.as_bytes())
}

pub fn read_libsvm_file<T: Scalar>(path: impl AsRef<Path>) -> Result<Dataset<T>> {
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file))
}

/// Writes a dataset back in LIBSVM form using the raw labels.
pub fn write_libsvm<T: Scalar, W: Write>(dataset: &Dataset<T>, mut out: W) -> io::Result<()> {
    let mut line = String::new();
    for s in dataset.samples() {
        line.clear();
        write!(line, "{}", s.raw_label).expect("writing to a String");
        for (i, v) in s.features.iter() {
            write!(line, " {i}:{v}").expect("writing to a String");
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

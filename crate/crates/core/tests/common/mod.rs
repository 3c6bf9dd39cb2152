//! Test-only oracles. Nothing here calls into the code paths it checks:
//! gradients are dense, inner products are plain loops, the pairing
//! reference is a literal transcription of the greedy loop, and variances
//! come from enumerating every batch.
#![allow(dead_code, clippy::needless_range_loop)]

use antisgd::{Dataset64, LossModel64, Sample64, SparseVector64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random dataset with features on a half-integer grid (so dense and sparse
/// inner products are exact and ties are common). Samples 0 and 1 carry
/// opposite labels so both classes are always present.
pub fn grid_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize, density: f64) -> Dataset64 {
    let rows = (0..n)
        .map(|i| {
            let label = match i {
                0 => 1.0,
                1 => -1.0,
                _ if rng.random_bool(0.5) => 1.0,
                _ => -1.0,
            };
            let mut entries = Vec::new();
            for k in 1..=dim {
                if rng.random_bool(density) {
                    entries.push((k, rng.random_range(-4i32..=4) as f64 / 2.0));
                }
            }
            (label, SparseVector64::new(entries, dim).unwrap())
        })
        .collect();
    Dataset64::from_raw(rows).unwrap()
}

/// Random dataset with continuous features in `[-scale, scale]`.
pub fn real_dataset(
    rng: &mut ChaCha8Rng,
    n: usize,
    dim: usize,
    density: f64,
    scale: f64,
) -> Dataset64 {
    let rows = (0..n)
        .map(|i| {
            let label = match i {
                0 => 1.0,
                1 => -1.0,
                _ if rng.random_bool(0.5) => 1.0,
                _ => -1.0,
            };
            let mut entries = Vec::new();
            for k in 1..=dim {
                if rng.random_bool(density) {
                    entries.push((k, rng.random_range(-scale..scale)));
                }
            }
            (label, SparseVector64::new(entries, dim).unwrap())
        })
        .collect();
    Dataset64::from_raw(rows).unwrap()
}

pub fn random_w(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn dense_x(s: &Sample64, dim: usize) -> Vec<f64> {
    let mut x = vec![0.0; dim];
    for (&k, &v) in s.features.indices().iter().zip(s.features.values()) {
        x[k - 1] = v;
    }
    x
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..a.len() {
        acc += a[k] * b[k];
    }
    acc
}

pub fn y(s: &Sample64) -> f64 {
    s.label as f64
}

/// Reference metric `y_i y_j x_i'x_j` over dense copies.
pub fn ref_metric(ds: &Dataset64, i: usize, j: usize) -> f64 {
    let d = ds.dim();
    let (a, b) = (ds.sample(i), ds.sample(j));
    y(a) * y(b) * inner(&dense_x(a, d), &dense_x(b, d))
}

/// Literal greedy loop: every i in order takes the pool member j != i with
/// the smallest metric (first found wins ties) and j leaves the pool. When
/// only i itself remains, i swaps into the assigned pair (p, S[p]) with the
/// smallest metric(i, S[p]).
pub fn reference_table(ds: &Dataset64) -> Vec<usize> {
    let n = ds.n();
    let mut s = vec![usize::MAX; n];
    let mut in_db = vec![true; n];
    for i in 0..n {
        let mut best: Option<(f64, usize)> = None;
        for j in 0..n {
            if !in_db[j] || j == i {
                continue;
            }
            let m = ref_metric(ds, i, j);
            if best.is_none() || m < best.unwrap().0 {
                best = Some((m, j));
            }
        }
        match best {
            Some((_, j)) => {
                s[i] = j;
                in_db[j] = false;
            }
            None => {
                let mut best_p: Option<(f64, usize)> = None;
                for p in 0..n {
                    if p == i {
                        continue;
                    }
                    let m = ref_metric(ds, i, s[p]);
                    if best_p.is_none() || m < best_p.unwrap().0 {
                        best_p = Some((m, p));
                    }
                }
                let p = best_p.unwrap().1;
                s[i] = s[p];
                s[p] = i;
            }
        }
    }
    s
}

/// Dense per-sample data-gradient `∇g_i(w)` from the closed forms.
pub fn ref_data_grad(model: &LossModel64, w: &[f64], ds: &Dataset64, i: usize) -> Vec<f64> {
    let s = ds.sample(i);
    let x = dense_x(s, ds.dim());
    let m = y(s) * inner(w, &x);
    let c = match model.kind() {
        antisgd::LossKind::HingeL2 => {
            if m <= 1.0 {
                -y(s)
            } else {
                0.0
            }
        }
        _ => -y(s) / (1.0 + m.exp()),
    };
    x.iter().map(|v| c * v).collect()
}

/// Dense `∇f_i(w) = ∇g_i(w) + λw`.
pub fn ref_grad(model: &LossModel64, w: &[f64], ds: &Dataset64, i: usize) -> Vec<f64> {
    let mut g = ref_data_grad(model, w, ds, i);
    for k in 0..g.len() {
        g[k] += model.lambda() * w[k];
    }
    g
}

pub fn ref_full_grad(model: &LossModel64, w: &[f64], ds: &Dataset64) -> Vec<f64> {
    let n = ds.n();
    let mut acc = vec![0.0; ds.dim()];
    for i in 0..n {
        let g = ref_grad(model, w, ds, i);
        for k in 0..acc.len() {
            acc[k] += g[k];
        }
    }
    acc.iter().map(|v| v / n as f64).collect()
}

/// `‖g_B - E g‖²` for every batch `B` of a list of equally likely batches.
pub fn batch_deviations(
    model: &LossModel64,
    w: &[f64],
    ds: &Dataset64,
    batches: &[Vec<usize>],
) -> Vec<f64> {
    let grads: Vec<Vec<f64>> = (0..ds.n()).map(|i| ref_grad(model, w, ds, i)).collect();
    let dim = ds.dim();
    let batch_means: Vec<Vec<f64>> = batches
        .iter()
        .map(|b| {
            let mut g = vec![0.0; dim];
            for &i in b {
                for k in 0..dim {
                    g[k] += grads[i][k];
                }
            }
            g.iter().map(|v| v / b.len() as f64).collect()
        })
        .collect();
    let mut mean = vec![0.0; dim];
    for g in &batch_means {
        for k in 0..dim {
            mean[k] += g[k] / batch_means.len() as f64;
        }
    }
    batch_means
        .iter()
        .map(|g| {
            let mut d = 0.0;
            for k in 0..dim {
                d += (g[k] - mean[k]) * (g[k] - mean[k]);
            }
            d
        })
        .collect()
}

fn variance_over(model: &LossModel64, w: &[f64], ds: &Dataset64, batches: &[Vec<usize>]) -> f64 {
    let dev = batch_deviations(model, w, ds, batches);
    dev.iter().sum::<f64>() / dev.len() as f64
}

/// Every equally likely uniform batch of size `b`.
pub fn uniform_batches(n: usize, b: usize) -> Vec<Vec<usize>> {
    tuples(n, b)
}

/// Every equally likely antithetic batch of size `b`.
pub fn antithetic_batches(partners: &[usize], b: usize) -> Vec<Vec<usize>> {
    tuples(partners.len(), b / 2)
        .into_iter()
        .map(|heads| heads.iter().flat_map(|&i| [i, partners[i]]).collect())
        .collect()
}

/// All `n^len` index tuples.
pub fn tuples(n: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..n).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

/// Variance by enumerating all `n^b` uniform batches.
pub fn enumerate_uniform(model: &LossModel64, w: &[f64], ds: &Dataset64, b: usize) -> f64 {
    variance_over(model, w, ds, &uniform_batches(ds.n(), b))
}

/// Variance by enumerating all `n^(b/2)` tuples of pair heads.
pub fn enumerate_antithetic(
    model: &LossModel64,
    w: &[f64],
    ds: &Dataset64,
    partners: &[usize],
    b: usize,
) -> f64 {
    variance_over(model, w, ds, &antithetic_batches(partners, b))
}

/// Central finite difference of `f` at `w` along coordinate `k`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, w: &[f64], k: usize, h: f64) -> f64 {
    let mut plus = w.to_vec();
    let mut minus = w.to_vec();
    plus[k] += h;
    minus[k] -= h;
    (f(&plus) - f(&minus)) / (2.0 * h)
}

/// Pearson chi-square statistic of observed counts against a uniform law.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}

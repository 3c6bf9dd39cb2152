//! Closed-form variance of the mini-batch gradient under both sampling
//! strategies, plus a Monte-Carlo estimator to cross-check them.
//!
//! "Variance" is the trace of the covariance, `E‖g_t - ∇f(w)‖²`, which is
//! `E‖g_t‖² - ‖∇f(w)‖²`.

use log::warn;

use crate::antithetic::AntitheticTable;
use crate::data::{dense_dot, dot, Dataset};
use crate::error::{Error, Result};
use crate::losses::{add_scaled, check_finite, count, LossModel};
use crate::sampling::{Sampler, Strategy};
use crate::scalar::{dense_inner, norm_sq, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport<T> {
    pub strategy: Strategy,
    pub batch_size: usize,
    /// `E‖g_t - ∇f‖²`, clamped at zero.
    pub variance: T,
    /// `E‖g_t‖²`
    pub second_moment: T,
    /// `‖∇f(w)‖²`
    pub full_grad_norm_sq: T,
    /// `(1/n) Σ ⟨∇f_i, ∇f_{S[i]}⟩`, antithetic reports only.
    pub mean_pair_inner: Option<T>,
    /// `mean_pair_inner - ‖∇f‖²`, antithetic reports only.
    pub covariance: Option<T>,
}

/// Relative tolerance of the internal identity checks.
fn tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e4))
}

/// Per-sample quantities shared by both closed forms. With `h = λw`,
/// `∇f_i = c_i x_i + h`.
struct Moments<T> {
    coef: Vec<T>,
    norm_x: Vec<T>,
    x_dot_h: Vec<T>,
    h_sq: T,
    /// `(1/n) Σ ∇g_i`
    mean_data: Vec<T>,
    /// `∇f = mean_data + h`
    full: Vec<T>,
}

impl<T: Scalar> Moments<T> {
    fn new(model: &LossModel<T>, w: &[T], dataset: &Dataset<T>) -> Result<Self> {
        check_finite(w)?;
        let n = dataset.n();
        let lambda = model.lambda();
        let h: Vec<T> = w.iter().map(|&wi| lambda * wi).collect();
        let mut coef = Vec::with_capacity(n);
        let mut norm_x = Vec::with_capacity(n);
        let mut x_dot_h = Vec::with_capacity(n);
        let mut mean_data = vec![T::zero(); w.len()];
        for s in dataset.samples() {
            let score = dense_dot(w, &s.features)?;
            let c = model.coefficient_at(score, s);
            add_scaled(&mut mean_data, c, &s.features);
            coef.push(c);
            norm_x.push(s.features.norm_sq());
            x_dot_h.push(dense_dot(&h, &s.features)?);
        }
        let inv_n = T::one() / count::<T>(n);
        mean_data.iter_mut().for_each(|v| *v = *v * inv_n);
        let full = mean_data.iter().zip(&h).map(|(&m, &hk)| m + hk).collect();
        Ok(Self {
            coef,
            norm_x,
            x_dot_h,
            h_sq: norm_sq(&h),
            mean_data,
            full,
        })
    }

    fn n(&self) -> T {
        count(self.coef.len())
    }

    /// `‖∇f_i‖²`
    fn full_sq(&self, i: usize) -> T {
        let c = self.coef[i];
        c * c * self.norm_x[i] + T::lit(2.0) * c * self.x_dot_h[i] + self.h_sq
    }

    /// `‖∇g_i‖²`
    fn data_sq(&self, i: usize) -> T {
        self.coef[i] * self.coef[i] * self.norm_x[i]
    }

    fn full_norm_sq(&self) -> T {
        norm_sq(&self.full)
    }

    /// `Var(∇f_i)` for a uniformly drawn `i`, checked against the
    /// regularizer-free computation.
    fn single_variance(&self) -> Result<T> {
        let n = self.n();
        let m2: T = (0..self.coef.len()).map(|i| self.full_sq(i)).sum::<T>() / n;
        let var = m2 - self.full_norm_sq();
        let data_m2: T = (0..self.coef.len()).map(|i| self.data_sq(i)).sum::<T>() / n;
        let data_var = data_m2 - norm_sq(&self.mean_data);
        agree("regularizer cancellation", var, data_var, m2)?;
        Ok(var)
    }
}

fn agree<T: Scalar>(what: &str, a: T, b: T, scale: T) -> Result<()> {
    if (a - b).abs() <= tolerance::<T>() * scale.abs().max(T::one()) {
        Ok(())
    } else {
        Err(Error::Consistency(format!("{what}: {a} vs {b}")))
    }
}

fn clamp_variance<T: Scalar>(variance: T, second_moment: T) -> Result<T> {
    if variance >= T::zero() {
        return Ok(variance);
    }
    if -variance <= tolerance::<T>() * second_moment.abs().max(T::one()) {
        warn!("clamping round-off variance {variance:e} to zero");
        Ok(T::zero())
    } else {
        Err(Error::Consistency(format!(
            "negative variance {variance:e}"
        )))
    }
}

/// Variance of the mean of `b` i.i.d. uniform per-sample gradients:
/// `Var(∇f_i) / b`.
pub fn exact_variance_uniform<T: Scalar>(
    model: &LossModel<T>,
    w: &[T],
    dataset: &Dataset<T>,
    b: usize,
) -> Result<VarianceReport<T>> {
    if b == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mom = Moments::new(model, w, dataset)?;
    let single = mom.single_variance()?;
    let full_sq = mom.full_norm_sq();
    let bt = count::<T>(b);
    // E‖g‖² = (1/b) E‖∇f_i‖² + (1 - 1/b) ‖∇f‖²
    let second_moment = (single + full_sq) / bt + (T::one() - T::one() / bt) * full_sq;
    let variance = clamp_variance(second_moment - full_sq, second_moment)?;
    Ok(VarianceReport {
        strategy: Strategy::Uniform,
        batch_size: b,
        variance,
        second_moment,
        full_grad_norm_sq: full_sq,
        mean_pair_inner: None,
        covariance: None,
    })
}

/// Variance of the mean of `b / 2` i.i.d. antithetic pairs.
///
/// One pair has `Var = (1/n) Σ ‖(∇f_i + ∇f_{S[i]})/2‖² - ‖∇f‖²`, which must
/// match `(Var(∇f_i) + Cov(∇f_i, ∇f_{S[i]})) / 2`; the two routes are
/// checked against each other.
pub fn exact_variance_antithetic<T: Scalar>(
    model: &LossModel<T>,
    w: &[T],
    dataset: &Dataset<T>,
    table: &AntitheticTable<T>,
    b: usize,
) -> Result<VarianceReport<T>> {
    if b == 0 || !b.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "antithetic batch size must be a positive even number, got {b}"
        )));
    }
    if table.len() != dataset.n() {
        return Err(Error::Consistency(format!(
            "table has {} rows, dataset has {} samples",
            table.len(),
            dataset.n()
        )));
    }
    let mom = Moments::new(model, w, dataset)?;
    let samples = dataset.samples();
    let n = mom.n();
    let quarter = T::lit(0.25);
    let two = T::lit(2.0);

    let mut pair_sq = T::zero();
    let mut data_pair_sq = T::zero();
    let mut inner = T::zero();
    for (i, &j) in table.partners().iter().enumerate() {
        let (ci, cj) = (mom.coef[i], mom.coef[j]);
        let cross = ci * cj * dot(&samples[i].features, &samples[j].features);
        let data_half_sq = (mom.data_sq(i) + mom.data_sq(j) + two * cross) * quarter;
        pair_sq = pair_sq + data_half_sq + ci * mom.x_dot_h[i] + cj * mom.x_dot_h[j] + mom.h_sq;
        data_pair_sq = data_pair_sq + data_half_sq;
        inner = inner + cross + ci * mom.x_dot_h[i] + cj * mom.x_dot_h[j] + mom.h_sq;
    }
    pair_sq = pair_sq / n;
    data_pair_sq = data_pair_sq / n;
    let mean_pair_inner = inner / n;

    let full_sq = mom.full_norm_sq();
    let pair_var = pair_sq - full_sq;
    let single = mom.single_variance()?;
    let covariance = mean_pair_inner - full_sq;
    agree(
        "pair variance identity",
        pair_var,
        (single + covariance) / two,
        pair_sq,
    )?;
    agree(
        "regularizer cancellation",
        pair_var,
        data_pair_sq - norm_sq(&mom.mean_data),
        pair_sq,
    )?;

    let k = count::<T>(b / 2);
    let second_moment = pair_sq / k + (T::one() - T::one() / k) * full_sq;
    let variance = clamp_variance(second_moment - full_sq, second_moment)?;
    Ok(VarianceReport {
        strategy: Strategy::Antithetic,
        batch_size: b,
        variance,
        second_moment,
        full_grad_norm_sq: full_sq,
        mean_pair_inner: Some(mean_pair_inner),
        covariance: Some(covariance),
    })
}

/// Exact variance for whichever strategy `table` implies.
pub fn exact_variance<T: Scalar>(
    model: &LossModel<T>,
    w: &[T],
    dataset: &Dataset<T>,
    strategy: Strategy,
    table: Option<&AntitheticTable<T>>,
    b: usize,
) -> Result<VarianceReport<T>> {
    match strategy {
        Strategy::Uniform => exact_variance_uniform(model, w, dataset, b),
        Strategy::Antithetic => {
            let table = table.ok_or_else(|| {
                Error::Config("antithetic variance needs an antithetic table".into())
            })?;
            exact_variance_antithetic(model, w, dataset, table, b)
        }
    }
}

/// Monte-Carlo estimate `(1/trials) Σ ‖g_t - ∇f(w)‖²` over batches drawn
/// from `sampler`.
pub fn empirical_variance<T: Scalar>(
    model: &LossModel<T>,
    w: &[T],
    dataset: &Dataset<T>,
    sampler: &mut Sampler<'_, T>,
    trials: usize,
) -> Result<T> {
    if trials < 2 {
        return Err(Error::Config(format!(
            "need at least 2 trials, got {trials}"
        )));
    }
    let samples = dataset.samples();
    let full = model.full_gradient(w, samples)?;
    let coef: Vec<T> = samples
        .iter()
        .map(|s| dense_dot(w, &s.features).map(|u| model.coefficient_at(u, s)))
        .collect::<Result<_>>()?;
    let lambda = model.lambda();
    let h: Vec<T> = w.iter().map(|&wi| lambda * wi).collect();
    let mut batch = Vec::new();
    let mut g = vec![T::zero(); w.len()];
    let mut acc = T::zero();
    for _ in 0..trials {
        sampler.fill(&mut batch);
        let inv_b = T::one() / count::<T>(batch.len());
        g.copy_from_slice(&h);
        for &s in &batch {
            add_scaled(&mut g, coef[s] * inv_b, &samples[s].features);
        }
        let dev: T = g
            .iter()
            .zip(&full)
            .fold(T::zero(), |a, (&gk, &fk)| a + (gk - fk) * (gk - fk));
        acc = acc + dev;
    }
    Ok(acc / count::<T>(trials))
}

/// `(1/n) Σ ⟨∇f_i, ∇f_{S[i]}⟩` computed densely from per-sample gradients.
/// Slow; kept for diagnostics and tests.
pub fn mean_pair_inner_dense<T: Scalar>(
    model: &LossModel<T>,
    w: &[T],
    dataset: &Dataset<T>,
    table: &AntitheticTable<T>,
) -> Result<T> {
    let samples = dataset.samples();
    let grads: Vec<Vec<T>> = samples
        .iter()
        .map(|s| model.sample_grad(w, s))
        .collect::<Result<_>>()?;
    let total: T = (0..samples.len())
        .map(|i| dense_inner(&grads[i], &grads[table.partner(i)]))
        .sum();
    Ok(total / count::<T>(samples.len()))
}

//! Per-sample objectives and (sub-)gradients for L2-regularized linear
//! classifiers.
//!
//! Every per-sample objective splits as `f_i(w) = g_i(w) + h(w)` with
//! `h(w) = (λ/2)‖w‖²`. The data part always has a gradient of the form
//! `∇g_i(w) = c_i(w) · x_i`, so most of the crate works with the scalar
//! coefficient `c_i` instead of materializing dense vectors.

use crate::data::{dense_dot, Sample, SparseVector};
use crate::error::{Error, Result};
use crate::scalar::{norm_sq, Scalar};

/// Dense gradient of length `dim`.
pub type GradientVector<T> = Vec<T>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    /// `log(1 + exp(-y w'x))` with labels in {-1, +1}.
    LogisticPm1,
    /// Negative log-likelihood with labels in {0, 1}; the ±1 labels of a
    /// dataset are read back as `(z + 1) / 2`.
    Logistic01,
    /// `max(0, 1 - y w'x)`, always with an L2 term.
    HingeL2,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::LogisticPm1 => "logistic",
            LossKind::Logistic01 => "logistic01",
            LossKind::HingeL2 => "svm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossModel<T> {
    kind: LossKind,
    lambda: T,
}

impl<T: Scalar> LossModel<T> {
    pub fn new(kind: LossKind, lambda: T) -> Result<Self> {
        if !lambda.is_finite() || lambda < T::zero() {
            return Err(Error::Config(format!(
                "lambda must be finite and non-negative, got {lambda}"
            )));
        }
        if kind == LossKind::HingeL2 && lambda == T::zero() {
            return Err(Error::Config("the hinge model needs lambda > 0".into()));
        }
        Ok(Self { kind, lambda })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// `(λ/2)‖w‖²`
    pub fn regularizer(&self, w: &[T]) -> T {
        if self.lambda == T::zero() {
            T::zero()
        } else {
            self.lambda * T::lit(0.5) * norm_sq(w)
        }
    }

    /// Data-dependent loss `g_i(w)` given the raw score `u = w'x`.
    pub(crate) fn data_loss_at(&self, score: T, sample: &Sample<T>) -> T {
        let y = sample.y();
        match self.kind {
            LossKind::LogisticPm1 => (-y * score).softplus(),
            LossKind::Logistic01 => {
                let y01 = (y + T::one()) * T::lit(0.5);
                score.softplus() - y01 * score
            }
            LossKind::HingeL2 => (T::one() - y * score).max(T::zero()),
        }
    }

    /// Coefficient `c` with `∇g_i(w) = c · x_i`, given `u = w'x`.
    ///
    /// Both logistic forms share this path: with `z = 2y - 1` the 0/1
    /// gradient `(μ - y) x` equals `-σ(-z u) z x`.
    pub(crate) fn coefficient_at(&self, score: T, sample: &Sample<T>) -> T {
        let y = sample.y();
        let margin = y * score;
        match self.kind {
            LossKind::LogisticPm1 | LossKind::Logistic01 => -(-margin).sigmoid() * y,
            // The indicator includes the kink: margin == 1 takes -y x.
            LossKind::HingeL2 => {
                if margin <= T::one() {
                    -y
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `w'x` after the domain and dimension checks.
    pub fn score(&self, w: &[T], sample: &Sample<T>) -> Result<T> {
        check_finite(w)?;
        dense_dot(w, &sample.features)
    }

    /// Gradient coefficient of the data term, see [`LossModel::coefficient_at`].
    pub fn data_coefficient(&self, w: &[T], sample: &Sample<T>) -> Result<T> {
        let score = self.score(w, sample)?;
        Ok(self.coefficient_at(score, sample))
    }

    /// `f_i(w) = g_i(w) + (λ/2)‖w‖²`
    pub fn sample_loss(&self, w: &[T], sample: &Sample<T>) -> Result<T> {
        let score = self.score(w, sample)?;
        Ok(self.data_loss_at(score, sample) + self.regularizer(w))
    }

    /// `∇f_i(w) = ∇g_i(w) + λw`
    pub fn sample_grad(&self, w: &[T], sample: &Sample<T>) -> Result<GradientVector<T>> {
        let c = self.data_coefficient(w, sample)?;
        let mut g: Vec<T> = w.iter().map(|&wi| self.lambda * wi).collect();
        add_scaled(&mut g, c, &sample.features);
        Ok(g)
    }

    /// `∇g_i(w)` alone, without the regularizer.
    pub fn data_grad(&self, w: &[T], sample: &Sample<T>) -> Result<GradientVector<T>> {
        let c = self.data_coefficient(w, sample)?;
        let mut g = vec![T::zero(); w.len()];
        add_scaled(&mut g, c, &sample.features);
        Ok(g)
    }

    /// Mean of [`LossModel::sample_loss`] over `samples`; the regularizer is
    /// counted once.
    pub fn full_objective(&self, w: &[T], samples: &[Sample<T>]) -> Result<T> {
        check_finite(w)?;
        check_nonempty(samples)?;
        let mut acc = T::zero();
        for s in samples {
            let score = dense_dot(w, &s.features)?;
            acc = acc + self.data_loss_at(score, s);
        }
        Ok(acc / count::<T>(samples.len()) + self.regularizer(w))
    }

    /// Mean of [`LossModel::sample_grad`] over `samples`.
    pub fn full_gradient(&self, w: &[T], samples: &[Sample<T>]) -> Result<GradientVector<T>> {
        check_finite(w)?;
        check_nonempty(samples)?;
        let mut g = vec![T::zero(); w.len()];
        for s in samples {
            let score = dense_dot(w, &s.features)?;
            add_scaled(&mut g, self.coefficient_at(score, s), &s.features);
        }
        let inv_n = T::one() / count::<T>(samples.len());
        for (gi, &wi) in g.iter_mut().zip(w) {
            *gi = *gi * inv_n + self.lambda * wi;
        }
        Ok(g)
    }
}

pub(crate) fn check_finite<T: Scalar>(w: &[T]) -> Result<()> {
    match w.iter().position(|v| !v.is_finite()) {
        Some(k) => Err(Error::Domain(format!("w[{k}] = {} is not finite", w[k]))),
        None => Ok(()),
    }
}

fn check_nonempty<T>(samples: &[T]) -> Result<()> {
    if samples.is_empty() {
        Err(Error::Size(0))
    } else {
        Ok(())
    }
}

pub(crate) fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("sample counts fit in any float")
}

/// `g += c · x` for a dense `g` already long enough for `x`.
pub(crate) fn add_scaled<T: Scalar>(g: &mut [T], c: T, x: &SparseVector<T>) {
    if c == T::zero() {
        return;
    }
    for (i, v) in x.iter() {
        g[i - 1] = g[i - 1] + c * v;
    }
}

//! Stochastic gradient descent with antithetic pair sampling for linear
//! binary classifiers.
//!
//! Each training sample is paired once, ahead of time, with the sample that
//! minimizes `y_i y_j ⟨x_i, x_j⟩` among those still unpaired. Mini-batches
//! are then drawn as `(i, S[i])` pairs. Because the pairing is a
//! permutation, the mini-batch gradient stays unbiased, and because the
//! paired gradients are negatively correlated, its variance drops.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`, which is what the tests and the bench
//! harness use.

pub mod antithetic;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod optimizer;
pub mod sampling;
pub mod scalar;

pub use antithetic::{
    build_table, build_table_indexed, pairing_metric, pairing_stats, read_table, write_table,
    AntitheticTable, PairingStats, TableRows, TableViolation,
};
pub use data::{
    axpy, dense_dot, dot, parse_libsvm, parse_libsvm_str, read_libsvm_file, write_libsvm, Dataset,
    LabelMap, Sample, SparseVector,
};
pub use error::{Error, Result};
pub use losses::{GradientVector, LossKind, LossModel};
pub use metrics::{
    empirical_variance, exact_variance, exact_variance_antithetic, exact_variance_uniform,
    VarianceReport,
};
pub use optimizer::{
    run, run_observed, RunConfig, RunOutput, StepInfo, StepSchedule, TraceRecord, VarianceMode,
};
pub use sampling::{BatchRng, MiniBatch, Sampler, SamplerConfig, Strategy};
pub use scalar::Scalar;

pub type SparseVector64 = SparseVector<f64>;
pub type Sample64 = Sample<f64>;
pub type Dataset64 = Dataset<f64>;
pub type LossModel64 = LossModel<f64>;
pub type AntitheticTable64 = AntitheticTable<f64>;
pub type RunConfig64 = RunConfig<f64>;
pub type TraceRecord64 = TraceRecord<f64>;
pub type VarianceReport64 = VarianceReport<f64>;

pub type Dataset32 = Dataset<f32>;
pub type LossModel32 = LossModel<f32>;
pub type AntitheticTable32 = AntitheticTable<f32>;

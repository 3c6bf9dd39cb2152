mod common;

use antisgd::metrics::mean_pair_inner_dense;
use antisgd::{
    build_table, empirical_variance, exact_variance, exact_variance_antithetic,
    exact_variance_uniform, parse_libsvm_str, AntitheticTable64, LossKind, LossModel64, Sampler,
    SamplerConfig, Strategy,
};
use common::{enumerate_antithetic, enumerate_uniform, grid_dataset, random_w, real_dataset};
use rand::Rng;

const KINDS: [LossKind; 3] = [
    LossKind::LogisticPm1,
    LossKind::Logistic01,
    LossKind::HingeL2,
];

fn model(kind: LossKind, lambda: f64) -> LossModel64 {
    let lambda = if kind == LossKind::HingeL2 {
        lambda.max(1e-3)
    } else {
        lambda
    };
    LossModel64::new(kind, lambda).unwrap()
}

#[test]
fn closed_forms_match_enumeration() {
    let mut rng = common::rng(0xB01);
    for case in 0..240 {
        let n = rng.random_range(2..=6);
        let ds = real_dataset(&mut rng, n, 4, 0.7, 1.5);
        let table = build_table(&ds).unwrap();
        let kind = KINDS[case % 3];
        let m = model(kind, [0.0, 0.01, 0.3][case % 3]);
        let w = random_w(&mut rng, ds.dim(), 2.0);
        for b in 1..=4 {
            let exact = exact_variance_uniform(&m, &w, &ds, b).unwrap().variance;
            let brute = enumerate_uniform(&m, &w, &ds, b);
            assert!(
                (exact - brute).abs() <= 1e-12,
                "uniform case {case} b {b}: {exact} vs {brute}"
            );
        }
        for b in [2, 4] {
            let exact = exact_variance_antithetic(&m, &w, &ds, &table, b)
                .unwrap()
                .variance;
            let brute = enumerate_antithetic(&m, &w, &ds, table.partners(), b);
            assert!(
                (exact - brute).abs() <= 1e-12,
                "antithetic case {case} b {b}: {exact} vs {brute}"
            );
        }
    }
}

#[test]
fn reports_are_internally_consistent() {
    let mut rng = common::rng(0xB02);
    for case in 0..50 {
        let ds = real_dataset(&mut rng, 30, 5, 0.6, 1.0);
        let table = build_table(&ds).unwrap();
        let m = model(KINDS[case % 3], 0.05);
        let w = random_w(&mut rng, ds.dim(), 1.0);
        let u = exact_variance_uniform(&m, &w, &ds, 2).unwrap();
        let a = exact_variance_antithetic(&m, &w, &ds, &table, 2).unwrap();
        assert_eq!(u.full_grad_norm_sq, a.full_grad_norm_sq);
        let var_single = 2.0 * u.variance;
        let cov = a.covariance.unwrap();
        // Pair variance is half of (Var + Cov).
        assert!((a.variance - (var_single + cov) / 2.0).abs() <= 1e-10 * a.second_moment.max(1.0));
        let dense = mean_pair_inner_dense(&m, &w, &ds, &table).unwrap();
        assert!((a.mean_pair_inner.unwrap() - dense).abs() <= 1e-12 * dense.abs().max(1.0));
        let via_dispatch =
            exact_variance(&m, &w, &ds, Strategy::Antithetic, Some(&table), 2).unwrap();
        assert_eq!(via_dispatch, a);
        assert!(exact_variance(&m, &w, &ds, Strategy::Antithetic, None, 2).is_err());
    }
}

#[test]
fn reduction_iff_negative_covariance() {
    let mut saw = [false; 2];
    let mut rng = common::rng(0xB03);
    for case in 0..200 {
        let ds = grid_dataset(&mut rng, 8, 3, 0.8);
        let m = model(KINDS[case % 3], 0.0);
        let w = random_w(&mut rng, ds.dim(), 1.5);
        // The greedy table usually gives Cov < 0; an arbitrary fixed pairing
        // lands on either side.
        let greedy = build_table(&ds).unwrap();
        let neighbours: Vec<usize> = (0..ds.n()).map(|i| i ^ 1).collect();
        for table in [
            greedy,
            AntitheticTable64::from_pairing(neighbours, &ds).unwrap(),
        ] {
            let u = exact_variance_uniform(&m, &w, &ds, 2).unwrap().variance;
            let a = exact_variance_antithetic(&m, &w, &ds, &table, 2).unwrap();
            let cov = a.covariance.unwrap();
            if cov.abs() < 1e-12 {
                continue;
            }
            assert_eq!(
                a.variance < u,
                cov < 0.0,
                "case {case}: var {} vs {u}, cov {cov}",
                a.variance
            );
            saw[(cov < 0.0) as usize] = true;
        }
    }
    assert_eq!(saw, [true, true]);
}

#[test]
fn constructed_covariance_signs() {
    // Same point, opposite labels: y·x flips sign within a pair.
    let anti = parse_libsvm_str::<f64>("1 1:1 2:2\n-1 1:1 2:2\n1 1:-3\n-1 1:-3").unwrap();
    // Pairing duplicates with each other.
    let same = parse_libsvm_str::<f64>("1 1:1 2:2\n1 1:1 2:2\n-1 1:3\n-1 1:3").unwrap();
    let m = LossModel64::new(LossKind::LogisticPm1, 0.0).unwrap();
    let w = [0.25, -0.5];

    let t = build_table(&anti).unwrap();
    let a = exact_variance_antithetic(&m, &w, &anti, &t, 2).unwrap();
    let u = exact_variance_uniform(&m, &w, &anti, 2).unwrap();
    assert!(a.covariance.unwrap() < 0.0 && a.variance < u.variance);

    let t = AntitheticTable64::from_pairing(vec![1, 0, 3, 2], &same).unwrap();
    let a = exact_variance_antithetic(&m, &w, &same, &t, 2).unwrap();
    let u = exact_variance_uniform(&m, &w, &same, 2).unwrap();
    assert!(a.covariance.unwrap() > 0.0 && a.variance > u.variance);
}

#[test]
fn zero_weight_law() {
    let mut rng = common::rng(0xB04);
    let m = LossModel64::new(LossKind::LogisticPm1, 0.0).unwrap();
    for _ in 0..40 {
        let n = rng.random_range(2..80);
        let ds = real_dataset(&mut rng, n, 7, 0.5, 2.0);
        let table = build_table(&ds).unwrap();
        let w = vec![0.0; ds.dim()];
        let a = exact_variance_antithetic(&m, &w, &ds, &table, 2).unwrap();
        let metric_mean = table.metric_values().iter().sum::<f64>() / n as f64;
        let inner = a.mean_pair_inner.unwrap();
        assert!(
            (inner - 0.25 * metric_mean).abs() <= 1e-12,
            "{inner} vs {}",
            0.25 * metric_mean
        );
    }
}

#[test]
fn antipodal_pairs_have_zero_variance() {
    let ds = parse_libsvm_str::<f64>("1 1:1 2:1\n-1 1:1 2:1\n1 1:2 3:-1\n-1 1:2 3:-1").unwrap();
    let table = build_table(&ds).unwrap();
    let m = LossModel64::new(LossKind::LogisticPm1, 0.0).unwrap();
    let w = vec![0.0; ds.dim()];
    let a = exact_variance_antithetic(&m, &w, &ds, &table, 2).unwrap();
    let u = exact_variance_uniform(&m, &w, &ds, 2).unwrap();
    assert_eq!(a.variance, 0.0);
    assert!(u.variance > 0.0);
}

#[test]
fn monte_carlo_agrees_with_closed_form() {
    let mut rng = common::rng(0xB05);
    let trials = 20_000;
    for case in 0..6 {
        let ds = real_dataset(&mut rng, 12, 4, 0.7, 1.0);
        let table = build_table(&ds).unwrap();
        let m = model(KINDS[case % 3], 0.1);
        let w = random_w(&mut rng, ds.dim(), 1.0);
        for strategy in [Strategy::Uniform, Strategy::Antithetic] {
            let exact = exact_variance(&m, &w, &ds, strategy, Some(&table), 2)
                .unwrap()
                .variance;
            let cfg = SamplerConfig::new(strategy, 2, 1000 + case as u64).unwrap();
            let mut sampler = Sampler::new(cfg, ds.n(), Some(&table)).unwrap();
            let est = empirical_variance(&m, &w, &ds, &mut sampler, trials).unwrap();
            // Generous for a unit test; the acceptance suite pins the
            // standard-error bound with per-batch variance estimates.
            assert!(
                (est - exact).abs() <= 0.1 * exact.max(1e-12),
                "{strategy:?}: {est} vs {exact}"
            );
        }
    }
}

#[test]
fn regularizer_does_not_change_variance() {
    let mut rng = common::rng(0xB06);
    let ds = real_dataset(&mut rng, 20, 5, 0.6, 1.0);
    let table = build_table(&ds).unwrap();
    let w = random_w(&mut rng, ds.dim(), 1.0);
    // Same data coefficients at the same w; only λw differs.
    let a = LossModel64::new(LossKind::LogisticPm1, 0.0).unwrap();
    let b = LossModel64::new(LossKind::LogisticPm1, 0.7).unwrap();
    for bs in [1, 2, 6] {
        let (va, vb) = (
            exact_variance_uniform(&a, &w, &ds, bs).unwrap().variance,
            exact_variance_uniform(&b, &w, &ds, bs).unwrap().variance,
        );
        assert!((va - vb).abs() <= 1e-12 * va.max(1.0));
    }
    let (va, vb) = (
        exact_variance_antithetic(&a, &w, &ds, &table, 2)
            .unwrap()
            .variance,
        exact_variance_antithetic(&b, &w, &ds, &table, 2)
            .unwrap()
            .variance,
    );
    assert!((va - vb).abs() <= 1e-12 * va.max(1.0));
}

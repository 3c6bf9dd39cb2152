#![allow(clippy::needless_range_loop)]

mod common;

use antisgd::{build_table, parse_libsvm_str, LossKind, LossModel64};
use common::{central_diff, dense_x, inner, random_w, real_dataset, ref_full_grad, ref_grad, y};
use proptest::prelude::*;
use rand::Rng;

const KINDS: [LossKind; 3] = [
    LossKind::LogisticPm1,
    LossKind::Logistic01,
    LossKind::HingeL2,
];

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

#[test]
fn finite_differences() {
    let mut rng = common::rng(0xC01);
    for kind in KINDS {
        let model = LossModel64::new(kind, 0.05).unwrap();
        let mut checked = 0;
        while checked < 100 {
            let ds = real_dataset(&mut rng, 2, 6, 0.8, 1.0);
            let s = ds.sample(0);
            let w = random_w(&mut rng, ds.dim(), 1.5);
            let margin = model.score(&w, s).unwrap() * y(s);
            if kind == LossKind::HingeL2 && (margin - 1.0).abs() <= 1e-3 {
                continue;
            }
            let g = model.sample_grad(&w, s).unwrap();
            for k in 0..w.len() {
                let fd = central_diff(|v| model.sample_loss(v, s).unwrap(), &w, k, 1e-6);
                assert!(
                    rel_err(g[k], fd) < 1e-5,
                    "{kind:?} coord {k}: {} vs {fd}",
                    g[k]
                );
            }
            checked += 1;
        }
    }
}

#[test]
fn gradients_match_closed_forms() {
    let mut rng = common::rng(0xC02);
    for kind in KINDS {
        let model = LossModel64::new(kind, 0.2).unwrap();
        for _ in 0..50 {
            let ds = real_dataset(&mut rng, 10, 5, 0.6, 2.0);
            let w = random_w(&mut rng, ds.dim(), 2.0);
            for i in 0..ds.n() {
                let g = model.sample_grad(&w, ds.sample(i)).unwrap();
                let r = ref_grad(&model, &w, &ds, i);
                let d = model.data_grad(&w, ds.sample(i)).unwrap();
                for k in 0..g.len() {
                    assert!((g[k] - r[k]).abs() <= 1e-14 * r[k].abs().max(1.0));
                    assert_eq!(d[k] + 0.2 * w[k], g[k]);
                }
            }
            let full = model.full_gradient(&w, ds.samples()).unwrap();
            let r = ref_full_grad(&model, &w, &ds);
            for k in 0..full.len() {
                assert!((full[k] - r[k]).abs() <= 1e-13 * r[k].abs().max(1.0));
            }
        }
    }
}

#[test]
fn hinge_subgradient_inequality() {
    let mut rng = common::rng(0xC03);
    let model = LossModel64::new(LossKind::HingeL2, 0.1).unwrap();
    for _ in 0..1000 {
        let ds = real_dataset(&mut rng, 2, 5, 0.8, 1.0);
        let s = ds.sample(rng.random_range(0..2));
        let w = random_w(&mut rng, ds.dim(), 2.0);
        let v = random_w(&mut rng, ds.dim(), 2.0);
        let g = model.sample_grad(&w, s).unwrap();
        let step: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = model.sample_loss(&v, s).unwrap();
        let rhs = model.sample_loss(&w, s).unwrap() + inner(&g, &step);
        assert!(lhs >= rhs - 1e-12, "{lhs} < {rhs}");
    }
}

#[test]
fn hinge_kink_takes_active_branch() {
    let ds = parse_libsvm_str::<f64>("1 1:2\n-1 1:1").unwrap();
    let model = LossModel64::new(LossKind::HingeL2, 0.5).unwrap();
    let w = [0.5];
    let g = model.data_grad(&w, ds.sample(0)).unwrap();
    assert_eq!(g, vec![-2.0]);
}

#[test]
fn inner_product_bounds() {
    let mut rng = common::rng(0xC04);
    for kind in KINDS {
        let model = LossModel64::new(kind, 0.01).unwrap();
        let mut nonzero = 0;
        for _ in 0..1000 {
            let ds = real_dataset(&mut rng, 6, 5, 0.6, 1.0);
            let (i, j) = (rng.random_range(0..6), rng.random_range(0..6));
            let w = random_w(&mut rng, ds.dim(), 2.0);
            let gi = model.data_grad(&w, ds.sample(i)).unwrap();
            let gj = model.data_grad(&w, ds.sample(j)).unwrap();
            let g = inner(&gi, &gj);
            let (a, b) = (ds.sample(i), ds.sample(j));
            let m = y(a) * y(b) * inner(&dense_x(a, ds.dim()), &dense_x(b, ds.dim()));
            let tol = 1e-14 * m.abs().max(1.0);
            assert!(
                g >= m.min(0.0) - tol && g <= m.max(0.0) + tol,
                "{kind:?}: {g} outside [0, {m}]"
            );
            if m.abs() > 1e-12 {
                nonzero += 1;
                match kind {
                    LossKind::HingeL2 => {
                        assert!(g == 0.0 || (g - m).abs() <= tol, "{g} not in {{0, {m}}}")
                    }
                    _ => assert!(g / m > 0.0 && g / m < 1.0, "ratio {}", g / m),
                }
            }
        }
        assert!(nonzero > 500);
    }
}

/// With `z ∈ {0,1}` and `μ = σ(w'x)`, the data gradient is `(μ - z) x`.
#[test]
fn zero_one_gradient_factor() {
    let mut rng = common::rng(0xC05);
    let model = LossModel64::new(LossKind::Logistic01, 0.0).unwrap();
    for _ in 0..1000 {
        let ds = real_dataset(&mut rng, 6, 5, 0.6, 1.0);
        let (i, j) = (rng.random_range(0..6), rng.random_range(0..6));
        let w = random_w(&mut rng, ds.dim(), 2.0);
        let (a, b) = (ds.sample(i), ds.sample(j));
        let (xa, xb) = (dense_x(a, ds.dim()), dense_x(b, ds.dim()));
        let factor = |x: &[f64], label: i8| {
            let mu = 1.0 / (1.0 + (-inner(&w, x)).exp());
            let z = if label > 0 { 1.0 } else { 0.0 };
            mu - z
        };
        let c = (factor(&xa, a.label) * factor(&xb, b.label)).abs();
        assert!(c > 0.0 && c < 1.0);
        let g = inner(
            &model.data_grad(&w, a).unwrap(),
            &model.data_grad(&w, b).unwrap(),
        );
        let xx = inner(&xa, &xb);
        assert!(g.abs() <= xx.abs() + 1e-15);
        assert!((g.abs() - c * xx.abs()).abs() <= 1e-12);
    }
}

#[test]
fn zero_one_labels_match_signed_labels() {
    let mut rng = common::rng(0xC06);
    for _ in 0..50 {
        let mut zero_one = String::new();
        let mut signed = String::new();
        for i in 0..8 {
            let z = if i < 2 { i } else { rng.random_range(0..2) };
            let feats: String = (1..=4)
                .map(|k| format!(" {k}:{}", rng.random_range(-2.0..2.0f64)))
                .collect();
            zero_one.push_str(&format!("{z}{feats}\n"));
            signed.push_str(&format!("{}{feats}\n", 2 * z - 1));
        }
        let a = parse_libsvm_str::<f64>(&zero_one).unwrap();
        let b = parse_libsvm_str::<f64>(&signed).unwrap();
        let m01 = LossModel64::new(LossKind::Logistic01, 0.1).unwrap();
        let pm1 = LossModel64::new(LossKind::LogisticPm1, 0.1).unwrap();
        let w = random_w(&mut rng, 4, 3.0);
        for i in 0..8 {
            let (ga, gb) = (
                m01.sample_grad(&w, a.sample(i)).unwrap(),
                pm1.sample_grad(&w, b.sample(i)).unwrap(),
            );
            for k in 0..4 {
                assert!((ga[k] - gb[k]).abs() <= 1e-12);
            }
            let (la, lb) = (
                m01.sample_loss(&w, a.sample(i)).unwrap(),
                pm1.sample_loss(&w, b.sample(i)).unwrap(),
            );
            assert!((la - lb).abs() <= 1e-12 * lb.max(1.0));
        }
    }
}

#[test]
fn pair_average_is_unbiased() {
    let mut rng = common::rng(0xC07);
    for kind in KINDS {
        let model = LossModel64::new(kind, 0.03).unwrap();
        for _ in 0..5 {
            let ds = real_dataset(&mut rng, 100, 10, 0.4, 1.0);
            let table = build_table(&ds).unwrap();
            let w = random_w(&mut rng, ds.dim(), 1.0);
            let mut avg = vec![0.0; ds.dim()];
            for i in 0..ds.n() {
                let gi = model.sample_grad(&w, ds.sample(i)).unwrap();
                let gj = model.sample_grad(&w, ds.sample(table.partner(i))).unwrap();
                for k in 0..avg.len() {
                    avg[k] += 0.5 * (gi[k] + gj[k]) / ds.n() as f64;
                }
            }
            let full = model.full_gradient(&w, ds.samples()).unwrap();
            for k in 0..avg.len() {
                assert!((avg[k] - full[k]).abs() <= 1e-12, "{kind:?}");
            }
        }
    }
}

proptest! {
    #[test]
    fn logistic_losses_are_stable(score in -1e4f64..1e4, lambda in 0.0f64..1.0) {
        let ds = parse_libsvm_str::<f64>("1 1:1\n-1 1:1").unwrap();
        let model = LossModel64::new(LossKind::LogisticPm1, lambda).unwrap();
        let w = [score];
        for s in ds.samples() {
            let l = model.sample_loss(&w, s).unwrap();
            let g = model.sample_grad(&w, s).unwrap();
            prop_assert!(l.is_finite() && l >= 0.0);
            prop_assert!(g[0].is_finite());
        }
    }
}

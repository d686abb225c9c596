mod common;

use common::assert_within;
use flowlab_core::local_time::{lambda_field, local_time_field, InverseIntegral, SpaceGrid};
use flowlab_core::paths::{bessel3_path_to_level, brownian_path, brownian_path_with, split_at_max, Ceiling, StopRule};
use flowlab_core::rng::derive_stream;
use flowlab_core::stats::{ks_test, mean_and_se, KsReference, DEFAULT_ALPHA};
use flowlab_core::SamplePath;
use proptest::prelude::*;

fn kernel_local_time(p: &SamplePath, x: f64, bw: f64, upto: usize) -> f64 {
    let hits = p.values()[..upto].iter().filter(|&&w| (w - x).abs() < bw).count();
    hits as f64 * p.dt() / (2.0 * bw)
}

#[test]
fn exit_probability_from_the_middle() {
    let n = 10_000;
    let up = (0..n)
        .filter(|&i| {
            let mut s = derive_stream(601, i);
            brownian_path_with(1.0, 1e-3, StopRule::HitLevel(0.0), Ceiling::Reject(2.0), &mut s)
                .unwrap()
                .is_none()
        })
        .count();
    let p = up as f64 / n as f64;
    assert_within("P(T_2 < T_0)", p, 0.5, (0.25 / n as f64).sqrt(), 3.0, 0.0);
}

#[test]
fn local_time_at_start_is_exponential_with_mean_two() {
    // the fold ceiling leaves the law below 1.2 intact
    let (dt, bw) = (1e-4, 1e-2);
    let n = 4000;
    let l: Vec<f64> = (0..n)
        .map(|i| {
            let mut s = derive_stream(602, i);
            let p = brownian_path_with(1.0, dt, StopRule::HitLevel(0.0), Ceiling::Fold { level: 1.2, resume: 1.1 }, &mut s)
                .unwrap()
                .unwrap()
                .path;
            kernel_local_time(&p, 1.0, bw, p.len() - 1)
        })
        .collect();
    let (m, se) = mean_and_se(&l);
    assert_within("E l(T_0, 1)", m, 2.0, se, 3.0, 0.03);
    let cdf = |z: f64| 1.0 - (-z.max(0.0) / 2.0).exp();
    let r = ks_test("ray-knight", &l, KsReference::Cdf(&cdf), DEFAULT_ALPHA, 0.01).unwrap();
    assert!(r.pass, "D={} > {}", r.statistic, r.threshold);
}

#[test]
fn bessel3_local_time_before_level() {
    // l(T_1, 1/2) for Bessel(3) from 0 is the dimension-2 bridge at 1/2: mean 0.5
    let (dt, bw) = (1e-4, 1e-2);
    let l: Vec<f64> = (0..4000)
        .map(|i| {
            let p = bessel3_path_to_level(0.0, 1.0, dt, &mut derive_stream(603, i)).unwrap();
            kernel_local_time(&p, 0.5, bw, p.len() - 1)
        })
        .collect();
    let (m, se) = mean_and_se(&l);
    assert_within("E l(T_1, 1/2)", m, 0.5, se, 3.0, 0.01);
}

#[test]
fn occupation_density_integrates_to_elapsed_time() {
    let dt = 1e-4;
    let p = brownian_path(0.0, dt, StopRule::Horizon(2.0), &mut derive_stream(604, 0)).unwrap();
    let lo = p.values().iter().copied().fold(f64::INFINITY, f64::min) - 0.05;
    let grid = SpaceGrid::with_spacing(lo, p.max() + 0.05, 0.005).unwrap();
    let f = local_time_field(&p, grid, &[0.5, 1.0, 1.5], 0.01).unwrap();
    for (k, &t) in f.checkpoints.iter().enumerate() {
        assert!((f.occupation(k) - t).abs() < 0.01 * t.max(0.1), "t={t}: {}", f.occupation(k));
    }
}

#[test]
fn split_reassembles_path() {
    let p = brownian_path_with(1.0, 1e-3, StopRule::HitLevel(0.0), Ceiling::Reject(3.0), &mut derive_stream(605, 2))
        .unwrap()
        .unwrap()
        .path;
    let (pre, post) = split_at_max(&p).unwrap();
    assert_eq!(pre.last(), p.max());
    assert_eq!(post.last(), p.max());
    assert_eq!(pre.len() + post.len() - 1, p.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn local_time_is_monotone_and_lambda_nonnegative(seed in 0u64..1000, horizon in 0.05f64..0.5) {
        let dt = 1e-4;
        let p = brownian_path(0.0, dt, StopRule::Horizon(horizon), &mut derive_stream(606, seed)).unwrap();
        let lo = p.values().iter().copied().fold(f64::INFINITY, f64::min) - 0.05;
        let grid = SpaceGrid::with_spacing(lo, p.max() + 0.05, 0.01).unwrap();
        let f = local_time_field(&p, grid, &[horizon / 3.0, horizon / 2.0], 0.01).unwrap();
        for w in f.values.windows(2) {
            prop_assert!(w[0].iter().zip(&w[1]).all(|(a, b)| a <= b));
        }
        let lam = lambda_field(&f);
        prop_assert!(lam.values.iter().flatten().all(|&v| v >= 0.0));
        prop_assert!(lam.terminal_row().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn inverse_integral_is_additive_and_increasing(
        row in prop::collection::vec(0.0f64..3.0, 5..40),
        a in -0.5f64..1.5,
        b in -0.5f64..1.5,
        c in -0.5f64..1.5,
    ) {
        let grid = SpaceGrid::new(0.0, 1.0, row.len()).unwrap();
        let ii = InverseIntegral::new(grid, &row, 1e-3);
        let lhs = ii.integral(a, c);
        let rhs = ii.integral(a, b) + ii.integral(b, c);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
        let (lo, hi) = if a <= c { (a, c) } else { (c, a) };
        prop_assert!(ii.primitive(lo) <= ii.primitive(hi));
    }

    #[test]
    fn hit_rule_paths_end_at_level(seed in 0u64..500, x0 in 0.05f64..1.0) {
        let p = brownian_path(x0, 1e-3, StopRule::HitLevel(0.0), &mut derive_stream(607, seed));
        if let Ok(p) = p {
            prop_assert_eq!(p.last(), 0.0);
            prop_assert!(p.values()[..p.len() - 1].iter().all(|&v| v > 0.0));
        }
    }
}

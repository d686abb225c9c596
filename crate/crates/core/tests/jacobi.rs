mod common;

use common::{f, oracles};
use flowlab_core::besq;
use flowlab_core::jacobi::{generator_residual, simulate, skew_product, JacobiParams};
use flowlab_core::rng::derive_stream;
use flowlab_core::stats::{chi_square_quantile, ks_test, KsReference, DEFAULT_ALPHA};

/// `(Y_u, Y_{u+Δ})` from skew products of BESQ(d1) from `z0` and BESQ(d2)
/// from `z1`, on the ratio's own clock.
#[allow(clippy::too_many_arguments)]
fn skew_pairs(d1: f64, d2: f64, z0: f64, z1: f64, u: f64, delta: f64, n: u64, tag: u64) -> Vec<(f64, f64)> {
    let dt = 1e-3;
    (0..n)
        .filter_map(|i| {
            let mut s = derive_stream(tag, i);
            let z = besq::sample_path(d1, z0, dt, 1500, &mut s).unwrap();
            let zp = besq::sample_path(d2, z1, dt, 1500, &mut s).unwrap();
            let sp = skew_product(&z, &zp, 1e-6).unwrap();
            Some((sp.y.at(u)?, sp.y.at(u + delta)?))
        })
        .collect()
}

#[test]
fn skew_product_ratio_solves_the_martingale_problem() {
    let (u, delta) = (0.1, 0.02);
    let pairs = skew_pairs(2.0, 2.0, 1.0, 3.0, u, delta, 6000, 801);
    assert!(pairs.len() > 5000);
    let right = JacobiParams::new(2.0, 2.0).unwrap();
    for coeffs in [vec![0.0, 1.0], vec![0.0, 0.0, 1.0]] {
        let r = generator_residual(&pairs, delta, &right, &coeffs).unwrap();
        assert!(r.mean.abs() <= 3.0 * r.se + 2e-3, "f={coeffs:?}: {} ± {}", r.mean, r.se);
    }
}

#[test]
fn swapped_dimensions_are_detected() {
    let (u, delta) = (0.1, 0.02);
    let pairs = skew_pairs(1.0, 3.0, 1.0, 1.0, u, delta, 6000, 802);
    let right = JacobiParams::new(1.0, 3.0).unwrap();
    let wrong = JacobiParams::new(3.0, 1.0).unwrap();
    let ok = generator_residual(&pairs, delta, &right, &[0.0, 1.0]).unwrap();
    let bad = generator_residual(&pairs, delta, &wrong, &[0.0, 1.0]).unwrap();
    assert!(ok.mean.abs() <= 3.0 * ok.se + 2e-3, "{} ± {}", ok.mean, ok.se);
    assert!(bad.mean.abs() > 5.0 * bad.se, "{} ± {}", bad.mean, bad.se);
}

#[test]
fn symmetric_entrance_case_is_stationary_uniform() {
    let params = JacobiParams::new(2.0, 2.0).unwrap();
    let n = 4000;
    let bins = 20;
    let mut counts = vec![0usize; bins];
    for i in 0..n {
        let y = simulate(&params, 0.5, 5.0, 1e-3, &mut derive_stream(803, i)).unwrap().last();
        counts[((y * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let e = n as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    assert!(chi2 < chi_square_quantile((bins - 1) as f64, DEFAULT_ALPHA), "chi2={chi2} counts={counts:?}");
}

#[test]
fn absorbing_side_captures_almost_every_path() {
    let o = oracles();
    let horizon = f(&o, "jacobi_20_absorbed_horizon");
    assert!(f(&o, "jacobi_20_survival_bound") < 1e-10);
    let params = JacobiParams::new(2.0, 0.0).unwrap();
    let n = 1000;
    let absorbed = (0..n)
        .filter(|&i| simulate(&params, 0.5, horizon, 1e-3, &mut derive_stream(804, i)).unwrap().last() == 1.0)
        .count();
    assert!(absorbed as f64 >= 0.99 * n as f64, "{absorbed}/{n}");
}

#[test]
fn skew_product_sum_is_besq_of_summed_dimension() {
    let dt = 1e-3;
    let zs: Vec<f64> = (0..4000)
        .map(|i| {
            let mut s = derive_stream(805, i);
            let z = besq::sample_path(2.0, 1.0, dt, 1000, &mut s).unwrap();
            let zp = besq::sample_path(2.0, 1.0, dt, 1000, &mut s).unwrap();
            let sp = skew_product(&z, &zp, 1e-9).unwrap();
            assert!(sp.y.values.iter().all(|v| (0.0..=1.0).contains(v)));
            sp.zplus.last()
        })
        .collect();
    let cdf = |y: f64| besq::cdf(4.0, 1.0, 2.0, y).unwrap();
    let r = ks_test("zplus", &zs, KsReference::Cdf(&cdf), DEFAULT_ALPHA, 0.0).unwrap();
    assert!(r.pass, "D={}", r.statistic);
}

#[test]
fn skew_product_rejects_mismatched_grids() {
    let mut s = derive_stream(806, 0);
    let z = besq::sample_path(2.0, 1.0, 1e-3, 10, &mut s).unwrap();
    let zp = besq::sample_path(2.0, 1.0, 1e-3, 11, &mut s).unwrap();
    assert!(skew_product(&z, &zp, 1e-9).is_err());
}

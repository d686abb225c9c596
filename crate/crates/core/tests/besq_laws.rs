mod common;

use common::{assert_within, f, oracles};
use flowlab_core::besq::{self, BridgeKind, BridgeSpec};
use flowlab_core::quad::{integrate_half_line, Tolerance};
use flowlab_core::rng::derive_stream;
use flowlab_core::stats::{ks_test, mean_and_se, KsReference, DEFAULT_ALPHA};

#[test]
fn density_matches_reference_values() {
    let o = oracles();
    for case in o["besq_density"].as_array().unwrap() {
        let (d, t, x, y) = (f(case, "delta"), f(case, "t"), f(case, "x"), f(case, "y"));
        let want = f(case, "value");
        let got = besq::density(d, t, x, y);
        assert!((got - want).abs() <= 1e-10 * want.max(1e-3), "q^{d}_{t}({x},{y}) = {got}, want {want}");
    }
}

#[test]
fn cdf_matches_reference_values() {
    let o = oracles();
    for case in o["besq_cdf"].as_array().unwrap() {
        let (d, t, x, y) = (f(case, "delta"), f(case, "t"), f(case, "x"), f(case, "y"));
        let got = besq::cdf(d, t, x, y).unwrap();
        assert!((got - f(case, "value")).abs() < 1e-8, "cdf δ={d} t={t} x={x} y={y}: {got}");
    }
}

#[test]
fn convolution_sides_match_reference_values() {
    let o = oracles();
    for case in o["kernel_identity"].as_array().unwrap() {
        let (d, s, t, u, w) = (f(case, "delta"), f(case, "s"), f(case, "t"), f(case, "u"), f(case, "w"));
        let rhs = s / (s + t) * besq::density(d + 2.0, s + t, u, w) + t / (s + t) * besq::density(d, s + t, u, w);
        assert!((rhs - f(case, "rhs")).abs() < 1e-10);
        let r = besq::kernel_residual(d, s, t, u, w).unwrap();
        assert!(r.abs() < 1e-6, "residual {r}");
        assert!((rhs + r - f(case, "lhs")).abs() < 1e-8);
    }
}

#[test]
fn atom_balance_for_dimension_zero() {
    for (s, t, u) in [(0.5, 1.5, 2.0), (1.0, 1.0, 1.0), (2.0, 0.5, 0.3)] {
        assert!(besq::kernel_atom_residual(s, t, u).unwrap().abs() < 1e-8);
    }
}

#[test]
fn atom_mass_is_empirical_zero_fraction() {
    let o = oracles();
    let want = f(&o["besq_atom"][0], "value");
    assert!((besq::atom(1.0, 1.0) - want).abs() < 1e-15);
    let n = 100_000;
    let mut s = derive_stream(501, 0);
    let zeros = (0..n).filter(|_| besq::sample(0.0, 1.0, 1.0, &mut s).unwrap() == 0.0).count();
    let p = zeros as f64 / n as f64;
    assert_within("P(Z=0)", p, want, (want * (1.0 - want) / n as f64).sqrt(), 3.0, 0.0);
}

#[test]
fn sample_mean_is_x_plus_delta_t() {
    for (k, &(d, t, x)) in [(0.0, 1.0, 1.0), (2.0, 0.5, 0.0), (3.0, 2.0, 0.5)].iter().enumerate() {
        let mut s = derive_stream(502, k as u64);
        let xs: Vec<f64> = (0..100_000).map(|_| besq::sample(d, t, x, &mut s).unwrap()).collect();
        let (m, se) = mean_and_se(&xs);
        assert_within("BESQ mean", m, x + d * t, se, 3.0, 0.0);
    }
}

#[test]
fn exact_sampler_against_cdf() {
    for (k, &(d, t, x)) in [(4.0, 1.0, 2.0), (1.0, 0.5, 2.0)].iter().enumerate() {
        let mut s = derive_stream(503, k as u64);
        let xs: Vec<f64> = (0..100_000).map(|_| besq::sample(d, t, x, &mut s).unwrap()).collect();
        let cdf = |y: f64| besq::cdf(d, t, x, y).unwrap();
        let r = ks_test("sampler", &xs, KsReference::Cdf(&cdf), DEFAULT_ALPHA, 0.0).unwrap();
        assert!(r.pass, "δ={d}: D={} > {}", r.statistic, r.threshold);
    }
}

#[test]
fn additivity_in_law() {
    for (k, &(d1, d2)) in [(0.0, 2.0), (1.0, 1.0), (2.0, 2.0)].iter().enumerate() {
        let (x, y, t) = (1.0, 0.5, 0.7);
        let mut s = derive_stream(504, k as u64);
        let sums: Vec<f64> = (0..20_000)
            .map(|_| besq::sample(d1, t, x, &mut s).unwrap() + besq::sample(d2, t, y, &mut s).unwrap())
            .collect();
        let joint: Vec<f64> = (0..20_000).map(|_| besq::sample(d1 + d2, t, x + y, &mut s).unwrap()).collect();
        let r = ks_test("additivity", &sums, KsReference::Sample(&joint), DEFAULT_ALPHA, 0.0).unwrap();
        assert!(r.pass, "({d1},{d2}): D={}", r.statistic);
    }
}

#[test]
fn composition_is_a_two_component_mixture() {
    // Z^δ_t(Z^{δ+2}_s(u)) against Z^{δ+2}_{s+t}(u) w.p. s/(s+t), else Z^δ_{s+t}(u)
    let (s_, t, u) = (0.5, 1.5, 2.0);
    for (k, d) in [0.0, 1.0, 2.0].into_iter().enumerate() {
        let mut s = derive_stream(505, k as u64);
        let n = 20_000;
        let composed: Vec<f64> = (0..n)
            .map(|_| {
                let mid = besq::sample(d + 2.0, s_, u, &mut s).unwrap();
                if mid == 0.0 && d == 0.0 {
                    0.0
                } else {
                    besq::sample(d, t, mid, &mut s).unwrap()
                }
            })
            .collect();
        let mixture: Vec<f64> = (0..n)
            .map(|_| {
                let dim = if s.uniform() < s_ / (s_ + t) { d + 2.0 } else { d };
                besq::sample(dim, s_ + t, u, &mut s).unwrap()
            })
            .collect();
        let r = ks_test("mixture", &composed, KsReference::Sample(&mixture), DEFAULT_ALPHA, 0.0).unwrap();
        assert!(r.pass, "δ={d}: D={}", r.statistic);
    }
}

#[test]
fn bridge_midpoint_is_exponential() {
    // dimension 2 from 0 to 0 over [0, 1]: density ∝ q_{1/2}(0,z) q_{1/2}(z,0) ∝ e^{-2z}
    let spec = BridgeSpec {
        delta: 2.0,
        h: 1.0,
        z_start: 0.0,
        z_end: 0.0,
    };
    let mut s = derive_stream(506, 0);
    let mid: Vec<f64> = (0..20_000)
        .map(|_| besq::bridge_sample(&spec, 11, &mut s).unwrap().values()[5])
        .collect();
    let cdf = |z: f64| 1.0 - (-2.0 * z.max(0.0)).exp();
    let r = ks_test("bridge", &mid, KsReference::Cdf(&cdf), DEFAULT_ALPHA, 0.0).unwrap();
    assert!(r.pass, "D={}", r.statistic);
    let (m, se) = mean_and_se(&mid);
    assert_within("bridge mean", m, 0.5, se, 3.0, 0.0);
}

#[test]
fn exponential_functional_integrates_against_the_transition_density() {
    // E[exp(-κ²/2 ∫_0^t ds/Z_s)] from u, unconditioned, is the bridge
    // functional integrated against q²_t(u, ·)
    let (kappa, t, u) = (1.0, 1.0, 1.0);
    let exact = integrate_half_line(
        |v| {
            if v > 0.0 {
                besq::bridge_exp_functional(BridgeKind::Dim2, kappa, t, u, v).unwrap() * besq::density(2.0, t, u, v)
            } else {
                0.0
            }
        },
        u + 2.0 * t,
        Tolerance::default(),
    )
    .unwrap()
    .value;
    let dt = 1e-3;
    let n = (t / dt) as usize;
    let mut s = derive_stream(507, 0);
    let vals: Vec<f64> = (0..20_000)
        .map(|_| {
            let p = besq::sample_path(2.0, u, dt, n, &mut s).unwrap();
            let v = p.values();
            // trapezoid in time
            let integral: f64 = v.windows(2).map(|w| 0.5 * dt * (1.0 / w[0] + 1.0 / w[1])).sum();
            (-0.5 * kappa * kappa * integral).exp()
        })
        .collect();
    let (m, se) = mean_and_se(&vals);
    assert_within("bridge functional", m, exact, se, 3.0, 0.005);
}

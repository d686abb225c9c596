//! Squared Bessel processes.
//!
//! `BESQ(δ)` has generator `2x d²/dx² + δ d/dx`. Its transition kernel from
//! `x` over time `t` is a scaled noncentral chi-square: a Poisson(`x/2t`)
//! mixture of Gamma(`δ/2 + N`, `2t`) laws. For `δ = 0` the `N = 0` term is
//! the atom `e^{-x/2t}` at the absorbing point zero.

use crate::error::{Error, Result};
use crate::paths::SamplePath;
use crate::quad::{self, Tolerance};
use crate::rng::RandomStream;
use crate::special::{ln_bessel_i, ln_gamma};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesqParams {
    pub delta: f64,
}

impl BesqParams {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::invalid(format!("dimension must be >= 0, got {delta}")));
        }
        Ok(Self { delta })
    }
}

/// A squared Bessel bridge of dimension `delta` over `[0, h]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BridgeSpec {
    pub delta: f64,
    pub h: f64,
    pub z_start: f64,
    pub z_end: f64,
}

/// Log of the transition density `q^δ_t(x, y)` with respect to Lebesgue
/// measure on `(0, ∞)`. The atom at zero for `δ = 0` is not included (see
/// [`atom`]).
pub fn log_density(delta: f64, t: f64, x: f64, y: f64) -> f64 {
    debug_assert!(t > 0.0 && x >= 0.0);
    if y < 0.0 {
        return f64::NEG_INFINITY;
    }
    let nu = 0.5 * delta - 1.0;
    if x == 0.0 {
        if delta == 0.0 {
            return f64::NEG_INFINITY;
        }
        // Gamma(δ/2, 2t)
        let shape = 0.5 * delta;
        if y == 0.0 {
            return match shape.partial_cmp(&1.0) {
                Some(std::cmp::Ordering::Less) => f64::INFINITY,
                Some(std::cmp::Ordering::Equal) => -(2.0 * t).ln(),
                _ => f64::NEG_INFINITY,
            };
        }
        return (shape - 1.0) * y.ln() - y / (2.0 * t) - shape * (2.0 * t).ln() - ln_gamma(shape);
    }
    if y == 0.0 {
        return if delta > 2.0 {
            f64::NEG_INFINITY
        } else if delta == 2.0 {
            -(2.0 * t).ln() - x / (2.0 * t)
        } else if delta == 0.0 {
            // limit of (y/x)^{-1/2} I_1(√(xy)/t) as y → 0
            -(2.0 * t).ln() - x / (2.0 * t) + (x / (2.0 * t)).ln()
        } else {
            f64::INFINITY
        };
    }
    let z = (x * y).sqrt() / t;
    -(2.0 * t).ln() + 0.5 * nu * (y / x).ln() - (x + y) / (2.0 * t) + ln_bessel_i(nu, z)
}

/// Transition density `q^δ_t(x, y)`.
pub fn density(delta: f64, t: f64, x: f64, y: f64) -> f64 {
    log_density(delta, t, x, y).exp()
}

/// Mass `q^0_t(x, {0})` of the atom at zero for dimension zero.
pub fn atom(t: f64, x: f64) -> f64 {
    (-x / (2.0 * t)).exp()
}

/// `P(Z_t ≤ y | Z_0 = x)` by quadrature, atom included.
pub fn cdf(delta: f64, t: f64, x: f64, y: f64) -> Result<f64> {
    if y < 0.0 {
        return Ok(0.0);
    }
    let base = if delta == 0.0 { atom(t, x) } else { 0.0 };
    if y == 0.0 {
        return Ok(base);
    }
    // y = s² removes the s^{δ-2} singularity at the origin
    let e = quad::integrate(
        |s| {
            let v = 2.0 * s * density(delta, t, x, s * s);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        y.sqrt(),
        Tolerance {
            abs: 1e-13,
            rel: 1e-11,
        },
    )?;
    Ok((base + e.value).min(1.0))
}

/// Exact draw of `Z_t` given `Z_0 = x`.
pub fn sample(delta: f64, t: f64, x: f64, stream: &mut RandomStream) -> Result<f64> {
    if !(t > 0.0) || !(x >= 0.0) || !(delta >= 0.0) {
        return Err(Error::invalid(format!(
            "besq sample needs t > 0, x >= 0, delta >= 0 (t={t}, x={x}, delta={delta})"
        )));
    }
    let n = stream.poisson(x / (2.0 * t));
    Ok(stream.gamma(0.5 * delta + n as f64, 2.0 * t))
}

/// Exact `BESQ(δ)` chain on a uniform grid with `n` steps of size `dt`.
pub fn sample_path(
    delta: f64,
    x0: f64,
    dt: f64,
    n: usize,
    stream: &mut RandomStream,
) -> Result<SamplePath> {
    let mut values = Vec::with_capacity(n + 1);
    let mut z = x0;
    values.push(z);
    for _ in 0..n {
        z = sample(delta, dt, z, stream)?;
        values.push(z);
    }
    SamplePath::new(dt, values)
}

/// Squared Bessel bridge to zero on `ngrid` equally spaced points of `[0, h]`.
///
/// An unconditioned chain `Z` is run from `z_start / h` on the clock
/// `u(t) = t / (h - t)` and mapped back by `Z̃_t = Z_{u(t)} / u'(t)` with
/// `u'(t) = h / (h - t)²`; the terminal value is zero.
pub fn bridge_sample(spec: &BridgeSpec, ngrid: usize, stream: &mut RandomStream) -> Result<SamplePath> {
    if spec.z_end != 0.0 {
        return Err(Error::invalid("only bridges ending at zero are supported"));
    }
    if ngrid < 2 || !(spec.h > 0.0) || !(spec.z_start >= 0.0) || !(spec.delta >= 0.0) {
        return Err(Error::invalid("bridge needs ngrid >= 2, h > 0, z_start >= 0, delta >= 0"));
    }
    let h = spec.h;
    let dt = h / (ngrid - 1) as f64;
    let mut values = Vec::with_capacity(ngrid);
    values.push(spec.z_start);
    let mut z = spec.z_start / h;
    let mut u_prev = 0.0;
    for i in 1..ngrid - 1 {
        let t = i as f64 * dt;
        let u = t / (h - t);
        z = sample(spec.delta, u - u_prev, z, stream)?;
        u_prev = u;
        values.push(z * (h - t) * (h - t) / h);
    }
    values.push(0.0);
    SamplePath::new(dt, values)
}

/// Residual of the convolution identity
/// `∫ q^{δ+2}_s(u,v) q^δ_t(v,w) dv = s/(s+t) q^{δ+2}_{s+t}(u,w) + t/(s+t) q^δ_{s+t}(u,w)`
/// at `w > 0`, left side by quadrature.
pub fn kernel_residual(delta: f64, s: f64, t: f64, u: f64, w: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0 && u > 0.0 && w > 0.0 && delta >= 0.0) {
        return Err(Error::invalid("kernel identity needs positive s, t, u, w"));
    }
    let scale = u + (delta + 2.0) * s + w;
    let lhs = quad::integrate_half_line(
        |v| density(delta + 2.0, s, u, v) * density(delta, t, v, w),
        scale,
        Tolerance {
            abs: 1e-14,
            rel: 1e-12,
        },
    )?
    .value;
    let st = s + t;
    let rhs = s / st * density(delta + 2.0, st, u, w) + t / st * density(delta, st, u, w);
    Ok(lhs - rhs)
}

/// Residual of the atom balance for dimension zero: the mass sent to zero by
/// `q^0_t` after `q^2_s` against `t/(s+t) · q^0_{s+t}(u, {0})`.
pub fn kernel_atom_residual(s: f64, t: f64, u: f64) -> Result<f64> {
    if !(s > 0.0 && t > 0.0 && u > 0.0) {
        return Err(Error::invalid("atom balance needs positive s, t, u"));
    }
    let lhs = quad::integrate_half_line(
        |v| density(2.0, s, u, v) * atom(t, v),
        u + 2.0 * s,
        Tolerance {
            abs: 1e-14,
            rel: 1e-12,
        },
    )?
    .value;
    Ok(lhs - t / (s + t) * atom(s + t, u))
}

/// Which bridge the exponential functional is taken along.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BridgeKind {
    /// Dimension 2, exponent `κ²/2`.
    Dim2,
    /// Dimension 0, exponent `κ(κ-2)/2`.
    Dim0,
}

/// `E[exp(-c ∫_0^t ds / Z_s) | Z_0 = a, Z_t = b]` for the squared Bessel
/// bridge of the given kind, with `c = κ²/2` (dimension 2) or
/// `c = κ(κ-2)/2` (dimension 0), as the density ratio
/// `(a/b)^{κ/2} q^{δ'}_t(a,b) / q^δ_t(a,b)`.
pub fn bridge_exp_functional(kind: BridgeKind, kappa: f64, t: f64, a: f64, b: f64) -> Result<f64> {
    if !(t > 0.0 && a > 0.0 && b > 0.0) {
        return Err(Error::invalid("bridge functional needs t > 0 and positive endpoints"));
    }
    let (num_dim, den_dim) = match kind {
        BridgeKind::Dim2 if kappa >= 0.0 => (2.0 * kappa + 2.0, 2.0),
        BridgeKind::Dim0 if kappa >= 2.0 => (2.0 * kappa, 0.0),
        _ => {
            return Err(Error::invalid(format!(
                "kappa {kappa} gives a negative exponent for {kind:?}"
            )))
        }
    };
    let ln = 0.5 * kappa * (a / b).ln() + log_density(num_dim, t, a, b) - log_density(den_dim, t, a, b);
    Ok(ln.max(-700.0).exp())
}

/// Conditional expectation of
/// `exp{-κ²/2 ∫_a^b dy/l - κ(κ-2)/2 ∫_b^c dy/l}` given the profile values
/// `u, v, w` at `a, b, c`: the product of the two bridge functionals.
pub fn three_point_functional(kappa: f64, a: f64, b: f64, c: f64, u: f64, v: f64, w: f64) -> Result<f64> {
    Ok(bridge_exp_functional(BridgeKind::Dim2, kappa, b - a, u, v)?
        * bridge_exp_functional(BridgeKind::Dim0, kappa, c - b, v, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn normalization(delta: f64, t: f64, x: f64) -> f64 {
        let mass = quad::integrate_half_line(|y| density(delta, t, x, y), x + delta * t + t, Tolerance::default())
            .unwrap()
            .value;
        let atom_mass = if delta == 0.0 { atom(t, x) } else { 0.0 };
        mass + atom_mass
    }

    #[test]
    fn normalizes_on_lattice() {
        for &delta in &[0.0, 1.0, 2.0, 3.0, 4.0] {
            for &t in &[0.1, 1.0, 10.0] {
                for &x in &[0.0, 0.5, 5.0] {
                    let total = normalization(delta, t, x);
                    assert!((total - 1.0).abs() < 1e-8, "delta={delta} t={t} x={x}: {total}");
                }
            }
        }
    }

    #[test]
    fn dimension_two_from_origin_is_exponential() {
        for &t in &[0.5f64, 1.0, 3.0] {
            for &y in &[0.0f64, 0.3, 2.0, 7.0] {
                let expected = (-y / (2.0 * t)).exp() / (2.0 * t);
                assert!((density(2.0, t, 0.0, y) - expected).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn small_y_limit_is_continuous() {
        for &delta in &[0.0, 2.0] {
            let at_zero = density(delta, 1.3, 0.7, 0.0);
            let near = density(delta, 1.3, 0.7, 1e-12);
            assert!((at_zero - near).abs() < 1e-8, "delta={delta}");
        }
    }

    #[test]
    fn dimension_zero_from_zero_stays() {
        let mut s = derive_stream(9, 0);
        for _ in 0..100 {
            assert_eq!(sample(0.0, 1.0, 0.0, &mut s).unwrap(), 0.0);
        }
    }

    #[test]
    fn bridge_endpoints() {
        let mut s = derive_stream(9, 1);
        let spec = BridgeSpec {
            delta: 2.0,
            h: 2.5,
            z_start: 1.7,
            z_end: 0.0,
        };
        let p = bridge_sample(&spec, 101, &mut s).unwrap();
        assert_eq!(p.first(), 1.7);
        assert_eq!(p.last(), 0.0);
        assert!(p.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn absorbed_bridge_is_zero() {
        let mut s = derive_stream(9, 2);
        let spec = BridgeSpec {
            delta: 0.0,
            h: 1.0,
            z_start: 0.0,
            z_end: 0.0,
        };
        let p = bridge_sample(&spec, 50, &mut s).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bridge_to_nonzero_rejected() {
        let mut s = derive_stream(9, 3);
        let spec = BridgeSpec {
            delta: 2.0,
            h: 1.0,
            z_start: 1.0,
            z_end: 0.5,
        };
        assert!(bridge_sample(&spec, 10, &mut s).is_err());
    }

    #[test]
    fn kernel_identity_examples() {
        assert!(kernel_residual(2.0, 1.0, 1.0, 1.0, 1.0).unwrap().abs() < 1e-6);
        assert!(kernel_residual(0.0, 0.5, 1.5, 2.0, 1.0).unwrap().abs() < 1e-6);
        assert!(kernel_atom_residual(0.5, 1.5, 2.0).unwrap().abs() < 1e-9);
        assert!(kernel_residual(1.0, 1e-4, 1.0, 1.0, 1.0).unwrap().abs() < 1e-3);
    }

    #[test]
    fn functional_reduces_to_bessel_ratio() {
        // (a/b)^{κ/2} q^{2κ+2}/q^2 = I_κ(z)/I_0(z) and the dimension-zero
        // ratio is I_{κ-1}(z)/I_1(z), with z = √(ab)/t
        for &(kappa, t, a, b) in &[(3.0, 1.0, 1.0, 2.0), (2.5, 0.4, 0.3, 5.0), (4.0, 2.0, 10.0, 7.0)] {
            let z = f64::sqrt(a * b) / t;
            let d2 = (ln_bessel_i(kappa, z) - ln_bessel_i(0.0, z)).exp();
            let d0 = (ln_bessel_i(kappa - 1.0, z) - ln_bessel_i(1.0, z)).exp();
            let got2 = bridge_exp_functional(BridgeKind::Dim2, kappa, t, a, b).unwrap();
            let got0 = bridge_exp_functional(BridgeKind::Dim0, kappa, t, a, b).unwrap();
            assert!((got2 - d2).abs() < 1e-12 * d2.max(1e-300), "{got2} {d2}");
            assert!((got0 - d0).abs() < 1e-12 * d0.max(1e-300), "{got0} {d0}");
            assert!(got2 > 0.0 && got2 <= 1.0 && got0 > 0.0 && got0 <= 1.0);
        }
    }

    #[test]
    fn zero_exponent_gives_one() {
        let v = bridge_exp_functional(BridgeKind::Dim0, 2.0, 0.7, 1.3, 0.4).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = bridge_exp_functional(BridgeKind::Dim2, 0.0, 0.7, 1.3, 0.4).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_point_is_product() {
        let p = three_point_functional(3.0, 0.5, 1.0, 2.0, 0.8, 1.9, 1.1).unwrap();
        let a = bridge_exp_functional(BridgeKind::Dim2, 3.0, 0.5, 0.8, 1.9).unwrap();
        let b = bridge_exp_functional(BridgeKind::Dim0, 3.0, 1.0, 1.9, 1.1).unwrap();
        assert!((p - a * b).abs() < 1e-15);
    }

    #[test]
    fn cdf_bounds() {
        assert_eq!(cdf(2.0, 1.0, 1.0, -1.0).unwrap(), 0.0);
        let c0 = cdf(0.0, 1.0, 1.0, 0.0).unwrap();
        assert!((c0 - (-0.5f64).exp()).abs() < 1e-15);
        let big = cdf(3.0, 1.0, 1.0, 200.0).unwrap();
        assert!((big - 1.0).abs() < 1e-9);
    }
}

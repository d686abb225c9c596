//! Jacobi diffusions on `[0, 1]` with generator
//! `2y(1-y) f'' + (d₁(1-y) - d₂y) f'`, and the skew product of two squared
//! Bessel processes.

use crate::error::{Error, Result};
use crate::paths::{SamplePath, TimeSeries};
use crate::rng::RandomStream;

/// Behaviour of a boundary point, decided by the adjacent dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// `d = 0`
    Absorbing,
    /// `0 < d < 2`
    Reflecting,
    /// `d ≥ 2`
    Entrance,
}

impl Boundary {
    pub fn classify(d: f64) -> Self {
        if d == 0.0 {
            Boundary::Absorbing
        } else if d < 2.0 {
            Boundary::Reflecting
        } else {
            Boundary::Entrance
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobiParams {
    pub d1: f64,
    pub d2: f64,
}

impl JacobiParams {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 >= 0.0 && d2 >= 0.0) || !d1.is_finite() || !d2.is_finite() {
            return Err(Error::invalid(format!("Jacobi dimensions must be finite and non-negative (got {d1}, {d2})")));
        }
        Ok(Self { d1, d2 })
    }

    /// Boundary at 0.
    pub fn lower(&self) -> Boundary {
        Boundary::classify(self.d1)
    }

    /// Boundary at 1.
    pub fn upper(&self) -> Boundary {
        Boundary::classify(self.d2)
    }

    pub fn drift(&self, y: f64) -> f64 {
        self.d1 * (1.0 - y) - self.d2 * y
    }

    /// `(Gf)(y)` for the polynomial `f(y) = Σ coeffs[i] yⁱ`.
    pub fn generator(&self, coeffs: &[f64], y: f64) -> f64 {
        let (_, d1, d2) = poly_eval(coeffs, y);
        2.0 * y * (1.0 - y) * d2 + self.drift(y) * d1
    }
}

/// Value, first and second derivative of `Σ coeffs[i] yⁱ` by Horner's rule.
fn poly_eval(coeffs: &[f64], y: f64) -> (f64, f64, f64) {
    let (mut p, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &c in coeffs.iter().rev() {
        d2 = d2 * y + 2.0 * d1;
        d1 = d1 * y + p;
        p = p * y + c;
    }
    (p, d1, d2)
}

/// Euler–Maruyama path on `[0, horizon]` with the per-side boundary rule:
/// an absorbing boundary freezes the path, a reflecting one mirrors the
/// overshoot and an entrance boundary clamps.
pub fn simulate(params: &JacobiParams, y0: f64, horizon: f64, dt: f64, stream: &mut RandomStream) -> Result<SamplePath> {
    if !(0.0..=1.0).contains(&y0) {
        return Err(Error::invalid(format!("Jacobi start {y0} outside [0, 1]")));
    }
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(Error::invalid("need dt > 0 and horizon >= 0"));
    }
    let n = (horizon / dt).round() as usize;
    let sd = dt.sqrt();
    let mut out = Vec::with_capacity(n + 1);
    let mut y = y0;
    let absorbed = |y: f64| {
        (y <= 0.0 && params.lower() == Boundary::Absorbing) || (y >= 1.0 && params.upper() == Boundary::Absorbing)
    };
    let mut frozen = absorbed(y);
    out.push(y);
    for _ in 0..n {
        if !frozen {
            let noise = (4.0 * y * (1.0 - y)).max(0.0).sqrt() * sd * stream.normal();
            let mut next = y + params.drift(y) * dt + noise;
            if next < 0.0 {
                next = match params.lower() {
                    Boundary::Absorbing => 0.0,
                    Boundary::Reflecting => -next,
                    Boundary::Entrance => 0.0,
                };
            }
            if next > 1.0 {
                next = match params.upper() {
                    Boundary::Absorbing => 1.0,
                    Boundary::Reflecting => 2.0 - next,
                    Boundary::Entrance => 1.0,
                };
            }
            y = next.clamp(0.0, 1.0);
            frozen = absorbed(y);
        }
        out.push(y);
    }
    SamplePath::new(dt, out)
}

/// `Y` tabulated on its own clock together with `Z⁺ = Z + Z'`.
#[derive(Clone, Debug)]
pub struct SkewProduct {
    /// `Y(Σ_{s<t} dt / Z⁺_s) = Z_t / Z⁺_t`
    pub y: TimeSeries,
    pub zplus: SamplePath,
    /// Whether the clock stopped early because `Z⁺` fell below the floor.
    pub truncated: bool,
}

/// Splits two squared Bessel paths on a common grid into their sum and the
/// time-changed ratio.
pub fn skew_product(z: &SamplePath, zp: &SamplePath, floor: f64) -> Result<SkewProduct> {
    if z.len() != zp.len() || (z.dt() - zp.dt()).abs() > 1e-15 {
        return Err(Error::invalid("skew product needs paths on the same grid"));
    }
    let sum: Vec<f64> = z.values().iter().zip(zp.values()).map(|(a, b)| a + b).collect();
    if !(sum[0] > 0.0) {
        return Err(Error::invalid("Z⁺ must start above 0"));
    }
    let dt = z.dt();
    let mut clock = Vec::with_capacity(sum.len());
    let mut ratio = Vec::with_capacity(sum.len());
    let mut c = 0.0;
    let mut truncated = false;
    for (k, &s) in sum.iter().enumerate() {
        if s < floor {
            truncated = true;
            break;
        }
        clock.push(c);
        ratio.push((z.values()[k] / s).clamp(0.0, 1.0));
        c += dt / s;
    }
    Ok(SkewProduct {
        y: TimeSeries::new(clock, ratio)?,
        zplus: SamplePath::new(dt, sum)?,
        truncated,
    })
}

/// Monte Carlo mean and standard error of a martingale-problem residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// `(1/n) Σ [f(Y_{u+Δ}) - f(Y_u) - Δ·(Gf)(Y_u)]` over replica pairs
/// `(Y_u, Y_{u+Δ})`.
pub fn generator_residual(pairs: &[(f64, f64)], delta: f64, params: &JacobiParams, coeffs: &[f64]) -> Result<Residual> {
    if coeffs.len() > 5 {
        return Err(Error::invalid("test polynomial must have degree at most 4"));
    }
    if pairs.len() < 2 {
        return Err(Error::invalid("need at least two replica pairs"));
    }
    let f = |y: f64| poly_eval(coeffs, y).0;
    let terms: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| f(b) - f(a) - delta * params.generator(coeffs, a))
        .collect();
    let (mean, se) = crate::stats::mean_and_se(&terms);
    Ok(Residual {
        mean,
        se,
        n: terms.len(),
    })
}

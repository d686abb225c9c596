//! Euler simulation of `X_t(x) = x + B_t + β₁∫1(X_s ≤ 0)ds + β₂∫1(X_s > 0)ds`
//! for a grid of starting points driven by one Brownian path.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::paths::SamplePath;
use crate::rng::RandomStream;

/// Half-width of the difference stencil used for `DX_∞`.
pub const STENCIL: f64 = 1e-3;
/// Step budget for [`dx_at_exit`].
pub const MAX_EXIT_STEPS: usize = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowParams {
    pub beta1: f64,
    pub beta2: f64,
    pub dt: f64,
    pub exit_level: f64,
}

impl FlowParams {
    pub fn new(beta1: f64, beta2: f64, dt: f64, exit_level: f64) -> Result<Self> {
        if !(dt > 0.0) || !(exit_level > 0.0) || !beta1.is_finite() || !beta2.is_finite() {
            return Err(Error::invalid(format!(
                "flow parameters need finite drifts, dt > 0 and exit_level > 0 (dt={dt}, exit_level={exit_level})"
            )));
        }
        Ok(Self {
            beta1,
            beta2,
            dt,
            exit_level,
        })
    }

    /// `β₁ = 0`, `β₂ = 1`: the transient case with a uniform derivative law.
    pub fn transient(dt: f64, exit_level: f64) -> Result<Self> {
        Self::new(0.0, 1.0, dt, exit_level)
    }
}

/// `x[k][i] = X_{t_k}(x0s[i])`; `dx` has the same shape once filled.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowField {
    pub x0s: Vec<f64>,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub dx: Vec<Vec<f64>>,
}

impl FlowField {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x0,X,DX\n");
        for (k, t) in self.times.iter().enumerate() {
            for (i, x0) in self.x0s.iter().enumerate() {
                let d = self.dx.get(k).map_or(f64::NAN, |row| row[i]);
                let _ = writeln!(out, "{t},{x0},{},{d}", self.x[k][i]);
            }
        }
        out
    }
}

fn check_increasing(x0s: &[f64]) -> Result<()> {
    if x0s.is_empty() || x0s.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("initial points must be non-empty and strictly increasing"));
    }
    Ok(())
}

/// Runs the flow along `b`, recording every step. `b` must start at 0 and
/// use the step size of `params`.
pub fn simulate_flow(b: &SamplePath, x0s: &[f64], params: &FlowParams) -> Result<FlowField> {
    check_increasing(x0s)?;
    if b.first() != 0.0 {
        return Err(Error::invalid("driving path must start at 0"));
    }
    if (b.dt() - params.dt).abs() > 1e-12 * params.dt {
        return Err(Error::invalid(format!(
            "driving path step {} differs from flow step {}",
            b.dt(),
            params.dt
        )));
    }
    let n = x0s.len();
    let bv = b.values();
    // X is tracked as x + B_k + dt·(β₁·n₁ + β₂·n₂) so the single-regime
    // closed forms hold without accumulated rounding.
    let mut n1 = vec![0u64; n];
    let mut n2 = vec![0u64; n];
    let mut cur = x0s.to_vec();
    let mut x = Vec::with_capacity(bv.len());
    x.push(cur.clone());
    for (k, &bk) in bv.iter().enumerate().skip(1) {
        for i in 0..n {
            if cur[i] > 0.0 {
                n2[i] += 1;
            } else {
                n1[i] += 1;
            }
            cur[i] = x0s[i] + bk + params.dt * (params.beta1 * n1[i] as f64 + params.beta2 * n2[i] as f64);
        }
        for i in 1..n {
            if !(cur[i - 1] < cur[i]) {
                return Err(Error::Monotonicity {
                    step: k,
                    index: i - 1,
                    next: i,
                });
            }
        }
        x.push(cur.clone());
    }
    Ok(FlowField {
        x0s: x0s.to_vec(),
        times: (0..bv.len()).map(|k| b.time(k)).collect(),
        x,
        dx: Vec::new(),
    })
}

/// Fills `dx` with difference quotients: central inside, one-sided at the
/// ends.
pub fn flow_derivative(mut field: FlowField) -> Result<FlowField> {
    let n = field.x0s.len();
    if n < 3 {
        return Err(Error::invalid("flow derivative needs at least 3 initial points"));
    }
    let x0 = &field.x0s;
    field.dx = field
        .x
        .iter()
        .map(|row| {
            (0..n)
                .map(|i| {
                    let (l, r) = match i {
                        0 => (0, 1),
                        _ if i == n - 1 => (n - 2, n - 1),
                        _ => (i - 1, i + 1),
                    };
                    (row[r] - row[l]) / (x0[r] - x0[l])
                })
                .collect()
        })
        .collect();
    Ok(field)
}

/// Estimate of `DX_∞(x)`: the stencil `{x-h, x, x+h}` is driven by a fresh
/// Brownian path until all three trajectories exceed `exit_level`.
///
/// The drift is constant on each side of 0, so a step of length `dt` is
/// exact unless a trajectory can reach 0 during it. Steps are therefore of
/// length `dt` while every trajectory is more than [`BAND_SIGMAS`]`·√dt`
/// from 0, and `dt / refine` otherwise.
///
/// While the whole stencil sits in the driftless regime `X ≤ 0` the flow is
/// a common translation by `B`, so that excursion is skipped: by the strong
/// Markov property the stencil restarts with its top point at 0.
///
/// The stencil width never decreases, so once the quotient exceeds
/// `dx_cap` the returned value resolves `1/DX_∞` to within `1/dx_cap`; the
/// run stops there. Both shortcuts remove heavy-tailed running times.
pub fn dx_at_exit(stream: &mut RandomStream, x: f64, params: &FlowParams) -> Result<f64> {
    dx_at_exit_with(stream, x, params, &ExitControl::default())
}

/// Tuning of [`dx_at_exit_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExitControl {
    pub refine: u32,
    pub dx_cap: f64,
    pub max_steps: usize,
}

/// Distance from 0, in units of `√dt`, beyond which a full step is taken.
pub const BAND_SIGMAS: f64 = 6.0;

impl Default for ExitControl {
    fn default() -> Self {
        Self {
            refine: 100,
            dx_cap: 1e3,
            max_steps: MAX_EXIT_STEPS,
        }
    }
}

pub fn dx_at_exit_with(stream: &mut RandomStream, x: f64, params: &FlowParams, ctl: &ExitControl) -> Result<f64> {
    if params.beta1 != 0.0 || params.beta2 != 1.0 {
        return Err(Error::invalid("DX_∞ needs β₁ = 0 and β₂ = 1"));
    }
    if ctl.refine == 0 {
        return Err(Error::invalid("refine must be at least 1"));
    }
    let h = STENCIL;
    let x0s = [x - h, x, x + h];
    let coarse = params.dt;
    let fine = params.dt / ctl.refine as f64;
    let (sd_coarse, sd_fine) = (coarse.sqrt(), fine.sqrt());
    let band = BAND_SIGMAS * sd_coarse;
    let mut b = 0.0;
    // time each trajectory has spent in the drift regime X > 0
    let mut pos = [0.0f64; 3];
    let mut cur = x0s;
    for k in 0..ctl.max_steps {
        let dq = (cur[2] - cur[0]) / (2.0 * h);
        if cur[0] > params.exit_level || dq >= ctl.dx_cap {
            return Ok(dq);
        }
        if cur[2] <= 0.0 {
            b -= cur[2];
            for i in 0..3 {
                cur[i] = x0s[i] + b + pos[i];
            }
        }
        let near = cur.iter().any(|v| v.abs() < band);
        let (dt, sd) = if near { (fine, sd_fine) } else { (coarse, sd_coarse) };
        b += sd * stream.normal();
        for i in 0..3 {
            if cur[i] > 0.0 {
                pos[i] += dt;
            }
            cur[i] = x0s[i] + b + pos[i];
        }
        if !(cur[0] < cur[1] && cur[1] < cur[2]) {
            let bad = if cur[0] < cur[1] { 1 } else { 0 };
            return Err(Error::Monotonicity {
                step: k + 1,
                index: bad,
                next: bad + 1,
            });
        }
    }
    Err(Error::CapExceeded {
        max_steps: ctl.max_steps,
    })
}

/// `X_t(x)` at the requested increasing `times` for each starting point,
/// driven by a fresh Brownian path, without recording the trajectory.
///
/// Steps have length `dt` while every trajectory is more than
/// [`BAND_SIGMAS`]`·√dt` from 0 and `dt / refine` otherwise; away from 0 the
/// drift is constant and a full step is exact. `refine = 1` is plain Euler.
pub fn flow_at_times(
    stream: &mut RandomStream,
    x0s: &[f64],
    times: &[f64],
    params: &FlowParams,
    refine: u32,
) -> Result<Vec<Vec<f64>>> {
    check_increasing(x0s)?;
    if times.windows(2).any(|w| !(w[0] < w[1])) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::invalid("times must be non-negative and strictly increasing"));
    }
    if refine == 0 {
        return Err(Error::invalid("refine must be at least 1"));
    }
    let n = x0s.len();
    let coarse = params.dt;
    let fine = coarse / refine as f64;
    let band = BAND_SIGMAS * coarse.sqrt();
    let mut cur = x0s.to_vec();
    let mut b = 0.0;
    let mut n1 = vec![0.0f64; n];
    let mut n2 = vec![0.0f64; n];
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        loop {
            let left = target - t;
            if left <= 1e-12 * target.max(1.0) {
                break;
            }
            let near = cur.iter().any(|v| v.abs() < band);
            let h = if near { fine } else { coarse }.min(left);
            b += h.sqrt() * stream.normal();
            for i in 0..n {
                if cur[i] > 0.0 {
                    n2[i] += h;
                } else {
                    n1[i] += h;
                }
                cur[i] = x0s[i] + b + params.beta1 * n1[i] + params.beta2 * n2[i];
            }
            t += h;
        }
        out.push(cur.clone());
    }
    Ok(out)
}

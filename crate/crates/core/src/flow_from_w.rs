//! The flow, its driving Brownian motion and its derivative, built from one
//! Brownian path `W` started at `ξ > 0` and stopped at `T_0`.
//!
//! With `λ(t, x) = l(T_0, x) - l(t, x)`:
//!
//! ```text
//! φ_t(x)   = ∫_x^{W_t} dz / λ(t, z)
//! A_t      = ∫_0^t ds / λ(s, W_s)²
//! X_{A_t}  = φ_t ∘ φ_0⁻¹
//! B_{A_t}  = ∫_ξ^c dz / λ(0, z) - ∫_{W_t}^c dz / λ(t, z)
//! DX_{A_t} = λ(0, φ_0⁻¹(·)) / λ(t, φ_0⁻¹(·))
//! ```
//!
//! Everything is evaluated on the kernel local-time grid of
//! [`crate::local_time`] with `λ` floored at `lambda_floor`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::interp::MonotoneTable;
use crate::local_time::{total_counts, InverseIntegral, KernelCounter, SpaceGrid};
use crate::paths::{SamplePath, TimeSeries};

#[derive(Clone, Debug, PartialEq)]
pub struct ConstructionConfig {
    pub xi: f64,
    pub bandwidth: f64,
    pub dx: f64,
    pub lambda_floor: f64,
    /// Paths with `M ≤ ξ + margin` are rejected.
    pub margin: f64,
    /// Increasing `u`-times, starting at 0.
    pub u_grid: Vec<f64>,
    /// Increasing `y`-points (`y = φ_0(x)`).
    pub y_grid: Vec<f64>,
    /// Reference levels `c = ξ + f·(M - ξ)` for the consistency check of `B`.
    pub c_fractions: (f64, f64),
}

impl ConstructionConfig {
    pub fn new(xi: f64, bandwidth: f64, dx: f64, lambda_floor: f64) -> Self {
        Self {
            xi,
            bandwidth,
            dx,
            lambda_floor,
            margin: 0.1,
            u_grid: geometric_grid(5.0, 24, &[]),
            y_grid: (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect(),
            c_fractions: (0.9, 0.8),
        }
    }

    fn validate(&self) -> Result<()> {
        let pos = [self.xi, self.bandwidth, self.dx, self.lambda_floor];
        if pos.iter().any(|v| !(*v > 0.0)) || !(self.margin >= 0.0) {
            return Err(Error::invalid("construction needs xi, bandwidth, dx, lambda_floor > 0 and margin >= 0"));
        }
        if self.u_grid.first() != Some(&0.0) || self.u_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("u-grid must start at 0 and be strictly increasing"));
        }
        if self.y_grid.is_empty() || self.y_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("y-grid must be non-empty and strictly increasing"));
        }
        let (f1, f2) = self.c_fractions;
        if !(f1 > 0.0 && f1 < 1.0 && f2 > 0.0 && f2 < 1.0 && f1 != f2) {
            return Err(Error::invalid("c-fractions must be distinct and inside (0, 1)"));
        }
        Ok(())
    }
}

/// `0` followed by `n` geometrically spaced points ending at `u_max` (ratio
/// 2 between neighbours), merged with `extra`.
pub fn geometric_grid(u_max: f64, n: usize, extra: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend((0..n).map(|j| u_max * 0.5f64.powi((n - 1 - j) as i32)));
    g.extend(extra.iter().copied().filter(|&u| u > 0.0));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    g
}

/// `φ_t(x) = ∫_x^{W_t} dz / λ(t, z)` for a `λ` row on `grid`.
///
/// Fails with a domain error when `λ` drops below `floor` between `x` and
/// `W_t`.
pub fn phi(row: &[f64], grid: SpaceGrid, floor: f64, w_t: f64, x: f64) -> Result<f64> {
    let ii = InverseIntegral::new(grid, row, floor);
    if ii.truncated(x, w_t) {
        return Err(Error::Domain {
            what: "phi: remaining local time below the floor",
            at: x,
        });
    }
    Ok(ii.integral(x, w_t))
}

/// Step-sum clock `A_{t_k} = Σ_{s<k} dt / λ(s, W_s)²` for `t_k ≤ T_M`.
#[derive(Clone, Debug, PartialEq)]
pub struct Clock {
    pub dt: f64,
    /// `values[k] = A_{t_k}`, `k = 0..=k_max` with `t_{k_max} = T_M`.
    pub values: Vec<f64>,
    /// Whether `λ(s, W_s)` fell below the floor at some step.
    pub truncated: bool,
}

impl Clock {
    pub fn terminal(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// First step index with `A ≥ u`, if the clock reaches `u`.
    pub fn first_reaching(&self, u: f64) -> Option<usize> {
        let k = self.values.partition_point(|&a| a < u);
        (k < self.values.len()).then_some(k)
    }

    /// `α(u)`, the inverse clock, by linear interpolation between steps.
    pub fn inverse(&self, u: f64) -> Option<f64> {
        let k = self.first_reaching(u)?;
        if k == 0 {
            return Some(0.0);
        }
        let (a0, a1) = (self.values[k - 1], self.values[k]);
        Some(self.dt * ((k - 1) as f64 + (u - a0) / (a1 - a0)))
    }
}

/// Increments `dt / max(λ(s, W_s), floor)²` for every step `s < k_end`,
/// with `λ(s, ·)` including step `s` itself.
fn clock_increments(path: &SamplePath, grid: SpaceGrid, bandwidth: f64, floor: f64, k_end: usize) -> (Vec<f64>, bool) {
    let scale = path.dt() / (2.0 * bandwidth);
    let total = total_counts(path, grid, bandwidth);
    let mut counter = KernelCounter::new(grid, bandwidth);
    let v = path.values();
    let dx = grid.dx();
    let mut truncated = false;
    let mut inc = Vec::with_capacity(k_end);
    for &w in &v[..k_end] {
        let s = ((w - grid.x_min) / dx).clamp(0.0, (grid.nx - 1) as f64);
        let j = (s.floor() as usize).min(grid.nx - 2);
        let f = s - j as f64;
        let c = counter.counts();
        let l0 = (total[j] - c[j]) as f64 * scale;
        let l1 = (total[j + 1] - c[j + 1]) as f64 * scale;
        let lam = l0 * (1.0 - f) + l1 * f;
        if lam < floor {
            truncated = true;
        }
        let lam = lam.max(floor);
        inc.push(path.dt() / (lam * lam));
        counter.add(w);
    }
    (inc, truncated)
}

fn construction_grid(path: &SamplePath, bandwidth: f64, dx: f64) -> Result<SpaceGrid> {
    let lo = path.values().iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    SpaceGrid::with_spacing(lo, path.max() + 2.0 * bandwidth + dx, dx)
}

/// The clock of `path` up to its maximum.
pub fn clock(path: &SamplePath, bandwidth: f64, dx: f64, floor: f64) -> Result<Clock> {
    let grid = construction_grid(path, bandwidth, dx)?;
    let k_m = path.argmax();
    let (inc, truncated) = clock_increments(path, grid, bandwidth, floor, k_m);
    let mut values = Vec::with_capacity(k_m + 1);
    values.push(0.0);
    let mut a = 0.0;
    for d in inc {
        a += d;
        values.push(a);
    }
    Ok(Clock {
        dt: path.dt(),
        values,
        truncated,
    })
}

/// Output of [`construct_flow`]. Tables are indexed `[u][y]`; entries are
/// `NaN` where `u` lies beyond the discrete clock or `y` outside the
/// represented range.
#[derive(Clone, Debug)]
pub struct Construction {
    pub xi: f64,
    pub grid: SpaceGrid,
    pub m: f64,
    pub t_m: f64,
    /// `l(T_0, ·)` on the grid, which is also `λ(0, ·)`.
    pub l_t0: Vec<f64>,
    /// `l(T_M, ·)` on the grid.
    pub l_tm: Vec<f64>,
    /// `x ↦ φ_0(x)` over the floor region around `ξ` (decreasing).
    pub phi0: MonotoneTable,
    pub clock: Clock,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// `φ_0⁻¹(y)` for each `y`, `NaN` when unrepresented.
    pub x_of_y: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub dx: Vec<Vec<f64>>,
    /// `B_u`, reference level raised above the running maximum.
    pub b: Vec<f64>,
    /// `B_u` from the two fixed reference levels, `NaN` once `t ≥ T_c`.
    pub b_c1: Vec<f64>,
    pub b_c2: Vec<f64>,
    pub c_levels: (f64, f64),
    /// `X_{A_t}(y) - y - B_{A_t} - ∫_0^t 1(X_{A_s}(y) ≥ 0) dA_s` at the step
    /// where the clock first reaches each `u`.
    pub key_residual: Vec<Vec<f64>>,
    /// Count of grid points where `X_{A_s}(φ_0(x)) ≥ 0` and `W_s ≥ x` disagree.
    pub sign_violations: usize,
}

/// Builds the flow from `w`, which must start at `ξ` and be stopped at 0.
pub fn construct_flow(w: &SamplePath, cfg: &ConstructionConfig) -> Result<Construction> {
    cfg.validate()?;
    if (w.first() - cfg.xi).abs() > 1e-12 || w.last() != 0.0 {
        return Err(Error::invalid("W must start at xi and end at its first hit of 0"));
    }
    let m = w.max();
    if m <= cfg.xi + cfg.margin {
        return Err(Error::Precondition(format!(
            "maximum {m} leaves no room above xi + margin = {}",
            cfg.xi + cfg.margin
        )));
    }
    let grid = construction_grid(w, cfg.bandwidth, cfg.dx)?;
    let floor = cfg.lambda_floor;
    let scale = w.dt() / (2.0 * cfg.bandwidth);
    let k_m = w.argmax();
    let values = w.values();

    let (inc, truncated) = clock_increments(w, grid, cfg.bandwidth, floor, k_m);
    let mut a_vals = Vec::with_capacity(k_m + 1);
    a_vals.push(0.0);
    for d in &inc {
        a_vals.push(a_vals[a_vals.len() - 1] + d);
    }
    let clock = Clock {
        dt: w.dt(),
        values: a_vals,
        truncated,
    };

    let total = total_counts(w, grid, cfg.bandwidth);
    let l_t0: Vec<f64> = total.iter().map(|&n| n as f64 * scale).collect();

    // φ_0 over the contiguous floor region around ξ
    let nodes = grid.nodes();
    let j_xi = (((cfg.xi - grid.x_min) / grid.dx()).round() as usize).min(grid.nx - 1);
    let mut lo = j_xi;
    while lo > 0 && l_t0[lo - 1] >= floor && nodes[lo - 1] > 0.0 {
        lo -= 1;
    }
    let mut hi = j_xi;
    while hi + 1 < grid.nx && l_t0[hi + 1] >= floor && nodes[hi + 1] < m {
        hi += 1;
    }
    if hi <= lo + 1 {
        return Err(Error::Precondition("floor region around xi is too narrow".into()));
    }
    let start = InverseIntegral::new(grid, &l_t0, floor);
    let p_xi = start.primitive(cfg.xi);
    let xs: Vec<f64> = nodes[lo..=hi].to_vec();
    let ys: Vec<f64> = xs.iter().map(|&x| p_xi - start.primitive(x)).collect();
    let phi0 = MonotoneTable::new(xs, ys)?;
    let (ymin, ymax) = phi0.value_range();
    let x_of_y: Vec<f64> = cfg
        .y_grid
        .iter()
        .map(|&y| if y >= ymin && y <= ymax { phi0.inverse(y) } else { f64::NAN })
        .collect();
    // positions of the y-points in increasing x, for the occupation sums
    let mut order: Vec<usize> = (0..x_of_y.len()).filter(|&i| x_of_y[i].is_finite()).collect();
    order.sort_by(|&a, &b| x_of_y[a].total_cmp(&x_of_y[b]));
    let sorted_x: Vec<f64> = order.iter().map(|&i| x_of_y[i]).collect();

    let c1 = cfg.xi + cfg.c_fractions.0 * (m - cfg.xi);
    let c2 = cfg.xi + cfg.c_fractions.1 * (m - cfg.xi);
    // B^c is defined while the kernel has not yet touched a node of the cell
    // containing c, i.e. before W comes within bandwidth + dx of c
    let kernel_reach = cfg.bandwidth + grid.dx();
    let first_hit = |c: f64| values.iter().position(|&v| v >= c - kernel_reach).unwrap_or(values.len());
    let (t_c1, t_c2) = (first_hit(c1), first_hit(c2));

    // Steps needed: for each u the reaching step k and its predecessor.
    let reach: Vec<Option<usize>> = cfg.u_grid.iter().map(|&u| clock.first_reaching(u)).collect();
    let mut wanted: Vec<usize> = reach
        .iter()
        .flatten()
        .flat_map(|&k| [k.saturating_sub(1), k])
        .collect();
    wanted.sort_unstable();
    wanted.dedup();

    struct Snap {
        x: Vec<f64>,
        dx: Vec<f64>,
        b: f64,
        b1: f64,
        b2: f64,
        resid: Vec<f64>,
    }
    let ny = cfg.y_grid.len();
    let top = grid.x_max;
    let mut snaps: Vec<(usize, Snap)> = Vec::with_capacity(wanted.len());
    let mut counter = KernelCounter::new(grid, cfg.bandwidth);
    // occ_diff[r] accumulates dA for steps where exactly the first r+1
    // sorted x-points lie at or below W_s
    let mut occ_diff = vec![0.0; sorted_x.len()];
    let mut sign_violations = 0;
    let mut s = 0;
    for &k in &wanted {
        while s < k {
            let ws = values[s];
            let r = sorted_x.partition_point(|&x| x <= ws);
            if r > 0 {
                occ_diff[r - 1] += inc[s];
            }
            counter.add(ws);
            s += 1;
        }
        let row: Vec<f64> = total
            .iter()
            .zip(counter.counts())
            .map(|(&t, &c)| (t - c) as f64 * scale)
            .collect();
        let now = InverseIntegral::new(grid, &row, floor);
        let wk = values[k];
        let p_w = now.primitive(wk);
        let b_ref = |c: f64| start.primitive(c) - p_xi - (now.primitive(c) - p_w);
        let b = b_ref(top);
        let b1 = if k < t_c1 { b_ref(c1) } else { f64::NAN };
        let b2 = if k < t_c2 { b_ref(c2) } else { f64::NAN };
        let mut occ = vec![0.0; ny];
        let mut acc = 0.0;
        for r in (0..sorted_x.len()).rev() {
            acc += occ_diff[r];
            occ[order[r]] = acc;
        }
        let mut xrow = vec![f64::NAN; ny];
        let mut dxrow = vec![f64::NAN; ny];
        let mut resid = vec![f64::NAN; ny];
        for i in 0..ny {
            let x = x_of_y[i];
            if !x.is_finite() {
                continue;
            }
            let xv = p_w - now.primitive(x);
            xrow[i] = xv;
            dxrow[i] = grid.interpolate(&l_t0, x).max(floor) / grid.interpolate(&row, x).max(floor);
            resid[i] = xv - cfg.y_grid[i] - b - occ[i];
            if (xv >= 0.0) != (wk >= x) {
                sign_violations += 1;
            }
        }
        snaps.push((
            k,
            Snap {
                x: xrow,
                dx: dxrow,
                b,
                b1,
                b2,
                resid,
            },
        ));
    }
    let snap = |k: usize| &snaps[snaps.binary_search_by_key(&k, |(j, _)| *j).expect("snapshot taken")].1;
    let lerp = |a: f64, b: f64, th: f64| a + th * (b - a);

    let nu = cfg.u_grid.len();
    let mut xt = vec![vec![f64::NAN; ny]; nu];
    let mut dxt = vec![vec![f64::NAN; ny]; nu];
    let mut resid = vec![vec![f64::NAN; ny]; nu];
    let (mut bt, mut b1t, mut b2t) = (vec![f64::NAN; nu], vec![f64::NAN; nu], vec![f64::NAN; nu]);
    for (q, (&u, r)) in cfg.u_grid.iter().zip(&reach).enumerate() {
        let Some(k) = *r else { continue };
        let hi_s = snap(k);
        let (lo_s, th) = if k == 0 {
            (hi_s, 1.0)
        } else {
            let (a0, a1) = (clock.values[k - 1], clock.values[k]);
            (snap(k - 1), (u - a0) / (a1 - a0))
        };
        for i in 0..ny {
            xt[q][i] = lerp(lo_s.x[i], hi_s.x[i], th);
            dxt[q][i] = lerp(lo_s.dx[i], hi_s.dx[i], th);
        }
        resid[q] = hi_s.resid.clone();
        bt[q] = lerp(lo_s.b, hi_s.b, th);
        b1t[q] = lerp(lo_s.b1, hi_s.b1, th);
        b2t[q] = lerp(lo_s.b2, hi_s.b2, th);
    }

    let mut tm_counter = KernelCounter::new(grid, cfg.bandwidth);
    for &v in &values[..k_m] {
        tm_counter.add(v);
    }
    Ok(Construction {
        xi: cfg.xi,
        grid,
        m,
        t_m: w.time(k_m),
        l_tm: tm_counter.row(scale),
        l_t0,
        phi0,
        clock,
        u: cfg.u_grid.clone(),
        y: cfg.y_grid.clone(),
        x_of_y,
        x: xt,
        dx: dxt,
        b: bt,
        b_c1: b1t,
        b_c2: b2t,
        c_levels: (c1, c2),
        key_residual: resid,
        sign_violations,
    })
}

impl Construction {
    /// Index of `u` in the u-grid.
    pub fn u_index(&self, u: f64) -> Option<usize> {
        self.u.iter().position(|&v| (v - u).abs() <= 1e-12 * u.abs().max(1.0))
    }

    pub fn y_index(&self, y: f64) -> Option<usize> {
        self.y.iter().position(|&v| (v - y).abs() <= 1e-12 * y.abs().max(1.0))
    }

    /// `X_u(y)` at grid points, `None` when not represented.
    pub fn x_at(&self, u: f64, y: f64) -> Option<f64> {
        let v = self.x[self.u_index(u)?][self.y_index(y)?];
        v.is_finite().then_some(v)
    }

    /// Largest `|B^{c1}_u - B^{c2}_u|` over `u` where both are defined.
    pub fn c_consistency(&self) -> Option<f64> {
        self.b_c1
            .iter()
            .zip(&self.b_c2)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .reduce(f64::max)
    }

    /// CSV keyed by `(replica, u, y)` with columns `X`, `DX` and `B`.
    pub fn to_csv(&self, replica: u64, header: bool) -> String {
        let mut out = String::new();
        if header {
            out.push_str("replica,u,y,X,DX,B\n");
        }
        for (q, u) in self.u.iter().enumerate() {
            for (i, y) in self.y.iter().enumerate() {
                let _ = writeln!(out, "{replica},{u},{y},{},{},{}", self.x[q][i], self.dx[q][i], self.b[q]);
            }
        }
        out
    }
}

/// `Y⁺` and `Y⁻` built from `l(T_0, ·)` and `l(T_M, ·)`.
#[derive(Clone, Debug)]
pub struct YProcesses {
    pub plus: TimeSeries,
    pub minus: TimeSeries,
}

/// `Y⁻` at clock `∫_ξ^x dz/l(T_0,z)` for `ξ ≤ x < M` and `Y⁺` at clock
/// `∫_x^ξ dz/l(T_0,z)` for `0 < x ≤ ξ`, both valued
/// `(l(T_0,x) - l(T_M,x)) / l(T_0,x)` clamped to `[0, 1]`. Only points where
/// `l(T_0, ·) ≥ floor` are used.
pub fn y_processes(c: &Construction, floor: f64) -> Result<YProcesses> {
    let g = c.grid;
    let ii = InverseIntegral::new(g, &c.l_t0, floor);
    let ratio = |x: f64| {
        let t0 = g.interpolate(&c.l_t0, x);
        let tm = g.interpolate(&c.l_tm, x);
        ((t0 - tm) / t0).clamp(0.0, 1.0)
    };
    let y0 = ratio(c.xi);
    let p_xi = ii.primitive(c.xi);
    let nodes = g.nodes();
    let (mut tm, mut vm) = (vec![0.0], vec![y0]);
    for (j, &x) in nodes.iter().enumerate() {
        if x <= c.xi || x >= c.m {
            continue;
        }
        if c.l_t0[j] < floor {
            break;
        }
        tm.push(ii.primitive(x) - p_xi);
        vm.push(ratio(x));
    }
    let (mut tp, mut vp) = (vec![0.0], vec![y0]);
    for (j, &x) in nodes.iter().enumerate().rev() {
        if x >= c.xi {
            continue;
        }
        if x <= 0.0 || c.l_t0[j] < floor {
            break;
        }
        tp.push(p_xi - ii.primitive(x));
        vp.push(ratio(x));
    }
    Ok(YProcesses {
        plus: TimeSeries::new(tp, vp)?,
        minus: TimeSeries::new(tm, vm)?,
    })
}

/// Kernel local time of `path` at the single level `x`, before step `k_end`.
pub fn local_time_at(path: &SamplePath, x: f64, bandwidth: f64, k_end: usize) -> f64 {
    let n = path.values()[..k_end].iter().filter(|&&w| (w - x).abs() < bandwidth).count();
    n as f64 * path.dt() / (2.0 * bandwidth)
}

/// `Y_0 = (l(T_0, ξ) - l(T_M, ξ)) / l(T_0, ξ)` without building a grid.
pub fn y0_from_path(path: &SamplePath, xi: f64, bandwidth: f64) -> Result<f64> {
    let total = local_time_at(path, xi, bandwidth, path.len() - 1);
    if !(total > 0.0) {
        return Err(Error::Precondition("no local time accumulated at xi".into()));
    }
    let before = local_time_at(path, xi, bandwidth, path.argmax());
    Ok(((total - before) / total).clamp(0.0, 1.0))
}

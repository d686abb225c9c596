//! Kernel estimates of Brownian local time.
//!
//! Local time is the occupation density with respect to Lebesgue measure,
//! `∫_0^t f(W_s) ds = ∫ f(x) l(t, x) dx`, estimated with a box kernel of
//! half-width `bandwidth`:
//!
//! ```text
//! l(t_k, x_j) = 1/(2·bandwidth) · Σ_{s < t_k} dt · 1(|W_s - x_j| < bandwidth)
//! ```
//!
//! Integrals of `1/λ` are taken against `max(λ, λ_floor)`; every such
//! integral reports whether the floor was active.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::paths::SamplePath;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpaceGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
}

impl SpaceGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min < x_max) || nx < 2 {
            return Err(Error::invalid(format!(
                "space grid needs x_min < x_max and nx >= 2 (got [{x_min}, {x_max}], nx={nx})"
            )));
        }
        Ok(Self { x_min, x_max, nx })
    }

    /// Grid on `[x_min, x_max]` with spacing at most `dx`.
    pub fn with_spacing(x_min: f64, x_max: f64, dx: f64) -> Result<Self> {
        let cells = ((x_max - x_min) / dx).ceil().max(1.0) as usize;
        Self::new(x_min, x_max, cells + 1)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|j| self.node(j)).collect()
    }

    /// Linear interpolation of nodal values; zero outside the grid.
    pub fn interpolate(&self, row: &[f64], x: f64) -> f64 {
        if !(x >= self.x_min && x <= self.x_max) {
            return 0.0;
        }
        let s = (x - self.x_min) / self.dx();
        let j = (s.floor() as usize).min(self.nx - 2);
        let w = s - j as f64;
        row[j] * (1.0 - w) + row[j + 1] * w
    }

    /// Inclusive range of nodes strictly within `bandwidth` of `v`.
    #[inline]
    fn window(&self, v: f64, bandwidth: f64) -> Option<(usize, usize)> {
        let dx = self.dx();
        let lo = ((v - bandwidth - self.x_min) / dx).ceil();
        let hi = ((v + bandwidth - self.x_min) / dx).floor();
        if hi < 0.0 || lo > (self.nx - 1) as f64 {
            return None;
        }
        let mut lo = lo.max(0.0) as usize;
        let mut hi = (hi as usize).min(self.nx - 1);
        if (v - self.node(lo)).abs() >= bandwidth {
            lo += 1;
        }
        if hi >= lo && (v - self.node(hi)).abs() >= bandwidth {
            hi = hi.saturating_sub(1);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// Running box-kernel visit counts on a grid.
#[derive(Clone, Debug)]
pub(crate) struct KernelCounter {
    grid: SpaceGrid,
    bandwidth: f64,
    counts: Vec<u32>,
}

impl KernelCounter {
    pub(crate) fn new(grid: SpaceGrid, bandwidth: f64) -> Self {
        Self {
            grid,
            bandwidth,
            counts: vec![0; grid.nx],
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, v: f64) {
        if let Some((lo, hi)) = self.grid.window(v, self.bandwidth) {
            for c in &mut self.counts[lo..=hi] {
                *c += 1;
            }
        }
    }

    pub(crate) fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Local-time row for the counts so far.
    pub(crate) fn row(&self, scale: f64) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 * scale).collect()
    }
}

/// Counts of every step of `path` (terminal sample excluded).
pub(crate) fn total_counts(path: &SamplePath, grid: SpaceGrid, bandwidth: f64) -> Vec<u32> {
    let mut k = KernelCounter::new(grid, bandwidth);
    let v = path.values();
    for &x in &v[..v.len() - 1] {
        k.add(x);
    }
    k.counts
}

/// What the rows of a [`LocalTimeField`] hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    /// `l(t, x)`
    LocalTime,
    /// `λ(t, x) = l(T, x) - l(t, x)` for the terminal checkpoint `T`
    Remaining,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalTimeField {
    pub grid: SpaceGrid,
    /// Increasing checkpoint times; the first is the path origin and the last
    /// its terminal time.
    pub checkpoints: Vec<f64>,
    /// One row per checkpoint, one column per grid node.
    pub values: Vec<Vec<f64>>,
    pub bandwidth: f64,
    pub dt: f64,
    pub kind: FieldKind,
}

impl LocalTimeField {
    /// Row for the checkpoint within half a step of `t`.
    pub fn row_at(&self, t: f64) -> Option<&[f64]> {
        let tol = 0.5 * self.dt;
        self.checkpoints
            .iter()
            .position(|&c| (c - t).abs() <= tol)
            .map(|k| self.values[k].as_slice())
    }

    pub fn terminal_row(&self) -> &[f64] {
        &self.values[self.values.len() - 1]
    }

    pub fn terminal_time(&self) -> f64 {
        self.checkpoints[self.checkpoints.len() - 1]
    }

    /// Value at `(checkpoint k, x)` by linear interpolation in space.
    pub fn value(&self, k: usize, x: f64) -> f64 {
        self.grid.interpolate(&self.values[k], x)
    }

    /// `dx · Σ_j row_j`, the discrete total occupation of a row.
    pub fn occupation(&self, k: usize) -> f64 {
        self.grid.dx() * self.values[k].iter().sum::<f64>()
    }

    /// CSV with columns `t,x,l`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,l\n");
        for (t, row) in self.checkpoints.iter().zip(&self.values) {
            for (j, v) in row.iter().enumerate() {
                let _ = writeln!(out, "{},{},{}", t, self.grid.node(j), v);
            }
        }
        out
    }
}

/// Local-time field of `path` at the requested checkpoints. The path origin
/// and terminal time are always included.
pub fn local_time_field(
    path: &SamplePath,
    grid: SpaceGrid,
    checkpoints: &[f64],
    bandwidth: f64,
) -> Result<LocalTimeField> {
    let dx = grid.dx();
    if !(bandwidth >= 0.5 * dx) {
        return Err(Error::invalid(format!(
            "bandwidth {bandwidth} is below half the grid spacing {dx}; the kernel would undersample"
        )));
    }
    let t0 = path.origin_time();
    let t_end = t0 + path.duration();
    let tol = 0.5 * path.dt();
    let mut times: Vec<f64> = Vec::with_capacity(checkpoints.len() + 2);
    times.push(t0);
    for &t in checkpoints {
        if t < t0 - tol || t > t_end + tol {
            return Err(Error::invalid(format!(
                "checkpoint {t} outside the path's time span [{t0}, {t_end}]"
            )));
        }
        times.push(t);
    }
    times.push(t_end);
    times.sort_by(|a, b| a.total_cmp(b));
    let mut indices: Vec<usize> = times.iter().map(|&t| path.index_at(t)).collect();
    indices.dedup();
    let times: Vec<f64> = indices.iter().map(|&k| path.time(k)).collect();

    let scale = path.dt() / (2.0 * bandwidth);
    let mut counter = KernelCounter::new(grid, bandwidth);
    let mut rows = Vec::with_capacity(indices.len());
    let v = path.values();
    let mut s = 0;
    for &k in &indices {
        while s < k {
            counter.add(v[s]);
            s += 1;
        }
        rows.push(counter.row(scale));
    }
    Ok(LocalTimeField {
        grid,
        checkpoints: times,
        values: rows,
        bandwidth,
        dt: path.dt(),
        kind: FieldKind::LocalTime,
    })
}

/// `λ(t_k, x) = l(T, x) - l(t_k, x)` with `T` the terminal checkpoint.
pub fn lambda_field(ltf: &LocalTimeField) -> LocalTimeField {
    let last = ltf.terminal_row().to_vec();
    let values = ltf
        .values
        .iter()
        .map(|row| row.iter().zip(&last).map(|(l, t)| (t - l).max(0.0)).collect())
        .collect();
    LocalTimeField {
        values,
        kind: FieldKind::Remaining,
        ..ltf.clone()
    }
}

/// Cumulative trapezoid integral of `1 / max(row, floor)` along a grid,
/// interpolated linearly between nodes so that it stays exactly invertible
/// by piecewise-linear tables.
#[derive(Clone, Debug)]
pub struct InverseIntegral {
    grid: SpaceGrid,
    cum: Vec<f64>,
    row: Vec<f64>,
    floor: f64,
}

impl InverseIntegral {
    pub fn new(grid: SpaceGrid, row: &[f64], floor: f64) -> Self {
        let inv: Vec<f64> = row.iter().map(|&l| 1.0 / l.max(floor)).collect();
        let dx = grid.dx();
        let mut cum = Vec::with_capacity(inv.len());
        cum.push(0.0);
        for j in 1..inv.len() {
            cum.push(cum[j - 1] + 0.5 * dx * (inv[j - 1] + inv[j]));
        }
        Self {
            grid,
            cum,
            row: row.to_vec(),
            floor,
        }
    }

    /// `∫_{x_min}^x dz / max(λ(z), floor)`, linear beyond the grid.
    pub fn primitive(&self, x: f64) -> f64 {
        let g = &self.grid;
        let n = g.nx;
        if x <= g.x_min {
            return (x - g.x_min) / self.floor;
        }
        if x >= g.x_max {
            return self.cum[n - 1] + (x - g.x_max) / self.floor;
        }
        let s = (x - g.x_min) / g.dx();
        let j = (s.floor() as usize).min(n - 2);
        let w = s - j as f64;
        self.cum[j] + w * (self.cum[j + 1] - self.cum[j])
    }

    /// Signed `∫_from^to dz / max(λ(z), floor)`.
    pub fn integral(&self, from: f64, to: f64) -> f64 {
        self.primitive(to) - self.primitive(from)
    }

    /// Whether the floor is active anywhere on the closed segment between
    /// `from` and `to`.
    pub fn truncated(&self, from: f64, to: f64) -> bool {
        let (a, b) = if from <= to { (from, to) } else { (to, from) };
        if self.grid.interpolate(&self.row, a) < self.floor || self.grid.interpolate(&self.row, b) < self.floor {
            return true;
        }
        self.grid
            .nodes()
            .iter()
            .zip(&self.row)
            .any(|(&x, &l)| x > a && x < b && l < self.floor)
    }
}

/// Residual of the occupation identity
/// `∫_a^c dz/λ(t,z) - ∫_a^c dz/λ(0,z) - ∫_0^t 1(a ≤ W_s ≤ c) ds/λ(s,W_s)²`.
///
/// `ltf` must be the local-time field of `path` (its grid and bandwidth are
/// reused). The identity needs `c < M`, `t < T_M` and `λ ≥ floor` on
/// `[a, c] × [0, t]`; violations are reported as errors.
pub fn occupation_residual(
    path: &SamplePath,
    ltf: &LocalTimeField,
    a: f64,
    c: f64,
    t: f64,
    floor: f64,
) -> Result<f64> {
    if ltf.kind != FieldKind::LocalTime {
        return Err(Error::invalid("occupation residual needs a local-time field"));
    }
    if !(a < c) {
        return Err(Error::invalid("need a < c"));
    }
    let k_max = path.argmax();
    let m = path.values()[k_max];
    let k_t = path.index_at(t);
    if !(c < m) || k_t >= k_max {
        return Err(Error::Precondition(format!(
            "need c < M and t < T_M (c={c}, M={m}, t={t}, T_M={})",
            path.time(k_max)
        )));
    }
    let grid = ltf.grid;
    let scale = path.dt() / (2.0 * ltf.bandwidth);
    let total: Vec<f64> = total_counts(path, grid, ltf.bandwidth)
        .iter()
        .map(|&n| n as f64 * scale)
        .collect();
    let mut counter = KernelCounter::new(grid, ltf.bandwidth);
    let v = path.values();
    let mut rhs = 0.0;
    let dt = path.dt();
    let dx = grid.dx();
    for &x in &v[..k_t] {
        if x >= a && x <= c && x >= grid.x_min && x <= grid.x_max {
            let s = (x - grid.x_min) / dx;
            let j = (s.floor() as usize).min(grid.nx - 2);
            let f = s - j as f64;
            let n = counter.counts();
            let here = (total[j] - n[j] as f64 * scale) * (1.0 - f) + (total[j + 1] - n[j + 1] as f64 * scale) * f;
            rhs += dt / (here.max(floor) * here.max(floor));
        }
        counter.add(x);
    }
    let row_t: Vec<f64> = total
        .iter()
        .zip(counter.counts())
        .map(|(tot, &n)| tot - n as f64 * scale)
        .collect();
    let now = InverseIntegral::new(grid, &row_t, floor);
    if now.truncated(a, c) {
        return Err(Error::Precondition(format!(
            "remaining local time drops below the floor {floor} on [{a}, {c}] by time {t}"
        )));
    }
    let start = InverseIntegral::new(grid, &total, floor);
    Ok(now.integral(a, c) - start.integral(a, c) - rhs)
}

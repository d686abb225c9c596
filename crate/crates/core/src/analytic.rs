//! Sturm–Liouville solutions `Φ_ν`, the scale map `h`, path and local-time
//! transforms under `h`, and the local-time functionals `F`, `G`, `G±` and
//! `M*`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::local_time::{InverseIntegral, KernelCounter, LocalTimeField, SpaceGrid};
use crate::paths::SamplePath;

/// Exponents below this are clipped before `exp`.
pub const LOG_CLIP: f64 = -700.0;

fn clipped_exp(x: f64) -> f64 {
    x.max(LOG_CLIP).exp()
}

/// A finite measure on `(0, ∞)`: point masses plus a piecewise-constant
/// density.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure {
    /// `(location, mass)`
    pub atoms: Vec<(f64, f64)>,
    /// `(start, end, rate)`
    pub density: Vec<(f64, f64, f64)>,
}

impl FiniteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>, density: Vec<(f64, f64, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(p, m)| !(p > 0.0 && p.is_finite() && m > 0.0 && m.is_finite())) {
            return Err(Error::invalid("atoms need positive finite locations and masses"));
        }
        if density
            .iter()
            .any(|&(s, e, r)| !(s > 0.0 && e > s && e.is_finite() && r >= 0.0 && r.is_finite()))
        {
            return Err(Error::invalid("density pieces need 0 < start < end < ∞ and a non-negative rate"));
        }
        let nu = Self { atoms, density };
        if !(nu.total_mass() > 0.0) {
            return Err(Error::invalid("measure must have positive mass"));
        }
        Ok(nu)
    }

    pub fn atom(location: f64, mass: f64) -> Result<Self> {
        Self::new(vec![(location, mass)], Vec::new())
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.density.iter().map(|&(s, e, r)| (e - s) * r).sum::<f64>()
    }

    /// Right end of the support.
    pub fn support_end(&self) -> f64 {
        let a = self.atoms.iter().map(|a| a.0).fold(0.0, f64::max);
        self.density.iter().filter(|d| d.2 > 0.0).map(|d| d.1).fold(a, f64::max)
    }

    fn rate_at(&self, x: f64) -> f64 {
        self.density.iter().filter(|&&(s, e, _)| x > s && x < e).map(|d| d.2).sum()
    }

    /// `∫ ν(dy) f(y)` where `f` is given on a grid (atoms by interpolation,
    /// density by trapezoid on the grid).
    pub fn integrate_row(&self, grid: SpaceGrid, row: &[f64]) -> f64 {
        let mut s: f64 = self.atoms.iter().map(|&(p, m)| m * grid.interpolate(row, p)).sum();
        let dx = grid.dx();
        for j in 0..grid.nx - 1 {
            let mid = grid.node(j) + 0.5 * dx;
            let r = self.rate_at(mid);
            if r > 0.0 {
                s += r * 0.5 * dx * (row[j] + row[j + 1]);
            }
        }
        s
    }
}

/// `Φ_ν` on `[0, R]`, `R` the end of the support; constant beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct SLSolution {
    pub nodes: Vec<f64>,
    pub phi: Vec<f64>,
    /// `Φ'` from the left at each node (the first entry repeats the right
    /// derivative at 0).
    pub dphi_left: Vec<f64>,
    /// `Φ'` from the right at each node.
    pub dphi_right: Vec<f64>,
}

impl SLSolution {
    pub fn end(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// `Φ(x)` by cubic Hermite interpolation between nodes.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x >= self.end() {
            return self.phi[n - 1];
        }
        if x <= 0.0 {
            return 1.0 + self.dphi_right[0] * x;
        }
        let j = self.nodes.partition_point(|&s| s <= x).clamp(1, n - 1) - 1;
        let (x0, x1) = (self.nodes[j], self.nodes[j + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (p0, p1) = (self.phi[j], self.phi[j + 1]);
        let (m0, m1) = (self.dphi_right[j] * h, self.dphi_left[j + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * p0 + (t3 - 2.0 * t2 + t) * m0 + (-2.0 * t3 + 3.0 * t2) * p1 + (t3 - t2) * m1
    }

    /// CSV with columns `x,phi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,phi\n");
        for (x, p) in self.nodes.iter().zip(&self.phi) {
            let _ = writeln!(out, "{x},{p}");
        }
        out
    }
}

/// Solves `φ'' = φν` backward from `R` with `φ(R) = 1`, `φ'(R) = 0`, then
/// rescales so that `φ(0) = 1`. Density pieces are integrated in closed form
/// and atoms enter as derivative jumps `φ'(p-) = φ'(p+) - μφ(p)`.
pub fn solve_phi(nu: &FiniteMeasure, ngrid: usize) -> Result<SLSolution> {
    if ngrid < 2 {
        return Err(Error::invalid("ngrid must be at least 2"));
    }
    let r = nu.support_end();
    let mut nodes: Vec<f64> = (0..ngrid).map(|i| r * i as f64 / (ngrid - 1) as f64).collect();
    nodes.extend(nu.atoms.iter().map(|a| a.0));
    for &(s, e, _) in &nu.density {
        nodes.extend([s.min(r), e.min(r)]);
    }
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * r);
    let n = nodes.len();
    let mut phi = vec![0.0; n];
    let mut dl = vec![0.0; n];
    let mut dr = vec![0.0; n];
    let atom_mass = |x: f64| -> f64 {
        nu.atoms
            .iter()
            .filter(|a| (a.0 - x).abs() <= 1e-14 * r)
            .map(|a| a.1)
            .sum()
    };
    phi[n - 1] = 1.0;
    dr[n - 1] = 0.0;
    for j in (0..n).rev() {
        if j < n - 1 {
            let h = nodes[j + 1] - nodes[j];
            let rho = nu.rate_at(0.5 * (nodes[j] + nodes[j + 1]));
            let (p, d) = (phi[j + 1], dl[j + 1]);
            if rho > 0.0 {
                let k = rho.sqrt();
                let (c, s) = ((k * h).cosh(), (k * h).sinh());
                phi[j] = p * c - d * s / k;
                dr[j] = -p * k * s + d * c;
            } else {
                phi[j] = p - h * d;
                dr[j] = d;
            }
        }
        if !(phi[j] > 0.0) {
            return Err(Error::Internal(format!("Sturm-Liouville solution lost positivity at x = {}", nodes[j])));
        }
        dl[j] = dr[j] - atom_mass(nodes[j]) * phi[j];
    }
    dl[0] = dr[0];
    let phi0 = phi[0];
    for v in phi.iter_mut().chain(dl.iter_mut()).chain(dr.iter_mut()) {
        *v /= phi0;
    }
    Ok(SLSolution {
        nodes,
        phi,
        dphi_left: dl,
        dphi_right: dr,
    })
}

/// Strictly increasing map `h` with `h(0) = 0`, tabulated with its
/// derivative and extended linearly beyond the last node.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneMap {
    pub ys: Vec<f64>,
    pub hs: Vec<f64>,
    pub dh: Vec<f64>,
}

impl MonotoneMap {
    pub fn identity(end: f64) -> Self {
        Self {
            ys: vec![0.0, end],
            hs: vec![0.0, end],
            dh: vec![1.0, 1.0],
        }
    }

    fn seg(xs: &[f64], x: f64) -> usize {
        xs.partition_point(|&s| s <= x).clamp(1, xs.len() - 1) - 1
    }

    pub fn eval(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y >= self.ys[n - 1] {
            return self.hs[n - 1] + self.dh[n - 1] * (y - self.ys[n - 1]);
        }
        let j = Self::seg(&self.ys, y);
        let w = (y - self.ys[j]) / (self.ys[j + 1] - self.ys[j]);
        self.hs[j] + w * (self.hs[j + 1] - self.hs[j])
    }

    pub fn inverse(&self, x: f64) -> f64 {
        let n = self.ys.len();
        if x >= self.hs[n - 1] {
            return self.ys[n - 1] + (x - self.hs[n - 1]) / self.dh[n - 1];
        }
        let j = Self::seg(&self.hs, x);
        let w = (x - self.hs[j]) / (self.hs[j + 1] - self.hs[j]);
        self.ys[j] + w * (self.ys[j + 1] - self.ys[j])
    }

    /// `h'(y)` by linear interpolation of the derivative table.
    pub fn derivative(&self, y: f64) -> f64 {
        let n = self.ys.len();
        if y >= self.ys[n - 1] {
            return self.dh[n - 1];
        }
        if y <= 0.0 {
            return self.dh[0];
        }
        let j = Self::seg(&self.ys, y);
        let w = (y - self.ys[j]) / (self.ys[j + 1] - self.ys[j]);
        self.dh[j] + w * (self.dh[j + 1] - self.dh[j])
    }

    /// Largest tabulated value of `h`.
    pub fn table_end(&self) -> f64 {
        self.hs[self.hs.len() - 1]
    }

    /// CSV with columns `y,h,dh`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,h,dh\n");
        for ((y, h), d) in self.ys.iter().zip(&self.hs).zip(&self.dh) {
            let _ = writeln!(out, "{y},{h},{d}");
        }
        out
    }
}

/// `h(y) = ∫_0^y dx / Φ(x)²` by the trapezoid rule on the solution nodes.
pub fn h_map(sol: &SLSolution) -> MonotoneMap {
    let dh: Vec<f64> = sol.phi.iter().map(|p| 1.0 / (p * p)).collect();
    let mut hs = vec![0.0; sol.nodes.len()];
    for j in 1..hs.len() {
        hs[j] = hs[j - 1] + 0.5 * (sol.nodes[j] - sol.nodes[j - 1]) * (dh[j - 1] + dh[j]);
    }
    MonotoneMap {
        ys: sol.nodes.clone(),
        hs,
        dh,
    }
}

/// A path transformed by `T_h`.
#[derive(Clone, Debug)]
pub struct TransformedPath {
    /// `W^h` on a uniform grid with the step of the input path, ending at 0.
    pub path: SamplePath,
    /// `C_{t_k} = Σ_{s<k} dt / h'(h⁻¹(W_s))²`, the inverse of `H`.
    pub clock: Vec<f64>,
    /// Whether `W` left the tabulated range of `h`.
    pub extended: bool,
}

impl TransformedPath {
    /// `H_u`, the original time at transformed time `u`.
    pub fn original_time(&self, u: f64, dt: f64) -> f64 {
        let k = self.clock.partition_point(|&c| c <= u).clamp(1, self.clock.len() - 1) - 1;
        let (c0, c1) = (self.clock[k], self.clock[k + 1]);
        dt * (k as f64 + ((u - c0) / (c1 - c0)).clamp(0.0, 1.0))
    }
}

/// `W^h_u = h⁻¹(W_{H_u})` for a path stopped at `T_0`.
pub fn transform_path(w: &SamplePath, h: &MonotoneMap) -> Result<TransformedPath> {
    if w.last() != 0.0 {
        return Err(Error::invalid("T_h is applied to paths stopped at 0"));
    }
    let v = w.values();
    let dt = w.dt();
    let end = h.table_end();
    let mut extended = false;
    let mut clock = Vec::with_capacity(v.len());
    let mut c = 0.0;
    clock.push(c);
    for &x in &v[..v.len() - 1] {
        if x > end {
            extended = true;
        }
        let d = h.derivative(h.inverse(x));
        c += dt / (d * d);
        clock.push(c);
    }
    let total = c;
    let n = (total / dt).floor() as usize;
    let mut out = Vec::with_capacity(n + 2);
    let mut k = 0;
    for j in 0..=n {
        let u = j as f64 * dt;
        while k + 1 < clock.len() - 1 && clock[k + 1] <= u {
            k += 1;
        }
        let th = ((u - clock[k]) / (clock[k + 1] - clock[k])).clamp(0.0, 1.0);
        let x = v[k] + th * (v[k + 1] - v[k]);
        out.push(h.inverse(x));
    }
    if out[out.len() - 1] != 0.0 {
        out.push(0.0);
    }
    Ok(TransformedPath {
        path: SamplePath::new(dt, out)?,
        clock,
        extended,
    })
}

/// `l^h(t, y) = l(H_t, h(y)) / h'(y)` on a grid of `y = h⁻¹(x)` with the same
/// node count. Checkpoint times become `C_t = ∫ l(t, x) dx / h'(h⁻¹(x))²`.
pub fn transform_local_times(ltf: &LocalTimeField, h: &MonotoneMap) -> Result<LocalTimeField> {
    let g = ltf.grid;
    let grid = SpaceGrid::new(h.inverse(g.x_min.max(0.0)), h.inverse(g.x_max), g.nx)?;
    let weight: Vec<f64> = g
        .nodes()
        .iter()
        .map(|&x| {
            let d = h.derivative(h.inverse(x.max(0.0)));
            1.0 / (d * d)
        })
        .collect();
    let checkpoints = ltf
        .values
        .iter()
        .map(|row| g.dx() * row.iter().zip(&weight).map(|(l, w)| l * w).sum::<f64>())
        .collect();
    let ys = grid.nodes();
    let values = ltf
        .values
        .iter()
        .map(|row| ys.iter().map(|&y| g.interpolate(row, h.eval(y)) / h.derivative(y)).collect())
        .collect();
    Ok(LocalTimeField {
        grid,
        checkpoints,
        values,
        bandwidth: ltf.bandwidth,
        dt: ltf.dt,
        kind: ltf.kind,
    })
}

/// Kernel resolution shared by the functionals below.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolution {
    pub bandwidth: f64,
    pub dx: f64,
    pub floor: f64,
}

fn window_grid(a: f64, c: f64, res: &Resolution) -> Result<SpaceGrid> {
    SpaceGrid::with_spacing(a, c, res.dx)
}

fn check_kappa(kappa: f64, a: f64, c: f64) -> Result<()> {
    if !(kappa > 2.0) {
        return Err(Error::invalid(format!("kappa must exceed 2 (got {kappa})")));
    }
    if !(0.0 < a && a < c) {
        return Err(Error::invalid("need 0 < a < c"));
    }
    Ok(())
}

/// First index at which the path is at or beyond `a` (from above) or `c`
/// (from below), with a flag telling whether `c` came first.
fn exit_index(v: &[f64], a: f64, c: f64) -> Option<(usize, bool)> {
    v.iter().position(|&x| x <= a || x >= c).map(|k| (k, v[k] >= c))
}

fn counts_rows(w: &SamplePath, grid: SpaceGrid, res: &Resolution, at: &[usize]) -> Vec<Vec<f64>> {
    let scale = w.dt() / (2.0 * res.bandwidth);
    let v = w.values();
    let mut counter = KernelCounter::new(grid, res.bandwidth);
    let mut rows = Vec::with_capacity(at.len());
    let mut s = 0;
    for &k in at {
        while s < k {
            counter.add(v[s]);
            s += 1;
        }
        rows.push(counter.row(scale));
    }
    rows
}

/// `F = 1(T_c<T_a) exp{-κ²/2 ∫_a^c dy/λ(T_c,y)} + 1(T_a<T_c) exp{-κ(κ-2)/2 ∫_a^c dy/λ(T_a,y)}`
/// for a path stopped at 0.
pub fn functional_f(w: &SamplePath, kappa: f64, a: f64, c: f64, res: &Resolution) -> Result<f64> {
    check_kappa(kappa, a, c)?;
    let v = w.values();
    let (k, c_first) = exit_index(v, a, c).ok_or_else(|| Error::Precondition("path never leaves (a, c)".into()))?;
    let grid = window_grid(a, c, res)?;
    let rows = counts_rows(w, grid, res, &[k, v.len() - 1]);
    let lam: Vec<f64> = rows[1].iter().zip(&rows[0]).map(|(t, s)| (t - s).max(0.0)).collect();
    let integral = InverseIntegral::new(grid, &lam, res.floor).integral(a, c);
    let coef = if c_first { kappa * kappa } else { kappa * (kappa - 2.0) };
    Ok(clipped_exp(-0.5 * coef * integral))
}

/// `exp{-p ∫_a^b dy/l - q ∫_b^c dy/l}` for a terminal local-time row.
#[allow(clippy::too_many_arguments)]
fn split_exponential(row: &[f64], grid: SpaceGrid, floor: f64, a: f64, b: f64, c: f64, p: f64, q: f64) -> f64 {
    let ii = InverseIntegral::new(grid, row, floor);
    clipped_exp(-p * ii.integral(a, b) - q * ii.integral(b, c))
}

/// `G = exp{-κ²/2 ∫_a^b dy/l(T_0,y) - κ(κ-2)/2 ∫_b^c dy/l(T_0,y)}` from the
/// terminal row of a local-time field.
pub fn functional_g(ltf: &LocalTimeField, kappa: f64, a: f64, b: f64, c: f64, floor: f64) -> Result<f64> {
    check_kappa(kappa, a, c)?;
    if !(a <= b && b <= c) {
        return Err(Error::invalid("need a <= b <= c"));
    }
    Ok(split_exponential(
        ltf.terminal_row(),
        ltf.grid,
        floor,
        a,
        b,
        c,
        0.5 * kappa * kappa,
        0.5 * kappa * (kappa - 2.0),
    ))
}

/// `G₊ = exp{-κ²/2 ∫_a^c dy/l(T_0,y)}`.
pub fn functional_g_plus(ltf: &LocalTimeField, kappa: f64, a: f64, c: f64, floor: f64) -> Result<f64> {
    functional_g(ltf, kappa, a, c, c, floor)
}

/// `G₋ = exp{-κ(κ-2)/2 ∫_a^c dy/l(T_0,y)}`.
pub fn functional_g_minus(ltf: &LocalTimeField, kappa: f64, a: f64, c: f64, floor: f64) -> Result<f64> {
    functional_g(ltf, kappa, a, a, c, floor)
}

/// Terminal local-time field of `w` on `[a, c]`, for the `G` functionals.
pub fn window_field(w: &SamplePath, a: f64, c: f64, res: &Resolution) -> Result<LocalTimeField> {
    let grid = window_grid(a, c, res)?;
    crate::local_time::local_time_field(w, grid, &[], res.bandwidth)
}

/// `M*_t` at each checkpoint time; times at or after `T_a ∧ T_c` take the
/// frozen value `M*_{T_a∧T_c}`.
pub fn mstar_series(w: &SamplePath, kappa: f64, a: f64, c: f64, checkpoints: &[f64], res: &Resolution) -> Result<Vec<f64>> {
    check_kappa(kappa, a, c)?;
    let v = w.values();
    if !(v[0] > a && v[0] < c) {
        return Err(Error::invalid("M* needs a < W_0 < c"));
    }
    let (k_exit, _) = exit_index(v, a, c).ok_or_else(|| Error::Precondition("path never leaves (a, c)".into()))?;
    let steps: Vec<usize> = checkpoints
        .iter()
        .map(|&t| if t.is_finite() { w.index_at(t).min(k_exit) } else { k_exit })
        .collect();
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by_key(|&i| steps[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| steps[i]).collect();
    let grid = window_grid(a, c, res)?;
    let mut at = sorted.clone();
    at.push(v.len() - 1);
    let rows = counts_rows(w, grid, res, &at);
    let total = &rows[rows.len() - 1];
    let p = 0.5 * kappa * kappa;
    let q = 0.5 * kappa * (kappa - 2.0);
    let mut out = vec![0.0; steps.len()];
    for (r, &i) in order.iter().enumerate() {
        let lam: Vec<f64> = total.iter().zip(&rows[r]).map(|(t, s)| (t - s).max(0.0)).collect();
        let wt = v[sorted[r]].clamp(a, c);
        out[i] = split_exponential(&lam, grid, res.floor, a, wt, c, p, q);
    }
    Ok(out)
}

/// `exp{-½ ∫ ν(dy) l(T_0, y)}` from a terminal local-time row.
pub fn nu_exponential(nu: &FiniteMeasure, ltf: &LocalTimeField) -> f64 {
    clipped_exp(-0.5 * nu.integrate_row(ltf.grid, ltf.terminal_row()))
}

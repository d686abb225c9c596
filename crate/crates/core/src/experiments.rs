//! Experiment registry: one runner per acceptance criterion.
//!
//! Replica `i` of every Monte Carlo population draws from
//! `derive_stream(derive_seed(base_seed, tag), i)`, and results are collected
//! in replica order, so reports do not depend on the number of worker threads.

use rayon::prelude::*;

use crate::analytic::{
    functional_f, functional_g, functional_g_minus, functional_g_plus, h_map, mstar_series, solve_phi, window_field,
    FiniteMeasure, Resolution,
};
use crate::besq;
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::flow_direct::{dx_at_exit_with, flow_at_times, ExitControl, FlowParams, MAX_EXIT_STEPS};
use crate::flow_from_w::{construct_flow, geometric_grid, y0_from_path, Construction, ConstructionConfig};
use crate::jacobi::{self, JacobiParams};
use crate::local_time::{local_time_field, occupation_residual, InverseIntegral, SpaceGrid};
use crate::paths::{brownian_path_with, Ceiling, SamplePath, StopRule};
use crate::rng::{derive_seed, derive_stream, RandomStream};
use crate::stats::{
    drift_test, independence_test, ks_test, mean_and_se, mean_compare, KsReference, MeanTarget, TestReport,
    DEFAULT_ALPHA,
};

/// One registry entry.
#[derive(Clone, Copy, Debug)]
pub struct ExperimentInfo {
    pub id: &'static str,
    pub summary: &'static str,
}

pub const REGISTRY: [ExperimentInfo; 13] = [
    ExperimentInfo { id: "A1", summary: "1/DX_inf(0) of the direct flow is uniform on [0,1]" },
    ExperimentInfo { id: "A2", summary: "Y_0 from local times is uniform and matches the A1 sample" },
    ExperimentInfo { id: "A3", summary: "post-maximum local time at xi is exponential with mean 2xi(m-xi)/m" },
    ExperimentInfo { id: "A4", summary: "squared Bessel convolution identity on a 27-point lattice" },
    ExperimentInfo { id: "A5", summary: "squared Bessel additivity in dimension and starting point" },
    ExperimentInfo { id: "A6", summary: "E[F] = E[G] for the exit and terminal local-time functionals" },
    ExperimentInfo { id: "A7", summary: "occupation identity for the remaining local time" },
    ExperimentInfo { id: "A8", summary: "constructed flow has the law of the direct flow" },
    ExperimentInfo { id: "A9", summary: "extracted driving motion is Brownian and level-consistent" },
    ExperimentInfo { id: "A10", summary: "constructed flow is independent of the terminal local times" },
    ExperimentInfo { id: "A11", summary: "skew product of two squared Bessel processes is Jacobi" },
    ExperimentInfo { id: "A12", summary: "Sturm-Liouville solution, its path characterization and change of measure" },
    ExperimentInfo { id: "A13", summary: "M* has constant mean; three-start linearity of E[G]" },
];

pub fn registry() -> &'static [ExperimentInfo] {
    &REGISTRY
}

/// Below this many replicas reports carry `underpowered=true`.
pub const UNDERPOWERED_BELOW: usize = 1000;

const KS_ALLOWANCE: f64 = 0.01;
const MAX_ATTEMPTS: usize = 100_000;

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    if cfg.experiment == "ALL" {
        let mut out = Vec::new();
        for info in &REGISTRY {
            out.extend(run_one(info.id, cfg)?);
        }
        return Ok(out);
    }
    run_one(&cfg.experiment, cfg)
}

fn run_one(id: &str, cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let reports = match id {
        "A1" => a1(cfg)?,
        "A2" => a2(cfg)?,
        "A3" => a3(cfg)?,
        "A4" => a4()?,
        "A5" => a5(cfg)?,
        "A6" => a6(cfg)?,
        "A7" => a7(cfg)?,
        "A8" => a8(cfg)?,
        "A9" => a9(cfg)?,
        "A10" => a10(cfg)?,
        "A11" => a11(cfg)?,
        "A12" => a12(cfg)?,
        "A13" => a13(cfg)?,
        other => return Err(Error::UnknownExperiment(other.to_string())),
    };
    let monte_carlo = id != "A4";
    Ok(reports
        .into_iter()
        .map(|r| {
            let r = r.tagged(id, cfg.base_seed);
            if monte_carlo && cfg.replicas < UNDERPOWERED_BELOW {
                r.with_detail("underpowered", true)
            } else {
                r
            }
        })
        .collect())
}

/// Runs `f` on replicas `0..n` of the population `tag`, in replica order.
fn replicate<T, F>(cfg: &ExperimentConfig, tag: u64, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RandomStream) -> Result<T> + Sync,
{
    let seed = derive_seed(cfg.base_seed, tag);
    (0..n as u64)
        .into_par_iter()
        .map(|i| f(&mut derive_stream(seed, i)))
        .collect()
}

/// Retries `draw` on the same stream until it yields a value.
fn until_some<T>(stream: &mut RandomStream, mut draw: impl FnMut(&mut RandomStream) -> Result<Option<T>>) -> Result<T> {
    for _ in 0..MAX_ATTEMPTS {
        if let Some(v) = draw(stream)? {
            return Ok(v);
        }
    }
    Err(Error::Internal(format!("no admissible draw in {MAX_ATTEMPTS} attempts")))
}

fn resolution(cfg: &ExperimentConfig) -> Resolution {
    Resolution {
        bandwidth: cfg.bandwidth,
        dx: cfg.dx,
        floor: cfg.lambda_floor,
    }
}

fn uniform_cdf(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Brownian path from `x0` stopped at 0, conditioned on staying below `ceiling`.
fn conditioned_path(cfg: &ExperimentConfig, x0: f64, ceiling: f64, stream: &mut RandomStream) -> Result<SamplePath> {
    until_some(stream, |s| {
        Ok(brownian_path_with(x0, cfg.dt, StopRule::HitLevel(0.0), Ceiling::Reject(ceiling), s)?.map(|p| p.path))
    })
}

/// Brownian path from `x0` stopped at 0 whose excursions above `top` are cut.
/// Everything the kernel sees below `top` keeps its exact law.
fn folded_path(cfg: &ExperimentConfig, x0: f64, top: f64, stream: &mut RandomStream) -> Result<SamplePath> {
    let resume = top.max(x0) + 2.0 * cfg.bandwidth;
    let level = resume + 0.05;
    let p = brownian_path_with(x0, cfg.dt, StopRule::HitLevel(0.0), Ceiling::Fold { level, resume }, stream)?;
    p.map(|p| p.path)
        .ok_or_else(|| Error::Internal("fold ceiling rejected a path".into()))
}

// A1 -------------------------------------------------------------------------

fn a1_samples(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let params = FlowParams::transient(cfg.dt, cfg.exit_level)?;
    let ctl = ExitControl {
        refine: cfg.extra_or("refine", 100)?,
        dx_cap: cfg.extra_or("dx_cap", 1e3)?,
        max_steps: MAX_EXIT_STEPS,
    };
    replicate(cfg, 1, cfg.replicas, |s| Ok(1.0 / dx_at_exit_with(s, 0.0, &params, &ctl)?))
}

fn a1(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let u = a1_samples(cfg)?;
    Ok(vec![ks_test("ks_inverse_dx_uniform", &u, KsReference::Cdf(&uniform_cdf), DEFAULT_ALPHA, KS_ALLOWANCE)?])
}

// A2 -------------------------------------------------------------------------

fn a2(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let ceiling = cfg.extra_or("ceiling", 4.0)?;
    let y0 = replicate(cfg, 2, cfg.replicas, |s| {
        until_some(s, |s| {
            let p = conditioned_path(cfg, cfg.xi, ceiling, s)?;
            match y0_from_path(&p, cfg.xi, cfg.bandwidth) {
                Ok(y) => Ok(Some(y)),
                Err(Error::Precondition(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
    })?;
    let direct = a1_samples(cfg)?;
    Ok(vec![
        ks_test("ks_y0_uniform", &y0, KsReference::Cdf(&uniform_cdf), DEFAULT_ALPHA, KS_ALLOWANCE)?
            .with_detail("ceiling", ceiling),
        ks_test("ks_y0_vs_inverse_dx", &y0, KsReference::Sample(&direct), DEFAULT_ALPHA, KS_ALLOWANCE)?,
    ])
}

// A3 -------------------------------------------------------------------------

fn a3(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let xi = cfg.xi;
    let lo = cfg.extra_or("max_low", 2.0 * xi)?;
    let hi = cfg.extra_or("max_high", 2.05 * xi)?;
    if !(xi < lo && lo < hi) {
        return Err(Error::invalid("need xi < max_low < max_high"));
    }
    let bw = cfg.bandwidth;
    // Reaching `lo` first and then hitting 0 before `hi` is exactly the event
    // M ∈ [lo, hi]; the part before reaching `lo` stays below the maximum and
    // does not contribute to the post-maximum local time.
    let pairs = replicate(cfg, 3, cfg.replicas, |s| {
        let p = conditioned_path(cfg, lo, hi, s)?;
        let v = p.values();
        let k_m = p.argmax();
        let hits = v[k_m..v.len() - 1].iter().filter(|&&w| (w - xi).abs() < bw).count();
        Ok((hits as f64 * cfg.dt / (2.0 * bw), v[k_m]))
    })?;
    let mean_of = |m: f64| 2.0 * xi * (m - xi) / m;
    let excess: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let pit: Vec<f64> = pairs.iter().map(|&(x, m)| 1.0 - (-x / mean_of(m)).exp()).collect();
    let allowance = cfg.extra_or("mean_allowance", 0.05)?;
    Ok(vec![
        mean_compare("mean_post_max_local_time", &excess, MeanTarget::Value(mean_of(lo)), 3.0, allowance)?,
        ks_test("ks_exponential_pit", &pit, KsReference::Cdf(&uniform_cdf), DEFAULT_ALPHA, KS_ALLOWANCE)?,
    ])
}

// A4 -------------------------------------------------------------------------

fn a4() -> Result<Vec<TestReport>> {
    let grid = [0.5, 1.0, 2.0];
    let mut out = Vec::with_capacity(27);
    for delta in [0.0, 1.0, 2.0] {
        for &s in &grid {
            for &t in &grid {
                let r = besq::kernel_residual(delta, s, t, 1.0, 1.0)?;
                out.push(TestReport::new(format!("kernel_residual_d{delta}_s{s}_t{t}"), r.abs(), 1e-6, 1));
            }
        }
    }
    Ok(out)
}

// A5 -------------------------------------------------------------------------

fn a5(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let cases = [(0.0, 2.0, 1.0, 1.0, 1.0), (2.0, 2.0, 0.0, 3.0, 0.5)];
    let mut out = Vec::new();
    for (k, &(d1, d2, x, y, t)) in cases.iter().enumerate() {
        let tag = 50 + 2 * k as u64;
        let sums = replicate(cfg, tag, cfg.replicas, |s| Ok(besq::sample(d1, t, x, s)? + besq::sample(d2, t, y, s)?))?;
        let joint = replicate(cfg, tag + 1, cfg.replicas, |s| besq::sample(d1 + d2, t, x + y, s))?;
        out.push(
            ks_test(&format!("ks_additivity_case{}", k + 1), &sums, KsReference::Sample(&joint), DEFAULT_ALPHA, 0.0)?
                .with_detail("params", format!("d={d1};d'={d2};x={x};y={y};t={t}")),
        );
    }
    Ok(out)
}

// A6 -------------------------------------------------------------------------

fn a6(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let (a, b, c, kappa) = (0.5, 1.0, 2.0, 3.0);
    let n = cfg.extra_or("samples", 2 * cfg.replicas)?;
    let res = resolution(cfg);
    let f = replicate(cfg, 6, n, |s| functional_f(&folded_path(cfg, b, c, s)?, kappa, a, c, &res))?;
    let g = replicate(cfg, 7, n, |s| {
        let ltf = window_field(&folded_path(cfg, b, c, s)?, a, c, &res)?;
        functional_g(&ltf, kappa, a, b, c, cfg.lambda_floor)
    })?;
    let allowance = cfg.extra_or("bias_allowance", 0.01)?;
    Ok(vec![mean_compare("mean_f_vs_g", &f, MeanTarget::Sample(&g), 3.0, allowance)?])
}

// A7 -------------------------------------------------------------------------

/// `|residual|` for one admissible `(path, a, c, t)` draw, or `None`.
fn occupation_draw(cfg: &ExperimentConfig, dt: f64, bw: f64, ceiling: f64, s: &mut RandomStream) -> Result<Option<f64>> {
    let p = until_some(s, |s| {
        Ok(brownian_path_with(cfg.xi, dt, StopRule::HitLevel(0.0), Ceiling::Reject(ceiling), s)?.map(|p| p.path))
    })?;
    let m = p.max();
    let t_m = p.time(p.argmax());
    let a = cfg.xi * (0.1 + 0.8 * s.uniform());
    let c = cfg.xi + (m - cfg.xi) * 0.8 * s.uniform();
    let t = t_m * s.uniform();
    let lo = p.values().iter().copied().fold(0.0, f64::min) - 2.0 * bw;
    let grid = SpaceGrid::with_spacing(lo, m + 2.0 * bw + bw, bw)?;
    let ltf = local_time_field(&p, grid, &[], bw)?;
    match occupation_residual(&p, &ltf, a, c, t, cfg.lambda_floor) {
        Ok(r) => Ok(Some(r.abs())),
        Err(Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn a7(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let ceiling = cfg.extra_or("ceiling", 4.0)?;
    let run = |dt: f64, bw: f64, tag: u64| -> Result<(f64, usize)> {
        let draws = replicate(cfg, tag, cfg.replicas, |s| occupation_draw(cfg, dt, bw, ceiling, s))?;
        let mut ok: Vec<f64> = draws.into_iter().flatten().collect();
        if ok.is_empty() {
            return Err(Error::Stats("no admissible occupation draws".into()));
        }
        let n = ok.len();
        Ok((median(&mut ok), n))
    };
    let (coarse, n1) = run(cfg.dt, cfg.bandwidth, 70)?;
    let (fine, n2) = run(0.5 * cfg.dt, 0.5 * cfg.bandwidth, 71)?;
    let ratio = coarse / fine;
    Ok(vec![
        TestReport::new("median_abs_occupation_residual", coarse, 0.05, n1).with_detail("draws", cfg.replicas),
        // pass ⇔ statistic ≤ threshold, so the shrink factor enters inverted
        TestReport::new("inverse_shrink_factor", 1.0 / ratio, 1.0 / 2f64.sqrt(), n2)
            .with_detail("median_fine", fine)
            .with_detail("shrink_factor", ratio),
    ])
}

// A8–A10 ---------------------------------------------------------------------

fn construction_config(cfg: &ExperimentConfig, extra_u: &[f64], y_grid: Vec<f64>) -> ConstructionConfig {
    let mut cc = ConstructionConfig::new(cfg.xi, cfg.bandwidth, cfg.dx, cfg.lambda_floor);
    cc.u_grid = geometric_grid(cfg.u_max, 12, extra_u);
    cc.y_grid = y_grid;
    cc
}

/// One construction per replica. Paths whose discrete clock stops short of
/// `u_needed` are redrawn; the second component counts the redraws.
fn constructions(cfg: &ExperimentConfig, cc: &ConstructionConfig, tag: u64, u_needed: f64) -> Result<(Vec<Construction>, usize)> {
    let ceiling = cfg.extra_or("ceiling", 4.0)?;
    let drawn = replicate(cfg, tag, cfg.replicas, |s| {
        let mut redraws = 0;
        let c = until_some(s, |s| {
            let p = conditioned_path(cfg, cfg.xi, ceiling, s)?;
            match construct_flow(&p, cc) {
                Ok(c) if c.clock.terminal() >= u_needed => Ok(Some(c)),
                Ok(_) => {
                    redraws += 1;
                    Ok(None)
                }
                Err(Error::Precondition(_) | Error::Domain { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        Ok((c, redraws))
    })?;
    let redraws = drawn.iter().map(|d| d.1).sum();
    Ok((drawn.into_iter().map(|d| d.0).collect(), redraws))
}

/// At most `wanted` bins, fewer when `n` is too small for a 5-per-cell table.
fn table_bins(wanted: usize, n: usize) -> usize {
    wanted.min(((n / 5) as f64).sqrt() as usize).max(2)
}

fn a8(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    // (u, y, time index, start index) into the direct-flow output
    let points = [(0.5, 0.0, 0, 0), (1.0, 0.0, 1, 0), (1.0, 0.5, 1, 1)];
    let cc = construction_config(cfg, &[0.5, 1.0], vec![0.0, 0.5]);
    // conditioning on the clock reaching a later u would bias earlier marginals,
    // so each u gets its own set of constructions
    let by_u = [(0.5, constructions(cfg, &cc, 80, 0.5)?), (1.0, constructions(cfg, &cc, 81, 1.0)?)];
    let params = FlowParams::transient(cfg.dt, cfg.exit_level)?;
    let refine = cfg.extra_or("refine", 100)?;
    let direct = replicate(cfg, 9, cfg.replicas, |s| flow_at_times(s, &[0.0, 0.5], &[0.5, 1.0], &params, refine))?;
    let allowance = cfg.extra_or("allowance", 0.02)?;
    let mut out = Vec::new();
    for &(u, y, ti, xi) in &points {
        let (cons, redraws) = &by_u.iter().find(|g| g.0 == u).expect("u has constructions").1;
        let built: Vec<f64> = cons.iter().filter_map(|c| c.x_at(u, y)).collect();
        let reference: Vec<f64> = direct.iter().map(|v| v[ti][xi]).collect();
        out.push(
            ks_test(&format!("ks_flow_u{u}_y{y}"), &built, KsReference::Sample(&reference), DEFAULT_ALPHA, allowance)?
                .with_detail("redrawn_unreached", *redraws),
        );
    }
    Ok(out)
}

fn a9(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let checkpoints = [0.0, 0.1, 0.25, 0.5];
    let cc = construction_config(cfg, &checkpoints[1..], vec![0.0]);
    let (cons, redraws) = constructions(cfg, &cc, 10, checkpoints[3])?;
    let b_at = |c: &Construction, u: f64| c.u_index(u).map(|q| c.b[q]).filter(|v| v.is_finite());
    let paths: Vec<Vec<f64>> = cons
        .iter()
        .filter_map(|c| checkpoints.iter().map(|&u| b_at(c, u)).collect::<Option<Vec<f64>>>())
        .collect();

    let mut increments = Vec::with_capacity(2 * paths.len());
    for b in &paths {
        increments.push((b[2] - b[0]) / 0.25f64.sqrt());
        increments.push((b[3] - b[2]) / 0.25f64.sqrt());
    }
    let normal_cdf = |x: f64| 0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2);
    let mut out = vec![ks_test("ks_standardized_increments", &increments, KsReference::Cdf(&normal_cdf), DEFAULT_ALPHA, KS_ALLOWANCE)?
        .with_detail("redrawn_unreached", redraws)];

    let sup: Vec<f64> = cons.iter().filter_map(Construction::c_consistency).collect();
    let worst = sup.iter().copied().fold(0.0, f64::max);
    out.push(TestReport::new("c_level_sup_difference", worst, 0.02, sup.len()));

    for kappa in [2.5, 3.0] {
        let series: Vec<Vec<f64>> = paths
            .iter()
            .map(|b| {
                b.iter()
                    .zip(&checkpoints)
                    .map(|(&bu, &u)| (-kappa * bu - 0.5 * kappa * kappa * u).exp())
                    .collect()
            })
            .collect();
        out.push(drift_test(&format!("drift_exponential_kappa{kappa}"), &series, DEFAULT_ALPHA)?);
    }
    Ok(out)
}

fn a10(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let cc = construction_config(cfg, &[1.0], vec![0.0]);
    let (cons, redraws) = constructions(cfg, &cc, 11, 1.0)?;
    let mut x = Vec::with_capacity(cons.len());
    let mut occ = Vec::with_capacity(cons.len());
    for c in &cons {
        if let Some(v) = c.x_at(1.0, 0.0) {
            x.push(v);
            occ.push(c.l_t0.iter().sum::<f64>() * c.grid.dx());
        }
    }
    let bins = table_bins(cfg.extra_or("bins", 10)?, x.len());
    Ok(vec![independence_test("chi2_flow_vs_occupation", &x, &occ, bins, DEFAULT_ALPHA)?
        .with_detail("redrawn_unreached", redraws)])
}

// A11 ------------------------------------------------------------------------

fn a11(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let (d1, d2, z0, zp0) = (2.0, 2.0, 1.0, 1.0);
    let h = cfg.extra_or("besq_dt", 1e-3)?;
    let (u_ind, u_law, t_plus) = (0.3, 0.5, 1.0);
    let draws = replicate(cfg, 12, cfg.replicas, |s| {
        let (mut z, mut zp) = (z0, zp0);
        let (mut t, mut clock) = (0.0, 0.0);
        let (mut y_ind, mut y_law, mut plus) = (None, None, None);
        while y_law.is_none() || plus.is_none() {
            if y_ind.is_none() && clock >= u_ind {
                y_ind = Some(z / (z + zp));
            }
            if y_law.is_none() && clock >= u_law {
                y_law = Some(z / (z + zp));
            }
            if plus.is_none() && t >= t_plus - 1e-9 {
                plus = Some(z + zp);
            }
            clock += h / (z + zp);
            z = besq::sample(d1, h, z, s)?;
            zp = besq::sample(d2, h, zp, s)?;
            t += h;
        }
        Ok((y_ind.unwrap_or(f64::NAN), y_law.unwrap_or(f64::NAN), plus.unwrap_or(f64::NAN)))
    })?;
    let params = JacobiParams::new(d1, d2)?;
    let y_start = z0 / (z0 + zp0);
    let reference = replicate(cfg, 13, cfg.replicas, |s| {
        Ok(jacobi::simulate(&params, y_start, u_law, cfg.dt, s)?.last())
    })?;
    let y_ind: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let y_law: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let plus: Vec<f64> = draws.iter().map(|d| d.2).collect();
    let start = z0 + zp0;
    let cdf = |y: f64| besq::cdf(d1 + d2, t_plus, start, y).unwrap_or(f64::NAN);
    let bins = table_bins(cfg.extra_or("bins", 10)?, y_ind.len());
    Ok(vec![
        ks_test("ks_ratio_vs_jacobi", &y_law, KsReference::Sample(&reference), DEFAULT_ALPHA, KS_ALLOWANCE)?,
        independence_test("chi2_ratio_vs_sum", &y_ind, &plus, bins, DEFAULT_ALPHA)?,
        ks_test("ks_sum_vs_besq", &plus, KsReference::Cdf(&cdf), DEFAULT_ALPHA, 0.0)?,
    ])
}

// A12 ------------------------------------------------------------------------

/// `∫_lo^hi dy / l(T_0, y)` on a window grid.
fn inverse_local_time_integral(cfg: &ExperimentConfig, p: &SamplePath, lo: f64, hi: f64) -> Result<f64> {
    let grid = SpaceGrid::with_spacing(lo, hi, cfg.dx)?;
    let ltf = local_time_field(p, grid, &[], cfg.bandwidth)?;
    Ok(InverseIntegral::new(grid, ltf.terminal_row(), cfg.lambda_floor).integral(lo, hi))
}

fn a12(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let nu = FiniteMeasure::atom(1.0, 1.0)?;
    let sol = solve_phi(&nu, cfg.extra_or("ngrid", 2001)?)?;
    let closed = |x: f64| if x <= 1.0 { 1.0 - 0.5 * x } else { 0.5 };
    let err = (0..=1000)
        .map(|i| i as f64 / 1000.0)
        .map(|x| (sol.eval(x) - closed(x)).abs())
        .fold(0.0, f64::max);
    let h = h_map(&sol);
    let mut out = vec![
        TestReport::new("phi_closed_form_sup_error", err, 1e-8, 1001),
        TestReport::new("h_at_1_error", (h.eval(1.0) - 2.0).abs(), 1e-6, 1),
    ];

    let bw = cfg.bandwidth;
    let l_at_1 = |p: &SamplePath| {
        let hits = p.values()[..p.len() - 1].iter().filter(|&&w| (w - 1.0).abs() < bw).count();
        hits as f64 * cfg.dt / (2.0 * bw)
    };
    for (k, &x) in [0.5, 1.0, 2.0].iter().enumerate() {
        let e = replicate(cfg, 120 + k as u64, cfg.replicas, |s| {
            let p = folded_path(cfg, x, 1.0, s)?;
            Ok((-0.5 * l_at_1(&p)).exp())
        })?;
        out.push(mean_compare(&format!("mc_phi_at_{x}"), &e, MeanTarget::Value(sol.eval(x)), 3.0, 0.01)?);
    }

    let (b, q, r) = (1.0, 0.5, 1.2);
    let (hb, hq, hr) = (h.eval(b), h.eval(q), h.eval(r));
    let lhs = replicate(cfg, 125, cfg.replicas, |s| {
        let p = folded_path(cfg, hb, hr, s)?;
        Ok((-inverse_local_time_integral(cfg, &p, hq, hr)?).exp())
    })?;
    let phi_b = sol.eval(b);
    let rhs = replicate(cfg, 126, cfg.replicas, |s| {
        let p = folded_path(cfg, b, r.max(1.0), s)?;
        let i = inverse_local_time_integral(cfg, &p, q, r)?;
        Ok((-i - 0.5 * l_at_1(&p)).exp() / phi_b)
    })?;
    out.push(
        mean_compare("change_of_measure", &lhs, MeanTarget::Sample(&rhs), 3.0, 0.02)?
            .with_detail("h_levels", format!("{hq:.6};{hb:.6};{hr:.6}")),
    );
    Ok(out)
}

// A13 ------------------------------------------------------------------------

fn a13(cfg: &ExperimentConfig) -> Result<Vec<TestReport>> {
    let (a, b, c, kappa) = (0.5, 1.0, 2.0, 3.0);
    let res = resolution(cfg);
    let checkpoints = [0.0, 0.2, 0.5, 1.0, f64::INFINITY];
    let series = replicate(cfg, 130, cfg.replicas, |s| {
        mstar_series(&folded_path(cfg, b, c, s)?, kappa, a, c, &checkpoints, &res)
    })?;
    let mut out = vec![drift_test("drift_mstar", &series, DEFAULT_ALPHA)?];

    let g_from = |start: f64, tag: u64, which: fn(&crate::local_time::LocalTimeField, f64, f64, f64, f64, f64) -> Result<f64>| {
        replicate(cfg, tag, cfg.replicas, |s| {
            let ltf = window_field(&folded_path(cfg, start, c, s)?, a, c, &res)?;
            which(&ltf, kappa, a, b, c, cfg.lambda_floor)
        })
    };
    let g = g_from(b, 131, functional_g)?;
    let g_plus = g_from(c, 132, |l, k, a, _, c, f| functional_g_plus(l, k, a, c, f))?;
    let g_minus = g_from(a, 133, |l, k, a, _, c, f| functional_g_minus(l, k, a, c, f))?;
    let (m, se) = mean_and_se(&g);
    let (mp, sep) = mean_and_se(&g_plus);
    let (mm, sem) = mean_and_se(&g_minus);
    let (wp, wm) = ((b - a) / (c - a), (c - b) / (c - a));
    let target = wp * mp + wm * mm;
    let se_all = (se * se + wp * wp * sep * sep + wm * wm * sem * sem).sqrt();
    let z = (m - target).abs() / se_all;
    out.push(
        TestReport::new("linearity_three_starts", z, 3.0, cfg.replicas)
            .with_detail("mean_b", m)
            .with_detail("mean_c", mp)
            .with_detail("mean_a", mm)
            .with_detail("combined_se", se_all),
    );
    Ok(out)
}

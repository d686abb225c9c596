//! Sampled trajectories and the path simulators built on them.

use crate::besq;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// A continuous trajectory sampled on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    dt: f64,
    values: Vec<f64>,
    origin_time: f64,
}

impl SamplePath {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        Self::with_origin(dt, values, 0.0)
    }

    pub fn with_origin(dt: f64, values: Vec<f64>, origin_time: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {dt}")));
        }
        if values.is_empty() {
            return Err(Error::invalid("a sample path needs at least one value"));
        }
        Ok(Self {
            dt,
            values,
            origin_time,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn origin_time(&self) -> f64 {
        self.origin_time
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.origin_time + k as f64 * self.dt
    }

    /// Elapsed time between the first and last sample.
    pub fn duration(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.dt
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Index of the grid point nearest to elapsed time `t`, clamped to the path.
    pub fn index_at(&self, t: f64) -> usize {
        let k = ((t - self.origin_time) / self.dt).round();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.values.len() - 1)
        }
    }

    /// Linear interpolation at time `t`, clamped to the ends.
    pub fn value_at(&self, t: f64) -> f64 {
        let s = (t - self.origin_time) / self.dt;
        if s <= 0.0 {
            return self.values[0];
        }
        let k = s.floor() as usize;
        if k + 1 >= self.values.len() {
            return self.last();
        }
        let w = s - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Index of the first maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = k;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.values[self.argmax()]
    }
}

/// A trajectory sampled at arbitrary increasing times.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::invalid("times and values differ in length"));
        }
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("times must be nondecreasing"));
        }
        Ok(Self { times, values })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Piecewise-linear value at `t`; `None` outside the tabulated range.
    pub fn at(&self, t: f64) -> Option<f64> {
        let n = self.times.len();
        if n == 0 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let j = self.times.partition_point(|&s| s < t);
        if j == 0 {
            return Some(self.values[0]);
        }
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        if t1 == t0 {
            return Some(v1);
        }
        let w = (t - t0) / (t1 - t0);
        Some(v0 + w * (v1 - v0))
    }
}

/// When a simulated Brownian path stops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StopRule {
    /// Run for a fixed elapsed time.
    Horizon(f64),
    /// Run until the first hit of `level`.
    HitLevel(f64),
    /// Run until the first hit of `level`, failing after `max_steps` steps.
    HitLevelCapped { level: f64, max_steps: usize },
}

/// What happens when a hit-rule path reaches a level above its start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Ceiling {
    None,
    /// Discard the path (conditioning by rejection on `max < level`).
    Reject(f64),
    /// Cut the excursion: on hitting `level` the path restarts at `resume`.
    ///
    /// By the strong Markov property a Brownian motion that reaches `level`
    /// returns to `resume < level` before it can reach anything lower, so
    /// everything that happens below `resume` keeps its exact law. Occupation
    /// above `resume`, elapsed time and the maximum are lost.
    Fold { level: f64, resume: f64 },
}

/// A Brownian path produced under a [`Ceiling`].
#[derive(Clone, Debug)]
pub struct CeilingPath {
    pub path: SamplePath,
    /// Number of excursions cut by a [`Ceiling::Fold`].
    pub folds: usize,
}

/// Brownian-bridge crossing test for one step from `a` to `b`.
///
/// A crossing is certain when the endpoints straddle (or touch) `level`;
/// otherwise it is declared with the bridge probability
/// `exp(-2 (a - level)(b - level) / dt)`.
#[inline]
pub fn bridge_crosses(a: f64, b: f64, level: f64, dt: f64, stream: &mut RandomStream) -> bool {
    let da = a - level;
    let db = b - level;
    if da * db <= 0.0 {
        return true;
    }
    let e = 2.0 * da * db / dt;
    if e > 40.0 {
        return false;
    }
    stream.uniform() < (-e).exp()
}

/// Brownian motion from `x0` with increments of variance `dt`.
///
/// Hit rules use bridge-corrected detection; the terminal value of a stopped
/// path is the level itself.
pub fn brownian_path(
    x0: f64,
    dt: f64,
    stop: StopRule,
    stream: &mut RandomStream,
) -> Result<SamplePath> {
    match brownian_path_with(x0, dt, stop, Ceiling::None, stream)? {
        Some(p) => Ok(p.path),
        None => Err(Error::Internal("path rejected without a ceiling".into())),
    }
}

/// [`brownian_path`] with a ceiling rule. Returns `Ok(None)` when the path is
/// rejected by [`Ceiling::Reject`].
pub fn brownian_path_with(
    x0: f64,
    dt: f64,
    stop: StopRule,
    ceiling: Ceiling,
    stream: &mut RandomStream,
) -> Result<Option<CeilingPath>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let sd = dt.sqrt();

    let (level, max_steps) = match stop {
        StopRule::Horizon(t) => {
            if !(t >= 0.0) {
                return Err(Error::invalid("horizon must be nonnegative"));
            }
            let n = (t / dt).round() as usize;
            let mut values = Vec::with_capacity(n + 1);
            let mut x = x0;
            values.push(x);
            for _ in 0..n {
                x += sd * stream.normal();
                values.push(x);
            }
            return Ok(Some(CeilingPath {
                path: SamplePath::new(dt, values)?,
                folds: 0,
            }));
        }
        StopRule::HitLevel(level) => (level, usize::MAX),
        StopRule::HitLevelCapped { level, max_steps } => (level, max_steps),
    };

    match ceiling {
        Ceiling::Reject(c) | Ceiling::Fold { level: c, .. } if c <= level || c <= x0 => {
            return Err(Error::invalid(format!(
                "ceiling {c} must lie above both the start {x0} and the stop level {level}"
            )));
        }
        Ceiling::Fold { level: c, resume } if !(resume < c && resume > level) => {
            return Err(Error::invalid(format!(
                "fold resume level {resume} must lie strictly between {level} and {c}"
            )));
        }
        _ => {}
    }

    let mut values = Vec::with_capacity(1024);
    values.push(x0);
    if x0 == level {
        return Ok(Some(CeilingPath {
            path: SamplePath::new(dt, values)?,
            folds: 0,
        }));
    }
    let mut folds = 0;
    let mut x = x0;
    let mut steps = 0usize;
    loop {
        if steps >= max_steps {
            return Err(Error::CapExceeded { max_steps });
        }
        steps += 1;
        let next = x + sd * stream.normal();
        match ceiling {
            Ceiling::Reject(c) => {
                if bridge_crosses(x, next, c, dt, stream) {
                    return Ok(None);
                }
            }
            Ceiling::Fold { level: c, resume } => {
                if bridge_crosses(x, next, c, dt, stream) {
                    folds += 1;
                    x = resume;
                    values.push(x);
                    continue;
                }
            }
            Ceiling::None => {}
        }
        if bridge_crosses(x, next, level, dt, stream) {
            values.push(level);
            break;
        }
        x = next;
        values.push(x);
    }
    Ok(Some(CeilingPath {
        path: SamplePath::new(dt, values)?,
        folds,
    }))
}

/// First crossing of a level by a sampled path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HittingRecord {
    pub level: f64,
    pub index: Option<usize>,
    /// Sub-step crossing time by linear interpolation.
    pub crossing_time: Option<f64>,
}

/// First index at which `path` reaches or passes `level`, coming from the
/// side of its starting value.
pub fn hitting_time(path: &SamplePath, level: f64) -> HittingRecord {
    let v = path.values();
    if v[0] == level {
        return HittingRecord {
            level,
            index: Some(0),
            crossing_time: Some(path.origin_time()),
        };
    }
    let above = v[0] > level;
    let hit = v
        .iter()
        .position(|&x| if above { x <= level } else { x >= level });
    match hit {
        Some(k) => {
            let (a, b) = (v[k - 1], v[k]);
            let frac = if a == b { 1.0 } else { (a - level) / (a - b) };
            HittingRecord {
                level,
                index: Some(k),
                crossing_time: Some(path.time(k - 1) + frac * path.dt()),
            }
        }
        None => HittingRecord {
            level,
            index: None,
            crossing_time: None,
        },
    }
}

/// Bessel(3) process from `x0` stopped at its first hit of `m`.
///
/// The square of a Bessel(3) process is a squared Bessel process of
/// dimension three, whose transitions are sampled exactly; the path is the
/// square root of that chain, so it never goes negative.
pub fn bessel3_path_to_level(
    x0: f64,
    m: f64,
    dt: f64,
    stream: &mut RandomStream,
) -> Result<SamplePath> {
    if !(x0 >= 0.0 && x0 < m) {
        return Err(Error::invalid(format!("need 0 <= x0 < m, got x0={x0}, m={m}")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid("dt must be positive"));
    }
    let mut values = Vec::with_capacity(1024);
    values.push(x0);
    let mut z = x0 * x0;
    let mut x = x0;
    loop {
        z = besq::sample(3.0, dt, z, stream)?;
        let next = z.sqrt();
        if bridge_crosses(x, next, m, dt, stream) {
            values.push(m);
            break;
        }
        x = next;
        values.push(x);
    }
    SamplePath::new(dt, values)
}

/// Splits a path at its (first) maximum.
///
/// The first part runs from the start to the maximum; the second is the
/// remainder read backwards from the end, so that it too ends at the maximum.
pub fn split_at_max(path: &SamplePath) -> Result<(SamplePath, SamplePath)> {
    let k = path.argmax();
    let v = path.values();
    let first = SamplePath::with_origin(path.dt(), v[..=k].to_vec(), path.origin_time())?;
    let second: Vec<f64> = v[k..].iter().rev().copied().collect();
    Ok((first, SamplePath::new(path.dt(), second)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn path(values: &[f64]) -> SamplePath {
        SamplePath::new(0.1, values.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_paths() {
        assert!(SamplePath::new(0.0, vec![1.0]).is_err());
        assert!(SamplePath::new(0.1, vec![]).is_err());
    }

    #[test]
    fn hit_immediately() {
        let r = hitting_time(&path(&[1.0, 1.0, 1.0]), 1.0);
        assert_eq!(r.index, Some(0));
    }

    #[test]
    fn hit_interpolated() {
        let p = path(&[1.0, 0.5, -0.1]);
        let r = hitting_time(&p, 0.0);
        assert_eq!(r.index, Some(2));
        let t = r.crossing_time.unwrap();
        assert!(t > 0.1 && t < 0.2, "{t}");
    }

    #[test]
    fn never_hit() {
        let r = hitting_time(&path(&[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(r.index, None);
        assert_eq!(r.crossing_time, None);
    }

    #[test]
    fn split_tent() {
        let (a, b) = split_at_max(&path(&[0.0, 1.0, 0.0])).unwrap();
        assert_eq!(a.values(), &[0.0, 1.0]);
        assert_eq!(b.values(), &[0.0, 1.0]);
    }

    #[test]
    fn split_monotone() {
        let (a, b) = split_at_max(&path(&[0.0, 1.0, 2.0, 3.0])).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(b.len(), 1);
    }

    #[test]
    fn split_ties_take_first() {
        let (a, _) = split_at_max(&path(&[0.0, 2.0, 1.0, 2.0, 0.0])).unwrap();
        assert_eq!(a.len(), 2);
    }

    #[test]
    fn stops_at_level() {
        let mut s = derive_stream(5, 0);
        let p = brownian_path(1.0, 1e-3, StopRule::HitLevel(0.0), &mut s).unwrap();
        assert_eq!(p.first(), 1.0);
        assert_eq!(p.last(), 0.0);
        assert!(p.values()[..p.len() - 1].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn horizon_length() {
        let mut s = derive_stream(5, 1);
        let p = brownian_path(0.0, 0.01, StopRule::Horizon(1.0), &mut s).unwrap();
        assert_eq!(p.len(), 101);
    }

    #[test]
    fn cap_is_reported() {
        let mut s = derive_stream(5, 2);
        let stop = StopRule::HitLevelCapped {
            level: -100.0,
            max_steps: 10,
        };
        assert!(matches!(
            brownian_path(0.0, 1e-4, stop, &mut s),
            Err(Error::CapExceeded { max_steps: 10 })
        ));
    }

    #[test]
    fn fold_stays_below_ceiling() {
        let mut s = derive_stream(5, 3);
        let mut total_folds = 0;
        for _ in 0..20 {
            let out = brownian_path_with(
                1.0,
                1e-3,
                StopRule::HitLevel(0.0),
                Ceiling::Fold {
                    level: 1.5,
                    resume: 1.4,
                },
                &mut s,
            )
            .unwrap()
            .unwrap();
            assert!(out.path.values().iter().all(|&x| x < 1.5));
            total_folds += out.folds;
        }
        assert!(total_folds > 0);
    }

    #[test]
    fn bessel3_is_positive_and_stops() {
        let mut s = derive_stream(5, 4);
        let p = bessel3_path_to_level(0.0, 1.0, 1e-3, &mut s).unwrap();
        assert!(p.values().iter().all(|&x| x >= 0.0));
        assert_eq!(p.last(), 1.0);
    }

    #[test]
    fn time_series_interpolates() {
        let ts = TimeSeries::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 4.0]).unwrap();
        assert_eq!(ts.at(0.5), Some(1.0));
        assert_eq!(ts.at(2.0), Some(3.0));
        assert_eq!(ts.at(3.5), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_reassembles(values in prop::collection::vec(-10.0f64..10.0, 1..60)) {
                let p = SamplePath::new(0.5, values.clone()).unwrap();
                let (a, b) = split_at_max(&p).unwrap();
                let mut joined = a.values().to_vec();
                joined.extend(b.values().iter().rev().skip(1));
                prop_assert_eq!(joined, values);
            }

            #[test]
            fn hitting_record_brackets(values in prop::collection::vec(-5.0f64..5.0, 2..40), level in -5.0f64..5.0) {
                let p = SamplePath::new(0.25, values.clone()).unwrap();
                let r = hitting_time(&p, level);
                if let (Some(k), Some(t)) = (r.index, r.crossing_time) {
                    if k > 0 {
                        let above = values[0] > level;
                        let crossed = if above { values[k] <= level } else { values[k] >= level };
                        prop_assert!(crossed);
                        prop_assert!(t >= p.time(k - 1) - 1e-12 && t <= p.time(k) + 1e-12);
                    }
                }
            }
        }
    }
}

//! Piecewise-linear tables for strictly monotone maps and their inverses.

use crate::error::{Error, Result};

/// A strictly monotone map tabulated at increasing abscissae, evaluated by
/// linear interpolation and extended linearly beyond both ends. The inverse
/// is exact on the same piecewise-linear curve, found by binary search.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneTable {
    xs: Vec<f64>,
    ys: Vec<f64>,
    increasing: bool,
}

impl MonotoneTable {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::invalid("a monotone table needs at least two matched nodes"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("table abscissae must be strictly increasing"));
        }
        let increasing = ys[1] > ys[0];
        let ok = ys
            .windows(2)
            .all(|w| if increasing { w[1] > w[0] } else { w[1] < w[0] });
        if !ok {
            return Err(Error::invalid("table values must be strictly monotone"));
        }
        Ok(Self { xs, ys, increasing })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn is_increasing(&self) -> bool {
        self.increasing
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.xs.len();
        let j = self.xs.partition_point(|&s| s <= x);
        j.clamp(1, n - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let j = self.segment(x);
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let (y0, y1) = (self.ys[j], self.ys[j + 1]);
        y0 + (x - x0) * (y1 - y0) / (x1 - x0)
    }

    /// Slope of the segment containing `x`.
    pub fn slope(&self, x: f64) -> f64 {
        let j = self.segment(x);
        (self.ys[j + 1] - self.ys[j]) / (self.xs[j + 1] - self.xs[j])
    }

    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.ys.len();
        let j = if self.increasing {
            self.ys.partition_point(|&s| s <= y)
        } else {
            self.ys.partition_point(|&s| s >= y)
        };
        let j = j.clamp(1, n - 1) - 1;
        let (x0, x1) = (self.xs[j], self.xs[j + 1]);
        let (y0, y1) = (self.ys[j], self.ys[j + 1]);
        x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    }

    /// Range of values covered by the nodes, as `(min, max)`.
    pub fn value_range(&self) -> (f64, f64) {
        let (a, b) = (self.ys[0], self.ys[self.ys.len() - 1]);
        (a.min(b), a.max(b))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_non_monotone() {
        assert!(MonotoneTable::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0]).is_err());
        assert!(MonotoneTable::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn decreasing_inverse() {
        let t = MonotoneTable::new(vec![0.0, 1.0, 2.0], vec![3.0, 1.0, 0.0]).unwrap();
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.inverse(2.0), 0.5);
        assert_eq!(t.inverse(0.5), 1.5);
        assert_eq!(t.eval(3.0), -1.0);
    }

    proptest! {
        #[test]
        fn inverse_round_trips(steps in prop::collection::vec(0.01f64..2.0, 2..30),
                               rises in prop::collection::vec(0.01f64..2.0, 30),
                               u in 0.0f64..1.0) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (i, s) in steps.iter().enumerate() {
                xs.push(xs[i] + s);
                ys.push(ys[i] + rises[i]);
            }
            let t = MonotoneTable::new(xs.clone(), ys).unwrap();
            let x = xs[xs.len() - 1] * u;
            let back = t.inverse(t.eval(x));
            prop_assert!((back - x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }
}

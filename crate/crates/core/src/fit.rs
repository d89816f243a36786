//! Least-squares fits used by the rate studies.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values at or below this are treated as exact zeros by [`rate_fit`].
pub const ZERO_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub samples: usize,
}

/// Streaming sums for ordinary least squares.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    n: usize,
    sx: f64,
    sy: f64,
    sxx: f64,
    sxy: f64,
    syy: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64, y: f64) {
        self.n += 1;
        self.sx += x;
        self.sy += y;
        self.sxx += x * x;
        self.sxy += x * y;
        self.syy += y * y;
    }

    pub fn merge(mut self, other: Accumulator) -> Accumulator {
        self.n += other.n;
        self.sx += other.sx;
        self.sy += other.sy;
        self.sxx += other.sxx;
        self.sxy += other.sxy;
        self.syy += other.syy;
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn fit(&self) -> Result<LinearFit> {
        if self.n < 2 {
            return Err(Error::InsufficientSamples(self.n));
        }
        let n = self.n as f64;
        let vxx = self.sxx - self.sx * self.sx / n;
        let vxy = self.sxy - self.sx * self.sy / n;
        let vyy = self.syy - self.sy * self.sy / n;
        if vxx <= 0.0 {
            return Err(Error::InsufficientSamples(self.n));
        }
        let slope = vxy / vxx;
        let intercept = (self.sy - slope * self.sx) / n;
        let r2 = if vyy <= 0.0 { 1.0 } else { (vxy * vxy / (vxx * vyy)).clamp(0.0, 1.0) };
        Ok(LinearFit { slope, intercept, r2, samples: self.n })
    }
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<LinearFit> {
    let mut acc = Accumulator::default();
    for &(x, y) in points {
        acc.push(x, y);
    }
    acc.fit()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub fit: LinearFit,
    /// `p` values whose metric fell below [`ZERO_FLOOR`].
    pub dropped: Vec<f64>,
}

/// Least squares on `(log p, log value)`; zero values are dropped and listed.
pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    let (kept, dropped): (Vec<_>, Vec<_>) = points.iter().partition(|(_, v)| *v > ZERO_FLOOR);
    if kept.is_empty() {
        return Err(Error::AllZero { floor: ZERO_FLOOR });
    }
    let logs: Vec<(f64, f64)> = kept.iter().map(|(p, v)| (p.ln(), v.ln())).collect();
    Ok(RateFit { fit: linear_fit(&logs)?, dropped: dropped.into_iter().map(|(p, _)| p).collect() })
}

//! Axis-aligned chart boxes and deterministic probe points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of quasi-random probe points used for structure flags and
/// precondition checks.
pub const PROBE_COUNT: usize = 32;

/// Closed axis-aligned box `[lo_1, hi_1] x ... x [lo_n, hi_n]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ChartBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidArgument(format!(
                "box bounds must be non-empty and of equal length, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for i in 0..lo.len() {
            if !lo[i].is_finite() || !hi[i].is_finite() || lo[i] >= hi[i] {
                return Err(Error::InvalidArgument(format!(
                    "box axis {} must satisfy lo < hi with finite bounds, got [{}, {}]",
                    i + 1,
                    lo[i],
                    hi[i]
                )));
            }
        }
        Ok(ChartBox { lo, hi })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        ChartBox::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        ChartBox {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| 0.5 * (self.lo[i] + self.hi[i]))
            .collect()
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.hi[i] - self.lo[i]).collect()
    }

    pub fn volume(&self) -> f64 {
        self.side_lengths().iter().product()
    }

    /// Closed-box membership with `slack` absolute play per axis.
    pub fn contains(&self, point: &[f64], slack: f64) -> bool {
        point.len() == self.dim()
            && (0..self.dim())
                .all(|i| point[i] >= self.lo[i] - slack && point[i] <= self.hi[i] + slack)
    }

    /// `count` Halton points inside the box (deterministic, well spread,
    /// never on the boundary).
    pub fn probe_points(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.dim();
        (1..=count as u64)
            .map(|index| {
                (0..n)
                    .map(|axis| {
                        let u = radical_inverse(index, PRIMES[axis % PRIMES.len()]);
                        self.lo[axis] + u * (self.hi[axis] - self.lo[axis])
                    })
                    .collect()
            })
            .collect()
    }

    /// Default probe set of [`PROBE_COUNT`] points.
    pub fn probes(&self) -> Vec<Vec<f64>> {
        self.probe_points(PROBE_COUNT)
    }
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Van der Corput radical inverse of `index` in the given base.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

/// `count` deterministic direction vectors in dimension `dim`: the
/// coordinate basis followed by normalized Halton offsets of `[-1, 1]^dim`.
pub fn probe_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(count);
    for i in 0..dim.min(count) {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        dirs.push(e);
    }
    let mut index = 1u64;
    while dirs.len() < count {
        let v: Vec<f64> = (0..dim)
            .map(|axis| 2.0 * radical_inverse(index, PRIMES[axis % PRIMES.len()]) - 1.0)
            .collect();
        index += 1;
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-3 {
            continue;
        }
        dirs.push(v.iter().map(|x| x / norm).collect());
    }
    dirs
}

//! Periodic grids and multi-indices.
//!
//! The torus `[0, L)^dim` is sampled at `N` points per axis. Axis frequencies
//! are `ξ_k = 2πk/L` for `k ∈ [-N/2, N/2)`, stored in FFT order (non-negative
//! indices first).

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_N_1D: usize = 4096;
pub const MAX_N_2D: usize = 256;
pub const MIN_N: usize = 16;

/// Default torus period.
pub const DEFAULT_PERIOD: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    period: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize, period: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        if !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("N = {n} is not a power of two")));
        }
        let max = if dim == 1 { MAX_N_1D } else { MAX_N_2D };
        if !(MIN_N..=max).contains(&n) {
            return Err(Error::InvalidGrid(format!(
                "N = {n} outside [{MIN_N}, {max}] for dim {dim}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::InvalidGrid(format!("period must be positive, got {period}")));
        }
        Ok(Self { dim, n, period })
    }

    pub fn one_d(n: usize) -> Result<Self> {
        Self::new(1, n, DEFAULT_PERIOD)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.n as f64
    }

    /// Quadrature weight `h^dim` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// `L^dim`.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Total number of samples, `N^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Signed integer wavenumber of FFT-ordered axis index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// FFT-ordered axis index of signed wavenumber `k` (folded periodically).
    pub fn index_of(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }

    /// Angular frequency `2πk/L` of FFT-ordered axis index `i`.
    pub fn axis_frequency(&self, i: usize) -> f64 {
        2.0 * PI * self.wavenumber(i) as f64 / self.period
    }

    /// Frequency vector of flat FFT-ordered index `idx` (row-major). The
    /// second component is zero in 1D.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        match self.dim {
            1 => [self.axis_frequency(idx), 0.0],
            _ => [
                self.axis_frequency(idx / self.n),
                self.axis_frequency(idx % self.n),
            ],
        }
    }

    /// All frequency vectors in flat FFT order.
    pub fn frequencies(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.frequency(i)).collect()
    }

    /// Physical coordinate of flat index `idx` (row-major).
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.spacing();
        match self.dim {
            1 => [idx as f64 * h, 0.0],
            _ => [(idx / self.n) as f64 * h, (idx % self.n) as f64 * h],
        }
    }

    /// Largest resolvable radial frequency `πN/L` (the Nyquist radius).
    pub fn nyquist(&self) -> f64 {
        PI * self.n as f64 / self.period
    }

    /// Sawtooth coordinate centred at the origin: values in `[-L/2, L/2)`.
    pub fn centered_point(&self, idx: usize) -> [f64; 2] {
        let p = self.point(idx);
        let half = 0.5 * self.period;
        let wrap = |x: f64| if x >= half { x - self.period } else { x };
        [wrap(p[0]), if self.dim == 2 { wrap(p[1]) } else { 0.0 }]
    }

    /// The same sampling with the period scaled by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.dim, self.n, self.period * factor)
    }
}

/// Euclidean norm of a frequency (or position) vector.
pub fn norm(v: &[f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

pub fn dot(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Multi-index `α = (α_1, ..., α_dim)` with `|α| ≤ 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct MultiIndex {
    entries: [u8; 2],
    dim: u8,
}

impl MultiIndex {
    pub const MAX_ORDER: usize = 4;

    pub fn new(entries: &[u8]) -> Result<Self> {
        if entries.is_empty() || entries.len() > 2 {
            return Err(crate::error::invalid(
                "multi_index",
                format!("length {} not in {{1, 2}}", entries.len()),
            ));
        }
        let mut e = [0u8; 2];
        e[..entries.len()].copy_from_slice(entries);
        let idx = Self {
            entries: e,
            dim: entries.len() as u8,
        };
        if idx.order() > Self::MAX_ORDER {
            return Err(crate::error::invalid(
                "multi_index",
                format!("order {} exceeds {}", idx.order(), Self::MAX_ORDER),
            ));
        }
        Ok(idx)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            entries: [0; 2],
            dim: dim as u8,
        }
    }

    /// `m·e_axis`.
    pub fn axis(dim: usize, axis: usize, m: u8) -> Self {
        let mut entries = [0u8; 2];
        entries[axis] = m;
        Self {
            entries,
            dim: dim as u8,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries[..self.dim as usize]
    }

    pub fn get(&self, axis: usize) -> u8 {
        self.entries[axis]
    }

    pub fn order(&self) -> usize {
        self.entries().iter().map(|&a| a as usize).sum()
    }

    /// `α! = Π α_i!`.
    pub fn factorial(&self) -> f64 {
        self.entries().iter().map(|&a| factorial(a as usize)).product()
    }

    /// Multinomial coefficient `|α|! / α!`.
    pub fn multinomial(&self) -> f64 {
        factorial(self.order()) / self.factorial()
    }

    /// `v^α`.
    pub fn monomial(&self, v: &[f64; 2]) -> f64 {
        self.entries()
            .iter()
            .zip(v.iter())
            .map(|(&a, &x)| x.powi(a as i32))
            .product()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let e: Vec<u8> = self
            .entries()
            .iter()
            .zip(other.entries())
            .map(|(a, b)| a + b)
            .collect();
        Self::new(&e)
    }

    /// Every multi-index of dimension `dim` with order exactly `order`, in
    /// lexicographically decreasing first entry.
    pub fn all_of_order(dim: usize, order: usize) -> Vec<Self> {
        match dim {
            1 => vec![Self::axis(1, 0, order as u8)],
            _ => (0..=order)
                .rev()
                .map(|a| Self {
                    entries: [a as u8, (order - a) as u8],
                    dim: 2,
                })
                .collect(),
        }
    }
}

impl TryFrom<Vec<u8>> for MultiIndex {
    type Error = crate::error::Error;

    fn try_from(v: Vec<u8>) -> Result<Self> {
        Self::new(&v)
    }
}

impl From<MultiIndex> for Vec<u8> {
    fn from(m: MultiIndex) -> Self {
        m.entries().to_vec()
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

//! Sampled fields and the discrete Fourier transform between them.
//!
//! Spectral coefficients are Fourier-series coefficients,
//! `f(x) = Σ_k c_k e^{iξ_k·x}`, so `c_k = N^{-dim} Σ_n f(x_n) e^{-iξ_k·x_n}`.
//! With this normalization `‖f‖²_{L²} = L^dim Σ_k |c_k|²` and every Fourier
//! multiplier `m(ξ)` acts as `c_k ↦ m(ξ_k) c_k`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::GridSpec;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized in-place transform along every axis.
fn transform_in_place(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let fft = plan(n, inverse);
    match grid.dim() {
        1 => fft.process(data),
        _ => {
            // rows are contiguous
            fft.process(data);
            let mut column = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    column[r] = data[r * n + c];
                }
                fft.process(&mut column);
                for r in 0..n {
                    data[r * n + c] = column[r];
                }
            }
        }
    }
}

/// Forward transform of complex samples into Fourier-series coefficients.
pub fn forward(grid: &GridSpec, values: &[Complex64]) -> Vec<Complex64> {
    let mut data = values.to_vec();
    transform_in_place(grid, &mut data, false);
    let scale = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

/// Synthesis `Σ_k c_k e^{iξ_k·x_n}` at every grid point.
pub fn inverse(grid: &GridSpec, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut data = coeffs.to_vec();
    transform_in_place(grid, &mut data, true);
    data
}

/// A real function sampled on a periodic grid (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(crate::error::invalid(
                "values",
                format!("length {} != N^dim = {}", values.len(), grid.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid,
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn to_spectral(&self) -> SpectralField {
        let data: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        SpectralField {
            grid: self.grid,
            coeffs: forward(&self.grid, &data),
        }
    }

    pub fn check_same_grid(&self, other: &RealField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &RealField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &RealField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &RealField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &RealField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `max|self - other| / max|other|` (absolute when `other ≡ 0`).
    pub fn relative_error(&self, other: &RealField) -> f64 {
        let scale = other.max_abs();
        let diff = self.max_abs_diff(other);
        if scale > 0.0 {
            diff / scale
        } else {
            diff
        }
    }
}

/// Fourier-series coefficients of a field, in flat FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(crate::error::invalid(
                "coeffs",
                format!("length {} != N^dim = {}", coeffs.len(), grid.len()),
            ));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of the signed wavenumber tuple `k` (one entry per axis).
    pub fn coeff(&self, k: &[i64]) -> Complex64 {
        let idx = match self.grid.dim() {
            1 => self.grid.index_of(k[0]),
            _ => self.grid.index_of(k[0]) * self.grid.n() + self.grid.index_of(k[1]),
        };
        self.coeffs[idx]
    }

    /// Complex synthesis at the grid points.
    pub fn to_complex_values(&self) -> Vec<Complex64> {
        inverse(&self.grid, &self.coeffs)
    }

    /// Real part of the synthesis.
    pub fn to_real(&self) -> RealField {
        RealField {
            grid: self.grid,
            values: self.to_complex_values().iter().map(|c| c.re).collect(),
        }
    }

    /// Real part of the synthesis together with the largest imaginary residue.
    pub fn to_real_checked(&self) -> (RealField, f64) {
        let z = self.to_complex_values();
        let residue = z.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
        (
            RealField {
                grid: self.grid,
                values: z.iter().map(|c| c.re).collect(),
            },
            residue,
        )
    }

    /// Multiplies coefficient `k` by `m(ξ_k)`.
    pub fn multiply(&self, m: impl Fn(&[f64; 2]) -> Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * m(&self.grid.frequency(i)))
            .collect();
        Self {
            grid: self.grid,
            coeffs,
        }
    }

    /// Largest violation of `c(-k) = conj(c(k))`, relative to the largest
    /// coefficient. The unpaired Nyquist row is skipped.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.grid.n();
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let neg = |i: usize| (n - i) % n;
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let (partner, nyquist) = match self.grid.dim() {
                1 => (neg(idx), idx == n / 2),
                _ => {
                    let (r, c) = (idx / n, idx % n);
                    (neg(r) * n + neg(c), r == n / 2 || c == n / 2)
                }
            };
            if nyquist {
                continue;
            }
            worst = worst.max((self.coeffs[idx] - self.coeffs[partner].conj()).norm());
        }
        worst / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn noise(grid: GridSpec, seed: u64) -> RealField {
        let mut state = seed;
        RealField::from_fn(grid, |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn constant_has_only_dc_mode() {
        let g = GridSpec::one_d(64).unwrap();
        let f = RealField::constant(g, 1.0).to_spectral();
        assert!((f.coeff(&[0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for k in 1..32 {
            assert!(f.coeff(&[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn pure_tone_has_two_modes() {
        let g = GridSpec::new(1, 64, 3.0).unwrap();
        let f = RealField::from_fn(g, |x| (3.0 * 2.0 * PI * x[0] / 3.0).sin()).to_spectral();
        for i in 0..64 {
            let k = g.wavenumber(i);
            let c = f.coeffs()[i];
            if k.abs() == 3 {
                assert!((c.norm() - 0.5).abs() < 1e-14);
            } else {
                assert!(c.norm() < 1e-14, "k = {k}: {c}");
            }
        }
    }

    #[test]
    fn round_trip_1d_and_2d() {
        for g in [GridSpec::one_d(256).unwrap(), GridSpec::new(2, 32, 5.0).unwrap()] {
            let f = noise(g, 7);
            let back = f.to_spectral().to_real();
            assert!(back.relative_error(&f) < 1e-12);
            assert!(f.to_spectral().hermitian_defect() < 1e-12);
        }
    }

    #[test]
    fn two_d_layout_is_row_major() {
        let g = GridSpec::new(2, 16, 2.0 * PI).unwrap();
        // cos(2x + 3y): modes (±2, ±3)
        let f = RealField::from_fn(g, |p| (2.0 * p[0] + 3.0 * p[1]).cos()).to_spectral();
        assert!((f.coeff(&[2, 3]).re - 0.5).abs() < 1e-14);
        assert!((f.coeff(&[-2, -3]).re - 0.5).abs() < 1e-14);
        assert!(f.coeff(&[3, 2]).norm() < 1e-14);
    }
}

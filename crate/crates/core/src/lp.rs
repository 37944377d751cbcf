//! Littlewood–Paley family built from an explicit smooth step.
//!
//! With `ψ(t) = e^{-1/t}` and `h(t) = ψ(t) / (ψ(t) + ψ(1-t))`, the radial step
//! is `S(r) = 1` for `r ≤ 1`, `h(2 - r)` on `(1, 2)`, `0` for `r ≥ 2`. Then
//! `Φ̂(ξ) = S(|ξ|) - S(2|ξ|)` and `Ψ̂_j(ξ) = S(2^{-j}|ξ|)`.
//!
//! A family resolves bands `j_min..=j_max`. Two extra bands close the
//! partition on the whole grid: the low residual `Ψ̂_{j_min-1}` (index
//! `j_min - 1`) and the top band `1 - Ψ̂_{j_max}` (index `j_max + 1`). Inside
//! the family, `P_{≤m}` is the sum of every band `≤ m`, so it is `0` below
//! `j_min - 1`, `Ψ̂_m` on `[j_min - 1, j_max]` and the identity above.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::{RealField, SpectralField};
use crate::grid::{norm, GridSpec};
use crate::maximal::{maximal_function, maximal_function_all_radii, pointwise_lq};
use crate::spectral::{lp_norm, riesz_symbol};

fn psi(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// Smooth transition `h` from 0 (t ≤ 0) to 1 (t ≥ 1).
pub fn transition(t: f64) -> f64 {
    let (a, b) = (psi(t), psi(1.0 - t));
    a / (a + b)
}

fn transition_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = (psi(t), psi(1.0 - t));
    let (da, db) = (a / (t * t), b / ((1.0 - t) * (1.0 - t)));
    (da * b + a * db) / ((a + b) * (a + b))
}

/// Radial step `S(r)`.
pub fn step(r: f64) -> f64 {
    if r <= 1.0 {
        1.0
    } else if r < 2.0 {
        transition(2.0 - r)
    } else {
        0.0
    }
}

/// `S'(r)`.
pub fn step_derivative(r: f64) -> f64 {
    if r <= 1.0 || r >= 2.0 {
        0.0
    } else {
        -transition_derivative(2.0 - r)
    }
}

/// Mother annulus profile `Φ̂(ξ)`.
pub fn phi_hat(xi: &[f64; 2]) -> f64 {
    let r = norm(xi);
    step(r) - step(2.0 * r)
}

/// `Ψ̂_j(ξ) = S(2^{-j}|ξ|)`.
pub fn psi_hat(j: i32, xi: &[f64; 2]) -> f64 {
    step(norm(xi) * 2f64.powi(-j))
}

/// Frequency tables of a dyadic partition of unity on one grid.
#[derive(Debug, Clone)]
pub struct LpFamily {
    grid: GridSpec,
    j_min: i32,
    j_max: i32,
    /// Band multipliers for `j_min - 1 ..= j_max + 1`, each in flat FFT order.
    bands: Vec<Vec<f64>>,
    /// `Ψ̂_m` for `m = j_min - 1 ..= j_max`.
    leq: Vec<Vec<f64>>,
}

impl LpFamily {
    pub fn new(grid: GridSpec, j_min: i32, j_max: i32) -> Result<Self> {
        if j_min >= j_max {
            return Err(invalid("j_range", format!("need j_min < j_max, got [{j_min}, {j_max}]")));
        }
        let limit = Self::max_band(&grid);
        if j_max > limit {
            return Err(invalid(
                "j_max",
                format!("{j_max} exceeds the aliasing bound {limit} for this grid"),
            ));
        }
        let freqs = grid.frequencies();
        let leq: Vec<Vec<f64>> = (j_min - 1..=j_max)
            .map(|m| freqs.iter().map(|xi| psi_hat(m, xi)).collect())
            .collect();
        let mut bands = Vec::with_capacity((j_max - j_min + 3) as usize);
        bands.push(leq[0].clone());
        for j in j_min..=j_max {
            let scale = 2f64.powi(-j);
            bands.push(
                freqs
                    .iter()
                    .map(|xi| phi_hat(&[xi[0] * scale, xi[1] * scale]))
                    .collect(),
            );
        }
        bands.push(leq.last().unwrap().iter().map(|v| 1.0 - v).collect());
        Ok(Self {
            grid,
            j_min,
            j_max,
            bands,
            leq,
        })
    }

    /// Largest `j` whose band support stays inside the Nyquist disc:
    /// `floor(log2(πN/L)) - 1`.
    pub fn max_band(grid: &GridSpec) -> i32 {
        (grid.nyquist().log2() + 1e-12).floor() as i32 - 1
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_max
    }

    /// Every band index of the closed partition, residuals included.
    pub fn band_indices(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min - 1..=self.j_max + 1
    }

    /// Same family on a grid whose period is scaled by `2^{-t}`, with the
    /// band window shifted by `t`.
    pub fn dilated(&self, t: i32) -> Result<Self> {
        let grid = self.grid.rescaled(2f64.powi(-t))?;
        Self::new(grid, self.j_min + t, self.j_max + t)
    }

    fn check_grid(&self, f: &RealField) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    fn check_band(&self, j: i32, lo: i32, hi: i32) -> Result<()> {
        if j < lo || j > hi {
            return Err(Error::BandOutOfRange { index: j, lo, hi });
        }
        Ok(())
    }

    /// Multiplier table of band `b` in the closed partition; `None` outside it.
    pub fn band_table(&self, b: i32) -> Option<&[f64]> {
        let i = b - (self.j_min - 1);
        self.bands.get(usize::try_from(i).ok()?).map(|v| v.as_slice())
    }

    /// Value of the band-`b` multiplier at flat index `idx` (0 outside the partition).
    pub fn band_value(&self, b: i32, idx: usize) -> f64 {
        self.band_table(b).map_or(0.0, |t| t[idx])
    }

    /// Value of the family's `P_{≤m}` multiplier at flat index `idx`.
    pub fn leq_value(&self, m: i32, idx: usize) -> f64 {
        if m < self.j_min - 1 {
            0.0
        } else if m > self.j_max {
            1.0
        } else {
            self.leq[(m - self.j_min + 1) as usize][idx]
        }
    }

    /// Band-`b` multiplier at an arbitrary frequency, by formula.
    pub fn band_at(&self, b: i32, xi: &[f64; 2]) -> f64 {
        if b < self.j_min - 1 || b > self.j_max + 1 {
            0.0
        } else if b == self.j_min - 1 {
            psi_hat(b, xi)
        } else if b == self.j_max + 1 {
            1.0 - psi_hat(self.j_max, xi)
        } else {
            let scale = 2f64.powi(-b);
            phi_hat(&[xi[0] * scale, xi[1] * scale])
        }
    }

    /// `P_{≤m}` multiplier at an arbitrary frequency, by formula.
    pub fn leq_at(&self, m: i32, xi: &[f64; 2]) -> f64 {
        if m < self.j_min - 1 {
            0.0
        } else if m > self.j_max {
            1.0
        } else {
            psi_hat(m, xi)
        }
    }

    fn apply_table(&self, spec: &SpectralField, table: impl Fn(usize) -> f64) -> RealField {
        let coeffs: Vec<Complex64> = spec
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, &c)| c * table(i))
            .collect();
        SpectralField::new(self.grid, coeffs)
            .expect("grid length preserved")
            .to_real()
    }

    /// Band piece of any index in the closed partition (residuals included).
    pub(crate) fn band_piece_spectral(&self, spec: &SpectralField, b: i32) -> RealField {
        self.apply_table(spec, |i| self.band_value(b, i))
    }

    pub(crate) fn leq_piece_spectral(&self, spec: &SpectralField, m: i32) -> RealField {
        self.apply_table(spec, |i| self.leq_value(m, i))
    }

    /// `P_j f` for `j_min ≤ j ≤ j_max`.
    pub fn project(&self, f: &RealField, j: i32) -> Result<RealField> {
        self.check_grid(f)?;
        self.check_band(j, self.j_min, self.j_max)?;
        Ok(self.band_piece_spectral(&f.to_spectral(), j))
    }

    /// `P_{≤j} f` for `j_min - 1 ≤ j ≤ j_max`.
    pub fn project_leq(&self, f: &RealField, j: i32) -> Result<RealField> {
        self.check_grid(f)?;
        self.check_band(j, self.j_min - 1, self.j_max)?;
        Ok(self.leq_piece_spectral(&f.to_spectral(), j))
    }

    /// `P_{>j} f`, the complement of [`project_leq`](Self::project_leq).
    pub fn project_gt(&self, f: &RealField, j: i32) -> Result<RealField> {
        self.check_grid(f)?;
        self.check_band(j, self.j_min - 1, self.j_max)?;
        Ok(self.apply_table(&f.to_spectral(), |i| 1.0 - self.leq_value(j, i)))
    }

    /// `Φ̃_j f = Σ_{k=-2}^{2} P_{j+k} f`, summed over the closed partition.
    pub fn project_widened(&self, f: &RealField, j: i32) -> Result<RealField> {
        self.check_grid(f)?;
        self.check_band(j, self.j_min, self.j_max)?;
        Ok(self.apply_table(&f.to_spectral(), |i| {
            (j - 2..=j + 2).map(|b| self.band_value(b, i)).sum()
        }))
    }

    pub fn decompose(&self, f: &RealField) -> Result<BandDecomposition> {
        self.check_grid(f)?;
        let spec = f.to_spectral();
        let pieces = (self.j_min..=self.j_max)
            .map(|j| (j, self.band_piece_spectral(&spec, j)))
            .collect();
        Ok(BandDecomposition {
            pieces,
            residual_low: self.band_piece_spectral(&spec, self.j_min - 1),
            residual_high: self.band_piece_spectral(&spec, self.j_max + 1),
        })
    }

    /// Fraction of spectral energy outside `j_min ≤ j ≤ j_max` bands, i.e.
    /// carried by the two residual bands.
    pub fn out_of_window_energy(&self, f: &RealField) -> f64 {
        let spec = f.to_spectral();
        let total: f64 = spec.coeffs().iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = spec
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let w = self.band_value(self.j_min - 1, i) + self.band_value(self.j_max + 1, i);
                c.norm_sqr() * w.min(1.0)
            })
            .sum();
        outside / total
    }
}

/// `f = residual_low + Σ_j pieces[j] + residual_high`.
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    pub pieces: BTreeMap<i32, RealField>,
    pub residual_low: RealField,
    /// Band above `j_max`; zero for fields band-limited inside the window.
    pub residual_high: RealField,
}

impl BandDecomposition {
    pub fn reconstruct(&self) -> RealField {
        let mut out = self.residual_low.clone();
        for piece in self.pieces.values() {
            out = out.add(piece).expect("same grid");
        }
        out.add(&self.residual_high).expect("same grid")
    }
}

/// `‖ ‖(2^{sj} P_j f)‖_{l^q_j} ‖_{L^p}` over `j_min ≤ j ≤ j_max`.
pub fn triebel_lizorkin_norm(f: &RealField, fam: &LpFamily, s: f64, p: f64, q: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("need 1 < p < inf, got {p}")));
    }
    if q.is_nan() || q < 1.0 {
        return Err(invalid("q", format!("need 1 <= q <= inf, got {q}")));
    }
    fam.check_grid(f)?;
    let spec = f.to_spectral();
    let weighted: Vec<RealField> = (fam.j_min..=fam.j_max)
        .map(|j| fam.band_piece_spectral(&spec, j).scale(2f64.powf(s * j as f64)))
        .collect();
    lp_norm(&pointwise_lq(&weighted, q), p)
}

/// Outcome of the pointwise maximal-function bound for `D^s P_{≤k}`.
#[derive(Debug, Clone, Serialize)]
pub struct Lemma22Report {
    pub s: f64,
    pub k: i32,
    /// `‖x·∇D^sΨ‖_{L¹}` evaluated at scale `k` and divided by `2^{sk}`.
    pub c_num: f64,
    /// `max_x |D^s P_{≤k} f(x)| / (2^{sk} C_num Mf(x))`.
    pub max_ratio: f64,
    /// Grid points where the ratio exceeds `1 + tol`.
    pub violations: usize,
    /// `(dim + s)‖D^sΨ‖_{L¹} + ‖D^s∇·(xΨ)‖_{L¹}`, same scaling as `c_num`.
    pub remark_bound: f64,
    pub tolerance: f64,
    /// Which maximal operator the bound was checked against.
    pub maximal: MaximalKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaximalKind {
    Dyadic,
    AllRadii,
}

impl Lemma22Report {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.c_num.is_finite() && self.c_num <= self.remark_bound * (1.0 + self.tolerance)
    }
}

/// Field whose Fourier-series coefficients are `m(ξ)/L^dim`: the periodized
/// kernel of the multiplier `m`.
fn kernel(grid: &GridSpec, m: impl Fn(&[f64; 2]) -> Complex64) -> RealField {
    let vol = grid.volume();
    let coeffs = grid.frequencies().iter().map(|xi| m(xi) / vol).collect();
    SpectralField::new(*grid, coeffs).expect("grid length").to_real()
}

/// `C_num` and the Remark bound at scale `k`, both divided by `2^{sk}`.
pub fn lemma22_constants(grid: &GridSpec, s: f64, k: i32) -> Result<(f64, f64)> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid("s", format!("need s >= 0, got {s}")));
    }
    let scale = 2f64.powi(-k);
    let dim = grid.dim() as f64;
    let base = |xi: &[f64; 2]| riesz_symbol(xi, s) * step(norm(xi) * scale);

    // x·∇D^sΨ_k: spectral gradient of the kernel times the sawtooth coordinate.
    let mut x_grad = RealField::zeros(*grid);
    for axis in 0..grid.dim() {
        let d = kernel(grid, |xi| Complex64::new(0.0, xi[axis]) * base(xi));
        let values: Vec<f64> = d
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * grid.centered_point(i)[axis])
            .collect();
        x_grad = x_grad.add(&RealField::new(*grid, values)?)?;
    }
    let c_num = lp_norm(&x_grad, 1.0)?;

    let ds_psi = kernel(grid, |xi| Complex64::new(base(xi), 0.0));
    // D^s∇·(xΨ_k) ↔ -|ξ|^s ξ·∇Ψ̂_k = -|ξ|^s r 2^{-k} S'(2^{-k} r)
    let div_term = kernel(grid, |xi| {
        let r = norm(xi);
        Complex64::new(-riesz_symbol(xi, s) * r * scale * step_derivative(r * scale), 0.0)
    });
    let remark = (dim + s) * lp_norm(&ds_psi, 1.0)? + lp_norm(&div_term, 1.0)?;
    let norm_k = 2f64.powf(s * k as f64);
    Ok((c_num / norm_k, remark / norm_k))
}

/// Checks `|D^s P_{≤k} f| ≤ 2^{sk} C_num Mf (1 + tol)` at every grid point.
pub fn lemma22_bound_check(
    f: &RealField,
    fam: &LpFamily,
    s: f64,
    k: i32,
    tol: f64,
    maximal: MaximalKind,
) -> Result<Lemma22Report> {
    fam.check_grid(f)?;
    fam.check_band(k, fam.j_min - 1, fam.j_max)?;
    let grid = *f.grid();
    let (c_num, remark_bound) = lemma22_constants(&grid, s, k)?;
    let lhs = f
        .to_spectral()
        .multiply(|xi| Complex64::new(riesz_symbol(xi, s) * psi_hat(k, xi), 0.0))
        .to_real();
    let mf = match maximal {
        MaximalKind::Dyadic => maximal_function(f),
        MaximalKind::AllRadii => maximal_function_all_radii(f),
    };
    let bound_scale = 2f64.powf(s * k as f64) * c_num;
    let mut max_ratio = 0.0f64;
    let mut violations = 0usize;
    // values below this floor are rounding noise of an identically zero field
    let floor = 1e-13 * f.max_abs().max(f64::MIN_POSITIVE) * bound_scale.max(1.0);
    for (l, m) in lhs.values().iter().zip(mf.values()) {
        let bound = bound_scale * m;
        if l.abs() <= floor {
            continue;
        }
        let ratio = if bound > 0.0 { l.abs() / bound } else { f64::INFINITY };
        max_ratio = max_ratio.max(ratio);
        if ratio > 1.0 + tol {
            violations += 1;
        }
    }
    Ok(Lemma22Report {
        s,
        k,
        c_num,
        max_ratio,
        violations,
        remark_bound,
        tolerance: tol,
        maximal,
    })
}

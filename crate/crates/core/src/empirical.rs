//! Empirical boundedness checks for the square-function, maximal and
//! vector-valued maximal inequalities on seeded random fields.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::family::{generate, FamilyKind, FamilySpec};
use crate::field::{RealField, SpectralField};
use crate::grid::GridSpec;
use crate::lp::{triebel_lizorkin_norm, LpFamily};
use crate::maximal::{lp_lq_norm, maximal_function, vector_maximal_norm};
use crate::spectral::lp_norm;

/// Worst normalized value of one empirical check against its allowance.
#[derive(Debug, Clone, Serialize)]
pub struct EmpiricalReport {
    pub name: &'static str,
    /// Largest observed value of the normalized statistic.
    pub worst: f64,
    pub allowance: f64,
    pub samples: usize,
    pub pass: bool,
}

impl EmpiricalReport {
    fn new(name: &'static str, worst: f64, allowance: f64, samples: usize) -> Self {
        Self {
            name,
            worst,
            allowance,
            samples,
            pass: worst.is_finite() && worst <= allowance,
        }
    }
}

/// `μ(p) = max{p, 1/(p - 1)}`.
pub fn mu(p: f64) -> f64 {
    p.max(1.0 / (p - 1.0))
}

fn random_fields(fam: &LpFamily, count: usize, seed: u64) -> Result<Vec<RealField>> {
    let (lo, hi) = (fam.j_min() + 1, fam.j_max() - 1);
    if lo > hi {
        return Err(invalid("family", "needs at least three bands"));
    }
    (0..count as u64)
        .map(|i| {
            let spec = FamilySpec {
                kind: FamilyKind::RandomBandlimited { j_lo: lo, j_hi: hi },
                seed: seed.wrapping_add(i),
            };
            Ok(generate(&spec, fam)?.f)
        })
        .collect()
}

/// `μ(p)^{-1} ‖f‖_p ≤ ‖f‖_{Ḟ⁰_{p,2}} ≤ μ(p) ‖f‖_p` up to `slack`. The statistic
/// is `max(r/μ, 1/(μ r))` with `r = ‖f‖_{Ḟ⁰_{p,2}} / ‖f‖_p`.
pub fn square_function_check(fam: &LpFamily, ps: &[f64], count: usize, seed: u64, slack: f64) -> Result<EmpiricalReport> {
    let mut worst = 0.0f64;
    let fields = random_fields(fam, count, seed)?;
    for f in &fields {
        for &p in ps {
            let r = triebel_lizorkin_norm(f, fam, 0.0, p, 2.0)? / lp_norm(f, p)?;
            worst = worst.max((r / mu(p)).max(1.0 / (mu(p) * r)));
        }
    }
    Ok(EmpiricalReport::new("square_function", worst, slack, fields.len() * ps.len()))
}

/// `‖Mf‖_p ≤ 3^{dim/p} p' ‖f‖_p` up to `slack`; the statistic is the ratio of
/// the two sides.
pub fn maximal_bound_check(fam: &LpFamily, ps: &[f64], count: usize, seed: u64, slack: f64) -> Result<EmpiricalReport> {
    let dim = fam.grid().dim() as f64;
    let mut worst = 0.0f64;
    let fields = random_fields(fam, count, seed)?;
    for f in &fields {
        let mf = maximal_function(f);
        for &p in ps {
            let bound = 3f64.powf(dim / p) * p / (p - 1.0) * lp_norm(f, p)?;
            worst = worst.max(lp_norm(&mf, p)? / bound);
        }
    }
    Ok(EmpiricalReport::new("maximal_bound", worst, slack, fields.len() * ps.len()))
}

/// Trigonometric interpolation of `f` onto `n` points per axis, same period.
pub fn resample(f: &RealField, n: usize) -> Result<RealField> {
    let old = *f.grid();
    let grid = GridSpec::new(old.dim(), n, old.period())?;
    let spec = f.to_spectral();
    let half = old.n().min(n) as i64 / 2;
    let coeffs: Vec<Complex64> = (0..grid.len())
        .map(|idx| {
            let k: Vec<i64> = if grid.dim() == 1 {
                vec![grid.wavenumber(idx)]
            } else {
                vec![grid.wavenumber(idx / n), grid.wavenumber(idx % n)]
            };
            // the shared Nyquist row is dropped; test fields have no energy there
            if k.iter().all(|&v| v.abs() < half) {
                spec.coeff(&k)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    Ok(SpectralField::new(grid, coeffs)?.to_real())
}

/// `‖(M f_j)‖_{L^p(l^q)} / ‖(f_j)‖_{L^p(l^q)}` for `count` random sequences of
/// `terms` fields, each sampled at every size in `sizes`. The statistic is the
/// largest per-sequence spread `max_N / min_N` across grid sizes.
#[allow(clippy::too_many_arguments)]
pub fn vector_maximal_check(
    fam: &LpFamily,
    sizes: &[usize],
    count: usize,
    terms: usize,
    p: f64,
    q: f64,
    seed: u64,
    band: f64,
) -> Result<EmpiricalReport> {
    let mut worst = 1.0f64;
    for i in 0..count as u64 {
        let seq = random_fields(fam, terms, seed.wrapping_add(i * terms as u64))?;
        let mut ratios = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let fs = seq.iter().map(|f| resample(f, n)).collect::<Result<Vec<_>>>()?;
            ratios.push(vector_maximal_norm(&fs, p, q)? / lp_lq_norm(&fs, p, q)?);
        }
        let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        worst = worst.max(max / min);
    }
    Ok(EmpiricalReport::new("vector_maximal", worst, band, count * sizes.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn fam() -> LpFamily {
        LpFamily::new(GridSpec::new(1, 128, PI).unwrap(), 0, 5).unwrap()
    }

    #[test]
    fn resample_preserves_band_limited_fields() {
        let grid = GridSpec::new(1, 64, PI).unwrap();
        let f = RealField::from_fn(grid, |x| (2.0 * x[0]).sin() + 0.3 * (10.0 * x[0]).cos());
        let up = resample(&f, 256).unwrap();
        let exact = RealField::from_fn(*up.grid(), |x| (2.0 * x[0]).sin() + 0.3 * (10.0 * x[0]).cos());
        assert!(up.max_abs_diff(&exact) < 1e-13);
        assert!(resample(&up, 64).unwrap().max_abs_diff(&f) < 1e-13);
    }

    #[test]
    fn checks_are_reproducible_and_pass() {
        let a = square_function_check(&fam(), &[1.5, 2.0, 4.0], 5, 1, 1.2).unwrap();
        let b = square_function_check(&fam(), &[1.5, 2.0, 4.0], 5, 1, 1.2).unwrap();
        assert_eq!(a.worst, b.worst);
        assert!(a.pass, "{a:?}");
        let m = maximal_bound_check(&fam(), &[1.5, 2.0, 4.0], 5, 1, 1.1).unwrap();
        assert!(m.pass, "{m:?}");
        let fs = vector_maximal_check(&fam(), &[128, 256], 2, 3, 2.0, 2.0, 1, 2.0).unwrap();
        assert!(fs.pass && fs.worst >= 1.0, "{fs:?}");
    }
}

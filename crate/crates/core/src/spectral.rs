//! Fourier multipliers on the torus and quadrature norms.

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::field::{RealField, SpectralField};
use crate::grid::{norm, MultiIndex};

/// `|ξ|^s` with the homogeneous convention at the origin: `0` for `s ≠ 0`,
/// `1` for `s = 0`.
pub fn riesz_symbol(xi: &[f64; 2], s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let r = norm(xi);
    if r == 0.0 {
        0.0
    } else {
        r.powf(s)
    }
}

/// `(iξ)^α`.
pub fn derivative_symbol(xi: &[f64; 2], alpha: &MultiIndex) -> Complex64 {
    let order = alpha.order();
    let i_pow = match order % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    };
    i_pow * alpha.monomial(xi)
}

/// Applies a Fourier multiplier and returns the real part of the result.
pub fn apply_multiplier(f: &RealField, m: impl Fn(&[f64; 2]) -> Complex64) -> RealField {
    f.to_spectral().multiply(m).to_real()
}

/// Riesz potential `D^s = (-Δ)^{s/2}`.
pub fn riesz_potential(f: &RealField, s: f64) -> RealField {
    if s == 0.0 {
        return f.clone();
    }
    apply_multiplier(f, |xi| Complex64::new(riesz_symbol(xi, s), 0.0))
}

pub fn partial_derivative(f: &RealField, alpha: &MultiIndex) -> Result<RealField> {
    if alpha.dim() != f.grid().dim() {
        return Err(invalid(
            "alpha",
            format!("dimension {} != grid dimension {}", alpha.dim(), f.grid().dim()),
        ));
    }
    if alpha.order() == 0 {
        return Ok(f.clone());
    }
    Ok(apply_multiplier(f, |xi| derivative_symbol(xi, alpha)))
}

/// `∂_m f` for every axis `m`.
pub fn gradient(f: &RealField) -> Vec<RealField> {
    let dim = f.grid().dim();
    let spec = f.to_spectral();
    (0..dim)
        .map(|axis| {
            let alpha = MultiIndex::axis(dim, axis, 1);
            spec.multiply(|xi| derivative_symbol(xi, &alpha)).to_real()
        })
        .collect()
}

/// `∇f · ∇g`.
pub fn grad_dot(f: &RealField, g: &RealField) -> Result<RealField> {
    f.check_same_grid(g)?;
    let mut out = RealField::zeros(*f.grid());
    for (df, dg) in gradient(f).iter().zip(gradient(g).iter()) {
        out = out.add(&df.mul(dg)?)?;
    }
    Ok(out)
}

/// Uniform-grid quadrature `(h^dim Σ |f_i|^p)^{1/p}` for `1 ≤ p < ∞`.
pub fn lp_norm(f: &RealField, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p", format!("need 1 <= p < inf, got {p}")));
    }
    let w = f.grid().cell_volume();
    let sum: f64 = if p == 2.0 {
        f.values().iter().map(|v| v * v).sum()
    } else if p == 1.0 {
        f.values().iter().map(|v| v.abs()).sum()
    } else {
        f.values().iter().map(|v| v.abs().powf(p)).sum()
    };
    Ok((w * sum).powf(1.0 / p))
}

/// Spectral-side energy `L^dim Σ_k |c_k|²`; equals `lp_norm(f, 2)²`.
pub fn spectral_energy(f: &SpectralField) -> f64 {
    f.grid().volume() * f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
}

/// Removes the zero-frequency mode.
pub fn remove_mean(f: &RealField) -> RealField {
    let mean = f.values().iter().sum::<f64>() / f.values().len() as f64;
    f.map(|v| v - mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn periodized_gaussian(grid: GridSpec, c: f64, sigma: f64) -> RealField {
        let l = grid.period();
        RealField::from_fn(grid, |x| {
            (-5..=5)
                .map(|m| {
                    let d = x[0] - c + m as f64 * l;
                    (-d * d / (2.0 * sigma * sigma)).exp()
                })
                .sum()
        })
    }

    fn periodized_gaussian_dd(grid: GridSpec, c: f64, sigma: f64) -> RealField {
        let l = grid.period();
        let s2 = sigma * sigma;
        RealField::from_fn(grid, |x| {
            (-5..=5)
                .map(|m| {
                    let d = x[0] - c + m as f64 * l;
                    (d * d / (s2 * s2) - 1.0 / s2) * (-d * d / (2.0 * s2)).exp()
                })
                .sum()
        })
    }

    #[test]
    fn riesz_on_eigenfunction() {
        let g = GridSpec::one_d(128).unwrap();
        let f = RealField::from_fn(g, |x| (3.0 * x[0]).sin());
        let expected = f.scale(3f64.powf(1.5));
        assert!(riesz_potential(&f, 1.5).relative_error(&expected) < 1e-12);
        assert_eq!(riesz_potential(&f, 0.0), f);
    }

    #[test]
    fn riesz_two_matches_negative_laplacian() {
        let g = GridSpec::new(1, 256, 16.0 * PI).unwrap();
        let f = periodized_gaussian(g, 8.0 * PI, 1.3);
        let lap = partial_derivative(&f, &MultiIndex::axis(1, 0, 2)).unwrap().scale(-1.0);
        assert!(riesz_potential(&f, 2.0).relative_error(&lap) < 1e-10);
    }

    #[test]
    fn derivatives_of_tones_and_gaussians() {
        let g = GridSpec::one_d(64).unwrap();
        let f = RealField::from_fn(g, |x| (5.0 * x[0]).sin());
        let df = partial_derivative(&f, &MultiIndex::axis(1, 0, 1)).unwrap();
        let expected = RealField::from_fn(g, |x| 5.0 * (5.0 * x[0]).cos());
        assert!(df.relative_error(&expected) < 1e-12);
        assert_eq!(partial_derivative(&f, &MultiIndex::zero(1)).unwrap(), f);

        let g = GridSpec::new(1, 512, 16.0 * PI).unwrap();
        let (c, sigma) = (8.0 * PI, 1.0);
        let dd = partial_derivative(&periodized_gaussian(g, c, sigma), &MultiIndex::axis(1, 0, 2)).unwrap();
        assert!(dd.relative_error(&periodized_gaussian_dd(g, c, sigma)) < 1e-8);
    }

    #[test]
    fn norms() {
        let g = GridSpec::new(1, 64, 3.0).unwrap();
        let c = RealField::constant(g, -2.0);
        assert!((lp_norm(&c, 2.0).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        let g2 = GridSpec::new(2, 16, 3.0).unwrap();
        assert!((lp_norm(&RealField::constant(g2, 2.0), 2.0).unwrap() - 2.0 * 3.0).abs() < 1e-12);

        let g = GridSpec::one_d(64).unwrap();
        let s = RealField::from_fn(g, |x| x[0].sin());
        assert!((lp_norm(&s, 2.0).unwrap() - PI.sqrt()).abs() < 1e-12);
        assert!(lp_norm(&s, 0.5).is_err());
        assert!(lp_norm(&s, f64::INFINITY).is_err());
        assert_eq!(lp_norm(&RealField::zeros(g), 3.0).unwrap(), 0.0);
    }

    #[test]
    fn plancherel() {
        let g = GridSpec::new(2, 32, 1.7).unwrap();
        let f = RealField::from_fn(g, |p| (p[0] * 3.0).sin() * (1.0 + p[1]).exp().cos());
        let lhs = lp_norm(&f, 2.0).unwrap().powi(2);
        let rhs = spectral_energy(&f.to_spectral());
        assert!((lhs - rhs).abs() / lhs < 1e-12);
    }

    #[test]
    fn grad_dot_of_tones() {
        let g = GridSpec::new(2, 32, 2.0 * PI).unwrap();
        let f = RealField::from_fn(g, |p| p[0].sin());
        let h = RealField::from_fn(g, |p| (p[0] + p[1]).sin());
        let expected = RealField::from_fn(g, |p| p[0].cos() * (p[0] + p[1]).cos());
        assert!(grad_dot(&f, &h).unwrap().relative_error(&expected) < 1e-12);
    }
}

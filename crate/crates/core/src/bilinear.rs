//! Bilinear Fourier multipliers
//! `B(F, G)(x) = Σ_ξ Σ_η e^{ix·(ξ+η)} b(ξ, η) F̂(ξ) Ĝ(η)` on the torus.
//!
//! The direct double sum is the reference path; the separable path and the
//! paraproduct pieces are checked against it.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::field::{inverse, RealField, SpectralField};
use crate::grid::{factorial, GridSpec, MultiIndex};
use crate::lp::LpFamily;
use crate::spectral::{partial_derivative, riesz_potential, riesz_symbol};
use crate::symbol::{CompiledSymbol, Localization, RadialDerivative, SymbolKind, SymbolSpec};

pub const MAX_DIRECT_N_1D: usize = 512;
pub const MAX_DIRECT_N_2D: usize = 64;

/// Relative residual above which a decomposition is flagged.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

fn check_size(grid: &GridSpec) -> Result<()> {
    let limit = match grid.dim() {
        1 => MAX_DIRECT_N_1D,
        _ => MAX_DIRECT_N_2D,
    };
    if grid.n() > limit {
        return Err(Error::SizeGuard { modes: grid.len() });
    }
    Ok(())
}

/// Flat index of `a - b` with periodic folding per axis.
fn flat_sub(grid: &GridSpec, a: usize, b: usize) -> usize {
    let n = grid.n();
    match grid.dim() {
        1 => (a + n - b) % n,
        _ => {
            let r = (a / n + n - b / n) % n;
            let c = (a % n + n - b % n) % n;
            r * n + c
        }
    }
}

/// Output of the direct sum with its diagnostics.
#[derive(Debug, Clone)]
pub struct DirectOutput {
    pub field: RealField,
    /// Contributing pairs evaluated at a genuine symbol singularity.
    pub singular_pairs: usize,
    /// Largest imaginary part of the synthesized output.
    pub imaginary_residue: f64,
}

/// Direct sum on coefficient vectors: `out[m] = Σ_k b(ξ_k, η_{m-k}) F̂_k Ĝ_{m-k}`,
/// with a fixed summation order per output mode.
pub(crate) fn direct_coeffs(
    sym: &CompiledSymbol,
    grid: &GridSpec,
    cf: &[Complex64],
    cg: &[Complex64],
) -> Result<(Vec<Complex64>, usize)> {
    check_size(grid)?;
    if let Some(fam) = sym.localization().family() {
        if fam.grid() != grid {
            return Err(Error::GridMismatch);
        }
    }
    let freqs = grid.frequencies();
    let active: Vec<usize> = (0..cf.len()).filter(|&k| cf[k] != ZERO).collect();
    let loc = sym.localization();
    let results: Vec<(Complex64, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|m| {
            let mut acc = ZERO;
            let mut singular = 0;
            for &k in &active {
                let l = flat_sub(grid, m, k);
                if cg[l] == ZERO {
                    continue;
                }
                let w = loc.weight_at(k, l);
                if w == 0.0 {
                    continue;
                }
                let e = sym.eval_bare(&freqs[k], &freqs[l]);
                if e.singular {
                    singular += 1;
                }
                acc += cf[k] * cg[l] * (w * e.value);
            }
            (acc, singular)
        })
        .collect();
    let singular = results.iter().map(|r| r.1).sum();
    Ok((results.into_iter().map(|r| r.0).collect(), singular))
}

fn synthesize(grid: &GridSpec, coeffs: &[Complex64]) -> (RealField, f64) {
    SpectralField::new(*grid, coeffs.to_vec())
        .expect("length matches grid")
        .to_real_checked()
}

/// Direct double sum over all frequency pairs, with diagnostics.
pub fn apply_direct_report(sym: &SymbolSpec, f: &RealField, g: &RealField) -> Result<DirectOutput> {
    f.check_same_grid(g)?;
    let compiled = sym.compile()?;
    let (coeffs, singular_pairs) = direct_coeffs(
        &compiled,
        f.grid(),
        f.to_spectral().coeffs(),
        g.to_spectral().coeffs(),
    )?;
    let (field, imaginary_residue) = synthesize(f.grid(), &coeffs);
    Ok(DirectOutput {
        field,
        singular_pairs,
        imaginary_residue,
    })
}

/// Direct double sum over all frequency pairs; the output mode `ξ + η` is
/// folded periodically.
pub fn apply_direct(sym: &SymbolSpec, f: &RealField, g: &RealField) -> Result<RealField> {
    Ok(apply_direct_report(sym, f, g)?.field)
}

/// Direct sum on arbitrary (possibly non-Hermitian) coefficient fields.
pub fn apply_direct_spectral(sym: &SymbolSpec, f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let compiled = sym.compile()?;
    let (coeffs, _) = direct_coeffs(&compiled, f.grid(), f.coeffs(), g.coeffs())?;
    SpectralField::new(*f.grid(), coeffs)
}

/// Pairs of per-argument multiplier weights whose tensor products sum to
/// the localization weight.
fn weight_pairs(loc: &Localization, grid: &GridSpec) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let len = grid.len();
    match loc {
        Localization::None => Ok(vec![(vec![1.0; len], vec![1.0; len])]),
        Localization::LowHigh(fam) | Localization::Diagonal(fam) => {
            if fam.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let low_high = matches!(loc, Localization::LowHigh(_));
            Ok(fam
                .band_indices()
                .map(|b| {
                    let wf: Vec<f64> = if low_high {
                        (0..len).map(|i| fam.leq_value(b - 3, i)).collect()
                    } else {
                        (0..len).map(|i| fam.band_value(b, i)).collect()
                    };
                    let wg: Vec<f64> = if low_high {
                        (0..len).map(|i| fam.band_value(b, i)).collect()
                    } else {
                        (0..len)
                            .map(|i| (b - 2..=b + 2).map(|k| fam.band_value(k, i)).sum())
                            .collect()
                    };
                    (wf, wg)
                })
                .filter(|(wf, wg)| wf.iter().any(|&v| v != 0.0) && wg.iter().any(|&v| v != 0.0))
                .collect())
        }
    }
}

/// `ξ^α ⊗ ∂^α|η|^s` terms with their scalar coefficients.
fn separable_terms(kind: &SymbolKind, dim: usize) -> Result<Vec<(f64, MultiIndex, RadialDerivative)>> {
    match kind {
        SymbolKind::ThetaDeriv { s, theta, m } if *theta == 0.0 => Ok(MultiIndex::all_of_order(dim, *m)
            .into_iter()
            .map(|alpha| (1.0 / alpha.factorial(), alpha, RadialDerivative::new(*s, &alpha)))
            .collect()),
        SymbolKind::EtaDeriv { s, theta, alpha } if *theta == 0.0 => {
            if alpha.dim() != dim {
                return Err(invalid("alpha", "dimension differs from the grid"));
            }
            Ok(vec![(
                alpha.factorial() / factorial(alpha.order()),
                MultiIndex::zero(dim),
                RadialDerivative::new(*s, alpha),
            )])
        }
        other => Err(Error::UnsupportedSymbol(format!("{other:?}"))),
    }
}

/// Fast path for `ThetaDeriv(s, 0, m)` and `EtaDeriv(s, 0, α)`, optionally
/// localized. The symbol `Σ_α c_α ξ^α μ_α(η)` becomes a finite sum of
/// pointwise products of two linear multipliers.
pub fn apply_separable(sym: &SymbolSpec, f: &RealField, g: &RealField) -> Result<RealField> {
    f.check_same_grid(g)?;
    sym.compile()?;
    let grid = *f.grid();
    let terms = separable_terms(&sym.kind, grid.dim())?;
    let pairs = weight_pairs(&sym.localization, &grid)?;
    let freqs = grid.frequencies();
    let cf = f.to_spectral();
    let cg = g.to_spectral();
    // G-side multipliers do not depend on the band pair
    let mu: Vec<Vec<f64>> = terms
        .iter()
        .map(|(_, _, d)| freqs.iter().map(|eta| d.eval(eta).value).collect())
        .collect();
    let mut out = vec![ZERO; grid.len()];
    for (wf, wg) in &pairs {
        for (ti, (c, alpha, _)) in terms.iter().enumerate() {
            let fs: Vec<Complex64> = cf
                .coeffs()
                .iter()
                .zip(&freqs)
                .zip(wf)
                .map(|((&z, xi), &w)| z * (w * alpha.monomial(xi)))
                .collect();
            let gs: Vec<Complex64> = cg
                .coeffs()
                .iter()
                .zip(&mu[ti])
                .zip(wg)
                .map(|((&z, &m), &w)| z * (w * m))
                .collect();
            let fx = inverse(&grid, &fs);
            let gx = inverse(&grid, &gs);
            for ((o, a), b) in out.iter_mut().zip(&fx).zip(&gx) {
                *o += a * b * *c;
            }
        }
    }
    RealField::new(grid, out.iter().map(|z| z.re).collect())
}

/// The eq. (3.1)-style split of `B(F, G)` into low-high, diagonal and
/// high-low paraproducts.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// `Σ_k B(P_{≤k-3} F, P_k G)`.
    pub low_high: RealField,
    /// `Σ_j Σ_{|k-j|≤2} B(P_j F, P_k G)`.
    pub diagonal: RealField,
    /// `Σ_j B(P_j F, P_{≤j-3} G)`.
    pub high_low: RealField,
    /// `B(F, G)` by one direct sum.
    pub full: RealField,
    /// `max|low_high + diagonal + high_low - full| / max|full|`.
    pub residual: f64,
    /// False when the residual exceeds [`DECOMPOSITION_TOLERANCE`].
    pub band_limited: bool,
    /// Energy fraction of `F` and `G` outside the family's band window.
    pub out_of_window: (f64, f64),
}

impl Decomposition {
    pub fn reconstruct(&self) -> RealField {
        self.low_high
            .add(&self.diagonal)
            .and_then(|s| s.add(&self.high_low))
            .expect("same grid")
    }
}

fn filtered(c: &[Complex64], w: impl Fn(usize) -> f64) -> Vec<Complex64> {
    c.iter().enumerate().map(|(i, &z)| z * w(i)).collect()
}

fn accumulate(acc: &mut [Complex64], part: &[Complex64]) {
    acc.iter_mut().zip(part).for_each(|(a, b)| *a += b);
}

/// Splits `B(F, G)` into the three paraproduct pieces, each assembled from
/// direct sums over band pieces, and checks the reconstruction.
pub fn decompose(sym: &SymbolSpec, f: &RealField, g: &RealField, fam: &LpFamily) -> Result<Decomposition> {
    f.check_same_grid(g)?;
    if f.grid() != fam.grid() {
        return Err(Error::GridMismatch);
    }
    if !matches!(sym.localization, Localization::None) {
        return Err(Error::UnsupportedSymbol("decompose takes an unlocalized symbol".into()));
    }
    let grid = *f.grid();
    let compiled = sym.compile()?;
    let cf = f.to_spectral();
    let cg = g.to_spectral();
    let (cf, cg) = (cf.coeffs(), cg.coeffs());
    let len = grid.len();
    let sum = |a: &[Complex64], b: &[Complex64]| -> Result<Vec<Complex64>> {
        if a.iter().all(|z| *z == ZERO) || b.iter().all(|z| *z == ZERO) {
            return Ok(vec![ZERO; len]);
        }
        Ok(direct_coeffs(&compiled, &grid, a, b)?.0)
    };
    let mut low_high = vec![ZERO; len];
    let mut diagonal = vec![ZERO; len];
    let mut high_low = vec![ZERO; len];
    for b in fam.band_indices() {
        let f_band = filtered(cf, |i| fam.band_value(b, i));
        let g_band = filtered(cg, |i| fam.band_value(b, i));
        let f_low = filtered(cf, |i| fam.leq_value(b - 3, i));
        let g_low = filtered(cg, |i| fam.leq_value(b - 3, i));
        let g_near = filtered(cg, |i| (b - 2..=b + 2).map(|k| fam.band_value(k, i)).sum());
        accumulate(&mut low_high, &sum(&f_low, &g_band)?);
        accumulate(&mut diagonal, &sum(&f_band, &g_near)?);
        accumulate(&mut high_low, &sum(&f_band, &g_low)?);
    }
    let full = direct_coeffs(&compiled, &grid, cf, cg)?.0;
    let (low_high, _) = synthesize(&grid, &low_high);
    let (diagonal, _) = synthesize(&grid, &diagonal);
    let (high_low, _) = synthesize(&grid, &high_low);
    let (full, _) = synthesize(&grid, &full);
    let mut out = Decomposition {
        low_high,
        diagonal,
        high_low,
        full,
        residual: 0.0,
        band_limited: true,
        out_of_window: (fam.out_of_window_energy(f), fam.out_of_window_energy(g)),
    };
    out.residual = out.reconstruct().relative_error(&out.full);
    out.band_limited = out.residual <= DECOMPOSITION_TOLERANCE;
    Ok(out)
}

/// Low-high localized direct sum `B_≪(F, G)`.
pub fn apply_low_high(kind: SymbolKind, f: &RealField, g: &RealField, fam: &LpFamily) -> Result<RealField> {
    apply_direct(&SymbolSpec::low_high(kind, Arc::new(fam.clone())), f, g)
}

/// `Σ_{|α|=ℓ} (-i)^ℓ T^α_≪(∂^α F, D^{s-ℓ} G)`, the order-`ℓ` Taylor remainder
/// of the low-high part of `D^s(FG)`. The θ-integral in each `t^α` is done by
/// Gauss–Legendre quadrature with `quad_order` nodes at every frequency pair.
pub fn remainder_symbol_apply(
    s: f64,
    ell: usize,
    f: &RealField,
    g: &RealField,
    fam: &LpFamily,
    quad_order: usize,
) -> Result<RealField> {
    if !(1..=3).contains(&ell) {
        return Err(invalid("ell", format!("{ell} not in 1..=3")));
    }
    if !(s >= 0.0) {
        return Err(invalid("s", format!("need s >= 0, got {s}")));
    }
    taylor_remainder(s, ell, f, g, fam, quad_order)
}

/// Same as [`remainder_symbol_apply`] without the `s ≥ 0` restriction; used
/// with `s - 2` inside the second-order remainder split.
pub(crate) fn taylor_remainder(
    s: f64,
    ell: usize,
    f: &RealField,
    g: &RealField,
    fam: &LpFamily,
    quad_order: usize,
) -> Result<RealField> {
    f.check_same_grid(g)?;
    let grid = *f.grid();
    let fam = Arc::new(fam.clone());
    let phase = Complex64::new(0.0, -1.0).powu(ell as u32);
    let dg = riesz_potential(g, s - ell as f64).to_spectral();
    let mut out = vec![ZERO; grid.len()];
    for alpha in MultiIndex::all_of_order(grid.dim(), ell) {
        let sym = SymbolSpec::low_high(
            SymbolKind::RemainderTaylor {
                s,
                alpha,
                quad_order,
            },
            fam.clone(),
        )
        .compile()?;
        let df: Vec<Complex64> = partial_derivative(f, &alpha)?
            .to_spectral()
            .coeffs()
            .iter()
            .map(|z| z * phase)
            .collect();
        accumulate(&mut out, &direct_coeffs(&sym, &grid, &df, dg.coeffs())?.0);
    }
    Ok(synthesize(&grid, &out).0)
}

/// `D^{s1} Σ_j (P_j D^{s2} f)(P_j D^{s3} g)` over `j_min ≤ j ≤ j_max`.
pub fn diagonal_paraproduct(s1: f64, s2: f64, s3: f64, f: &RealField, g: &RealField, fam: &LpFamily) -> Result<RealField> {
    for (name, v) in [("s1", s1), ("s2", s2), ("s3", s3)] {
        if !(v >= 0.0) {
            return Err(invalid(name, format!("need >= 0, got {v}")));
        }
    }
    f.check_same_grid(g)?;
    let df = riesz_potential(f, s2);
    let dg = riesz_potential(g, s3);
    let mut acc = RealField::zeros(*f.grid());
    for j in fam.j_min()..=fam.j_max() {
        acc = acc.add(&fam.project(&df, j)?.mul(&fam.project(&dg, j)?)?)?;
    }
    Ok(riesz_potential(&acc, s1))
}

/// `|η|^s` as a multiplier table, for callers assembling symbols by hand.
pub fn riesz_table(grid: &GridSpec, s: f64) -> Vec<f64> {
    grid.frequencies().iter().map(|xi| riesz_symbol(xi, s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{grad_dot, remove_mean};
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(1, 64, PI).unwrap()
    }

    /// Smooth mean-free field with modes up to `kmax`.
    fn field(grid: GridSpec, seed: u64, kmax: i64) -> RealField {
        let mut state = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let modes: Vec<(i64, i64, f64, f64)> = (1..=kmax)
            .flat_map(|a| (0..=if grid.dim() == 2 { kmax } else { 0 }).map(move |b| (a, b)))
            .map(|(a, b)| (a, b, next(), next()))
            .collect();
        let l = grid.period();
        remove_mean(&RealField::from_fn(grid, |x| {
            modes
                .iter()
                .map(|&(a, b, c, d)| {
                    let ph = 2.0 * PI * (a as f64 * x[0] + b as f64 * x[1]) / l;
                    c * ph.cos() + d * ph.sin()
                })
                .sum()
        }))
    }

    #[test]
    fn constant_symbol_is_pointwise_product() {
        for g in [grid(), GridSpec::new(2, 16, 2.0 * PI).unwrap()] {
            let (f, h) = (field(g, 1, 3), field(g, 2, 3));
            let out = apply_direct(&SymbolSpec::new(SymbolKind::Constant { c: 1.0 }), &f, &h).unwrap();
            assert!(out.relative_error(&f.mul(&h).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn sum_and_shifted_riesz_identities() {
        let g = grid();
        let (f, h) = (field(g, 3, 12), field(g, 4, 12));
        let s = 1.3;
        let sum = apply_direct(&SymbolSpec::new(SymbolKind::SumRiesz { s }), &f, &h).unwrap();
        assert!(sum.relative_error(&riesz_potential(&f.mul(&h).unwrap(), s)) < 1e-11);
        let shifted = apply_direct(&SymbolSpec::new(SymbolKind::ShiftedRiesz { s, theta: 0.0 }), &f, &h).unwrap();
        assert!(shifted.relative_error(&f.mul(&riesz_potential(&h, s)).unwrap()) < 1e-11);
        let one = apply_direct(&SymbolSpec::new(SymbolKind::ShiftedRiesz { s, theta: 1.0 }), &f, &h).unwrap();
        assert_eq!(one, sum);
    }

    #[test]
    fn first_theta_derivative_is_minus_gradient_pairing() {
        // A^1_s(0)(f, g) = -s ∇f · D^{s-2} ∇g
        for g in [grid(), GridSpec::new(2, 16, 2.0 * PI).unwrap()] {
            let (f, h) = (field(g, 5, 4), field(g, 6, 4));
            let s = 1.5;
            let a1 = apply_direct(&SymbolSpec::new(SymbolKind::ThetaDeriv { s, theta: 0.0, m: 1 }), &f, &h).unwrap();
            let grads: Vec<RealField> = crate::spectral::gradient(&h)
                .iter()
                .map(|d| riesz_potential(d, s - 2.0))
                .collect();
            let mut expected = RealField::zeros(g);
            for (df, dh) in crate::spectral::gradient(&f).iter().zip(&grads) {
                expected = expected.add(&df.mul(dh).unwrap()).unwrap();
            }
            let expected = expected.scale(-s);
            assert!(a1.relative_error(&expected) < 1e-11);
            let _ = grad_dot(&f, &h).unwrap();
        }
    }

    #[test]
    fn separable_matches_direct() {
        let g = grid();
        let fam = Arc::new(LpFamily::new(g, 1, 4).unwrap());
        let (f, h) = (field(g, 7, 20), field(g, 8, 20));
        for &s in &[0.5, 1.5, 2.0, 2.5] {
            for m in 0..=3 {
                let kind = SymbolKind::ThetaDeriv { s, theta: 0.0, m };
                for spec in [
                    SymbolSpec::new(kind.clone()),
                    SymbolSpec::low_high(kind.clone(), fam.clone()),
                    SymbolSpec::diagonal(kind.clone(), fam.clone()),
                ] {
                    let a = apply_separable(&spec, &f, &h).unwrap();
                    let b = apply_direct(&spec, &f, &h).unwrap();
                    assert!(a.relative_error(&b) < 1e-10, "s {s} m {m}: {}", a.relative_error(&b));
                }
            }
            let alpha = MultiIndex::new(&[2]).unwrap();
            let spec = SymbolSpec::new(SymbolKind::EtaDeriv { s, theta: 0.0, alpha });
            let a = apply_separable(&spec, &f, &h).unwrap();
            let b = apply_direct(&spec, &f, &h).unwrap();
            assert!(a.relative_error(&b) < 1e-10);
        }
        let bad = SymbolSpec::new(SymbolKind::ThetaDeriv { s: 1.0, theta: 0.5, m: 1 });
        assert!(matches!(apply_separable(&bad, &f, &h), Err(Error::UnsupportedSymbol(_))));
    }

    #[test]
    fn decomposition_reconstructs() {
        let g = grid();
        let fam = LpFamily::new(g, 1, 5).unwrap();
        let (f, h) = (field(g, 9, 20), field(g, 10, 20));
        for kind in [
            SymbolKind::SumRiesz { s: 1.5 },
            SymbolKind::ThetaDeriv { s: 0.7, theta: 0.3, m: 2 },
        ] {
            let d = decompose(&SymbolSpec::new(kind), &f, &h, &fam).unwrap();
            assert!(d.band_limited && d.residual < 1e-12, "{}", d.residual);
        }
    }

    #[test]
    fn decomposition_separates_far_bands() {
        let g = GridSpec::new(1, 256, PI).unwrap();
        let fam = LpFamily::new(g, 0, 6).unwrap();
        // |ξ| = 2 (band 1) against |η| = 64 (band 6)
        let f = RealField::from_fn(g, |x| (2.0 * x[0]).cos());
        let h = RealField::from_fn(g, |x| (64.0 * x[0]).sin());
        let d = decompose(&SymbolSpec::new(SymbolKind::SumRiesz { s: 1.0 }), &f, &h, &fam).unwrap();
        let scale = d.full.max_abs();
        assert!(d.diagonal.max_abs() < 1e-14 * scale && d.high_low.max_abs() < 1e-14 * scale);
        assert!(d.low_high.relative_error(&d.full) < 1e-14);
        let d = decompose(&SymbolSpec::new(SymbolKind::SumRiesz { s: 1.0 }), &h, &h, &fam).unwrap();
        let scale = d.full.max_abs();
        assert!(d.low_high.max_abs() < 1e-14 * scale && d.high_low.max_abs() < 1e-14 * scale);
    }

    #[test]
    fn first_order_remainder_matches_commutator_piece() {
        let g = GridSpec::new(1, 128, PI).unwrap();
        let fam = LpFamily::new(g, 0, 5).unwrap();
        let (f, h) = (field(g, 11, 30), field(g, 12, 30));
        let s = 1.5;
        let lh = apply_low_high(SymbolKind::SumRiesz { s }, &f, &h, &fam).unwrap();
        let a0 = apply_low_high(SymbolKind::ShiftedRiesz { s, theta: 0.0 }, &f, &h, &fam).unwrap();
        let r = remainder_symbol_apply(s, 1, &f, &h, &fam, 32).unwrap();
        assert!(r.max_abs_diff(&lh.sub(&a0).unwrap()) < 1e-9 * lh.max_abs());
    }

    #[test]
    fn cubic_remainder_vanishes_for_laplacian() {
        let g = GridSpec::new(1, 128, PI).unwrap();
        let fam = LpFamily::new(g, 0, 5).unwrap();
        let (f, h) = (field(g, 13, 30), field(g, 14, 30));
        let r3 = remainder_symbol_apply(2.0, 3, &f, &h, &fam, 32).unwrap();
        assert!(r3.max_abs() < 1e-9);
        // ℓ = 2 leaves the |ξ|² part: Σ_b (D² P_{≤b-3} f) P_b h
        let r2 = remainder_symbol_apply(2.0, 2, &f, &h, &fam, 32).unwrap();
        let mut expected = RealField::zeros(g);
        for b in fam.band_indices() {
            let low = fam.leq_piece_spectral(&f.to_spectral(), b - 3);
            let high = fam.band_piece_spectral(&h.to_spectral(), b);
            expected = expected.add(&riesz_potential(&low, 2.0).mul(&high).unwrap()).unwrap();
        }
        assert!(r2.max_abs_diff(&expected) < 1e-9 * expected.max_abs());
    }

    #[test]
    fn quadrature_self_convergence() {
        let g = GridSpec::new(1, 64, PI).unwrap();
        let fam = LpFamily::new(g, 0, 4).unwrap();
        let (f, h) = (field(g, 15, 15), field(g, 16, 15));
        let a = remainder_symbol_apply(1.5, 2, &f, &h, &fam, 16).unwrap();
        let b = remainder_symbol_apply(1.5, 2, &f, &h, &fam, 64).unwrap();
        assert!(a.relative_error(&b) < 1e-10);
        assert!(remainder_symbol_apply(1.5, 4, &f, &h, &fam, 16).is_err());
    }

    #[test]
    fn diagonal_paraproduct_cases() {
        let g = GridSpec::new(1, 256, PI).unwrap();
        let fam = LpFamily::new(g, 0, 6).unwrap();
        let f = RealField::from_fn(g, |x| (8.0 * x[0]).cos());
        let h = RealField::from_fn(g, |x| (8.0 * x[0]).sin());
        let d = diagonal_paraproduct(0.0, 0.0, 0.0, &f, &h, &fam).unwrap();
        assert!(d.relative_error(&f.mul(&h).unwrap()) < 1e-13);
        let far = RealField::from_fn(g, |x| (64.0 * x[0]).sin());
        let z = diagonal_paraproduct(1.0, 0.5, 0.5, &f, &far, &fam).unwrap();
        let scale = riesz_potential(&riesz_potential(&f, 0.5).mul(&riesz_potential(&far, 0.5)).unwrap(), 1.0).max_abs();
        assert!(z.max_abs() < 1e-14 * scale);
    }

    #[test]
    fn size_guard() {
        let g = GridSpec::new(1, 1024, PI).unwrap();
        let f = RealField::zeros(g);
        let r = apply_direct(&SymbolSpec::new(SymbolKind::Constant { c: 1.0 }), &f, &f);
        assert!(matches!(r, Err(Error::SizeGuard { .. })));
    }

    /// Symbols even under `(ξ, η) → (-ξ, -η)` give real outputs; odd ones
    /// give purely imaginary outputs, which is why the Taylor pieces carry
    /// the phase `(-i)^ℓ`.
    #[test]
    fn outputs_are_real() {
        let g = grid();
        let (f, h) = (field(g, 17, 10), field(g, 18, 10));
        for kind in [
            SymbolKind::ThetaDeriv { s: 1.5, theta: 0.0, m: 1 },
            SymbolKind::ThetaDeriv { s: 2.5, theta: 0.5, m: 3 },
            SymbolKind::EtaDeriv {
                s: 2.5,
                theta: 0.5,
                alpha: MultiIndex::new(&[2]).unwrap(),
            },
        ] {
            let out = apply_direct_report(&SymbolSpec::new(kind), &f, &h).unwrap();
            assert!(out.imaginary_residue <= 1e-11 * out.field.max_abs());
        }
        let odd = SymbolKind::EtaDeriv {
            s: 2.5,
            theta: 0.5,
            alpha: MultiIndex::new(&[3]).unwrap(),
        };
        let out = apply_direct_report(&SymbolSpec::new(odd), &f, &h).unwrap();
        assert!(out.field.max_abs() <= 1e-11 * out.imaginary_residue);
    }
}

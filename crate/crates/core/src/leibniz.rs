//! Correction terms, commutators and Leibniz-rule remainders, plus the
//! estimate reports that turn each inequality into a measured ratio.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bilinear::{apply_low_high, apply_separable, taylor_remainder};
use crate::error::{invalid, Error, Result};
use crate::field::RealField;
use crate::grid::MultiIndex;
use crate::lp::LpFamily;
use crate::spectral::{grad_dot, gradient, lp_norm, partial_derivative, riesz_potential};
use crate::bilinear::diagonal_paraproduct;
use crate::symbol::{SymbolKind, SymbolSpec};

/// Default Gauss–Legendre order for remainder symbols.
pub const DEFAULT_QUAD_ORDER: usize = 32;

/// `f D^s g + g D^s f`.
pub fn correction_kpv(f: &RealField, g: &RealField, s: f64) -> Result<RealField> {
    f.check_same_grid(g)?;
    let a = f.mul(&riesz_potential(g, s))?;
    let b = g.mul(&riesz_potential(f, s))?;
    a.add(&b)
}

/// `D^s(fg) - f D^s g - g D^s f`.
pub fn remainder_kpv(f: &RealField, g: &RealField, s: f64) -> Result<RealField> {
    riesz_potential(&f.mul(g)?, s).sub(&correction_kpv(f, g, s)?)
}

/// `D^s(fg) - f D^s g - g D^s f + s D^{s-2}(∇f·∇g)` for `s ≥ 2`.
pub fn remainder_second_order(f: &RealField, g: &RealField, s: f64) -> Result<RealField> {
    if !(s >= 2.0) {
        return Err(invalid("s", format!("need s >= 2, got {s}")));
    }
    let extra = riesz_potential(&grad_dot(f, g)?, s - 2.0).scale(s);
    remainder_kpv(f, g, s)?.add(&extra)
}

/// `[D^s, f] g = D^s(fg) - f D^s g`.
pub fn commutator(f: &RealField, g: &RealField, s: f64) -> Result<RealField> {
    f.check_same_grid(g)?;
    riesz_potential(&f.mul(g)?, s).sub(&f.mul(&riesz_potential(g, s))?)
}

/// `A_s^m(0)(f, g)` through the separable path.
pub fn theta_coefficient(f: &RealField, g: &RealField, s: f64, m: usize) -> Result<RealField> {
    apply_separable(&SymbolSpec::new(SymbolKind::ThetaDeriv { s, theta: 0.0, m }), f, g)
}

/// `Σ_k Σ_{m<ℓ} A_s^m(0)(P_{≤k-3} f, P_k g)`.
pub fn low_high_correction(f: &RealField, g: &RealField, fam: &LpFamily, s: f64, ell: usize) -> Result<RealField> {
    let fam = Arc::new(fam.clone());
    let mut acc = RealField::zeros(*f.grid());
    for m in 0..ell {
        let sym = SymbolSpec::low_high(SymbolKind::ThetaDeriv { s, theta: 0.0, m }, fam.clone());
        acc = acc.add(&apply_separable(&sym, f, g)?)?;
    }
    Ok(acc)
}

/// `D^s(fg)` minus the symmetrized low-high correction sum of order `ℓ`.
pub fn theorem11_remainder(f: &RealField, g: &RealField, fam: &LpFamily, spec: &EstimateSpec) -> Result<RealField> {
    spec.validate(EstimateKind::Thm11)?;
    let a = low_high_correction(f, g, fam, spec.s, spec.ell)?;
    let b = low_high_correction(g, f, fam, spec.s, spec.ell)?;
    // elementwise a + b is commutative, so the result is exactly swap-symmetric
    riesz_potential(&f.mul(g)?, spec.s).sub(&a.add(&b)?)
}

/// `B^{II}_≪ = -Σ_k P_k g · D^s P_{≤k-3} f`.
fn minus_g_ds_f_low_high(f: &RealField, g: &RealField, fam: &LpFamily, s: f64) -> Result<RealField> {
    let (sf, sg) = (f.to_spectral(), g.to_spectral());
    let mut acc = RealField::zeros(*f.grid());
    for b in fam.band_indices() {
        let low = riesz_potential(&fam.leq_piece_spectral(&sf, b - 3), s);
        acc = acc.sub(&fam.band_piece_spectral(&sg, b).mul(&low)?)?;
    }
    Ok(acc)
}

/// Low-high part of a remainder, split into the pieces used to bound it.
#[derive(Debug, Clone)]
pub struct ProofSplit {
    /// `B_≪(f, g)` by one localized direct sum.
    pub low_high: RealField,
    pub pieces: Vec<RealField>,
    /// `max|Σ pieces - low_high|` over the largest sup norm among all fields,
    /// since the pieces can cancel (at `s = 2` the low-high part vanishes).
    pub residual: f64,
}

impl ProofSplit {
    fn new(low_high: RealField, pieces: Vec<RealField>) -> Result<Self> {
        let mut sum = RealField::zeros(*low_high.grid());
        for p in &pieces {
            sum = sum.add(p)?;
        }
        let scale = pieces.iter().map(RealField::max_abs).fold(low_high.max_abs(), f64::max);
        let diff = sum.max_abs_diff(&low_high);
        let residual = if scale > 0.0 { diff / scale } else { diff };
        Ok(Self {
            low_high,
            pieces,
            residual,
        })
    }
}

/// `B_≪ = B^I_≪ + B^{II}_≪` for `B = D^s(fg) - f D^s g - g D^s f`, with
/// `B^I_≪ = Σ_{|α|=1} (-i) T^α_≪(∂^α f, D^{s-1} g)`.
pub fn cor1_split(f: &RealField, g: &RealField, fam: &LpFamily, s: f64, quad_order: usize) -> Result<ProofSplit> {
    let low_high = apply_low_high(SymbolKind::KpvRemainder { s }, f, g, fam)?;
    let b1 = taylor_remainder(s, 1, f, g, fam, quad_order)?;
    let b2 = minus_g_ds_f_low_high(f, g, fam, s)?;
    ProofSplit::new(low_high, vec![b1, b2])
}

/// `B_≪ = B^I_≪ + B^{II}_≪ + B^{III}_≪` for the second-order remainder, with
/// `B^I_≪ = Σ_{|α|=2} (-i)² T^α_≪(∂^α f, D^{s-2} g)` and
/// `B^{II}_≪ = s Σ_m Σ_{|α|=1} (-i) T̃^α_≪(∂^α ∂_m f, D^{s-3} ∂_m g)`.
pub fn cor2_split(f: &RealField, g: &RealField, fam: &LpFamily, s: f64, quad_order: usize) -> Result<ProofSplit> {
    if !(s >= 2.0) {
        return Err(invalid("s", format!("need s >= 2, got {s}")));
    }
    let low_high = apply_low_high(SymbolKind::SecondOrderRemainder { s }, f, g, fam)?;
    let b1 = taylor_remainder(s, 2, f, g, fam, quad_order)?;
    let mut b2 = RealField::zeros(*f.grid());
    for (df, dg) in gradient(f).iter().zip(gradient(g).iter()) {
        b2 = b2.add(&taylor_remainder(s - 2.0, 1, df, dg, fam, quad_order)?.scale(s))?;
    }
    let b3 = minus_g_ds_f_low_high(f, g, fam, s)?;
    ProofSplit::new(low_high, vec![b1, b2, b3])
}

/// `Σ_k D^{s-ℓ}(∂_1^ℓ P_{≤k-3} f · P_k g)`.
pub fn lemma32_low_high(f: &RealField, g: &RealField, fam: &LpFamily, s: f64, ell: usize) -> Result<RealField> {
    let alpha = MultiIndex::axis(f.grid().dim(), 0, ell as u8);
    let (sf, sg) = (f.to_spectral(), g.to_spectral());
    let mut acc = RealField::zeros(*f.grid());
    for b in fam.band_indices() {
        let low = partial_derivative(&fam.leq_piece_spectral(&sf, b - 3), &alpha)?;
        acc = acc.add(&low.mul(&fam.band_piece_spectral(&sg, b))?)?;
    }
    Ok(riesz_potential(&acc, s - ell as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    Eq11,
    KpvCor1,
    Cor2,
    Thm11,
    Lemma11Commutator,
    Lemma25Diagonal,
    Lemma32Lowhigh,
}

impl EstimateKind {
    pub const ALL: [EstimateKind; 7] = [
        Self::Eq11,
        Self::KpvCor1,
        Self::Cor2,
        Self::Thm11,
        Self::Lemma11Commutator,
        Self::Lemma25Diagonal,
        Self::Lemma32Lowhigh,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Eq11 => "eq11",
            Self::KpvCor1 => "kpv_cor1",
            Self::Cor2 => "cor2",
            Self::Thm11 => "thm11",
            Self::Lemma11Commutator => "lemma11_commutator",
            Self::Lemma25Diagonal => "lemma25_diagonal",
            Self::Lemma32Lowhigh => "lemma32_lowhigh",
        }
    }

    /// Whether the order `ℓ` enters the left-hand side.
    pub fn uses_ell(&self) -> bool {
        matches!(self, Self::Thm11 | Self::Lemma32Lowhigh)
    }
}

impl fmt::Display for EstimateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One estimate instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateSpec {
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    pub p: f64,
    pub p1: f64,
    pub p2: f64,
    #[serde(default = "one")]
    pub ell: usize,
}

fn one() -> usize {
    1
}

const SCALING_TOLERANCE: f64 = 1e-12;

impl EstimateSpec {
    pub fn new(s: f64, (s1, s2): (f64, f64), (p, p1, p2): (f64, f64, f64), ell: usize) -> Self {
        Self {
            s,
            s1,
            s2,
            p,
            p1,
            p2,
            ell,
        }
    }

    pub fn validate(&self, kind: EstimateKind) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidSpec {
                kind: kind.to_string(),
                reason,
            })
        };
        let Self {
            s,
            s1,
            s2,
            p,
            p1,
            p2,
            ell,
        } = *self;
        if !(s >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || !s.is_finite() {
            return fail(format!("need s, s1, s2 >= 0, got ({s}, {s1}, {s2})"));
        }
        if (s1 + s2 - s).abs() > SCALING_TOLERANCE {
            return fail(format!("s1 + s2 = {} != s = {s}", s1 + s2));
        }
        for (name, v) in [("p", p), ("p1", p1), ("p2", p2)] {
            if !(v > 1.0 && v.is_finite()) {
                return fail(format!("{name} = {v} outside (1, inf)"));
            }
        }
        if (1.0 / p - 1.0 / p1 - 1.0 / p2).abs() > SCALING_TOLERANCE {
            return fail(format!("1/p != 1/p1 + 1/p2 for ({p}, {p1}, {p2})"));
        }
        match kind {
            EstimateKind::KpvCor1 if s1 > 1.0 || s2 > 1.0 => fail(format!("needs s1, s2 <= 1, got ({s1}, {s2})")),
            EstimateKind::Cor2 if s < 2.0 => fail(format!("needs s >= 2, got {s}")),
            EstimateKind::Cor2 if s1 > 2.0 || s2 > 2.0 => fail(format!("needs s1, s2 <= 2, got ({s1}, {s2})")),
            EstimateKind::Thm11 if ell == 0 || ell > MultiIndex::MAX_ORDER => {
                fail(format!("ell = {ell} outside 1..={}", MultiIndex::MAX_ORDER))
            }
            EstimateKind::Thm11 if !((ell - 1) as f64 <= s && s <= ell as f64) => {
                fail(format!("needs ell - 1 <= s <= ell, got s = {s}, ell = {ell}"))
            }
            EstimateKind::Lemma32Lowhigh if ell > MultiIndex::MAX_ORDER || ell as f64 > s => {
                fail(format!("needs ell <= min(s, {}), got ell = {ell}", MultiIndex::MAX_ORDER))
            }
            EstimateKind::Lemma32Lowhigh if s1 > ell as f64 => fail(format!("needs s1 <= ell, got s1 = {s1}")),
            _ => Ok(()),
        }
    }
}

/// One measured instance of an estimate.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub kind: EstimateKind,
    pub spec: EstimateSpec,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Set when `rhs = 0` while `lhs` is not negligible.
    pub failure: bool,
    pub family_label: String,
    pub family_params: BTreeMap<String, f64>,
}

/// Left-hand-side field of `kind`; depends only on `s` (and `ℓ` where used).
pub fn estimate_lhs_field(
    kind: EstimateKind,
    f: &RealField,
    g: &RealField,
    fam: &LpFamily,
    spec: &EstimateSpec,
) -> Result<RealField> {
    spec.validate(kind)?;
    f.check_same_grid(g)?;
    let s = spec.s;
    match kind {
        EstimateKind::Eq11 => Ok(riesz_potential(&f.mul(g)?, s)),
        EstimateKind::KpvCor1 => remainder_kpv(f, g, s),
        EstimateKind::Cor2 => remainder_second_order(f, g, s),
        EstimateKind::Thm11 => theorem11_remainder(f, g, fam, spec),
        EstimateKind::Lemma11Commutator => commutator(f, g, s),
        EstimateKind::Lemma25Diagonal => diagonal_paraproduct(s, 0.0, 0.0, f, g, fam),
        EstimateKind::Lemma32Lowhigh => lemma32_low_high(f, g, fam, s, spec.ell),
    }
}

/// Right-hand side. For `eq11` it is the two-term sum with `p3 = p2`, `p4 = p1`.
pub fn estimate_rhs(kind: EstimateKind, f: &RealField, g: &RealField, spec: &EstimateSpec) -> Result<f64> {
    match kind {
        EstimateKind::Eq11 => {
            let a = lp_norm(&riesz_potential(f, spec.s), spec.p1)? * lp_norm(g, spec.p2)?;
            let b = lp_norm(f, spec.p2)? * lp_norm(&riesz_potential(g, spec.s), spec.p1)?;
            Ok(a + b)
        }
        _ => Ok(lp_norm(&riesz_potential(f, spec.s1), spec.p1)? * lp_norm(&riesz_potential(g, spec.s2), spec.p2)?),
    }
}

/// LHS values below this fraction of the RHS-free scale count as zero when
/// the RHS vanishes.
const ZERO_LHS: f64 = 1e-12;

/// Packages `lhs / rhs` with the zero-RHS convention.
pub fn make_report(kind: EstimateKind, spec: EstimateSpec, lhs: f64, rhs: f64) -> EstimateReport {
    let (ratio, failure) = if rhs > 0.0 {
        (lhs / rhs, !(lhs / rhs).is_finite())
    } else if lhs <= ZERO_LHS {
        (0.0, false)
    } else {
        (f64::INFINITY, true)
    };
    EstimateReport {
        kind,
        spec,
        lhs,
        rhs,
        ratio,
        failure,
        family_label: String::new(),
        family_params: BTreeMap::new(),
    }
}

pub fn estimate_report(
    kind: EstimateKind,
    f: &RealField,
    g: &RealField,
    fam: &LpFamily,
    spec: &EstimateSpec,
) -> Result<EstimateReport> {
    let lhs = lp_norm(&estimate_lhs_field(kind, f, g, fam, spec)?, spec.p)?;
    let rhs = estimate_rhs(kind, f, g, spec)?;
    Ok(make_report(kind, *spec, lhs, rhs))
}

//! Bilinear symbols built on `a_s(ξ, η, θ) = |η + θξ|^s`.
//!
//! Derivatives of `|t|^s` are evaluated in closed form through a small term
//! algebra: every derivative is a sum of `c · t^μ · (|t|²)^e`, and
//! `∂_i (t^μ (|t|²)^e) = μ_i t^{μ-e_i} (|t|²)^e + 2e t^{μ+e_i} (|t|²)^{e-1}`.
//! θ-derivatives have a second, independent evaluation through Faà di Bruno
//! applied to `φ(θ) = |η + θξ|²`, which is quadratic in θ.

use std::sync::Arc;

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{dot, factorial, norm, GridSpec, MultiIndex};
use crate::lp::LpFamily;
use crate::spectral::riesz_symbol;

/// A symbol value together with a flag for evaluation at a genuine
/// singularity (where the fixed convention value 0 was returned).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub singular: bool,
}

impl Evaluation {
    fn regular(value: f64) -> Self {
        Self {
            value,
            singular: false,
        }
    }

    const SINGULAR: Self = Self {
        value: 0.0,
        singular: true,
    };
}

/// `|t|^s` is a polynomial exactly when `s` is a non-negative even integer.
pub fn is_polynomial_power(s: f64) -> bool {
    s >= 0.0 && (s / 2.0).fract() == 0.0
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    c: f64,
    mu: [u8; 2],
    e: f64,
}

/// Closed form of `∂^α |t|^s`.
#[derive(Debug, Clone)]
pub struct RadialDerivative {
    s: f64,
    order: usize,
    terms: Vec<Term>,
}

impl RadialDerivative {
    pub fn new(s: f64, alpha: &MultiIndex) -> Self {
        let mut terms = vec![Term {
            c: 1.0,
            mu: [0, 0],
            e: s / 2.0,
        }];
        for axis in 0..alpha.dim() {
            for _ in 0..alpha.get(axis) {
                let mut next: Vec<Term> = Vec::with_capacity(2 * terms.len());
                let mut push = |t: Term| {
                    if t.c == 0.0 {
                        return;
                    }
                    match next.iter_mut().find(|o| o.mu == t.mu && o.e == t.e) {
                        Some(o) => o.c += t.c,
                        None => next.push(t),
                    }
                };
                for t in &terms {
                    if t.mu[axis] > 0 {
                        let mut mu = t.mu;
                        mu[axis] -= 1;
                        push(Term {
                            c: t.c * t.mu[axis] as f64,
                            mu,
                            e: t.e,
                        });
                    }
                    let mut mu = t.mu;
                    mu[axis] += 1;
                    push(Term {
                        c: t.c * 2.0 * t.e,
                        mu,
                        e: t.e - 1.0,
                    });
                }
                next.retain(|t| t.c != 0.0);
                terms = next;
            }
        }
        Self {
            s,
            order: alpha.order(),
            terms,
        }
    }

    pub fn eval(&self, t: &[f64; 2]) -> Evaluation {
        let r2 = t[0] * t[0] + t[1] * t[1];
        if r2 > 0.0 {
            let value = self
                .terms
                .iter()
                .map(|term| {
                    term.c
                        * t[0].powi(term.mu[0] as i32)
                        * t[1].powi(term.mu[1] as i32)
                        * r2.powf(term.e)
                })
                .sum();
            return Evaluation::regular(value);
        }
        if is_polynomial_power(self.s) {
            let constant = self
                .terms
                .iter()
                .filter(|t| t.mu == [0, 0] && t.e == 0.0)
                .map(|t| t.c)
                .sum();
            Evaluation::regular(constant)
        } else if self.s - self.order as f64 > 0.0 {
            Evaluation::regular(0.0)
        } else {
            Evaluation::SINGULAR
        }
    }
}

/// `η + θξ`, with components that cancel to rounding level snapped to zero so
/// that lattice points on the singular set are recognized as such.
pub(crate) fn shifted(xi: &[f64; 2], eta: &[f64; 2], theta: f64) -> [f64; 2] {
    let axis = |i: usize| {
        let v = eta[i] + theta * xi[i];
        if v.abs() <= 4.0 * f64::EPSILON * (eta[i].abs() + (theta * xi[i]).abs()) {
            0.0
        } else {
            v
        }
    };
    [axis(0), axis(1)]
}

/// Falling factorial `q (q-1) ... (q-k+1)`.
fn falling(q: f64, k: usize) -> f64 {
    (0..k).map(|i| q - i as f64).product()
}

/// `∂_θ^m |η + θξ|^s` by Faà di Bruno on `φ(θ) = |η + θξ|²`:
/// `Σ_k (q)_k φ^{q-k} m!/((2k-m)!(m-k)!) φ'^{2k-m} (φ''/2)^{m-k}` with
/// `q = s/2`, `φ' = 2(η+θξ)·ξ`, `φ''/2 = |ξ|²`.
pub fn theta_derivative(s: f64, m: usize, xi: &[f64; 2], eta: &[f64; 2], theta: f64) -> Evaluation {
    let t = shifted(xi, eta, theta);
    let phi = dot(&t, &t);
    let d1 = 2.0 * dot(&t, xi);
    let d2 = dot(xi, xi);
    let q = s / 2.0;
    let polynomial = is_polynomial_power(s);
    if phi == 0.0 && !polynomial {
        return if s - m as f64 > 0.0 {
            Evaluation::regular(0.0)
        } else {
            Evaluation::SINGULAR
        };
    }
    let mut value = 0.0;
    for k in m.div_ceil(2)..=m {
        let ff = falling(q, k);
        if ff == 0.0 {
            continue;
        }
        let power = if polynomial {
            phi.powi((q - k as f64) as i32)
        } else {
            phi.powf(q - k as f64)
        };
        let comb = factorial(m) / (factorial(2 * k - m) * factorial(m - k));
        value += ff * power * comb * d1.powi((2 * k - m) as i32) * d2.powi((m - k) as i32);
    }
    Evaluation::regular(value)
}

/// Coefficient of `ξ^α ∂^α_η a_s` in the expansion of `∂_θ^m a_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientConvention {
    /// `m!/α!`, the multinomial chain rule.
    #[default]
    Multinomial,
    /// `α!`, a tempting misreading of the expansion. Kept as a negative control.
    Factorial,
}

impl CoefficientConvention {
    pub fn coefficient(&self, alpha: &MultiIndex) -> f64 {
        match self {
            Self::Multinomial => alpha.multinomial(),
            Self::Factorial => alpha.factorial(),
        }
    }
}

/// `(1/m!) ∂_θ^m a_s` through the expansion `Σ_{|α|=m} coef(α) ξ^α ∂^α|·|^s`.
pub fn theta_derivative_expanded(
    s: f64,
    m: usize,
    xi: &[f64; 2],
    eta: &[f64; 2],
    theta: f64,
    dim: usize,
    convention: CoefficientConvention,
) -> Evaluation {
    let t = shifted(xi, eta, theta);
    let mut out = Evaluation::regular(0.0);
    for alpha in MultiIndex::all_of_order(dim, m) {
        let d = RadialDerivative::new(s, &alpha).eval(&t);
        out.singular |= d.singular;
        out.value += convention.coefficient(&alpha) * alpha.monomial(xi) * d.value;
    }
    out.value /= factorial(m);
    out
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn unit_gauss_legendre(order: usize) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(order)
        .map_err(|_| invalid("quad_order", format!("need at least 2 nodes, got {order}")))?;
    Ok(rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect())
}

/// Tabulated symbol values on the frequency pairs of one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomTable {
    pub grid: GridSpec,
    /// `values[iξ * N^dim + iη]`, both indices flat FFT order.
    pub values: Vec<f64>,
}

impl CustomTable {
    fn flat_index(&self, v: &[f64; 2]) -> usize {
        let g = &self.grid;
        let k = |x: f64| g.index_of((x * g.period() / (2.0 * std::f64::consts::PI)).round() as i64);
        match g.dim() {
            1 => k(v[0]),
            _ => k(v[0]) * g.n() + k(v[1]),
        }
    }
}

/// The closed family of bilinear symbols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolKind {
    Constant {
        c: f64,
    },
    /// `|ξ + η|^s`.
    SumRiesz {
        s: f64,
    },
    /// `|η + θξ|^s`.
    ShiftedRiesz {
        s: f64,
        theta: f64,
    },
    /// `(1/m!) ∂_θ^m a_s(ξ, η, θ)`.
    ThetaDeriv {
        s: f64,
        theta: f64,
        m: usize,
    },
    /// [`ThetaDeriv`](Self::ThetaDeriv) through the η-derivative expansion
    /// with a selectable coefficient convention.
    ThetaDerivExpanded {
        s: f64,
        theta: f64,
        m: usize,
        convention: CoefficientConvention,
    },
    /// `(α!/|α|!) ∂_η^α a_s(ξ, η, θ)`.
    EtaDeriv {
        s: f64,
        theta: f64,
        alpha: MultiIndex,
    },
    /// Order-`ℓ = |α|` Taylor remainder kernel
    /// `(ℓ!/α!) (1/(ℓ-1)!) ∫₀¹ (1-θ)^{ℓ-1} (∂^α|·|^s)(η+θξ) dθ · |η|^{ℓ-s}`.
    RemainderTaylor {
        s: f64,
        alpha: MultiIndex,
        quad_order: usize,
    },
    /// [`RemainderTaylor`](Self::RemainderTaylor) restricted to `|α| = 1`.
    RemainderFirstOrder {
        s: f64,
        alpha: MultiIndex,
        quad_order: usize,
    },
    /// [`RemainderTaylor`](Self::RemainderTaylor) restricted to `|α| = 2`.
    RemainderSecondOrder {
        s: f64,
        alpha: MultiIndex,
        quad_order: usize,
    },
    /// `|ξ+η|^s - |η|^s - |ξ|^s`.
    KpvRemainder {
        s: f64,
    },
    /// `|ξ+η|^s - |η|^s - |ξ|^s - s |ξ+η|^{s-2} ξ·η`.
    SecondOrderRemainder {
        s: f64,
    },
    Custom {
        table: CustomTable,
    },
}

/// Frequency localization wrapped around a symbol.
#[derive(Debug, Clone, Default)]
pub enum Localization {
    #[default]
    None,
    /// `Σ_k Ψ̂_{k-3}(ξ) Φ̂_k(η)`.
    LowHigh(Arc<LpFamily>),
    /// `Σ_j Φ̂_j(ξ) Σ_{|k-j|≤2} Φ̂_k(η)`.
    Diagonal(Arc<LpFamily>),
}

impl Localization {
    pub fn family(&self) -> Option<&LpFamily> {
        match self {
            Self::None => None,
            Self::LowHigh(f) | Self::Diagonal(f) => Some(f),
        }
    }

    /// Weight at arbitrary frequencies, by formula.
    pub fn weight(&self, xi: &[f64; 2], eta: &[f64; 2]) -> f64 {
        match self {
            Self::None => 1.0,
            Self::LowHigh(fam) => fam
                .band_indices()
                .map(|b| fam.leq_at(b - 3, xi) * fam.band_at(b, eta))
                .sum(),
            Self::Diagonal(fam) => fam
                .band_indices()
                .map(|j| {
                    let near: f64 = (j - 2..=j + 2).map(|k| fam.band_at(k, eta)).sum();
                    fam.band_at(j, xi) * near
                })
                .sum(),
        }
    }

    /// Weight at flat grid indices of the family's grid, from its tables.
    pub(crate) fn weight_at(&self, i_xi: usize, i_eta: usize) -> f64 {
        match self {
            Self::None => 1.0,
            Self::LowHigh(fam) => fam
                .band_indices()
                .map(|b| fam.leq_value(b - 3, i_xi) * fam.band_value(b, i_eta))
                .sum(),
            Self::Diagonal(fam) => fam
                .band_indices()
                .map(|j| {
                    let near: f64 = (j - 2..=j + 2).map(|k| fam.band_value(k, i_eta)).sum();
                    fam.band_value(j, i_xi) * near
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SymbolSpec {
    pub kind: SymbolKind,
    pub localization: Localization,
}

impl SymbolSpec {
    pub fn new(kind: SymbolKind) -> Self {
        Self {
            kind,
            localization: Localization::None,
        }
    }

    pub fn low_high(kind: SymbolKind, fam: Arc<LpFamily>) -> Self {
        Self {
            kind,
            localization: Localization::LowHigh(fam),
        }
    }

    pub fn diagonal(kind: SymbolKind, fam: Arc<LpFamily>) -> Self {
        Self {
            kind,
            localization: Localization::Diagonal(fam),
        }
    }

    pub fn compile(&self) -> Result<CompiledSymbol> {
        let check_theta = |theta: f64| {
            if (0.0..=1.0).contains(&theta) {
                Ok(())
            } else {
                Err(invalid("theta", format!("need 0 <= theta <= 1, got {theta}")))
            }
        };
        let check_s = |s: f64| {
            if s.is_finite() {
                Ok(())
            } else {
                Err(invalid("s", format!("must be finite, got {s}")))
            }
        };
        let mut radial = None;
        let mut nodes = Vec::new();
        match &self.kind {
            SymbolKind::Constant { .. } => {}
            SymbolKind::SumRiesz { s } | SymbolKind::KpvRemainder { s } => check_s(*s)?,
            SymbolKind::SecondOrderRemainder { s } => {
                check_s(*s)?;
                if *s < 2.0 {
                    return Err(invalid("s", format!("second-order remainder needs s >= 2, got {s}")));
                }
            }
            SymbolKind::ShiftedRiesz { s, theta } => {
                check_s(*s)?;
                check_theta(*theta)?;
            }
            SymbolKind::ThetaDeriv { s, theta, m } | SymbolKind::ThetaDerivExpanded { s, theta, m, .. } => {
                check_s(*s)?;
                check_theta(*theta)?;
                if *m > MultiIndex::MAX_ORDER {
                    return Err(invalid("m", format!("order {m} exceeds {}", MultiIndex::MAX_ORDER)));
                }
            }
            SymbolKind::EtaDeriv { s, theta, alpha } => {
                check_s(*s)?;
                check_theta(*theta)?;
                radial = Some(RadialDerivative::new(*s, alpha));
            }
            SymbolKind::RemainderTaylor { s, alpha, quad_order }
            | SymbolKind::RemainderFirstOrder { s, alpha, quad_order }
            | SymbolKind::RemainderSecondOrder { s, alpha, quad_order } => {
                check_s(*s)?;
                let required = match &self.kind {
                    SymbolKind::RemainderFirstOrder { .. } => Some(1),
                    SymbolKind::RemainderSecondOrder { .. } => Some(2),
                    _ => None,
                };
                let ell = alpha.order();
                if ell == 0 || required.is_some_and(|r| r != ell) {
                    return Err(invalid(
                        "alpha",
                        format!("order {ell} not allowed for {:?}", self.kind),
                    ));
                }
                radial = Some(RadialDerivative::new(*s, alpha));
                nodes = unit_gauss_legendre(*quad_order)?;
            }
            SymbolKind::Custom { table } => {
                let len = table.grid.len();
                if table.values.len() != len * len {
                    return Err(invalid(
                        "table",
                        format!("expected {} values, got {}", len * len, table.values.len()),
                    ));
                }
            }
        }
        if let Some(fam) = self.localization.family() {
            if let SymbolKind::Custom { table } = &self.kind {
                if table.grid != *fam.grid() {
                    return Err(Error::GridMismatch);
                }
            }
        }
        Ok(CompiledSymbol {
            kind: self.kind.clone(),
            localization: self.localization.clone(),
            radial,
            nodes,
        })
    }
}

/// A symbol with its closed forms and quadrature rule prepared.
#[derive(Debug, Clone)]
pub struct CompiledSymbol {
    kind: SymbolKind,
    localization: Localization,
    radial: Option<RadialDerivative>,
    nodes: Vec<(f64, f64)>,
}

impl CompiledSymbol {
    pub fn kind(&self) -> &SymbolKind {
        &self.kind
    }

    pub fn localization(&self) -> &Localization {
        &self.localization
    }

    /// Symbol value including its localization weight.
    pub fn eval(&self, xi: &[f64; 2], eta: &[f64; 2]) -> Evaluation {
        let w = self.localization.weight(xi, eta);
        if w == 0.0 {
            return Evaluation::regular(0.0);
        }
        let mut e = self.eval_bare(xi, eta);
        e.value *= w;
        e
    }

    /// Symbol value without localization.
    pub fn eval_bare(&self, xi: &[f64; 2], eta: &[f64; 2]) -> Evaluation {
        let sum = [xi[0] + eta[0], xi[1] + eta[1]];
        match &self.kind {
            SymbolKind::Constant { c } => Evaluation::regular(*c),
            SymbolKind::SumRiesz { s } => riesz_eval(&sum, *s),
            SymbolKind::ShiftedRiesz { s, theta } => {
                let t = shifted(xi, eta, *theta);
                riesz_eval(&t, *s)
            }
            SymbolKind::ThetaDeriv { s, theta, m } => {
                let mut e = theta_derivative(*s, *m, xi, eta, *theta);
                e.value /= factorial(*m);
                e
            }
            SymbolKind::ThetaDerivExpanded {
                s,
                theta,
                m,
                convention,
            } => {
                // a 1D pair embeds as (x, 0); only α = (m, 0) then survives
                theta_derivative_expanded(*s, *m, xi, eta, *theta, 2, *convention)
            }
            SymbolKind::EtaDeriv { theta, alpha, .. } => {
                let t = shifted(xi, eta, *theta);
                let mut e = self.radial.as_ref().expect("compiled").eval(&t);
                e.value /= alpha.multinomial();
                e
            }
            SymbolKind::RemainderTaylor { s, alpha, .. }
            | SymbolKind::RemainderFirstOrder { s, alpha, .. }
            | SymbolKind::RemainderSecondOrder { s, alpha, .. } => self.remainder(*s, alpha, xi, eta),
            SymbolKind::KpvRemainder { s } => {
                let parts = [riesz_eval(&sum, *s), riesz_eval(eta, *s), riesz_eval(xi, *s)];
                Evaluation {
                    value: parts[0].value - parts[1].value - parts[2].value,
                    singular: parts.iter().any(|p| p.singular),
                }
            }
            SymbolKind::SecondOrderRemainder { s } => {
                let parts = [
                    riesz_eval(&sum, *s),
                    riesz_eval(eta, *s),
                    riesz_eval(xi, *s),
                    riesz_eval(&sum, *s - 2.0),
                ];
                Evaluation {
                    value: parts[0].value - parts[1].value - parts[2].value - s * parts[3].value * dot(xi, eta),
                    singular: parts.iter().any(|p| p.singular),
                }
            }
            SymbolKind::Custom { table } => {
                let len = table.grid.len();
                Evaluation::regular(table.values[table.flat_index(xi) * len + table.flat_index(eta)])
            }
        }
    }

    fn remainder(&self, s: f64, alpha: &MultiIndex, xi: &[f64; 2], eta: &[f64; 2]) -> Evaluation {
        let ell = alpha.order();
        let r = norm(eta);
        if r == 0.0 {
            return Evaluation::SINGULAR;
        }
        let radial = self.radial.as_ref().expect("compiled");
        let mut singular = false;
        let integral: f64 = self
            .nodes
            .iter()
            .map(|&(theta, w)| {
                let t = shifted(xi, eta, theta);
                let d = radial.eval(&t);
                singular |= d.singular;
                w * (1.0 - theta).powi(ell as i32 - 1) * d.value
            })
            .sum();
        let coef = alpha.multinomial() / factorial(ell - 1);
        Evaluation {
            value: coef * integral * r.powf(ell as f64 - s),
            singular,
        }
    }
}

/// `|v|^s` with the homogeneous convention; `v = 0` with `s < 0` is flagged.
fn riesz_eval(v: &[f64; 2], s: f64) -> Evaluation {
    if s < 0.0 && norm(v) == 0.0 {
        Evaluation::SINGULAR
    } else {
        Evaluation::regular(riesz_symbol(v, s))
    }
}

/// Evaluates a symbol at one frequency pair.
pub fn eval_symbol(sym: &SymbolSpec, xi: &[f64; 2], eta: &[f64; 2]) -> Result<Evaluation> {
    Ok(sym.compile()?.eval(xi, eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u8]) -> MultiIndex {
        MultiIndex::new(e).unwrap()
    }

    /// Deterministic pairs inside the cone `0 < |ξ| ≤ |η|/2`.
    fn cone_pairs(dim: usize, count: usize) -> Vec<([f64; 2], [f64; 2])> {
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut u = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..count)
            .map(|_| {
                let r = 0.5 + 20.0 * u();
                let a = 2.0 * std::f64::consts::PI * u();
                let rho = r * (0.05 + 0.45 * u());
                let b = 2.0 * std::f64::consts::PI * u();
                if dim == 1 {
                    let sign = |x: f64| if x < 0.5 { -1.0 } else { 1.0 };
                    ([rho * sign(u()), 0.0], [r * sign(u()), 0.0])
                } else {
                    ([rho * b.cos(), rho * b.sin()], [r * a.cos(), r * a.sin()])
                }
            })
            .collect()
    }

    #[test]
    fn radial_derivatives_match_closed_forms_1d() {
        let s = 1.7;
        for &t in &[-2.3f64, 0.4, 5.0] {
            let a = t.abs();
            let sg = t.signum();
            let expected = [
                a.powf(s),
                s * sg * a.powf(s - 1.0),
                s * (s - 1.0) * a.powf(s - 2.0),
                s * (s - 1.0) * (s - 2.0) * sg * a.powf(s - 3.0),
            ];
            for (m, e) in expected.iter().enumerate() {
                let v = RadialDerivative::new(s, &mi(&[m as u8])).eval(&[t, 0.0]).value;
                assert!((v - e).abs() <= 1e-13 * e.abs().max(1.0), "m={m}: {v} vs {e}");
            }
        }
    }

    #[test]
    fn radial_derivative_origin_conventions() {
        // polynomial: ∂²|t|² = 2, ∂³|t|² = 0
        assert_eq!(RadialDerivative::new(2.0, &mi(&[2])).eval(&[0.0, 0.0]).value, 2.0);
        assert_eq!(RadialDerivative::new(2.0, &mi(&[1, 1])).eval(&[0.0, 0.0]).value, 0.0);
        assert_eq!(RadialDerivative::new(4.0, &mi(&[2, 2])).eval(&[0.0, 0.0]).value, 8.0);
        // s - |α| > 0: continuous limit 0
        let e = RadialDerivative::new(2.5, &mi(&[2])).eval(&[0.0, 0.0]);
        assert_eq!(e, Evaluation::regular(0.0));
        // s - |α| ≤ 0 with non-even s: flagged
        assert!(RadialDerivative::new(1.0, &mi(&[1])).eval(&[0.0, 0.0]).singular);
    }

    #[test]
    fn radial_derivatives_match_finite_differences_2d() {
        let s = 1.3;
        let f = |t: [f64; 2]| norm(&t).powf(s);
        let t = [0.8, -1.1];
        let h = 1e-4;
        // ∂_1∂_2 by central differences
        let fd = (f([t[0] + h, t[1] + h]) - f([t[0] + h, t[1] - h]) - f([t[0] - h, t[1] + h])
            + f([t[0] - h, t[1] - h]))
            / (4.0 * h * h);
        let exact = RadialDerivative::new(s, &mi(&[1, 1])).eval(&t).value;
        assert!((fd - exact).abs() < 1e-6, "{fd} vs {exact}");
        // third order through nested differences of the exact second derivative
        let d2 = RadialDerivative::new(s, &mi(&[2, 0]));
        let fd3 = (d2.eval(&[t[0], t[1] + h]).value - d2.eval(&[t[0], t[1] - h]).value) / (2.0 * h);
        let exact3 = RadialDerivative::new(s, &mi(&[2, 1])).eval(&t).value;
        assert!((fd3 - exact3).abs() < 1e-6);
    }

    #[test]
    fn theta_routes_agree() {
        for dim in [1, 2] {
            for &s in &[0.5, 1.5, 2.0, 3.0] {
                for (xi, eta) in cone_pairs(dim, 40) {
                    for m in 0..=4 {
                        for &theta in &[0.0, 0.3, 1.0] {
                            let a = theta_derivative(s, m, &xi, &eta, theta).value / factorial(m);
                            let b = theta_derivative_expanded(s, m, &xi, &eta, theta, dim, CoefficientConvention::Multinomial)
                                .value;
                            assert!((a - b).abs() <= 1e-11 * a.abs().max(1.0), "dim {dim} s {s} m {m}: {a} vs {b}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn inexact_cancellation_is_still_singular() {
        // 0.3 · 10 rounds above 3, so η + θξ is 4e-16 rather than 0
        let (xi, eta) = ([10.0, 0.0], [-3.0, 0.0]);
        assert!(theta_derivative(0.5, 2, &xi, &eta, 0.3).singular);
        assert_eq!(theta_derivative(2.5, 2, &xi, &eta, 0.3).value, 0.0);
        assert!(theta_derivative_expanded(0.5, 2, &xi, &eta, 0.3, 1, CoefficientConvention::Multinomial).singular);
    }

    #[test]
    fn factorial_coefficient_differs_at_second_order() {
        let (xi, eta) = ([0.7, 0.0], [3.0, 0.0]);
        let good = theta_derivative_expanded(1.5, 2, &xi, &eta, 0.0, 1, CoefficientConvention::Multinomial);
        let bad = theta_derivative_expanded(1.5, 2, &xi, &eta, 0.0, 1, CoefficientConvention::Factorial);
        assert!((bad.value - 2.0 * good.value).abs() < 1e-14);
        let good1 = theta_derivative_expanded(1.5, 1, &xi, &eta, 0.0, 1, CoefficientConvention::Multinomial);
        let bad1 = theta_derivative_expanded(1.5, 1, &xi, &eta, 0.0, 1, CoefficientConvention::Factorial);
        assert_eq!(good1, bad1);
    }

    #[test]
    fn theta_derivative_matches_finite_difference() {
        let h = 1e-5;
        for (xi, eta) in cone_pairs(1, 100) {
            let s = 1.5;
            let a = |th: f64| norm(&[eta[0] + th * xi[0], 0.0]).powf(s);
            let theta = 0.5;
            let fd1 = (a(theta + h) - a(theta - h)) / (2.0 * h);
            let h2 = 1e-3;
            let fd2 = (a(theta + h2) - 2.0 * a(theta) + a(theta - h2)) / (h2 * h2);
            let d1 = theta_derivative(s, 1, &xi, &eta, theta).value;
            let d2 = theta_derivative(s, 2, &xi, &eta, theta).value;
            assert!((fd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0));
            assert!((fd2 - d2).abs() <= 1e-5 * d2.abs().max(a(theta)));
        }
    }

    #[test]
    fn named_evaluations() {
        let (xi, eta) = ([1.5, 0.0], [-4.0, 0.0]);
        let s = 1.3;
        let eval = |k: SymbolKind| eval_symbol(&SymbolSpec::new(k), &xi, &eta).unwrap().value;
        assert_eq!(eval(SymbolKind::ShiftedRiesz { s, theta: 1.0 }), eval(SymbolKind::SumRiesz { s }));
        let first = eval(SymbolKind::ThetaDeriv { s, theta: 0.0, m: 1 });
        let expected = s * xi[0] * eta[0].signum() * eta[0].abs().powf(s - 1.0);
        assert!((first - expected).abs() < 1e-13);
        let eta_d = eval(SymbolKind::EtaDeriv {
            s,
            theta: 0.0,
            alpha: mi(&[1]),
        });
        assert!((eta_d - s * eta[0].signum() * eta[0].abs().powf(s - 1.0)).abs() < 1e-13);
        assert_eq!(eval(SymbolKind::Constant { c: 2.5 }), 2.5);
    }

    #[test]
    fn first_order_remainder_integrates_theta_derivative() {
        // Σ_{|α|=1} ξ^α t^α |η|^{s-1} = |ξ+η|^s - |η|^s
        for dim in [1, 2] {
            for (xi, eta) in cone_pairs(dim, 30) {
                let s = 0.8;
                let mut total = 0.0;
                for alpha in MultiIndex::all_of_order(dim, 1) {
                    let sym = SymbolSpec::new(SymbolKind::RemainderFirstOrder {
                        s,
                        alpha,
                        quad_order: 32,
                    });
                    total += alpha.monomial(&xi) * eval_symbol(&sym, &xi, &eta).unwrap().value;
                }
                total *= norm(&eta).powf(s - 1.0);
                let exact = norm(&[xi[0] + eta[0], xi[1] + eta[1]]).powf(s) - norm(&eta).powf(s);
                assert!((total - exact).abs() <= 1e-12 * norm(&eta).powf(s));
            }
        }
    }

    #[test]
    fn compile_rejects_bad_parameters() {
        let bad = [
            SymbolKind::ShiftedRiesz { s: 1.0, theta: 1.5 },
            SymbolKind::ThetaDeriv { s: 1.0, theta: 0.0, m: 5 },
            SymbolKind::RemainderFirstOrder {
                s: 1.0,
                alpha: mi(&[2]),
                quad_order: 8,
            },
            SymbolKind::RemainderTaylor {
                s: 1.0,
                alpha: mi(&[1]),
                quad_order: 1,
            },
            SymbolKind::SecondOrderRemainder { s: 1.0 },
        ];
        for k in bad {
            assert!(SymbolSpec::new(k).compile().is_err());
        }
    }

    #[test]
    fn singular_points_are_flagged() {
        let sym = SymbolSpec::new(SymbolKind::ThetaDeriv { s: 0.5, theta: 0.0, m: 1 });
        let e = eval_symbol(&sym, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!(e.singular && e.value == 0.0);
        let sym = SymbolSpec::new(SymbolKind::ThetaDeriv { s: 2.0, theta: 0.5, m: 2 });
        let e = eval_symbol(&sym, &[2.0, 0.0], &[-1.0, 0.0]).unwrap();
        assert_eq!(e, Evaluation::regular(4.0));
    }

    #[test]
    fn serde_round_trip() {
        let k = SymbolKind::RemainderTaylor {
            s: 1.5,
            alpha: mi(&[1, 1]),
            quad_order: 32,
        };
        let text = serde_json::to_string(&k).unwrap();
        assert_eq!(text, r#"{"kind":"remainder_taylor","s":1.5,"alpha":[1,1],"quad_order":32}"#);
        assert_eq!(serde_json::from_str::<SymbolKind>(&text).unwrap(), k);
    }
}

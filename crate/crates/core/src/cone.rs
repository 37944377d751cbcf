//! Sampled bounds for `a_s(ξ, η, θ) = |η + θξ|^s` on the cone `0 < |ξ| ≤ |η|/2`.
//!
//! `∂_ξ^α ∂_η^β a_s = θ^{|α|} (∂^{α+β} |·|^s)(η + θξ)`, so every mixed
//! derivative reduces to one radial derivative evaluated in closed form.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::grid::{norm, MultiIndex};
use crate::symbol::RadialDerivative;

/// Deterministic frequency pairs inside the cone, grouped by dyadic `|η|` scale.
#[derive(Debug, Clone)]
pub struct ConeSample {
    dim: usize,
    /// `(scale index, ξ, η)`.
    pairs: Vec<(usize, [f64; 2], [f64; 2])>,
    thetas: Vec<f64>,
    scales: usize,
}

impl ConeSample {
    /// 40 dyadic scales `|η| = 2^i, i = -20..19`, 16 ratios `|ξ|/|η| = i/32`,
    /// `θ ∈ {0, 1/16, ..., 1}`. Directions: `ξ = ±` in 1D; three `η` angles
    /// times eight relative `ξ` angles in 2D.
    pub fn standard(dim: usize) -> Result<Self> {
        let exponents: Vec<i32> = (-20..20).collect();
        let ratios: Vec<f64> = (1..=16).map(|i| i as f64 / 32.0).collect();
        let thetas: Vec<f64> = (0..=16).map(|j| j as f64 / 16.0).collect();
        Self::new(dim, &exponents, &ratios, &thetas)
    }

    pub fn new(dim: usize, exponents: &[i32], ratios: &[f64], thetas: &[f64]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid("dim", format!("{dim} not in {{1, 2}}")));
        }
        if let Some(r) = ratios.iter().find(|&&r| !(r > 0.0 && r <= 0.5)) {
            return Err(invalid("ratio", format!("{r} outside (0, 1/2]")));
        }
        if let Some(t) = thetas.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
            return Err(invalid("theta", format!("{t} outside [0, 1]")));
        }
        let directions: Vec<([f64; 2], [f64; 2])> = if dim == 1 {
            vec![([1.0, 0.0], [1.0, 0.0]), ([-1.0, 0.0], [1.0, 0.0])]
        } else {
            let mut d = Vec::new();
            for &a in &[0.0, 0.2, 1.1] {
                let eta = [f64::cos(a), f64::sin(a)];
                for k in 0..8 {
                    let b = a + k as f64 * std::f64::consts::FRAC_PI_4;
                    d.push(([b.cos(), b.sin()], eta));
                }
            }
            d
        };
        let mut pairs = Vec::new();
        for (si, &e) in exponents.iter().enumerate() {
            let scale = 2f64.powi(e);
            for &r in ratios {
                for (dx, de) in &directions {
                    let eta = [scale * de[0], scale * de[1]];
                    let xi = [scale * r * dx[0], scale * r * dx[1]];
                    pairs.push((si, xi, eta));
                }
            }
        }
        Ok(Self {
            dim,
            pairs,
            thetas: thetas.to_vec(),
            scales: exponents.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[f64; 2], &[f64; 2])> {
        self.pairs.iter().map(|(_, x, e)| (x, e))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConeBound {
    pub s: f64,
    pub alpha: MultiIndex,
    pub beta: MultiIndex,
    #[serde(rename = "Q")]
    pub q: f64,
    pub per_scale: Vec<f64>,
    pub spread: f64,
    pub pass: bool,
}

/// Every `(α, β)` of dimension `dim` with `|α| + |β| ≤ max_order`.
pub fn all_orders(dim: usize, max_order: usize) -> Vec<(MultiIndex, MultiIndex)> {
    let mut out = Vec::new();
    for total in 0..=max_order {
        for a in 0..=total {
            for alpha in MultiIndex::all_of_order(dim, a) {
                for beta in MultiIndex::all_of_order(dim, total - a) {
                    out.push((alpha, beta));
                }
            }
        }
    }
    out
}

/// `(max - min) / max` over scales; 0 for an identically vanishing row.
fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

/// `Q(α, β) = max |∂_ξ^α ∂_η^β a_s| · |η|^{|α|+|β|-s}` over the sample, per
/// scale and overall.
pub fn symbol_cone_bounds(
    s: f64,
    orders: &[(MultiIndex, MultiIndex)],
    sample: &ConeSample,
    spread_tolerance: f64,
) -> Result<Vec<ConeBound>> {
    for (a, b) in orders {
        if a.dim() != sample.dim || b.dim() != sample.dim {
            return Err(invalid("multi_index", "dimension differs from the sample"));
        }
        if a.order() + b.order() > MultiIndex::MAX_ORDER {
            return Err(invalid(
                "order",
                format!("|α|+|β| = {} exceeds {}", a.order() + b.order(), MultiIndex::MAX_ORDER),
            ));
        }
    }
    // one table of |∂^γ|·|^s| per distinct γ = α + β
    let mut tables: BTreeMap<MultiIndex, Vec<f64>> = BTreeMap::new();
    for (a, b) in orders {
        let gamma = a.add(b)?;
        tables.entry(gamma).or_insert_with(|| {
            let d = RadialDerivative::new(s, &gamma);
            sample
                .pairs
                .iter()
                .flat_map(|(_, xi, eta)| {
                    sample.thetas.iter().map(|&th| {
                        let t = [eta[0] + th * xi[0], eta[1] + th * xi[1]];
                        d.eval(&t).value.abs()
                    })
                })
                .collect()
        });
    }
    let nt = sample.thetas.len();
    Ok(orders
        .iter()
        .map(|(alpha, beta)| {
            let gamma = alpha.add(beta).expect("validated");
            let table = &tables[&gamma];
            let weight = (alpha.order() + beta.order()) as f64 - s;
            let mut per_scale = vec![0.0f64; sample.scales];
            for (pi, (si, _, eta)) in sample.pairs.iter().enumerate() {
                let norm_eta = norm(eta).powf(weight);
                for (ti, &th) in sample.thetas.iter().enumerate() {
                    let v = th.powi(alpha.order() as i32) * table[pi * nt + ti] * norm_eta;
                    per_scale[*si] = per_scale[*si].max(v);
                }
            }
            let q = per_scale.iter().cloned().fold(0.0, f64::max);
            let spread = spread(&per_scale);
            ConeBound {
                s,
                alpha: *alpha,
                beta: *beta,
                q,
                pass: q.is_finite() && spread <= spread_tolerance,
                per_scale,
                spread,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    pub pass: bool,
    pub spread_tolerance: f64,
    pub entries: Vec<ConeBound>,
}

/// Scans every `(α, β)` with `|α| + |β| ≤ max_order` for each `s`.
pub fn lemma12_scan(dim: usize, s_list: &[f64], max_order: usize, spread_tolerance: f64) -> Result<ScanReport> {
    if max_order > MultiIndex::MAX_ORDER {
        return Err(invalid(
            "max_order",
            format!("{max_order} exceeds {}", MultiIndex::MAX_ORDER),
        ));
    }
    let sample = ConeSample::standard(dim)?;
    let orders = all_orders(dim, max_order);
    let mut entries = Vec::new();
    for &s in s_list {
        entries.extend(symbol_cone_bounds(s, &orders, &sample, spread_tolerance)?);
    }
    Ok(ScanReport {
        pass: entries.iter().all(|e| e.pass),
        spread_tolerance,
        entries,
    })
}

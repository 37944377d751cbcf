//! Parameter sweeps over test families, hard identity checks, ratio-stability
//! checks, and the verdict that aggregates them.
//!
//! A plan's spec grid is a superset: each kind only receives the points that
//! satisfy its own parameter constraints, so every executed point is valid.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{apply_direct, apply_low_high, decompose, remainder_symbol_apply};
use crate::cone::{lemma12_scan, symbol_cone_bounds, ConeSample};
use crate::dump::write_field;
use crate::empirical::{maximal_bound_check, square_function_check, vector_maximal_check, EmpiricalReport};
use crate::error::{Error, Result};
use crate::family::{generate, FamilyKind, FamilySpec, Generated};
use crate::field::RealField;
use crate::grid::{GridSpec, MultiIndex};
use crate::leibniz::{
    correction_kpv, cor1_split, cor2_split, estimate_lhs_field, estimate_report, estimate_rhs, low_high_correction,
    make_report, remainder_second_order, theta_coefficient, EstimateKind, EstimateReport, EstimateSpec,
};
use crate::lp::{lemma22_bound_check, LpFamily, MaximalKind};
use crate::spectral::{grad_dot, lp_norm, riesz_potential};
use crate::symbol::{CoefficientConvention, SymbolKind, SymbolSpec};

pub const DEFAULT_TOLERANCES: &str = include_str!("../data/tolerances.json");
pub const DEFAULT_PLAN: &str = include_str!("../data/plans/default.json");

/// The versioned tolerance profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub version: u32,
    pub identity: f64,
    pub oracle: f64,
    pub decomposition: f64,
    pub telescoping: f64,
    pub quadrature_convergence: f64,
    pub proof_split: f64,
    pub dilation: f64,
    /// Allowed `max/min` of a ratio across derivative redistributions.
    pub redistribution_band: f64,
    /// Allowed `|r_k / r_ref - 1|` for the localized commutator.
    pub commutator_band: f64,
    pub pointwise_slack: f64,
    pub square_function_slack: f64,
    pub maximal_slack: f64,
    pub vector_maximal_band: f64,
    pub cone_spread: f64,
    pub cone_extremum: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_TOLERANCES).expect("bundled tolerance profile parses")
    }
}

/// Deliberately broken variants that must make a run fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fixture {
    /// The full-product exponent is off by one in the identity and
    /// telescoping checks.
    CorruptedSymbol,
    /// The θ-expansion is weighted with `α!` instead of `|α|!/α!`.
    FactorialCoefficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checks {
    pub cor2_identity: bool,
    pub oracle: bool,
    pub telescoping: bool,
    pub quadrature_convergence: bool,
    pub decomposition: bool,
    pub proof_splits: bool,
    pub pointwise_maximal: bool,
    pub finite_ratios: bool,
    pub dilation: bool,
    pub redistribution: bool,
    pub commutator_stability: bool,
    pub cone_scan: bool,
    pub square_function: bool,
    pub maximal_bound: bool,
    pub vector_maximal: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            cor2_identity: true,
            oracle: true,
            telescoping: true,
            quadrature_convergence: true,
            decomposition: true,
            proof_splits: true,
            pointwise_maximal: true,
            finite_ratios: true,
            dilation: true,
            redistribution: true,
            commutator_stability: true,
            cone_scan: true,
            square_function: true,
            maximal_bound: true,
            vector_maximal: true,
        }
    }
}

impl Checks {
    pub fn none() -> Self {
        Self {
            cor2_identity: false,
            oracle: false,
            telescoping: false,
            quadrature_convergence: false,
            decomposition: false,
            proof_splits: false,
            pointwise_maximal: false,
            finite_ratios: false,
            dilation: false,
            redistribution: false,
            commutator_stability: false,
            cone_scan: false,
            square_function: false,
            maximal_bound: false,
            vector_maximal: false,
        }
    }
}

fn one() -> usize {
    1
}

fn default_quad() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub name: String,
    #[serde(default = "one")]
    pub dim: usize,
    pub n: usize,
    pub period: f64,
    pub j_min: i32,
    pub j_max: i32,
    #[serde(default)]
    pub seed: u64,
    pub kinds: Vec<EstimateKind>,
    pub s: Vec<f64>,
    /// `s1 = fraction · s`, `s2 = s - s1`.
    pub split_fractions: Vec<f64>,
    /// `(p, p1, p2)` triples.
    pub holder: Vec<[f64; 3]>,
    pub families: Vec<FamilySpec>,
    #[serde(default = "default_quad")]
    pub quad_order: usize,
    #[serde(default)]
    pub checks: Checks,
    #[serde(default)]
    pub fixture: Option<Fixture>,
    #[serde(default)]
    pub tolerances: Option<Tolerances>,
}

fn plan_error(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidPlan {
        path: path.into(),
        reason: reason.into(),
    }
}

impl SweepPlan {
    /// The bundled desk-scale plan.
    pub fn desk_default() -> Self {
        serde_json::from_str(DEFAULT_PLAN).expect("bundled plan parses")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text).map_err(|e| plan_error("<root>", e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.n, self.period).map_err(|e| plan_error("n/dim/period", e.to_string()))
    }

    pub fn family(&self) -> Result<LpFamily> {
        LpFamily::new(self.grid()?, self.j_min, self.j_max).map_err(|e| plan_error("j_min/j_max", e.to_string()))
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances.clone().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let fam = self.family()?;
        if self.kinds.is_empty() {
            return Err(plan_error("kinds", "empty"));
        }
        for (i, &s) in self.s.iter().enumerate() {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(plan_error(format!("s[{i}]"), format!("{s} is not a finite non-negative number")));
            }
        }
        for (i, &fr) in self.split_fractions.iter().enumerate() {
            if !(0.0..=1.0).contains(&fr) {
                return Err(plan_error(format!("split_fractions[{i}]"), format!("{fr} outside [0, 1]")));
            }
        }
        for (i, h) in self.holder.iter().enumerate() {
            let probe = EstimateSpec::new(0.0, (0.0, 0.0), (h[0], h[1], h[2]), 1);
            probe
                .validate(EstimateKind::Eq11)
                .map_err(|e| plan_error(format!("holder[{i}]"), e.to_string()))?;
        }
        if self.quad_order < 2 {
            return Err(plan_error("quad_order", "needs at least 2 nodes"));
        }
        for (i, f) in self.families.iter().enumerate() {
            generate(f, &fam).map_err(|e| plan_error(format!("families[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    /// Orders `ℓ` swept for `kind` at `s`.
    fn ells(kind: EstimateKind, s: f64) -> Vec<usize> {
        match kind {
            EstimateKind::Thm11 => (1..=MultiIndex::MAX_ORDER)
                .filter(|&l| (l - 1) as f64 <= s && s <= l as f64)
                .collect(),
            EstimateKind::Lemma32Lowhigh => (1..=MultiIndex::MAX_ORDER).filter(|&l| l as f64 <= s).collect(),
            _ => vec![1],
        }
    }

    /// Valid spec points of `kind` at `(s, ℓ)`.
    fn points(&self, kind: EstimateKind, s: f64, ell: usize) -> Vec<EstimateSpec> {
        // the two-term right side of eq11 ignores the split
        let fractions: &[f64] = if kind == EstimateKind::Eq11 { &[1.0] } else { &self.split_fractions };
        let mut out = Vec::new();
        for &fr in fractions {
            let s1 = fr * s;
            for h in &self.holder {
                let spec = EstimateSpec::new(s, (s1, s - s1), (h[0], h[1], h[2]), ell);
                if spec.validate(kind).is_ok() {
                    out.push(spec);
                }
            }
        }
        out
    }
}

/// One CSV row: an estimate report with its family coordinates.
#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub report: EstimateReport,
    pub family_index: usize,
    pub lambda: f64,
    pub k: Option<i32>,
    pub grid_n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    /// Worst observed statistic.
    pub worst: f64,
    pub tolerance: f64,
    pub samples: usize,
    /// Offending cases, capped.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub plan: String,
    pub pass: bool,
    pub rows: usize,
    pub checks: Vec<CheckOutcome>,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<Row>,
    pub verdict: Verdict,
    pub pairs: Vec<(FamilySpec, Generated)>,
    /// Families that appear in at least one failure.
    pub failed_families: Vec<usize>,
}

/// One measured case of a check.
#[derive(Debug, Clone)]
struct Measure {
    check: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
    context: String,
    family: Option<usize>,
}

impl Measure {
    /// `value ≤ tolerance` and finite.
    fn at_most(check: &'static str, value: f64, tolerance: f64, context: String, family: Option<usize>) -> Self {
        Self {
            check,
            value,
            tolerance,
            pass: value.is_finite() && value <= tolerance,
            context,
            family,
        }
    }
}

const CHECK_ORDER: [&str; 15] = [
    "cor2_identity",
    "oracle",
    "telescoping",
    "quadrature_convergence",
    "decomposition",
    "proof_splits",
    "pointwise_maximal",
    "finite_ratios",
    "dilation",
    "redistribution",
    "commutator_stability",
    "cone_scan",
    "square_function",
    "maximal_bound",
    "vector_maximal",
];

const MAX_LISTED_FAILURES: usize = 25;

fn describe(idx: usize, spec: &FamilySpec) -> String {
    format!("family[{idx}] {spec}")
}

fn rows_for_family(plan: &SweepPlan, idx: usize, spec: &FamilySpec, gen: &Generated) -> Result<Vec<Row>> {
    let (f, g, fam) = (&gen.f, &gen.g, &gen.fam);
    let mut rows = Vec::new();
    for &kind in &plan.kinds {
        if kind == EstimateKind::Lemma11Commutator && spec.kind.k().is_none() {
            continue;
        }
        for &s in &plan.s {
            for ell in SweepPlan::ells(kind, s) {
                let points = plan.points(kind, s, ell);
                let Some(first) = points.first() else { continue };
                let lhs_field = estimate_lhs_field(kind, f, g, fam, first)?;
                let mut lhs_norms: BTreeMap<u64, f64> = BTreeMap::new();
                for pt in points {
                    let lhs = match lhs_norms.get(&pt.p.to_bits()) {
                        Some(&v) => v,
                        None => {
                            let v = lp_norm(&lhs_field, pt.p)?;
                            lhs_norms.insert(pt.p.to_bits(), v);
                            v
                        }
                    };
                    let rhs = estimate_rhs(kind, f, g, &pt)?;
                    let mut report = make_report(kind, pt, lhs, rhs);
                    report.family_label = spec.kind.label();
                    report.family_params = spec.kind.params();
                    rows.push(Row {
                        report,
                        family_index: idx,
                        lambda: 2f64.powi(spec.kind.dilation()),
                        k: spec.kind.k(),
                        grid_n: f.grid().n(),
                        seed: spec.seed,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// `max|a - b| / max(max|b|, scale)`.
fn scaled_error(a: &RealField, b: &RealField, scale: f64) -> f64 {
    let denom = b.max_abs().max(scale);
    let diff = a.max_abs_diff(b);
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

fn family_checks(plan: &SweepPlan, tol: &Tolerances, idx: usize, spec: &FamilySpec, gen: &Generated) -> Result<Vec<Measure>> {
    let (f, g, fam) = (&gen.f, &gen.g, &gen.fam);
    let checks = &plan.checks;
    let who = describe(idx, spec);
    let corrupted = plan.fixture == Some(Fixture::CorruptedSymbol);
    let mut out = Vec::new();

    if checks.cor2_identity {
        let r = if corrupted {
            riesz_potential(&f.mul(g)?, 3.0)
                .sub(&correction_kpv(f, g, 2.0)?)?
                .add(&grad_dot(f, g)?.scale(2.0))?
        } else {
            remainder_second_order(f, g, 2.0)?
        };
        let scale = lp_norm(&riesz_potential(f, 1.0), 4.0)? * lp_norm(&riesz_potential(g, 1.0), 4.0)?;
        let value = lp_norm(&r, 2.0)? / scale;
        out.push(Measure::at_most("cor2_identity", value, tol.identity, who.clone(), Some(idx)));
    }

    if checks.oracle {
        let convention = if plan.fixture == Some(Fixture::FactorialCoefficient) {
            CoefficientConvention::Factorial
        } else {
            CoefficientConvention::Multinomial
        };
        for &s in &plan.s {
            // A^0(0) = f D^s g sets the scale; A^m(0) can vanish identically (s = 1 in 1D)
            let scale = theta_coefficient(f, g, s, 0)?.max_abs();
            for m in 0..=2 {
                let fast = theta_coefficient(f, g, s, m)?;
                let plain = apply_direct(&SymbolSpec::new(SymbolKind::ThetaDeriv { s, theta: 0.0, m }), f, g)?;
                let expanded = apply_direct(
                    &SymbolSpec::new(SymbolKind::ThetaDerivExpanded {
                        s,
                        theta: 0.0,
                        m,
                        convention,
                    }),
                    f,
                    g,
                )?;
                let value = scaled_error(&plain, &fast, scale).max(scaled_error(&expanded, &fast, scale));
                out.push(Measure::at_most("oracle", value, tol.oracle, format!("{who} s={s} m={m}"), Some(idx)));
            }
        }
    }

    if checks.telescoping || (checks.quadrature_convergence && idx == 0) {
        for &s in &plan.s {
            let exponent = if corrupted { s + 1.0 } else { s };
            let full = apply_low_high(SymbolKind::SumRiesz { s: exponent }, f, g, fam)?;
            // errors are measured against the largest term of the identity, since
            // the remainder can vanish identically (ℓ = 2, s = 1 in 1D)
            let scale = full.max_abs();
            for ell in [1, 2] {
                let rem = remainder_symbol_apply(s, ell, f, g, fam, plan.quad_order)?;
                if checks.telescoping {
                    let value = scaled_error(&full.sub(&low_high_correction(f, g, fam, s, ell)?)?, &rem, scale);
                    let context = format!("{who} s={s} ell={ell}");
                    out.push(Measure::at_most("telescoping", value, tol.telescoping, context, Some(idx)));
                }
                if checks.quadrature_convergence && idx == 0 {
                    let coarse = remainder_symbol_apply(s, ell, f, g, fam, 16)?;
                    let fine = remainder_symbol_apply(s, ell, f, g, fam, 64)?;
                    let value = scaled_error(&coarse, &fine, scale);
                    let context = format!("{who} s={s} ell={ell} Q=16 vs 64");
                    out.push(Measure::at_most("quadrature_convergence", value, tol.quadrature_convergence, context, Some(idx)));
                }
            }
        }
    }

    if checks.decomposition {
        for &s in &plan.s {
            let d = decompose(&SymbolSpec::new(SymbolKind::SumRiesz { s }), f, g, fam)?;
            out.push(Measure::at_most("decomposition", d.residual, tol.decomposition, format!("{who} s={s}"), Some(idx)));
        }
    }

    if checks.proof_splits {
        for &s in &plan.s {
            if s <= 2.0 {
                let r = cor1_split(f, g, fam, s, plan.quad_order)?.residual;
                out.push(Measure::at_most("proof_splits", r, tol.proof_split, format!("{who} cor1 s={s}"), Some(idx)));
            }
            if s >= 2.0 {
                let r = cor2_split(f, g, fam, s, plan.quad_order)?.residual;
                out.push(Measure::at_most("proof_splits", r, tol.proof_split, format!("{who} cor2 s={s}"), Some(idx)));
            }
        }
    }

    if checks.pointwise_maximal {
        let t = spec.kind.dilation();
        for s in [0.0, 0.5, 1.0, 2.0] {
            for k in [2 + t, 4 + t, 6 + t] {
                if k < fam.j_min() - 1 || k > fam.j_max() {
                    continue;
                }
                for (name, field) in [("f", f), ("g", g)] {
                    let r = lemma22_bound_check(field, fam, s, k, tol.pointwise_slack, MaximalKind::Dyadic)?;
                    out.push(Measure {
                        check: "pointwise_maximal",
                        value: r.max_ratio,
                        tolerance: 1.0 + tol.pointwise_slack,
                        pass: r.passed(),
                        context: format!("{who} {name} s={s} k={k} violations={}", r.violations),
                        family: Some(idx),
                    });
                }
            }
        }
    }
    Ok(out)
}

fn ratio_checks(plan: &SweepPlan, tol: &Tolerances, rows: &[Row]) -> Vec<Measure> {
    let mut out = Vec::new();
    let checks = &plan.checks;
    let row_context = |r: &Row| {
        let e = &r.report;
        format!(
            "{} family[{}] {} lambda={} s={} s1={} s2={} p=({}, {}, {}) ell={}",
            e.kind, r.family_index, e.family_label, r.lambda, e.spec.s, e.spec.s1, e.spec.s2, e.spec.p, e.spec.p1, e.spec.p2, e.spec.ell
        )
    };

    if checks.finite_ratios {
        let bad: Vec<&Row> = rows
            .iter()
            .filter(|r| {
                let e = &r.report;
                e.failure || !(e.ratio.is_finite() && e.lhs.is_finite() && e.rhs.is_finite() && e.lhs >= 0.0 && e.rhs >= 0.0)
            })
            .collect();
        if bad.is_empty() {
            out.push(Measure::at_most("finite_ratios", 0.0, 0.0, String::new(), None));
        }
        for r in bad {
            out.push(Measure {
                check: "finite_ratios",
                value: 1.0,
                tolerance: 0.0,
                pass: false,
                context: row_context(r),
                family: Some(r.family_index),
            });
        }
    }

    if checks.dilation {
        // rows of one dilated base family, keyed by everything except t
        let mut groups: BTreeMap<String, Vec<(i32, &Row)>> = BTreeMap::new();
        for r in rows {
            let spec = &plan.families[r.family_index];
            if let FamilyKind::Dilation { base, t } = &spec.kind {
                let e = &r.report;
                let key = format!("{:?}|{}|{}|{:?}", base, spec.seed, e.kind, e.spec);
                groups.entry(key).or_default().push((*t, r));
            }
        }
        for members in groups.values() {
            let reference = members.iter().find(|(t, _)| *t == 0).unwrap_or(&members[0]).1.report.ratio;
            for (_, r) in members {
                let ratio = r.report.ratio;
                // exact identities produce rounding-level ratios with no scale to compare
                let value = if reference <= tol.identity && ratio <= tol.identity {
                    0.0
                } else {
                    (ratio / reference - 1.0).abs()
                };
                out.push(Measure::at_most("dilation", value, tol.dilation, row_context(r), Some(r.family_index)));
            }
        }
    }

    if checks.redistribution {
        let mut groups: BTreeMap<(usize, u64, [u64; 3]), Vec<&Row>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.report.kind == EstimateKind::KpvCor1) {
            let e = &r.report.spec;
            groups
                .entry((r.family_index, e.s.to_bits(), [e.p.to_bits(), e.p1.to_bits(), e.p2.to_bits()]))
                .or_default()
                .push(r);
        }
        for members in groups.values().filter(|m| m.len() > 1) {
            let max = members.iter().map(|r| r.report.ratio).fold(f64::NEG_INFINITY, f64::max);
            let min = members.iter().map(|r| r.report.ratio).fold(f64::INFINITY, f64::min);
            let value = if min > 0.0 { max / min } else { f64::INFINITY };
            let e = &members[0].report;
            let context = format!(
                "family[{}] {} s={} p=({}, {}, {}) over {} splits",
                members[0].family_index, e.family_label, e.spec.s, e.spec.p, e.spec.p1, e.spec.p2, members.len()
            );
            out.push(Measure::at_most("redistribution", value, tol.redistribution_band, context, Some(members[0].family_index)));
        }
    }
    out
}

/// Commutator ratios `(k, ratio)` for localized pairs on a 1024-point,
/// period-2π grid with bands 0..=8, at `(s, s1, s2, p, p1, p2) = (1.5, 1, 0.5, 2, 4, 4)`.
pub fn commutator_ratios(seed: u64, ks: &[i32]) -> Result<Vec<(i32, f64)>> {
    let fam = LpFamily::new(GridSpec::new(1, 1024, 2.0 * PI)?, 0, 8)?;
    let spec = EstimateSpec::new(1.5, (1.0, 0.5), (2.0, 4.0, 4.0), 1);
    ks.iter()
        .map(|&k| {
            let gen = generate(
                &FamilySpec {
                    kind: FamilyKind::LocalizedPair { k },
                    seed,
                },
                &fam,
            )?;
            let r = estimate_report(EstimateKind::Lemma11Commutator, &gen.f, &gen.g, &gen.fam, &spec)?;
            Ok((k, r.ratio))
        })
        .collect()
}

fn empirical_measure(r: EmpiricalReport, check: &'static str) -> Measure {
    Measure {
        check,
        value: r.worst,
        tolerance: r.allowance,
        pass: r.pass,
        context: format!("{} over {} samples", r.name, r.samples),
        family: None,
    }
}

fn global_checks(plan: &SweepPlan, tol: &Tolerances) -> Result<Vec<Measure>> {
    let checks = &plan.checks;
    let mut out = Vec::new();
    if checks.cone_scan {
        let scan = lemma12_scan(plan.dim, &plan.s, MultiIndex::MAX_ORDER, tol.cone_spread)?;
        for e in scan.entries.iter() {
            let context = format!("s={} alpha={:?} beta={:?}", e.s, e.alpha.entries(), e.beta.entries());
            out.push(Measure {
                check: "cone_scan",
                value: e.spread,
                tolerance: tol.cone_spread,
                pass: e.pass,
                context,
                family: None,
            });
        }
        let sample = ConeSample::standard(plan.dim)?;
        let zero = MultiIndex::zero(plan.dim);
        for &s in &plan.s {
            let q = symbol_cone_bounds(s, &[(zero, zero)], &sample, tol.cone_spread)?[0].q;
            let value = (q - 1.5f64.powf(s)).abs();
            out.push(Measure::at_most("cone_scan", value, tol.cone_extremum, format!("s={s} Q(0,0) vs (3/2)^s"), None));
        }
    }
    if checks.commutator_stability {
        let ratios = commutator_ratios(plan.seed, &[4, 5, 6, 7])?;
        let reference = ratios[1].1;
        for (k, r) in ratios {
            let value = (r / reference - 1.0).abs();
            out.push(Measure::at_most("commutator_stability", value, tol.commutator_band, format!("k={k} ratio={r:e}"), None));
        }
    }
    let fam = plan.family()?;
    if checks.square_function {
        let r = square_function_check(&fam, &[1.5, 2.0, 3.0, 4.0], 50, plan.seed, tol.square_function_slack)?;
        out.push(empirical_measure(r, "square_function"));
    }
    if checks.maximal_bound {
        let r = maximal_bound_check(&fam, &[1.5, 2.0, 4.0], 50, plan.seed, tol.maximal_slack)?;
        out.push(empirical_measure(r, "maximal_bound"));
    }
    if checks.vector_maximal {
        let sizes: &[usize] = if plan.dim == 1 { &[128, 256, 512] } else { &[32, 64, 128] };
        let base = GridSpec::new(plan.dim, sizes[0], plan.period)?;
        let fam = LpFamily::new(base, plan.j_min, plan.j_max.min(LpFamily::max_band(&base)))?;
        let r = vector_maximal_check(&fam, sizes, 20, 8, 2.0, 2.0, plan.seed, tol.vector_maximal_band)?;
        out.push(empirical_measure(r, "vector_maximal"));
    }
    Ok(out)
}

fn aggregate(measures: Vec<Measure>) -> (Vec<CheckOutcome>, Vec<usize>) {
    let mut by_check: BTreeMap<usize, CheckOutcome> = BTreeMap::new();
    let mut failed = Vec::new();
    for m in measures {
        let pos = CHECK_ORDER.iter().position(|c| *c == m.check).expect("known check");
        let entry = by_check.entry(pos).or_insert_with(|| CheckOutcome {
            name: CHECK_ORDER[pos],
            pass: true,
            worst: f64::NEG_INFINITY,
            tolerance: m.tolerance,
            samples: 0,
            failures: Vec::new(),
        });
        entry.samples += 1;
        entry.worst = entry.worst.max(m.value);
        if !m.pass {
            entry.pass = false;
            if entry.failures.len() < MAX_LISTED_FAILURES {
                entry.failures.push(format!("{} = {:e}: {}", m.check, m.value, m.context));
            }
            if let Some(i) = m.family {
                failed.push(i);
            }
        }
    }
    failed.sort_unstable();
    failed.dedup();
    (by_check.into_values().collect(), failed)
}

/// Executes every (kind, family, spec) triple and every enabled check.
/// Invalid plans are errors; failed checks are data in the verdict.
pub fn run_sweep(plan: &SweepPlan) -> Result<SweepOutcome> {
    plan.validate()?;
    let tol = plan.tolerances();
    let fam = plan.family()?;
    let pairs: Vec<(FamilySpec, Generated)> = plan
        .families
        .iter()
        .map(|spec| Ok((spec.clone(), generate(spec, &fam)?)))
        .collect::<Result<_>>()?;

    let per_family: Vec<(Vec<Row>, Vec<Measure>)> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (spec, gen))| Ok((rows_for_family(plan, i, spec, gen)?, family_checks(plan, &tol, i, spec, gen)?)))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut measures = Vec::new();
    for (r, m) in per_family {
        rows.extend(r);
        measures.extend(m);
    }
    measures.extend(ratio_checks(plan, &tol, &rows));
    measures.extend(global_checks(plan, &tol)?);

    let (checks, failed_families) = aggregate(measures);
    let failures: Vec<String> = checks.iter().flat_map(|c| c.failures.iter().cloned()).collect();
    let verdict = Verdict {
        plan: plan.name.clone(),
        pass: checks.iter().all(|c| c.pass),
        rows: rows.len(),
        checks,
        failures,
    };
    Ok(SweepOutcome {
        rows,
        verdict,
        pairs,
        failed_families,
    })
}

pub const CSV_HEADER: &str = "kind,family,lambda,k,s,s1,s2,p,p1,p2,ell,lhs,rhs,ratio,grid_N,seed";

pub fn rows_to_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(rows.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let e = &r.report;
        let k = r.k.map(|k| k.to_string()).unwrap_or_default();
        let ell = if e.kind.uses_ell() { e.spec.ell.to_string() } else { String::new() };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{:e},{:e},{:e},{},{}",
            e.kind, e.family_label, r.lambda, k, e.spec.s, e.spec.s1, e.spec.s2, e.spec.p, e.spec.p1, e.spec.p2, ell, e.lhs, e.rhs, e.ratio, r.grid_n, r.seed
        );
    }
    out
}

/// Writes `reports.csv`, `verdict.json` and, for failing families, input
/// dumps under `dumps/`.
pub fn write_outputs(outcome: &SweepOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("reports.csv"), rows_to_csv(&outcome.rows))?;
    let mut verdict = serde_json::to_string_pretty(&outcome.verdict)?;
    verdict.push('\n');
    fs::write(dir.join("verdict.json"), verdict)?;
    for &i in &outcome.failed_families {
        let (spec, gen) = &outcome.pairs[i];
        let stem = format!("family{i}_{}", spec.kind.label().replace('/', "_"));
        write_field(&dir.join("dumps").join(format!("{stem}_f")), &gen.f)?;
        write_field(&dir.join("dumps").join(format!("{stem}_g")), &gen.g)?;
    }
    Ok(())
}

/// Recomputes a row's `(lhs, rhs)` from its input fields.
pub fn recompute_row(row: &Row, f: &RealField, g: &RealField, fam: &LpFamily) -> Result<(f64, f64)> {
    let e = &row.report;
    let lhs = lp_norm(&estimate_lhs_field(e.kind, f, g, fam, &e.spec)?, e.spec.p)?;
    Ok((lhs, estimate_rhs(e.kind, f, g, &e.spec)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> SweepPlan {
        let mut plan = SweepPlan::desk_default();
        plan.n = 128;
        plan.j_max = 5;
        plan.s = vec![1.0, 2.0];
        plan.families = vec![
            FamilySpec {
                kind: FamilyKind::LocalizedPair { k: 4 },
                seed: 1,
            },
            FamilySpec {
                kind: FamilyKind::Dilation {
                    base: Box::new(FamilyKind::RandomBandlimited { j_lo: 1, j_hi: 4 }),
                    t: 0,
                },
                seed: 3,
            },
            FamilySpec {
                kind: FamilyKind::Dilation {
                    base: Box::new(FamilyKind::RandomBandlimited { j_lo: 1, j_hi: 4 }),
                    t: 1,
                },
                seed: 3,
            },
        ];
        plan.checks.commutator_stability = false;
        plan.checks.square_function = false;
        plan.checks.maximal_bound = false;
        plan.checks.vector_maximal = false;
        plan
    }

    #[test]
    fn bundled_documents_parse() {
        let plan = SweepPlan::desk_default();
        plan.validate().unwrap();
        assert_eq!(Tolerances::default().version, 1);
    }

    #[test]
    fn small_plan_passes_and_is_deterministic() {
        let plan = small_plan();
        let a = run_sweep(&plan).unwrap();
        assert!(a.verdict.pass, "{:#?}", a.verdict.failures);
        let b = run_sweep(&plan).unwrap();
        assert_eq!(rows_to_csv(&a.rows), rows_to_csv(&b.rows));
        assert!(a.rows.iter().all(|r| r.report.kind != EstimateKind::Lemma11Commutator || r.k.is_some()));
    }

    #[test]
    fn fixtures_fail() {
        let mut plan = small_plan();
        plan.checks = Checks {
            cor2_identity: true,
            oracle: true,
            telescoping: true,
            ..Checks::none()
        };
        plan.fixture = Some(Fixture::CorruptedSymbol);
        let v = run_sweep(&plan).unwrap().verdict;
        assert!(!v.pass);
        assert!(v.failures.iter().any(|f| f.starts_with("cor2_identity") && f.contains("family[0]")));
        assert!(v.failures.iter().any(|f| f.starts_with("telescoping")));
        plan.fixture = Some(Fixture::FactorialCoefficient);
        let v = run_sweep(&plan).unwrap().verdict;
        assert!(!v.pass);
        assert!(v.failures.iter().all(|f| f.starts_with("oracle") && f.contains("m=2")));
    }

    #[test]
    fn invalid_plans_name_the_field() {
        let mut plan = small_plan();
        plan.holder.push([2.0, 3.0, 3.0]);
        let err = plan.validate().unwrap_err().to_string();
        assert!(err.contains("holder[3]"), "{err}");
        let mut plan = small_plan();
        plan.j_max = 9;
        assert!(plan.validate().unwrap_err().to_string().contains("j_min/j_max"));
    }
}

//! Deterministic test-function pairs.
//!
//! Noise is drawn from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`, stream 0 for `f` and stream 1 for `g`; samples are
//! uniform on `[-1/2, 1/2)`. Every generated field is mean-free and has unit
//! `L²` norm.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::RealField;
use crate::grid::norm;
use crate::lp::LpFamily;
use crate::spectral::{lp_norm, remove_mean};

/// Largest out-of-support energy fraction tolerated for localized pairs.
pub const LEAKAGE_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    /// `f = P_{≤k-3}` noise, `g = P_k` noise.
    LocalizedPair { k: i32 },
    /// Periodized Gaussians. `center` and `width` are fractions of the period;
    /// `g` sits a tenth of a period to the right and is 3/4 as wide.
    Gaussian {
        #[serde(default = "half")]
        center: f64,
        #[serde(default = "fortieth")]
        width: f64,
    },
    /// `f(2^t x), g(2^t x)` for a base family, realized by shrinking the period
    /// by `2^t` and moving the band window with it.
    Dilation { base: Box<FamilyKind>, t: i32 },
    /// Noise projected onto bands `j_lo..=j_hi`.
    RandomBandlimited { j_lo: i32, j_hi: i32 },
}

fn half() -> f64 {
    0.5
}

fn fortieth() -> f64 {
    1.0 / 40.0
}

impl FamilyKind {
    pub fn label(&self) -> String {
        match self {
            Self::LocalizedPair { .. } => "localized_pair".into(),
            Self::Gaussian { .. } => "gaussian".into(),
            Self::Dilation { base, .. } => format!("dilation/{}", base.label()),
            Self::RandomBandlimited { .. } => "random_bandlimited".into(),
        }
    }

    /// Dilation exponent `t` (0 unless dilated).
    pub fn dilation(&self) -> i32 {
        match self {
            Self::Dilation { base, t } => t + base.dilation(),
            _ => 0,
        }
    }

    /// Localization index `k`, if any.
    pub fn k(&self) -> Option<i32> {
        match self {
            Self::LocalizedPair { k } => Some(*k),
            Self::Dilation { base, t } => base.k().map(|k| k + t),
            _ => None,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match self {
            Self::LocalizedPair { k } => {
                m.insert("k".into(), *k as f64);
            }
            Self::Gaussian { center, width } => {
                m.insert("center".into(), *center);
                m.insert("width".into(), *width);
            }
            Self::Dilation { base, t } => {
                m = base.params();
                m.insert("t".into(), *t as f64);
            }
            Self::RandomBandlimited { j_lo, j_hi } => {
                m.insert("j_lo".into(), *j_lo as f64);
                m.insert("j_hi".into(), *j_hi as f64);
            }
        }
        m
    }
}

/// A family kind with its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    #[serde(flatten)]
    pub kind: FamilyKind,
    #[serde(default)]
    pub seed: u64,
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind.label())?;
        for (k, v) in self.kind.params() {
            write!(f, " {k}={v}")?;
        }
        write!(f, " seed={}", self.seed)
    }
}

/// A generated pair together with the family it lives on (dilations move both).
#[derive(Debug, Clone)]
pub struct Generated {
    pub f: RealField,
    pub g: RealField,
    pub fam: LpFamily,
}

fn noise(fam: &LpFamily, seed: u64, stream: u64) -> RealField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let grid = *fam.grid();
    let values = (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect();
    RealField::new(grid, values).expect("length matches grid")
}

fn normalize(f: &RealField) -> Result<RealField> {
    let before = lp_norm(f, 2.0)?;
    let f = remove_mean(f);
    let n = lp_norm(&f, 2.0)?;
    // a projection holding only the zero mode leaves rounding noise behind
    if !(n > 1e-10 * before) {
        return Err(invalid("family", "generated field has no mean-free content"));
    }
    Ok(f.scale(1.0 / n))
}

/// Fraction of spectral energy at frequencies with `|ξ| ∉ [lo, hi]`.
pub fn leakage(f: &RealField, lo: f64, hi: f64) -> f64 {
    let spec = f.to_spectral();
    let grid = *f.grid();
    let (mut out, mut total) = (0.0, 0.0);
    for (c, xi) in spec.coeffs().iter().zip(grid.frequencies()) {
        let e = c.norm_sqr();
        total += e;
        let r = norm(&xi);
        if r < lo || r > hi {
            out += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        out / total
    }
}

pub fn generate(spec: &FamilySpec, fam: &LpFamily) -> Result<Generated> {
    let seed = spec.seed;
    match &spec.kind {
        FamilyKind::LocalizedPair { k } => {
            let k = *k;
            if k - 3 < fam.j_min() - 1 || k > fam.j_max() {
                return Err(Error::BandOutOfRange {
                    index: k,
                    lo: fam.j_min() + 2,
                    hi: fam.j_max(),
                });
            }
            let f = normalize(&fam.project_leq(&noise(fam, seed, 0), k - 3)?)?;
            let g = normalize(&fam.project(&noise(fam, seed, 1), k)?)?;
            let two = |e: i32| 2f64.powi(e);
            for (name, field, lo, hi) in [("f", &f, 0.0, two(k - 2)), ("g", &g, two(k - 1), two(k + 1))] {
                let leak = leakage(field, lo, hi);
                if leak > LEAKAGE_TOLERANCE {
                    return Err(invalid("localized_pair", format!("{name} leaks {leak:e} outside its support")));
                }
            }
            Ok(Generated { f, g, fam: fam.clone() })
        }
        FamilyKind::Gaussian { center, width } => {
            if !(*width > 0.0 && *width <= 0.1) {
                return Err(invalid("width", format!("{width} outside (0, 0.1]")));
            }
            let grid = *fam.grid();
            let l = grid.period();
            let bump = |c: f64, w: f64| {
                let sigma = w * l;
                RealField::from_fn(grid, |x| {
                    // nearest-image distance on the torus
                    let d = |v: f64| {
                        let u = (v - c * l).rem_euclid(l);
                        u.min(l - u)
                    };
                    let r2 = d(x[0]).powi(2) + if grid.dim() == 2 { d(x[1]).powi(2) } else { 0.0 };
                    (-r2 / (2.0 * sigma * sigma)).exp()
                })
            };
            let f = normalize(&bump(*center, *width))?;
            let g = normalize(&bump(center + 0.1, 0.75 * width))?;
            Ok(Generated { f, g, fam: fam.clone() })
        }
        FamilyKind::Dilation { base, t } => {
            let inner = generate(
                &FamilySpec {
                    kind: (**base).clone(),
                    seed,
                },
                fam,
            )?;
            let dilated = inner.fam.dilated(*t)?;
            let grid = *dilated.grid();
            // same samples on the shrunken torus; renormalize to unit L²
            let f = normalize(&RealField::new(grid, inner.f.into_values())?)?;
            let g = normalize(&RealField::new(grid, inner.g.into_values())?)?;
            Ok(Generated { f, g, fam: dilated })
        }
        FamilyKind::RandomBandlimited { j_lo, j_hi } => {
            if j_lo > j_hi || *j_lo < fam.j_min() || *j_hi > fam.j_max() {
                return Err(Error::BandOutOfRange {
                    index: if *j_lo < fam.j_min() { *j_lo } else { *j_hi },
                    lo: fam.j_min(),
                    hi: fam.j_max(),
                });
            }
            let band = |stream| -> Result<RealField> {
                let n = noise(fam, seed, stream);
                let high = fam.project_leq(&n, *j_hi)?;
                let low = fam.project_leq(&n, j_lo - 1)?;
                normalize(&high.sub(&low)?)
            };
            Ok(Generated {
                f: band(0)?,
                g: band(1)?,
                fam: fam.clone(),
            })
        }
    }
}

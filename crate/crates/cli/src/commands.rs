use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, ValueEnum};

use fraclr::bilinear::apply_direct;
use fraclr::cone::lemma12_scan;
use fraclr::dump::{read_field, write_family, write_field};
use fraclr::family::{generate, FamilySpec};
use fraclr::harness::{run_sweep, write_outputs};
use fraclr::leibniz::{commutator, remainder_kpv, remainder_second_order, theorem11_remainder, EstimateSpec};
use fraclr::spectral::riesz_potential;
use fraclr::symbol::{SymbolKind, SymbolSpec};
use fraclr::RealField;

use crate::config::Resolved;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Operator {
    Riesz,
    Project,
    Commutator,
    RemainderKpv,
    RemainderCor2,
    RemainderThm11,
    BilinearDirect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SymbolName {
    #[value(name = "sumriesz")]
    SumRiesz,
    ShiftedRiesz,
    ThetaDeriv,
    KpvRemainder,
    SecondOrderRemainder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Localization {
    None,
    LowHigh,
    Diagonal,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    #[arg(value_enum)]
    operator: Operator,
    /// Input field dumps (header `.json` or body `.bin`); two for bilinear operators.
    #[arg(long = "in", num_args = 1..=2, required = true)]
    inputs: Vec<PathBuf>,
    /// Derivative order.
    #[arg(long)]
    s: Option<f64>,
    /// Band index for `project`.
    #[arg(long, allow_hyphen_values = true)]
    j: Option<i32>,
    /// Project onto all bands `≤ j` instead of band `j`.
    #[arg(long)]
    leq: bool,
    /// Expansion order for `remainder-thm11` (default: smallest valid).
    #[arg(long)]
    ell: Option<usize>,
    /// Symbol for `bilinear-direct`.
    #[arg(long, value_enum)]
    symbol: Option<SymbolName>,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// θ-derivative order for `theta-deriv`.
    #[arg(long, default_value_t = 0)]
    m: usize,
    #[arg(long, value_enum, default_value_t = Localization::None)]
    localization: Localization,
    /// Output stem inside the output directory (default: the operator name).
    #[arg(long)]
    output: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Comma-separated orders `s`.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,1.5,2,2.5")]
    s: Vec<f64>,
    /// Largest `|α| + |β|`; at most 4.
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 1e-9)]
    spread_tolerance: f64,
}

#[derive(Debug, Args)]
pub struct DumpFamilyArgs {
    /// A test-pair spec, e.g. `{"kind": "localized_pair", "k": 5, "seed": 1}`.
    #[arg(long)]
    family: Option<String>,
}

fn config(reason: impl Into<String>) -> CliError {
    CliError::Config(reason.into())
}

/// Rejects stems that would escape the output directory.
fn output_path(out_dir: &Path, stem: &str) -> Result<PathBuf, CliError> {
    if stem.is_empty() || stem.contains(['/', '\\']) || stem == "." || stem == ".." {
        return Err(config(format!("output: `{stem}` is not a plain file stem")));
    }
    Ok(out_dir.join(stem))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(fraclr::Error::from)?;
    text.push('\n');
    fs::write(path, text).map_err(fraclr::Error::from)?;
    Ok(())
}

pub fn verify(cfg: &Resolved) -> Result<bool, CliError> {
    let plan = cfg.plan()?;
    let outcome = run_sweep(&plan)?;
    write_outputs(&outcome, &cfg.out_dir)?;
    for c in &outcome.verdict.checks {
        println!(
            "{:<24} {}  worst {:.3e}  tolerance {:.3e}  ({} cases)",
            c.name,
            if c.pass { "PASS" } else { "FAIL" },
            c.worst,
            c.tolerance,
            c.samples
        );
    }
    for f in &outcome.verdict.failures {
        println!("  {f}");
    }
    println!(
        "verdict: {} ({} rows) -> {}",
        if outcome.verdict.pass { "PASS" } else { "FAIL" },
        outcome.verdict.rows,
        cfg.out_dir.display()
    );
    Ok(outcome.verdict.pass)
}

impl ApplyArgs {
    fn s(&self) -> Result<f64, CliError> {
        self.s.ok_or_else(|| config(format!("{:?} needs --s", self.operator)))
    }

    fn pair(&self, fields: &[RealField]) -> Result<(RealField, RealField), CliError> {
        match fields {
            [f, g] => Ok((f.clone(), g.clone())),
            _ => Err(config(format!("{:?} needs two inputs", self.operator))),
        }
    }

    fn symbol(&self) -> Result<SymbolKind, CliError> {
        let s = self.s()?;
        Ok(match self.symbol.ok_or_else(|| config("bilinear-direct needs --symbol"))? {
            SymbolName::SumRiesz => SymbolKind::SumRiesz { s },
            SymbolName::ShiftedRiesz => SymbolKind::ShiftedRiesz { s, theta: self.theta },
            SymbolName::ThetaDeriv => SymbolKind::ThetaDeriv {
                s,
                theta: self.theta,
                m: self.m,
            },
            SymbolName::KpvRemainder => SymbolKind::KpvRemainder { s },
            SymbolName::SecondOrderRemainder => SymbolKind::SecondOrderRemainder { s },
        })
    }
}

pub fn apply(cfg: &Resolved, args: &ApplyArgs) -> Result<bool, CliError> {
    let default_stem = args.operator.to_possible_value().expect("no skipped variants").get_name().to_string();
    let target = output_path(&cfg.out_dir, args.output.as_deref().unwrap_or(&default_stem))?;
    let fields = args.inputs.iter().map(|p| read_field(p)).collect::<Result<Vec<_>, _>>()?;
    let first = &fields[0];
    if args.operator != Operator::BilinearDirect && args.localization != Localization::None {
        return Err(config("--localization only applies to bilinear-direct"));
    }
    let out = match args.operator {
        Operator::Riesz => riesz_potential(first, args.s()?),
        Operator::Project => {
            let fam = cfg.family(*first.grid())?;
            let j = args.j.ok_or_else(|| config("project needs --j"))?;
            if args.leq {
                fam.project_leq(first, j)?
            } else {
                fam.project(first, j)?
            }
        }
        Operator::Commutator => {
            let (f, g) = args.pair(&fields)?;
            commutator(&f, &g, args.s()?)?
        }
        Operator::RemainderKpv => {
            let (f, g) = args.pair(&fields)?;
            remainder_kpv(&f, &g, args.s()?)?
        }
        Operator::RemainderCor2 => {
            let (f, g) = args.pair(&fields)?;
            remainder_second_order(&f, &g, args.s()?)?
        }
        Operator::RemainderThm11 => {
            let (f, g) = args.pair(&fields)?;
            let s = args.s()?;
            let ell = args.ell.unwrap_or((s.ceil() as usize).max(1));
            let fam = cfg.family(*f.grid())?;
            theorem11_remainder(&f, &g, &fam, &EstimateSpec::new(s, (s, 0.0), (2.0, 4.0, 4.0), ell))?
        }
        Operator::BilinearDirect => {
            let (f, g) = args.pair(&fields)?;
            let kind = args.symbol()?;
            let sym = match args.localization {
                Localization::None => SymbolSpec::new(kind),
                Localization::LowHigh => SymbolSpec::low_high(kind, Arc::new(cfg.family(*f.grid())?)),
                Localization::Diagonal => SymbolSpec::diagonal(kind, Arc::new(cfg.family(*f.grid())?)),
            };
            apply_direct(&sym, &f, &g)?
        }
    };
    let (json, _) = write_field(&target, &out)?;
    println!("{}", json.display());
    Ok(true)
}

pub fn scan_symbols(cfg: &Resolved, args: &ScanArgs) -> Result<bool, CliError> {
    let dim = cfg.dim.unwrap_or(1);
    let report = lemma12_scan(dim, &args.s, args.order, args.spread_tolerance)?;
    fs::create_dir_all(&cfg.out_dir).map_err(fraclr::Error::from)?;
    let path = cfg.out_dir.join("cone_scan.json");
    write_json(&path, &report)?;
    let worst = report.entries.iter().map(|e| e.spread).fold(0.0, f64::max);
    println!(
        "cone scan: {} ({} entries, worst spread {worst:.3e}) -> {}",
        if report.pass { "PASS" } else { "FAIL" },
        report.entries.len(),
        path.display()
    );
    Ok(report.pass)
}

pub fn dump_family(cfg: &Resolved, args: &DumpFamilyArgs) -> Result<bool, CliError> {
    let grid = cfg.grid()?;
    let fam = cfg.family(grid)?;
    let bands = write_family(&cfg.out_dir.join("family"), &fam)?;
    println!("{} band tables -> {}", bands.len(), cfg.out_dir.join("family").display());
    if let Some(text) = &args.family {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: FamilySpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            config(format!("family at `{at}`: {}", e.into_inner()))
        })?;
        let pair = generate(&spec, &fam).map_err(|e| config(format!("family: {e}")))?;
        let stem = spec.kind.label().replace('/', "_");
        let (f, _) = write_field(&cfg.out_dir.join(format!("{stem}_f")), &pair.f)?;
        let (g, _) = write_field(&cfg.out_dir.join(format!("{stem}_g")), &pair.g)?;
        println!("{spec} -> {}, {}", f.display(), g.display());
    }
    Ok(true)
}

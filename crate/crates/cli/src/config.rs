//! Run configuration: a JSON file whose keys mirror the long flags, with
//! flags taking precedence.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use fraclr::harness::SweepPlan;
use fraclr::{GridSpec, LpFamily};

use crate::CliError;

pub const THREADS_ENV: &str = "FRACLR_THREADS";
const DEFAULT_OUT_DIR: &str = "fraclr-out";

/// Flags shared by every command. Each mirrors a key of [`CliConfig`].
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON configuration file; flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory receiving every output file.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Points per axis.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Torus side length.
    #[arg(long, global = true)]
    pub period: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub j_min: Option<i32>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub j_max: Option<i32>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub period: Option<f64>,
    pub j_min: Option<i32>,
    pub j_max: Option<i32>,
    /// A plan file path (relative to the config file) or an inline plan.
    pub plan: Option<serde_json::Value>,
    pub out_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Configuration after merging file, environment and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dim: Option<usize>,
    pub n: Option<usize>,
    pub period: Option<f64>,
    pub j_min: Option<i32>,
    pub j_max: Option<i32>,
    pub plan: Option<PlanSource>,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone)]
pub enum PlanSource {
    File(PathBuf),
    Inline(serde_json::Value),
}

fn config_error(path: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {reason}"))
}

pub fn read_config(path: &Path) -> Result<CliConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_error(&path.display().to_string(), e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        config_error(&format!("{} at `{at}`", path.display()), e.into_inner())
    })
}

impl Resolved {
    pub fn new(flags: &GlobalArgs, plan_flag: Option<&Path>) -> Result<Self, CliError> {
        let (file, base) = match &flags.config {
            Some(p) => (read_config(p)?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
            None => (CliConfig::default(), PathBuf::new()),
        };
        let plan = match (plan_flag, file.plan) {
            (Some(p), _) => Some(PlanSource::File(p.to_path_buf())),
            (None, Some(serde_json::Value::String(p))) => Some(PlanSource::File(base.join(p))),
            (None, Some(v @ serde_json::Value::Object(_))) => Some(PlanSource::Inline(v)),
            (None, Some(_)) => return Err(config_error("plan", "expected a path or an object")),
            (None, None) => None,
        };
        let env_threads = match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|e| config_error(THREADS_ENV, format!("`{v}`: {e}")))?,
            ),
            Err(_) => None,
        };
        let threads = flags.threads.or(env_threads).or(file.threads);
        if threads == Some(0) {
            return Err(config_error("threads", "must be at least 1"));
        }
        Ok(Self {
            dim: flags.dim.or(file.dim),
            n: flags.n.or(file.n),
            period: flags.period.or(file.period),
            j_min: flags.j_min.or(file.j_min),
            j_max: flags.j_max.or(file.j_max),
            plan,
            out_dir: flags
                .out_dir
                .clone()
                .or(file.out_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
            threads,
        })
    }

    /// The configured grid; unset keys fall back to 1D, `N = 256`, `L = 2π`.
    pub fn grid(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(
            self.dim.unwrap_or(1),
            self.n.unwrap_or(256),
            self.period.unwrap_or(fraclr::grid::DEFAULT_PERIOD),
        )
        .map_err(|e| config_error("dim/n/period", e))
    }

    /// Family on `grid`; an unset upper index uses the largest resolvable band.
    pub fn family(&self, grid: GridSpec) -> Result<LpFamily, CliError> {
        let j_max = self.j_max.unwrap_or_else(|| LpFamily::max_band(&grid));
        LpFamily::new(grid, self.j_min.unwrap_or(0), j_max).map_err(|e| config_error("j_min/j_max", e))
    }

    /// The sweep plan with any grid keys of the configuration applied.
    pub fn plan(&self) -> Result<SweepPlan, CliError> {
        let value = match &self.plan {
            None => return Err(config_error("plan", "no plan given (use --plan or the `plan` key)")),
            Some(PlanSource::File(p)) => {
                let text = fs::read_to_string(p).map_err(|e| config_error(&format!("plan {}", p.display()), e))?;
                serde_json::from_str(&text).map_err(|e| config_error(&format!("plan {}", p.display()), e))?
            }
            Some(PlanSource::Inline(v)) => v.clone(),
        };
        let mut plan: SweepPlan = serde_path_to_error::deserialize(value).map_err(|e| {
            let at = e.path().to_string();
            config_error(&format!("plan at `{at}`"), e.into_inner())
        })?;
        if let Some(v) = self.dim {
            plan.dim = v;
        }
        if let Some(v) = self.n {
            plan.n = v;
        }
        if let Some(v) = self.period {
            plan.period = v;
        }
        if let Some(v) = self.j_min {
            plan.j_min = v;
        }
        if let Some(v) = self.j_max {
            plan.j_max = v;
        }
        plan.validate().map_err(|e| config_error("plan", e))?;
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"n": 128, "out_dir": "a", "plan": "p.json", "j_max": 4}"#).unwrap();
        let flags = GlobalArgs {
            config: Some(cfg),
            out_dir: Some("b".into()),
            j_max: Some(5),
            ..Default::default()
        };
        let r = Resolved::new(&flags, None).unwrap();
        assert_eq!(r.n, Some(128));
        assert_eq!(r.j_max, Some(5));
        assert_eq!(r.out_dir, PathBuf::from("b"));
        assert!(matches!(r.plan, Some(PlanSource::File(p)) if p == dir.path().join("p.json")));
    }

    #[test]
    fn unknown_and_mistyped_keys_name_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.json");
        fs::write(&cfg, r#"{"n": "many"}"#).unwrap();
        let err = read_config(&cfg).unwrap_err().to_string();
        assert!(err.contains("`n`"), "{err}");
        fs::write(&cfg, r#"{"grid_size": 3}"#).unwrap();
        assert!(read_config(&cfg).unwrap_err().to_string().contains("grid_size"));
    }

    #[test]
    fn inline_plan_errors_carry_a_path() {
        let mut plan: serde_json::Value = serde_json::from_str(fraclr::harness::DEFAULT_PLAN).unwrap();
        plan["holder"][0] = serde_json::json!([2.0, "x", 4.0]);
        let r = Resolved {
            dim: None,
            n: None,
            period: None,
            j_min: None,
            j_max: None,
            plan: Some(PlanSource::Inline(plan)),
            out_dir: PathBuf::new(),
            threads: None,
        };
        let err = r.plan().unwrap_err().to_string();
        assert!(err.contains("holder[0]"), "{err}");
    }
}

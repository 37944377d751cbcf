//! Field dumps: a JSON header `{"dim", "N", "L", "dtype", "layout"}` next to a
//! raw little-endian `f64` body with the same file stem.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::GridSpec;
use crate::lp::LpFamily;

const DTYPE: &str = "f64-le";
const LAYOUT: &str = "row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub dim: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub period: f64,
    pub dtype: String,
    pub layout: String,
}

impl DumpHeader {
    pub fn for_grid(grid: &GridSpec) -> Self {
        Self {
            dim: grid.dim(),
            n: grid.n(),
            period: grid.period(),
            dtype: DTYPE.into(),
            layout: LAYOUT.into(),
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        if self.dtype != DTYPE || self.layout != LAYOUT {
            return Err(Error::MalformedDump(format!(
                "unsupported dtype/layout {}/{}",
                self.dtype, self.layout
            )));
        }
        GridSpec::new(self.dim, self.n, self.period)
    }
}

/// `(header, body)` paths for a stem, a `.json` path or a `.bin` path.
pub fn dump_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

pub fn encode(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn write_field(path: &Path, f: &RealField) -> Result<(PathBuf, PathBuf)> {
    let (json, bin) = dump_paths(path);
    if let Some(dir) = json.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut header = serde_json::to_string_pretty(&DumpHeader::for_grid(f.grid()))?;
    header.push('\n');
    fs::write(&json, header)?;
    fs::write(&bin, encode(f.values()))?;
    Ok((json, bin))
}

pub fn read_field(path: &Path) -> Result<RealField> {
    let (json, bin) = dump_paths(path);
    let header: DumpHeader = serde_json::from_slice(&fs::read(&json)?)
        .map_err(|e| Error::MalformedDump(format!("{}: {e}", json.display())))?;
    let grid = header.grid()?;
    let body = fs::read(&bin)?;
    if body.len() != grid.len() * 8 {
        return Err(Error::MalformedDump(format!(
            "{}: {} bytes, header implies {}",
            bin.display(),
            body.len(),
            grid.len() * 8
        )));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    RealField::new(grid, values)
}

/// Writes every band multiplier of the closed partition as `band_{b}` under
/// `dir`. Values follow the transform's frequency order, not physical space.
pub fn write_family(dir: &Path, fam: &LpFamily) -> Result<Vec<PathBuf>> {
    let grid = *fam.grid();
    let mut out = Vec::new();
    for b in fam.band_indices() {
        let values = (0..grid.len()).map(|i| fam.band_value(b, i)).collect();
        let (json, _) = write_field(&dir.join(format!("band_{b}")), &RealField::new(grid, values)?)?;
        out.push(json);
    }
    Ok(out)
}

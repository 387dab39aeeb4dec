//! Run reports: one CSV row per run plus a JSON sidecar, both written
//! atomically (temp file then rename). All floats are printed with 17
//! significant digits so reruns diff cleanly.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// Quantities recorded for one experiment run.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub algorithm: String,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub oversample: usize,
    pub seed: u64,
    pub rel_error: f64,
    /// Multiply-adds counted by the kernels during the run.
    pub flops: u64,
    /// Random scalars drawn during the run.
    pub rng_scalars: u64,
    pub elapsed_s: f64,
}

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn join(v: &[usize]) -> String {
    v.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
}

impl RunReport {
    pub fn csv_header() -> &'static str {
        "algorithm,dims,ranks,oversample,seed,rel_error,flops,rng_scalars,elapsed_s"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            join(&self.dims),
            join(&self.ranks),
            self.oversample,
            self.seed,
            fmt17(self.rel_error),
            self.flops,
            self.rng_scalars,
            fmt17(self.elapsed_s)
        )
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.rel_error.is_finite() || !self.elapsed_s.is_finite() {
            return Err(format!(
                "non-finite report field: rel_error {}, elapsed_s {}",
                self.rel_error, self.elapsed_s
            ));
        }
        Ok(())
    }

    /// Writes the CSV at `path` and the JSON sidecar at `path` with a
    /// `.json` extension.
    pub fn write(&self, path: &Path) -> io::Result<()> {
        let csv = format!("{}\n{}\n", Self::csv_header(), self.csv_row());
        write_atomic(path, csv.as_bytes())?;
        let sidecar = path.with_extension("json");
        let json = serde_json::to_vec_pretty(self)?;
        write_atomic(&sidecar, &json)
    }
}

/// Write to a temp file in the destination directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

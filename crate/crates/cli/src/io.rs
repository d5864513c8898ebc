use std::fs::{File, OpenOptions};
use std::path::{Path, PathBuf};

use escfr_core::eval::MetricReport;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{input, CliResult};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read_bytes(path: &Path, what: &str) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| input(format!("cannot read {what} {}: {e}", path.display())))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let bytes = read_bytes(path, what)?;
    serde_json::from_slice(&bytes).map_err(|e| input(format!("invalid {what} {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// `data.csv` -> `data.spec.json`, next to the output.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.spec.json"))
}

pub const METRIC_HEADER: [&str; 6] = ["source", "split", "pehe", "sqrt_pehe", "auuc", "factual_rmse"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Append one metrics row, writing the header if the file is new or empty.
pub fn append_metrics(path: &Path, source: &str, m: &MetricReport) -> CliResult<()> {
    let fresh = std::fs::metadata(path).map(|md| md.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(METRIC_HEADER)?;
    }
    w.write_record([
        source.to_string(),
        m.split.to_string(),
        opt(m.pehe),
        opt(m.sqrt_pehe),
        m.auuc.to_string(),
        m.factual_rmse.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> CliResult<File> {
    File::create(path).map_err(|e| input(format!("cannot create {}: {e}", path.display())))
}

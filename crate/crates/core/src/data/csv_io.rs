use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::CausalDataset;
use crate::error::{Error, Result};

/// Header `x0,...,x{d-1},t,y[,mu0,mu1]`; floats in shortest round-trip form.
pub fn write_dataset_csv<W: Write>(data: &CausalDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.dim()).map(|k| format!("x{k}")).collect();
    header.push("t".into());
    header.push("y".into());
    let with_mu = data.mu0.is_some() && data.mu1.is_some();
    if with_mu {
        header.push("mu0".into());
        header.push("mu1".into());
    }
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..data.len() {
        record.clear();
        record.extend(data.x.row(i).iter().map(|v| v.to_string()));
        record.push(if data.t[i] { "1" } else { "0" }.to_string());
        record.push(data.y[i].to_string());
        if let (Some(m0), Some(m1)) = (&data.mu0, &data.mu1) {
            record.push(m0[i].to_string());
            record.push(m1[i].to_string());
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset_csv(data: &CausalDataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_dataset_csv(data, std::io::BufWriter::new(file))
}

pub fn load_dataset_csv(path: impl AsRef<Path>) -> Result<CausalDataset> {
    read_dataset_csv(std::fs::File::open(path)?)
}

pub fn read_dataset_csv<R: Read>(input: R) -> Result<CausalDataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: HashMap<String, usize> = reader
        .headers()?
        .iter()
        .enumerate()
        .map(|(i, h)| (h.trim().to_string(), i))
        .collect();
    let col = |name: &str| header.get(name).copied().ok_or_else(|| Error::Schema(name.into()));

    let mut x_cols = Vec::new();
    while let Some(&c) = header.get(&format!("x{}", x_cols.len())) {
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(Error::Schema("x0".into()));
    }
    let t_col = col("t")?;
    let y_col = col("y")?;
    let mu_cols = match (header.get("mu0"), header.get("mu1")) {
        (Some(&a), Some(&b)) => Some((a, b)),
        (None, None) => None,
        (Some(_), None) => return Err(Error::Schema("mu1".into())),
        (None, Some(_)) => return Err(Error::Schema("mu0".into())),
    };
    let names: HashMap<usize, String> = header.iter().map(|(k, v)| (*v, k.clone())).collect();

    let d = x_cols.len();
    let mut xs = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    let (mut mu0, mut mu1) = (Vec::new(), Vec::new());
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        let cell = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|e| Error::Parse {
                row: row + 1,
                column: names[&c].clone(),
                message: format!("`{raw}`: {e}"),
            })
        };
        for &c in &x_cols {
            xs.push(cell(c)?);
        }
        let tv = cell(t_col)?;
        t.push(match tv {
            v if v == 1.0 => true,
            v if v == 0.0 => false,
            v => {
                return Err(Error::Validation(format!(
                    "row {}: treatment must be 0 or 1, got {v}",
                    row + 1
                )))
            }
        });
        y.push(cell(y_col)?);
        if let Some((a, b)) = mu_cols {
            mu0.push(cell(a)?);
            mu1.push(cell(b)?);
        }
    }
    let n = y.len();
    let x = Array2::from_shape_vec((n, d), xs).expect("row-major covariate buffer");
    let (mu0, mu1) = match mu_cols {
        Some(_) => (Some(Array1::from(mu0)), Some(Array1::from(mu1))),
        None => (None, None),
    };
    CausalDataset::new(x, t, Array1::from(y), mu0, mu1)
}

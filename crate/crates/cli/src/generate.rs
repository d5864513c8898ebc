use std::path::PathBuf;

use clap::Args;
use escfr_core::data::{generate_synthetic, save_dataset_csv, GenSpec};

use crate::error::{input, CliResult};
use crate::io::{read_bytes, sidecar_path, write_json};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec (JSON with N, d, bias_strength, hidden_strength, noise_std, seed).
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &GenerateArgs) -> CliResult<()> {
    let bytes = read_bytes(&args.spec, "spec")?;
    let spec: GenSpec =
        serde_json::from_slice(&bytes).map_err(|e| input(format!("invalid spec {}: {e}", args.spec.display())))?;
    spec.validate()?;
    let data = generate_synthetic(&spec)?;
    save_dataset_csv(&data, &args.out)?;
    let sidecar = sidecar_path(&args.out);
    write_json(&sidecar, &spec)?;
    println!(
        "wrote {} rows ({} treated) to {} and {}",
        data.len(),
        data.n_treated(),
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

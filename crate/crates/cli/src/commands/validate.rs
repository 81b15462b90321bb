//! Index validation: loads the file and re-checks every structural invariant.

use std::path::PathBuf;

use clap::Args;
use plascan_core::PlIndex64;

use crate::cli_error::{CliError, CliResult};
use crate::pipeline::load_codebook;

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Also check the codebook hash against this codebook.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
}

pub fn run(args: &ValidateArgs) -> CliResult<()> {
    let index = PlIndex64::load(&args.index)?;
    index.validate()?;
    if let Some(path) = &args.codebook {
        let codebook = load_codebook(path)?;
        if codebook.reference_hash() != index.params.codebook_hash {
            return Err(CliError::invariant(
                "codebook hash does not match the index".to_string(),
            ));
        }
    }
    let mean_dim = index
        .segments
        .iter()
        .map(|s| (s.len() * s.dim()) as f64)
        .sum::<f64>()
        / index.positions() as f64;
    println!(
        "validate-index: ok — {} frames, {} positions, {} segments, {} blocks, mean dim {:.3}, window {}, method {}",
        index.codes.len(),
        index.positions(),
        index.segments.len(),
        index.blocks.len(),
        mean_dim,
        index.params.window,
        index.params.method.name(),
    );
    Ok(())
}

//! Codebook training from one or more recordings.

use std::path::PathBuf;

use clap::Args;
use plascan_core::vq::{train_lbg_with_trace, LbgParams};

use crate::cli_error::{CliError, CliResult};
use crate::config::Config;
use crate::pipeline::features_from_wav;

#[derive(Debug, Args)]
pub struct BuildCodebookArgs {
    /// Training recordings (PCM16 WAV). Features are pooled.
    #[arg(long, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Codebook size (power of two).
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &BuildCodebookArgs, config: &Config) -> CliResult<()> {
    let filterbank = config.filterbank.to_core();
    let mut pooled = None;
    for path in &args.input {
        let features = features_from_wav(path, &filterbank)?;
        match &mut pooled {
            None => pooled = Some(features),
            Some(all) => all
                .append(&features)
                .map_err(|e| CliError::data(e.to_string()))?,
        }
    }
    let features = pooled.ok_or_else(|| CliError::usage("no input files"))?;

    let size = args.size.unwrap_or(config.vq.size);
    let params = LbgParams {
        epsilon: config.vq.epsilon,
        tol: config.vq.tol,
        max_iters: config.vq.max_iters,
    };
    let (codebook, trace) = train_lbg_with_trace(&features, size, params)?;
    codebook.save(&args.out)?;
    println!(
        "build-codebook: {} centroids of dim {} from {} frames, final distortion {:.6e}, hash {:016x}",
        codebook.len(),
        codebook.dim(),
        features.len(),
        trace.last().copied().unwrap_or(0.0),
        codebook.reference_hash(),
    );
    Ok(())
}

//! Index construction from a stored recording.

use std::path::PathBuf;

use clap::Args;
use plascan_core::dynseg::Method;
use plascan_core::index_io::{build_index, BuildStats, IndexParams};

use crate::cli_error::{CliError, CliResult};
use crate::config::Config;
use crate::pipeline::{codes_from_wav, load_codebook};

#[derive(Debug, Args)]
pub struct BuildIndexArgs {
    /// Stored recording (PCM16 WAV).
    #[arg(long)]
    pub input: PathBuf,
    /// Codebook the stream is quantized with.
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Window length W in frames (defaults to [index].window_frames).
    #[arg(long)]
    pub window_frames: Option<u32>,
    /// Number of segments M.
    #[arg(long)]
    pub segments: Option<usize>,
    /// Contribution threshold.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Shiftable-range half-width for dynamic segmentation.
    #[arg(long)]
    pub delta: Option<usize>,
    /// Block length a for feature sampling.
    #[arg(long)]
    pub block: Option<usize>,
    /// Segmentation method: none|local|coarse|dp.
    #[arg(long)]
    pub dynseg: Option<String>,
    /// Where to write build stats JSON (stdout when omitted).
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

pub fn stats_json(stats: &BuildStats) -> serde_json::Value {
    serde_json::json!({
        "positions": stats.positions,
        "segments": stats.segments,
        "mean_dim": stats.mean_dim,
        "equi_objective": stats.equi_objective,
        "probe_evals": stats.probe_evals,
        "table_bytes": stats.table_bytes,
        "boundary_audits": stats
            .boundary_audits
            .iter()
            .map(|a| {
                serde_json::json!({
                    "k_est": a.k_est,
                    "step2_points": a.step2_points,
                    "evals": a.evals,
                    "delta_eff": a.delta_eff,
                })
            })
            .collect::<Vec<_>>(),
    })
}

pub fn run(args: &BuildIndexArgs, config: &Config) -> CliResult<()> {
    let filterbank = config.filterbank.to_core();
    let codebook = load_codebook(&args.codebook)?;
    let codes = codes_from_wav(&args.input, &filterbank, &codebook)?;

    let method = match &args.dynseg {
        Some(name) => Method::parse(name).map_err(|e| CliError::usage(e.to_string()))?,
        None => Method::parse(&config.index.dynseg).map_err(|e| CliError::usage(e.to_string()))?,
    };
    let params = IndexParams {
        window: args.window_frames.unwrap_or(config.index.window_frames),
        bins: codebook.len(),
        segments: args.segments.unwrap_or(config.index.segments),
        sigma: args.sigma.unwrap_or(config.index.sigma),
        block_len: args.block.unwrap_or(config.index.block),
        delta: args.delta.unwrap_or(config.index.delta),
        method,
        codebook_hash: codebook.reference_hash(),
    };

    let (index, stats) = build_index::<f64>(codes, params)?;
    index.save(&args.out)?;

    let json = serde_json::to_string_pretty(&stats_json(&stats))
        .map_err(|e| CliError::data(e.to_string()))?;
    match &args.stats {
        Some(path) => std::fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    println!(
        "build-index: {} positions, {} segments (method {}), mean dim {:.3}, {} blocks -> {}",
        stats.positions,
        index.segments.len(),
        method.name(),
        stats.mean_dim,
        index.blocks.len(),
        args.out.display(),
    );
    Ok(())
}

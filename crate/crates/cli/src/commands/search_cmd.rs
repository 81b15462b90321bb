//! Query search against a built index, in any of the three engines.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use plascan_core::search::proposed_search;
use plascan_core::tas::{brute_force_search, tas_search_report, Match, SearchParams};
use plascan_core::PlIndex64;

use crate::cli_error::{CliError, CliResult};
use crate::config::Config;
use crate::pipeline::{codes_from_wav, load_codebook};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Proposed,
    Tas,
    Bruteforce,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Query recording (PCM16 WAV).
    #[arg(long)]
    pub query: PathBuf,
    /// Codebook used at index build time (hash-checked).
    #[arg(long)]
    pub codebook: PathBuf,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, value_enum, default_value_t = Mode::Proposed)]
    pub mode: Mode,
    /// Write matches and counters as JSON here.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn matches_json(matches: &[Match<f64>], hop_s: f64) -> Vec<serde_json::Value> {
    matches
        .iter()
        .map(|m| {
            serde_json::json!({
                "position_frames": m.position,
                "position_seconds": m.position as f64 * hop_s,
                "distance": m.distance,
            })
        })
        .collect()
}

pub fn run(args: &SearchArgs, config: &Config) -> CliResult<()> {
    let index = PlIndex64::load(&args.index)?;
    let codebook = load_codebook(&args.codebook)?;
    if codebook.reference_hash() != index.params.codebook_hash {
        return Err(CliError::data(format!(
            "codebook hash {:016x} does not match the index's {:016x}",
            codebook.reference_hash(),
            index.params.codebook_hash
        )));
    }
    if codebook.len() != index.params.bins {
        return Err(CliError::data("codebook size does not match the index"));
    }

    let filterbank = config.filterbank.to_core();
    let query = codes_from_wav(&args.query, &filterbank, &codebook)?;
    let theta = args.theta.unwrap_or(config.search.theta);
    let hop_s = config.filterbank.hop_ms / 1000.0;

    let started = std::time::Instant::now();
    let (matches, counters) = match args.mode {
        Mode::Proposed => {
            let report = proposed_search(&index, &query, theta)?;
            let c = report.counters;
            (
                report.matches,
                serde_json::json!({
                    "compressed_evals": c.compressed_evals,
                    "full_distance_evals": c.full_distance_evals,
                    "block_bound_evals": c.block_bound_evals,
                    "block_skips": c.block_skips,
                    "frames_skipped": c.frames_skipped,
                    "positions_visited": c.positions_visited,
                }),
            )
        }
        Mode::Tas => {
            let params = SearchParams::new(theta, index.params.window)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let (matches, stats) = tas_search_report(&index.codes, &query, &params)?;
            (
                matches,
                serde_json::json!({
                    "full_distance_evals": stats.distance_evals,
                    "positions_visited": stats.positions_visited,
                }),
            )
        }
        Mode::Bruteforce => {
            let params = SearchParams::new(theta, index.params.window)
                .map_err(|e| CliError::usage(e.to_string()))?;
            let matches = brute_force_search(&index.codes, &query, &params)?;
            let positions = index.positions();
            (
                matches,
                serde_json::json!({
                    "full_distance_evals": positions,
                    "positions_visited": positions,
                }),
            )
        }
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let mode_name = match args.mode {
        Mode::Proposed => "proposed",
        Mode::Tas => "tas",
        Mode::Bruteforce => "bruteforce",
    };
    println!(
        "search[{mode_name}]: {} matches at theta {theta} in {elapsed_ms:.1} ms",
        matches.len()
    );
    for m in matches.iter().take(20) {
        println!(
            "  frame {:>8}  t = {:>9.2}s  d = {:.3}",
            m.position,
            m.position as f64 * hop_s,
            m.distance
        );
    }
    if matches.len() > 20 {
        println!("  ... {} more", matches.len() - 20);
    }

    if let Some(path) = &args.json {
        let doc = serde_json::json!({
            "mode": mode_name,
            "theta": theta,
            "window_frames": index.params.window,
            "hop_ms": config.filterbank.hop_ms,
            "matches": matches_json(&matches, hop_s),
            "counters": counters,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::data(e.to_string()))?;
        std::fs::write(path, text + "\n")?;
    }
    Ok(())
}

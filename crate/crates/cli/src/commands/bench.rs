//! Benchmark harness: runs every engine over a query set, checks that the
//! match sets agree, and emits counters and wall times as CSV.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use plascan_core::search::proposed_search;
use plascan_core::tas::{brute_force_search, tas_search_report, Match, SearchParams};
use plascan_core::vq::CodewordSeq;
use plascan_core::PlIndex64;

use crate::cli_error::{CliError, CliResult};
use crate::config::Config;
use crate::pipeline::{codes_from_wav, load_codebook};

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub codebook: PathBuf,
    /// Query recordings.
    #[arg(long, required = true, num_args = 1..)]
    pub queries: Vec<PathBuf>,
    /// Thresholds to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    pub thetas: Vec<f64>,
    /// Per-run counters and times, CSV.
    #[arg(long)]
    pub csv: PathBuf,
    /// Aggregate summary JSON (stdout when omitted).
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn assert_same_matches(
    context: &str,
    reference: &[Match<f64>],
    candidate: &[Match<f64>],
) -> CliResult<()> {
    let positions_match = reference.len() == candidate.len()
        && reference
            .iter()
            .zip(candidate)
            .all(|(a, b)| a.position == b.position);
    if !positions_match {
        return Err(CliError::invariant(format!(
            "{context}: match sets disagree ({} vs {} matches)",
            reference.len(),
            candidate.len()
        )));
    }
    for (a, b) in reference.iter().zip(candidate) {
        let tolerance = 1e-6 * a.distance.max(1.0);
        if (a.distance - b.distance).abs() > tolerance {
            return Err(CliError::invariant(format!(
                "{context}: distances at frame {} disagree: {} vs {}",
                a.position, a.distance, b.distance
            )));
        }
    }
    Ok(())
}

pub fn run(args: &BenchArgs, config: &Config) -> CliResult<()> {
    let index = PlIndex64::load(&args.index)?;
    let codebook = load_codebook(&args.codebook)?;
    if codebook.reference_hash() != index.params.codebook_hash {
        return Err(CliError::data("codebook hash does not match the index"));
    }
    let filterbank = config.filterbank.to_core();

    let query_codes: Vec<(String, CodewordSeq)> = args
        .queries
        .iter()
        .map(|path| {
            let name = path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            codes_from_wav(path, &filterbank, &codebook).map(|codes| (name, codes))
        })
        .collect::<CliResult<_>>()?;

    let mut csv = String::from(
        "query,theta,method,matches,full_distance_evals,compressed_evals,block_bound_evals,block_skips,positions_visited,frames_skipped,wall_ms\n",
    );
    let (mut brute_ms, mut tas_ms, mut proposed_ms) = (0.0f64, 0.0f64, 0.0f64);
    let (mut tas_full_evals, mut proposed_full_evals) = (0u64, 0u64);
    let positions = index.positions();

    for (name, codes) in &query_codes {
        for &theta in &args.thetas {
            let params = SearchParams::new(theta, index.params.window)
                .map_err(|e| CliError::usage(e.to_string()))?;

            let t0 = Instant::now();
            let brute = brute_force_search(&index.codes, codes, &params)?;
            let brute_elapsed = t0.elapsed().as_secs_f64() * 1e3;

            let t0 = Instant::now();
            let (tas, tas_stats) = tas_search_report(&index.codes, codes, &params)?;
            let tas_elapsed = t0.elapsed().as_secs_f64() * 1e3;

            let t0 = Instant::now();
            let report = proposed_search(&index, codes, theta)?;
            let proposed_elapsed = t0.elapsed().as_secs_f64() * 1e3;

            assert_same_matches(&format!("{name} theta {theta} (tas)"), &brute, &tas)?;
            assert_same_matches(
                &format!("{name} theta {theta} (proposed)"),
                &brute,
                &report.matches,
            )?;

            brute_ms += brute_elapsed;
            tas_ms += tas_elapsed;
            proposed_ms += proposed_elapsed;
            tas_full_evals += tas_stats.distance_evals as u64;
            proposed_full_evals += report.counters.full_distance_evals as u64;

            csv.push_str(&format!(
                "{name},{theta},bruteforce,{},{positions},0,0,0,{positions},0,{brute_elapsed:.3}\n",
                brute.len()
            ));
            csv.push_str(&format!(
                "{name},{theta},tas,{},{},0,0,0,{},{},{tas_elapsed:.3}\n",
                tas.len(),
                tas_stats.distance_evals,
                tas_stats.positions_visited,
                positions - tas_stats.positions_visited,
            ));
            let c = report.counters;
            csv.push_str(&format!(
                "{name},{theta},proposed,{},{},{},{},{},{},{},{proposed_elapsed:.3}\n",
                report.matches.len(),
                c.full_distance_evals,
                c.compressed_evals,
                c.block_bound_evals,
                c.block_skips,
                c.positions_visited,
                c.frames_skipped,
            ));
        }
    }

    std::fs::write(&args.csv, &csv)?;

    let speedup_vs_tas = tas_ms / proposed_ms.max(1e-9);
    let speedup_vs_brute = brute_ms / proposed_ms.max(1e-9);
    let summary = serde_json::json!({
        "runs": query_codes.len() * args.thetas.len(),
        "brute_ms": brute_ms,
        "tas_ms": tas_ms,
        "proposed_ms": proposed_ms,
        "speedup_factor": speedup_vs_tas,
        "speedup_vs_bruteforce": speedup_vs_brute,
        "tas_full_distance_evals": tas_full_evals,
        "proposed_full_distance_evals": proposed_full_evals,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::data(e.to_string()))?;
    match &args.json {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    println!(
        "bench: {} runs, all match sets agree; speed-up factor {speedup_vs_tas:.2} (tas/proposed)",
        query_codes.len() * args.thetas.len(),
    );
    Ok(())
}

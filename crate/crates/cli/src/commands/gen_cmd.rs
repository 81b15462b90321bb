//! Synthetic corpus generation: a stored stream with planted query clips and
//! a ground-truth listing.

use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use plascan_core::synth::{mix_at_snr, render_regime_audio, to_pcm16, Texture};
use plascan_core::wav::write_wav_mono16;

use crate::cli_error::{CliError, CliResult};
use crate::config::Config;

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory for stored.wav, query_XX.wav and truth.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Stored stream duration in seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub duration_s: f64,
    /// Number of distinct query clips (each planted once).
    #[arg(long, default_value_t = 20)]
    pub queries: usize,
    /// Query clip duration in seconds.
    #[arg(long, default_value_t = 15.0)]
    pub query_s: f64,
    #[arg(long, default_value_t = 32000)]
    pub sample_rate: u32,
    /// Plant copies mixed with noise at this SNR instead of exact copies.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Silence written before each exact plant, seconds.
    #[arg(long, default_value_t = 1.5)]
    pub guard_s: f64,
}

#[derive(Serialize)]
struct TruthQuery {
    file: String,
    frames: usize,
}

#[derive(Serialize)]
struct TruthOccurrence {
    query: usize,
    position_frame: usize,
    position_seconds: f64,
    snr_db: Option<f64>,
}

#[derive(Serialize)]
struct Truth {
    seed: u64,
    sample_rate: u32,
    hop_ms: f64,
    window_ms: f64,
    stored: String,
    queries: Vec<TruthQuery>,
    occurrences: Vec<TruthOccurrence>,
}

pub fn run(args: &GenArgs, config: &Config, seed: u64) -> CliResult<()> {
    let fs = args.sample_rate;
    let hop = ((config.filterbank.hop_ms / 1000.0) * f64::from(fs)).round() as usize;
    let win = ((config.filterbank.window_ms / 1000.0) * f64::from(fs)).round() as usize;
    if hop == 0 || win < hop {
        return Err(CliError::usage("hop/window configuration invalid"));
    }

    // A query of W frames spans (W-1)*hop + win samples.
    let query_frames = (args.query_s * 1000.0 / config.filterbank.hop_ms).round() as usize;
    if query_frames == 0 {
        return Err(CliError::usage("query too short for one frame"));
    }
    let query_samples = (query_frames - 1) * hop + win;
    let total_samples = (args.duration_s * f64::from(fs)).round() as usize;
    let guard_samples = (args.guard_s * f64::from(fs)).round() as usize;
    let margin = 2 * fs as usize;

    if args.queries == 0 {
        return Err(CliError::usage("need at least one query"));
    }
    let stratum = total_samples / args.queries;
    if stratum < query_samples + guard_samples + 2 * margin {
        return Err(CliError::usage(
            "stored stream too short for the requested plants; raise --duration-s or cut --queries",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Query clips first, so their RNG draws are independent of the stream.
    let clips: Vec<Vec<f64>> = (0..args.queries)
        .map(|_| Texture::draw(&mut rng).render(&mut rng, query_samples, fs))
        .collect();

    let mut stored = render_regime_audio(&mut rng, total_samples, 30 * fs as usize, fs);

    std::fs::create_dir_all(&args.out_dir)?;
    let mut truth = Truth {
        seed,
        sample_rate: fs,
        hop_ms: config.filterbank.hop_ms,
        window_ms: config.filterbank.window_ms,
        stored: "stored.wav".into(),
        queries: Vec::new(),
        occurrences: Vec::new(),
    };

    for (q, clip) in clips.iter().enumerate() {
        // One plant per stratum, hop-aligned, clear of the stratum edges.
        let lo = q * stratum + margin + guard_samples;
        let hi = (q + 1) * stratum - margin - query_samples;
        let slots = (hi - lo) / hop;
        let offset = {
            use rand::RngExt;
            rng.random_range(0..slots.max(1))
        };
        let at = ((lo + offset * hop) / hop) * hop;

        match args.snr_db {
            None => {
                stored[at - guard_samples..at].fill(0.0);
                stored[at..at + query_samples].copy_from_slice(clip);
            }
            Some(snr) => {
                let noisy = mix_at_snr(&mut rng, clip, snr);
                stored[at..at + query_samples].copy_from_slice(&noisy);
            }
        }

        let file = format!("query_{q:02}.wav");
        write_wav_mono16(&args.out_dir.join(&file), fs, &to_pcm16(clip))?;
        truth.queries.push(TruthQuery {
            file,
            frames: query_frames,
        });
        truth.occurrences.push(TruthOccurrence {
            query: q,
            position_frame: at / hop,
            position_seconds: at as f64 / f64::from(fs),
            snr_db: args.snr_db,
        });
    }

    write_wav_mono16(&args.out_dir.join("stored.wav"), fs, &to_pcm16(&stored))?;
    let truth_json = serde_json::to_string_pretty(&truth)
        .map_err(|e| CliError::data(format!("truth serialization: {e}")))?;
    std::fs::write(args.out_dir.join("truth.json"), truth_json + "\n")?;

    println!(
        "gen: {}s stored stream, {} queries of {} frames, plants {}",
        args.duration_s,
        args.queries,
        query_frames,
        match args.snr_db {
            None => "exact".to_string(),
            Some(snr) => format!("at {snr} dB SNR"),
        }
    );
    Ok(())
}

//! Shared fixtures for the integration suites.

use plascan_core::synth::{plant_codes, plant_codes_noisy, regime_codeword_stream, RegimeStreamSpec};
use plascan_core::vq::CodewordSeq;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(rng: &mut ChaCha8Rng, bins: u16, palette: usize, mean_len: usize, jitter: f64, len: usize) -> CodewordSeq {
    let spec = RegimeStreamSpec {
        bins,
        palette,
        mean_regime_len: mean_len,
        jitter,
    };
    regime_codeword_stream(rng, &spec, len)
}

/// Value below which a fraction `q` of the trace falls.
pub fn quantile(trace: &[f64], q: f64) -> f64 {
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let at = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[at]
}

/// One randomized search instance: a stored stream with a query that may be
/// planted (exactly or noisily) one or more times.
pub struct Instance {
    pub stored: CodewordSeq,
    pub query: CodewordSeq,
    pub window: u32,
    pub bins: usize,
}

pub fn random_instance(rng: &mut ChaCha8Rng, frames: usize, window: u32) -> Instance {
    let bins = *[16u16, 24, 32, 48].choose(rng).unwrap();
    let palette = rng.random_range(4..9);
    let mean_len = rng.random_range(2000..6000);
    let jitter = rng.random_range(0.005..0.03);
    let mut stored = stream(rng, bins, palette, mean_len, jitter, frames).as_slice().to_vec();

    let w = window as usize;
    // Query: sometimes a slice of the stream, sometimes independent texture;
    // may exceed the window (the engine uses the first W frames).
    let query_len = if rng.random_bool(0.3) { w + rng.random_range(0..w) } else { w };
    let query: Vec<u16> = if rng.random_bool(0.5) {
        let at = rng.random_range(0..frames - query_len);
        stored[at..at + query_len].to_vec()
    } else {
        stream(rng, bins, 4, query_len, 0.01, query_len).as_slice().to_vec()
    };

    // Plant up to three copies of the query's first W frames.
    for _ in 0..rng.random_range(0..4) {
        let at = rng.random_range(0..frames - w);
        if rng.random_bool(0.5) {
            plant_codes(&mut stored, &query[..w], at);
        } else {
            plant_codes_noisy(rng, &mut stored, &query[..w], at, 0.02, bins);
        }
    }

    Instance {
        stored: CodewordSeq::new(stored),
        query: CodewordSeq::new(query),
        window,
        bins: bins as usize,
    }
}

/// Pass/fail reporting: prints the verdict line before panicking so every
/// criterion leaves exactly one line in the log.
pub fn check(criterion: &str, ok: bool, detail: &str) {
    if ok {
        println!("[{criterion}] PASS — {detail}");
    } else {
        println!("[{criterion}] FAIL — {detail}");
        panic!("{criterion} failed: {detail}");
    }
}

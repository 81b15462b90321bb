//! Deterministic synthetic fixtures: regime-switching codeword streams for
//! the desk-scale benchmarks, and audio textures for end-to-end runs.
//!
//! Everything is a pure function of the supplied RNG, so a fixed seed gives
//! byte-identical output across runs and platforms.

use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use crate::vq::CodewordSeq;

/// Parameters of a regime-switching codeword stream.
///
/// Within one regime, codes are drawn from a small palette with fixed
/// weights; regimes switch after a random duration. Small palettes produce
/// locally correlated histogram trajectories, which is the structure the
/// trajectory compression exploits.
#[derive(Debug, Clone, Copy)]
pub struct RegimeStreamSpec {
    /// Total codeword alphabet size `n`.
    pub bins: u16,
    /// Codes available inside one regime.
    pub palette: usize,
    /// Mean regime duration in frames.
    pub mean_regime_len: usize,
    /// Probability of an off-palette code at any frame.
    pub jitter: f64,
}

impl Default for RegimeStreamSpec {
    fn default() -> Self {
        RegimeStreamSpec {
            bins: 128,
            palette: 6,
            mean_regime_len: 4000,
            jitter: 0.02,
        }
    }
}

/// Draws a regime-switching codeword stream of `len` frames.
pub fn regime_codeword_stream<R: Rng>(rng: &mut R, spec: &RegimeStreamSpec, len: usize) -> CodewordSeq {
    assert!(spec.palette >= 1 && spec.bins >= 1);
    let mut codes = Vec::with_capacity(len);
    let mut palette: Vec<u16> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    let mut remaining = 0usize;
    for _ in 0..len {
        if remaining == 0 {
            // Regime duration is geometric-ish around the mean.
            remaining = 1 + rng.random_range(spec.mean_regime_len / 2..=spec.mean_regime_len * 3 / 2);
            palette = (0..spec.palette)
                .map(|_| rng.random_range(0..spec.bins))
                .collect();
            weights = (0..spec.palette).map(|_| rng.random_range(0.2..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
        }
        remaining -= 1;
        if rng.random_bool(spec.jitter) {
            codes.push(rng.random_range(0..spec.bins));
            continue;
        }
        let mut pick: f64 = rng.random_range(0.0..1.0);
        let mut chosen = palette[spec.palette - 1];
        for (w, &c) in weights.iter().zip(&palette) {
            if pick < *w {
                chosen = c;
                break;
            }
            pick -= w;
        }
        codes.push(chosen);
    }
    CodewordSeq::new(codes)
}

/// Parameters of a drifting codeword stream: within each regime the
/// categorical weights themselves follow a slow random walk, so the
/// histogram trajectory is a smooth curve — low-rank over short spans,
/// accumulating directions over long ones. This is the structure real
/// audio produces and the trajectory compression is designed around.
#[derive(Debug, Clone, Copy)]
pub struct DriftStreamSpec {
    pub bins: u16,
    /// Distinct codes active inside one regime.
    pub palette: usize,
    /// Mean regime duration in frames.
    pub mean_regime_len: usize,
    /// Per-frame random-walk step on the palette log-weights.
    pub drift: f64,
    /// Probability of an off-palette code at any frame.
    pub jitter: f64,
}

impl Default for DriftStreamSpec {
    fn default() -> Self {
        DriftStreamSpec {
            bins: 128,
            palette: 6,
            mean_regime_len: 4000,
            drift: 0.02,
            jitter: 0.01,
        }
    }
}

/// Draws a drifting codeword stream of `len` frames.
pub fn drifting_codeword_stream<R: Rng>(
    rng: &mut R,
    spec: &DriftStreamSpec,
    len: usize,
) -> CodewordSeq {
    assert!(spec.palette >= 1 && (spec.palette as u64) <= u64::from(spec.bins));
    let mut codes = Vec::with_capacity(len);
    let mut palette: Vec<u16> = Vec::new();
    let mut logits: Vec<f64> = Vec::new();
    let mut remaining = 0usize;
    for _ in 0..len {
        if remaining == 0 {
            remaining =
                1 + rng.random_range(spec.mean_regime_len / 2..=spec.mean_regime_len * 3 / 2);
            palette.clear();
            while palette.len() < spec.palette {
                let c = rng.random_range(0..spec.bins);
                if !palette.contains(&c) {
                    palette.push(c);
                }
            }
            logits = (0..spec.palette).map(|_| rng.random_range(-0.5..0.5)).collect();
        }
        remaining -= 1;
        for l in &mut logits {
            let step: f64 = StandardNormal.sample(rng);
            *l += spec.drift * step;
        }
        if rng.random_bool(spec.jitter) {
            codes.push(rng.random_range(0..spec.bins));
            continue;
        }
        let max_logit = logits.iter().cloned().fold(f64::MIN, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max_logit).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut pick: f64 = rng.random_range(0.0..total);
        let mut chosen = palette[spec.palette - 1];
        for (w, &c) in weights.iter().zip(&palette) {
            if pick < *w {
                chosen = c;
                break;
            }
            pick -= w;
        }
        codes.push(chosen);
    }
    CodewordSeq::new(codes)
}

/// Overwrites `stored[at..at + clip.len())` with `clip`.
pub fn plant_codes(stored: &mut [u16], clip: &[u16], at: usize) {
    stored[at..at + clip.len()].copy_from_slice(clip);
}

/// Plants a copy whose frames are independently re-randomized with
/// probability `flip_prob` — a codeword-level stand-in for additive noise.
pub fn plant_codes_noisy<R: Rng>(
    rng: &mut R,
    stored: &mut [u16],
    clip: &[u16],
    at: usize,
    flip_prob: f64,
    bins: u16,
) {
    for (i, &c) in clip.iter().enumerate() {
        stored[at + i] = if rng.random_bool(flip_prob) {
            rng.random_range(0..bins)
        } else {
            c
        };
    }
}

/// One audio texture: a handful of partials with slow amplitude modulation
/// plus a noise floor.
#[derive(Debug, Clone)]
pub struct Texture {
    partials: Vec<(f64, f64, f64, f64)>, // (freq, amp, lfo_freq, phase)
    noise_amp: f64,
}

impl Texture {
    /// Draws a random texture; frequencies log-uniform in `[120, 6000]` Hz.
    pub fn draw<R: Rng>(rng: &mut R) -> Self {
        let count = rng.random_range(3..=5);
        let partials = (0..count)
            .map(|_| {
                let log_f = rng.random_range(120f64.ln()..6000f64.ln());
                (
                    log_f.exp(),
                    rng.random_range(0.1..0.3),
                    rng.random_range(0.1..0.8),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            })
            .collect();
        Texture {
            partials,
            noise_amp: rng.random_range(0.005..0.02),
        }
    }

    /// Renders `n` samples at `sample_rate`, peak well inside [-1, 1].
    pub fn render<R: Rng>(&self, rng: &mut R, n: usize, sample_rate: u32) -> Vec<f64> {
        let fs = f64::from(sample_rate);
        (0..n)
            .map(|i| {
                let t = i as f64 / fs;
                let mut s = 0.0;
                for &(freq, amp, lfo, phase) in &self.partials {
                    let env = 0.6 + 0.4 * (std::f64::consts::TAU * lfo * t + phase).sin();
                    s += amp * env * (std::f64::consts::TAU * freq * t).sin();
                }
                let noise: f64 = StandardNormal.sample(rng);
                s + self.noise_amp * noise
            })
            .collect()
    }
}

/// Renders a stream of random textures, one per regime.
pub fn render_regime_audio<R: Rng>(
    rng: &mut R,
    total_samples: usize,
    regime_samples: usize,
    sample_rate: u32,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(total_samples);
    while out.len() < total_samples {
        let texture = Texture::draw(rng);
        let n = regime_samples.min(total_samples - out.len());
        out.extend(texture.render(rng, n, sample_rate));
    }
    out
}

/// Mixes `noise` into `clip` at the requested signal-to-noise ratio.
pub fn mix_at_snr<R: Rng>(rng: &mut R, clip: &[f64], snr_db: f64) -> Vec<f64> {
    let signal_power: f64 = clip.iter().map(|s| s * s).sum::<f64>() / clip.len().max(1) as f64;
    let noise_power = signal_power / 10f64.powf(snr_db / 10.0);
    let scale = noise_power.sqrt();
    clip.iter()
        .map(|s| {
            let g: f64 = StandardNormal.sample(rng);
            s + scale * g
        })
        .collect()
}

/// Clamps float samples to 16-bit PCM.
pub fn to_pcm16(samples: &[f64]) -> Vec<i16> {
    samples
        .iter()
        .map(|&s| (s.clamp(-1.0, 1.0) * 32767.0).round() as i16)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    #[test]
    fn stream_is_deterministic_given_seed() {
        let spec = RegimeStreamSpec {
            bins: 32,
            palette: 4,
            mean_regime_len: 200,
            jitter: 0.05,
        };
        let a = regime_codeword_stream(&mut StdRng::seed_from_u64(99), &spec, 5000);
        let b = regime_codeword_stream(&mut StdRng::seed_from_u64(99), &spec, 5000);
        assert_eq!(a, b);
        assert!(a.as_slice().iter().all(|&c| c < 32));
    }

    #[test]
    fn planted_copy_is_verbatim() {
        let mut stored = vec![0u16; 100];
        let clip = [7u16, 8, 9, 7];
        plant_codes(&mut stored, &clip, 40);
        assert_eq!(&stored[40..44], &clip);
    }

    #[test]
    fn snr_mix_scales_noise() {
        let mut rng = StdRng::seed_from_u64(4);
        let clip: Vec<f64> = (0..8000)
            .map(|i| 0.5 * (std::f64::consts::TAU * 440.0 * i as f64 / 32000.0).sin())
            .collect();
        let noisy = mix_at_snr(&mut rng, &clip, 20.0);
        let noise_power: f64 = noisy
            .iter()
            .zip(&clip)
            .map(|(n, c)| (n - c) * (n - c))
            .sum::<f64>()
            / clip.len() as f64;
        let signal_power: f64 = clip.iter().map(|s| s * s).sum::<f64>() / clip.len() as f64;
        let snr = 10.0 * (signal_power / noise_power).log10();
        assert!((snr - 20.0).abs() < 1.0, "snr {snr}");
    }

    #[test]
    fn rendered_audio_is_bounded_and_deterministic() {
        let a = render_regime_audio(&mut StdRng::seed_from_u64(5), 16000, 8000, 32000);
        let b = render_regime_audio(&mut StdRng::seed_from_u64(5), 16000, 8000, 32000);
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.abs() < 2.0));
        assert_eq!(to_pcm16(&a), to_pcm16(&b));
    }
}

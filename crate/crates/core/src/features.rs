//! Base feature extraction: band-pass filterbank energies per frame.
//!
//! The stored and query signals are reduced to one energy vector per frame: a
//! bank of second-order IIR band-pass filters runs continuously over the
//! signal and each frame takes the mean squared output of every channel over
//! its analysis window. Channel centers are spaced geometrically between
//! `f_low` and `f_high`; the bandwidth of each channel is `center / q`.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::wav;

/// Mono PCM audio with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct PcmSignal<F: Real> {
    samples: Vec<F>,
    sample_rate: u32,
}

impl<F: Real> PcmSignal<F> {
    pub fn new(samples: Vec<F>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if samples.iter().any(|s| !Float::is_finite(*s)) {
            return Err(Error::config("samples must be finite"));
        }
        Ok(PcmSignal {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[F] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Decodes a PCM16 RIFF/WAVE file, downmixing stereo by averaging.
pub fn decode_wav<F: Real>(path: &std::path::Path) -> Result<PcmSignal<F>> {
    let raw = wav::read_wav(path)?;
    if raw.channels > 2 {
        return Err(Error::decode(format!(
            "{} channels unsupported (mono or stereo only)",
            raw.channels
        )));
    }
    let scale = F::from_f64_lossy(1.0 / 32768.0);
    let samples: Vec<F> = if raw.channels == 1 {
        raw.samples
            .iter()
            .map(|&s| F::from_f64_lossy(f64::from(s)) * scale)
            .collect()
    } else {
        raw.samples
            .chunks_exact(2)
            .map(|lr| {
                let sum = f64::from(lr[0]) + f64::from(lr[1]);
                F::from_f64_lossy(sum / 2.0) * scale
            })
            .collect()
    };
    PcmSignal::new(samples, raw.sample_rate)
}

/// Filterbank parameters. Defaults follow the working configuration of the
/// pipeline: 7 channels, Q = 10, 100 Hz – 6.4 kHz, 10 ms hop, 60 ms window.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterbankConfig<F: Real> {
    pub channels: usize,
    pub q: F,
    pub f_low: F,
    pub f_high: F,
    pub hop_s: F,
    pub window_s: F,
}

impl<F: Real> Default for FilterbankConfig<F> {
    fn default() -> Self {
        FilterbankConfig {
            channels: 7,
            q: F::from_f64_lossy(10.0),
            f_low: F::from_f64_lossy(100.0),
            f_high: F::from_f64_lossy(6400.0),
            hop_s: F::from_f64_lossy(0.010),
            window_s: F::from_f64_lossy(0.060),
        }
    }
}

impl<F: Real> FilterbankConfig<F> {
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::config("filterbank needs at least one channel"));
        }
        if !(self.f_low > F::zero() && self.f_high > self.f_low) {
            return Err(Error::config("need 0 < f_low < f_high"));
        }
        let nyquist = F::from_f64_lossy(f64::from(sample_rate) / 2.0);
        if self.f_high >= nyquist {
            return Err(Error::config(format!(
                "f_high must stay below the Nyquist frequency {} Hz",
                f64::from(sample_rate) / 2.0
            )));
        }
        if !(self.hop_s > F::zero() && self.window_s >= self.hop_s) {
            return Err(Error::config("need window >= hop > 0"));
        }
        if self.q <= F::zero() {
            return Err(Error::config("q must be positive"));
        }
        Ok(())
    }
}

/// One second-order band-pass section (normalized, constant 0 dB peak gain).
#[derive(Debug, Clone, Copy)]
pub struct Biquad<F: Real> {
    pub b0: F,
    pub b2: F,
    pub a1: F,
    pub a2: F,
}

impl<F: Real> Biquad<F> {
    /// Band-pass with center `f0` and -3 dB bandwidth `f0 / q`.
    fn band_pass(f0: F, q: F, sample_rate: F) -> Self {
        let two_pi = F::from_f64_lossy(std::f64::consts::TAU);
        let w0 = two_pi * f0 / sample_rate;
        let alpha = Float::sin(w0) / (F::from_f64_lossy(2.0) * q);
        let a0 = F::one() + alpha;
        Biquad {
            b0: alpha / a0,
            b2: -alpha / a0,
            a1: -F::from_f64_lossy(2.0) * Float::cos(w0) / a0,
            a2: (F::one() - alpha) / a0,
        }
    }

    /// Runs the filter over `input` from zero state.
    pub fn run(&self, input: &[F]) -> Vec<F> {
        // transposed direct form II
        let mut z1 = F::zero();
        let mut z2 = F::zero();
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + z1;
                z1 = -self.a1 * y + z2;
                z2 = self.b2 * x - self.a2 * y;
                y
            })
            .collect()
    }

}

/// Magnitude response of a biquad at `freq` Hz, evaluated on the unit circle.
pub fn biquad_magnitude<F: Real>(bq: &Biquad<F>, freq: f64, sample_rate: f64) -> f64 {
    let w = std::f64::consts::TAU * freq / sample_rate;
    let (b0, b2) = (bq.b0.to_f64().unwrap(), bq.b2.to_f64().unwrap());
    let (a1, a2) = (bq.a1.to_f64().unwrap(), bq.a2.to_f64().unwrap());
    let (re, im) = (w.cos(), -w.sin());
    // z^-1 = re + i*im, z^-2 = (re + i*im)^2
    let (re2, im2) = (re * re - im * im, 2.0 * re * im);
    let num = (b0 + b2 * re2, b2 * im2);
    let den = (1.0 + a1 * re + a2 * re2, a1 * im + a2 * im2);
    (num.0.hypot(num.1)) / (den.0.hypot(den.1))
}

/// A designed filterbank: one band-pass section per channel.
#[derive(Debug, Clone)]
pub struct Filterbank<F: Real> {
    centers: Vec<F>,
    sections: Vec<Biquad<F>>,
}

impl<F: Real> Filterbank<F> {
    pub fn channels(&self) -> usize {
        self.sections.len()
    }

    pub fn centers(&self) -> &[F] {
        &self.centers
    }

    pub fn sections(&self) -> &[Biquad<F>] {
        &self.sections
    }
}

/// Designs the filterbank for `config` at `sample_rate`: centers geometric
/// from `f_low` to `f_high` inclusive (a single channel sits at `f_low`).
pub fn design_filterbank<F: Real>(
    config: &FilterbankConfig<F>,
    sample_rate: u32,
) -> Result<Filterbank<F>> {
    config.validate(sample_rate)?;
    let rate = F::from_f64_lossy(f64::from(sample_rate));
    let k = config.channels;
    let centers: Vec<F> = if k == 1 {
        vec![config.f_low]
    } else {
        let ratio = config.f_high / config.f_low;
        (0..k)
            .map(|i| {
                let exp = F::from_f64_lossy(i as f64 / (k - 1) as f64);
                config.f_low * Float::powf(ratio, exp)
            })
            .collect()
    };
    let sections = centers
        .iter()
        .map(|&f0| Biquad::band_pass(f0, config.q, rate))
        .collect();
    Ok(Filterbank { centers, sections })
}

/// Per-frame filterbank energy vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseFeatureSeq<F: Real> {
    data: Vec<F>,
    dim: usize,
    pub hop_s: F,
    pub window_s: F,
}

impl<F: Real> BaseFeatureSeq<F> {
    pub fn from_frames(data: Vec<F>, dim: usize, hop_s: F, window_s: F) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::shape("feature data not a multiple of dimension"));
        }
        Ok(BaseFeatureSeq {
            data,
            dim,
            hop_s,
            window_s,
        })
    }

    /// Frame count `L`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[F]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    /// Appends another sequence extracted with the same settings; used when
    /// training a codebook over several recordings.
    pub fn append(&mut self, other: &BaseFeatureSeq<F>) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::shape("appending features of different dimension"));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }
}

/// Extracts per-frame energies: channel `c` of frame `t` is the mean squared
/// output of filter `c` over the window starting at `t * hop`.
pub fn extract_base_features<F: Real>(
    signal: &PcmSignal<F>,
    config: &FilterbankConfig<F>,
) -> Result<BaseFeatureSeq<F>> {
    let bank = design_filterbank(config, signal.sample_rate())?;
    let rate = f64::from(signal.sample_rate());
    let hop = (config.hop_s.to_f64().unwrap() * rate).round() as usize;
    let win = (config.window_s.to_f64().unwrap() * rate).round() as usize;
    if hop == 0 || win == 0 {
        return Err(Error::config("hop and window must round to >= 1 sample"));
    }
    if signal.len() < win {
        return Err(Error::EmptyInput(format!(
            "signal of {} samples shorter than one {}-sample window",
            signal.len(),
            win
        )));
    }
    let frames = (signal.len() - win) / hop + 1;
    let dim = bank.channels();
    let mut data = vec![F::zero(); frames * dim];

    // Each channel filters the whole signal from zero state; the windowing
    // applies to the filtered output. Energy sums accumulate in f64 so long
    // streams do not lose precision even at F = f32.
    let channel_energies: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        bank.sections()
            .par_iter()
            .map(|bq| {
                let filtered = bq.run(signal.samples());
                let mut prefix = Vec::with_capacity(filtered.len() + 1);
                let mut acc = 0.0f64;
                prefix.push(0.0);
                for y in filtered {
                    let y = y.to_f64().unwrap();
                    acc += y * y;
                    prefix.push(acc);
                }
                prefix
            })
            .collect()
    };
    for (c, prefix) in channel_energies.iter().enumerate() {
        for t in 0..frames {
            let start = t * hop;
            let mean = (prefix[start + win] - prefix[start]) / win as f64;
            // Guard tiny negative round-off.
            data[t * dim + c] = F::from_f64_lossy(mean.max(0.0));
        }
    }
    BaseFeatureSeq::from_frames(data, dim, config.hop_s, config.window_s)
}

//! Codeword histograms over sliding windows.
//!
//! A histogram counts how often each of `n` codewords occurs inside a
//! `W`-frame window of the quantized stream. Counts stay raw integers: the
//! `sqrt(2)` one-step bound used for skipping and the usual working scale of
//! search thresholds both presuppose unnormalized counts. Distances are
//! computed from the exact integer squared distance, so every search variant
//! in this crate sees bit-identical values.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vq::CodewordSeq;

/// Codeword-count vector over a `window`-frame span of a quantized stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    counts: Vec<u32>,
    window: u32,
}

impl Histogram {
    /// Builds a histogram from raw counts. The counts must sum to `window`.
    pub fn from_counts(counts: Vec<u32>, window: u32) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| u64::from(c)).sum();
        if total != u64::from(window) {
            return Err(Error::Consistency(format!(
                "histogram counts sum to {total}, window is {window}"
            )));
        }
        Ok(Histogram { counts, window })
    }

    /// Number of bins (the codebook size `n`).
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    /// Window length `W` in frames.
    pub fn window(&self) -> u32 {
        self.window
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Count in one bin.
    pub fn count(&self, code: usize) -> u32 {
        self.counts[code]
    }

    /// Returns a new histogram with `out_code` leaving the window and
    /// `in_code` entering it; equals the histogram one frame later.
    pub fn slide(&self, out_code: usize, in_code: usize) -> Result<Histogram> {
        let mut next = self.clone();
        next.slide_in_place(out_code, in_code)?;
        Ok(next)
    }

    /// In-place variant of [`slide`](Self::slide) for exclusively owned
    /// histograms.
    pub fn slide_in_place(&mut self, out_code: usize, in_code: usize) -> Result<()> {
        if out_code >= self.counts.len() || in_code >= self.counts.len() {
            return Err(Error::range(format!(
                "slide codes ({out_code}, {in_code}) outside {} bins",
                self.counts.len()
            )));
        }
        if self.counts[out_code] == 0 {
            return Err(Error::Consistency(format!(
                "cannot slide out code {out_code}: bin is empty"
            )));
        }
        self.counts[out_code] -= 1;
        self.counts[in_code] += 1;
        Ok(())
    }

    /// Counts as a dense real vector, for projection into segment subspaces.
    pub fn to_vector<F: Real>(&self) -> nalgebra::DVector<F> {
        nalgebra::DVector::from_iterator(
            self.counts.len(),
            self.counts.iter().map(|&c| F::from_u64_lossy(u64::from(c))),
        )
    }
}

/// Histogram of codewords `codes[t..t + window)`.
pub fn histogram_at(codes: &CodewordSeq, t: usize, window: u32, bins: usize) -> Result<Histogram> {
    let end = t
        .checked_add(window as usize)
        .ok_or_else(|| Error::range("window end overflows"))?;
    if end > codes.len() {
        return Err(Error::range(format!(
            "window [{t}, {end}) exceeds stream of {} frames",
            codes.len()
        )));
    }
    let mut counts = vec![0u32; bins];
    for &code in &codes.as_slice()[t..end] {
        let code = code as usize;
        if code >= bins {
            return Err(Error::range(format!("codeword {code} outside {bins} bins")));
        }
        counts[code] += 1;
    }
    Ok(Histogram { counts, window })
}

/// Exact squared Euclidean distance between two histograms.
pub fn dist2(a: &Histogram, b: &Histogram) -> Result<u64> {
    if a.counts.len() != b.counts.len() {
        return Err(Error::shape(format!(
            "histogram bins differ: {} vs {}",
            a.counts.len(),
            b.counts.len()
        )));
    }
    if a.window != b.window {
        return Err(Error::shape(format!(
            "histogram windows differ: {} vs {}",
            a.window, b.window
        )));
    }
    Ok(dist2_unchecked(a, b))
}

pub(crate) fn dist2_unchecked(a: &Histogram, b: &Histogram) -> u64 {
    a.counts
        .iter()
        .zip(&b.counts)
        .map(|(&x, &y)| {
            let d = i64::from(x) - i64::from(y);
            (d * d) as u64
        })
        .sum()
}

/// Euclidean distance between two histograms, as the requested scalar.
pub fn distance<F: Real>(a: &Histogram, b: &Histogram) -> Result<F> {
    Ok(F::from_f64_lossy((dist2(a, b)? as f64).sqrt()))
}

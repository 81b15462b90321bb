//! Baseline sliding-window search and the exhaustive oracle.
//!
//! Both scan every admissible window position of the stored stream and
//! report positions whose histogram distance to the query histogram falls
//! within the threshold. The baseline accelerates the scan with the safe
//! skip width derived from the `sqrt(2)` one-step bound; the oracle
//! evaluates every position and exposes the whole distance trace, which the
//! test suites audit skips against. Both are ground truth for the
//! compressed engine in [`crate::search`].

use num_traits::Float;

use crate::error::{Error, Result};
use crate::histogram::{dist2_unchecked, histogram_at};
use crate::scalar::{sqrt2, Real};
use crate::vq::CodewordSeq;

/// A reported detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match<F: Real> {
    /// Window position in the stored stream.
    pub position: usize,
    /// Histogram distance at that position.
    pub distance: F,
}

/// Threshold and window length of one search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchParams<F: Real> {
    pub theta: F,
    pub window: u32,
}

impl<F: Real> SearchParams<F> {
    pub fn new(theta: F, window: u32) -> Result<Self> {
        if theta < F::zero() {
            return Err(Error::config("theta must be non-negative"));
        }
        if window == 0 {
            return Err(Error::config("window must be at least one frame"));
        }
        Ok(SearchParams { theta, window })
    }
}

/// Safe number of frames to advance after observing distance `d`: one plus
/// the largest integer strictly below `(d - theta) / sqrt(2)`, or 1 at or
/// under the threshold.
///
/// The floor must be strict. With `(d - theta)` an exact multiple of
/// `sqrt(2)` — routine for integer-counted histograms — a non-strict floor
/// would skip onto a position whose distance can equal `theta` exactly,
/// dismissing a true match.
pub fn skip_width<F: Real>(d: F, theta: F) -> usize {
    if d > theta {
        let ratio = (d - theta) / sqrt2::<F>();
        let below = Float::floor(ratio);
        let below = if below == ratio { below - F::one() } else { below };
        below.to_usize().unwrap_or(0) + 1
    } else {
        1
    }
}

/// Scan counters shared by the baseline and the oracle.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// Full-dimension histogram distance evaluations.
    pub distance_evals: usize,
    /// Window positions actually landed on.
    pub positions_visited: usize,
}

fn bins_for(stored: &CodewordSeq, query: &CodewordSeq) -> usize {
    let max_code = stored
        .as_slice()
        .iter()
        .chain(query.as_slice())
        .copied()
        .max()
        .unwrap_or(0);
    max_code as usize + 1
}

fn scan<F: Real>(
    stored: &CodewordSeq,
    query: &CodewordSeq,
    params: &SearchParams<F>,
    mut on_visit: impl FnMut(usize, F),
    exhaustive: bool,
) -> Result<(Vec<Match<F>>, ScanStats)> {
    let w = params.window as usize;
    if stored.len() < w {
        return Err(Error::range(format!(
            "stored stream of {} frames shorter than window {w}",
            stored.len()
        )));
    }
    if query.len() < w {
        return Err(Error::range(format!(
            "query of {} frames shorter than window {w}",
            query.len()
        )));
    }
    let bins = bins_for(stored, query);
    // A query longer than the window contributes its first W frames.
    let x_q = histogram_at(query, 0, params.window, bins)?;
    let mut x_s = histogram_at(stored, 0, params.window, bins)?;
    let positions = stored.len() - w + 1;

    let mut matches = Vec::new();
    let mut stats = ScanStats::default();
    let mut t = 0usize;
    loop {
        let d = F::from_f64_lossy((dist2_unchecked(&x_s, &x_q) as f64).sqrt());
        stats.distance_evals += 1;
        stats.positions_visited += 1;
        on_visit(t, d);
        if d <= params.theta {
            matches.push(Match {
                position: t,
                distance: d,
            });
        }
        let step = if exhaustive { 1 } else { skip_width(d, params.theta) };
        if t + step >= positions {
            break;
        }
        for k in t..t + step {
            x_s.slide_in_place(stored.code(k) as usize, stored.code(k + w) as usize)?;
        }
        t += step;
    }
    Ok((matches, stats))
}

/// Baseline search: scans with safe skip widths, returning every position
/// whose distance is within `theta`, sorted by position.
pub fn tas_search<F: Real>(
    stored: &CodewordSeq,
    query: &CodewordSeq,
    params: &SearchParams<F>,
) -> Result<Vec<Match<F>>> {
    scan(stored, query, params, |_, _| {}, false).map(|(m, _)| m)
}

/// Baseline search together with workload counters.
pub fn tas_search_report<F: Real>(
    stored: &CodewordSeq,
    query: &CodewordSeq,
    params: &SearchParams<F>,
) -> Result<(Vec<Match<F>>, ScanStats)> {
    scan(stored, query, params, |_, _| {}, false)
}

/// Baseline search that also records every visited position, for skip
/// audits.
pub fn tas_search_traced<F: Real>(
    stored: &CodewordSeq,
    query: &CodewordSeq,
    params: &SearchParams<F>,
) -> Result<(Vec<Match<F>>, Vec<usize>)> {
    let mut visited = Vec::new();
    let (matches, _) = scan(stored, query, params, |t, _| visited.push(t), false)?;
    Ok((matches, visited))
}

/// Exhaustive oracle: evaluates the distance at every position.
pub fn brute_force_search<F: Real>(
    stored: &CodewordSeq,
    query: &CodewordSeq,
    params: &SearchParams<F>,
) -> Result<Vec<Match<F>>> {
    scan(stored, query, params, |_, _| {}, true).map(|(m, _)| m)
}

/// Exhaustive oracle returning the full distance trace alongside the
/// matches; `trace[t]` is the distance at position `t`.
pub fn brute_force_with_trace<F: Real>(
    stored: &CodewordSeq,
    query: &CodewordSeq,
    params: &SearchParams<F>,
) -> Result<(Vec<Match<F>>, Vec<F>)> {
    let positions = stored
        .len()
        .checked_sub(params.window as usize)
        .map(|p| p + 1)
        .unwrap_or(0);
    let mut trace = Vec::with_capacity(positions);
    let (matches, _) = scan(stored, query, params, |_, d| trace.push(d), true)?;
    Ok((matches, trace))
}

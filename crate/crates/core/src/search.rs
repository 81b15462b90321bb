//! The accelerated two-stage search over a built index.
//!
//! The scan walks window positions and never touches a full histogram until
//! a candidate survives two filters:
//!
//! 1. block pruning — if the query's distance to a block representative
//!    exceeds the threshold by more than the block radius, every member of
//!    the block is out and the scan jumps past it;
//! 2. the compressed distance at the landing position, which lower-bounds
//!    the true distance, decides between skipping ahead (safe skip width
//!    applied to the compressed distance) and exact verification against a
//!    histogram rebuilt from the stored codewords.
//!
//! Verification distances come from the same integer arithmetic as the
//! baseline scans, so reported matches are identical to the oracle's, not
//! merely close.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::histogram::{dist2_unchecked, histogram_at, Histogram};
use crate::index_io::PlIndex;
use crate::pla::{compressed_distance_unchecked, CompressedFeature};
use crate::sampling::Block;
use crate::scalar::Real;
use crate::tas::{skip_width, Match};
use crate::vq::CodewordSeq;

/// Positions between cached anchor histograms for verification rebuilds.
const ANCHOR_STRIDE: usize = 4096;

/// Safety slack on compressed distances before any prune/skip decision.
///
/// Compressed distances lower-bound true distances in exact arithmetic, but
/// their floating-point evaluation can land a few ulp high. True distances
/// are square roots of integers, so adjacent achievable values are far
/// further apart than this slack; subtracting it restores a strict lower
/// bound without ever changing a decision that exact arithmetic would make.
const COMPRESSED_SLACK: f64 = 1e-6;

/// Workload counters of one scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchCounters {
    /// Per-position compressed distance evaluations.
    pub compressed_evals: usize,
    /// Exact histogram distance evaluations (verifications).
    pub full_distance_evals: usize,
    /// Block representative distances evaluated.
    pub block_bound_evals: usize,
    /// Blocks discarded wholesale by their lower bound.
    pub block_skips: usize,
    /// Window positions the scan never landed on.
    pub frames_skipped: usize,
    /// Window positions the scan landed on.
    pub positions_visited: usize,
}

/// Matches plus the counters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport<F: Real> {
    pub matches: Vec<Match<F>>,
    pub counters: SearchCounters,
}

/// Lazily materialized per-segment compressions of one query histogram.
pub struct QueryCompression<F: Real> {
    histogram: Histogram,
    vector: DVector<F>,
    slots: Vec<Option<CompressedFeature<F>>>,
    computed: usize,
}

impl<F: Real> QueryCompression<F> {
    /// Builds the query histogram from the first `W` frames of `query`.
    pub fn new(index: &PlIndex<F>, query: &CodewordSeq) -> Result<Self> {
        let w = index.params.window;
        if query.len() < w as usize {
            return Err(Error::config(format!(
                "query yields {} frames, index window is {w}",
                query.len()
            )));
        }
        let histogram = histogram_at(query, 0, w, index.params.bins)?;
        Ok(Self::from_histogram(index, histogram))
    }

    pub fn from_histogram(index: &PlIndex<F>, histogram: Histogram) -> Self {
        let vector = histogram.to_vector();
        QueryCompression {
            histogram,
            vector,
            slots: vec![None; index.segments.len()],
            computed: 0,
        }
    }

    pub fn histogram(&self) -> &Histogram {
        &self.histogram
    }

    /// The query compressed through segment `j`; computed once, cached
    /// thereafter.
    pub fn feature(&mut self, index: &PlIndex<F>, j: usize) -> &CompressedFeature<F> {
        if self.slots[j].is_none() {
            self.slots[j] = Some(index.segments[j].compress_vector(&self.vector));
            self.computed += 1;
        }
        self.slots[j].as_ref().unwrap()
    }

    /// How many segment compressions were actually computed.
    pub fn computed(&self) -> usize {
        self.computed
    }
}

/// One-shot form of the per-segment query compression.
pub fn compress_query<F: Real>(
    index: &PlIndex<F>,
    x_q: &Histogram,
    j: usize,
) -> Result<CompressedFeature<F>> {
    let segment = index
        .segments
        .get(j)
        .ok_or_else(|| Error::range(format!("segment {j} out of range")))?;
    segment.compress(x_q)
}

/// Rebuilds stored histograms at arbitrary positions, sliding from the
/// nearest of the current cursor and a lazily cached anchor grid.
pub struct HistogramCursor<'a> {
    codes: &'a CodewordSeq,
    window: u32,
    bins: usize,
    anchors: Vec<Option<Histogram>>,
    current: Option<(usize, Histogram)>,
}

impl<'a> HistogramCursor<'a> {
    pub fn new(codes: &'a CodewordSeq, window: u32, bins: usize) -> Self {
        let positions = codes.len() - window as usize + 1;
        HistogramCursor {
            codes,
            window,
            bins,
            anchors: vec![None; positions.div_ceil(ANCHOR_STRIDE)],
            current: None,
        }
    }

    fn anchor(&mut self, slot: usize) -> Result<&Histogram> {
        if self.anchors[slot].is_none() {
            self.anchors[slot] = Some(histogram_at(
                self.codes,
                slot * ANCHOR_STRIDE,
                self.window,
                self.bins,
            )?);
        }
        Ok(self.anchors[slot].as_ref().unwrap())
    }

    /// Histogram at `t`, reusing whatever cached state is closest.
    pub fn at(&mut self, t: usize) -> Result<&Histogram> {
        let anchor_pos = (t / ANCHOR_STRIDE) * ANCHOR_STRIDE;
        let from_current = match &self.current {
            Some((p, _)) if *p <= t && *p >= anchor_pos => Some(*p),
            _ => None,
        };
        let (start, mut h) = match from_current {
            Some(p) => {
                let (_, h) = self.current.take().unwrap();
                (p, h)
            }
            None => {
                let h = self.anchor(anchor_pos / ANCHOR_STRIDE)?.clone();
                (anchor_pos, h)
            }
        };
        let w = self.window as usize;
        for k in start..t {
            h.slide_in_place(self.codes.code(k) as usize, self.codes.code(k + w) as usize)?;
        }
        self.current = Some((t, h));
        Ok(&self.current.as_ref().unwrap().1)
    }
}

/// Verifies position `t` against the exact stored histogram; `Some` iff the
/// true distance is within `theta`.
pub fn verify<F: Real>(
    index: &PlIndex<F>,
    t: usize,
    x_q: &Histogram,
    theta: F,
) -> Result<Option<Match<F>>> {
    if t >= index.positions() {
        return Err(Error::range(format!(
            "position {t} outside {} positions",
            index.positions()
        )));
    }
    let x_s = histogram_at(&index.codes, t, index.params.window, index.params.bins)?;
    let d = F::from_f64_lossy((dist2_unchecked(&x_s, x_q) as f64).sqrt());
    Ok((d <= theta).then_some(Match {
        position: t,
        distance: d,
    }))
}

/// The accelerated search; returns exactly the brute-force match set.
pub fn proposed_search<F: Real>(
    index: &PlIndex<F>,
    query: &CodewordSeq,
    theta: F,
) -> Result<SearchReport<F>> {
    scan(index, query, theta, |_| {})
}

/// As [`proposed_search`], also recording every landed-on position for skip
/// audits.
pub fn proposed_search_traced<F: Real>(
    index: &PlIndex<F>,
    query: &CodewordSeq,
    theta: F,
) -> Result<(SearchReport<F>, Vec<usize>)> {
    let mut visited = Vec::new();
    let report = scan(index, query, theta, |t| visited.push(t))?;
    Ok((report, visited))
}

fn scan<F: Real>(
    index: &PlIndex<F>,
    query: &CodewordSeq,
    theta: F,
    mut on_visit: impl FnMut(usize),
) -> Result<SearchReport<F>> {
    if theta < F::zero() {
        return Err(Error::config("theta must be non-negative"));
    }
    let slack = F::from_f64_lossy(COMPRESSED_SLACK);
    let mut qc = QueryCompression::new(index, query)?;
    let mut cursor = HistogramCursor::new(&index.codes, index.params.window, index.params.bins);
    let positions = index.positions();

    let mut counters = SearchCounters::default();
    let mut matches = Vec::new();

    // Per-block state, recomputed when the scan enters a new block.
    let mut block_idx = usize::MAX;
    let mut rep_dist = F::zero();
    let mut y_q: CompressedFeature<F> = CompressedFeature {
        z: DVector::zeros(0),
        delta: F::zero(),
    };
    let mut segment_idx = usize::MAX;

    let mut t = 0usize;
    while t < positions {
        counters.positions_visited += 1;
        on_visit(t);

        let b = index.block_of(t);
        let block: &Block<F> = &index.blocks[b];
        if b != block_idx {
            block_idx = b;
            if block.segment != segment_idx {
                segment_idx = block.segment;
                y_q = qc.feature(index, segment_idx).clone();
            }
            rep_dist = compressed_distance_unchecked(&block.representative, &y_q);
            counters.block_bound_evals += 1;
        }

        // Jump sound from the representative regardless of what happens at t.
        let rep_jump = block.start + skip_width(rep_dist - slack, theta);

        if rep_dist - block.radius - slack > theta {
            // No member of this block can reach the threshold.
            counters.block_skips += 1;
            t = block.end().max(rep_jump).max(t + 1);
            continue;
        }

        let x_s = cursor.at(t)?;
        let y_t = index.segments[segment_idx].compress_vector(&x_s.to_vector());
        counters.compressed_evals += 1;
        let d_tilde = compressed_distance_unchecked(&y_t, &y_q) - slack;

        if d_tilde <= theta {
            counters.full_distance_evals += 1;
            let d = F::from_f64_lossy((dist2_unchecked(x_s, qc.histogram()) as f64).sqrt());
            if d <= theta {
                matches.push(Match {
                    position: t,
                    distance: d,
                });
            }
        }

        t = (t + skip_width(d_tilde, theta)).max(rep_jump);
    }

    counters.frames_skipped = positions - counters.positions_visited;
    Ok(SearchReport { matches, counters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynseg::Method;
    use crate::index_io::{build_index, IndexParams};
    use crate::tas::{brute_force_with_trace, SearchParams};
    use rand::prelude::*;

    fn params(window: u32, bins: usize, segments: usize) -> IndexParams {
        IndexParams {
            window,
            bins,
            segments,
            sigma: 0.9,
            block_len: 8,
            delta: 0,
            method: Method::None,
            codebook_hash: 0,
        }
    }

    fn random_codes(rng: &mut StdRng, len: usize, bins: u16) -> CodewordSeq {
        CodewordSeq::new((0..len).map(|_| rng.random_range(0..bins)).collect())
    }

    /// Smooth-ish stream: codes drift so histograms are locally correlated.
    fn drifting_codes(rng: &mut StdRng, len: usize, bins: u16) -> CodewordSeq {
        let mut codes = Vec::with_capacity(len);
        let mut base = 0u16;
        for i in 0..len {
            if i % 97 == 0 {
                base = rng.random_range(0..bins);
            }
            let jitter = rng.random_range(0..3).min(bins - 1);
            codes.push((base + jitter) % bins);
        }
        CodewordSeq::new(codes)
    }

    #[test]
    fn matches_equal_brute_force() {
        let mut rng = StdRng::seed_from_u64(100);
        for trial in 0..12 {
            let bins = 10u16;
            let stored = drifting_codes(&mut rng, 800, bins);
            let query = if trial % 3 == 0 {
                // Planted: exact copy somewhere inside.
                let at = rng.random_range(0..stored.len() - 30);
                CodewordSeq::new(stored.as_slice()[at..at + 30].to_vec())
            } else {
                random_codes(&mut rng, 30, bins)
            };
            let (index, _) =
                build_index::<f64>(stored.clone(), params(30, bins as usize, 5)).unwrap();
            let sp = SearchParams::new(0.0, 30).unwrap();
            let (_, trace) = brute_force_with_trace(&stored, &query, &sp).unwrap();
            // Thresholds spanning empty to dense match regimes.
            let mut sorted = trace.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for theta in [
                0.0,
                sorted[0],
                sorted[sorted.len() / 100],
                sorted[sorted.len() / 10],
                sorted[sorted.len() / 2],
            ] {
                let report = proposed_search(&index, &query, theta).unwrap();
                let expected: Vec<(usize, f64)> = trace
                    .iter()
                    .enumerate()
                    .filter(|&(_, &d)| d <= theta)
                    .map(|(t, &d)| (t, d))
                    .collect();
                let got: Vec<(usize, f64)> = report
                    .matches
                    .iter()
                    .map(|m| (m.position, m.distance))
                    .collect();
                assert_eq!(got, expected, "trial {trial} theta {theta}");
            }
        }
    }

    #[test]
    fn planted_copy_found_at_zero_threshold() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut codes: Vec<u16> = (0..600).map(|_| rng.random_range(0..8)).collect();
        let query: Vec<u16> = (0..40).map(|_| rng.random_range(0..8)).collect();
        codes[250..290].copy_from_slice(&query);
        let stored = CodewordSeq::new(codes);
        let (index, _) = build_index::<f64>(stored, params(40, 8, 4)).unwrap();
        let report = proposed_search(&index, &CodewordSeq::new(query), 0.0).unwrap();
        assert!(report.matches.iter().any(|m| m.position == 250));
        assert!(report.matches.iter().all(|m| m.distance == 0.0));
    }

    #[test]
    fn pruned_and_skipped_positions_are_above_threshold() {
        let mut rng = StdRng::seed_from_u64(8);
        let stored = drifting_codes(&mut rng, 1200, 9);
        let query = random_codes(&mut rng, 25, 9);
        let (index, _) = build_index::<f64>(stored.clone(), params(25, 9, 6)).unwrap();
        let sp = SearchParams::new(0.0, 25).unwrap();
        let (_, trace) = brute_force_with_trace(&stored, &query, &sp).unwrap();
        let mut sorted = trace.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let theta = sorted[sorted.len() / 20];
        let (_, visited) = proposed_search_traced(&index, &query, theta).unwrap();
        let visited: std::collections::HashSet<usize> = visited.into_iter().collect();
        for (t, &d) in trace.iter().enumerate() {
            if !visited.contains(&t) {
                assert!(d > theta, "skipped position {t} has d = {d} <= {theta}");
            }
        }
    }

    #[test]
    fn counter_accounting_bounds() {
        let mut rng = StdRng::seed_from_u64(9);
        let stored = drifting_codes(&mut rng, 900, 7);
        let query = random_codes(&mut rng, 20, 7);
        let (index, _) = build_index::<f64>(stored, params(20, 7, 4)).unwrap();
        let positions = index.positions();
        for theta in [0.0, 3.0, 8.0, 30.0] {
            let report = proposed_search(&index, &query, theta).unwrap();
            let c = &report.counters;
            assert!(c.compressed_evals <= positions);
            assert!(c.full_distance_evals <= positions);
            assert!(c.block_bound_evals <= index.blocks.len());
            assert_eq!(c.positions_visited + c.frames_skipped, positions);
        }
    }

    #[test]
    fn query_compression_caches_per_segment() {
        let mut rng = StdRng::seed_from_u64(10);
        let stored = random_codes(&mut rng, 300, 6);
        let query = random_codes(&mut rng, 15, 6);
        let (index, _) = build_index::<f64>(stored, params(15, 6, 3)).unwrap();
        let mut qc = QueryCompression::new(&index, &query).unwrap();
        let first = qc.feature(&index, 1).clone();
        let again = qc.feature(&index, 1).clone();
        assert_eq!(first, again);
        assert_eq!(qc.computed(), 1);

        // Identical to the one-shot definitional form.
        let direct = compress_query(&index, qc.histogram(), 1).unwrap();
        assert_eq!(direct, first);

        // Query equal to the segment mean lands at the origin.
        let seg = &index.segments[1];
        let mean_hist = {
            let counts: Vec<u32> = seg.mean.iter().map(|&v| v.round() as u32).collect();
            let total: u32 = counts.iter().sum();
            if total == index.params.window {
                Some(Histogram::from_counts(counts, total).unwrap())
            } else {
                None
            }
        };
        if let Some(h) = mean_hist {
            let y = compress_query(&index, &h, 1).unwrap();
            let exact_mean = seg
                .mean
                .iter()
                .all(|&v| (v - v.round()).abs() < 1e-12);
            if exact_mean {
                assert!(y.z.norm() < 1e-9);
                assert!(y.delta < 1e-9);
            }
        }
    }

    #[test]
    fn cursor_reconstruction_matches_batch() {
        let mut rng = StdRng::seed_from_u64(11);
        let stored = random_codes(&mut rng, 700, 5);
        let mut cursor = HistogramCursor::new(&stored, 12, 5);
        let positions = stored.len() - 11;
        let mut audit: Vec<usize> = (0..60).map(|_| rng.random_range(0..positions)).collect();
        audit.sort_unstable();
        for t in audit {
            let from_cursor = cursor.at(t).unwrap().clone();
            let batch = histogram_at(&stored, t, 12, 5).unwrap();
            assert_eq!(from_cursor, batch, "position {t}");
        }
    }

    #[test]
    fn verify_rejects_false_alarm_and_accepts_match() {
        let mut rng = StdRng::seed_from_u64(12);
        let stored = random_codes(&mut rng, 200, 6);
        let (index, _) = build_index::<f64>(stored.clone(), params(20, 6, 2)).unwrap();
        let query = CodewordSeq::new(stored.as_slice()[50..70].to_vec());
        let x_q = histogram_at(&query, 0, 20, 6).unwrap();
        let hit = verify(&index, 50, &x_q, 0.0).unwrap();
        assert_eq!(hit.map(|m| (m.position, m.distance)), Some((50, 0.0)));
        // A position with a different histogram fails at theta = 0.
        let x_other = histogram_at(&stored, 0, 20, 6).unwrap();
        if x_other != x_q {
            assert!(verify(&index, 0, &x_q, 0.0).unwrap().is_none());
        }
    }

    #[test]
    fn full_distance_workload_never_exceeds_baseline() {
        let mut rng = StdRng::seed_from_u64(14);
        for trial in 0..6 {
            let stored = drifting_codes(&mut rng, 1500, 10);
            let query = random_codes(&mut rng, 40, 10);
            let (index, _) = build_index::<f64>(stored.clone(), params(40, 10, 6)).unwrap();
            for theta in [2.0, 6.0, 15.0, 40.0] {
                let sp = crate::tas::SearchParams::new(theta, 40).unwrap();
                let (_, tas_stats) =
                    crate::tas::tas_search_report(&stored, &query, &sp).unwrap();
                let report = proposed_search(&index, &query, theta).unwrap();
                assert!(
                    report.counters.full_distance_evals <= tas_stats.distance_evals,
                    "trial {trial} theta {theta}: {} > {}",
                    report.counters.full_distance_evals,
                    tas_stats.distance_evals
                );
            }
        }
    }

    #[test]
    fn short_query_is_config_error() {
        let mut rng = StdRng::seed_from_u64(13);
        let stored = random_codes(&mut rng, 100, 4);
        let (index, _) = build_index::<f64>(stored, params(20, 4, 2)).unwrap();
        let query = random_codes(&mut rng, 10, 4);
        assert!(matches!(
            proposed_search(&index, &query, 1.0).unwrap_err(),
            Error::Config(_)
        ));
    }
}

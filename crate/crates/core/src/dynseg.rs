//! Dynamic segmentation: choosing segment boundaries that minimize the
//! average compressed dimensionality.
//!
//! All methods move each interior boundary inside a shiftable range of
//! half-width `delta` around its equi-partition position:
//!
//! * [`local_optimize`] — forward recursion, exhaustive scan of each range;
//! * [`coarse_to_fine`] — the same recursion, but each range is probed at a
//!   budgeted set of points chosen from an estimate of how often the segment
//!   dimensionality changes, then refined by bisection around the detected
//!   changes;
//! * [`dp_segment`] — exact minimizer over the constrained boundary sets,
//!   tractable only on small instances and guarded accordingly. It is the
//!   oracle the heuristics are compared against.
//!
//! Every dimensionality query goes through a [`DimProbe`], whose counter is
//! the workload measure the probe-count audits are written against.

use std::cell::Cell;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::pla::CovariancePrefix;

/// Boundary set for a stream of positions, with the per-segment ranks and
/// the length-weighted average rank they induce.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationResult {
    /// `M + 1` strictly increasing boundaries; first 0, last the position count.
    pub boundaries: Vec<usize>,
    /// Rank of each of the `M` segments.
    pub dims: Vec<usize>,
    /// `(1 / positions) * sum_j (t_j - t_{j-1}) * dim_j`.
    pub objective: f64,
}

impl SegmentationResult {
    pub fn segment_count(&self) -> usize {
        self.dims.len()
    }

    pub fn positions(&self) -> usize {
        *self.boundaries.last().unwrap_or(&0)
    }

    /// Checks the structural invariants and that the stored objective is
    /// consistent with the stored parts.
    pub fn validate(&self) -> Result<()> {
        if self.boundaries.len() < 2 || self.boundaries[0] != 0 {
            return Err(Error::invariant("boundaries must start at 0"));
        }
        if !self.boundaries.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invariant("boundaries must be strictly increasing"));
        }
        if self.dims.len() + 1 != self.boundaries.len() {
            return Err(Error::invariant("one rank per segment required"));
        }
        let recomputed = objective_from(&self.boundaries, &self.dims);
        if (recomputed - self.objective).abs() > 1e-9 {
            return Err(Error::invariant(format!(
                "objective {} does not match parts {recomputed}",
                self.objective
            )));
        }
        Ok(())
    }
}

fn objective_from(boundaries: &[usize], dims: &[usize]) -> f64 {
    let total = *boundaries.last().unwrap() as f64;
    boundaries
        .windows(2)
        .zip(dims)
        .map(|(w, &d)| (w[1] - w[0]) as f64 * d as f64)
        .sum::<f64>()
        / total
}

/// The `+/- delta` neighborhood a boundary may move in, already clipped to
/// stay strictly between its neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShiftableRange {
    pub center: usize,
    pub delta: usize,
}

impl ShiftableRange {
    /// Clips `delta` so the range stays strictly inside `(left, right)`.
    pub fn clipped(center: usize, delta: usize, left: usize, right: usize) -> Self {
        debug_assert!(left < center && center < right);
        let delta = delta.min(center - left - 1).min(right - center - 1);
        ShiftableRange { center, delta }
    }

    pub fn lo(&self) -> usize {
        self.center - self.delta
    }

    pub fn hi(&self) -> usize {
        self.center + self.delta
    }

    pub fn len(&self) -> usize {
        2 * self.delta + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Instrumented access to range dimensionalities. Every evaluation counts,
/// cached or not: methods that want to avoid re-probing must keep their own
/// caches, so the counter reflects the method's true probe economy.
pub struct DimProbe<'a> {
    prefix: &'a CovariancePrefix,
    sigma: f64,
    evals: Cell<u64>,
}

impl<'a> DimProbe<'a> {
    pub fn new(prefix: &'a CovariancePrefix, sigma: f64) -> Self {
        DimProbe {
            prefix,
            sigma,
            evals: Cell::new(0),
        }
    }

    /// Subspace rank of `[a, b)`. The range must be valid.
    pub fn dim(&self, a: usize, b: usize) -> usize {
        self.evals.set(self.evals.get() + 1);
        self.prefix
            .range_dimension(a, b, self.sigma)
            .expect("probe over validated range")
    }

    /// Number of dimensionality evaluations so far.
    pub fn evals(&self) -> u64 {
        self.evals.get()
    }

    pub fn reset(&self) {
        self.evals.set(0);
    }

    pub fn positions(&self) -> usize {
        self.prefix.positions()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Equi-partition boundaries: `round(j * positions / m)`.
pub fn equi_boundaries(positions: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::config("segment count must be at least 1"));
    }
    if m > positions {
        return Err(Error::config(format!(
            "cannot cut {positions} positions into {m} segments"
        )));
    }
    Ok((0..=m)
        .map(|j| ((j * positions) as f64 / m as f64).round() as usize)
        .collect())
}

/// Equi-partition with its per-segment ranks.
pub fn equi_partition(m: usize, probe: &DimProbe) -> Result<SegmentationResult> {
    let boundaries = equi_boundaries(probe.positions(), m)?;
    let dims: Vec<usize> = boundaries.windows(2).map(|w| probe.dim(w[0], w[1])).collect();
    let objective = objective_from(&boundaries, &dims);
    Ok(SegmentationResult {
        boundaries,
        dims,
        objective,
    })
}

/// Local objective of placing boundary `t` between fixed anchors: the
/// length-weighted mean rank of the two adjoining segments.
fn local_objective(left: usize, t: usize, right: usize, dim_l: usize, dim_r: usize) -> f64 {
    ((t - left) as f64 * dim_l as f64 + (right - t) as f64 * dim_r as f64)
        / (right - left) as f64
}

/// Candidate ranking key: objective first, then distance from the initial
/// position, then the smaller boundary.
type CandidateKey = (f64, usize, usize);
/// Best candidate so far, with the two segment ranks probed at it.
type BestCandidate = Option<(CandidateKey, (usize, usize))>;

fn better(cand: CandidateKey, best: CandidateKey) -> bool {
    cand.0 < best.0
        || (cand.0 == best.0 && (cand.1 < best.1 || (cand.1 == best.1 && cand.2 < best.2)))
}

fn assemble(
    boundaries: Vec<usize>,
    dims: Vec<usize>,
) -> SegmentationResult {
    let objective = objective_from(&boundaries, &dims);
    SegmentationResult {
        boundaries,
        dims,
        objective,
    }
}

/// Forward-recursion local optimization: boundaries are revisited left to
/// right, each placed at the minimizer of the local objective over its
/// clipped shiftable range (exhaustive scan, `2 * delta + 1` candidates).
pub fn local_optimize(
    initial: &SegmentationResult,
    delta: usize,
    probe: &DimProbe,
) -> Result<SegmentationResult> {
    let b0 = &initial.boundaries;
    let m = b0.len() - 1;
    let mut bounds = b0.clone();
    let mut dims = vec![0usize; m];
    let mut last_right_dim = None;

    for j in 1..m {
        let left = bounds[j - 1];
        let range = ShiftableRange::clipped(b0[j], delta, left, b0[j + 1]);
        let mut best: BestCandidate = None;
        for t in range.lo()..=range.hi() {
            let dim_l = probe.dim(left, t);
            let dim_r = probe.dim(t, b0[j + 1]);
            let obj = local_objective(left, t, b0[j + 1], dim_l, dim_r);
            let key = (obj, t.abs_diff(range.center), t);
            if best.is_none() || better(key, best.as_ref().unwrap().0) {
                best = Some((key, (dim_l, dim_r)));
            }
        }
        let (key, (dim_l, dim_r)) = best.expect("range is never empty");
        bounds[j] = key.2;
        dims[j - 1] = dim_l;
        last_right_dim = Some(dim_r);
    }

    // The last segment's anchor is the fixed final boundary, so its rank at
    // the chosen previous boundary is already known; a one-segment stream
    // still needs its single probe.
    dims[m - 1] = match last_right_dim {
        Some(d) => d,
        None => probe.dim(bounds[0], bounds[m]),
    };
    Ok(assemble(bounds, dims))
}

/// Number of positions where either adjoining segment's rank is estimated to
/// change across the shiftable range, from ranks probed at the range edges
/// and center. Clamped to at least 1.
pub fn estimate_kj(
    c_ll: usize,
    c_lc: usize,
    c_lr: usize,
    c_rl: usize,
    c_rc: usize,
    c_rr: usize,
) -> usize {
    let (ll, lc, lr) = (c_ll as i64, c_lc as i64, c_lr as i64);
    let (rl, rc, rr) = (c_rl as i64, c_rc as i64, c_rr as i64);
    let k = if lr <= rr && ll < rl {
        lr - ll
    } else if lr > rr && ll < rl && lc <= rc {
        (lc - ll) + rc.min(lr) - lc.min(rr)
    } else if lr > rr && ll < rl && lc > rc {
        (rc - rr) + lc.min(rl) - rc.min(ll)
    } else {
        rl - rr
    };
    k.max(1) as usize
}

/// Number of equispaced probes the budgeted step uses:
/// `round(sqrt(2 k delta) - 2)`, clamped to `[0, 2 delta - 1]`.
pub fn coarse_step2_points(k: usize, delta: usize) -> usize {
    if delta == 0 {
        return 0;
    }
    let u = (2.0 * k as f64 * delta as f64).sqrt() - 2.0;
    (u.round().max(0.0) as usize).min(2 * delta - 1)
}

/// Minimum of the probe-count model `f(u) = 2((3 + u) + k * delta / (u/2 + 1))`,
/// attained at `u = sqrt(2 k delta) - 2`.
pub fn coarse_min_probe_bound(k: usize, delta: usize) -> f64 {
    4.0 * (2.0 * k as f64 * delta as f64).sqrt() + 2.0
}

/// Per-boundary record of a coarse-to-fine run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryAudit {
    /// Estimated number of rank-change positions in the range.
    pub k_est: usize,
    /// Equispaced probes used in the budgeted step.
    pub step2_points: usize,
    /// Dimensionality evaluations spent on this boundary.
    pub evals: u64,
    /// Effective (clipped) half-width of the range.
    pub delta_eff: usize,
}

struct BoundarySearch<'a, 'b> {
    probe: &'a DimProbe<'b>,
    left: usize,
    right: usize,
    cache: BTreeMap<usize, (usize, usize)>,
}

impl BoundarySearch<'_, '_> {
    fn dims_at(&mut self, t: usize) -> (usize, usize) {
        if let Some(&d) = self.cache.get(&t) {
            return d;
        }
        let d = (self.probe.dim(self.left, t), self.probe.dim(t, self.right));
        self.cache.insert(t, d);
        d
    }
}

/// Coarse-to-fine placement of one boundary between `left` (already fixed)
/// and `right0` (still at its initial position).
///
/// Step 1 probes the range edges and center; step 2 probes `u` equispaced
/// interior points with `u` chosen from the estimated number of rank
/// changes; step 3 bisects every probed interval across which either
/// segment's rank changes, down to unit resolution. The boundary goes to the
/// probed candidate minimizing the local objective.
pub fn coarse_to_fine_boundary(
    left: usize,
    center: usize,
    right0: usize,
    delta: usize,
    probe: &DimProbe,
) -> (usize, (usize, usize), BoundaryAudit) {
    let evals_before = probe.evals();
    let range = ShiftableRange::clipped(center, delta, left, right0);
    let mut search = BoundarySearch {
        probe,
        left,
        right: right0,
        cache: BTreeMap::new(),
    };

    if range.delta == 0 {
        let dims = search.dims_at(center);
        let audit = BoundaryAudit {
            k_est: 0,
            step2_points: 0,
            evals: probe.evals() - evals_before,
            delta_eff: 0,
        };
        return (center, dims, audit);
    }

    let (ll, rl) = search.dims_at(range.lo());
    let (lc, rc) = search.dims_at(center);
    let (lr, rr) = search.dims_at(range.hi());
    let k = estimate_kj(ll, lc, lr, rl, rc, rr);
    let u = coarse_step2_points(k, range.delta);
    let width = 2 * range.delta;
    for i in 1..=u {
        let offset = (width as f64 * i as f64 / (u + 1) as f64).round() as usize;
        search.dims_at(range.lo() + offset.min(width));
    }

    // Bisect every interval between adjacent probed points whose ranks
    // disagree on either side.
    let mut stack: Vec<(usize, usize)> = {
        let keys: Vec<usize> = search.cache.keys().copied().collect();
        keys.windows(2).map(|w| (w[0], w[1])).collect()
    };
    while let Some((a, b)) = stack.pop() {
        if b - a < 2 {
            continue;
        }
        let da = search.dims_at(a);
        let db = search.dims_at(b);
        if da == db {
            continue;
        }
        let mid = (a + b) / 2;
        search.dims_at(mid);
        stack.push((a, mid));
        stack.push((mid, b));
    }

    let mut best: BestCandidate = None;
    for (&t, &(dim_l, dim_r)) in &search.cache {
        let obj = local_objective(left, t, right0, dim_l, dim_r);
        let key = (obj, t.abs_diff(center), t);
        if best.is_none() || better(key, best.as_ref().unwrap().0) {
            best = Some((key, (dim_l, dim_r)));
        }
    }
    let (key, dims) = best.expect("at least the center is probed");
    let audit = BoundaryAudit {
        k_est: k,
        step2_points: u,
        evals: probe.evals() - evals_before,
        delta_eff: range.delta,
    };
    (key.2, dims, audit)
}

/// Forward recursion with coarse-to-fine boundary placement.
pub fn coarse_to_fine(
    initial: &SegmentationResult,
    delta: usize,
    probe: &DimProbe,
) -> Result<(SegmentationResult, Vec<BoundaryAudit>)> {
    let b0 = &initial.boundaries;
    let m = b0.len() - 1;
    let mut bounds = b0.clone();
    let mut dims = vec![0usize; m];
    let mut audits = Vec::with_capacity(m.saturating_sub(1));
    let mut last_right_dim = None;

    for j in 1..m {
        let (chosen, (dim_l, dim_r), audit) =
            coarse_to_fine_boundary(bounds[j - 1], b0[j], b0[j + 1], delta, probe);
        bounds[j] = chosen;
        dims[j - 1] = dim_l;
        last_right_dim = Some(dim_r);
        audits.push(audit);
    }
    dims[m - 1] = match last_right_dim {
        Some(d) => d,
        None => probe.dim(bounds[0], bounds[m]),
    };
    Ok((assemble(bounds, dims), audits))
}

/// Guard on the exact method: `m * (2 delta + 1)^2` transition evaluations.
pub const DP_PROBE_GUARD: u64 = 10_000_000;

/// Exact minimizer of the segmentation objective subject to each boundary
/// staying inside its shiftable range. Reference oracle for the heuristics;
/// refuses instances whose transition count exceeds [`DP_PROBE_GUARD`].
pub fn dp_segment(
    m: usize,
    delta: usize,
    probe: &DimProbe,
) -> Result<SegmentationResult> {
    let positions = probe.positions();
    let b0 = equi_boundaries(positions, m)?;
    let width = (2 * delta + 1) as u64;
    if m as u64 * width * width > DP_PROBE_GUARD {
        return Err(Error::InstanceTooLarge(format!(
            "dp needs about {} probes, guard is {DP_PROBE_GUARD}",
            m as u64 * width * width
        )));
    }
    if m == 1 {
        let dims = vec![probe.dim(0, positions)];
        return Ok(assemble(b0, dims));
    }

    // Candidate positions per interior boundary, clipped to valid interior
    // positions; ordering between choices is enforced by the transitions.
    let candidates: Vec<Vec<usize>> = (1..m)
        .map(|j| {
            let lo = b0[j].saturating_sub(delta).max(1);
            let hi = (b0[j] + delta).min(positions - 1);
            (lo..=hi).collect()
        })
        .collect();

    // cost[j][i]: best weighted rank sum of segments 1..=j with boundary j at
    // candidates[j-1][i].
    let mut cost: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
    let mut parent: Vec<Vec<usize>> = Vec::with_capacity(m - 1);

    let first: Vec<f64> = candidates[0]
        .iter()
        .map(|&t| t as f64 * probe.dim(0, t) as f64)
        .collect();
    cost.push(first);
    parent.push(vec![usize::MAX; candidates[0].len()]);

    for j in 2..m {
        let prev = &candidates[j - 2];
        let cur = &candidates[j - 1];
        let mut row = vec![f64::INFINITY; cur.len()];
        let mut par = vec![usize::MAX; cur.len()];
        for (ci, &t) in cur.iter().enumerate() {
            for (pi, &s) in prev.iter().enumerate() {
                if s >= t || !cost[j - 2][pi].is_finite() {
                    continue;
                }
                let c = cost[j - 2][pi] + (t - s) as f64 * probe.dim(s, t) as f64;
                if c < row[ci] {
                    row[ci] = c;
                    par[ci] = pi;
                }
            }
        }
        cost.push(row);
        parent.push(par);
    }

    let last = &candidates[m - 2];
    let mut best_total = f64::INFINITY;
    let mut best_idx = usize::MAX;
    for (i, &t) in last.iter().enumerate() {
        if !cost[m - 2][i].is_finite() {
            continue;
        }
        let total = cost[m - 2][i] + (positions - t) as f64 * probe.dim(t, positions) as f64;
        if total < best_total {
            best_total = total;
            best_idx = i;
        }
    }
    if best_idx == usize::MAX {
        return Err(Error::range("no feasible boundary chain"));
    }

    let mut bounds = vec![0usize; m + 1];
    bounds[m] = positions;
    let mut idx = best_idx;
    for j in (1..m).rev() {
        bounds[j] = candidates[j - 1][idx];
        idx = parent[j - 1][idx];
    }
    let dims: Vec<usize> = bounds.windows(2).map(|w| probe.dim(w[0], w[1])).collect();
    Ok(assemble(bounds, dims))
}

/// Which segmentation method an index was built with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Plain equi-partition.
    None,
    Local,
    Coarse,
    Dp,
}

impl Method {
    pub fn as_u8(self) -> u8 {
        match self {
            Method::None => 0,
            Method::Local => 1,
            Method::Coarse => 2,
            Method::Dp => 3,
        }
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            0 => Method::None,
            1 => Method::Local,
            2 => Method::Coarse,
            3 => Method::Dp,
            other => return Err(Error::format(format!("unknown method tag {other}"))),
        })
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Method::None,
            "local" => Method::Local,
            "coarse" => Method::Coarse,
            "dp" => Method::Dp,
            other => {
                return Err(Error::config(format!(
                    "unknown segmentation method '{other}' (none|local|coarse|dp)"
                )))
            }
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Local => "local",
            Method::Coarse => "coarse",
            Method::Dp => "dp",
        }
    }
}

//! Piecewise-linear representation of the histogram trajectory.
//!
//! Sliding-window histograms move slowly, so a run of consecutive positions
//! is well captured by a low-rank affine subspace: the segment mean plus the
//! leading eigenvectors of the segment covariance, keeping the minimal rank
//! whose cumulative contribution rate reaches the threshold `sigma`.
//!
//! A histogram compresses to its subspace coordinates `z` plus the residual
//! norm `delta`, and distances between such compressed features sandwich the
//! original histogram distance:
//!
//! ```text
//! ||z_s - z_q||  <=  ||y_s - y_q||  <=  ||x_s - x_q||
//! ```
//!
//! which is what lets the search engine discard positions from compressed
//! features alone without ever dismissing a true match.
//!
//! Covariances are always accumulated in `f64`. Histogram counts are
//! integers, so the accumulated sums are exact; both the direct fit and the
//! prefix-table fit assemble the covariance through one shared code path and
//! therefore agree bitwise.

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::error::{Error, Result};
use crate::histogram::{histogram_at, Histogram};
use crate::scalar::Real;
use crate::vq::CodewordSeq;

/// One segment of the trajectory: a half-open position interval together
/// with its affine subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment<F: Real> {
    /// First position covered (inclusive).
    pub start: usize,
    /// One past the last position covered.
    pub end: usize,
    /// Centroid of the member histograms.
    pub mean: DVector<F>,
    /// Column-orthonormal basis, `bins x dim`.
    pub basis: DMatrix<F>,
    /// Contribution threshold the rank was chosen for.
    pub sigma: f64,
}

impl<F: Real> Segment<F> {
    /// Retained rank `m`.
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Histogram dimensionality `n`.
    pub fn bins(&self) -> usize {
        self.basis.nrows()
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, position: usize) -> bool {
        (self.start..self.end).contains(&position)
    }

    fn check_bins(&self, x: &Histogram) -> Result<()> {
        if x.bins() != self.bins() {
            return Err(Error::shape(format!(
                "histogram has {} bins, segment expects {}",
                x.bins(),
                self.bins()
            )));
        }
        Ok(())
    }

    /// Subspace coordinates of `x`: `basis' * (x - mean)`.
    pub fn project(&self, x: &Histogram) -> Result<DVector<F>> {
        self.check_bins(x)?;
        Ok(self.project_vector(&x.to_vector()))
    }

    pub(crate) fn project_vector(&self, x: &DVector<F>) -> DVector<F> {
        self.basis.tr_mul(&(x - &self.mean))
    }

    /// Maps coordinates back into histogram space: `basis * z + mean`.
    pub fn reconstruct(&self, z: &DVector<F>) -> Result<DVector<F>> {
        if z.len() != self.dim() {
            return Err(Error::shape(format!(
                "coordinates of length {} for a rank-{} segment",
                z.len(),
                self.dim()
            )));
        }
        Ok(&self.basis * z + &self.mean)
    }

    /// Residual norm of `x` against the segment subspace.
    pub fn projection_distance(&self, x: &Histogram) -> Result<F> {
        self.check_bins(x)?;
        let xv = x.to_vector();
        Ok(self.projection_distance_vector(&xv))
    }

    pub(crate) fn projection_distance_vector(&self, x: &DVector<F>) -> F {
        let z = self.project_vector(x);
        let back = &self.basis * z + &self.mean;
        (x - back).norm()
    }

    /// Compresses `x` into `(z, delta)`.
    pub fn compress(&self, x: &Histogram) -> Result<CompressedFeature<F>> {
        self.check_bins(x)?;
        Ok(self.compress_vector(&x.to_vector()))
    }

    pub(crate) fn compress_vector(&self, x: &DVector<F>) -> CompressedFeature<F> {
        let z = self.project_vector(x);
        let back = &self.basis * &z + &self.mean;
        let delta = (x - back).norm();
        CompressedFeature { z, delta }
    }

    /// Checks the structural invariants (orthonormal basis, sane interval).
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.start >= self.end {
            return Err(Error::invariant(format!(
                "segment interval [{}, {}) is empty",
                self.start, self.end
            )));
        }
        let m = self.dim();
        if m == 0 || m > self.bins() {
            return Err(Error::invariant(format!("segment rank {m} out of range")));
        }
        let gram = self.basis.tr_mul(&self.basis);
        for i in 0..m {
            for j in 0..m {
                let expect = if i == j { 1.0 } else { 0.0 };
                let got = gram[(i, j)].to_f64().unwrap();
                if (got - expect).abs() > tol {
                    return Err(Error::invariant(format!(
                        "basis not orthonormal: gram[{i},{j}] = {got}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Projected coordinates plus embedded projection distance.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedFeature<F: Real> {
    pub z: DVector<F>,
    pub delta: F,
}

impl<F: Real> CompressedFeature<F> {
    /// Rank of the owning segment.
    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// Euclidean distance between compressed features of the same segment.
pub fn compressed_distance<F: Real>(
    a: &CompressedFeature<F>,
    b: &CompressedFeature<F>,
) -> Result<F> {
    if a.dim() != b.dim() {
        return Err(Error::SegmentMismatch(format!(
            "compressed features of rank {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(compressed_distance_unchecked(a, b))
}

pub(crate) fn compressed_distance_unchecked<F: Real>(
    a: &CompressedFeature<F>,
    b: &CompressedFeature<F>,
) -> F {
    let mut acc = F::zero();
    for i in 0..a.z.len() {
        let d = a.z[i] - b.z[i];
        acc += d * d;
    }
    let dd = a.delta - b.delta;
    acc += dd * dd;
    Float::sqrt(acc)
}

/// Bins whose covariance row is not identically zero. Histogram segments
/// routinely use a small subset of the alphabet, and absent bins produce
/// exactly-zero rows (the sums are exact integers), so deflating them is
/// exact — and it sidesteps solver breakdowns on the resulting massively
/// repeated zero eigenvalue.
fn active_support(cov: &DMatrix<f64>) -> Vec<usize> {
    (0..cov.nrows())
        .filter(|&i| cov.row(i).iter().any(|&v| v != 0.0))
        .collect()
}

fn gather(cov: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(active.len(), active.len(), |i, j| cov[(active[i], active[j])])
}

/// Eigenvalues of a segment covariance, in solver order plus one zero per
/// inactive bin. Falls back to a normalized solve if the solver emits
/// non-finite values on the active block.
pub(crate) fn sym_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let active = active_support(cov);
    let mut values = Vec::with_capacity(cov.nrows());
    if !active.is_empty() {
        let small = gather(cov, &active);
        let vals = small.clone().symmetric_eigenvalues();
        if vals.iter().all(|v| v.is_finite()) {
            values.extend(vals.iter());
        } else {
            let scale = small.diagonal().amax();
            let vals = (small / scale).symmetric_eigenvalues();
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::invariant("eigenvalue computation failed"));
            }
            values.extend(vals.iter().map(|v| v * scale));
        }
    }
    values.resize(cov.nrows(), 0.0);
    Ok(values)
}

/// Full eigendecomposition with the same deflation; inactive bins get unit
/// vectors with zero eigenvalues.
pub(crate) fn sym_eigen(cov: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = cov.nrows();
    let active = active_support(cov);
    let mut values = Vec::with_capacity(n);
    let mut vectors = DMatrix::<f64>::zeros(n, n);

    if !active.is_empty() {
        let small = gather(cov, &active);
        let eig = small.clone().symmetric_eigen();
        let (vals, vecs) = if eig.eigenvalues.iter().all(|v| v.is_finite()) {
            (eig.eigenvalues, eig.eigenvectors)
        } else {
            let scale = small.diagonal().amax();
            let eig = (small / scale).symmetric_eigen();
            if !eig.eigenvalues.iter().all(|v| v.is_finite()) {
                return Err(Error::invariant("eigendecomposition failed"));
            }
            (eig.eigenvalues * scale, eig.eigenvectors)
        };
        for k in 0..active.len() {
            let col = values.len();
            values.push(vals[k]);
            for (r, &row) in active.iter().enumerate() {
                vectors[(row, col)] = vecs[(r, k)];
            }
        }
    }
    let mut is_active = vec![false; n];
    for &i in &active {
        is_active[i] = true;
    }
    for (i, &act) in is_active.iter().enumerate() {
        if !act {
            let col = values.len();
            values.push(0.0);
            vectors[(i, col)] = 1.0;
        }
    }
    Ok((values, vectors))
}

/// Minimal rank whose cumulative contribution rate reaches `sigma`.
///
/// Eigenvalues may arrive in any order and may carry tiny negative noise;
/// they are clamped at zero first. A zero-variance spectrum keeps rank 1.
pub fn dims_from_eigenvalues(eigenvalues: &[f64], sigma: f64) -> Result<usize> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::config(format!("sigma {sigma} outside (0, 1]")));
    }
    let mut eigs: Vec<f64> = eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = eigs.iter().sum();
    if total <= 0.0 {
        return Ok(1);
    }
    let mut cum = 0.0;
    for (i, &l) in eigs.iter().enumerate() {
        cum += l;
        if cum >= sigma * total {
            return Ok(i + 1);
        }
    }
    Ok(eigs.len())
}

/// Exact integer sums over a run of histograms, the covariance raw material.
#[derive(Debug, Clone)]
struct MomentSums {
    count: usize,
    sum_x: Vec<f64>,
    /// Upper triangle of `sum x x'`, row-major: entry `(i, j)` for `i <= j`
    /// lives at `tri_index(i, j)`.
    sum_xx: Vec<f64>,
}

#[inline]
fn tri_len(bins: usize) -> usize {
    bins * (bins + 1) / 2
}

#[inline]
fn tri_index(bins: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < bins);
    i * bins - i * (i + 1) / 2 + j
}

impl MomentSums {
    fn zero(bins: usize) -> Self {
        MomentSums {
            count: 0,
            sum_x: vec![0.0; bins],
            sum_xx: vec![0.0; tri_len(bins)],
        }
    }

    fn add_histogram(&mut self, h: &Histogram) {
        let bins = self.sum_x.len();
        let counts = h.counts();
        self.count += 1;
        for i in 0..bins {
            let ci = f64::from(counts[i]);
            if ci == 0.0 {
                continue;
            }
            self.sum_x[i] += ci;
            let row = i * bins - i * (i + 1) / 2;
            for (j, &cj) in counts.iter().enumerate().skip(i) {
                if cj != 0 {
                    self.sum_xx[row + j] += ci * f64::from(cj);
                }
            }
        }
    }

    /// Population covariance `sum_xx / count - mean mean'`.
    fn covariance(&self) -> DMatrix<f64> {
        let bins = self.sum_x.len();
        let inv = 1.0 / self.count as f64;
        let mean: Vec<f64> = self.sum_x.iter().map(|&s| s * inv).collect();
        let mut cov = DMatrix::zeros(bins, bins);
        for i in 0..bins {
            for j in i..bins {
                let v = self.sum_xx[tri_index(bins, i, j)] * inv - mean[i] * mean[j];
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    fn mean(&self) -> DVector<f64> {
        let inv = 1.0 / self.count as f64;
        DVector::from_iterator(self.sum_x.len(), self.sum_x.iter().map(|&s| s * inv))
    }
}

/// Shared fit path: covariance sums -> sorted spectrum -> segment.
fn segment_from_sums<F: Real>(start: usize, sums: &MomentSums, sigma: f64) -> Result<Segment<F>> {
    if sums.count == 0 {
        return Err(Error::range("cannot fit a segment over an empty range"));
    }
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(Error::config(format!("sigma {sigma} outside (0, 1]")));
    }
    let bins = sums.sum_x.len();
    let cov = sums.covariance();
    let (eigenvalues, eigenvectors) = sym_eigen(&cov)?;

    // Descending eigenvalue order; stable for repeated values.
    let mut order: Vec<usize> = (0..bins).collect();
    order.sort_by(|&a, &b| eigenvalues[b].partial_cmp(&eigenvalues[a]).unwrap());
    let sorted: Vec<f64> = order.iter().map(|&i| eigenvalues[i].max(0.0)).collect();
    let dim = dims_from_eigenvalues(&sorted, sigma)?;

    let mut columns: Vec<DVector<f64>> = Vec::with_capacity(dim);
    for &i in order.iter().take(dim) {
        let mut col: DVector<f64> = eigenvectors.column(i).into_owned();
        // Canonical sign: the largest-magnitude entry is positive.
        let mut lead = 0usize;
        for k in 1..bins {
            if col[k].abs() > col[lead].abs() {
                lead = k;
            }
        }
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        columns.push(col);
    }
    let basis64 = DMatrix::from_columns(&columns);

    Ok(Segment {
        start,
        end: start + sums.count,
        mean: sums.mean().map(F::from_f64_lossy),
        basis: basis64.map(F::from_f64_lossy),
        sigma,
    })
}

/// Fits a segment over explicit member histograms starting at `start`.
pub fn fit_segment<F: Real>(
    histograms: &[Histogram],
    start: usize,
    sigma: f64,
) -> Result<Segment<F>> {
    if histograms.is_empty() {
        return Err(Error::range("cannot fit a segment over an empty range"));
    }
    let bins = histograms[0].bins();
    let mut sums = MomentSums::zero(bins);
    for h in histograms {
        if h.bins() != bins {
            return Err(Error::shape("histograms of mixed bin counts"));
        }
        sums.add_histogram(h);
    }
    segment_from_sums(start, &sums, sigma)
}

/// Prefix sums of histogram first and second moments over every window
/// position of a codeword stream. Any range's covariance spectrum then costs
/// one eigendecomposition, independent of the range length — the probe the
/// dynamic segmentation methods are built on.
///
/// Sums are held in `f64`, which represents these integer-valued sums
/// exactly at any realistic stream scale. Memory is `O(positions x bins^2)`;
/// see [`CovariancePrefix::estimated_bytes`].
#[derive(Debug, Clone)]
pub struct CovariancePrefix {
    bins: usize,
    window: u32,
    positions: usize,
    sum_x: Vec<f64>,
    sum_xx: Vec<f64>,
}

impl CovariancePrefix {
    /// Bytes the table for `positions` window positions over `bins` bins
    /// will occupy.
    pub fn estimated_bytes(positions: usize, bins: usize) -> usize {
        (positions + 1) * (bins + tri_len(bins)) * std::mem::size_of::<f64>()
    }

    /// Builds the table over all `len - window + 1` positions of the stream.
    pub fn build(codes: &CodewordSeq, window: u32, bins: usize) -> Result<Self> {
        if codes.len() < window as usize {
            return Err(Error::range(format!(
                "stream of {} frames shorter than window {window}",
                codes.len()
            )));
        }
        let positions = codes.len() - window as usize + 1;
        let tri = tri_len(bins);
        let mut sum_x = vec![0.0f64; (positions + 1) * bins];
        let mut sum_xx = vec![0.0f64; (positions + 1) * tri];

        let mut h = histogram_at(codes, 0, window, bins)?;
        for t in 0..positions {
            let (prev_x, next_x) = sum_x.split_at_mut((t + 1) * bins);
            next_x[..bins].copy_from_slice(&prev_x[t * bins..]);
            let (prev_xx, next_xx) = sum_xx.split_at_mut((t + 1) * tri);
            next_xx[..tri].copy_from_slice(&prev_xx[t * tri..]);

            let counts = h.counts();
            for i in 0..bins {
                let ci = f64::from(counts[i]);
                if ci == 0.0 {
                    continue;
                }
                next_x[i] += ci;
                let row = i * bins - i * (i + 1) / 2;
                for j in i..bins {
                    let cj = f64::from(counts[j]);
                    if cj != 0.0 {
                        next_xx[row + j] += ci * cj;
                    }
                }
            }
            if t + 1 < positions {
                h.slide_in_place(
                    codes.code(t) as usize,
                    codes.code(t + window as usize) as usize,
                )?;
            }
        }
        Ok(CovariancePrefix {
            bins,
            window,
            positions,
            sum_x,
            sum_xx,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn window(&self) -> u32 {
        self.window
    }

    /// Number of window positions covered.
    pub fn positions(&self) -> usize {
        self.positions
    }

    fn check_range(&self, t_i: usize, t_j: usize) -> Result<()> {
        if t_i >= t_j {
            return Err(Error::range(format!("inverted range [{t_i}, {t_j})")));
        }
        if t_j > self.positions {
            return Err(Error::range(format!(
                "range end {t_j} exceeds {} positions",
                self.positions
            )));
        }
        Ok(())
    }

    fn sums_for(&self, t_i: usize, t_j: usize) -> MomentSums {
        let bins = self.bins;
        let tri = tri_len(bins);
        let lo_x = &self.sum_x[t_i * bins..(t_i + 1) * bins];
        let hi_x = &self.sum_x[t_j * bins..(t_j + 1) * bins];
        let lo_xx = &self.sum_xx[t_i * tri..(t_i + 1) * tri];
        let hi_xx = &self.sum_xx[t_j * tri..(t_j + 1) * tri];
        MomentSums {
            count: t_j - t_i,
            sum_x: hi_x.iter().zip(lo_x).map(|(&h, &l)| h - l).collect(),
            sum_xx: hi_xx.iter().zip(lo_xx).map(|(&h, &l)| h - l).collect(),
        }
    }

    /// Covariance of the histograms over `[t_i, t_j)`.
    pub fn covariance(&self, t_i: usize, t_j: usize) -> Result<DMatrix<f64>> {
        self.check_range(t_i, t_j)?;
        Ok(self.sums_for(t_i, t_j).covariance())
    }

    /// Subspace dimensionality of the segment `[t_i, t_j)` at `sigma`:
    /// identical to the rank [`fit_segment`] would retain, at the cost of a
    /// single eigenvalue computation.
    pub fn range_dimension(&self, t_i: usize, t_j: usize, sigma: f64) -> Result<usize> {
        if !(sigma > 0.0 && sigma <= 1.0) {
            return Err(Error::config(format!("sigma {sigma} outside (0, 1]")));
        }
        let cov = self.covariance(t_i, t_j)?;
        dims_from_eigenvalues(&sym_eigenvalues(&cov)?, sigma)
    }

    /// Full segment fit (mean, basis, rank) over `[t_i, t_j)`.
    pub fn fit_range<F: Real>(&self, t_i: usize, t_j: usize, sigma: f64) -> Result<Segment<F>> {
        self.check_range(t_i, t_j)?;
        segment_from_sums(t_i, &self.sums_for(t_i, t_j), sigma)
    }
}

/// Free-function form of [`CovariancePrefix::range_dimension`].
pub fn range_dimension(
    prefix: &CovariancePrefix,
    t_i: usize,
    t_j: usize,
    sigma: f64,
) -> Result<usize> {
    prefix.range_dimension(t_i, t_j, sigma)
}

/// Fits the segment `[start, end)` straight off the codeword stream with one
/// sliding pass, without materializing member histograms or a prefix table.
/// Produces bitwise the same segment as the other fit paths.
pub fn fit_stream_segment<F: Real>(
    codes: &CodewordSeq,
    window: u32,
    bins: usize,
    start: usize,
    end: usize,
    sigma: f64,
) -> Result<Segment<F>> {
    let w = window as usize;
    if start >= end {
        return Err(Error::range(format!("inverted range [{start}, {end})")));
    }
    if end + w > codes.len() + 1 {
        return Err(Error::range(format!(
            "segment [{start}, {end}) exceeds {} positions",
            codes.len() + 1 - w
        )));
    }
    let mut h = histogram_at(codes, start, window, bins)?;
    let mut sums = MomentSums::zero(bins);
    for t in start..end {
        sums.add_histogram(&h);
        if t + 1 < end {
            h.slide_in_place(codes.code(t) as usize, codes.code(t + w) as usize)?;
        }
    }
    segment_from_sums(start, &sums, sigma)
}

/// Compresses every position of `segment` straight off the codeword stream.
pub fn compress_stream_run<F: Real>(
    codes: &CodewordSeq,
    window: u32,
    bins: usize,
    segment: &Segment<F>,
) -> Result<Vec<CompressedFeature<F>>> {
    let w = window as usize;
    let mut h = histogram_at(codes, segment.start, window, bins)?;
    let mut run = Vec::with_capacity(segment.len());
    for t in segment.start..segment.end {
        run.push(segment.compress_vector(&h.to_vector()));
        if t + 1 < segment.end {
            h.slide_in_place(codes.code(t) as usize, codes.code(t + w) as usize)?;
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histogram::dist2;
    use rand::prelude::*;

    fn hist(counts: &[u32]) -> Histogram {
        let w: u32 = counts.iter().sum();
        Histogram::from_counts(counts.to_vec(), w).unwrap()
    }

    /// Segment with mean (2,2,0) and single basis column (1/sqrt2, 1/sqrt2, 0).
    fn toy_segment() -> Segment<f64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Segment {
            start: 0,
            end: 2,
            mean: DVector::from_vec(vec![2.0, 2.0, 0.0]),
            basis: DMatrix::from_vec(3, 1, vec![s, s, 0.0]),
            sigma: 0.9,
        }
    }

    #[test]
    fn dims_cumulative_contribution() {
        assert_eq!(dims_from_eigenvalues(&[5.0, 3.0, 1.0, 1.0], 0.9).unwrap(), 3);
        assert_eq!(dims_from_eigenvalues(&[5.0, 3.0, 1.0, 1.0], 0.5).unwrap(), 1);
        assert_eq!(dims_from_eigenvalues(&[5.0, 3.0, 1.0, 1.0], 1.0).unwrap(), 4);
        // Zero spectrum keeps rank 1, negatives are clamped first.
        assert_eq!(dims_from_eigenvalues(&[0.0, 0.0], 0.9).unwrap(), 1);
        assert_eq!(dims_from_eigenvalues(&[-1e-18, 0.0], 0.9).unwrap(), 1);
        assert!(dims_from_eigenvalues(&[1.0], 0.0).is_err());
    }

    #[test]
    fn identical_histograms_fit_degenerate() {
        let hs = vec![hist(&[2, 1, 1]); 5];
        let seg: Segment<f64> = fit_segment(&hs, 3, 0.9).unwrap();
        assert_eq!(seg.dim(), 1);
        assert_eq!((seg.start, seg.end), (3, 8));
        for h in &hs {
            assert!(seg.projection_distance(&h).unwrap() < 1e-12);
        }
        seg.validate(1e-9).unwrap();
    }

    #[test]
    fn affine_line_fits_rank_one_exactly() {
        // Histograms marching along one direction in 3-D.
        let hs: Vec<Histogram> = (0..6u32).map(|k| hist(&[4 + k, 4 - k.min(4), 2])).collect();
        let seg: Segment<f64> = fit_segment(&hs[..5], 0, 0.9).unwrap();
        assert_eq!(seg.dim(), 1);
        for h in &hs[..5] {
            assert!(seg.projection_distance(h).unwrap() < 1e-9);
        }
    }

    #[test]
    fn project_reconstruct_worked_example() {
        let seg = toy_segment();
        let x = hist(&[3, 3, 0]);
        let z = seg.project(&x).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z[0] - std::f64::consts::SQRT_2).abs() < 1e-12);
        let back = seg.reconstruct(&z).unwrap();
        assert!((back - DVector::from_vec(vec![3.0, 3.0, 0.0])).norm() < 1e-12);

        // Mean projects to the origin.
        let at_mean = seg.project(&hist(&[2, 2, 0])).unwrap();
        assert!(at_mean[0].abs() < 1e-12);

        // Orthogonal offset is invisible to the projection but carried by delta.
        let x_off = hist(&[2, 2, 1]);
        let z_off = seg.project(&x_off).unwrap();
        assert!(z_off[0].abs() < 1e-12);
        assert!((seg.projection_distance(&x_off).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reconstruct_zero_is_mean() {
        let seg = toy_segment();
        let back = seg.reconstruct(&DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(back, seg.mean);
    }

    #[test]
    fn residual_orthogonal_to_basis() {
        let seg = toy_segment();
        for counts in [[5u32, 1, 2], [0, 4, 4], [8, 0, 0]] {
            let x = hist(&counts);
            let z = seg.project(&x).unwrap();
            let back = seg.reconstruct(&z).unwrap();
            let resid = x.to_vector::<f64>() - back;
            let dot = seg.basis.tr_mul(&resid);
            assert!(dot[0].abs() < 1e-12);
        }
    }

    #[test]
    fn pythagoras_for_random_histograms() {
        let mut rng = StdRng::seed_from_u64(7);
        let seg = toy_segment();
        for _ in 0..200 {
            let counts: Vec<u32> = (0..3).map(|_| rng.random_range(0..9)).collect();
            let x = hist(&counts);
            let z = seg.project(&x).unwrap();
            let delta = seg.projection_distance(&x).unwrap();
            let centered = (x.to_vector::<f64>() - &seg.mean).norm_squared();
            assert!((delta * delta + z.norm_squared() - centered).abs() < 1e-9);
        }
    }

    #[test]
    fn compress_worked_examples() {
        let seg = toy_segment();
        let y_on = seg.compress(&hist(&[3, 3, 0])).unwrap();
        assert!((y_on.z[0] - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!(y_on.delta.abs() < 1e-12);

        let y_off = seg.compress(&hist(&[2, 2, 1])).unwrap();
        assert!(y_off.z[0].abs() < 1e-12);
        assert!((y_off.delta - 1.0).abs() < 1e-12);

        // Worked instance of the bounding chain: sqrt2 <= sqrt3 <= sqrt3.
        let d_compressed = compressed_distance(&y_on, &y_off).unwrap();
        let d_orig = (DVector::<f64>::from_vec(vec![3.0, 3.0, 0.0])
            - DVector::<f64>::from_vec(vec![2.0, 2.0, 1.0]))
        .norm();
        let d_projected = (&y_on.z - &y_off.z).norm();
        assert!((d_compressed - 3.0f64.sqrt()).abs() < 1e-12);
        assert!((d_orig - 3.0f64.sqrt()).abs() < 1e-12);
        assert!(d_projected <= d_compressed + 1e-12);
        assert!(d_compressed <= d_orig + 1e-12);
    }

    #[test]
    fn compressed_distance_identity_and_mismatch() {
        let seg = toy_segment();
        let y = seg.compress(&hist(&[4, 1, 1])).unwrap();
        assert_eq!(compressed_distance(&y, &y).unwrap(), 0.0);
        let other = CompressedFeature {
            z: DVector::from_vec(vec![0.0, 0.0]),
            delta: 0.0,
        };
        assert!(matches!(
            compressed_distance(&y, &other).unwrap_err(),
            Error::SegmentMismatch(_)
        ));
    }

    fn random_walk_codes(rng: &mut StdRng, len: usize, bins: u16) -> CodewordSeq {
        let mut codes = Vec::with_capacity(len);
        let mut state: u16 = rng.random_range(0..bins);
        for _ in 0..len {
            if rng.random_range(0..4) == 0 {
                state = rng.random_range(0..bins);
            }
            codes.push(state);
        }
        CodewordSeq::new(codes)
    }

    #[test]
    fn bounding_chain_on_fitted_segments() {
        let mut rng = StdRng::seed_from_u64(42);
        let bins = 6usize;
        let w = 12u32;
        for _ in 0..20 {
            let codes = random_walk_codes(&mut rng, 140, bins as u16);
            let positions = codes.len() - w as usize + 1;
            let hists: Vec<Histogram> = (0..positions)
                .map(|t| histogram_at(&codes, t, w, bins).unwrap())
                .collect();
            let seg: Segment<f64> = fit_segment(&hists, 0, 0.9).unwrap();
            for _ in 0..200 {
                let a = &hists[rng.random_range(0..positions)];
                let qc: Vec<u32> = {
                    // Any histogram with the same window total works as a query.
                    let mut left = w;
                    let mut v = vec![0u32; bins];
                    while left > 0 {
                        v[rng.random_range(0..bins)] += 1;
                        left -= 1;
                    }
                    v
                };
                let b = Histogram::from_counts(qc, w).unwrap();
                let ya = seg.compress(a).unwrap();
                let yb = seg.compress(&b).unwrap();
                let dz = (&ya.z - &yb.z).norm();
                let dy = compressed_distance(&ya, &yb).unwrap();
                let dx = (dist2(a, &b).unwrap() as f64).sqrt();
                assert!(dz <= dy + 1e-9, "dz {dz} > dy {dy}");
                assert!(dy <= dx + 1e-9, "dy {dy} > dx {dx}");
            }
        }
    }

    #[test]
    fn projector_idempotent() {
        let mut rng = StdRng::seed_from_u64(3);
        let codes = random_walk_codes(&mut rng, 120, 5);
        let hists: Vec<Histogram> = (0..codes.len() - 9)
            .map(|t| histogram_at(&codes, t, 10, 5).unwrap())
            .collect();
        let seg: Segment<f64> = fit_segment(&hists, 0, 0.95).unwrap();
        for h in hists.iter().step_by(7) {
            let z = seg.project(h).unwrap();
            let back = seg.reconstruct(&z).unwrap();
            let z2 = seg.basis.tr_mul(&(back - &seg.mean));
            assert!((z2 - z).norm() < 1e-9);
        }
    }

    #[test]
    fn contribution_minimality() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..10 {
            let codes = random_walk_codes(&mut rng, 160, 7);
            let hists: Vec<Histogram> = (0..codes.len() - 11)
                .map(|t| histogram_at(&codes, t, 12, 7).unwrap())
                .collect();
            let mut sums = MomentSums::zero(7);
            for h in &hists {
                sums.add_histogram(h);
            }
            let eigs = sym_eigenvalues(&sums.covariance()).unwrap();
            let mut sorted: Vec<f64> = eigs.iter().map(|&l| l.max(0.0)).collect();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let total: f64 = sorted.iter().sum();
            if total <= 0.0 {
                continue;
            }
            let dim = dims_from_eigenvalues(&sorted, 0.9).unwrap();
            let below: f64 = sorted.iter().take(dim - 1).sum();
            assert!(below < 0.9 * total, "rank {dim} not minimal");
        }
    }

    #[test]
    fn range_dimension_matches_naive_and_fit() {
        let mut rng = StdRng::seed_from_u64(5);
        let bins = 5usize;
        let w = 8u32;
        let codes = random_walk_codes(&mut rng, 300, bins as u16);
        let prefix = CovariancePrefix::build(&codes, w, bins).unwrap();
        let positions = prefix.positions();
        for _ in 0..40 {
            let a = rng.random_range(0..positions - 1);
            let b = rng.random_range(a + 1..positions.min(a + 80) + 1);
            let via_table = prefix.range_dimension(a, b, 0.9).unwrap();

            // Naive covariance straight from the member histograms.
            let hists: Vec<Histogram> = (a..b)
                .map(|t| histogram_at(&codes, t, w, bins).unwrap())
                .collect();
            let count = hists.len() as f64;
            let mut mean = DVector::<f64>::zeros(bins);
            for h in &hists {
                mean += h.to_vector::<f64>();
            }
            mean /= count;
            let mut cov = DMatrix::<f64>::zeros(bins, bins);
            for h in &hists {
                let d = h.to_vector::<f64>() - &mean;
                cov += &d * d.transpose();
            }
            cov /= count;
            let naive =
                dims_from_eigenvalues(&sym_eigenvalues(&cov).unwrap(), 0.9).unwrap();
            assert_eq!(via_table, naive, "range [{a}, {b})");

            // And the full fit retains the same rank.
            let seg: Segment<f64> = prefix.fit_range(a, b, 0.9).unwrap();
            assert_eq!(seg.dim(), via_table);
            assert_eq!((seg.start, seg.end), (a, b));
            seg.validate(1e-9).unwrap();

            // Fit from explicit members agrees with the table fit bitwise.
            let direct: Segment<f64> = fit_segment(&hists, a, 0.9).unwrap();
            assert_eq!(direct.dim(), seg.dim());
            assert_eq!(direct.mean, seg.mean);
            assert_eq!(direct.basis, seg.basis);
        }
    }

    #[test]
    fn range_dimension_constant_range_is_one() {
        let codes = CodewordSeq::new(vec![2; 60]);
        let prefix = CovariancePrefix::build(&codes, 10, 4).unwrap();
        assert_eq!(prefix.range_dimension(0, 30, 0.9).unwrap(), 1);
    }

    #[test]
    fn range_dimension_inverted_range_rejected() {
        let codes = CodewordSeq::new(vec![0; 40]);
        let prefix = CovariancePrefix::build(&codes, 5, 2).unwrap();
        assert!(matches!(
            prefix.range_dimension(10, 10, 0.9).unwrap_err(),
            Error::Range(_)
        ));
    }

    /// Uniform sample from the set of vectors consistent with a compressed
    /// feature: fixed coordinates, residual uniform on the sphere of radius
    /// `delta` in the orthogonal complement.
    fn sample_consistent(
        seg: &Segment<f64>,
        y: &CompressedFeature<f64>,
        rng: &mut StdRng,
    ) -> DVector<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let n = seg.bins();
        loop {
            let g = DVector::from_iterator(n, (0..n).map(|_| {
                let v: f64 = StandardNormal.sample(rng);
                v
            }));
            let in_plane = &seg.basis * seg.basis.tr_mul(&g);
            let mut resid = g - in_plane;
            let norm = resid.norm();
            if norm > 1e-9 {
                resid /= norm;
                return seg.reconstruct(&y.z).unwrap() + resid * y.delta;
            }
        }
    }

    #[test]
    fn embedded_residual_tightens_expected_error() {
        // For fixed compressed features, the compressed distance wastes less
        // of the true squared distance than the bare projected distance.
        let mut rng = StdRng::seed_from_u64(21);
        let codes = random_walk_codes(&mut rng, 200, 6);
        let hists: Vec<Histogram> = (0..codes.len() - 14)
            .map(|t| histogram_at(&codes, t, 15, 6).unwrap())
            .collect();
        let seg: Segment<f64> = fit_segment(&hists, 0, 0.7).unwrap();
        assert!(seg.dim() < seg.bins(), "need a strict subspace");

        let y_s = seg.compress(&hists[10]).unwrap();
        let y_q = seg.compress(&hists[60]).unwrap();
        if y_s.delta < 1e-9 || y_q.delta < 1e-9 {
            panic!("fixture should have nonzero residuals");
        }
        let dz2 = (&y_s.z - &y_q.z).norm_squared();
        let dy2 = compressed_distance(&y_s, &y_q).unwrap().powi(2);

        let trials = 4000;
        let mut err_y = 0.0;
        let mut err_z = 0.0;
        for _ in 0..trials {
            let xs = sample_consistent(&seg, &y_s, &mut rng);
            let xq = sample_consistent(&seg, &y_q, &mut rng);
            let dx2 = (xs - xq).norm_squared();
            err_y += dx2 - dy2;
            err_z += dx2 - dz2;
        }
        err_y /= trials as f64;
        err_z /= trials as f64;
        assert!(err_y >= -1e-9, "compressed distance must lower-bound");
        assert!(
            err_y < err_z,
            "expected approximation error not reduced: {err_y} vs {err_z}"
        );
    }
}

//! Index construction and its versioned, checksummed binary format.
//!
//! An index holds everything a search needs: the stored stream's codewords
//! (histograms are rebuilt from them on demand), the segment table with each
//! segment's mean and basis, the block table, and the parameters everything
//! was built with. The file layout is fixed little-endian:
//!
//! ```text
//! "PLAI" | version u32
//! W u32 | n u32 | sigma f64 | a u64 | delta u64 | M u64 | L_S u64
//! method u8 | codebook_hash u64
//! codewords: L_S bytes (n <= 256) or L_S u16
//! per segment: start u64 | end u64 | dim u32 | mean n*f64 | basis n*dim f64 (column-major)
//! block_count u64
//! per block: segment u64 | start u64 | len u64 | z dim*f64 | delta f64 | radius f64
//! crc64 over everything above
//! ```
//!
//! Floats round-trip bit-exactly. Loading checks magic, then version, then
//! the checksum, each with its own error.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dynseg::{
    coarse_to_fine, dp_segment, equi_boundaries, equi_partition, local_optimize, BoundaryAudit,
    DimProbe, Method,
};
use crate::error::{Error, Result};
use crate::pla::{compress_stream_run, fit_stream_segment, CompressedFeature, CovariancePrefix, Segment};
use crate::sampling::{blocks_for_segment, Block};
use crate::scalar::Real;
use crate::vq::CodewordSeq;

/// Magic tag of the index file format.
pub const INDEX_MAGIC: &[u8; 4] = b"PLAI";
/// Current index format version.
pub const INDEX_VERSION: u32 = 1;
/// Default ceiling on the covariance prefix table built for dynamic
/// segmentation.
pub const DEFAULT_TABLE_BUDGET: usize = 4 << 30;

/// CRC-64/XZ (ECMA polynomial, reflected, inverted in and out).
pub fn crc64(bytes: &[u8]) -> u64 {
    const POLY: u64 = 0xC96C_5795_D787_0F42; // reflected 0x42F0E1EBA9EA3693
    static TABLE: std::sync::OnceLock<[u64; 256]> = std::sync::OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut table = [0u64; 256];
        for (i, slot) in table.iter_mut().enumerate() {
            let mut crc = i as u64;
            for _ in 0..8 {
                crc = if crc & 1 != 0 { (crc >> 1) ^ POLY } else { crc >> 1 };
            }
            *slot = crc;
        }
        table
    });
    let mut crc = !0u64;
    for &b in bytes {
        crc = table[((crc ^ u64::from(b)) & 0xFF) as usize] ^ (crc >> 8);
    }
    !crc
}

/// Everything an index build is parameterized by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexParams {
    /// Window length `W` in frames; fixed for the index's lifetime.
    pub window: u32,
    /// Histogram dimensionality `n` (the codebook size).
    pub bins: usize,
    /// Number of segments `M`.
    pub segments: usize,
    /// Contribution threshold for per-segment rank selection.
    pub sigma: f64,
    /// Block length `a` for feature sampling.
    pub block_len: usize,
    /// Shiftable-range half-width for dynamic segmentation.
    pub delta: usize,
    /// Segmentation method.
    pub method: Method,
    /// Hash of the codebook the stored stream was quantized with.
    pub codebook_hash: u64,
}

impl IndexParams {
    fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::config("window must be at least one frame"));
        }
        if self.bins == 0 || self.bins > usize::from(u16::MAX) + 1 {
            return Err(Error::config(format!("bins {} out of range", self.bins)));
        }
        if self.segments == 0 {
            return Err(Error::config("need at least one segment"));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return Err(Error::config(format!("sigma {} outside (0, 1]", self.sigma)));
        }
        if self.block_len == 0 {
            return Err(Error::config("block length must be at least 1"));
        }
        Ok(())
    }
}

/// The persisted search index.
#[derive(Debug, Clone, PartialEq)]
pub struct PlIndex<F: Real> {
    pub params: IndexParams,
    pub codes: CodewordSeq,
    pub segments: Vec<Segment<F>>,
    pub blocks: Vec<Block<F>>,
}

/// What an index build did, for stats output; never persisted.
#[derive(Debug, Clone)]
pub struct BuildStats {
    pub positions: usize,
    pub segments: usize,
    /// Length-weighted mean segment rank (the segmentation objective).
    pub mean_dim: f64,
    /// Objective of the equi-partition start, when a dynamic method ran.
    pub equi_objective: Option<f64>,
    /// Dimensionality probes spent on segmentation.
    pub probe_evals: u64,
    /// Bytes of the covariance prefix table, when one was built.
    pub table_bytes: usize,
    /// Per-boundary audit of a coarse-to-fine run.
    pub boundary_audits: Vec<BoundaryAudit>,
}

/// Builds an index with the default prefix-table memory budget.
pub fn build_index<F: Real>(
    stored: CodewordSeq,
    params: IndexParams,
) -> Result<(PlIndex<F>, BuildStats)> {
    build_index_with_budget(stored, params, DEFAULT_TABLE_BUDGET)
}

/// Builds an index; dynamic segmentation methods need a covariance prefix
/// table of `O(positions * bins^2)` doubles, refused beyond `table_budget`.
pub fn build_index_with_budget<F: Real>(
    stored: CodewordSeq,
    params: IndexParams,
    table_budget: usize,
) -> Result<(PlIndex<F>, BuildStats)> {
    params.validate()?;
    let w = params.window as usize;
    if stored.len() < w {
        return Err(Error::range(format!(
            "stream of {} frames shorter than window {w}",
            stored.len()
        )));
    }
    if let Some(&bad) = stored.as_slice().iter().find(|&&c| c as usize >= params.bins) {
        return Err(Error::range(format!(
            "codeword {bad} outside {} bins",
            params.bins
        )));
    }
    let positions = stored.len() - w + 1;
    if params.segments > positions {
        return Err(Error::config(format!(
            "cannot cut {positions} positions into {} segments",
            params.segments
        )));
    }

    let mut stats = BuildStats {
        positions,
        segments: params.segments,
        mean_dim: 0.0,
        equi_objective: None,
        probe_evals: 0,
        table_bytes: 0,
        boundary_audits: Vec::new(),
    };

    let (boundaries, table) = if params.method == Method::None {
        (equi_boundaries(positions, params.segments)?, None)
    } else {
        let estimate = CovariancePrefix::estimated_bytes(positions, params.bins);
        if estimate > table_budget {
            return Err(Error::ResourceLimit(format!(
                "covariance prefix table needs {estimate} bytes, budget is {table_budget}; \
                 use --dynseg none or a smaller stream/codebook"
            )));
        }
        let table = CovariancePrefix::build(&stored, params.window, params.bins)?;
        stats.table_bytes = estimate;
        let probe = DimProbe::new(&table, params.sigma);
        let initial = equi_partition(params.segments, &probe)?;
        stats.equi_objective = Some(initial.objective);
        let result = match params.method {
            Method::Local => local_optimize(&initial, params.delta, &probe)?,
            Method::Coarse => {
                let (result, audits) = coarse_to_fine(&initial, params.delta, &probe)?;
                stats.boundary_audits = audits;
                result
            }
            Method::Dp => dp_segment(params.segments, params.delta, &probe)?,
            Method::None => unreachable!(),
        };
        stats.probe_evals = probe.evals();
        (result.boundaries, Some(table))
    };

    // Fit, compress and summarize each segment independently.
    type FittedSegment<F> = (Segment<F>, Vec<Block<F>>);
    let jobs: Vec<(usize, usize)> = boundaries.windows(2).map(|b| (b[0], b[1])).collect();
    let per_segment: Result<Vec<FittedSegment<F>>> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(start, end))| {
            let segment: Segment<F> = match &table {
                Some(table) => table.fit_range(start, end, params.sigma)?,
                None => fit_stream_segment(&stored, params.window, params.bins, start, end, params.sigma)?,
            };
            let run = compress_stream_run(&stored, params.window, params.bins, &segment)?;
            let blocks = blocks_for_segment(j, start, &run, params.block_len)?;
            Ok((segment, blocks))
        })
        .collect();

    let mut segments = Vec::with_capacity(jobs.len());
    let mut blocks = Vec::new();
    for (segment, mut segment_blocks) in per_segment? {
        segments.push(segment);
        blocks.append(&mut segment_blocks);
    }

    stats.mean_dim = segments
        .iter()
        .map(|s| (s.len() * s.dim()) as f64)
        .sum::<f64>()
        / positions as f64;

    let index = PlIndex {
        params,
        codes: stored,
        segments,
        blocks,
    };
    index.validate()?;
    Ok((index, stats))
}

impl<F: Real> PlIndex<F> {
    /// Number of window positions the index covers.
    pub fn positions(&self) -> usize {
        self.codes.len() - self.params.window as usize + 1
    }

    /// Index of the segment containing `position`.
    pub fn segment_of(&self, position: usize) -> usize {
        debug_assert!(position < self.positions());
        self.segments
            .partition_point(|s| s.end <= position)
            .min(self.segments.len() - 1)
    }

    /// Index of the block containing `position`.
    pub fn block_of(&self, position: usize) -> usize {
        debug_assert!(position < self.positions());
        self.blocks
            .partition_point(|b| b.end() <= position)
            .min(self.blocks.len() - 1)
    }

    /// Checks every structural invariant of the index.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let w = self.params.window as usize;
        if self.codes.len() < w {
            return Err(Error::invariant("stream shorter than window"));
        }
        if self.codes.as_slice().iter().any(|&c| c as usize >= self.params.bins) {
            return Err(Error::invariant("codeword outside bins"));
        }
        let positions = self.positions();

        if self.segments.is_empty() {
            return Err(Error::invariant("no segments"));
        }
        if self.segments[0].start != 0 {
            return Err(Error::invariant("first segment must start at 0"));
        }
        if self.segments.last().unwrap().end != positions {
            return Err(Error::invariant("last segment must end at the final position"));
        }
        for pair in self.segments.windows(2) {
            if pair[0].end != pair[1].start {
                return Err(Error::invariant("segment table not contiguous"));
            }
        }
        for s in &self.segments {
            if s.bins() != self.params.bins {
                return Err(Error::invariant("segment bins mismatch"));
            }
            s.validate(1e-9)?;
        }

        if self.blocks.is_empty() || self.blocks[0].start != 0 {
            return Err(Error::invariant("blocks must start at 0"));
        }
        if self.blocks.last().unwrap().end() != positions {
            return Err(Error::invariant("blocks must cover the final position"));
        }
        for pair in self.blocks.windows(2) {
            if pair[0].end() != pair[1].start {
                return Err(Error::invariant("block table not contiguous"));
            }
        }
        for b in &self.blocks {
            let seg = self
                .segments
                .get(b.segment)
                .ok_or_else(|| Error::invariant("block references missing segment"))?;
            if b.start < seg.start || b.end() > seg.end {
                return Err(Error::invariant("block crosses its segment"));
            }
            if (b.start - seg.start) % self.params.block_len != 0 {
                return Err(Error::invariant("block start not aligned"));
            }
            if b.len == 0
                || b.len > self.params.block_len
                || (b.len < self.params.block_len && b.end() != seg.end)
            {
                return Err(Error::invariant("only a segment's last block may be short"));
            }
            if b.representative.dim() != seg.dim() {
                return Err(Error::invariant("block representative rank mismatch"));
            }
            let radius = b.radius.to_f64().unwrap();
            if !(radius >= 0.0 && radius.is_finite()) {
                return Err(Error::invariant("block radius must be a finite non-negative"));
            }
        }
        Ok(())
    }

    /// Serializes to the canonical byte layout (checksum included).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&self.params.window.to_le_bytes());
        out.extend_from_slice(&(self.params.bins as u32).to_le_bytes());
        out.extend_from_slice(&self.params.sigma.to_le_bytes());
        out.extend_from_slice(&(self.params.block_len as u64).to_le_bytes());
        out.extend_from_slice(&(self.params.delta as u64).to_le_bytes());
        out.extend_from_slice(&(self.segments.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.codes.len() as u64).to_le_bytes());
        out.push(self.params.method.as_u8());
        out.extend_from_slice(&self.params.codebook_hash.to_le_bytes());

        if self.params.bins <= 256 {
            out.extend(self.codes.as_slice().iter().map(|&c| c as u8));
        } else {
            for &c in self.codes.as_slice() {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }

        for s in &self.segments {
            out.extend_from_slice(&(s.start as u64).to_le_bytes());
            out.extend_from_slice(&(s.end as u64).to_le_bytes());
            out.extend_from_slice(&(s.dim() as u32).to_le_bytes());
            for v in s.mean.iter() {
                out.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
            }
            for v in s.basis.as_slice() {
                out.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
            }
        }

        out.extend_from_slice(&(self.blocks.len() as u64).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.segment as u64).to_le_bytes());
            out.extend_from_slice(&(b.start as u64).to_le_bytes());
            out.extend_from_slice(&(b.len as u64).to_le_bytes());
            for v in b.representative.z.iter() {
                out.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
            }
            out.extend_from_slice(&b.representative.delta.to_f64().unwrap().to_le_bytes());
            out.extend_from_slice(&b.radius.to_f64().unwrap().to_le_bytes());
        }

        let crc = crc64(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[0..4] != INDEX_MAGIC {
            return Err(Error::BadMagic("index file".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != INDEX_VERSION {
            return Err(Error::VersionMismatch {
                expected: INDEX_VERSION,
                found: version,
            });
        }
        if bytes.len() < 20 {
            return Err(Error::ChecksumMismatch("file too short".into()));
        }
        let body = &bytes[..bytes.len() - 8];
        let stored_crc = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
        if crc64(body) != stored_crc {
            return Err(Error::ChecksumMismatch("index payload corrupted".into()));
        }

        let mut r = Reader { bytes: body, at: 8 };
        let window = r.u32()?;
        let bins = r.u32()? as usize;
        let sigma = r.f64()?;
        let block_len = r.u64()? as usize;
        let delta = r.u64()? as usize;
        let segment_count = r.u64()? as usize;
        let frames = r.u64()? as usize;
        let method = Method::from_u8(r.u8()?)?;
        let codebook_hash = r.u64()?;

        let codes: Vec<u16> = if bins <= 256 {
            r.take(frames)?.iter().map(|&b| u16::from(b)).collect()
        } else {
            let raw = r.take(frames * 2)?;
            raw.chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect()
        };

        let mut segments = Vec::with_capacity(segment_count);
        for _ in 0..segment_count {
            let start = r.u64()? as usize;
            let end = r.u64()? as usize;
            let dim = r.u32()? as usize;
            let mut mean = DVector::<f64>::zeros(bins);
            for i in 0..bins {
                mean[i] = r.f64()?;
            }
            let mut basis = DMatrix::<f64>::zeros(bins, dim);
            for c in 0..dim {
                for row in 0..bins {
                    basis[(row, c)] = r.f64()?;
                }
            }
            segments.push(Segment {
                start,
                end,
                mean: mean.map(F::from_f64_lossy),
                basis: basis.map(F::from_f64_lossy),
                sigma,
            });
        }

        let block_count = r.u64()? as usize;
        let mut blocks = Vec::with_capacity(block_count);
        for _ in 0..block_count {
            let segment = r.u64()? as usize;
            let start = r.u64()? as usize;
            let len = r.u64()? as usize;
            let dim = segments
                .get(segment)
                .ok_or_else(|| Error::format("block references missing segment"))?
                .dim();
            let mut z = DVector::<f64>::zeros(dim);
            for i in 0..dim {
                z[i] = r.f64()?;
            }
            let delta_coord = r.f64()?;
            let radius = r.f64()?;
            blocks.push(Block {
                segment,
                start,
                len,
                representative: CompressedFeature {
                    z: z.map(F::from_f64_lossy),
                    delta: F::from_f64_lossy(delta_coord),
                },
                radius: F::from_f64_lossy(radius),
            });
        }
        r.expect_end()?;

        let index = PlIndex {
            params: IndexParams {
                window,
                bins,
                segments: segment_count,
                sigma,
                block_len,
                delta,
                method,
                codebook_hash,
            },
            codes: CodewordSeq::new(codes),
            segments,
            blocks,
        };
        index.validate()?;
        Ok(index)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("index payload truncated"))?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn expect_end(&self) -> Result<()> {
        if self.at != self.bytes.len() {
            return Err(Error::format("trailing bytes after index payload"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;

    fn params(window: u32, bins: usize, segments: usize, method: Method) -> IndexParams {
        IndexParams {
            window,
            bins,
            segments,
            sigma: 0.9,
            block_len: 7,
            delta: 10,
            method,
            codebook_hash: 0xFEED_BEEF,
        }
    }

    fn random_codes(rng: &mut StdRng, len: usize, bins: u16) -> CodewordSeq {
        CodewordSeq::new((0..len).map(|_| rng.random_range(0..bins)).collect())
    }

    #[test]
    fn crc64_known_vector() {
        // CRC-64/XZ of "123456789".
        assert_eq!(crc64(b"123456789"), 0x995D_C9BB_DF19_39FA);
        assert_eq!(crc64(b""), 0);
    }

    #[test]
    fn constant_stream_single_segment() {
        let (index, stats) = build_index::<f64>(
            CodewordSeq::new(vec![3; 100]),
            params(10, 5, 1, Method::None),
        )
        .unwrap();
        assert_eq!(index.segments.len(), 1);
        assert_eq!(index.segments[0].dim(), 1);
        assert!(index.blocks.iter().all(|b| b.radius == 0.0));
        assert_eq!(stats.mean_dim, 1.0);
    }

    #[test]
    fn round_trip_is_field_exact() {
        let mut rng = StdRng::seed_from_u64(42);
        let codes = random_codes(&mut rng, 500, 12);
        let (index, _) = build_index::<f64>(codes, params(20, 12, 6, Method::Local)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("idx.bin");
        index.save(&path).unwrap();
        let loaded = PlIndex::<f64>::load(&path).unwrap();
        assert_eq!(loaded, index);
        // Byte-identical on re-save.
        assert_eq!(loaded.to_bytes(), index.to_bytes());
    }

    #[test]
    fn truncation_fails_checksum() {
        let mut rng = StdRng::seed_from_u64(1);
        let codes = random_codes(&mut rng, 200, 6);
        let (index, _) = build_index::<f64>(codes, params(10, 6, 3, Method::None)).unwrap();
        let bytes = index.to_bytes();
        let err = PlIndex::<f64>::from_bytes(&bytes[..bytes.len() - 21]).unwrap_err();
        assert!(matches!(err, Error::ChecksumMismatch(_)), "{err}");
    }

    #[test]
    fn corruption_fails_checksum() {
        let mut rng = StdRng::seed_from_u64(2);
        let codes = random_codes(&mut rng, 200, 6);
        let (index, _) = build_index::<f64>(codes, params(10, 6, 3, Method::None)).unwrap();
        let mut bytes = index.to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x40;
        assert!(matches!(
            PlIndex::<f64>::from_bytes(&bytes).unwrap_err(),
            Error::ChecksumMismatch(_)
        ));
    }

    #[test]
    fn version_bump_is_version_error() {
        let mut rng = StdRng::seed_from_u64(3);
        let codes = random_codes(&mut rng, 150, 4);
        let (index, _) = build_index::<f64>(codes, params(10, 4, 2, Method::None)).unwrap();
        let mut bytes = index.to_bytes();
        let bumped = (INDEX_VERSION + 1).to_le_bytes();
        bytes[4..8].copy_from_slice(&bumped);
        // Re-checksum so only the version differs.
        let body_len = bytes.len() - 8;
        let crc = crc64(&bytes[..body_len]).to_le_bytes();
        bytes[body_len..].copy_from_slice(&crc);
        assert!(matches!(
            PlIndex::<f64>::from_bytes(&bytes).unwrap_err(),
            Error::VersionMismatch { found, .. } if found == INDEX_VERSION + 1
        ));
    }

    #[test]
    fn bad_magic_detected() {
        assert!(matches!(
            PlIndex::<f64>::from_bytes(b"NOPE............").unwrap_err(),
            Error::BadMagic(_)
        ));
    }

    #[test]
    fn dynamic_segmentation_improves_objective() {
        // Two-regime stream: dynamic boundaries beat the equi-partition.
        let mut codes = vec![0u16; 230];
        for (i, c) in codes.iter_mut().enumerate().skip(110) {
            *c = 2 + (i % 3) as u16;
        }
        let stored = CodewordSeq::new(codes);
        let p = IndexParams {
            delta: 30,
            ..params(8, 5, 2, Method::Local)
        };
        let (_, stats) = build_index::<f64>(stored.clone(), p).unwrap();
        let equi = stats.equi_objective.unwrap();
        assert!(
            stats.mean_dim <= equi + 1e-12,
            "local {} vs equi {equi}",
            stats.mean_dim
        );

        let (_, stats_none) = build_index::<f64>(
            stored,
            IndexParams {
                method: Method::None,
                ..p
            },
        )
        .unwrap();
        assert!(stats_none.mean_dim >= stats.mean_dim - 1e-12);
    }

    #[test]
    fn stream_shorter_than_window_rejected() {
        assert!(matches!(
            build_index::<f64>(CodewordSeq::new(vec![0; 5]), params(10, 4, 1, Method::None))
                .unwrap_err(),
            Error::Range(_)
        ));
    }

    #[test]
    fn table_budget_enforced() {
        let mut rng = StdRng::seed_from_u64(4);
        let codes = random_codes(&mut rng, 5000, 16);
        let err = build_index_with_budget::<f64>(
            codes,
            params(10, 16, 4, Method::Local),
            1024,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn segment_and_block_lookup() {
        let mut rng = StdRng::seed_from_u64(5);
        let codes = random_codes(&mut rng, 300, 8);
        let (index, _) = build_index::<f64>(codes, params(12, 8, 4, Method::None)).unwrap();
        for t in 0..index.positions() {
            let s = index.segment_of(t);
            assert!(index.segments[s].contains(t));
            let b = index.block_of(t);
            assert!(index.blocks[b].contains(t));
            assert_eq!(index.blocks[b].segment, s);
        }
    }

    #[test]
    fn wide_codebooks_use_two_byte_codes() {
        let mut rng = StdRng::seed_from_u64(6);
        let codes = CodewordSeq::new((0..400).map(|_| rng.random_range(0..300u16)).collect());
        let (index, _) = build_index::<f64>(codes, params(15, 300, 3, Method::None)).unwrap();
        let bytes = index.to_bytes();
        let loaded = PlIndex::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(loaded, index);
    }
}

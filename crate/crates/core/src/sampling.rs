//! Temporal down-sampling of compressed features into blocks.
//!
//! Each segment's run of compressed features is tiled by blocks of length
//! `a` (the final block of a segment may be short). A block keeps only its
//! first feature as representative plus the largest distance from any member
//! to that representative. By the triangle inequality,
//!
//! ```text
//! ||y(t) - y_q||  >=  ||rep - y_q|| - radius        for every member t
//! ```
//!
//! so a whole block is discarded the moment that bound exceeds the search
//! threshold — no member needs materializing, and no true match can be lost.
//! Blocks never span two segments: members of different segments live in
//! different coordinate systems.

use crate::error::{Error, Result};
use crate::pla::{compressed_distance_unchecked, CompressedFeature};
use crate::scalar::Real;

/// A run of consecutive compressed features summarized by its first element.
#[derive(Debug, Clone, PartialEq)]
pub struct Block<F: Real> {
    /// Owning segment.
    pub segment: usize,
    /// Position of the representative (first member).
    pub start: usize,
    /// Number of members covered.
    pub len: usize,
    /// The first member's compressed feature.
    pub representative: CompressedFeature<F>,
    /// Largest member distance to the representative.
    pub radius: F,
}

impl<F: Real> Block<F> {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, position: usize) -> bool {
        (self.start..self.end()).contains(&position)
    }
}

/// Tiles one segment's compressed run into blocks of length `block_len`.
///
/// `segment_start` is the global position of `features[0]`.
pub fn blocks_for_segment<F: Real>(
    segment: usize,
    segment_start: usize,
    features: &[CompressedFeature<F>],
    block_len: usize,
) -> Result<Vec<Block<F>>> {
    if block_len == 0 {
        return Err(Error::config("block length must be at least 1"));
    }
    let mut blocks = Vec::with_capacity(features.len().div_ceil(block_len));
    for (i, chunk) in features.chunks(block_len).enumerate() {
        let representative = chunk[0].clone();
        let mut radius = F::zero();
        for member in chunk {
            if member.dim() != representative.dim() {
                return Err(Error::SegmentMismatch(
                    "block members of mixed rank".into(),
                ));
            }
            let d = compressed_distance_unchecked(member, &representative);
            if d > radius {
                radius = d;
            }
        }
        blocks.push(Block {
            segment,
            start: segment_start + i * block_len,
            len: chunk.len(),
            representative,
            radius,
        });
    }
    Ok(blocks)
}

/// Tiles every segment's run; `runs[j]` is segment `j`'s compressed features
/// and `starts[j]` its first global position. A new block starts at every
/// segment boundary.
pub fn build_blocks<F: Real>(
    runs: &[Vec<CompressedFeature<F>>],
    starts: &[usize],
    block_len: usize,
) -> Result<Vec<Block<F>>> {
    if runs.len() != starts.len() {
        return Err(Error::shape("one start position per segment run"));
    }
    let mut blocks = Vec::new();
    for (segment, (run, &start)) in runs.iter().zip(starts).enumerate() {
        blocks.extend(blocks_for_segment(segment, start, run, block_len)?);
    }
    Ok(blocks)
}

/// Lower bound on the distance from any member of `block` to `query`;
/// may be negative.
pub fn block_lower_bound<F: Real>(block: &Block<F>, query: &CompressedFeature<F>) -> Result<F> {
    if query.dim() != block.representative.dim() {
        return Err(Error::SegmentMismatch(format!(
            "query compressed to rank {}, block is rank {}",
            query.dim(),
            block.representative.dim()
        )));
    }
    Ok(compressed_distance_unchecked(&block.representative, query) - block.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pla::compressed_distance;
    use nalgebra::DVector;
    use rand::prelude::*;

    fn feat(z: &[f64], delta: f64) -> CompressedFeature<f64> {
        CompressedFeature {
            z: DVector::from_vec(z.to_vec()),
            delta,
        }
    }

    fn random_run(rng: &mut StdRng, len: usize, dim: usize) -> Vec<CompressedFeature<f64>> {
        (0..len)
            .map(|_| {
                let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-4.0..4.0)).collect();
                feat(&z, rng.random_range(0.0..2.0))
            })
            .collect()
    }

    #[test]
    fn singleton_blocks_have_zero_radius() {
        let run = vec![feat(&[1.0], 0.2), feat(&[2.0], 0.0), feat(&[3.0], 1.0)];
        let blocks = blocks_for_segment(0, 10, &run, 1).unwrap();
        assert_eq!(blocks.len(), 3);
        for (i, b) in blocks.iter().enumerate() {
            assert_eq!(b.start, 10 + i);
            assert_eq!(b.len, 1);
            assert_eq!(b.radius, 0.0);
        }
    }

    #[test]
    fn constant_run_has_zero_radius() {
        let run = vec![feat(&[0.5, -1.0], 0.7); 12];
        let blocks = blocks_for_segment(0, 0, &run, 5).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[2].len, 2);
        assert!(blocks.iter().all(|b| b.radius == 0.0));
    }

    #[test]
    fn radius_matches_naive_max() {
        let mut rng = StdRng::seed_from_u64(8);
        let run = random_run(&mut rng, 57, 3);
        let blocks = blocks_for_segment(0, 0, &run, 10).unwrap();
        for b in &blocks {
            let naive = run[b.start..b.end()]
                .iter()
                .map(|m| compressed_distance(m, &b.representative).unwrap())
                .fold(0.0f64, f64::max);
            assert_eq!(b.radius, naive);
        }
    }

    #[test]
    fn lower_bound_holds_for_every_member() {
        let mut rng = StdRng::seed_from_u64(13);
        let run = random_run(&mut rng, 64, 4);
        let blocks = blocks_for_segment(0, 0, &run, 9).unwrap();
        for _ in 0..50 {
            let q = &random_run(&mut rng, 1, 4)[0];
            for b in &blocks {
                let bound = block_lower_bound(b, q).unwrap();
                for member in &run[b.start..b.end()] {
                    let d = compressed_distance(member, q).unwrap();
                    assert!(d >= bound - 1e-12, "member at {d} below bound {bound}");
                }
            }
        }
    }

    #[test]
    fn zero_radius_bound_is_exact() {
        let run = vec![feat(&[2.0, 2.0], 0.0)];
        let blocks = blocks_for_segment(0, 0, &run, 4).unwrap();
        let q = feat(&[2.0, 2.0], 0.0);
        assert_eq!(block_lower_bound(&blocks[0], &q).unwrap(), 0.0);
        let far = feat(&[5.0, 6.0], 0.0);
        let d = compressed_distance(&run[0], &far).unwrap();
        assert_eq!(block_lower_bound(&blocks[0], &far).unwrap(), d);
    }

    #[test]
    fn blocks_tile_all_positions_exactly_once() {
        let mut rng = StdRng::seed_from_u64(21);
        let runs = vec![
            random_run(&mut rng, 23, 2),
            random_run(&mut rng, 50, 2),
            random_run(&mut rng, 7, 2),
        ];
        let starts = vec![0, 23, 73];
        let blocks = build_blocks(&runs, &starts, 10).unwrap();
        let mut covered = vec![0usize; 80];
        for b in &blocks {
            for t in b.start..b.end() {
                covered[t] += 1;
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
        // Blocks restart at segment boundaries.
        assert!(blocks.iter().any(|b| b.start == 23 && b.segment == 1));
        assert!(blocks.iter().any(|b| b.start == 73 && b.segment == 2));
    }

    #[test]
    fn zero_block_length_rejected() {
        let run = random_run(&mut StdRng::seed_from_u64(1), 5, 2);
        assert!(matches!(
            blocks_for_segment(0, 0, &run, 0).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn mismatched_query_rank_rejected() {
        let run = vec![feat(&[1.0, 2.0], 0.0)];
        let blocks = blocks_for_segment(0, 0, &run, 2).unwrap();
        let q = feat(&[1.0], 0.0);
        assert!(matches!(
            block_lower_bound(&blocks[0], &q).unwrap_err(),
            Error::SegmentMismatch(_)
        ));
    }
}

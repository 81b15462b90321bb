//! Histogram-fingerprint audio search with piecewise-linear trajectory
//! compression.
//!
//! The pipeline locates occurrences of a short query clip inside a long
//! stored stream. Both signals are reduced to per-frame filterbank energies,
//! vector-quantized against a shared codebook, and matched through
//! codeword histograms over sliding windows. The baseline scan
//! ([`tas::tas_search`]) skips ahead using the `sqrt(2)`-per-frame bound on
//! histogram motion; the accelerated engine ([`search::proposed_search`])
//! additionally compresses the stored histogram trajectory into per-segment
//! affine subspaces ([`pla`]), embeds each residual as an extra coordinate so
//! compressed distances lower-bound true distances, and prunes whole blocks
//! of positions via covering radii ([`sampling`]) — returning exactly the
//! baseline's matches.
//!
//! Everything float-valued is generic over the scalar type (`f32`/`f64`);
//! the `*64` aliases at the crate root cover the common case. Histogram
//! counts themselves stay integers, which keeps every distance the search
//! thresholds against exact.

pub mod dynseg;
pub mod error;
pub mod features;
pub mod histogram;
pub mod index_io;
pub mod pla;
pub mod sampling;
pub mod scalar;
pub mod search;
pub mod synth;
pub mod tas;
pub mod vq;
pub mod wav;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default-precision aliases.
pub type PcmSignal64 = features::PcmSignal<f64>;
pub type FilterbankConfig64 = features::FilterbankConfig<f64>;
pub type BaseFeatureSeq64 = features::BaseFeatureSeq<f64>;
pub type Codebook64 = vq::Codebook<f64>;
pub type LbgParams64 = vq::LbgParams<f64>;
pub type Segment64 = pla::Segment<f64>;
pub type CompressedFeature64 = pla::CompressedFeature<f64>;
pub type CovariancePrefix64 = pla::CovariancePrefix;
pub type Match64 = tas::Match<f64>;
pub type SearchParams64 = tas::SearchParams<f64>;
pub type Block64 = sampling::Block<f64>;
pub type PlIndex64 = index_io::PlIndex<f64>;
pub type SearchReport64 = search::SearchReport<f64>;

/// Single-precision aliases for the size-sensitive paths.
pub type Codebook32 = vq::Codebook<f32>;
pub type Segment32 = pla::Segment<f32>;
pub type CompressedFeature32 = pla::CompressedFeature<f32>;

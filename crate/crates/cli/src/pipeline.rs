//! Shared front half of every command: WAV -> features -> codewords.

use std::path::Path;

use plascan_core::features::{decode_wav, extract_base_features};
use plascan_core::vq::{quantize_sequence, Codebook, CodewordSeq};
use plascan_core::{BaseFeatureSeq64, FilterbankConfig64};

use crate::cli_error::{CliError, CliResult};

pub fn features_from_wav(
    path: &Path,
    filterbank: &FilterbankConfig64,
) -> CliResult<BaseFeatureSeq64> {
    let pcm = decode_wav::<f64>(path)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    extract_base_features(&pcm, filterbank)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

pub fn codes_from_wav(
    path: &Path,
    filterbank: &FilterbankConfig64,
    codebook: &Codebook<f64>,
) -> CliResult<CodewordSeq> {
    let features = features_from_wav(path, filterbank)?;
    quantize_sequence(&features, codebook)
        .map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn load_codebook(path: &Path) -> CliResult<Codebook<f64>> {
    Codebook::load(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.
//!
//! Only what the pipeline needs: reading mono or stereo PCM16 and writing
//! mono PCM16 fixtures. Unknown chunks are skipped; anything that is not
//! integer PCM16 is rejected.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug)]
pub struct RawWav {
    pub sample_rate: u32,
    pub channels: u16,
    /// Interleaved samples.
    pub samples: Vec<i16>,
}

fn u16_at(bytes: &[u8], at: usize) -> Result<u16> {
    bytes
        .get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| Error::format("truncated WAV header"))
}

fn u32_at(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format("truncated WAV header"))
}

/// Reads a PCM16 WAV file.
pub fn read_wav(path: &Path) -> Result<RawWav> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    parse_wav(&bytes)
}

pub fn parse_wav(bytes: &[u8]) -> Result<RawWav> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::format("not a RIFF/WAVE file"));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (codec, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut at = 12usize;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = u32_at(bytes, at + 4)? as usize;
        let body_start = at + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| Error::format("chunk size overflows"))?;
        if body_end > bytes.len() {
            return Err(Error::format("truncated chunk body"));
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::format("fmt chunk too short"));
                }
                fmt = Some((
                    u16_at(bytes, body_start)?,
                    u16_at(bytes, body_start + 2)?,
                    u32_at(bytes, body_start + 4)?,
                    u16_at(bytes, body_start + 14)?,
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are word-aligned.
        at = body_end + (size & 1);
    }

    let (codec, channels, sample_rate, bits) =
        fmt.ok_or_else(|| Error::format("missing fmt chunk"))?;
    let data = data.ok_or_else(|| Error::format("missing data chunk"))?;
    if codec != 1 {
        return Err(Error::decode(format!("unsupported WAV codec tag {codec}")));
    }
    if bits != 16 {
        return Err(Error::decode(format!("unsupported bit depth {bits}")));
    }
    if channels == 0 {
        return Err(Error::format("zero channels"));
    }
    if sample_rate == 0 {
        return Err(Error::format("zero sample rate"));
    }
    if data.len() % 2 != 0 {
        return Err(Error::format("odd data chunk length"));
    }
    let samples: Vec<i16> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]))
        .collect();
    if !samples.len().is_multiple_of(channels as usize) {
        return Err(Error::format("sample count not divisible by channel count"));
    }
    Ok(RawWav {
        sample_rate,
        channels,
        samples,
    })
}

/// Writes a mono PCM16 WAV file.
pub fn write_wav_mono16(path: &Path, sample_rate: u32, samples: &[i16]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let data_len = (samples.len() * 2) as u32;
    out.write_all(b"RIFF")?;
    out.write_all(&(36 + data_len).to_le_bytes())?;
    out.write_all(b"WAVE")?;
    out.write_all(b"fmt ")?;
    out.write_all(&16u32.to_le_bytes())?;
    out.write_all(&1u16.to_le_bytes())?; // PCM
    out.write_all(&1u16.to_le_bytes())?; // mono
    out.write_all(&sample_rate.to_le_bytes())?;
    out.write_all(&(sample_rate * 2).to_le_bytes())?; // byte rate
    out.write_all(&2u16.to_le_bytes())?; // block align
    out.write_all(&16u16.to_le_bytes())?;
    out.write_all(b"data")?;
    out.write_all(&data_len.to_le_bytes())?;
    for &s in samples {
        out.write_all(&s.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

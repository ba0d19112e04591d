//! Multi-channel IQ capture files.
//!
//! Layout, all little-endian:
//!
//! | offset | size | field                    |
//! |--------|------|--------------------------|
//! | 0      | 4    | magic `ACAL`             |
//! | 4      | 2    | version (u16, = 1)       |
//! | 6      | 2    | channel count M (u16)    |
//! | 8      | 4    | samples per channel (u32)|
//! | 12     | 8    | sample rate in Hz (f64)  |
//! | 20     | 8    | generator seed (u64)     |
//! | 28     | ...  | per channel, interleaved f32 I/Q pairs |

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use selfcal_core::signal::ComplexSequence;
use selfcal_core::sim::{CaptureSet, Origin};
use selfcal_core::C64;

use crate::io::write_atomic;

pub const MAGIC: &[u8; 4] = b"ACAL";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 28;
const SAMPLE_BYTES: usize = 8;

#[derive(Debug, thiserror::Error)]
pub enum CaptureError {
    #[error("bad magic at byte 0: expected \"ACAL\", found {found:?}")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported version {version} at byte 4")]
    UnsupportedVersion { version: u16 },
    #[error("invalid header field {field} at byte {offset}: {reason}")]
    InvalidHeader {
        field: &'static str,
        offset: usize,
        reason: String,
    },
    #[error("truncated file: needed {expected} bytes, file ends at byte {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("channel length mismatch: payload should end at byte {expected}, but {trailing} trailing bytes follow")]
    LengthMismatch { expected: usize, trailing: usize },
    #[error("non-finite sample at byte {offset}")]
    NonFinite { offset: usize },
    #[error("capture cannot be written: {0}")]
    Unwritable(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Size in bytes of a capture with `m` channels of `len` samples.
pub fn file_size(m: usize, len: usize) -> usize {
    HEADER_LEN + m * len * SAMPLE_BYTES
}

pub fn encode(set: &CaptureSet) -> Result<Vec<u8>, CaptureError> {
    let m = u16::try_from(set.num_channels())
        .map_err(|_| CaptureError::Unwritable(format!("{} channels exceed u16", set.num_channels())))?;
    let len = u32::try_from(set.len())
        .map_err(|_| CaptureError::Unwritable(format!("{} samples exceed u32", set.len())))?;
    let mut out = Vec::with_capacity(file_size(set.num_channels(), set.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&set.sample_rate.to_le_bytes());
    out.extend_from_slice(&set.seed.to_le_bytes());
    for ch in set.channels() {
        for s in ch.iter() {
            out.extend_from_slice(&(s.re as f32).to_le_bytes());
            out.extend_from_slice(&(s.im as f32).to_le_bytes());
        }
    }
    Ok(out)
}

fn field<const W: usize>(bytes: &[u8], offset: usize) -> Result<[u8; W], CaptureError> {
    bytes
        .get(offset..offset + W)
        .and_then(|s| s.try_into().ok())
        .ok_or(CaptureError::Truncated {
            expected: offset + W,
            actual: bytes.len(),
        })
}

pub fn decode(bytes: &[u8]) -> Result<CaptureSet, CaptureError> {
    let magic: [u8; 4] = field(bytes, 0)?;
    if &magic != MAGIC {
        return Err(CaptureError::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes(field(bytes, 4)?);
    if version != VERSION {
        return Err(CaptureError::UnsupportedVersion { version });
    }
    let m = u16::from_le_bytes(field(bytes, 6)?) as usize;
    let len = u32::from_le_bytes(field(bytes, 8)?) as usize;
    let sample_rate = f64::from_le_bytes(field(bytes, 12)?);
    let seed = u64::from_le_bytes(field(bytes, 20)?);
    if m == 0 {
        return Err(CaptureError::InvalidHeader {
            field: "channel count",
            offset: 6,
            reason: "must be at least 1".into(),
        });
    }
    if len == 0 {
        return Err(CaptureError::InvalidHeader {
            field: "length",
            offset: 8,
            reason: "must be at least 1".into(),
        });
    }
    if !sample_rate.is_finite() || sample_rate <= 0.0 {
        return Err(CaptureError::InvalidHeader {
            field: "sample rate",
            offset: 12,
            reason: format!("{sample_rate} is not a positive rate"),
        });
    }

    let expected = file_size(m, len);
    if bytes.len() < expected {
        return Err(CaptureError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(CaptureError::LengthMismatch {
            expected,
            trailing: bytes.len() - expected,
        });
    }

    let mut channels = Vec::with_capacity(m);
    for c in 0..m {
        let start = HEADER_LEN + c * len * SAMPLE_BYTES;
        let mut samples = Vec::with_capacity(len);
        for i in 0..len {
            let at = start + i * SAMPLE_BYTES;
            let re = f32::from_le_bytes(field(bytes, at)?);
            let im = f32::from_le_bytes(field(bytes, at + 4)?);
            if !(re.is_finite() && im.is_finite()) {
                return Err(CaptureError::NonFinite { offset: at });
            }
            samples.push(C64::new(re as f64, im as f64));
        }
        channels.push(ComplexSequence::new(samples).expect("non-empty and finite"));
    }
    Ok(CaptureSet::new(channels, sample_rate, Origin::File, seed).expect("equal channel lengths"))
}

pub fn write_capture(set: &CaptureSet, path: &Path) -> Result<(), CaptureError> {
    let bytes = encode(set)?;
    write_atomic(path, &bytes).map_err(|source| CaptureError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_capture(path: &Path) -> Result<CaptureSet, CaptureError> {
    let bytes = fs::read(path).map_err(|source| CaptureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes)
}

/// One row per sample: `index, ch0_i, ch0_q, ch1_i, ...`.
pub fn write_csv<W: Write>(set: &CaptureSet, mut out: W) -> io::Result<()> {
    write!(out, "index")?;
    for c in 0..set.num_channels() {
        write!(out, ",ch{c}_i,ch{c}_q")?;
    }
    writeln!(out)?;
    for i in 0..set.len() {
        write!(out, "{i}")?;
        for ch in set.channels() {
            write!(out, ",{},{}", ch[i].re, ch[i].im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

//! The ODDF binary feature format.
//!
//! Layout, all multi-byte integers little-endian:
//!
//! ```text
//! offset  size  field
//! 0       4     magic: 0x4F 0x44 0x44 0x46 ("ODDF")
//! 4       2     version (u16), currently 1
//! 6       8     count (u64)
//! 14      4     dim (u32)
//! 18      1     label flag (u8): 0 = no labels, 1 = one label byte per row
//! 19      ...   payload: count * dim f32, row-major
//! ...     ...   labels: count bytes, present iff flag = 1
//! ```
//!
//! Label bytes: 0 = ID, 1 = OOD, 255 = unlabeled. Values are stored as f32
//! and widened to f64 in memory. Writes are deterministic: identical input
//! produces identical bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::FeatureVector;

pub const ODDF_MAGIC: [u8; 4] = *b"ODDF";
pub const ODDF_VERSION: u16 = 1;

/// Fixed part of the file: magic, version, count, dim, label flag.
pub const HEADER_LEN: u64 = 19;

/// Per-sample label stored in the optional label section.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleLabel {
    Id,
    Ood,
    Unlabeled,
}

impl SampleLabel {
    pub fn to_byte(self) -> u8 {
        match self {
            SampleLabel::Id => 0,
            SampleLabel::Ood => 1,
            SampleLabel::Unlabeled => 255,
        }
    }

    pub fn from_byte(byte: u8, offset: u64) -> Result<Self> {
        match byte {
            0 => Ok(SampleLabel::Id),
            1 => Ok(SampleLabel::Ood),
            255 => Ok(SampleLabel::Unlabeled),
            value => Err(Error::InvalidLabel { value, offset }),
        }
    }
}

/// Serializes vectors (narrowed to f32) and optional labels to ODDF bytes.
pub fn encode_features(
    vectors: &[FeatureVector],
    labels: Option<&[SampleLabel]>,
) -> Result<Vec<u8>> {
    let dim = vectors.first().map_or(0, |v| v.dim());
    for v in vectors {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.dim(),
            });
        }
    }
    if let Some(labels) = labels {
        if labels.len() != vectors.len() {
            return Err(Error::LabelCountMismatch {
                labels: labels.len(),
                vectors: vectors.len(),
            });
        }
    }

    let count = vectors.len() as u64;
    let payload_len = count * dim as u64 * 4 + if labels.is_some() { count } else { 0 };
    let mut bytes = Vec::with_capacity((HEADER_LEN + payload_len) as usize);
    bytes.extend_from_slice(&ODDF_MAGIC);
    bytes.extend_from_slice(&ODDF_VERSION.to_le_bytes());
    bytes.extend_from_slice(&count.to_le_bytes());
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    bytes.push(u8::from(labels.is_some()));
    for v in vectors {
        for &x in v.values() {
            bytes.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    if let Some(labels) = labels {
        bytes.extend(labels.iter().map(|l| l.to_byte()));
    }
    Ok(bytes)
}

/// Parses ODDF bytes into vectors (widened to f64) and optional labels.
pub fn decode_features(bytes: &[u8]) -> Result<(Vec<FeatureVector>, Option<Vec<SampleLabel>>)> {
    let actual = bytes.len() as u64;
    if actual < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            actual,
            payload_offset: HEADER_LEN,
        });
    }
    let mut magic = [0u8; 4];
    magic.copy_from_slice(&bytes[0..4]);
    if magic != ODDF_MAGIC {
        return Err(Error::BadMagic { found: magic });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != ODDF_VERSION {
        return Err(Error::UnsupportedVersion { found: version });
    }
    let count = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let dim = u32::from_le_bytes(bytes[14..18].try_into().expect("4 bytes")) as u64;
    let has_labels = match bytes[18] {
        0 => false,
        1 => true,
        value => {
            return Err(Error::InvalidLabel { value, offset: 18 });
        }
    };

    let values_len = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::InvalidCount {
            reason: format!("count {count} * dim {dim} overflows"),
        })?;
    let expected = HEADER_LEN + values_len + if has_labels { count } else { 0 };
    if actual != expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual,
            payload_offset: HEADER_LEN,
        });
    }

    let mut vectors = Vec::with_capacity(count as usize);
    let mut offset = HEADER_LEN as usize;
    for _ in 0..count {
        let mut values = Vec::with_capacity(dim as usize);
        for _ in 0..dim {
            let raw: [u8; 4] = bytes[offset..offset + 4].try_into().expect("4 bytes");
            values.push(f32::from_le_bytes(raw) as f64);
            offset += 4;
        }
        vectors.push(FeatureVector::new(values)?);
    }
    let labels = if has_labels {
        let mut labels = Vec::with_capacity(count as usize);
        for _ in 0..count {
            labels.push(SampleLabel::from_byte(bytes[offset], offset as u64)?);
            offset += 1;
        }
        Some(labels)
    } else {
        None
    };
    Ok((vectors, labels))
}

/// Writes an ODDF file.
pub fn write_features(
    path: impl AsRef<Path>,
    vectors: &[FeatureVector],
    labels: Option<&[SampleLabel]>,
) -> Result<()> {
    let bytes = encode_features(vectors, labels)?;
    fs::write(path, bytes)?;
    Ok(())
}

/// Reads an ODDF file.
pub fn read_features(
    path: impl AsRef<Path>,
) -> Result<(Vec<FeatureVector>, Option<Vec<SampleLabel>>)> {
    let bytes = fs::read(path)?;
    decode_features(&bytes)
}

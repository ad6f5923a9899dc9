//! Bit-string data model, on-disk formats and elementary transforms.

use std::fmt;
use std::fs;
use std::io;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Magic prefix of the packed bit file format.
pub const PACKED_MAGIC: &[u8; 4] = b"RBIT";

const PACKED_HEADER_LEN: usize = PACKED_MAGIC.len() + 8;

#[derive(Debug, Error)]
pub enum BitsError {
    #[error("malformed character {found:?} at offset {offset}")]
    MalformedChar { offset: usize, found: char },
    #[error("invalid bit value {value} at index {index}")]
    InvalidBit { index: usize, value: u8 },
    #[error("packed file is missing the RBIT magic header")]
    BadMagic,
    #[error("packed file truncated: header declares {declared} bits, need {needed} payload bytes, found {found}")]
    Truncated {
        declared: u64,
        needed: usize,
        found: usize,
    },
    #[error("packed file has {extra} trailing bytes after the payload")]
    TrailingBytes { extra: usize },
    #[error("packed file has non-zero padding bits in its last byte")]
    NonZeroPadding,
    #[error("relative frequency of an empty bit string is undefined")]
    Empty,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("unknown bit file format {0:?} (expected ascii or packed)")]
    UnknownFormat(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// On-disk encoding of a [`BitString`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitFormat {
    /// `'0'`/`'1'` characters; line breaks are ignored on load.
    Ascii,
    /// `RBIT` magic, little-endian `u64` length, MSB-first payload.
    Packed,
}

impl FromStr for BitFormat {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ascii" | "txt" => Ok(Self::Ascii),
            "packed" | "bin" => Ok(Self::Packed),
            _ => Err(BitsError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for BitFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ascii => "ascii",
            Self::Packed => "packed",
        })
    }
}

/// A finite sequence of bits. Every stored element is 0 or 1.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a bit string from 0/1 values, rejecting anything else.
    pub fn from_bits(bits: Vec<u8>) -> Result<Self, BitsError> {
        if let Some(index) = bits.iter().position(|&b| b > 1) {
            return Err(BitsError::InvalidBit {
                index,
                value: bits[index],
            });
        }
        Ok(Self { bits })
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        Self {
            bits: bits.into_iter().map(u8::from).collect(),
        }
    }

    /// Unpacks bytes MSB-first into `8 * bytes.len()` bits.
    pub fn from_bytes_msb(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for &byte in bytes {
            bits.extend((0..8).rev().map(|k| (byte >> k) & 1));
        }
        Self { bits }
    }

    /// Parses a `'0'`/`'1'` string. Newlines and carriage returns are skipped;
    /// any other character is an error reporting its byte offset.
    pub fn parse_ascii(text: &str) -> Result<Self, BitsError> {
        let mut bits = Vec::with_capacity(text.len());
        for (offset, ch) in text.char_indices() {
            match ch {
                '0' => bits.push(0),
                '1' => bits.push(1),
                '\n' | '\r' => {}
                found => return Err(BitsError::MalformedChar { offset, found }),
            }
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<u8> {
        self.bits.get(index).copied()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = u8> + '_ {
        self.bits.iter().copied()
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    /// Fraction of ones. Undefined (an error) for the empty string.
    pub fn relative_frequency(&self) -> Result<f64, BitsError> {
        if self.is_empty() {
            return Err(BitsError::Empty);
        }
        Ok(self.count_ones() as f64 / self.len() as f64)
    }

    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|&b| b ^ 1).collect(),
        }
    }

    /// Contiguous sub-range `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            bits: self.bits[start..end].to_vec(),
        }
    }

    /// Packs MSB-first; the last byte is zero-padded.
    pub fn to_bytes_msb(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &b)| acc | (b << (7 - k)))
            })
            .collect()
    }

    pub fn to_ascii(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b == 1 { '1' } else { '0' })
            .collect()
    }

    /// Serialises into the packed file layout.
    pub fn encode_packed(&self) -> Vec<u8> {
        let payload = self.to_bytes_msb();
        let mut out = Vec::with_capacity(PACKED_HEADER_LEN + payload.len());
        out.extend_from_slice(PACKED_MAGIC);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out
    }

    pub fn decode_packed(data: &[u8]) -> Result<Self, BitsError> {
        if data.len() < PACKED_HEADER_LEN || &data[..4] != PACKED_MAGIC {
            return Err(BitsError::BadMagic);
        }
        let mut header = [0u8; 8];
        header.copy_from_slice(&data[4..PACKED_HEADER_LEN]);
        let declared = u64::from_le_bytes(header);
        let payload = &data[PACKED_HEADER_LEN..];
        let needed = declared.div_ceil(8);
        if (payload.len() as u64) < needed {
            return Err(BitsError::Truncated {
                declared,
                needed: usize::try_from(needed).unwrap_or(usize::MAX),
                found: payload.len(),
            });
        }
        let needed = needed as usize;
        if payload.len() > needed {
            return Err(BitsError::TrailingBytes {
                extra: payload.len() - needed,
            });
        }
        let n = declared as usize;
        let mut full = Self::from_bytes_msb(payload);
        if full.bits[n..].iter().any(|&b| b != 0) {
            return Err(BitsError::NonZeroPadding);
        }
        full.bits.truncate(n);
        Ok(full)
    }

    /// Interleaves two equal-length strings as `(a1, b1, a2, b2, ...)`.
    pub fn interleave(a: &Self, b: &Self) -> Result<Self, BitsError> {
        if a.len() != b.len() {
            return Err(BitsError::LengthMismatch {
                left: a.len(),
                right: b.len(),
            });
        }
        let bits = a
            .bits
            .iter()
            .zip(&b.bits)
            .flat_map(|(&x, &y)| [x, y])
            .collect();
        Ok(Self { bits })
    }

    /// Inverse of [`BitString::interleave`]. An odd trailing bit goes to the first string.
    pub fn deinterleave(&self) -> (Self, Self) {
        let even = self.bits.iter().step_by(2).copied().collect();
        let odd = self.bits.iter().skip(1).step_by(2).copied().collect();
        (Self { bits: even }, Self { bits: odd })
    }

    /// Per-string summary used as report metadata.
    pub fn meta(&self, source_id: impl Into<String>) -> Result<StringMeta, BitsError> {
        let relative_frequency = self.relative_frequency()?;
        Ok(StringMeta {
            source_id: source_id.into(),
            n: self.len(),
            ones: self.count_ones(),
            relative_frequency,
        })
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 64;
        if self.len() <= SHOWN {
            write!(f, "BitString({})", self.to_ascii())
        } else {
            write!(
                f,
                "BitString({}.. N={})",
                self.slice(0, SHOWN).to_ascii(),
                self.len()
            )
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self::from_bools(iter)
    }
}

/// Identification and frequency statistic of one analysed string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringMeta {
    pub source_id: String,
    pub n: usize,
    pub ones: usize,
    pub relative_frequency: f64,
}

pub fn load_bits(path: impl AsRef<Path>, format: BitFormat) -> Result<BitString, BitsError> {
    let path = path.as_ref();
    match format {
        BitFormat::Ascii => BitString::parse_ascii(&fs::read_to_string(path)?),
        BitFormat::Packed => BitString::decode_packed(&fs::read(path)?),
    }
}

pub fn store_bits(
    s: &BitString,
    path: impl AsRef<Path>,
    format: BitFormat,
) -> Result<(), BitsError> {
    match format {
        BitFormat::Ascii => fs::write(path, s.to_ascii())?,
        BitFormat::Packed => fs::write(path, s.encode_packed())?,
    }
    Ok(())
}

//! Bias-matched pseudo-random mimics of a biased bit source.

use super::{check_precision, check_probability, ChaCha20Stream, Seed, SourceError};
use crate::bits::BitString;

/// `round(p * 2^16)`, the threshold a 16-bit sample is compared against.
pub fn threshold_16bit(p: f64) -> u32 {
    (p * 65536.0).round() as u32
}

/// Two keystream bytes per output bit: the big-endian 16-bit value `v`
/// yields 1 when `v < round(p * 2^16)` and 0 otherwise.
pub fn mimic_2byte(seed: &Seed, p: f64, n: usize) -> Result<BitString, SourceError> {
    check_probability(p)?;
    let threshold = threshold_16bit(p);
    let bytes = ChaCha20Stream::new(seed.0).take_bytes(2 * n);
    Ok(bytes
        .chunks_exact(2)
        .map(|pair| u32::from(u16::from_be_bytes([pair[0], pair[1]])) < threshold)
        .collect())
}

/// Approximates `p` by `b / 2^m` with `b = round(p * 2^m)`. Each group of `m`
/// input bits, read MSB first as `U`, yields 1 iff `U < b`.
pub fn mimic_fraction(uniform: &BitString, p: f64, m: u32) -> Result<BitString, SourceError> {
    check_probability(p)?;
    check_precision(m)?;
    let width = m as usize;
    if !uniform.len().is_multiple_of(width) {
        return Err(SourceError::StreamExhausted {
            len: uniform.len(),
            m,
        });
    }
    let b = (p * (1u64 << m) as f64).round() as u64;
    Ok(uniform
        .as_slice()
        .chunks_exact(width)
        .map(|sym| {
            sym.iter()
                .fold(0u64, |acc, &bit| (acc << 1) | u64::from(bit))
                < b
        })
        .collect())
}

//! Borel normality over non-overlapping m-blocks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BorelError {
    #[error("block length must be at least 1")]
    ZeroBlock,
    #[error("string of length {n} is shorter than block length {m}")]
    BlockTooLong { n: usize, m: usize },
    #[error("Borel measure needs N >= 4, got N = {0}")]
    TooShort(usize),
}

/// Occurrence counts of every m-bit block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCensus {
    pub m: usize,
    /// `counts[j]` counts the block whose MSB-first value is `j`.
    pub counts: Vec<u64>,
    pub total_blocks: u64,
}

impl BlockCensus {
    /// `max_j |N_j / |s|_m - 2^-m|`.
    pub fn max_deviation(&self) -> f64 {
        let expected = 1.0 / self.counts.len() as f64;
        let total = self.total_blocks as f64;
        self.counts
            .iter()
            .map(|&c| (c as f64 / total - expected).abs())
            .fold(0.0, f64::max)
    }
}

/// Cuts `s` into `floor(N/m)` consecutive blocks and counts each pattern.
/// The trailing `N mod m` bits are discarded.
pub fn block_counts(s: &BitString, m: usize) -> Result<BlockCensus, BorelError> {
    if m == 0 {
        return Err(BorelError::ZeroBlock);
    }
    if s.len() < m {
        return Err(BorelError::BlockTooLong { n: s.len(), m });
    }
    assert!(m < usize::BITS as usize, "block length {m} too large");
    let mut counts = vec![0u64; 1 << m];
    for block in s.as_slice().chunks_exact(m) {
        let j = block.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize);
        counts[j] += 1;
    }
    let total_blocks = (s.len() / m) as u64;
    Ok(BlockCensus {
        m,
        counts,
        total_blocks,
    })
}

/// `floor(log2 log2 N)`, the largest block length the measure inspects.
pub fn max_block_len(n: usize) -> usize {
    if n < 4 {
        return 0;
    }
    // integer form: largest m with 2^(2^m) <= N
    let bits = usize::BITS - 1 - n.leading_zeros(); // floor(log2 N)
    (usize::BITS - 1 - (bits as usize).leading_zeros()) as usize
}

/// `B(s) = max_{m, j} |N_j^m / |s|_m - 2^-m| * log2 N` over `m = 1..=floor(log2 log2 N)`.
pub fn borel_b(s: &BitString) -> Result<f64, BorelError> {
    let n = s.len();
    if n < 4 {
        return Err(BorelError::TooShort(n));
    }
    let mut worst = 0.0f64;
    for m in 1..=max_block_len(n) {
        worst = worst.max(block_counts(s, m)?.max_deviation());
    }
    Ok(worst * (n as f64).log2())
}

/// Borel normal at accuracy `1 / log2 N`, i.e. `B(s) <= 1`.
pub fn is_borel_normal(s: &BitString) -> Result<bool, BorelError> {
    Ok(borel_b(s)? <= 1.0)
}

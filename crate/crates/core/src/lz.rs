//! Distinct-phrase Lempel-Ziv parsing and the complexity measures built on it.
//!
//! A string is cut greedily from the left; every phrase is the shortest
//! substring starting at the current position that differs from all phrases
//! emitted so far. Novelty is checked against earlier *phrases* only, not
//! against arbitrary earlier substrings. Whatever remains at the end is kept
//! as a final phrase even when it repeats an earlier one.
//!
//! From the phrase count `c(N)` we derive `K(N) = c log2(N) / N`, the maximal
//! count `c_max(N)` reached by the exhaustive string `t^N`, and the normalized
//! complexity `κ = c / c_max`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LzError {
    #[error("LZ parsing needs a non-empty string")]
    Empty,
    #[error("LZ complexity needs N >= 2, got N = {0}")]
    TooShort(usize),
}

/// Result of parsing one string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsing {
    /// 1-based inclusive end position of every phrase; the last entry is `N`.
    ends: Vec<usize>,
    final_phrase_duplicate: bool,
}

impl Parsing {
    pub fn phrase_count(&self) -> usize {
        self.ends.len()
    }

    /// Phrase end positions `h_1, h_2, ..., N` (1-based, inclusive).
    pub fn ends(&self) -> &[usize] {
        &self.ends
    }

    /// Interior boundaries `h_1..h_{c-1}`.
    pub fn boundaries(&self) -> &[usize] {
        &self.ends[..self.ends.len().saturating_sub(1)]
    }

    /// True when the trailing remainder repeats an earlier phrase.
    pub fn final_phrase_duplicate(&self) -> bool {
        self.final_phrase_duplicate
    }

    /// 0-based half-open ranges of the phrases.
    pub fn ranges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let starts = std::iter::once(0).chain(self.ends.iter().copied());
        starts.zip(self.ends.iter().copied())
    }

    pub fn phrases<'a>(&'a self, s: &'a BitString) -> impl Iterator<Item = &'a [u8]> + 'a {
        let bits = s.as_slice();
        self.ranges().map(move |(a, b)| &bits[a..b])
    }
}

const NONE: u32 = u32::MAX;

/// Binary trie of emitted phrases; node 0 is the empty phrase.
struct PhraseTrie {
    children: Vec<[u32; 2]>,
}

impl PhraseTrie {
    fn with_capacity(n: usize) -> Self {
        let mut children = Vec::with_capacity(n + 1);
        children.push([NONE; 2]);
        Self { children }
    }

    fn child(&self, node: u32, bit: u8) -> Option<u32> {
        let c = self.children[node as usize][bit as usize];
        (c != NONE).then_some(c)
    }

    fn insert(&mut self, node: u32, bit: u8) {
        let id = self.children.len() as u32;
        self.children.push([NONE; 2]);
        self.children[node as usize][bit as usize] = id;
    }
}

/// Parses `s` into distinct phrases. Runs in O(N).
pub fn lz_parse(s: &BitString) -> Result<Parsing, LzError> {
    if s.is_empty() {
        return Err(LzError::Empty);
    }
    let bits = s.as_slice();
    let mut trie = PhraseTrie::with_capacity(bits.len() / 4);
    let mut ends = Vec::new();
    let mut node = 0u32;
    for (i, &bit) in bits.iter().enumerate() {
        match trie.child(node, bit) {
            Some(next) => node = next,
            None => {
                trie.insert(node, bit);
                ends.push(i + 1);
                node = 0;
            }
        }
    }
    // a walk that did not end at the root is a repeat of an existing phrase
    let final_phrase_duplicate = node != 0;
    if final_phrase_duplicate {
        ends.push(bits.len());
    }
    Ok(Parsing {
        ends,
        final_phrase_duplicate,
    })
}

/// `c(N) log2(N) / N`; returns 0 for `N < 2`.
fn k_from_count(c: usize, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    c as f64 * (n as f64).log2() / n as f64
}

/// LZ complexity `K(N) = c(N) log2(N) / N`.
pub fn lz_k(s: &BitString) -> Result<f64, LzError> {
    if s.len() < 2 {
        return Err(LzError::TooShort(s.len()));
    }
    let parsing = lz_parse(s)?;
    Ok(k_from_count(parsing.phrase_count(), s.len()))
}

/// `ε_N = 2 (1 + log2 log2 (2N)) / log2 N`.
pub fn lz_epsilon(n: usize) -> Result<f64, LzError> {
    if n < 2 {
        return Err(LzError::TooShort(n));
    }
    let n = n as f64;
    Ok(2.0 * (1.0 + (2.0 * n).log2().log2()) / n.log2())
}

/// Upper bound `N / ((1 - ε_N) log2 N)` on the phrase count. Only meaningful
/// where `ε_N < 1`, i.e. for large N; returns infinity otherwise.
pub fn phrase_count_bound(n: usize) -> Result<f64, LzError> {
    let eps = lz_epsilon(n)?;
    if eps >= 1.0 {
        return Ok(f64::INFINITY);
    }
    Ok(n as f64 / ((1.0 - eps) * (n as f64).log2()))
}

/// Length `l_m` of all distinct strings of lengths 1..=m laid end to end,
/// `(m - 1) 2^(m+1) + 2`, with `l_0 = 0`.
pub fn exhaustive_len(m: u32) -> u64 {
    if m == 0 {
        0
    } else {
        (u64::from(m) - 1) * (1u64 << (m + 1)) + 2
    }
}

/// Prefix of length `n` of `0,1,00,01,10,11,000,...`.
pub fn exhaustive_string(n: usize) -> BitString {
    let mut bits = Vec::with_capacity(n);
    let mut width = 1u32;
    'outer: loop {
        for value in 0u64..(1u64 << width) {
            for k in (0..width).rev() {
                if bits.len() == n {
                    break 'outer;
                }
                bits.push(((value >> k) & 1) as u8);
            }
        }
        width += 1;
    }
    BitString::from_bits(bits).expect("bits are 0/1")
}

/// `(c_max(N), m*)`: the largest phrase count of any length-N string and the
/// largest `m` with `l_m <= N`.
pub fn lz_cmax(n: usize) -> (usize, u32) {
    let n64 = n as u64;
    let mut m_star = 0u32;
    while exhaustive_len(m_star + 1) <= n64 {
        m_star += 1;
    }
    let rest = n64 - exhaustive_len(m_star);
    let full = (1u64 << (m_star + 1)) - 2;
    let cmax = full + rest.div_ceil(u64::from(m_star) + 1);
    (cmax as usize, m_star)
}

/// Every LZ-derived quantity for one string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LzReport {
    pub n: usize,
    pub c: usize,
    pub k: f64,
    pub c_max: usize,
    pub k_max: f64,
    pub kappa: f64,
    pub epsilon_n: f64,
    pub m_star: u32,
}

/// Normalized LZ complexity `κ = c / c_max` together with its ingredients.
pub fn lz_kappa(s: &BitString) -> Result<LzReport, LzError> {
    let n = s.len();
    if n < 2 {
        return Err(LzError::TooShort(n));
    }
    let c = lz_parse(s)?.phrase_count();
    let (c_max, m_star) = lz_cmax(n);
    Ok(LzReport {
        n,
        c,
        k: k_from_count(c, n),
        c_max,
        k_max: k_from_count(c_max, n),
        kappa: c as f64 / c_max as f64,
        epsilon_n: lz_epsilon(n)?,
        m_star,
    })
}

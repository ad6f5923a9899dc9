//! Bit and event sources.
//!
//! OS entropy plays the ideal uniform source, the ChaCha20 keystream the
//! cryptographic PRNG, and the two mimic constructions turn keystream bits
//! into a biased stream with a prescribed probability of ones. The Bell
//! generators produce time-tagged two-station event streams for exercising the
//! coincidence and CHSH analysis.

mod bell_gen;
pub mod chacha20;
mod mimic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bell::EventRecord;
use crate::bits::BitString;

pub use bell_gen::{
    bell_lhv_events, bell_quantum_events, BellTiming, LhvStrategy, TSIRELSON_CORRELATIONS,
};
pub use chacha20::{chacha20_stream, ChaCha20Stream};
pub use mimic::{mimic_2byte, mimic_fraction, threshold_16bit};

#[derive(Debug, Error)]
pub enum SourceError {
    #[error("OS entropy source unavailable: {0}")]
    Entropy(String),
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("precision must be between 1 and 32 bits, got {0}")]
    Precision(u32),
    #[error("uniform stream exhausted mid-symbol: {len} bits is not a multiple of {m}")]
    StreamExhausted { len: usize, m: u32 },
    #[error("correlation E[{index}] = {value} outside [-1, 1]")]
    Correlation { index: usize, value: f64 },
    #[error("invalid timing parameter: {0}")]
    Timing(String),
    #[error("malformed LHV strategy table: {0}")]
    Strategy(String),
    #[error("seed must be 64 hex characters: {0}")]
    Seed(String),
    #[error("source kind {0} does not produce {1}")]
    WrongOutput(&'static str, &'static str),
}

/// 256-bit generator seed, written as 64 hex characters.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Seed(pub [u8; 32]);

impl Seed {
    /// Child seed `SHA-256(seed || label || index_le)`.
    pub fn derive(&self, label: &str, index: u64) -> Seed {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(label.as_bytes());
        h.update(index.to_le_bytes());
        Seed(h.finalize().into())
    }

    pub fn from_os() -> Result<Seed, SourceError> {
        let mut key = [0u8; 32];
        getrandom::fill(&mut key).map_err(|e| SourceError::Entropy(e.to_string()))?;
        Ok(Seed(key))
    }

    pub fn stream(&self) -> ChaCha20Stream {
        ChaCha20Stream::new(self.0)
    }
}

impl FromStr for Seed {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bytes = hex::decode(s.trim()).map_err(|e| SourceError::Seed(e.to_string()))?;
        let key: [u8; 32] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| SourceError::Seed(format!("got {} bytes", b.len())))?;
        Ok(Seed(key))
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({self})")
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `n` bits from the operating system's entropy source.
pub fn trng_bits(n: usize) -> Result<BitString, SourceError> {
    let mut bytes = vec![0u8; n.div_ceil(8)];
    getrandom::fill(&mut bytes).map_err(|e| SourceError::Entropy(e.to_string()))?;
    let mut s = BitString::from_bytes_msb(&bytes);
    if s.len() != n {
        s = s.slice(0, n);
    }
    Ok(s)
}

/// `n` raw keystream bits, MSB-first per byte.
pub fn chacha20_bits(seed: &Seed, n: usize) -> BitString {
    let bytes = chacha20_stream(&seed.0, n.div_ceil(8));
    let s = BitString::from_bytes_msb(&bytes);
    if s.len() == n {
        s
    } else {
        s.slice(0, n)
    }
}

/// What a source is, independent of how much output is requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    OsEntropy,
    Chacha20 {
        seed: Seed,
    },
    #[serde(rename = "mimic_2byte")]
    Mimic2Byte {
        seed: Seed,
        p: f64,
    },
    MimicFraction {
        seed: Seed,
        p: f64,
        m: u32,
    },
    BellQuantum {
        seed: Seed,
        correlations: [f64; 4],
        #[serde(default)]
        timing: BellTiming,
    },
    BellLhv {
        seed: Seed,
        strategy: LhvStrategy,
        #[serde(default)]
        timing: BellTiming,
    },
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::OsEntropy => "os_entropy",
            Self::Chacha20 { .. } => "chacha20",
            Self::Mimic2Byte { .. } => "mimic_2byte",
            Self::MimicFraction { .. } => "mimic_fraction",
            Self::BellQuantum { .. } => "bell_quantum",
            Self::BellLhv { .. } => "bell_lhv",
        }
    }

    pub fn seed(&self) -> Option<&Seed> {
        match self {
            Self::OsEntropy => None,
            Self::Chacha20 { seed }
            | Self::Mimic2Byte { seed, .. }
            | Self::MimicFraction { seed, .. }
            | Self::BellQuantum { seed, .. }
            | Self::BellLhv { seed, .. } => Some(seed),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        self.seed().is_some()
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        match self {
            Self::Mimic2Byte { p, .. } => check_probability(*p),
            Self::MimicFraction { p, m, .. } => {
                check_probability(*p)?;
                check_precision(*m)
            }
            Self::BellQuantum {
                correlations,
                timing,
                ..
            } => {
                check_correlations(correlations)?;
                timing.validate()
            }
            Self::BellLhv {
                strategy, timing, ..
            } => {
                strategy.validate()?;
                timing.validate()
            }
            _ => Ok(()),
        }
    }

    /// Same source with its seed replaced by `seed.derive(label, index)`.
    /// OS entropy has no seed and is returned unchanged.
    pub fn derived(&self, label: &str, index: u64) -> SourceKind {
        let mut out = self.clone();
        match &mut out {
            Self::OsEntropy => {}
            Self::Chacha20 { seed }
            | Self::Mimic2Byte { seed, .. }
            | Self::MimicFraction { seed, .. }
            | Self::BellQuantum { seed, .. }
            | Self::BellLhv { seed, .. } => *seed = seed.derive(label, index),
        }
        out
    }

    /// `n` output bits. Bell kinds produce events, not bits.
    pub fn bits(&self, n: usize) -> Result<BitString, SourceError> {
        self.validate()?;
        match self {
            Self::OsEntropy => trng_bits(n),
            Self::Chacha20 { seed } => Ok(chacha20_bits(seed, n)),
            Self::Mimic2Byte { seed, p } => mimic_2byte(seed, *p, n),
            Self::MimicFraction { seed, p, m } => {
                let uniform = chacha20_bits(seed, n * *m as usize);
                mimic_fraction(&uniform, *p, *m)
            }
            Self::BellQuantum { .. } | Self::BellLhv { .. } => {
                Err(SourceError::WrongOutput(self.name(), "bit strings"))
            }
        }
    }

    /// Two time-sorted station streams from `n_pairs` emitted pairs.
    pub fn events(
        &self,
        n_pairs: usize,
    ) -> Result<(Vec<EventRecord>, Vec<EventRecord>), SourceError> {
        match self {
            Self::BellQuantum {
                seed,
                correlations,
                timing,
            } => bell_quantum_events(seed, n_pairs, *correlations, timing),
            Self::BellLhv {
                seed,
                strategy,
                timing,
            } => bell_lhv_events(seed, n_pairs, strategy, timing),
            _ => Err(SourceError::WrongOutput(self.name(), "event streams")),
        }
    }
}

/// A source together with the requested output length (bits, or pairs for Bell kinds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(flatten)]
    pub kind: SourceKind,
    pub n: usize,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, n: usize) -> Self {
        Self { kind, n }
    }

    pub fn generate_bits(&self) -> Result<BitString, SourceError> {
        self.kind.bits(self.n)
    }

    pub fn generate_events(&self) -> Result<(Vec<EventRecord>, Vec<EventRecord>), SourceError> {
        self.kind.validate()?;
        self.kind.events(self.n)
    }
}

pub(crate) fn check_probability(p: f64) -> Result<(), SourceError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SourceError::Probability(p))
    }
}

pub(crate) fn check_precision(m: u32) -> Result<(), SourceError> {
    if (1..=32).contains(&m) {
        Ok(())
    } else {
        Err(SourceError::Precision(m))
    }
}

pub(crate) fn check_correlations(e: &[f64; 4]) -> Result<(), SourceError> {
    match e.iter().position(|v| !(-1.0..=1.0).contains(v)) {
        Some(index) => Err(SourceError::Correlation {
            index,
            value: e[index],
        }),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(b: u8) -> Seed {
        Seed([b; 32])
    }

    #[test]
    fn seed_hex_roundtrip() {
        let s = seed(0xab);
        let text = s.to_string();
        assert_eq!(text.len(), 64);
        assert_eq!(text.parse::<Seed>().unwrap(), s);
        assert!("abcd".parse::<Seed>().is_err());
        assert!("zz".repeat(32).parse::<Seed>().is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, format!("\"{text}\""));
    }

    #[test]
    fn derived_seeds_differ() {
        let s = seed(1);
        assert_ne!(s.derive("trial", 0), s.derive("trial", 1));
        assert_ne!(s.derive("trial", 0), s.derive("pilot", 0));
        assert_eq!(s.derive("trial", 5), s.derive("trial", 5));
    }

    #[test]
    fn trng_lengths_and_collisions() {
        assert!(trng_bits(0).unwrap().is_empty());
        assert_eq!(trng_bits(13).unwrap().len(), 13);
        assert_ne!(trng_bits(128).unwrap(), trng_bits(128).unwrap());
    }

    #[test]
    fn trng_frequency_concentrates() {
        let freqs: Vec<f64> = (0..100)
            .map(|_| trng_bits(100_000).unwrap().relative_frequency().unwrap())
            .collect();
        let mean = freqs.iter().sum::<f64>() / freqs.len() as f64;
        assert!((mean - 0.5).abs() < 0.0005 * 3.3, "mean {mean}");
    }

    #[test]
    fn spec_json_shape() {
        let spec = SourceSpec::new(
            SourceKind::Mimic2Byte {
                seed: seed(2),
                p: 0.25,
            },
            100,
        );
        let v = serde_json::to_value(&spec).unwrap();
        assert_eq!(v["kind"], "mimic_2byte");
        assert_eq!(v["n"], 100);
        let back: SourceSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, spec);
        let os: SourceSpec = serde_json::from_str(r#"{"kind":"os_entropy","n":5}"#).unwrap();
        assert!(!os.kind.is_deterministic());
    }

    #[test]
    fn seeded_kinds_are_deterministic() {
        let kinds = [
            SourceKind::Chacha20 { seed: seed(3) },
            SourceKind::Mimic2Byte {
                seed: seed(3),
                p: 0.3,
            },
            SourceKind::MimicFraction {
                seed: seed(3),
                p: 0.3,
                m: 8,
            },
        ];
        for kind in kinds {
            assert_eq!(kind.bits(1000).unwrap(), kind.bits(1000).unwrap());
            assert_eq!(kind.bits(1000).unwrap().len(), 1000);
            assert_ne!(
                kind.derived("t", 0).bits(64).unwrap(),
                kind.derived("t", 1).bits(64).unwrap()
            );
        }
    }

    #[test]
    fn validation_errors() {
        assert!(matches!(
            SourceKind::Mimic2Byte {
                seed: seed(0),
                p: 1.5
            }
            .bits(4),
            Err(SourceError::Probability(_))
        ));
        assert!(matches!(
            SourceKind::MimicFraction {
                seed: seed(0),
                p: 0.5,
                m: 0
            }
            .bits(4),
            Err(SourceError::Precision(0))
        ));
        assert!(matches!(
            SourceKind::OsEntropy.events(3),
            Err(SourceError::WrongOutput("os_entropy", _))
        ));
    }
}

//! Measure suites, batch comparison and distinguisher-advantage estimation.
//!
//! A randomness measure maps a string to a [`MeasureReport`]; a
//! [`Distinguisher`] thresholds one field of it into a single bit. The
//! advantage of a distinguisher between two sources is the gap between its
//! acceptance rates, estimated here by sampling both sources.

mod pipeline;
mod report;

use std::fmt;
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bell::BellError;
use crate::bits::{BitString, BitsError, StringMeta};
use crate::borel::{borel_b, BorelError};
use crate::lz::{lz_kappa, LzError};
use crate::sources::{SourceError, SourceKind};
use crate::stats::{quantile_sorted, welch_t, StatsError, WelchResult, Z95};

pub use pipeline::{preset, run_pipeline, PipelineConfig, PipelineOutput, Task, PRESETS};
pub use report::{
    bell_run_row, config_hash, write_csv_tables, BellRunRow, ComparisonRow, FrequencyRow,
    PearsonRow, Report, ReportRow,
};

/// Pilot batch size per source used to pick a median threshold.
pub const DEFAULT_PILOT: usize = 50;

/// Default number of strings per batch.
pub const DEFAULT_BATCH: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{measure} needs N >= {min}, got N = {n}")]
    TooShort {
        measure: &'static str,
        n: usize,
        min: usize,
    },
    #[error("{measure}: {source}")]
    Stats {
        measure: MeasureId,
        source: StatsError,
    },
    #[error("need at least {need} {what}, got {got}")]
    TooFew {
        what: &'static str,
        need: usize,
        got: usize,
    },
    #[error("invalid pipeline config: {0}")]
    Config(String),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Bell(#[from] BellError),
    #[error(transparent)]
    StatsOther(#[from] StatsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Where an analysed string came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "origin", rename_all = "snake_case")]
pub enum Provenance {
    Unspecified,
    Source {
        source: SourceKind,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        trial: Option<u64>,
    },
    File {
        path: String,
        sha256: String,
    },
    Bell {
        run: String,
        station: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        events_sha256: Option<String>,
        /// Generator of a synthetic run.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source: Option<SourceKind>,
    },
}

/// All randomness measures of one string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub meta: StringMeta,
    pub provenance: Provenance,
    pub c: usize,
    pub c_max: usize,
    pub k: f64,
    pub kappa: f64,
    pub b: f64,
    pub borel_normal: bool,
}

impl MeasureReport {
    pub fn value(&self, id: MeasureId) -> f64 {
        match id {
            MeasureId::K => self.k,
            MeasureId::Kappa => self.kappa,
            MeasureId::B => self.b,
            MeasureId::Frequency => self.meta.relative_frequency,
        }
    }

    pub fn with_source_id(mut self, id: impl Into<String>) -> Self {
        self.meta.source_id = id.into();
        self
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

/// Frequency, `K`, `κ` and `B` of `s` (requires `N >= 4`).
pub fn measure_suite(s: &BitString) -> Result<MeasureReport, HarnessError> {
    let n = s.len();
    let lz = lz_kappa(s).map_err(|e| match e {
        LzError::Empty | LzError::TooShort(_) => HarnessError::TooShort {
            measure: "lz",
            n,
            min: 2,
        },
    })?;
    let b = borel_b(s).map_err(|e| match e {
        BorelError::TooShort(_) => HarnessError::TooShort {
            measure: "borel",
            n,
            min: 4,
        },
        other => unreachable!("block census on a valid string: {other}"),
    })?;
    Ok(MeasureReport {
        meta: s.meta("")?,
        provenance: Provenance::Unspecified,
        c: lz.c,
        c_max: lz.c_max,
        k: lz.k,
        kappa: lz.kappa,
        b,
        borel_normal: b <= 1.0,
    })
}

/// The scalar a distinguisher looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureId {
    K,
    Kappa,
    B,
    Frequency,
}

impl MeasureId {
    pub const ALL: [MeasureId; 4] = [Self::K, Self::Kappa, Self::B, Self::Frequency];
    /// Measures compared by [`compare_batches`].
    pub const RANDOMNESS: [MeasureId; 3] = [Self::K, Self::Kappa, Self::B];
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::K => "k",
            Self::Kappa => "kappa",
            Self::B => "b",
            Self::Frequency => "frequency",
        })
    }
}

impl std::str::FromStr for MeasureId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "k" | "lz" => Ok(Self::K),
            "kappa" | "normalized_lz" => Ok(Self::Kappa),
            "b" | "borel" => Ok(Self::B),
            "frequency" | "freq" => Ok(Self::Frequency),
            _ => Err(HarnessError::Config(format!("unknown measure {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureComparison {
    pub measure: MeasureId,
    pub welch: WelchResult,
}

/// Welch's t-test between two batches on `K`, `κ` and `B`.
pub fn compare_batches(
    batch_a: &[MeasureReport],
    batch_b: &[MeasureReport],
) -> Result<Vec<MeasureComparison>, HarnessError> {
    for batch in [batch_a, batch_b] {
        if batch.len() < 2 {
            return Err(HarnessError::TooFew {
                what: "reports per batch",
                need: 2,
                got: batch.len(),
            });
        }
    }
    MeasureId::RANDOMNESS
        .iter()
        .map(|&measure| {
            let xs: Vec<f64> = batch_a.iter().map(|r| r.value(measure)).collect();
            let ys: Vec<f64> = batch_b.iter().map(|r| r.value(measure)).collect();
            let welch =
                welch_t(&xs, &ys).map_err(|source| HarnessError::Stats { measure, source })?;
            Ok(MeasureComparison { measure, welch })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    GreaterThan,
    LessThan,
}

/// Threshold test on a single measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distinguisher {
    pub measure: MeasureId,
    pub rule: Rule,
    pub threshold: f64,
}

impl Distinguisher {
    pub fn new(measure: MeasureId, rule: Rule, threshold: f64) -> Self {
        Self {
            measure,
            rule,
            threshold,
        }
    }

    pub fn accepts(&self, report: &MeasureReport) -> bool {
        let v = report.value(self.measure);
        match self.rule {
            Rule::GreaterThan => v > self.threshold,
            Rule::LessThan => v < self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageEstimate {
    pub source_1: SourceKind,
    pub source_2: SourceKind,
    pub n: usize,
    pub distinguisher: Distinguisher,
    pub trials: usize,
    pub accept_rate_1: f64,
    pub accept_rate_2: f64,
    /// `|accept_rate_1 - accept_rate_2|`
    pub adv: f64,
    /// Wald 95% interval of `accept_rate_1 - accept_rate_2`, clipped to [-1, 1].
    pub ci: [f64; 2],
}

/// Draws `count` strings of length `n`, each from its own derived seed, and
/// measures them. Output order follows the index.
pub fn measure_batch(
    source: &SourceKind,
    label: &str,
    count: usize,
    n: usize,
) -> Result<Vec<MeasureReport>, HarnessError> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let kind = source.derived(label, i);
            let s = kind.bits(n)?;
            Ok(measure_suite(&s)?
                .with_source_id(format!("{}/{label}/{i}", source.name()))
                .with_provenance(Provenance::Source {
                    source: kind,
                    n,
                    trial: Some(i),
                }))
        })
        .collect()
}

/// Median of the pooled pilot batches of both sources.
pub fn pilot_threshold(
    src1: &SourceKind,
    src2: &SourceKind,
    measure: MeasureId,
    pilot: usize,
    n: usize,
) -> Result<f64, HarnessError> {
    if pilot == 0 {
        return Err(HarnessError::TooFew {
            what: "pilot strings",
            need: 1,
            got: 0,
        });
    }
    let mut pooled: Vec<f64> = measure_batch(src1, "pilot", pilot, n)?
        .iter()
        .chain(&measure_batch(src2, "pilot", pilot, n)?)
        .map(|r| r.value(measure))
        .collect();
    pooled.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&pooled, 0.5))
}

/// Acceptance rates of `d` over `trials` fresh strings from each source.
pub fn estimate_advantage(
    src1: &SourceKind,
    src2: &SourceKind,
    d: &Distinguisher,
    trials: usize,
    n: usize,
) -> Result<AdvantageEstimate, HarnessError> {
    if trials < 30 {
        return Err(HarnessError::TooFew {
            what: "trials",
            need: 30,
            got: trials,
        });
    }
    let rate = |src: &SourceKind| -> Result<f64, HarnessError> {
        let reports = measure_batch(src, "trial", trials, n)?;
        Ok(reports.iter().filter(|r| d.accepts(r)).count() as f64 / trials as f64)
    };
    let (p1, p2) = (rate(src1)?, rate(src2)?);
    let diff = p1 - p2;
    let se = (p1 * (1.0 - p1) / trials as f64 + p2 * (1.0 - p2) / trials as f64).sqrt();
    Ok(AdvantageEstimate {
        source_1: src1.clone(),
        source_2: src2.clone(),
        n,
        distinguisher: *d,
        trials,
        accept_rate_1: p1,
        accept_rate_2: p2,
        adv: diff.abs(),
        ci: [(diff - Z95 * se).max(-1.0), (diff + Z95 * se).min(1.0)],
    })
}

/// [`estimate_advantage`] with the threshold set to the pilot median.
pub fn estimate_advantage_with_pilot(
    src1: &SourceKind,
    src2: &SourceKind,
    measure: MeasureId,
    rule: Rule,
    pilot: usize,
    trials: usize,
    n: usize,
) -> Result<AdvantageEstimate, HarnessError> {
    let threshold = pilot_threshold(src1, src2, measure, pilot, n)?;
    estimate_advantage(
        src1,
        src2,
        &Distinguisher::new(measure, rule, threshold),
        trials,
        n,
    )
}

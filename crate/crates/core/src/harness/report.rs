//! Report rows, the JSON envelope and plot-ready CSV mirrors.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{measure_suite, AdvantageEstimate, HarnessError, MeasureId, MeasureReport, Provenance};
use crate::bell::{bell_summary, extract_strings, BellSummary, CoincidencePair};
use crate::sources::SourceKind;
use crate::stats::StratumResult;

/// Summary of one generated batch: mean and spread of the frequency of ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub label: String,
    pub source: SourceKind,
    pub p_target: f64,
    pub strings: usize,
    pub n: usize,
    pub mean_frequency: f64,
    pub std_frequency: f64,
}

/// One Bell run: the CHSH value and the measures of Alice's, Bob's and the
/// mixed string, in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellRunRow {
    pub filename: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events_sha256: Option<String>,
    pub n: usize,
    pub s: f64,
    pub k: [f64; 3],
    pub kappa: [f64; 3],
    pub b: [f64; 3],
    pub low_n_outlier: bool,
    pub summary: BellSummary,
    pub measures: [MeasureReport; 3],
}

pub const STATIONS: [&str; 3] = ["alice", "bob", "mixed"];

/// Analyses matched pairs into a [`BellRunRow`]. `events_sha256` identifies
/// recorded input files, `source` the generator of a synthetic run.
pub fn bell_run_row(
    filename: &str,
    pairs: &[CoincidencePair],
    min_coincidences: usize,
    events_sha256: Option<String>,
    source: Option<SourceKind>,
) -> Result<BellRunRow, HarnessError> {
    let strings = extract_strings(pairs)?;
    let summary = bell_summary(pairs, min_coincidences)?;
    let mut measures = Vec::with_capacity(3);
    for (station, s) in STATIONS
        .iter()
        .zip([&strings.alice, &strings.bob, &strings.mixed])
    {
        measures.push(
            measure_suite(s)?
                .with_source_id(format!("{filename}/{station}"))
                .with_provenance(Provenance::Bell {
                    run: filename.to_string(),
                    station: station.to_string(),
                    events_sha256: events_sha256.clone(),
                    source: source.clone(),
                }),
        );
    }
    let measures: [MeasureReport; 3] = measures.try_into().expect("three stations");
    let pick = |id: MeasureId| measures.each_ref().map(|m| m.value(id));
    Ok(BellRunRow {
        filename: filename.to_string(),
        events_sha256,
        n: pairs.len(),
        s: summary.s,
        k: pick(MeasureId::K),
        kappa: pick(MeasureId::Kappa),
        b: pick(MeasureId::B),
        low_n_outlier: summary.low_n_outlier,
        summary,
        measures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub measure: MeasureId,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    /// The two compared batches, in order.
    pub inputs: [Provenance; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PearsonRow {
    pub label: String,
    pub station: String,
    pub measure: MeasureId,
    /// Names of the Bell runs that entered the correlation.
    pub runs: Vec<String>,
    #[serde(flatten)]
    pub stratum: StratumResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReportRow {
    Measure(MeasureReport),
    Frequency(FrequencyRow),
    Bell(Box<BellRunRow>),
    Welch(ComparisonRow),
    Pearson(PearsonRow),
    Advantage(AdvantageEstimate),
}

/// Canonical JSON output of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub tool_version: String,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(config_hash: String, rows: Vec<ReportRow>) -> Self {
        Self {
            config_hash,
            tool_version: crate::TOOL_VERSION.to_string(),
            rows,
        }
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn measure_reports(&self) -> Vec<&MeasureReport> {
        self.rows
            .iter()
            .filter_map(|row| match row {
                ReportRow::Measure(m) => Some(m),
                _ => None,
            })
            .collect()
    }
}

/// Hex SHA-256 of the JSON serialisation of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String, HarnessError> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn write_table(
    path: PathBuf,
    header: &[&str],
    rows: Vec<Vec<String>>,
    written: &mut Vec<PathBuf>,
) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    written.push(path);
    Ok(())
}

/// Writes one CSV per row type present in `report`. Provenance is not carried
/// over; the JSON report stays authoritative.
pub fn write_csv_tables(report: &Report, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let mut measures = Vec::new();
    let mut frequency = Vec::new();
    let mut numerics = Vec::new();
    let mut welch = Vec::new();
    let mut pearson = Vec::new();
    let mut advantage = Vec::new();
    for row in &report.rows {
        match row {
            ReportRow::Measure(m) => measures.push(vec![
                m.meta.source_id.clone(),
                m.meta.n.to_string(),
                fmt_f(m.meta.relative_frequency),
                fmt_f(m.k),
                fmt_f(m.kappa),
                fmt_f(m.b),
                m.borel_normal.to_string(),
            ]),
            ReportRow::Frequency(f) => frequency.push(vec![
                f.label.clone(),
                fmt_f(f.p_target),
                f.strings.to_string(),
                f.n.to_string(),
                fmt_f(f.mean_frequency),
                fmt_f(f.std_frequency),
            ]),
            ReportRow::Bell(b) => {
                let mut r = vec![b.filename.clone(), b.n.to_string(), fmt_f(b.s)];
                for arr in [&b.k, &b.kappa, &b.b] {
                    r.extend(arr.iter().map(|&v| fmt_f(v)));
                }
                r.push(b.low_n_outlier.to_string());
                numerics.push(r);
            }
            ReportRow::Welch(c) => welch.push(vec![
                c.label.clone(),
                c.measure.to_string(),
                fmt_f(c.t),
                fmt_f(c.df),
                fmt_f(c.p),
            ]),
            ReportRow::Pearson(p) => {
                let bound = |b: Option<f64>| b.map(fmt_f).unwrap_or_default();
                pearson.push(vec![
                    p.label.clone(),
                    p.station.clone(),
                    p.measure.to_string(),
                    bound(p.stratum.lower),
                    bound(p.stratum.upper),
                    p.stratum.result.n.to_string(),
                    fmt_f(p.stratum.result.r),
                    fmt_f(p.stratum.result.p),
                    fmt_f(p.stratum.result.ci95[0]),
                    fmt_f(p.stratum.result.ci95[1]),
                ]);
            }
            ReportRow::Advantage(a) => advantage.push(vec![
                a.source_1.name().to_string(),
                a.source_2.name().to_string(),
                a.distinguisher.measure.to_string(),
                fmt_f(a.distinguisher.threshold),
                a.trials.to_string(),
                a.n.to_string(),
                fmt_f(a.accept_rate_1),
                fmt_f(a.accept_rate_2),
                fmt_f(a.adv),
                fmt_f(a.ci[0]),
                fmt_f(a.ci[1]),
            ]),
        }
    }
    let mut written = Vec::new();
    write_table(
        dir.join("measures.csv"),
        &[
            "source_id",
            "n",
            "frequency",
            "k",
            "kappa",
            "b",
            "borel_normal",
        ],
        measures,
        &mut written,
    )?;
    write_table(
        dir.join("frequency.csv"),
        &[
            "label",
            "p_target",
            "strings",
            "n",
            "mean_frequency",
            "std_frequency",
        ],
        frequency,
        &mut written,
    )?;
    write_table(
        dir.join("numerics.csv"),
        &[
            "filename",
            "n",
            "s",
            "k_alice",
            "k_bob",
            "k_mixed",
            "kappa_alice",
            "kappa_bob",
            "kappa_mixed",
            "b_alice",
            "b_bob",
            "b_mixed",
            "low_n_outlier",
        ],
        numerics,
        &mut written,
    )?;
    write_table(
        dir.join("welch.csv"),
        &["label", "measure", "t", "df", "p"],
        welch,
        &mut written,
    )?;
    write_table(
        dir.join("pearson.csv"),
        &[
            "label", "station", "measure", "n_lower", "n_upper", "samples", "r", "p", "ci_lo",
            "ci_hi",
        ],
        pearson,
        &mut written,
    )?;
    write_table(
        dir.join("advantage.csv"),
        &[
            "source_1",
            "source_2",
            "measure",
            "threshold",
            "trials",
            "n",
            "accept_1",
            "accept_2",
            "adv",
            "ci_lo",
            "ci_hi",
        ],
        advantage,
        &mut written,
    )?;
    Ok(written)
}

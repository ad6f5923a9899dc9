//! Config-driven generation → measurement → statistics runs.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::STATIONS;
use super::{
    bell_run_row, compare_batches, config_hash, estimate_advantage_with_pilot, measure_batch,
    write_csv_tables, ComparisonRow, FrequencyRow, HarnessError, MeasureId, PearsonRow, Provenance,
    Report, ReportRow, Rule, DEFAULT_BATCH, DEFAULT_PILOT,
};
use crate::bell::{match_coincidences, DEFAULT_MIN_COINCIDENCES};
use crate::sources::{BellTiming, LhvStrategy, Seed, SourceKind, TSIRELSON_CORRELATIONS};
use crate::stats::{mean, std_dev, stratified_pearson, StratumRecord, DEFAULT_STRATUM_EDGES};

pub const PRESETS: [&str; 3] = ["coin-toss", "bell-synthetic", "nogo-demo"];

/// Seed used by the presets unless the caller supplies one.
const PRESET_SEED: [u8; 32] = *b"lzbell preset seed, fixed v1....";

/// Mean frequencies of ones reported for three hardware quantum coin-toss datasets.
pub const COIN_TOSS_PROBABILITIES: [f64; 3] = [0.4851, 0.4999, 0.4893];

fn default_batch() -> usize {
    DEFAULT_BATCH
}
fn default_length() -> usize {
    20_000
}
fn default_trials() -> usize {
    200
}
fn default_pilot() -> usize {
    DEFAULT_PILOT
}
fn default_window() -> i64 {
    6
}
fn default_min_coincidences() -> usize {
    DEFAULT_MIN_COINCIDENCES
}
fn default_strata() -> Vec<f64> {
    DEFAULT_STRATUM_EDGES.to_vec()
}
fn default_uniform() -> SourceKind {
    SourceKind::OsEntropy
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum BellModel {
    Quantum { correlations: [f64; 4] },
    Lhv { strategy: LhvStrategy },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellRunSpec {
    pub name: String,
    pub pairs: usize,
    #[serde(flatten)]
    pub model: BellModel,
    #[serde(default)]
    pub timing: BellTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum Task {
    /// Batches of two-byte mimic strings, one per target probability.
    CoinToss {
        label: String,
        probabilities: Vec<f64>,
        #[serde(default = "default_batch")]
        strings: usize,
        #[serde(default = "default_length")]
        length: usize,
        #[serde(default)]
        include_measures: bool,
    },
    /// Welch comparison of two explicitly specified sources.
    Compare {
        label: String,
        a: SourceKind,
        b: SourceKind,
        #[serde(default = "default_batch")]
        strings: usize,
        #[serde(default = "default_length")]
        length: usize,
    },
    /// Synthetic Bell runs: events → coincidences → strings → measures, then
    /// stratified correlation of S against each measure.
    BellSynthetic {
        runs: Vec<BellRunSpec>,
        #[serde(default = "default_window")]
        window_ns: i64,
        #[serde(default)]
        offset_ns: i64,
        #[serde(default = "default_min_coincidences")]
        min_coincidences: usize,
        #[serde(default = "default_strata")]
        strata: Vec<f64>,
    },
    /// Uniform source vs ChaCha20: Welch table plus pilot-median advantage per measure.
    NogoDemo {
        #[serde(default = "default_uniform")]
        uniform: SourceKind,
        #[serde(default = "default_batch")]
        strings: usize,
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_pilot")]
        pilot: usize,
        #[serde(default = "default_length")]
        length: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub name: String,
    /// Root of every derived seed in the run.
    pub seed: Seed,
    pub tasks: Vec<Task>,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        if self.tasks.is_empty() {
            return bad("no tasks".into());
        }
        for task in &self.tasks {
            match task {
                Task::CoinToss {
                    probabilities,
                    strings,
                    length,
                    ..
                } => {
                    if let Some(p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                        return bad(format!("coin_toss probability {p} outside [0, 1]"));
                    }
                    if *strings < 2 || *length < 4 {
                        return bad("coin_toss needs strings >= 2 and length >= 4".into());
                    }
                }
                Task::Compare {
                    a,
                    b,
                    strings,
                    length,
                    ..
                } => {
                    a.validate()?;
                    b.validate()?;
                    if *strings < 2 || *length < 4 {
                        return bad("compare needs strings >= 2 and length >= 4".into());
                    }
                }
                Task::BellSynthetic {
                    runs, window_ns, ..
                } => {
                    if runs.is_empty() {
                        return bad("bell_synthetic has no runs".into());
                    }
                    if *window_ns <= 0 {
                        return bad(format!("window_ns must be positive, got {window_ns}"));
                    }
                    for run in runs {
                        run.kind(&self.seed, 0).validate()?;
                    }
                }
                Task::NogoDemo {
                    uniform,
                    strings,
                    trials,
                    pilot,
                    length,
                } => {
                    uniform.validate()?;
                    if *strings < 2 || *trials < 30 || *pilot == 0 || *length < 4 {
                        return bad(
                            "nogo_demo needs strings >= 2, trials >= 30, pilot >= 1, length >= 4"
                                .into(),
                        );
                    }
                }
            }
        }
        Ok(())
    }
}

impl BellRunSpec {
    fn kind(&self, root: &Seed, index: u64) -> SourceKind {
        let seed = root.derive(&format!("bell/{}", self.name), index);
        match &self.model {
            BellModel::Quantum { correlations } => SourceKind::BellQuantum {
                seed,
                correlations: *correlations,
                timing: self.timing.clone(),
            },
            BellModel::Lhv { strategy } => SourceKind::BellLhv {
                seed,
                strategy: strategy.clone(),
                timing: self.timing.clone(),
            },
        }
    }
}

/// Built-in configurations.
pub fn preset(name: &str, seed: Option<Seed>) -> Result<PipelineConfig, HarnessError> {
    let seed = seed.unwrap_or(Seed(PRESET_SEED));
    let tasks = match name {
        "coin-toss" => vec![Task::CoinToss {
            label: "coin-toss".into(),
            probabilities: COIN_TOSS_PROBABILITIES.to_vec(),
            strings: DEFAULT_BATCH,
            length: 20_000,
            include_measures: false,
        }],
        "bell-synthetic" => vec![bell_synthetic_task()],
        "nogo-demo" => vec![Task::NogoDemo {
            uniform: SourceKind::OsEntropy,
            strings: DEFAULT_BATCH,
            trials: 200,
            pilot: DEFAULT_PILOT,
            length: 20_000,
        }],
        other => {
            return Err(HarnessError::Config(format!(
                "unknown preset {other:?}; expected one of {PRESETS:?}"
            )))
        }
    };
    Ok(PipelineConfig {
        name: name.to_string(),
        seed,
        tasks,
    })
}

/// Twenty runs spread over three N strata plus one low-N run, with the
/// visibility of the singlet correlations varied from run to run.
fn bell_synthetic_task() -> Task {
    let timing = BellTiming {
        jitter_ns: 1.0,
        efficiency_a: 0.95,
        efficiency_b: 0.95,
        ..BellTiming::default()
    };
    let mut runs = Vec::new();
    let mut push = |name: String, pairs: usize, k: usize| {
        // golden-ratio sequence: visibilities spread over [0.62, 1.0]
        let v = 0.62 + 0.38 * ((k as f64 * 0.618_034).fract());
        runs.push(BellRunSpec {
            name,
            pairs,
            model: BellModel::Quantum {
                correlations: TSIRELSON_CORRELATIONS.map(|e| e * v),
            },
            timing: timing.clone(),
        });
    };
    for i in 0..10 {
        push(format!("synthetic{i:02}"), 16_000 + 300 * i, i);
    }
    for i in 0..7 {
        push(format!("synthetic{:02}", 10 + i), 30_000 + 300 * i, 10 + i);
    }
    for i in 0..3 {
        push(format!("synthetic{:02}", 20 + i), 46_500 + 500 * i, 20 + i);
    }
    push("synthetic_lown".into(), 1_200, 23);
    Task::BellSynthetic {
        runs,
        window_ns: default_window(),
        offset_ns: 0,
        min_coincidences: DEFAULT_MIN_COINCIDENCES,
        strata: DEFAULT_STRATUM_EDGES.to_vec(),
    }
}

fn run_task(root: &Seed, index: usize, task: &Task) -> Result<Vec<ReportRow>, HarnessError> {
    let mut rows = Vec::new();
    match task {
        Task::CoinToss {
            label,
            probabilities,
            strings,
            length,
            include_measures,
        } => {
            for (k, &p) in probabilities.iter().enumerate() {
                let source = SourceKind::Mimic2Byte {
                    seed: root.derive(&format!("task{index}/coin-toss/{label}"), k as u64),
                    p,
                };
                let batch = measure_batch(&source, "trial", *strings, *length)?;
                let freqs: Vec<f64> = batch.iter().map(|r| r.meta.relative_frequency).collect();
                rows.push(ReportRow::Frequency(FrequencyRow {
                    label: format!("{label}/p={p}"),
                    source: source.clone(),
                    p_target: p,
                    strings: *strings,
                    n: *length,
                    mean_frequency: mean(&freqs),
                    std_frequency: std_dev(&freqs),
                }));
                if *include_measures {
                    rows.extend(batch.into_iter().map(ReportRow::Measure));
                }
            }
        }
        Task::Compare {
            label,
            a,
            b,
            strings,
            length,
        } => {
            let batch_a = measure_batch(a, "trial", *strings, *length)?;
            let batch_b = measure_batch(b, "trial", *strings, *length)?;
            let inputs = [batch_origin(a, *length), batch_origin(b, *length)];
            for cmp in compare_batches(&batch_a, &batch_b)? {
                rows.push(ReportRow::Welch(ComparisonRow {
                    label: label.clone(),
                    measure: cmp.measure,
                    t: cmp.welch.t,
                    df: cmp.welch.df,
                    p: cmp.welch.p,
                    inputs: inputs.clone(),
                }));
            }
        }
        Task::BellSynthetic {
            runs,
            window_ns,
            offset_ns,
            min_coincidences,
            strata,
        } => {
            let bell_rows = runs
                .par_iter()
                .map(|run| {
                    let kind = run.kind(root, index as u64);
                    let (a, b) = kind.events(run.pairs)?;
                    let pairs = match_coincidences(&a, &b, *window_ns, *offset_ns)?;
                    bell_run_row(&run.name, &pairs, *min_coincidences, None, Some(kind))
                })
                .collect::<Result<Vec<_>, HarnessError>>()?;
            // low-N runs are reported but kept out of the correlation analysis
            let kept: Vec<_> = bell_rows.iter().filter(|r| !r.low_n_outlier).collect();
            for (st, station) in STATIONS.iter().enumerate() {
                for measure in MeasureId::RANDOMNESS {
                    let records: Vec<StratumRecord> = kept
                        .iter()
                        .map(|r| StratumRecord {
                            n: r.n as f64,
                            s: r.s,
                            value: r.measures[st].value(measure),
                        })
                        .collect();
                    for stratum in stratified_pearson(&records, strata)? {
                        let runs = kept
                            .iter()
                            .filter(|r| {
                                let n = r.n as f64;
                                stratum.lower.is_none_or(|lo| n >= lo)
                                    && stratum.upper.is_none_or(|hi| n < hi)
                            })
                            .map(|r| r.filename.clone())
                            .collect();
                        rows.push(ReportRow::Pearson(PearsonRow {
                            label: "s-vs-measure".into(),
                            station: station.to_string(),
                            measure,
                            runs,
                            stratum,
                        }));
                    }
                }
            }
            let mut all = bell_rows
                .into_iter()
                .map(|r| ReportRow::Bell(Box::new(r)))
                .collect::<Vec<_>>();
            all.append(&mut rows);
            rows = all;
        }
        Task::NogoDemo {
            uniform,
            strings,
            trials,
            pilot,
            length,
        } => {
            let prng = SourceKind::Chacha20 {
                seed: root.derive(&format!("task{index}/nogo/chacha20"), 0),
            };
            let batch_u = measure_batch(uniform, "batch", *strings, *length)?;
            let batch_p = measure_batch(&prng, "batch", *strings, *length)?;
            let inputs = [batch_origin(uniform, *length), batch_origin(&prng, *length)];
            for cmp in compare_batches(&batch_u, &batch_p)? {
                rows.push(ReportRow::Welch(ComparisonRow {
                    label: format!("{} vs chacha20", uniform.name()),
                    measure: cmp.measure,
                    t: cmp.welch.t,
                    df: cmp.welch.df,
                    p: cmp.welch.p,
                    inputs: inputs.clone(),
                }));
            }
            for measure in MeasureId::ALL {
                let est = estimate_advantage_with_pilot(
                    uniform,
                    &prng,
                    measure,
                    Rule::GreaterThan,
                    *pilot,
                    *trials,
                    *length,
                )?;
                rows.push(ReportRow::Advantage(est));
            }
        }
    }
    Ok(rows)
}

fn batch_origin(source: &SourceKind, n: usize) -> Provenance {
    Provenance::Source {
        source: source.clone(),
        n,
        trial: None,
    }
}

/// Files written by [`run_pipeline`].
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: Report,
    pub json_path: PathBuf,
    pub csv_paths: Vec<PathBuf>,
}

/// Runs every task in order and writes `report.json` plus CSV tables into `out_dir`.
pub fn run_pipeline(
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineOutput, HarnessError> {
    config.validate()?;
    let mut rows = Vec::new();
    for (index, task) in config.tasks.iter().enumerate() {
        rows.extend(run_task(&config.seed, index, task)?);
    }
    let report = Report::new(config_hash(config)?, rows);
    fs::create_dir_all(out_dir)?;
    let json_path = out_dir.join("report.json");
    report.write_json(&json_path)?;
    fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(config)? + "\n",
    )?;
    let csv_paths = write_csv_tables(&report, out_dir)?;
    Ok(PipelineOutput {
        report,
        json_path,
        csv_paths,
    })
}

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use lzbell::bell::{match_coincidences, read_events, write_events, DEFAULT_MIN_COINCIDENCES};
use lzbell::bits::{load_bits, store_bits, BitFormat};
use lzbell::harness::{
    bell_run_row, compare_batches, config_hash, measure_suite, preset, run_pipeline,
    write_csv_tables, ComparisonRow, MeasureId, PearsonRow, PipelineConfig, Provenance, Report,
    ReportRow, Task, DEFAULT_BATCH, DEFAULT_PILOT, PRESETS,
};
use lzbell::sources::{
    BellTiming, LhvStrategy, Seed, SourceKind, SourceSpec, TSIRELSON_CORRELATIONS,
};
use lzbell::stats::{stratified_pearson, StratumRecord};

#[derive(Parser)]
#[command(
    name = "lzbell",
    version,
    about = "Randomness measures, Bell-test analysis and distinguisher experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate bit strings or Bell event streams.
    Gen(GenArgs),
    /// Measure bit-string files (frequency, K, kappa, B).
    Measure(MeasureArgs),
    /// Match two event streams and analyse the coincidences.
    Bell(BellArgs),
    /// Welch t-test between the measure rows of two reports.
    Compare(CompareArgs),
    /// Stratified Pearson correlation of S against a measure.
    Correlate(CorrelateArgs),
    /// Distinguisher advantage of a uniform source against ChaCha20.
    NogoDemo(NogoArgs),
    /// Run a config file or a built-in preset.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    OsEntropy,
    Chacha20,
    Mimic2byte,
    MimicFraction,
    BellQuantum,
    BellLhv,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// 64 hex digits; drawn from the OS when omitted.
    #[arg(long)]
    seed: Option<Seed>,
    /// Target probability of a 1 (mimic kinds).
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Bits per output symbol (mimic-fraction).
    #[arg(long, default_value_t = 16)]
    m: u32,
    /// Bits per string, or emitted pairs for Bell kinds.
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value = "ascii")]
    format: BitFormat,
    /// Scales the Tsirelson correlations (bell-quantum).
    #[arg(long, default_value_t = 1.0)]
    visibility: f64,
    /// `shared-coin` or `det:a0a1b0b1` (bell-lhv).
    #[arg(long, default_value = "shared-coin")]
    strategy: String,
    #[arg(long, default_value_t = 0.0)]
    jitter_ns: f64,
    #[arg(long, default_value_t = 1.0)]
    efficiency: f64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "ascii")]
    format: BitFormat,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BellArgs {
    #[arg(long)]
    alice: PathBuf,
    #[arg(long)]
    bob: PathBuf,
    #[arg(long, default_value_t = 6)]
    window_ns: i64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    offset_ns: i64,
    #[arg(long, default_value_t = DEFAULT_MIN_COINCIDENCES)]
    min_coincidences: usize,
    /// Run name; defaults to the directory holding the Alice file.
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value = "ascii")]
    format: BitFormat,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, default_value = "compare")]
    label: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrelateArgs {
    /// CSV with columns `n,s,value` and an optional `run` column.
    records: PathBuf,
    /// Stratum edges on N, comma separated; `none` for a single stratum.
    #[arg(long, default_value = "20000,40000", value_parser = parse_bounds)]
    bounds: Bounds,
    #[arg(long, default_value = "k")]
    measure: MeasureId,
    #[arg(long, default_value = "alice")]
    station: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NogoArgs {
    /// Seed of the uniform side; OS entropy when omitted.
    #[arg(long)]
    uniform_seed: Option<Seed>,
    /// Root seed of the ChaCha20 side.
    #[arg(long)]
    seed: Option<Seed>,
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    strings: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_PILOT)]
    pilot: usize,
    #[arg(long, default_value_t = 20_000)]
    length: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Overrides the seed of the config or preset.
    #[arg(long)]
    seed: Option<Seed>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone)]
struct Bounds(Vec<f64>);

fn parse_bounds(text: &str) -> Result<Bounds, String> {
    let text = text.trim();
    if text.is_empty() || text.eq_ignore_ascii_case("none") {
        return Ok(Bounds(Vec::new()));
    }
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Bounds)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn emit(report: &Report, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            report.write_json(path)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{}", report.to_json()?),
    }
    Ok(())
}

fn extension(format: BitFormat) -> &'static str {
    match format {
        BitFormat::Ascii => "txt",
        BitFormat::Packed => "bin",
    }
}

fn parse_strategy(text: &str) -> Result<LhvStrategy> {
    if text == "shared-coin" {
        return Ok(LhvStrategy::shared_coin());
    }
    let Some(digits) = text.strip_prefix("det:") else {
        bail!("unknown strategy {text:?}; use shared-coin or det:a0a1b0b1");
    };
    let d: Vec<u8> = digits.bytes().map(|c| c.wrapping_sub(b'0')).collect();
    if d.len() != 4 || d.iter().any(|&v| v > 1) {
        bail!("deterministic strategy needs four 0/1 digits, got {digits:?}");
    }
    Ok(LhvStrategy::deterministic([d[0], d[1]], [d[2], d[3]]))
}

fn gen(args: GenArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => Seed::from_os()?,
    };
    let timing = BellTiming {
        jitter_ns: args.jitter_ns,
        efficiency_a: args.efficiency,
        efficiency_b: args.efficiency,
        ..BellTiming::default()
    };
    let kind = match args.kind {
        Kind::OsEntropy => SourceKind::OsEntropy,
        Kind::Chacha20 => SourceKind::Chacha20 { seed },
        Kind::Mimic2byte => SourceKind::Mimic2Byte { seed, p: args.p },
        Kind::MimicFraction => SourceKind::MimicFraction {
            seed,
            p: args.p,
            m: args.m,
        },
        Kind::BellQuantum => SourceKind::BellQuantum {
            seed,
            correlations: TSIRELSON_CORRELATIONS.map(|e| e * args.visibility),
            timing,
        },
        Kind::BellLhv => SourceKind::BellLhv {
            seed,
            strategy: parse_strategy(&args.strategy)?,
            timing,
        },
    };
    kind.validate()?;
    fs::create_dir_all(&args.out_dir)?;
    let bell = matches!(args.kind, Kind::BellQuantum | Kind::BellLhv);
    let mut manifest = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let spec = SourceSpec::new(kind.derived("gen", i as u64), args.length);
        if bell {
            let dir = if args.count == 1 {
                args.out_dir.clone()
            } else {
                args.out_dir.join(format!("run{i:04}"))
            };
            fs::create_dir_all(&dir)?;
            let (a, b) = spec.generate_events()?;
            write_events(dir.join("alice.csv"), &a)?;
            write_events(dir.join("bob.csv"), &b)?;
            manifest.push(serde_json::json!({
                "dir": dir,
                "spec": spec,
                "alice_events": a.len(),
                "bob_events": b.len(),
            }));
        } else {
            let path =
                args.out_dir
                    .join(format!("{}_{i:04}.{}", kind.name(), extension(args.format)));
            store_bits(&spec.generate_bits()?, &path, args.format)?;
            manifest.push(serde_json::json!({
                "file": path,
                "sha256": sha256_file(&path)?,
                "spec": spec,
            }));
        }
    }
    let manifest_path = args.out_dir.join("manifest.json");
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    println!(
        "generated {} {} output(s) in {} (manifest: {})",
        args.count,
        kind.name(),
        args.out_dir.display(),
        manifest_path.display()
    );
    Ok(())
}

fn measure(args: MeasureArgs) -> Result<()> {
    let mut rows = Vec::with_capacity(args.files.len());
    let mut inputs = Vec::with_capacity(args.files.len());
    for path in &args.files {
        let s =
            load_bits(path, args.format).with_context(|| format!("loading {}", path.display()))?;
        let sha = sha256_file(path)?;
        let shown = path.display().to_string();
        let report = measure_suite(&s)?
            .with_source_id(shown.clone())
            .with_provenance(Provenance::File {
                path: shown.clone(),
                sha256: sha.clone(),
            });
        eprintln!(
            "{shown}: N={} freq={:.5} K={:.5} kappa={:.5} B={:.4}",
            report.meta.n, report.meta.relative_frequency, report.k, report.kappa, report.b
        );
        inputs.push((shown, sha));
        rows.push(ReportRow::Measure(report));
    }
    let hash = config_hash(&serde_json::json!({
        "command": "measure",
        "format": args.format.to_string(),
        "inputs": inputs,
    }))?;
    emit(&Report::new(hash, rows), args.out.as_deref())
}

fn bell(args: BellArgs) -> Result<()> {
    let a =
        read_events(&args.alice).with_context(|| format!("reading {}", args.alice.display()))?;
    let b = read_events(&args.bob).with_context(|| format!("reading {}", args.bob.display()))?;
    let pairs = match_coincidences(&a, &b, args.window_ns, args.offset_ns)?;
    let mut hasher = Sha256::new();
    hasher.update(fs::read(&args.alice)?);
    hasher.update(fs::read(&args.bob)?);
    let events_sha = hex::encode(hasher.finalize());
    let name = args.name.clone().unwrap_or_else(|| {
        args.alice
            .parent()
            .and_then(Path::file_name)
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into())
    });
    let row = bell_run_row(&name, &pairs, args.min_coincidences, Some(events_sha), None)?;

    fs::create_dir_all(&args.out_dir)?;
    let strings = lzbell::bell::extract_strings(&pairs)?;
    let ext = extension(args.format);
    for (station, s) in [
        ("alice", &strings.alice),
        ("bob", &strings.bob),
        ("mixed", &strings.mixed),
    ] {
        store_bits(
            s,
            args.out_dir.join(format!("{station}.{ext}")),
            args.format,
        )?;
    }
    println!(
        "{name}: {} coincidences from {} / {} events, S = {:.4}{}",
        row.n,
        a.len(),
        b.len(),
        row.s,
        if row.low_n_outlier {
            " (below coincidence floor)"
        } else {
            ""
        }
    );
    for (k, station) in ["alice", "bob", "mixed"].iter().enumerate() {
        println!(
            "  {station:<5} K={:.5} kappa={:.5} B={:.4}",
            row.k[k], row.kappa[k], row.b[k]
        );
    }
    let hash = config_hash(&serde_json::json!({
        "command": "bell",
        "window_ns": args.window_ns,
        "offset_ns": args.offset_ns,
        "min_coincidences": args.min_coincidences,
        "name": name,
    }))?;
    let report = Report::new(hash, vec![ReportRow::Bell(Box::new(row))]);
    report.write_json(args.out_dir.join("report.json"))?;
    write_csv_tables(&report, &args.out_dir)?;
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let load = |path: &Path| -> Result<(Report, Provenance)> {
        let report =
            Report::read_json(path).with_context(|| format!("reading {}", path.display()))?;
        let origin = Provenance::File {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        };
        Ok((report, origin))
    };
    let (first, p1) = load(&args.first)?;
    let (second, p2) = load(&args.second)?;
    let a: Vec<_> = first.measure_reports().into_iter().cloned().collect();
    let b: Vec<_> = second.measure_reports().into_iter().cloned().collect();
    let mut rows = Vec::new();
    println!("{:<8} {:>10} {:>10} {:>12}", "measure", "t", "df", "p");
    for cmp in compare_batches(&a, &b)? {
        println!(
            "{:<8} {:>10.4} {:>10.2} {:>12.4e}",
            cmp.measure.to_string(),
            cmp.welch.t,
            cmp.welch.df,
            cmp.welch.p
        );
        rows.push(ReportRow::Welch(ComparisonRow {
            label: args.label.clone(),
            measure: cmp.measure,
            t: cmp.welch.t,
            df: cmp.welch.df,
            p: cmp.welch.p,
            inputs: [p1.clone(), p2.clone()],
        }));
    }
    let hash = config_hash(&serde_json::json!({
        "command": "compare",
        "label": args.label,
        "inputs": [p1, p2],
    }))?;
    if let Some(path) = &args.out {
        Report::new(hash, rows).write_json(path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Deserialize)]
struct RecordLine {
    n: f64,
    s: f64,
    value: f64,
    #[serde(default)]
    run: Option<String>,
}

fn correlate(args: CorrelateArgs) -> Result<()> {
    let mut reader = csv::Reader::from_path(&args.records)
        .with_context(|| format!("reading {}", args.records.display()))?;
    let mut records = Vec::new();
    let mut names = Vec::new();
    for (line, rec) in reader.deserialize::<RecordLine>().enumerate() {
        let rec = rec.with_context(|| format!("record {}", line + 1))?;
        names.push(
            rec.run
                .unwrap_or_else(|| format!("{}#{}", args.records.display(), line + 1)),
        );
        records.push(StratumRecord {
            n: rec.n,
            s: rec.s,
            value: rec.value,
        });
    }
    let strata = stratified_pearson(&records, &args.bounds.0)?;
    let mut rows = Vec::new();
    eprintln!(
        "{:<22} {:>4} {:>8} {:>8} {:>20}",
        "stratum", "n", "r", "p", "95% CI"
    );
    for stratum in strata {
        let inside = |n: f64| {
            stratum.lower.is_none_or(|lo| n >= lo) && stratum.upper.is_none_or(|hi| n < hi)
        };
        let runs: Vec<String> = records
            .iter()
            .zip(&names)
            .filter(|(r, _)| inside(r.n))
            .map(|(_, name)| name.clone())
            .collect();
        let fmt_edge = |e: Option<f64>, open: &str| e.map_or(open.to_string(), |v| v.to_string());
        let res = &stratum.result;
        eprintln!(
            "{:<22} {:>4} {:>8.3} {:>8.3} {:>20}",
            format!(
                "[{}, {})",
                fmt_edge(stratum.lower, "-inf"),
                fmt_edge(stratum.upper, "inf")
            ),
            res.n,
            res.r,
            res.p,
            format!("[{:.3}, {:.3}]", res.ci95[0], res.ci95[1])
        );
        rows.push(ReportRow::Pearson(PearsonRow {
            label: "correlate".into(),
            station: args.station.clone(),
            measure: args.measure,
            runs,
            stratum,
        }));
    }
    let hash = config_hash(&serde_json::json!({
        "command": "correlate",
        "records": args.records.display().to_string(),
        "records_sha256": sha256_file(&args.records)?,
        "bounds": args.bounds.0,
        "measure": args.measure,
        "station": args.station,
    }))?;
    emit(&Report::new(hash, rows), args.out.as_deref())
}

fn summarise(report: &Report) {
    for row in &report.rows {
        match row {
            ReportRow::Frequency(f) => println!(
                "{}: mean frequency {:.5} ± {:.5} over {} strings of N={}",
                f.label, f.mean_frequency, f.std_frequency, f.strings, f.n
            ),
            ReportRow::Bell(b) => println!(
                "{}: N={} S={:.4} K=[{:.4} {:.4} {:.4}]{}",
                b.filename,
                b.n,
                b.s,
                b.k[0],
                b.k[1],
                b.k[2],
                if b.low_n_outlier { " low-N" } else { "" }
            ),
            ReportRow::Welch(w) => {
                println!(
                    "{} {}: t={:.4} df={:.1} p={:.4}",
                    w.label, w.measure, w.t, w.df, w.p
                )
            }
            ReportRow::Pearson(p) => println!(
                "{} {} {}: n={} r={:.3} p={:.3}",
                p.label,
                p.station,
                p.measure,
                p.stratum.result.n,
                p.stratum.result.r,
                p.stratum.result.p
            ),
            ReportRow::Advantage(a) => println!(
                "advantage {} vs {} on {}: {:.3} (95% CI [{:.3}, {:.3}])",
                a.source_1.name(),
                a.source_2.name(),
                a.distinguisher.measure,
                a.adv,
                a.ci[0],
                a.ci[1]
            ),
            ReportRow::Measure(_) => {}
        }
    }
}

fn run_config(config: &PipelineConfig, out_dir: &Path) -> Result<()> {
    let out = run_pipeline(config, out_dir)?;
    summarise(&out.report);
    println!("wrote {}", out.json_path.display());
    for path in &out.csv_paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn nogo(args: NogoArgs) -> Result<()> {
    let seed = match args.seed {
        Some(s) => s,
        None => Seed::from_os()?,
    };
    let uniform = match args.uniform_seed {
        Some(seed) => SourceKind::Chacha20 { seed },
        None => SourceKind::OsEntropy,
    };
    let config = PipelineConfig {
        name: "nogo-demo".into(),
        seed,
        tasks: vec![Task::NogoDemo {
            uniform,
            strings: args.strings,
            trials: args.trials,
            pilot: args.pilot,
            length: args.length,
        }],
    };
    run_config(&config, &args.out_dir)
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => PipelineConfig::from_json(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )?,
        (None, Some(name)) => preset(name, None)?,
        (None, None) => bail!("either --config or --preset is required"),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    run_config(&config, &args.out_dir)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(a) => gen(a),
        Command::Measure(a) => measure(a),
        Command::Bell(a) => bell(a),
        Command::Compare(a) => compare(a),
        Command::Correlate(a) => correlate(a),
        Command::NogoDemo(a) => nogo(a),
        Command::Pipeline(a) => pipeline(a),
    }
}

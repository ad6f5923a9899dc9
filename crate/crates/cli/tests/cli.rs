use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SEED: &str = "0101010101010101010101010101010101010101010101010101010101010101";

fn lzbell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lzbell"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lzbell(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn gen_measure_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (m, c) = (dir.path().join("m"), dir.path().join("c"));
    ok(&[
        "gen",
        "--kind",
        "mimic2byte",
        "--p",
        "0.4851",
        "--seed",
        SEED,
        "--count",
        "5",
        "--out-dir",
        p(&m),
    ]);
    ok(&[
        "gen",
        "--kind",
        "chacha20",
        "--seed",
        SEED,
        "--count",
        "5",
        "--format",
        "packed",
        "--out-dir",
        p(&c),
    ]);

    let manifest = json(&m.join("manifest.json"));
    assert_eq!(manifest.as_array().unwrap().len(), 5);
    assert_eq!(manifest[0]["spec"]["kind"], "mimic_2byte");

    let mut files: Vec<String> = fs::read_dir(&m)
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .filter(|f| f.ends_with(".txt"))
        .collect();
    files.sort();
    let mut args = vec!["measure", "--out"];
    let mreport = dir.path().join("m.json");
    args.push(p(&mreport));
    args.extend(files.iter().map(String::as_str));
    ok(&args);

    let report = json(&mreport);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(row["type"], "measure");
        assert_eq!(row["provenance"]["origin"], "file");
        assert_eq!(row["provenance"]["sha256"].as_str().unwrap().len(), 64);
        assert_eq!(row["meta"]["n"], 20000);
    }

    let packed: Vec<String> = (0..5)
        .map(|i| c.join(format!("chacha20_{i:04}.bin")).display().to_string())
        .collect();
    let creport = dir.path().join("c.json");
    let mut args = vec!["measure", "--format", "packed", "--out", p(&creport)];
    args.extend(packed.iter().map(String::as_str));
    ok(&args);

    let welch = dir.path().join("w.json");
    let table = ok(&["compare", p(&mreport), p(&creport), "--out", p(&welch)]);
    assert!(table.contains("kappa"));
    let rows = json(&welch)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["inputs"][1]["origin"], "file");
}

#[test]
fn generation_is_reproducible_from_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "gen",
            "--kind",
            "mimic-fraction",
            "--p",
            "0.3",
            "--m",
            "8",
            "--length",
            "4096",
            "--seed",
            SEED,
            "--out-dir",
            p(d),
        ]);
    }
    let name = "mimic_fraction_0000.txt";
    assert_eq!(
        fs::read(a.join(name)).unwrap(),
        fs::read(b.join(name)).unwrap()
    );
}

#[test]
fn bell_singlet_and_lhv_runs() {
    let dir = tempfile::tempdir().unwrap();
    let ev = dir.path().join("ev");
    ok(&[
        "gen",
        "--kind",
        "bell-quantum",
        "--length",
        "40000",
        "--seed",
        SEED,
        "--jitter-ns",
        "1",
        "--out-dir",
        p(&ev),
    ]);
    let out = dir.path().join("out");
    let text = ok(&[
        "bell",
        "--alice",
        p(&ev.join("alice.csv")),
        "--bob",
        p(&ev.join("bob.csv")),
        "--name",
        "singlet",
        "--out-dir",
        p(&out),
    ]);
    assert!(text.contains("singlet"));
    let report = json(&out.join("report.json"));
    let row = &report["rows"][0];
    assert_eq!(row["type"], "bell");
    let s = row["s"].as_f64().unwrap();
    assert!((s - 2.828).abs() < 0.06, "S = {s}");
    assert_eq!(row["events_sha256"].as_str().unwrap().len(), 64);
    for station in ["alice", "bob", "mixed"] {
        assert!(out.join(format!("{station}.txt")).exists());
    }
    let n = row["n"].as_u64().unwrap() as usize;
    assert_eq!(
        fs::read_to_string(out.join("mixed.txt")).unwrap().len(),
        2 * n
    );

    let lhv = dir.path().join("lhv");
    ok(&[
        "gen",
        "--kind",
        "bell-lhv",
        "--strategy",
        "det:0110",
        "--length",
        "5000",
        "--seed",
        SEED,
        "--out-dir",
        p(&lhv),
    ]);
    let lout = dir.path().join("lout");
    ok(&[
        "bell",
        "--alice",
        p(&lhv.join("alice.csv")),
        "--bob",
        p(&lhv.join("bob.csv")),
        "--out-dir",
        p(&lout),
    ]);
    let s = json(&lout.join("report.json"))["rows"][0]["s"]
        .as_f64()
        .unwrap();
    assert!(s <= 2.0 + 1e-12);
    assert_eq!(
        json(&lout.join("report.json"))["rows"][0]["low_n_outlier"],
        false
    );
}

#[test]
fn correlate_strata() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("records.csv");
    let mut text = String::from("run,n,s,value\n");
    for i in 0..11 {
        let n = 5_000 + 5_000 * i;
        text += &format!(
            "r{i},{n},{},{}\n",
            2.0 + 0.1 * i as f64,
            1.5 - 0.01 * (i * i) as f64
        );
    }
    fs::write(&csv, text).unwrap();
    let out = dir.path().join("corr.json");
    ok(&[
        "correlate",
        p(&csv),
        "--bounds",
        "20000,40000",
        "--measure",
        "kappa",
        "--out",
        p(&out),
    ]);
    let rows = json(&out)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["result"]["n"], 3);
    assert_eq!(rows[0]["runs"], serde_json::json!(["r0", "r1", "r2"]));
    assert_eq!(rows[0]["measure"], "kappa");

    let single = ok(&["correlate", p(&csv), "--bounds", "none"]);
    let report: serde_json::Value = serde_json::from_str(&single).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 1);
    assert_eq!(report["rows"][0]["result"]["n"], 11);

    let failed = lzbell(&["correlate", p(&csv), "--bounds", "100000"]);
    assert!(!failed.status.success());
}

#[test]
fn pipeline_preset_is_deterministic_with_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "pipeline",
            "--preset",
            "coin-toss",
            "--seed",
            SEED,
            "--out-dir",
            p(d),
        ]);
    }
    let ja = fs::read(a.join("report.json")).unwrap();
    assert_eq!(ja, fs::read(b.join("report.json")).unwrap());
    assert!(a.join("frequency.csv").exists());

    // the saved config reproduces the run
    let c = dir.path().join("c");
    ok(&[
        "pipeline",
        "--config",
        p(&a.join("config.json")),
        "--out-dir",
        p(&c),
    ]);
    assert_eq!(ja, fs::read(c.join("report.json")).unwrap());
}

#[test]
fn nogo_demo_with_seeded_uniform_side() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&[
        "nogo-demo",
        "--seed",
        SEED,
        "--uniform-seed",
        &"02".repeat(32),
        "--strings",
        "30",
        "--trials",
        "40",
        "--pilot",
        "20",
        "--length",
        "4096",
        "--out-dir",
        p(dir.path()),
    ]);
    assert_eq!(
        text.lines().filter(|l| l.starts_with("advantage")).count(),
        4
    );
    let rows = json(&dir.path().join("report.json"))["rows"]
        .as_array()
        .unwrap()
        .clone();
    assert_eq!(rows.iter().filter(|r| r["type"] == "advantage").count(), 4);
    assert_eq!(rows.iter().filter(|r| r["type"] == "welch").count(), 3);
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0102").unwrap();
    let out = lzbell(&["measure", p(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.txt"));

    assert!(!lzbell(&[
        "gen",
        "--kind",
        "mimic2byte",
        "--p",
        "1.5",
        "--out-dir",
        p(dir.path())
    ])
    .status
    .success());
    assert!(!lzbell(&[
        "gen",
        "--kind",
        "chacha20",
        "--seed",
        "abc",
        "--out-dir",
        p(dir.path())
    ])
    .status
    .success());
    assert!(!lzbell(&[
        "pipeline",
        "--preset",
        "unknown",
        "--out-dir",
        p(dir.path())
    ])
    .status
    .success());
}

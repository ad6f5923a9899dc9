//! Two-station Bell-test analysis: event ingestion, coincidence matching,
//! bit-string extraction, the CHSH value and outcome entropies.

use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitString, BitsError};
use crate::stats::{shannon_entropy, StatsError};

/// Runs with fewer coincidences than this are flagged as outliers.
pub const DEFAULT_MIN_COINCIDENCES: usize = 2000;

#[derive(Debug, Error)]
pub enum BellError {
    #[error("{station} stream is not sorted by time at index {index}")]
    Unsorted { station: &'static str, index: usize },
    #[error("coincidence window must be positive, got {0} ns")]
    Window(i64),
    #[error("no coincidences to analyse")]
    NoPairs,
    #[error("no coincidences with settings (x, y) = ({x}, {y})")]
    MissingSetting { x: u8, y: u8 },
    #[error("event {index}: {field} must be 0 or 1, got {value}")]
    InvalidEvent {
        index: usize,
        field: &'static str,
        value: u8,
    },
    #[error("event CSV must have header time_ns,setting,outcome, got {0:?}")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// One detection: time tag, measurement setting and outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time_ns: i64,
    pub setting: u8,
    pub outcome: u8,
}

impl EventRecord {
    pub fn new(time_ns: i64, setting: u8, outcome: u8) -> Self {
        Self {
            time_ns,
            setting,
            outcome,
        }
    }
}

const CSV_HEADER: [&str; 3] = ["time_ns", "setting", "outcome"];

pub fn read_events_from<R: io::Read>(reader: R) -> Result<Vec<EventRecord>, BellError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?;
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(BellError::Header(
            header.iter().collect::<Vec<_>>().join(","),
        ));
    }
    let mut events = Vec::new();
    for (index, row) in rdr.deserialize::<EventRecord>().enumerate() {
        let e = row?;
        for (field, value) in [("setting", e.setting), ("outcome", e.outcome)] {
            if value > 1 {
                return Err(BellError::InvalidEvent {
                    index,
                    field,
                    value,
                });
            }
        }
        events.push(e);
    }
    Ok(events)
}

/// Reads a station CSV (`time_ns,setting,outcome`).
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<EventRecord>, BellError> {
    read_events_from(std::fs::File::open(path)?)
}

pub fn write_events_to<W: io::Write>(writer: W, events: &[EventRecord]) -> Result<(), BellError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    for e in events {
        wtr.write_record(&[
            e.time_ns.to_string(),
            e.setting.to_string(),
            e.outcome.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_events(path: impl AsRef<Path>, events: &[EventRecord]) -> Result<(), BellError> {
    write_events_to(std::fs::File::create(path)?, events)
}

/// A matched Alice/Bob detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidencePair {
    pub a: u8,
    pub b: u8,
    pub x: u8,
    pub y: u8,
    pub t_a: i64,
    pub t_b: i64,
}

fn check_sorted(events: &[EventRecord], station: &'static str) -> Result<(), BellError> {
    match events.windows(2).position(|w| w[1].time_ns < w[0].time_ns) {
        Some(i) => Err(BellError::Unsorted {
            station,
            index: i + 1,
        }),
        None => Ok(()),
    }
}

/// Pairs events with `|t_A - t_B - offset| <= window`, each event used at most once.
///
/// Candidate pairs are accepted greedily from the smallest time difference
/// up. Equal differences go to the pair that happened earlier, so an A event
/// equidistant from two B events takes the earlier one. Because the ordering
/// only depends on the pair, swapping the stations (and negating the offset)
/// gives the same pairs. The result is ordered by `t_A`.
pub fn match_coincidences(
    a: &[EventRecord],
    b: &[EventRecord],
    window_ns: i64,
    offset_ns: i64,
) -> Result<Vec<CoincidencePair>, BellError> {
    if window_ns <= 0 {
        return Err(BellError::Window(window_ns));
    }
    check_sorted(a, "A")?;
    check_sorted(b, "B")?;

    // (|d|, t_A + t_B, i, j) with d = t_A - t_B - offset
    let mut candidates: Vec<(i64, i128, usize, usize)> = Vec::with_capacity(a.len().min(b.len()));
    let mut lo = 0usize;
    for (i, ea) in a.iter().enumerate() {
        let target = ea.time_ns - offset_ns;
        while lo < b.len() && b[lo].time_ns < target - window_ns {
            lo += 1;
        }
        for (j, eb) in b.iter().enumerate().skip(lo) {
            if eb.time_ns > target + window_ns {
                break;
            }
            let d = (target - eb.time_ns).abs();
            candidates.push((d, i128::from(ea.time_ns) + i128::from(eb.time_ns), i, j));
        }
    }
    candidates.sort_unstable();

    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut chosen = Vec::new();
    for (_, _, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            chosen.push((i, j));
        }
    }
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|(i, j)| CoincidencePair {
            a: a[i].outcome,
            b: b[j].outcome,
            x: a[i].setting,
            y: b[j].setting,
            t_a: a[i].time_ns,
            t_b: b[j].time_ns,
        })
        .collect())
}

/// Alice's outcomes, Bob's outcomes, and the two interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractedStrings {
    pub alice: BitString,
    pub bob: BitString,
    pub mixed: BitString,
}

pub fn extract_strings(pairs: &[CoincidencePair]) -> Result<ExtractedStrings, BellError> {
    if pairs.is_empty() {
        return Err(BellError::NoPairs);
    }
    let alice = BitString::from_bits(pairs.iter().map(|p| p.a).collect())?;
    let bob = BitString::from_bits(pairs.iter().map(|p| p.b).collect())?;
    let mixed = BitString::interleave(&alice, &bob)?;
    Ok(ExtractedStrings { alice, bob, mixed })
}

/// Per-setting tallies: `cells[2x + y][2a + b]`.
fn tally(pairs: &[CoincidencePair]) -> Result<[[u64; 4]; 4], BellError> {
    if pairs.is_empty() {
        return Err(BellError::NoPairs);
    }
    let mut cells = [[0u64; 4]; 4];
    for p in pairs {
        cells[usize::from(2 * p.x + p.y)][usize::from(2 * p.a + p.b)] += 1;
    }
    for (k, cell) in cells.iter().enumerate() {
        if cell.iter().sum::<u64>() == 0 {
            return Err(BellError::MissingSetting {
                x: (k / 2) as u8,
                y: (k % 2) as u8,
            });
        }
    }
    Ok(cells)
}

/// Correlation `E_xy = P(A=B|xy) - P(A≠B|xy)` for each setting pair, indexed by `2x + y`.
pub fn correlations(pairs: &[CoincidencePair]) -> Result<[f64; 4], BellError> {
    let cells = tally(pairs)?;
    Ok(cells.map(|c| {
        let total = c.iter().sum::<u64>() as f64;
        ((c[0] + c[3]) as f64 - (c[1] + c[2]) as f64) / total
    }))
}

fn chsh_from(e: &[f64; 4]) -> f64 {
    (e[0] + e[1] + e[2] - e[3]).abs()
}

/// `S = |Σ_{x,y} (-1)^{xy} [P(A=B|xy) - P(A≠B|xy)]|`.
pub fn chsh_s(pairs: &[CoincidencePair]) -> Result<f64, BellError> {
    Ok(chsh_from(&correlations(pairs)?))
}

/// Conditional outcome statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellSummary {
    pub n: usize,
    pub s: f64,
    /// `E_xy` indexed by `2x + y`.
    pub correlations: [f64; 4],
    /// `p_a_given_x[x][a]`
    pub p_a_given_x: [[f64; 2]; 2],
    /// `p_b_given_y[y][b]`
    pub p_b_given_y: [[f64; 2]; 2],
    /// `p_ab_given_xy[2x + y][2a + b]`
    pub p_ab_given_xy: [[f64; 4]; 4],
    pub h_a_given_x: [f64; 2],
    pub h_b_given_y: [f64; 2],
    pub h_ab_given_xy: [f64; 4],
    /// N fell below the configured coincidence floor.
    pub low_n_outlier: bool,
}

fn normalise<const K: usize>(counts: [u64; K]) -> [f64; K] {
    let total = counts.iter().sum::<u64>() as f64;
    counts.map(|c| c as f64 / total)
}

pub fn bell_summary(
    pairs: &[CoincidencePair],
    min_coincidences: usize,
) -> Result<BellSummary, BellError> {
    let cells = tally(pairs)?;
    let mut a_counts = [[0u64; 2]; 2];
    let mut b_counts = [[0u64; 2]; 2];
    for (k, cell) in cells.iter().enumerate() {
        let (x, y) = (k / 2, k % 2);
        for (o, &count) in cell.iter().enumerate() {
            a_counts[x][o / 2] += count;
            b_counts[y][o % 2] += count;
        }
    }
    let p_a_given_x = a_counts.map(normalise);
    let p_b_given_y = b_counts.map(normalise);
    let p_ab_given_xy = cells.map(normalise);
    let h = |p: &[f64]| shannon_entropy(p);
    let correlations = correlations(pairs)?;
    Ok(BellSummary {
        n: pairs.len(),
        s: chsh_from(&correlations),
        correlations,
        h_a_given_x: [h(&p_a_given_x[0])?, h(&p_a_given_x[1])?],
        h_b_given_y: [h(&p_b_given_y[0])?, h(&p_b_given_y[1])?],
        h_ab_given_xy: [
            h(&p_ab_given_xy[0])?,
            h(&p_ab_given_xy[1])?,
            h(&p_ab_given_xy[2])?,
            h(&p_ab_given_xy[3])?,
        ],
        p_a_given_x,
        p_b_given_y,
        p_ab_given_xy,
        low_n_outlier: pairs.len() < min_coincidences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(times: &[i64]) -> Vec<EventRecord> {
        times.iter().map(|&t| EventRecord::new(t, 0, 0)).collect()
    }

    fn pair(x: u8, y: u8, a: u8, b: u8) -> CoincidencePair {
        CoincidencePair {
            a,
            b,
            x,
            y,
            t_a: 0,
            t_b: 0,
        }
    }

    #[test]
    fn matching_examples() {
        let p = match_coincidences(&stream(&[100, 200, 300]), &stream(&[105, 400]), 10, 0).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!((p[0].t_a, p[0].t_b), (100, 105));

        let p = match_coincidences(&stream(&[100]), &stream(&[95, 104]), 10, 0).unwrap();
        assert_eq!(p[0].t_b, 104);

        assert!(match_coincidences(&stream(&[1, 2]), &[], 10, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn equidistant_tie_takes_earlier() {
        let p = match_coincidences(&stream(&[100]), &stream(&[95, 105]), 10, 0).unwrap();
        assert_eq!(p[0].t_b, 95);
    }

    #[test]
    fn offset_shifts_window() {
        let p = match_coincidences(&stream(&[100]), &stream(&[150, 180]), 5, -80).unwrap();
        assert_eq!(p[0].t_b, 180);
        assert!(match_coincidences(&stream(&[100]), &stream(&[150]), 5, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn matching_errors() {
        assert!(matches!(
            match_coincidences(&stream(&[2, 1]), &stream(&[1]), 5, 0),
            Err(BellError::Unsorted {
                station: "A",
                index: 1
            })
        ));
        assert!(matches!(
            match_coincidences(&stream(&[1]), &stream(&[1, 3, 2]), 5, 0),
            Err(BellError::Unsorted {
                station: "B",
                index: 2
            })
        ));
        assert!(matches!(
            match_coincidences(&stream(&[1]), &stream(&[1]), 0, 0),
            Err(BellError::Window(0))
        ));
    }

    #[test]
    fn extraction() {
        let s = extract_strings(&[pair(0, 0, 0, 1), pair(0, 0, 1, 1)]).unwrap();
        assert_eq!(s.alice.to_ascii(), "01");
        assert_eq!(s.bob.to_ascii(), "11");
        assert_eq!(s.mixed.to_ascii(), "0111");
        assert_eq!(extract_strings(&[pair(1, 1, 1, 0)]).unwrap().mixed.len(), 2);
        assert!(matches!(extract_strings(&[]), Err(BellError::NoPairs)));
    }

    #[test]
    fn chsh_perfect_agreement_is_two() {
        let pairs: Vec<_> = (0..4u8)
            .flat_map(|k| [pair(k / 2, k % 2, 0, 0), pair(k / 2, k % 2, 1, 1)])
            .collect();
        assert_eq!(chsh_s(&pairs).unwrap(), 2.0);
    }

    #[test]
    fn chsh_missing_cell() {
        let pairs = [pair(0, 0, 0, 0), pair(0, 1, 0, 0), pair(1, 0, 0, 0)];
        assert!(matches!(
            chsh_s(&pairs),
            Err(BellError::MissingSetting { x: 1, y: 1 })
        ));
    }

    #[test]
    fn summary_entropies() {
        // every (x, y) cell holds all four outcomes once: uniform everywhere
        let pairs: Vec<_> = (0..16u8)
            .map(|k| pair(k / 8, (k / 4) % 2, (k / 2) % 2, k % 2))
            .collect();
        let s = bell_summary(&pairs, DEFAULT_MIN_COINCIDENCES).unwrap();
        assert_eq!(s.h_a_given_x, [1.0, 1.0]);
        assert_eq!(s.h_b_given_y, [1.0, 1.0]);
        assert_eq!(s.h_ab_given_xy, [2.0; 4]);
        assert_eq!(s.s, 0.0);
        assert!(s.low_n_outlier);
        assert!(!bell_summary(&pairs, 16).unwrap().low_n_outlier);
        for row in s.p_ab_given_xy {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let events = vec![EventRecord::new(5, 0, 1), EventRecord::new(-3, 1, 0)];
        let mut buf = Vec::new();
        write_events_to(&mut buf, &events).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("time_ns,setting,outcome\n"));
        assert_eq!(read_events_from(&buf[..]).unwrap(), events);

        let bad = "time_ns,setting,outcome\n1,2,0\n";
        assert!(matches!(
            read_events_from(bad.as_bytes()),
            Err(BellError::InvalidEvent {
                index: 0,
                field: "setting",
                value: 2
            })
        ));
        assert!(matches!(
            read_events_from("t,s,o\n1,0,0\n".as_bytes()),
            Err(BellError::Header(_))
        ));
    }
}

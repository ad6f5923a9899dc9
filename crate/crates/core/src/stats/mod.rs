//! Entropy, two-sample tests, correlation, box statistics and sample sizes.

pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use special::{binary_entropy, normal_quantile, student_t_cdf, student_t_two_sided};

/// `z_{0.975}` as used for the 95% Fisher-z correlation intervals.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("probability vector has a negative entry at index {0}")]
    NegativeProbability(usize),
    #[error("probability vector sums to {0}, not 1")]
    NotNormalised(f64),
    #[error("sample too small: need at least {need}, got {got}")]
    TooSmall { need: usize, got: usize },
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("sample {0} is constant")]
    ConstantSample(&'static str),
    #[error("samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("parameter {name} = {value} out of range")]
    Parameter { name: &'static str, value: f64 },
    #[error("stratum [{lower:?}, {upper:?}) has {n} records; at least 3 are needed")]
    Stratum {
        lower: Option<f64>,
        upper: Option<f64>,
        n: usize,
    },
    #[error("target half-width {0} is unreachable")]
    Unreachable(f64),
}

/// `-Σ p log2 p` with `0 log 0 = 0`.
pub fn shannon_entropy(dist: &[f64]) -> Result<f64, StatsError> {
    if let Some(i) = dist.iter().position(|&p| p < 0.0 || p.is_nan()) {
        return Err(StatsError::NegativeProbability(i));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(StatsError::NotNormalised(total));
    }
    Ok(dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0))
}

fn check_finite(xs: &[f64]) -> Result<(), StatsError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

/// Welch's unequal-variance t-test.
pub fn welch_t(xs: &[f64], ys: &[f64]) -> Result<WelchResult, StatsError> {
    for s in [xs, ys] {
        if s.len() < 2 {
            return Err(StatsError::TooSmall {
                need: 2,
                got: s.len(),
            });
        }
        check_finite(s)?;
    }
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let v1 = variance(xs) / n1;
    let v2 = variance(ys) / n2;
    if v1 == 0.0 && v2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let se2 = v1 + v2;
    let t = (mean(xs) - mean(ys)) / se2.sqrt();
    let df = se2 * se2 / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
    Ok(WelchResult {
        t,
        df,
        p: student_t_two_sided(t, df),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PearsonResult {
    pub r: f64,
    /// Two-sided p-value from `t = r sqrt(n-2) / sqrt(1-r^2)`, `n - 2` df.
    pub p: f64,
    /// Fisher-z 95% interval; `[-1, 1]` when `n < 4`.
    pub ci95: [f64; 2],
    pub n: usize,
    /// False when the interval is degenerate (`n < 4` or `|r| = 1`).
    pub ci_defined: bool,
}

impl PearsonResult {
    /// p-value and interval for a given coefficient and sample size (`n >= 3`).
    pub fn from_r(r: f64, n: usize) -> Result<Self, StatsError> {
        if n < 3 {
            return Err(StatsError::TooSmall { need: 3, got: n });
        }
        if !(-1.0..=1.0).contains(&r) {
            return Err(StatsError::Parameter {
                name: "r",
                value: r,
            });
        }
        if r.abs() == 1.0 {
            return Ok(Self {
                r,
                p: 0.0,
                ci95: [r, r],
                n,
                ci_defined: false,
            });
        }
        let df = (n - 2) as f64;
        let t = r * df.sqrt() / (1.0 - r * r).sqrt();
        let p = student_t_two_sided(t, df);
        let (ci95, ci_defined) = if n >= 4 {
            let z = r.atanh();
            let half = Z95 / ((n - 3) as f64).sqrt();
            ([(z - half).tanh(), (z + half).tanh()], true)
        } else {
            ([-1.0, 1.0], false)
        };
        Ok(Self {
            r,
            p,
            ci95,
            n,
            ci_defined,
        })
    }
}

/// Sample correlation coefficient with its p-value and Fisher-z interval.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<PearsonResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatsError::TooSmall {
            need: 3,
            got: xs.len(),
        });
    }
    check_finite(xs)?;
    check_finite(ys)?;
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantSample("x"));
    }
    if syy == 0.0 {
        return Err(StatsError::ConstantSample("y"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    PearsonResult::from_r(r, xs.len())
}

/// One input row of a stratified correlation: string length, CHSH value and a measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratumRecord {
    pub n: f64,
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    /// Inclusive lower edge on N (`None` = unbounded).
    pub lower: Option<f64>,
    /// Exclusive upper edge on N (`None` = unbounded).
    pub upper: Option<f64>,
    pub result: PearsonResult,
}

/// Default stratum edges on N.
pub const DEFAULT_STRATUM_EDGES: [f64; 2] = [20_000.0, 40_000.0];

/// Splits records by N at `edges` (`[lo, hi)` intervals) and correlates S with the
/// measure inside each stratum.
pub fn stratified_pearson(
    records: &[StratumRecord],
    edges: &[f64],
) -> Result<Vec<StratumResult>, StatsError> {
    let mut edges = edges.to_vec();
    edges.sort_by(f64::total_cmp);
    let bounds: Vec<(Option<f64>, Option<f64>)> = (0..=edges.len())
        .map(|k| (k.checked_sub(1).map(|i| edges[i]), edges.get(k).copied()))
        .collect();
    bounds
        .into_iter()
        .map(|(lower, upper)| {
            let inside: Vec<&StratumRecord> = records
                .iter()
                .filter(|r| lower.is_none_or(|lo| r.n >= lo) && upper.is_none_or(|hi| r.n < hi))
                .collect();
            if inside.len() < 3 {
                return Err(StatsError::Stratum {
                    lower,
                    upper,
                    n: inside.len(),
                });
            }
            let s: Vec<f64> = inside.iter().map(|r| r.s).collect();
            let v: Vec<f64> = inside.iter().map(|r| r.value).collect();
            Ok(StratumResult {
                lower,
                upper,
                result: pearson(&s, &v)?,
            })
        })
        .collect()
}

fn check_open_unit(name: &'static str, value: f64) -> Result<(), StatsError> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(StatsError::Parameter { name, value })
    }
}

/// Sample size to detect correlation `r` with a two-sided test at `alpha`
/// and the given power: `ceil(((z_{1-α/2} + z_power) / atanh r)^2 + 3)`, at least 4.
pub fn sample_size_power(r: f64, alpha: f64, power: f64) -> Result<usize, StatsError> {
    if !(r.abs() > 0.0 && r.abs() < 1.0) {
        return Err(StatsError::Parameter {
            name: "r",
            value: r,
        });
    }
    check_open_unit("alpha", alpha)?;
    check_open_unit("power", power)?;
    let z = normal_quantile(1.0 - alpha / 2.0) + normal_quantile(power);
    let n = (z / r.abs().atanh()).powi(2) + 3.0;
    Ok((n.ceil() as usize).max(4))
}

/// Sample size for a Fisher-z confidence interval of prescribed half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CiSampleSize {
    /// Smallest n whose interval half-width `(hi - lo) / 2` is within target.
    pub exact: usize,
    /// Non-iterative `(z_c (1 - r^2) / halfwidth)^2 + 3`.
    pub approximate: f64,
}

fn fisher_halfwidth(z: f64, zc: f64, n: usize) -> f64 {
    let d = zc / ((n - 3) as f64).sqrt();
    ((z + d).tanh() - (z - d).tanh()) / 2.0
}

pub fn sample_size_ci(r: f64, conf: f64, halfwidth: f64) -> Result<CiSampleSize, StatsError> {
    if r.is_nan() || r.abs() >= 1.0 {
        return Err(StatsError::Parameter {
            name: "r",
            value: r,
        });
    }
    check_open_unit("conf", conf)?;
    if halfwidth.is_nan() || halfwidth <= 0.0 {
        return Err(StatsError::Parameter {
            name: "halfwidth",
            value: halfwidth,
        });
    }
    if halfwidth >= 1.0 {
        return Err(StatsError::Unreachable(halfwidth));
    }
    let zc = normal_quantile(1.0 - (1.0 - conf) / 2.0);
    let z = r.atanh();
    // half-width shrinks monotonically in n: bracket, then bisect
    let mut hi = 4usize;
    while fisher_halfwidth(z, zc, hi) > halfwidth {
        hi *= 2;
    }
    let mut lo = 3usize; // exclusive
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fisher_halfwidth(z, zc, mid) <= halfwidth {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CiSampleSize {
        exact: hi,
        approximate: (zc * (1.0 - r * r) / halfwidth).powi(2) + 3.0,
    })
}

/// Five-number summary with 1.5·IQR whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub iqr: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: Vec<f64>,
}

/// Linear interpolation between order statistics (`h = (n-1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::TooSmall { need: 1, got: 0 });
    }
    check_finite(values)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = |v: &f64| *v >= fence_lo && *v <= fence_hi;
    let whisker_lo = sorted.iter().copied().find(inside).unwrap_or(median);
    let whisker_hi = sorted.iter().rev().copied().find(inside).unwrap_or(median);
    let outliers = sorted.iter().copied().filter(|v| !inside(v)).collect();
    Ok(BoxStats {
        min: sorted[0],
        q1,
        median,
        q3,
        max: sorted[sorted.len() - 1],
        iqr,
        whisker_lo,
        whisker_hi,
        outliers,
    })
}

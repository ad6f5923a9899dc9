//! Synthetic two-station Bell-test event streams.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{check_correlations, ChaCha20Stream, Seed, SourceError};
use crate::bell::EventRecord;

/// Correlations `E_xy` (order `00, 01, 10, 11`) that reach `S = 2√2`.
pub const TSIRELSON_CORRELATIONS: [f64; 4] = [
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
    std::f64::consts::FRAC_1_SQRT_2,
    -std::f64::consts::FRAC_1_SQRT_2,
];

/// Arrival-time model shared by both generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BellTiming {
    /// Mean gap between emitted pairs (Poisson process).
    pub mean_spacing_ns: f64,
    /// Standard deviation of the per-station Gaussian timing jitter.
    pub jitter_ns: f64,
    pub efficiency_a: f64,
    pub efficiency_b: f64,
    /// Constant delay added to every station-B time tag.
    pub delay_b_ns: i64,
}

impl Default for BellTiming {
    fn default() -> Self {
        Self {
            mean_spacing_ns: 10_000.0,
            jitter_ns: 0.0,
            efficiency_a: 1.0,
            efficiency_b: 1.0,
            delay_b_ns: 0,
        }
    }
}

impl BellTiming {
    pub fn validate(&self) -> Result<(), SourceError> {
        if !(self.mean_spacing_ns > 0.0 && self.mean_spacing_ns.is_finite()) {
            return Err(SourceError::Timing(format!(
                "mean_spacing_ns must be positive, got {}",
                self.mean_spacing_ns
            )));
        }
        if !(self.jitter_ns >= 0.0 && self.jitter_ns.is_finite()) {
            return Err(SourceError::Timing(format!(
                "jitter_ns must be non-negative, got {}",
                self.jitter_ns
            )));
        }
        for (name, eff) in [
            ("efficiency_a", self.efficiency_a),
            ("efficiency_b", self.efficiency_b),
        ] {
            if !(0.0..=1.0).contains(&eff) {
                return Err(SourceError::Timing(format!(
                    "{name} must lie in [0, 1], got {eff}"
                )));
            }
        }
        Ok(())
    }
}

/// Local deterministic responses `a(x, λ)`, `b(y, λ)` and a distribution over λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhvStrategy {
    /// `alice[λ][x]`
    pub alice: Vec<[u8; 2]>,
    /// `bob[λ][y]`
    pub bob: Vec<[u8; 2]>,
    /// Unnormalised probabilities of each λ.
    pub weights: Vec<f64>,
}

impl LhvStrategy {
    pub fn deterministic(alice: [u8; 2], bob: [u8; 2]) -> Self {
        Self {
            alice: vec![alice],
            bob: vec![bob],
            weights: vec![1.0],
        }
    }

    /// All 16 deterministic strategies.
    pub fn all_deterministic() -> Vec<Self> {
        let responses = [[0, 0], [0, 1], [1, 0], [1, 1]];
        responses
            .iter()
            .flat_map(|&a| responses.iter().map(move |&b| Self::deterministic(a, b)))
            .collect()
    }

    /// `a = b = λ` with λ a fair coin.
    pub fn shared_coin() -> Self {
        Self {
            alice: vec![[0, 0], [1, 1]],
            bob: vec![[0, 0], [1, 1]],
            weights: vec![1.0, 1.0],
        }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        let k = self.weights.len();
        if k == 0 {
            return Err(SourceError::Strategy("no hidden-variable values".into()));
        }
        if self.alice.len() != k || self.bob.len() != k {
            return Err(SourceError::Strategy(format!(
                "table sizes differ: alice {}, bob {}, weights {k}",
                self.alice.len(),
                self.bob.len()
            )));
        }
        if self.alice.iter().chain(&self.bob).flatten().any(|&o| o > 1) {
            return Err(SourceError::Strategy("outputs must be 0 or 1".into()));
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SourceError::Strategy(
                "weights must be finite and non-negative".into(),
            ));
        }
        if self.weights.iter().sum::<f64>() <= 0.0 {
            return Err(SourceError::Strategy("weights sum to zero".into()));
        }
        Ok(())
    }
}

struct PairEmitter {
    rng: ChaCha20Stream,
    gap: Exp<f64>,
    jitter: Option<Normal<f64>>,
    timing: BellTiming,
    t: f64,
    a: Vec<EventRecord>,
    b: Vec<EventRecord>,
}

impl PairEmitter {
    fn new(seed: &Seed, timing: &BellTiming, n_pairs: usize) -> Result<Self, SourceError> {
        timing.validate()?;
        let gap = Exp::new(1.0 / timing.mean_spacing_ns)
            .map_err(|e| SourceError::Timing(e.to_string()))?;
        let jitter = if timing.jitter_ns > 0.0 {
            Some(
                Normal::new(0.0, timing.jitter_ns)
                    .map_err(|e| SourceError::Timing(e.to_string()))?,
            )
        } else {
            None
        };
        Ok(Self {
            rng: seed.stream(),
            gap,
            jitter,
            timing: timing.clone(),
            t: 0.0,
            a: Vec::with_capacity(n_pairs),
            b: Vec::with_capacity(n_pairs),
        })
    }

    fn jitter(&mut self) -> f64 {
        match &self.jitter {
            Some(normal) => normal.sample(&mut self.rng),
            None => 0.0,
        }
    }

    fn emit(&mut self, x: u8, y: u8, a: u8, b: u8) {
        self.t += self.gap.sample(&mut self.rng);
        let ta = (self.t + self.jitter()).round() as i64;
        let tb = (self.t + self.jitter()).round() as i64 + self.timing.delay_b_ns;
        if self.rng.random_bool(self.timing.efficiency_a) {
            self.a.push(EventRecord::new(ta, x, a));
        }
        if self.rng.random_bool(self.timing.efficiency_b) {
            self.b.push(EventRecord::new(tb, y, b));
        }
    }

    fn finish(mut self) -> (Vec<EventRecord>, Vec<EventRecord>) {
        // stable: equal time tags keep emission order
        self.a.sort_by_key(|e| e.time_ns);
        self.b.sort_by_key(|e| e.time_ns);
        (self.a, self.b)
    }
}

/// Pairs whose outcomes follow `P(a,b|x,y) = (1 + (-1)^(a⊕b) E_xy) / 4` with
/// uniformly random settings. `correlations` is indexed by `2x + y`.
pub fn bell_quantum_events(
    seed: &Seed,
    n_pairs: usize,
    correlations: [f64; 4],
    timing: &BellTiming,
) -> Result<(Vec<EventRecord>, Vec<EventRecord>), SourceError> {
    check_correlations(&correlations)?;
    let mut em = PairEmitter::new(seed, timing, n_pairs)?;
    for _ in 0..n_pairs {
        let x = u8::from(em.rng.random::<bool>());
        let y = u8::from(em.rng.random::<bool>());
        let a = u8::from(em.rng.random::<bool>());
        let agree = em
            .rng
            .random_bool((1.0 + correlations[usize::from(2 * x + y)]) / 2.0);
        let b = if agree { a } else { a ^ 1 };
        em.emit(x, y, a, b);
    }
    Ok(em.finish())
}

/// Pairs produced by a local hidden-variable model: λ is drawn from the
/// strategy's weights, then each station answers deterministically.
pub fn bell_lhv_events(
    seed: &Seed,
    n_pairs: usize,
    strategy: &LhvStrategy,
    timing: &BellTiming,
) -> Result<(Vec<EventRecord>, Vec<EventRecord>), SourceError> {
    strategy.validate()?;
    let lambda =
        WeightedIndex::new(&strategy.weights).map_err(|e| SourceError::Strategy(e.to_string()))?;
    let mut em = PairEmitter::new(seed, timing, n_pairs)?;
    for _ in 0..n_pairs {
        let l = lambda.sample(&mut em.rng);
        let x = u8::from(em.rng.random::<bool>());
        let y = u8::from(em.rng.random::<bool>());
        let a = strategy.alice[l][usize::from(x)];
        let b = strategy.bob[l][usize::from(y)];
        em.emit(x, y, a, b);
    }
    Ok(em.finish())
}

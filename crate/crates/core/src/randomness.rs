//! Arrival models and the memoized, time-indexed input tape.
//!
//! Every coupling-from-the-past variant revisits the same past time indices
//! at each horizon doubling. The tape derives the event at index `j` from a
//! sub-seed `hash(seed, j)`, so an event does not depend on the order in
//! which indices are first touched, and caches it so repeated reads are
//! identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::letter::Letter;

/// Tolerance on `sum(mu) == 1`.
pub const MU_SUM_TOLERANCE: f64 = 1e-12;
/// Discrete patience values closer than this to an integer are rejected.
pub const INTEGER_GUARD: f64 = 1e-9;

/// Patience law of arriving items.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatienceLaw {
    /// Every item has patience `p + ε` for a fixed `0 < ε < 1`.
    Deterministic(u32),
    /// Finite support `(value, probability)` pairs.
    Discrete(Vec<(f64, f64)>),
}

impl PatienceLaw {
    /// Upper bound `m` of the support (`p + ε` is reported as `p + 0.5`).
    pub fn upper_bound(&self) -> f64 {
        match self {
            PatienceLaw::Deterministic(p) => *p as f64 + DEFAULT_EPSILON,
            PatienceLaw::Discrete(s) => s.iter().map(|&(v, _)| v).fold(0.0, f64::max),
        }
    }

    /// `P(P <= 1)`.
    pub fn prob_at_most_one(&self) -> f64 {
        match self {
            PatienceLaw::Deterministic(_) => 0.0,
            PatienceLaw::Discrete(s) => s.iter().filter(|(v, _)| *v <= 1.0).map(|(_, w)| w).sum(),
        }
    }
}

/// The `ε` used whenever a deterministic patience `p + ε` must be turned
/// into a number (only the literal dominating recursion does this).
pub const DEFAULT_EPSILON: f64 = 0.5;

/// Class distribution, patience law and latency probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalModel {
    pub mu: Vec<f64>,
    pub patience: PatienceLaw,
    #[serde(default)]
    pub gamma: f64,
}

impl ArrivalModel {
    pub fn new(mu: Vec<f64>, patience: PatienceLaw, gamma: f64) -> Result<Self> {
        let m = ArrivalModel { mu, patience, gamma };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(n: usize, patience: PatienceLaw, gamma: f64) -> Result<Self> {
        Self::new(vec![1.0 / n as f64; n], patience, gamma)
    }

    /// Number of classes.
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn deterministic_patience(&self) -> Option<u32> {
        match self.patience {
            PatienceLaw::Deterministic(p) => Some(p),
            PatienceLaw::Discrete(_) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.is_empty() {
            return Err(Error::Config("mu is empty".into()));
        }
        if self.mu.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::Config("mu entries must lie in [0, 1]".into()));
        }
        let s: f64 = self.mu.iter().sum();
        if (s - 1.0).abs() > MU_SUM_TOLERANCE {
            return Err(Error::Config(format!("mu sums to {s}, expected 1")));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        match &self.patience {
            PatienceLaw::Deterministic(p) => {
                if *p == 0 {
                    return Err(Error::Config("deterministic patience needs p >= 1".into()));
                }
            }
            PatienceLaw::Discrete(support) => {
                if support.is_empty() {
                    return Err(Error::Config("empty patience support".into()));
                }
                let mut total = 0.0;
                for &(v, w) in support {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::Config(format!("patience value {v} must be positive")));
                    }
                    if (v - v.round()).abs() < INTEGER_GUARD {
                        return Err(Error::Config(format!(
                            "patience value {v} is (nearly) an integer; use deterministic:<p> for p+eps"
                        )));
                    }
                    if !(0.0..=1.0).contains(&w) {
                        return Err(Error::Config(format!("patience probability {w} outside [0, 1]")));
                    }
                    total += w;
                }
                if (total - 1.0).abs() > MU_SUM_TOLERANCE {
                    return Err(Error::Config(format!("patience probabilities sum to {total}")));
                }
            }
        }
        Ok(())
    }
}

/// Patience attached to an input event.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Patience {
    /// Latency slot (patience 0).
    Zero,
    /// Deterministic `p + ε`.
    PlusEpsilon(u32),
    Value(f64),
}

impl Patience {
    /// Numeric value, substituting `eps` for the infinitesimal part.
    pub fn to_f64(self, eps: f64) -> f64 {
        match self {
            Patience::Zero => 0.0,
            Patience::PlusEpsilon(p) => p as f64 + eps,
            Patience::Value(v) => v,
        }
    }
}

/// One input `v_j`: the arrival letter, its patience, and an independent
/// uniform used by randomized matching policies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputEvent {
    pub letter: Letter,
    pub patience: Patience,
    pub draw: f64,
}

impl InputEvent {
    pub fn is_latency(&self) -> bool {
        self.letter.is_latency()
    }
}

/// Draws one event from `model` using `rng`.
pub fn draw_event<R: Rng>(model: &ArrivalModel, rng: &mut R) -> InputEvent {
    let latency = model.gamma > 0.0 && rng.gen::<f64>() < model.gamma;
    let class_u: f64 = rng.gen();
    let patience_u: f64 = rng.gen();
    let draw: f64 = rng.gen();
    if latency {
        return InputEvent {
            letter: Letter::LATENCY,
            patience: Patience::Zero,
            draw,
        };
    }
    let class = pick(model.mu.iter().copied(), class_u) as u32 + 1;
    let patience = match &model.patience {
        PatienceLaw::Deterministic(p) => Patience::PlusEpsilon(*p),
        PatienceLaw::Discrete(s) => Patience::Value(s[pick(s.iter().map(|x| x.1), patience_u)].0),
    };
    InputEvent {
        letter: Letter::class(class),
        patience,
        draw,
    }
}

/// Inverse-CDF pick over unnormalized-safe weights; never returns a
/// zero-weight index.
fn pick(weights: impl Iterator<Item = f64> + Clone, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replication `replication` under master seed `master`.
///
/// Two rounds of SplitMix64 over the pair; a bijection in `replication`
/// for fixed `master`, so distinct replications never share a seed.
pub fn derive_replication_seed(master: u64, replication: u64) -> u64 {
    splitmix64(splitmix64(master) ^ splitmix64(replication.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

const PAST_DOMAIN: u64 = 0x7061_7374; // "past"
const FUTURE_DOMAIN: u64 = 0x6675_7475; // "futu"

fn index_seed(seed: u64, domain: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ domain) ^ index)
}

/// Time-indexed input for negative times `j = -1, -2, ...`.
#[derive(Clone, Debug)]
pub struct InputTape {
    seed: u64,
    model: ArrivalModel,
    // drawn[k] holds the event at time -(k+1)
    drawn: Vec<Option<InputEvent>>,
}

impl InputTape {
    pub fn new(model: ArrivalModel, seed: u64) -> Self {
        InputTape {
            seed,
            model,
            drawn: Vec::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model(&self) -> &ArrivalModel {
        &self.model
    }

    /// The event `v_j` at strictly negative time `j`.
    ///
    /// # Panics
    /// If `j >= 0`: samplers only read the strict past.
    pub fn event_at(&mut self, j: i64) -> InputEvent {
        assert!(j < 0, "input tape read at non-negative time {j}");
        let k = (-j - 1) as usize;
        if k >= self.drawn.len() {
            self.drawn.resize(k + 1, None);
        }
        if let Some(ev) = self.drawn[k] {
            return ev;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(index_seed(self.seed, PAST_DOMAIN, k as u64));
        let ev = draw_event(&self.model, &mut rng);
        self.drawn[k] = Some(ev);
        ev
    }

    /// Non-panicking variant of [`InputTape::event_at`].
    pub fn try_event_at(&mut self, j: i64) -> Result<InputEvent> {
        if j >= 0 {
            return Err(Error::Input(format!("input tape read at non-negative time {j}")));
        }
        Ok(self.event_at(j))
    }

    /// The `k`-th event after time 0 (`k = 0` is the arrival at time 0).
    /// Drawn from a stream disjoint from the past; not cached.
    pub fn future_event(&self, k: u64) -> InputEvent {
        let mut rng = ChaCha8Rng::seed_from_u64(index_seed(self.seed, FUTURE_DOMAIN, k));
        draw_event(&self.model, &mut rng)
    }

    /// Number of distinct past indices drawn so far.
    pub fn depth(&self) -> usize {
        self.drawn.len()
    }
}

/// Sequential event source for forward simulations.
#[derive(Clone, Debug)]
pub struct ForwardStream {
    model: ArrivalModel,
    rng: ChaCha8Rng,
}

impl ForwardStream {
    pub fn new(model: ArrivalModel, seed: u64) -> Self {
        ForwardStream {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_event(&mut self) -> InputEvent {
        draw_event(&self.model, &mut self.rng)
    }
}

//! Perfect sampling for deterministic patience by strongly synchronizing
//! words.
//!
//! A word `w` of length `2p` is strongly synchronizing when every letter of
//! its first half is incompatible with the second-half letters that arrive
//! while it is still waiting: `w_i ⊥ w_j` for `i <= p`, `p < j <= p + i`.
//! Feeding such a word drives every word-profile to `W(0^p, w_{p+1..2p})`,
//! so the sliding window of the last `2p` arrivals controls the chain.

use std::collections::VecDeque;

use crate::engine::{sample_by_control, Control, HorizonConfig, SampleReport};
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::letter::Letter;
use crate::meter::OperationMeter;
use crate::models::{all_word_states, events_from_letters, Policy, WordKernel, WordProfile};
use crate::randomness::{ArrivalModel, InputEvent, InputTape};

/// Default cap on the number of word-profile states enumerated by
/// [`is_synchronizing_bruteforce`].
pub const DEFAULT_STATE_CAP: u128 = 1_000_000;

/// Strongly synchronizing predicate, full `O(p²)` evaluation.
pub fn is_strongly_synchronizing(w: &[Letter], p: usize, g: &CompatibilityGraph) -> Result<bool> {
    if w.len() != 2 * p || p == 0 {
        return Err(Error::Input(format!("word of length {} is not 2p = {}", w.len(), 2 * p)));
    }
    Ok(strongly_synchronizing_metered(w, p, g, &mut OperationMeter::disabled()))
}

fn strongly_synchronizing_metered(w: &[Letter], p: usize, g: &CompatibilityGraph, meter: &mut OperationMeter) -> bool {
    for i in 0..p {
        for j in p..=p + i {
            meter.tick();
            if g.letters_compatible(w[i], w[j]) {
                return false;
            }
        }
    }
    true
}

/// The last `2p` arrivals (fewer while filling up).
///
/// Next to each letter the window keeps `reach`: the largest `d <= p` such
/// that the letter `d` slots earlier is compatible with it (0 if none).
/// A full window is strongly synchronizing iff no second-half letter at
/// index `k` has `reach >= k - p + 1`, i.e. a compatible predecessor in the
/// first half.
#[derive(Clone, Debug)]
pub struct ArrivalWindow {
    p: usize,
    events: VecDeque<InputEvent>,
    reach: VecDeque<usize>,
}

impl ArrivalWindow {
    pub fn new(p: usize) -> Self {
        ArrivalWindow {
            p,
            events: VecDeque::with_capacity(2 * p),
            reach: VecDeque::with_capacity(2 * p),
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.events.len() == 2 * self.p
    }

    pub fn letters(&self) -> Vec<Letter> {
        self.events.iter().map(|e| e.letter).collect()
    }

    pub fn events(&self) -> impl Iterator<Item = &InputEvent> {
        self.events.iter()
    }

    /// Appends while shorter than `2p`, slides otherwise.
    pub fn push(&mut self, ev: InputEvent, g: &CompatibilityGraph, meter: &mut OperationMeter) {
        if self.is_full() {
            self.events.pop_front();
            self.reach.pop_front();
        }
        let idx = self.events.len();
        // letters landing in the first half never need a reach
        let mut reach = 0;
        if idx >= self.p && ev.letter.is_class() {
            for d in (1..=self.p).rev() {
                let prev = self.events[idx - d].letter;
                if prev.is_class() {
                    meter.tick();
                    if g.letters_compatible(prev, ev.letter) {
                        reach = d;
                        break;
                    }
                }
            }
        }
        self.events.push_back(ev);
        self.reach.push_back(reach);
    }

    /// Incremental predicate; only meaningful on a full window.
    pub fn strongly_synchronizing(&self) -> bool {
        self.is_full() && (self.p..2 * self.p).all(|k| self.reach[k] < k - self.p + 1)
    }
}

/// `g̃`: grow to `2p`, then slide.
pub fn window_step(w: &ArrivalWindow, ev: InputEvent, g: &CompatibilityGraph) -> ArrivalWindow {
    let mut next = w.clone();
    next.push(ev, g, &mut OperationMeter::disabled());
    next
}

/// `z(w) = W(0^p, second half of w)`, the common state every word-profile
/// reaches after a strongly synchronizing word. Uses the draws carried by
/// the second-half events.
pub fn endpoint_state(
    window: &[InputEvent],
    p: usize,
    policy: &Policy,
    g: &CompatibilityGraph,
    meter: &mut OperationMeter,
) -> Result<WordProfile> {
    let letters: Vec<Letter> = window.iter().map(|e| e.letter).collect();
    if !is_strongly_synchronizing(&letters, p, g)? {
        return Err(Error::Input("endpoint_state needs a strongly synchronizing word".into()));
    }
    Ok(WordProfile::empty(p).apply_word(&window[p..], policy, g, meter))
}

/// Which predicate evaluation the window control uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanMode {
    /// Per-slide update of each letter's reach.
    Incremental,
    /// Full `O(p²)` predicate on every full window.
    Full,
}

/// Window control over strongly synchronizing words.
#[derive(Clone, Debug)]
pub struct SyncControl<'a> {
    pub p: usize,
    pub policy: &'a Policy,
    pub graph: &'a CompatibilityGraph,
    pub mode: ScanMode,
}

impl Control for SyncControl<'_> {
    type State = ArrivalWindow;
    type Target = WordProfile;

    fn start(&self) -> ArrivalWindow {
        ArrivalWindow::new(self.p)
    }

    fn step(&self, w: &mut ArrivalWindow, ev: &InputEvent, meter: &mut OperationMeter) {
        match self.mode {
            ScanMode::Incremental => w.push(*ev, self.graph, meter),
            ScanMode::Full => w.push(*ev, self.graph, &mut OperationMeter::disabled()),
        }
    }

    fn target(&self, w: &ArrivalWindow, meter: &mut OperationMeter) -> Option<WordProfile> {
        if !w.is_full() {
            return None;
        }
        let hit = match self.mode {
            ScanMode::Incremental => w.strongly_synchronizing(),
            ScanMode::Full => strongly_synchronizing_metered(&w.letters(), self.p, self.graph, meter),
        };
        if !hit {
            return None;
        }
        let second: Vec<InputEvent> = w.events().skip(self.p).copied().collect();
        Some(WordProfile::empty(self.p).apply_word(&second, self.policy, self.graph, meter))
    }
}

/// Perfect sample of the deterministic-patience chain (with or without
/// latency). The default initial horizon is `2p`.
pub fn sample_syncword(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    tape: &mut InputTape,
    cfg: &HorizonConfig,
) -> Result<SampleReport<WordProfile>> {
    sample_syncword_with(model, policy, graph, tape, cfg, ScanMode::Incremental)
}

pub fn sample_syncword_with(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    tape: &mut InputTape,
    cfg: &HorizonConfig,
    mode: ScanMode,
) -> Result<SampleReport<WordProfile>> {
    let p = model
        .deterministic_patience()
        .ok_or_else(|| Error::Config("synchronizing-word sampler needs deterministic patience".into()))?
        as usize;
    if model.n() != graph.n() {
        return Err(Error::Config(format!("mu has {} classes, graph has {}", model.n(), graph.n())));
    }
    let control = SyncControl { p, policy, graph, mode };
    sample_by_control(&WordKernel { policy, graph }, &control, tape, cfg)
}

/// Default horizon schedule for the window sampler.
pub fn default_horizon(p: usize) -> HorizonConfig {
    HorizonConfig::new(2 * p as u64)
}

/// Whether `events` synchronizes every word-profile of `({0} ∪ classes
/// [∪ {-1}])^p`. Latency letters are read as empty slots when comparing.
pub fn is_synchronizing_bruteforce(
    events: &[InputEvent],
    p: usize,
    policy: &Policy,
    g: &CompatibilityGraph,
    latency: bool,
    state_cap: u128,
) -> Result<bool> {
    let alphabet = g.n() as u128 + 1 + latency as u128;
    let size = alphabet.checked_pow(p as u32).unwrap_or(u128::MAX);
    if size > state_cap {
        return Err(Error::StateSpaceTooLarge { size, cap: state_cap });
    }
    let mut meter = OperationMeter::disabled();
    let mut common: Option<WordProfile> = None;
    for x in all_word_states(g.n(), p, latency) {
        let z = x.apply_word(events, policy, g, &mut meter).without_latency();
        match &common {
            None => common = Some(z),
            Some(c) if *c != z => return Ok(false),
            Some(_) => {}
        }
    }
    Ok(true)
}

/// [`is_synchronizing_bruteforce`] for a plain word with a constant draw.
pub fn word_is_synchronizing(w: &[Letter], p: usize, policy: &Policy, g: &CompatibilityGraph, draw: f64) -> Result<bool> {
    let latency = w.iter().any(|l| l.is_latency());
    is_synchronizing_bruteforce(&events_from_letters(w, draw), p, policy, g, latency, DEFAULT_STATE_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::primitive_cftp;
    use crate::letter::parse_word;
    use crate::models::all_words;
    use crate::randomness::{ForwardStream, PatienceLaw};

    fn word(s: &str) -> Vec<Letter> {
        parse_word(s).unwrap()
    }

    #[test]
    fn predicate_examples() {
        let g = CompatibilityGraph::paw();
        assert!(is_strongly_synchronizing(&word("1131"), 2, &g).unwrap());
        assert!(!is_strongly_synchronizing(&word("1121"), 2, &g).unwrap());
        assert!(is_strongly_synchronizing(&word("113"), 2, &g).is_err());
    }

    #[test]
    fn paw_p1_has_eight() {
        let g = CompatibilityGraph::paw();
        let alphabet: Vec<Letter> = (1..=4).map(Letter).collect();
        let count = all_words(&alphabet, 2)
            .iter()
            .filter(|w| is_strongly_synchronizing(w, 1, &g).unwrap())
            .count();
        assert_eq!(count, 8);
    }

    #[test]
    fn window_growth_and_slide() {
        let g = CompatibilityGraph::paw();
        let evs = events_from_letters(&word("12341"), 0.5);
        let mut w = ArrivalWindow::new(2);
        w = window_step(&w, evs[0], &g);
        assert_eq!(w.letters(), word("1"));
        for ev in &evs[1..4] {
            w = window_step(&w, *ev, &g);
        }
        assert_eq!(w.letters(), word("1234"));
        w = window_step(&w, evs[4], &g);
        assert_eq!(w.letters(), word("2341"));
    }

    #[test]
    fn incremental_predicate_matches_full_recompute() {
        for (seed, gamma) in [(1u64, 0.0), (2, 0.3)] {
            for p in 1..=5u32 {
                let g = crate::graph::random_connected_er(5, 0.3, seed + p as u64).unwrap();
                let model = ArrivalModel::uniform(5, PatienceLaw::Deterministic(p), gamma).unwrap();
                let mut stream = ForwardStream::new(model, seed * 100 + p as u64);
                let mut w = ArrivalWindow::new(p as usize);
                let mut m = OperationMeter::disabled();
                for _ in 0..20_000 {
                    w.push(stream.next_event(), &g, &mut m);
                    if w.is_full() {
                        assert_eq!(w.strongly_synchronizing(), is_strongly_synchronizing(&w.letters(), p as usize, &g).unwrap());
                    } else {
                        assert!(!w.strongly_synchronizing());
                    }
                }
            }
        }
    }

    #[test]
    fn endpoint_state_paw_p1() {
        let g = CompatibilityGraph::paw();
        let evs = events_from_letters(&word("13"), 0.5);
        let z = endpoint_state(&evs, 1, &Policy::Fcfm, &g, &mut OperationMeter::disabled()).unwrap();
        assert_eq!(z, WordProfile::parse("3").unwrap());
        let bad = events_from_letters(&word("12"), 0.5);
        assert!(endpoint_state(&bad, 1, &Policy::Fcfm, &g, &mut OperationMeter::disabled()).is_err());
    }

    #[test]
    fn endpoint_state_agrees_with_every_start_paw_p2() {
        let g = CompatibilityGraph::paw();
        let alphabet: Vec<Letter> = (1..=4).map(Letter).collect();
        let states = all_word_states(4, 2, false);
        for pol in [Policy::Fcfm, Policy::Ml, Policy::Priority(vec![2, 4])] {
            for w in all_words(&alphabet, 4) {
                if !is_strongly_synchronizing(&w, 2, &g).unwrap() {
                    continue;
                }
                for draw in [0.1, 0.9] {
                    let evs = events_from_letters(&w, draw);
                    let z = endpoint_state(&evs, 2, &pol, &g, &mut OperationMeter::disabled()).unwrap();
                    for x in &states {
                        assert_eq!(x.apply_word(&evs, &pol, &g, &mut OperationMeter::disabled()), z);
                    }
                }
            }
        }
    }

    #[test]
    fn latency_prefix_is_synchronizing() {
        let g = CompatibilityGraph::paw();
        let w = word("-1-1-1214");
        assert!(is_strongly_synchronizing(&w, 3, &g).unwrap());
        let evs = events_from_letters(&w, 0.5);
        let z = endpoint_state(&evs, 3, &Policy::Fcfm, &g, &mut OperationMeter::disabled()).unwrap();
        assert_eq!(z, WordProfile::empty(3).apply_word(&evs[3..], &Policy::Fcfm, &g, &mut OperationMeter::disabled()));
        assert!(word_is_synchronizing(&w, 3, &Policy::Fcfm, &g, 0.5).unwrap());
    }

    #[test]
    fn k2_two_letter_words() {
        // 1 ⊥ 1 on K2, so "11" drives every state to "1"; "12" lets the
        // second arrival match a stored 1
        let g = CompatibilityGraph::complete(2).unwrap();
        assert!(is_strongly_synchronizing(&word("11"), 1, &g).unwrap());
        assert!(word_is_synchronizing(&word("11"), 1, &Policy::Fcfm, &g, 0.5).unwrap());
        assert!(!is_strongly_synchronizing(&word("12"), 1, &g).unwrap());
        assert!(!word_is_synchronizing(&word("12"), 1, &Policy::Fcfm, &g, 0.5).unwrap());
    }

    #[test]
    fn bruteforce_state_cap() {
        let g = CompatibilityGraph::paw();
        let evs = events_from_letters(&word("11111111"), 0.5);
        assert!(matches!(
            is_synchronizing_bruteforce(&evs, 4, &Policy::Fcfm, &g, false, 100),
            Err(Error::StateSpaceTooLarge { .. })
        ));
    }

    #[test]
    fn syncword_matches_cftp_small() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(2), 0.0).unwrap();
        let states = all_word_states(4, 2, false);
        for seed in 0..100 {
            let mut tape = InputTape::new(model.clone(), seed);
            let a = sample_syncword(&model, &Policy::Fcfm, &g, &mut tape, &default_horizon(2)).unwrap();
            let b = primitive_cftp(&WordKernel { policy: &Policy::Fcfm, graph: &g }, &states, &mut tape, &default_horizon(2)).unwrap();
            assert_eq!(a.sample, b.sample);
            assert!(b.start_time >= a.start_time);
            assert!(a.detection_time - a.start_time >= 4, "detection before the window is full");
        }
    }

    #[test]
    fn scan_modes_agree() {
        let g = crate::graph::random_connected_er(5, 0.25, 3).unwrap();
        let model = ArrivalModel::uniform(5, PatienceLaw::Deterministic(3), 0.0).unwrap();
        for seed in 0..100 {
            let mut tape = InputTape::new(model.clone(), seed);
            let a = sample_syncword_with(&model, &Policy::Ml, &g, &mut tape, &default_horizon(3), ScanMode::Incremental).unwrap();
            let b = sample_syncword_with(&model, &Policy::Ml, &g, &mut tape, &default_horizon(3), ScanMode::Full).unwrap();
            assert_eq!(a.sample, b.sample);
            assert_eq!(a.detection_time, b.detection_time);
        }
    }

    #[test]
    fn rejects_general_patience() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::uniform(4, PatienceLaw::Discrete(vec![(0.5, 1.0)]), 0.0).unwrap();
        let mut tape = InputTape::new(model.clone(), 1);
        assert!(sample_syncword(&model, &Policy::Fcfm, &g, &mut tape, &default_horizon(1)).is_err());
    }
}

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::letter::{parse_word, render_word, Letter};
use crate::meter::OperationMeter;
use crate::models::policy::Policy;
use crate::randomness::InputEvent;

/// State of the deterministic-patience chain: letter `i` (0-based) is the
/// item that arrived `p - i` slots ago, `0` if it was matched, `-1` if that
/// slot had no arrival.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordProfile {
    letters: Vec<Letter>,
}

/// What a single transition did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepOutcome {
    /// Position (0-based, before the shift) of the matched stored item.
    pub matched: Option<usize>,
    /// Class of the head item if it left unmatched (reneged).
    pub lost: Option<u32>,
}

impl WordProfile {
    /// The empty profile `0^p`.
    pub fn empty(p: usize) -> Self {
        WordProfile {
            letters: vec![Letter::EMPTY; p],
        }
    }

    pub fn from_letters(letters: Vec<Letter>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::Input("word-profile must have length p >= 1".into()));
        }
        Ok(WordProfile { letters })
    }

    /// Parses `"134"` or `"-1 3 0"`.
    pub fn parse(s: &str) -> Result<Self> {
        let letters = parse_word(s).ok_or_else(|| Error::Input(format!("bad word `{s}`")))?;
        Self::from_letters(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.iter().all(|l| !l.is_class())
    }

    /// Head letter `w_1`.
    pub fn head(&self) -> Letter {
        self.letters[0]
    }

    /// Same word with latency letters read as empty slots.
    pub fn without_latency(&self) -> WordProfile {
        WordProfile {
            letters: self.letters.iter().map(|l| l.latency_as_empty()).collect(),
        }
    }

    /// One transition on arrival `arrival` (a class or latency).
    pub fn step(
        &mut self,
        arrival: Letter,
        draw: f64,
        policy: &Policy,
        g: &CompatibilityGraph,
        meter: &mut OperationMeter,
    ) -> StepOutcome {
        let mut matched = None;
        if let Some(a) = arrival.as_class() {
            let mut candidates: Vec<(usize, u32)> = Vec::new();
            for (i, l) in self.letters.iter().enumerate() {
                if let Some(c) = l.as_class() {
                    meter.tick();
                    if g.adjacent(c, a) {
                        candidates.push((i, c));
                        if *policy == Policy::Fcfm {
                            break;
                        }
                    }
                }
            }
            if !candidates.is_empty() {
                let k = policy.choose(&candidates, draw, meter);
                let pos = candidates[k].0;
                self.letters[pos] = Letter::EMPTY;
                matched = Some(pos);
            }
        }
        let lost = self.letters[0].as_class();
        self.letters.rotate_left(1);
        let last = self.letters.len() - 1;
        self.letters[last] = if matched.is_some() { Letter::EMPTY } else { arrival };
        StepOutcome { matched, lost }
    }

    /// Functional form of [`WordProfile::step`].
    pub fn stepped(&self, ev: &InputEvent, policy: &Policy, g: &CompatibilityGraph) -> WordProfile {
        let mut next = self.clone();
        next.step(ev.letter, ev.draw, policy, g, &mut OperationMeter::disabled());
        next
    }

    /// `W^Φ(self, events)`: left fold of [`WordProfile::step`].
    pub fn apply_word(
        &self,
        events: &[InputEvent],
        policy: &Policy,
        g: &CompatibilityGraph,
        meter: &mut OperationMeter,
    ) -> WordProfile {
        let mut x = self.clone();
        for ev in events {
            x.step(ev.letter, ev.draw, policy, g, meter);
        }
        x
    }

    /// Letter-by-letter equality, counting one operation per compared pair.
    pub fn metered_eq(&self, other: &WordProfile, meter: &mut OperationMeter) -> bool {
        for (a, b) in self.letters.iter().zip(&other.letters) {
            meter.tick();
            if a != b {
                return false;
            }
        }
        true
    }
}

/// Events with a constant draw, for deterministic policies and tests.
pub fn events_from_letters(letters: &[Letter], draw: f64) -> Vec<InputEvent> {
    use crate::randomness::Patience;
    letters
        .iter()
        .map(|&letter| InputEvent {
            letter,
            patience: if letter.is_latency() { Patience::Zero } else { Patience::PlusEpsilon(0) },
            draw,
        })
        .collect()
}

/// Every word in `({0} ∪ classes [∪ {-1}])^p`.
pub fn all_word_states(n: usize, p: usize, latency: bool) -> Vec<WordProfile> {
    let mut alphabet: Vec<Letter> = Vec::with_capacity(n + 2);
    if latency {
        alphabet.push(Letter::LATENCY);
    }
    alphabet.push(Letter::EMPTY);
    alphabet.extend((1..=n as u32).map(Letter::class));
    all_words(&alphabet, p).into_iter().map(|letters| WordProfile { letters }).collect()
}

/// All words of length `len` over `alphabet`, in lexicographic order.
pub fn all_words(alphabet: &[Letter], len: usize) -> Vec<Vec<Letter>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|w| {
                alphabet.iter().map(move |&l| {
                    let mut v = w.clone();
                    v.push(l);
                    v
                })
            })
            .collect();
    }
    out
}

impl fmt::Display for WordProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_word(&self.letters))
    }
}

impl fmt::Debug for WordProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WordProfile(\"{self}\")")
    }
}

impl Serialize for WordProfile {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> WordProfile {
        WordProfile::parse(s).unwrap()
    }

    fn step(x: &str, a: i32, policy: &Policy, g: &CompatibilityGraph, draw: f64) -> (WordProfile, StepOutcome) {
        let mut x = w(x);
        let out = x.step(Letter(a), draw, policy, g, &mut OperationMeter::disabled());
        (x, out)
    }

    #[test]
    fn fcfm_matches_earliest() {
        let g = CompatibilityGraph::paw();
        let (x, out) = step("134", 2, &Policy::Fcfm, &g, 0.5);
        assert_eq!(x, w("340"));
        assert_eq!(out.matched, Some(0));
        assert_eq!(out.lost, None);
    }

    #[test]
    fn ml_matches_longest_class() {
        let g = CompatibilityGraph::paw();
        assert_eq!(step("433", 2, &Policy::Ml, &g, 0.5).0, w("030"));
        assert_eq!(step("433", 2, &Policy::Fcfm, &g, 0.5).0, w("330"));
    }

    #[test]
    fn empty_buffer_stores_arrival() {
        let g = CompatibilityGraph::paw();
        for a in 1..=4 {
            assert_eq!(step("000", a, &Policy::Ml, &g, 0.1).0.letters()[2], Letter(a));
        }
    }

    #[test]
    fn latency_shifts_in_minus_one() {
        let g = CompatibilityGraph::paw();
        let (x, out) = step("120", -1, &Policy::Fcfm, &g, 0.5);
        assert_eq!(x, w("2 0 -1"));
        assert_eq!(out.lost, Some(1));
    }

    #[test]
    fn head_can_be_matched_before_leaving() {
        let g = CompatibilityGraph::paw();
        let (x, out) = step("300", 4, &Policy::Fcfm, &g, 0.5);
        assert_eq!(x, w("000"));
        assert_eq!(out.lost, None);
    }

    #[test]
    fn paw_p1_word() {
        let g = CompatibilityGraph::paw();
        let evs = events_from_letters(&parse_word("13").unwrap(), 0.5);
        let z = w("0").apply_word(&evs, &Policy::Fcfm, &g, &mut OperationMeter::disabled());
        assert_eq!(z, w("3"));
    }

    #[test]
    fn state_enumeration_sizes() {
        assert_eq!(all_word_states(4, 2, false).len(), 25);
        assert_eq!(all_word_states(4, 3, true).len(), 216);
    }
}

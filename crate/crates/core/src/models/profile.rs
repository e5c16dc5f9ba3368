use std::fmt;

use serde::{Serialize, Serializer};

use crate::graph::CompatibilityGraph;
use crate::meter::OperationMeter;
use crate::models::policy::Policy;
use crate::randomness::{InputEvent, Patience};

/// Stored items `(remaining patience, class)` in arrival order, seen by the
/// next arrival. Empty vector is the empty system.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProfileState {
    items: Vec<(f64, u32)>,
}

impl ProfileState {
    pub fn empty() -> Self {
        ProfileState::default()
    }

    /// Builds a state from raw items. Items must have positive patience.
    pub fn from_items(items: Vec<(f64, u32)>) -> Self {
        debug_assert!(items.iter().all(|&(r, c)| r > 0.0 && c >= 1));
        ProfileState { items }
    }

    pub fn items(&self) -> &[(f64, u32)] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Largest remaining patience, 0 for the empty system.
    pub fn phi(&self) -> f64 {
        self.items.iter().map(|&(r, _)| r).fold(0.0, f64::max)
    }

    /// One transition of the general profile chain with patience values
    /// taken from `ev` (`eps` substitutes for a deterministic `p + ε`).
    ///
    /// A class arrival first matches a compatible stored item chosen by
    /// `policy` (both leave) or is appended; then items with remaining
    /// patience below 1 renege and the others age by one slot. A latency
    /// event only ages the buffer.
    pub fn step(
        &mut self,
        ev: &InputEvent,
        eps: f64,
        policy: &Policy,
        g: &CompatibilityGraph,
        meter: &mut OperationMeter,
    ) {
        if let Some(a) = ev.letter.as_class() {
            let mut candidates: Vec<(usize, u32)> = Vec::new();
            for (i, &(_, c)) in self.items.iter().enumerate() {
                meter.tick();
                if g.adjacent(c, a) {
                    candidates.push((i, c));
                    if *policy == Policy::Fcfm {
                        break;
                    }
                }
            }
            if candidates.is_empty() {
                self.items.push((ev.patience.to_f64(eps), a));
            } else {
                let k = policy.choose(&candidates, ev.draw, meter);
                self.items.remove(candidates[k].0);
            }
        } else {
            debug_assert_eq!(ev.patience, Patience::Zero);
        }
        self.items.retain(|&(r, _)| r >= 1.0);
        for item in &mut self.items {
            item.0 -= 1.0;
        }
        // patience exactly 1 ages to 0 and is gone by the next arrival
        self.items.retain(|&(r, _)| r > 0.0);
    }

    /// Canonical text key: `r:c` pairs with `r` rounded to 1e-9.
    pub fn key(&self) -> String {
        if self.items.is_empty() {
            return "∅".to_string();
        }
        self.items
            .iter()
            .map(|&(r, c)| format!("{:.9}:{c}", r))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for ProfileState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl Serialize for ProfileState {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.items.iter())
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::meter::OperationMeter;

/// Admissible matching policies.
///
/// A policy picks one stored item among the candidates compatible with the
/// arrival, using only the candidates (in arrival order) and an independent
/// uniform draw carried by the input event.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Policy {
    /// First Come First Matched: the oldest compatible item.
    Fcfm,
    /// Match the Longest: the compatible class with the most compatible
    /// stored items; ties between classes broken uniformly by the draw,
    /// the oldest item of the chosen class is matched.
    Ml,
    /// Static class priority. Classes absent from the list rank last; the
    /// oldest item of the winning class is matched.
    Priority(Vec<u32>),
    /// Uniform among compatible items.
    Random,
}

impl Policy {
    /// Index into `candidates` of the item to match.
    ///
    /// `candidates` lists `(position, class)` of compatible items in arrival
    /// order and must be non-empty.
    pub fn choose(&self, candidates: &[(usize, u32)], draw: f64, meter: &mut OperationMeter) -> usize {
        debug_assert!(!candidates.is_empty());
        match self {
            Policy::Fcfm => 0,
            Policy::Random => uniform_index(draw, candidates.len()),
            Policy::Priority(order) => {
                for &class in order {
                    for (k, &(_, c)) in candidates.iter().enumerate() {
                        meter.tick();
                        if c == class {
                            return k;
                        }
                    }
                }
                0
            }
            Policy::Ml => {
                // (class, multiplicity, first index), classes in first-seen order
                let mut buckets: Vec<(u32, usize, usize)> = Vec::new();
                for (k, &(_, c)) in candidates.iter().enumerate() {
                    meter.add(buckets.len().max(1) as u64);
                    match buckets.iter_mut().find(|b| b.0 == c) {
                        Some(b) => b.1 += 1,
                        None => buckets.push((c, 1, k)),
                    }
                }
                let best = buckets.iter().map(|b| b.1).max().unwrap_or(0);
                let mut tied: Vec<&(u32, usize, usize)> = buckets.iter().filter(|b| b.1 == best).collect();
                if tied.len() == 1 {
                    return tied[0].2;
                }
                tied.sort_by_key(|b| b.0);
                tied[uniform_index(draw, tied.len())].2
            }
        }
    }

    /// True when [`Policy::choose`] never reads the draw.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Fcfm | Policy::Priority(_))
    }
}

fn uniform_index(draw: f64, k: usize) -> usize {
    ((draw * k as f64) as usize).min(k - 1)
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Fcfm => write!(f, "fcfm"),
            Policy::Ml => write!(f, "ml"),
            Policy::Random => write!(f, "random"),
            Policy::Priority(order) => {
                let s: Vec<String> = order.iter().map(|c| c.to_string()).collect();
                write!(f, "priority:{}", s.join(","))
            }
        }
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "fcfm" => Ok(Policy::Fcfm),
            "ml" => Ok(Policy::Ml),
            "random" => Ok(Policy::Random),
            _ => {
                let order = s
                    .strip_prefix("priority:")
                    .ok_or_else(|| Error::Input(format!("unknown policy `{s}`")))?;
                let classes = order
                    .split(',')
                    .map(|c| c.trim().parse::<u32>().ok().filter(|&c| c >= 1))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| Error::Input(format!("bad priority order `{order}`")))?;
                Ok(Policy::Priority(classes))
            }
        }
    }
}

impl From<Policy> for String {
    fn from(p: Policy) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for Policy {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

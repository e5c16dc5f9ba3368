use std::fmt;

use serde::{Deserialize, Serialize};

/// One letter of a word-profile or arrival word.
///
/// Positive values are item classes `1..=n`. Two sentinels are reserved:
/// [`Letter::EMPTY`] (`0`, slot matched or vacated) and [`Letter::LATENCY`]
/// (`-1`, no arrival in that slot).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Letter(pub i32);

impl Letter {
    pub const EMPTY: Letter = Letter(0);
    pub const LATENCY: Letter = Letter(-1);

    pub fn class(c: u32) -> Letter {
        debug_assert!(c >= 1);
        Letter(c as i32)
    }

    #[inline]
    pub fn is_class(self) -> bool {
        self.0 >= 1
    }

    #[inline]
    pub fn is_latency(self) -> bool {
        self.0 == -1
    }

    /// The class index, if this letter is a class.
    #[inline]
    pub fn as_class(self) -> Option<u32> {
        if self.is_class() {
            Some(self.0 as u32)
        } else {
            None
        }
    }

    /// Latency letters read as empty slots (used when comparing latency states).
    #[inline]
    pub fn latency_as_empty(self) -> Letter {
        if self.is_latency() {
            Letter::EMPTY
        } else {
            self
        }
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Renders a word compactly (`"134"`) when every letter is a single digit,
/// and space separated otherwise (`"-1 3 12"`).
pub fn render_word(letters: &[Letter]) -> String {
    if letters.iter().all(|l| (0..=9).contains(&l.0)) {
        letters.iter().map(|l| char::from(b'0' + l.0 as u8)).collect()
    } else {
        letters
            .iter()
            .map(|l| l.0.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Parses a word written as digits (`"1131"`) or as separated integers
/// (`"-1 3 0"`, `"1,2,3"`).
pub fn parse_word(s: &str) -> Option<Vec<Letter>> {
    let s = s.trim();
    if s.contains(|c: char| c.is_whitespace() || c == ',') {
        s.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<i32>().ok().filter(|v| *v >= -1).map(Letter))
            .collect()
    } else {
        let mut out = Vec::with_capacity(s.len());
        let mut chars = s.chars();
        while let Some(c) = chars.next() {
            if c == '-' {
                match chars.next() {
                    Some('1') => out.push(Letter::LATENCY),
                    _ => return None,
                }
            } else {
                out.push(Letter(c.to_digit(10)? as i32));
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let w = parse_word("1-103").unwrap();
        assert_eq!(w, vec![Letter(1), Letter(-1), Letter(0), Letter(3)]);
        assert_eq!(render_word(&w), "1 -1 0 3");
        assert_eq!(render_word(&parse_word("134").unwrap()), "134");
        assert_eq!(parse_word("12, 3").unwrap(), vec![Letter(12), Letter(3)]);
        assert!(parse_word("1a").is_none());
        assert!(parse_word("-2 1").is_none());
    }
}

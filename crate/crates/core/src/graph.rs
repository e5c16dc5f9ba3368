//! Compatibility graphs.
//!
//! Classes are labeled `1..=n`. Edges are stored canonically as sorted pairs
//! `(i, j)` with `i < j`, next to a dense adjacency matrix used by the
//! kernels for O(1) compatibility lookups.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::letter::Letter;

/// Default cap on the number of rejection rounds in [`random_connected_er`].
pub const DEFAULT_ER_ATTEMPTS: usize = 100_000;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct CompatibilityGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    adj: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[u32; 2]>,
}

impl TryFrom<GraphFile> for CompatibilityGraph {
    type Error = Error;

    fn try_from(f: GraphFile) -> Result<Self> {
        CompatibilityGraph::new(f.n, f.edges.iter().map(|e| (e[0], e[1])))
    }
}

impl From<CompatibilityGraph> for GraphFile {
    fn from(g: CompatibilityGraph) -> Self {
        GraphFile {
            n: g.n,
            edges: g.edges.iter().map(|&(i, j)| [i, j]).collect(),
        }
    }
}

impl CompatibilityGraph {
    /// Builds a simple graph on `1..=n`. Self-loops, duplicate edges and
    /// out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Input("graph needs at least one class".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Input(format!("self-loop on class {a}")));
            }
            for c in [a, b] {
                if c == 0 || c as usize > n {
                    return Err(Error::Input(format!("edge endpoint {c} outside 1..={n}")));
                }
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::Input(format!("duplicate edge {a}-{b}")));
            }
        }
        let mut adj = vec![false; n * n];
        for &(i, j) in &set {
            let (i, j) = (i as usize - 1, j as usize - 1);
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
        Ok(CompatibilityGraph {
            n,
            edges: set.into_iter().collect(),
            adj,
        })
    }

    /// The paw graph: edges 1-2, 2-3, 2-4, 3-4.
    pub fn paw() -> Self {
        Self::new(4, [(1, 2), (2, 3), (2, 4), (3, 4)]).expect("static graph")
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n as u32).map(|i| (i, i + 1)))
    }

    pub fn complete(n: usize) -> Result<Self> {
        let n32 = n as u32;
        Self::new(n, (1..=n32).flat_map(|i| (i + 1..=n32).map(move |j| (i, j))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// All classes `1..=n`.
    pub fn classes(&self) -> impl Iterator<Item = u32> {
        1..=self.n as u32
    }

    /// `i - j` in the graph. Errors on classes outside `1..=n`.
    pub fn compatible(&self, i: u32, j: u32) -> Result<bool> {
        self.check_class(i)?;
        self.check_class(j)?;
        Ok(self.adjacent(i, j))
    }

    /// Unchecked compatibility of two valid classes.
    #[inline]
    pub fn adjacent(&self, i: u32, j: u32) -> bool {
        self.adj[(i as usize - 1) * self.n + (j as usize - 1)]
    }

    /// Compatibility of two letters. Sentinel letters (empty, latency) are
    /// compatible with nothing.
    #[inline]
    pub fn letters_compatible(&self, a: Letter, b: Letter) -> bool {
        a.is_class() && b.is_class() && self.adjacent(a.0 as u32, b.0 as u32)
    }

    /// `E(U)`: every class adjacent to some member of `u`.
    pub fn neighborhood(&self, u: &BTreeSet<u32>) -> Result<BTreeSet<u32>> {
        for &i in u {
            self.check_class(i)?;
        }
        Ok(self
            .classes()
            .filter(|&j| u.iter().any(|&i| self.adjacent(i, j)))
            .collect())
    }

    #[allow(clippy::needless_range_loop)]
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..self.n {
                if self.adj[i * self.n + j] && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    fn check_class(&self, c: u32) -> Result<()> {
        if c == 0 || c as usize > self.n {
            Err(Error::Input(format!("class {c} outside 1..={}", self.n)))
        } else {
            Ok(())
        }
    }
}

impl fmt::Debug for CompatibilityGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompatibilityGraph")
            .field("n", &self.n)
            .field("edges", &self.edges)
            .finish()
    }
}

/// Named graphs: `paw`, `path:<n>`, `complete:<n>`.
impl FromStr for CompatibilityGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Input(format!("unknown graph name `{s}`"));
        match s.split_once(':') {
            None if s == "paw" => Ok(Self::paw()),
            Some(("path", n)) => Self::path(n.parse().map_err(|_| bad())?),
            Some(("complete", n)) => Self::complete(n.parse().map_err(|_| bad())?),
            _ => Err(bad()),
        }
    }
}

/// Erdős–Rényi graph `G(n, q)` conditioned on being connected, by rejection.
pub fn random_connected_er(n: usize, q: f64, seed: u64) -> Result<CompatibilityGraph> {
    random_connected_er_with_cap(n, q, seed, DEFAULT_ER_ATTEMPTS)
}

pub fn random_connected_er_with_cap(
    n: usize,
    q: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<CompatibilityGraph> {
    if n < 2 {
        return Err(Error::Input(format!("Erdős–Rényi graph needs n >= 2, got {n}")));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Input(format!("edge probability {q} outside (0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n32 = n as u32;
    for _ in 0..max_attempts {
        let mut edges = Vec::new();
        for i in 1..=n32 {
            for j in i + 1..=n32 {
                if rng.gen::<f64>() < q {
                    edges.push((i, j));
                }
            }
        }
        let g = CompatibilityGraph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::GraphGeneration {
        n,
        q,
        attempts: max_attempts,
    })
}

//! Exact counting of strongly synchronizing words and the resulting
//! bounds on the coalescence time of the window sampler.
//!
//! A strongly synchronizing word is determined by its second half and, for
//! each first-half letter, a choice among the classes incompatible with the
//! second-half letters it must avoid. Grouping words by the trace of their
//! second half (distinct letters in order of first appearance) gives
//! `N = Σ_z N_z` with
//!
//! `N_z = Σ_{L_1 + … + L_l = p, L_i ≥ 1} Π_i i^{L_i - 1} β(z_1…z_i)^{L_i}`.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::letter::Letter;
use crate::syncsampler::is_strongly_synchronizing;

/// Distinct class letters whose class set `U` has `E(U) ≠ V`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Trace(Vec<u32>);

impl Trace {
    pub fn new(letters: Vec<u32>, g: &CompatibilityGraph) -> Result<Self> {
        let set: BTreeSet<u32> = letters.iter().copied().collect();
        if set.len() != letters.len() || letters.is_empty() {
            return Err(Error::Input(format!("trace letters must be distinct and non-empty: {letters:?}")));
        }
        if g.neighborhood(&set)?.len() == g.n() {
            return Err(Error::Input(format!("{letters:?} is compatible with every class")));
        }
        Ok(Trace(letters))
    }

    pub fn letters(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn class_set(&self) -> BTreeSet<u32> {
        self.0.iter().copied().collect()
    }
}

impl std::fmt::Display for Trace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let letters: Vec<Letter> = self.0.iter().map(|&c| Letter::class(c)).collect();
        f.write_str(&crate::letter::render_word(&letters))
    }
}

/// Distinct letters of the second half of `w`, in order of first
/// appearance.
pub fn trace_of(w: &[Letter], p: usize, g: &CompatibilityGraph) -> Result<Trace> {
    if !is_strongly_synchronizing(w, p, g)? {
        return Err(Error::Input("trace is only defined for strongly synchronizing words".into()));
    }
    let mut seen = Vec::new();
    for l in &w[p..] {
        if let Some(c) = l.as_class() {
            if !seen.contains(&c) {
                seen.push(c);
            }
        }
    }
    Trace::new(seen, g)
}

/// Every admissible trace: all permutations of all class sets `U` with
/// `E(U) ≠ V`, sorted by length then lexicographically.
pub fn enumerate_traces(g: &CompatibilityGraph) -> Vec<Trace> {
    let n = g.n();
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << n) {
        let set: BTreeSet<u32> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i as u32 + 1).collect();
        if g.neighborhood(&set).expect("valid classes").len() == n {
            continue;
        }
        let items: Vec<u32> = set.into_iter().collect();
        permutations(&items, &mut Vec::new(), &mut vec![false; items.len()], &mut out);
    }
    let mut traces: Vec<Trace> = out.into_iter().map(Trace).collect();
    traces.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.0.cmp(&b.0)));
    traces
}

fn permutations(items: &[u32], prefix: &mut Vec<u32>, used: &mut [bool], out: &mut Vec<Vec<u32>>) {
    if prefix.len() == items.len() {
        out.push(prefix.clone());
        return;
    }
    for i in 0..items.len() {
        if !used[i] {
            used[i] = true;
            prefix.push(items[i]);
            permutations(items, prefix, used, out);
            prefix.pop();
            used[i] = false;
        }
    }
}

/// Classes incompatible with every letter of `z` (the graph has no
/// self-loops, so a letter is incompatible with itself).
pub fn beta_set(z: &[u32], g: &CompatibilityGraph) -> Vec<u32> {
    g.classes().filter(|&v| z.iter().all(|&c| !g.adjacent(v, c))).collect()
}

pub fn beta(z: &[u32], g: &CompatibilityGraph) -> usize {
    beta_set(z, g).len()
}

/// `N_z` by dynamic programming over (positions used, trace prefix).
/// Returns 0 when `p < |z|`.
pub fn count_for_trace(z: &Trace, p: usize, g: &CompatibilityGraph) -> BigUint {
    let l = z.len();
    if p < l {
        return BigUint::zero();
    }
    let betas: Vec<BigUint> = (1..=l).map(|i| BigUint::from(beta(&z.0[..i], g))).collect();
    // f[k]: weighted count with the first i blocks covering k positions
    let mut f = vec![BigUint::zero(); p + 1];
    f[0] = BigUint::one();
    for i in 1..=l {
        let mut next = vec![BigUint::zero(); p + 1];
        let idx = BigUint::from(i);
        // block weight for length L: i^{L-1} β_i^L
        let mut weights = vec![BigUint::zero(); p + 1];
        let mut w = betas[i - 1].clone();
        for slot in weights.iter_mut().skip(1) {
            *slot = w.clone();
            w = w * &idx * &betas[i - 1];
        }
        for k in 0..=p {
            if f[k].is_zero() {
                continue;
            }
            for len in 1..=p - k {
                next[k + len] += &f[k] * &weights[len];
            }
        }
        f = next;
    }
    f[p].clone()
}

/// `N_z` by listing every index family `1 = k_1 < … < k_l < k_{l+1} = p+1`.
pub fn count_for_trace_direct(z: &Trace, p: usize, g: &CompatibilityGraph) -> BigUint {
    let l = z.len();
    if p < l {
        return BigUint::zero();
    }
    let betas: Vec<u64> = (1..=l).map(|i| beta(&z.0[..i], g) as u64).collect();
    let mut total = BigUint::zero();
    let mut ks = vec![1usize];
    fn rec(ks: &mut Vec<usize>, l: usize, p: usize, betas: &[u64], total: &mut BigUint) {
        if ks.len() == l {
            ks.push(p + 1);
            let mut term = BigUint::one();
            for i in 1..=l {
                let len = (ks[i] - ks[i - 1]) as u32;
                term *= BigUint::from(i as u64).pow(len - 1) * BigUint::from(betas[i - 1]).pow(len);
            }
            *total += term;
            ks.pop();
            return;
        }
        let last = *ks.last().unwrap();
        for k in last + 1..=p {
            ks.push(k);
            rec(ks, l, p, betas, total);
            ks.pop();
        }
    }
    rec(&mut ks, l, p, &betas, &mut total);
    total
}

/// Number of strongly synchronizing words of length `2p`.
pub fn count_strongly_synchronizing(g: &CompatibilityGraph, p: usize) -> BigUint {
    enumerate_traces(g).iter().map(|z| count_for_trace(z, p, g)).sum()
}

/// Same count by testing all `n^{2p}` words.
pub fn count_strongly_synchronizing_bruteforce(g: &CompatibilityGraph, p: usize) -> u64 {
    let n = g.n() as u64;
    let len = 2 * p;
    let total = n.pow(len as u32);
    let mut w = vec![Letter(1); len];
    let mut count = 0;
    for mut code in 0..total {
        for slot in w.iter_mut() {
            *slot = Letter((code % n) as i32 + 1);
            code /= n;
        }
        if is_strongly_synchronizing(&w, p, g).expect("length 2p") {
            count += 1;
        }
    }
    count
}

/// Closed form of the count on the paw graph:
/// `1 + 2^{2p+3} - 3^{p+1} - 4(p+3)·3^{p-1}`.
pub fn paw_closed_form(p: usize) -> BigUint {
    assert!(p >= 1);
    let two = BigUint::from(2u32);
    let three = BigUint::from(3u32);
    let plus = BigUint::one() + two.pow(2 * p as u32 + 3);
    let minus = three.pow(p as u32 + 1) + BigUint::from(4 * (p as u64 + 3)) * three.pow(p as u32 - 1);
    plus - minus
}

/// Natural logarithm of a big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().expect("finite").ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().expect("finite").ln() + shift as f64 * std::f64::consts::LN_2
}

/// Bounds on the expected number of doublings and on `E[-T]` for the
/// window sampler.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoalescenceBounds {
    /// `1 + log2(n^{2p} / N)`, uniform `μ`.
    pub bound_iterations: f64,
    /// `p · 2^{bound_iterations}`, uniform `μ`.
    pub bound_horizon: f64,
    /// `2p / q` with `q` the probability of a strongly synchronizing window
    /// under the supplied `μ`.
    pub general_bound_horizon: Option<f64>,
    pub assumes_uniform_mu: bool,
}

pub fn coalescence_bounds(n: usize, p: usize, count: &BigUint) -> Result<CoalescenceBounds> {
    if count.is_zero() {
        return Err(Error::Input("no strongly synchronizing word: the window control never triggers".into()));
    }
    let bound_iterations = 1.0 + (2.0 * p as f64 * (n as f64).ln() - ln_big(count)) / std::f64::consts::LN_2;
    Ok(CoalescenceBounds {
        bound_iterations,
        bound_horizon: p as f64 * bound_iterations.exp2(),
        general_bound_horizon: None,
        assumes_uniform_mu: true,
    })
}

/// Bounds with the general-`μ` horizon bound `2p / q` filled in.
pub fn coalescence_bounds_for(g: &CompatibilityGraph, p: usize, mu: &[f64]) -> Result<CoalescenceBounds> {
    let mut b = coalescence_bounds(g.n(), p, &count_strongly_synchronizing(g, p))?;
    let q = synchronizing_probability(g, p, mu)?;
    b.general_bound_horizon = Some(2.0 * p as f64 / q);
    Ok(b)
}

/// `q^{p,μ}`: probability that `2p` i.i.d. `μ` letters form a strongly
/// synchronizing word, summed trace by trace.
pub fn synchronizing_probability(g: &CompatibilityGraph, p: usize, mu: &[f64]) -> Result<f64> {
    if mu.len() != g.n() {
        return Err(Error::Input(format!("mu has {} entries, graph has {} classes", mu.len(), g.n())));
    }
    let weight = |set: &[u32]| set.iter().map(|&c| mu[c as usize - 1]).sum::<f64>();
    let mut q = 0.0;
    for z in enumerate_traces(g) {
        let l = z.len();
        if p < l {
            continue;
        }
        let mut f = vec![0.0; p + 1];
        f[0] = 1.0;
        for i in 1..=l {
            let first = mu[z.0[i - 1] as usize - 1];
            let again = weight(&z.0[..i]);
            let avoid = weight(&beta_set(&z.0[..i], g));
            let mut next = vec![0.0; p + 1];
            for k in 0..p {
                if f[k] == 0.0 {
                    continue;
                }
                for len in 1..=p - k {
                    next[k + len] += f[k] * first * again.powi(len as i32 - 1) * avoid.powi(len as i32);
                }
            }
            f = next;
        }
        q += f[p];
    }
    Ok(q)
}

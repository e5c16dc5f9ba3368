//! Monte-Carlo estimation over perfect samples: loss rates, policy and
//! sampler comparisons, and a chi-square check of the samplers against
//! long forward runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::engine::{primitive_cftp, HorizonConfig, SampleReport};
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::models::{all_word_states, Policy, ProfileState, WordKernel, WordProfile};
use crate::randomness::{derive_replication_seed, splitmix64, ArrivalModel, ForwardStream, InputTape, PatienceLaw};
use crate::syncsampler::DEFAULT_STATE_CAP;
use crate::{dominated, syncsampler};

pub use crate::meter::OperationMeter;

/// Perfect sampling algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sampler {
    /// Control by strongly synchronizing words (deterministic patience).
    #[serde(rename = "algo3")]
    SyncWord,
    /// Control by the dominating infinite-server queue.
    #[serde(rename = "algo2")]
    Dominated,
    /// All-states coupling from the past.
    #[serde(rename = "cftp")]
    Cftp,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::SyncWord => "algo3",
            Sampler::Dominated => "algo2",
            Sampler::Cftp => "cftp",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "algo3" | "syncword" => Ok(Sampler::SyncWord),
            "algo2" | "dominated" => Ok(Sampler::Dominated),
            "cftp" | "primitive" => Ok(Sampler::Cftp),
            other => Err(Error::Input(format!("unknown sampler '{other}' (algo2, algo3, cftp)"))),
        }
    }
}

/// A perfect sample of either chain.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Sample {
    Word(WordProfile),
    Profile(ProfileState),
}

impl Sample {
    pub fn as_word(&self) -> Option<&WordProfile> {
        match self {
            Sample::Word(w) => Some(w),
            Sample::Profile(_) => None,
        }
    }
}

impl fmt::Display for Sample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sample::Word(w) => w.fmt(f),
            Sample::Profile(x) => x.fmt(f),
        }
    }
}

/// Horizon schedule used when none is given: `2p` for deterministic
/// patience, `2⌈m⌉` otherwise.
pub fn default_horizon(model: &ArrivalModel) -> HorizonConfig {
    let m = model.patience.upper_bound().ceil().max(1.0) as u64;
    HorizonConfig::new(match model.patience {
        PatienceLaw::Deterministic(p) => 2 * p.max(1) as u64,
        PatienceLaw::Discrete(_) => 2 * m,
    })
}

/// Every word-profile of the model, for the all-states sampler.
pub fn word_state_space(model: &ArrivalModel, cap: u128) -> Result<Vec<WordProfile>> {
    let p = model
        .deterministic_patience()
        .ok_or_else(|| Error::Config("all-states coupling needs deterministic patience".into()))? as usize;
    let latency = model.gamma > 0.0;
    let alphabet = model.n() as u128 + 1 + latency as u128;
    let size = alphabet.checked_pow(p as u32).unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::StateSpaceTooLarge { size, cap });
    }
    Ok(all_word_states(model.n(), p, latency))
}

/// One perfect sample with the chosen algorithm.
pub fn perfect_sample(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    tape: &mut InputTape,
    sampler: Sampler,
    cfg: &HorizonConfig,
) -> Result<SampleReport<Sample>> {
    model.validate()?;
    if model.n() != graph.n() {
        return Err(Error::Config(format!("mu has {} classes, graph has {}", model.n(), graph.n())));
    }
    match sampler {
        Sampler::SyncWord => Ok(syncsampler::sample_syncword(model, policy, graph, tape, cfg)?.map(Sample::Word)),
        Sampler::Dominated => match model.patience {
            PatienceLaw::Deterministic(_) => {
                Ok(dominated::sample_dominated_latency(model, policy, graph, tape, cfg)?.map(Sample::Word))
            }
            PatienceLaw::Discrete(_) => {
                Ok(dominated::sample_dominated_profile(model, policy, graph, tape, cfg)?.map(Sample::Profile))
            }
        },
        Sampler::Cftp => {
            let states = word_state_space(model, DEFAULT_STATE_CAP)?;
            Ok(primitive_cftp(&WordKernel { policy, graph }, &states, tape, cfg)?.map(Sample::Word))
        }
    }
}

/// Word-profile sample; fails for samplers returning a general profile.
pub fn perfect_word_sample(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    tape: &mut InputTape,
    sampler: Sampler,
    cfg: &HorizonConfig,
) -> Result<SampleReport<WordProfile>> {
    if model.deterministic_patience().is_none() {
        return Err(Error::Config("word-profile samples need deterministic patience".into()));
    }
    let r = perfect_sample(model, policy, graph, tape, sampler, cfg)?;
    Ok(r.map(|s| match s {
        Sample::Word(w) => w,
        Sample::Profile(_) => unreachable!("deterministic patience yields word-profiles"),
    }))
}

/// Outcome of one loss replication.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossRecord {
    pub replication: u64,
    pub seed: u64,
    pub sample: WordProfile,
    /// Class of the head item lost on the next arrival, if any.
    pub lost: Option<u32>,
    pub start_time: i64,
    pub operations: u64,
}

/// Draws a perfect sample for replication `rep`, feeds it the arrival at
/// time 0 and records whether the head item leaves unmatched.
pub fn loss_replication(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    master_seed: u64,
    rep: u64,
    sampler: Sampler,
    cfg: &HorizonConfig,
) -> Result<LossRecord> {
    let seed = derive_replication_seed(master_seed, rep);
    let mut tape = InputTape::new(model.clone(), seed);
    let report = perfect_word_sample(model, policy, graph, &mut tape, sampler, cfg)?;
    let next = tape.future_event(0);
    let mut x = report.sample.clone();
    let outcome = x.step(next.letter, next.draw, policy, graph, &mut OperationMeter::disabled());
    Ok(LossRecord {
        replication: rep,
        seed,
        sample: report.sample,
        lost: outcome.lost,
        start_time: report.start_time,
        operations: report.operations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassLoss {
    pub class: u32,
    pub rate: f64,
    pub std_error: f64,
}

/// Estimated loss rates `ρ̂(i)` and `ρ̂ = Σ ρ̂(i)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossEstimate {
    pub per_class: Vec<ClassLoss>,
    pub total: f64,
    pub total_std_error: f64,
    pub replications: u64,
}

fn proportion_se(rate: f64, reps: u64) -> f64 {
    (rate * (1.0 - rate) / reps as f64).sqrt()
}

impl LossEstimate {
    /// Aggregates per-replication loss classes (`None` = no loss).
    pub fn from_losses(n: usize, losses: impl IntoIterator<Item = Option<u32>>) -> Result<Self> {
        let mut counts = vec![0u64; n];
        let mut reps = 0u64;
        let mut any = 0u64;
        for l in losses {
            reps += 1;
            if let Some(c) = l {
                counts[c as usize - 1] += 1;
                any += 1;
            }
        }
        if reps == 0 {
            return Err(Error::Input("at least one replication is needed".into()));
        }
        let per_class: Vec<ClassLoss> = counts
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let rate = c as f64 / reps as f64;
                ClassLoss {
                    class: i as u32 + 1,
                    rate,
                    std_error: proportion_se(rate, reps),
                }
            })
            .collect();
        let total = per_class.iter().map(|c| c.rate).sum();
        Ok(LossEstimate {
            per_class,
            total,
            total_std_error: proportion_se(any as f64 / reps as f64, reps),
            replications: reps,
        })
    }

    pub fn rate(&self, class: u32) -> f64 {
        self.per_class[class as usize - 1].rate
    }
}

/// Monte-Carlo loss rates over `reps` replications with derived seeds.
pub fn estimate_loss(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    master_seed: u64,
    reps: u64,
    sampler: Sampler,
) -> Result<LossEstimate> {
    let cfg = default_horizon(model);
    let mut losses = Vec::with_capacity(reps as usize);
    for rep in 0..reps {
        losses.push(loss_replication(model, policy, graph, master_seed, rep, sampler, &cfg)?.lost);
    }
    LossEstimate::from_losses(model.n(), losses)
}

/// Mean and standard error of paired per-replication differences in the
/// total loss indicator.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedDifference {
    pub first: Policy,
    pub second: Policy,
    pub mean: f64,
    pub std_error: f64,
}

impl PairedDifference {
    pub fn from_indicators(first: Policy, second: Policy, a: &[Option<u32>], b: &[Option<u32>]) -> Self {
        let diffs: Vec<f64> = a
            .iter()
            .zip(b)
            .map(|(x, y)| x.is_some() as u8 as f64 - y.is_some() as u8 as f64)
            .collect();
        let (mean, std_error) = mean_and_se(&diffs);
        PairedDifference { first, second, mean, std_error }
    }
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyComparison {
    pub estimates: Vec<(Policy, LossEstimate)>,
    /// Every ordered pair `(i, j)`, `i < j`, in listing order.
    pub differences: Vec<PairedDifference>,
}

impl PolicyComparison {
    /// Builds the table from per-policy loss indicators sharing seeds.
    pub fn from_losses(n: usize, per_policy: Vec<(Policy, Vec<Option<u32>>)>) -> Result<Self> {
        let mut estimates = Vec::new();
        for (pol, losses) in &per_policy {
            estimates.push((pol.clone(), LossEstimate::from_losses(n, losses.iter().copied())?));
        }
        let mut differences = Vec::new();
        for i in 0..per_policy.len() {
            for j in i + 1..per_policy.len() {
                differences.push(PairedDifference::from_indicators(
                    per_policy[i].0.clone(),
                    per_policy[j].0.clone(),
                    &per_policy[i].1,
                    &per_policy[j].1,
                ));
            }
        }
        Ok(PolicyComparison { estimates, differences })
    }
}

/// Loss rates for several policies on common random numbers.
pub fn compare_policies(
    model: &ArrivalModel,
    policies: &[Policy],
    graph: &CompatibilityGraph,
    master_seed: u64,
    reps: u64,
    sampler: Sampler,
) -> Result<PolicyComparison> {
    if policies.len() < 2 {
        return Err(Error::Input("compare at least two policies".into()));
    }
    let cfg = default_horizon(model);
    let mut per_policy = Vec::new();
    for pol in policies {
        let mut losses = Vec::with_capacity(reps as usize);
        for rep in 0..reps {
            losses.push(loss_replication(model, pol, graph, master_seed, rep, sampler, &cfg)?.lost);
        }
        per_policy.push((pol.clone(), losses));
    }
    PolicyComparison::from_losses(model.n(), per_policy)
}

/// Mean operation count of one sampler over shared seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerOps {
    pub sampler: Sampler,
    pub mean_operations: f64,
    pub std_error: f64,
    pub mean_horizon: f64,
    pub mean_iterations: f64,
    pub replications: u64,
}

impl SamplerOps {
    pub fn from_reports<S>(sampler: Sampler, reports: &[SampleReport<S>]) -> Self {
        let ops: Vec<f64> = reports.iter().map(|r| r.operations as f64).collect();
        let (mean_operations, std_error) = mean_and_se(&ops);
        let n = reports.len() as f64;
        SamplerOps {
            sampler,
            mean_operations,
            std_error,
            mean_horizon: reports.iter().map(|r| -r.start_time as f64).sum::<f64>() / n,
            mean_iterations: reports.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
            replications: reports.len() as u64,
        }
    }
}

/// Per-sampler mean operation counts on the same replication seeds and the
/// same horizon schedule.
pub fn compare_samplers_ops(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    samplers: &[Sampler],
    master_seed: u64,
    reps: u64,
) -> Result<Vec<SamplerOps>> {
    let cfg = default_horizon(model);
    let mut out = Vec::new();
    for &sampler in samplers {
        let mut reports = Vec::with_capacity(reps as usize);
        for rep in 0..reps {
            let mut tape = InputTape::new(model.clone(), derive_replication_seed(master_seed, rep));
            reports.push(perfect_sample(model, policy, graph, &mut tape, sampler, &cfg)?);
        }
        out.push(SamplerOps::from_reports(sampler, &reports));
    }
    Ok(out)
}

/// Runs the word-profile chain forward from `0^p`, calling `visit` after
/// each of the `steps` transitions that follow `burn_in` discarded ones.
pub fn forward_word_run(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    seed: u64,
    burn_in: u64,
    steps: u64,
    mut visit: impl FnMut(&WordProfile, Option<u32>),
) -> Result<()> {
    let p = model
        .deterministic_patience()
        .ok_or_else(|| Error::Config("forward word-profile run needs deterministic patience".into()))?;
    let mut stream = ForwardStream::new(model.clone(), seed);
    let mut x = WordProfile::empty(p as usize);
    let mut m = OperationMeter::disabled();
    for k in 0..burn_in + steps {
        let ev = stream.next_event();
        let out = x.step(ev.letter, ev.draw, policy, graph, &mut m);
        if k >= burn_in {
            visit(&x, out.lost);
        }
    }
    Ok(())
}

/// Long-run loss frequency per class, with batch-means standard errors
/// (100 batches).
pub fn forward_loss_frequency(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    seed: u64,
    steps: u64,
) -> Result<LossEstimate> {
    const BATCHES: u64 = 100;
    let n = model.n();
    let batch = (steps / BATCHES).max(1);
    let mut counts = vec![vec![0u64; n]; BATCHES as usize];
    let mut k = 0u64;
    forward_word_run(model, policy, graph, seed, 1000, batch * BATCHES, |_, lost| {
        if let Some(c) = lost {
            counts[(k / batch) as usize][c as usize - 1] += 1;
        }
        k += 1;
    })?;
    let per_class = (0..n)
        .map(|i| {
            let rates: Vec<f64> = counts.iter().map(|b| b[i] as f64 / batch as f64).collect();
            let (rate, std_error) = mean_and_se(&rates);
            ClassLoss {
                class: i as u32 + 1,
                rate,
                std_error,
            }
        })
        .collect::<Vec<_>>();
    let totals: Vec<f64> = counts.iter().map(|b| b.iter().sum::<u64>() as f64 / batch as f64).collect();
    let (_, total_std_error) = mean_and_se(&totals);
    Ok(LossEstimate {
        total: per_class.iter().map(|c| c.rate).sum(),
        per_class,
        total_std_error,
        replications: batch * BATCHES,
    })
}

/// Result of a two-sample chi-square comparison of empirical laws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AgreementReport {
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub total_variation: f64,
    pub significance: f64,
    pub pass: bool,
    /// Cells after aggregation of sparse states.
    pub cells: usize,
    /// States folded into the pooled sparse cell.
    pub merged_states: usize,
    pub first_size: u64,
    pub second_size: u64,
}

/// Two-sample chi-square test between two empirical laws.
///
/// States whose expected count in the smaller sample is below 5 are pooled
/// into one cell; when that cell is still too sparse it is folded into the
/// least populated remaining cell.
pub fn chi_square_two_sample(
    first: &BTreeMap<String, u64>,
    second: &BTreeMap<String, u64>,
    significance: f64,
) -> Result<AgreementReport> {
    let na: u64 = first.values().sum();
    let nb: u64 = second.values().sum();
    if na == 0 || nb == 0 {
        return Err(Error::Input("both samples must be non-empty".into()));
    }
    let (fa, fb) = (na as f64, nb as f64);
    let keys: Vec<&String> = first.keys().chain(second.keys()).collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    let get = |m: &BTreeMap<String, u64>, k: &String| m.get(k).copied().unwrap_or(0);
    let total_variation = 0.5
        * keys
            .iter()
            .map(|k| (get(first, k) as f64 / fa - get(second, k) as f64 / fb).abs())
            .sum::<f64>();

    let small = fa.min(fb);
    let expected = |a: u64, b: u64| small * (a + b) as f64 / (fa + fb);
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut pooled = (0u64, 0u64);
    let mut merged_states = 0;
    for k in &keys {
        let (a, b) = (get(first, k), get(second, k));
        if expected(a, b) < 5.0 {
            pooled.0 += a;
            pooled.1 += b;
            merged_states += 1;
        } else {
            cells.push((a, b));
        }
    }
    if merged_states > 0 {
        if expected(pooled.0, pooled.1) >= 5.0 || cells.is_empty() {
            cells.push(pooled);
        } else {
            let idx = (0..cells.len()).min_by_key(|&i| cells[i].0 + cells[i].1).expect("non-empty");
            cells[idx].0 += pooled.0;
            cells[idx].1 += pooled.1;
        }
    }

    let (ra, rb) = ((fb / fa).sqrt(), (fa / fb).sqrt());
    let chi_square: f64 = cells
        .iter()
        .filter(|&&(a, b)| a + b > 0)
        .map(|&(a, b)| (a as f64 * ra - b as f64 * rb).powi(2) / (a + b) as f64)
        .sum();
    let degrees_of_freedom = cells.len().saturating_sub(1);
    let p_value = if degrees_of_freedom == 0 {
        1.0
    } else {
        let dist = ChiSquared::new(degrees_of_freedom as f64).map_err(|e| Error::Input(e.to_string()))?;
        1.0 - dist.cdf(chi_square)
    };
    Ok(AgreementReport {
        chi_square,
        degrees_of_freedom,
        p_value,
        total_variation,
        significance,
        pass: p_value > significance,
        cells: cells.len(),
        merged_states,
        first_size: na,
        second_size: nb,
    })
}

/// Seed of the forward run paired with master seed `master`.
pub fn forward_seed(master: u64) -> u64 {
    splitmix64(master ^ 0x0066_6f72_7761_7264) // "forward"
}

/// Empirical law of `reps` perfect samples.
pub fn perfect_sample_counts(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    sampler: Sampler,
    master_seed: u64,
    reps: u64,
) -> Result<BTreeMap<String, u64>> {
    let cfg = default_horizon(model);
    let mut counts = BTreeMap::new();
    for rep in 0..reps {
        let mut tape = InputTape::new(model.clone(), derive_replication_seed(master_seed, rep));
        let r = perfect_word_sample(model, policy, graph, &mut tape, sampler, &cfg)?;
        *counts.entry(r.sample.to_string()).or_default() += 1;
    }
    Ok(counts)
}

/// Empirical law of a forward run after a burn-in of 1000 steps.
pub fn forward_counts(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    seed: u64,
    steps: u64,
) -> Result<BTreeMap<String, u64>> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    forward_word_run(model, policy, graph, seed, 1000, steps, |x, _| {
        *counts.entry(x.to_string()).or_default() += 1;
    })?;
    Ok(counts)
}

/// Chi-square agreement of a perfect sampler with a forward run.
#[allow(clippy::too_many_arguments)]
pub fn distribution_agreement(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    sampler: Sampler,
    master_seed: u64,
    reps: u64,
    forward_steps: u64,
    significance: f64,
) -> Result<AgreementReport> {
    let perfect = perfect_sample_counts(model, policy, graph, sampler, master_seed, reps)?;
    let forward = forward_counts(model, policy, graph, forward_seed(master_seed), forward_steps)?;
    chi_square_two_sample(&perfect, &forward, significance)
}

/// Deliberately biased sampler: the chain run from `0^p` over the last
/// `2p` inputs, without any coalescence check.
pub fn fixed_horizon_sample(model: &ArrivalModel, policy: &Policy, graph: &CompatibilityGraph, tape: &mut InputTape) -> Result<WordProfile> {
    let p = model
        .deterministic_patience()
        .ok_or_else(|| Error::Config("fixed-horizon sampler needs deterministic patience".into()))? as i64;
    let mut x = WordProfile::empty(p as usize);
    let mut m = OperationMeter::disabled();
    for j in -2 * p..0 {
        let ev = tape.event_at(j);
        x.step(ev.letter, ev.draw, policy, graph, &mut m);
    }
    Ok(x)
}

/// Empirical law of `reps` draws of [`fixed_horizon_sample`].
pub fn fixed_horizon_counts(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    master_seed: u64,
    reps: u64,
) -> Result<BTreeMap<String, u64>> {
    let mut counts = BTreeMap::new();
    for rep in 0..reps {
        let mut tape = InputTape::new(model.clone(), derive_replication_seed(master_seed, rep));
        *counts.entry(fixed_horizon_sample(model, policy, graph, &mut tape)?.to_string()).or_default() += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2_model() -> ArrivalModel {
        ArrivalModel::uniform(2, PatienceLaw::Deterministic(1), 0.0).unwrap()
    }

    #[test]
    fn sampler_names_roundtrip() {
        for s in [Sampler::SyncWord, Sampler::Dominated, Sampler::Cftp] {
            assert_eq!(s.to_string().parse::<Sampler>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{s}\""));
        }
        assert!("algo9".parse::<Sampler>().is_err());
    }

    #[test]
    fn loss_estimate_totals_are_exact_sums() {
        let est = LossEstimate::from_losses(3, [Some(1), None, Some(3), Some(3), None, None, Some(2)]).unwrap();
        assert_eq!(est.total, est.per_class.iter().map(|c| c.rate).sum::<f64>());
        assert_eq!(est.rate(3), 2.0 / 7.0);
        assert!((est.total - 4.0 / 7.0).abs() < 1e-15);
        assert!(LossEstimate::from_losses(2, []).is_err());
    }

    #[test]
    fn k2_loss_rates() {
        // stationary law is uniform on {0, 1, 2}; a stored item is lost when
        // the next arrival has its own class: 1/3 * 1/2 per class
        let g = CompatibilityGraph::complete(2).unwrap();
        let est = estimate_loss(&k2_model(), &Policy::Fcfm, &g, 11, 20_000, Sampler::SyncWord).unwrap();
        for c in 1..=2 {
            let r = &est.per_class[c - 1];
            assert!((r.rate - 1.0 / 6.0).abs() < 3.0 * r.std_error, "{r:?}");
        }
    }

    #[test]
    fn absent_class_never_lost() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::new(vec![0.5, 0.0, 0.25, 0.25], PatienceLaw::Deterministic(2), 0.0).unwrap();
        let est = estimate_loss(&model, &Policy::Fcfm, &g, 3, 2000, Sampler::SyncWord).unwrap();
        assert_eq!(est.rate(2), 0.0);
        assert!(est.total > 0.0);
    }

    #[test]
    fn same_policy_twice_gives_identical_estimates() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(2), 0.0).unwrap();
        let cmp = compare_policies(&model, &[Policy::Ml, Policy::Ml], &g, 8, 500, Sampler::SyncWord).unwrap();
        assert_eq!(cmp.estimates[0].1, cmp.estimates[1].1);
        assert_eq!(cmp.differences[0].mean, 0.0);
        assert_eq!(cmp.differences[0].std_error, 0.0);
        assert!(compare_policies(&model, &[Policy::Ml], &g, 8, 5, Sampler::SyncWord).is_err());
    }

    #[test]
    fn forward_loss_agrees_on_complete_graph() {
        let g = CompatibilityGraph::complete(3).unwrap();
        let model = ArrivalModel::uniform(3, PatienceLaw::Deterministic(2), 0.0).unwrap();
        let fwd = forward_loss_frequency(&model, &Policy::Fcfm, &g, 5, 200_000).unwrap();
        let mc = estimate_loss(&model, &Policy::Fcfm, &g, 6, 20_000, Sampler::SyncWord).unwrap();
        let se = (fwd.total_std_error.powi(2) + mc.total_std_error.powi(2)).sqrt();
        assert!((fwd.total - mc.total).abs() < 3.0 * se, "{} vs {}", fwd.total, mc.total);
    }

    #[test]
    fn chi_square_identical_laws() {
        let a: BTreeMap<String, u64> = [("x".to_string(), 500), ("y".to_string(), 300), ("z".to_string(), 2)].into();
        let r = chi_square_two_sample(&a, &a, 0.01).unwrap();
        assert!(r.chi_square.abs() < 1e-9);
        assert_eq!(r.total_variation, 0.0);
        assert!(r.pass);
        assert_eq!(r.merged_states, 1);
        assert_eq!(r.degrees_of_freedom, 1);
    }

    #[test]
    fn chi_square_detects_shift() {
        let a: BTreeMap<String, u64> = [("x".to_string(), 600), ("y".to_string(), 400)].into();
        let b: BTreeMap<String, u64> = [("x".to_string(), 400), ("y".to_string(), 600)].into();
        let r = chi_square_two_sample(&a, &b, 0.01).unwrap();
        assert!(!r.pass);
        assert!((r.total_variation - 0.2).abs() < 1e-12);
    }

    #[test]
    fn forward_halves_agree() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(1), 0.0).unwrap();
        let a = forward_counts(&model, &Policy::Fcfm, &g, 1, 100_000).unwrap();
        let b = forward_counts(&model, &Policy::Fcfm, &g, 2, 100_000).unwrap();
        assert!(chi_square_two_sample(&a, &b, 0.001).unwrap().pass);
    }

    #[test]
    fn fixed_horizon_sampler_is_rejected_on_k2() {
        let g = CompatibilityGraph::complete(2).unwrap();
        let biased = fixed_horizon_counts(&k2_model(), &Policy::Fcfm, &g, 4, 10_000).unwrap();
        let forward = forward_counts(&k2_model(), &Policy::Fcfm, &g, 4, 100_000).unwrap();
        assert!(!chi_square_two_sample(&biased, &forward, 0.01).unwrap().pass);
    }

    #[test]
    fn samplers_agree_per_seed() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(2), 0.3).unwrap();
        let cfg = default_horizon(&model);
        for rep in 0..100 {
            let seed = derive_replication_seed(9, rep);
            let samples: Vec<Sample> = [Sampler::SyncWord, Sampler::Dominated, Sampler::Cftp]
                .iter()
                .map(|&s| perfect_sample(&model, &Policy::Ml, &g, &mut InputTape::new(model.clone(), seed), s, &cfg).unwrap().sample)
                .collect();
            assert_eq!(samples[0], samples[1]);
            assert_eq!(samples[0], samples[2]);
        }
    }

    #[test]
    fn general_patience_dominated_sample() {
        let g = CompatibilityGraph::complete(2).unwrap();
        let model = ArrivalModel::new(vec![0.5, 0.5], PatienceLaw::Discrete(vec![(0.5, 0.4), (2.5, 0.6)]), 0.0).unwrap();
        let mut tape = InputTape::new(model.clone(), 1);
        let r = perfect_sample(&model, &Policy::Fcfm, &g, &mut tape, Sampler::Dominated, &default_horizon(&model)).unwrap();
        assert!(matches!(r.sample, Sample::Profile(_)));
        assert!(perfect_sample(&model, &Policy::Fcfm, &g, &mut tape, Sampler::Cftp, &default_horizon(&model)).is_err());
    }

    #[test]
    fn ops_are_deterministic() {
        let g = CompatibilityGraph::paw();
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(2), 0.0).unwrap();
        let a = compare_samplers_ops(&model, &Policy::Fcfm, &g, &[Sampler::SyncWord, Sampler::Cftp], 2, 50).unwrap();
        let b = compare_samplers_ops(&model, &Policy::Fcfm, &g, &[Sampler::SyncWord, Sampler::Cftp], 2, 50).unwrap();
        assert_eq!(a, b);
        assert!(a[0].mean_operations < a[1].mean_operations);
    }
}

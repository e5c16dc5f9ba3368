//! Perfect sampling by domination with an infinite-server queue.
//!
//! The control `Y_{n+1} = [max(Y_n, P_n) - 1]^+` is the largest residual
//! patience of an infinite-server queue fed by the same arrivals; once it
//! hits 0 every item of the matching system has left, whatever its state.
//! For the deterministic model with latency, `Y = 0` exactly when the last
//! `p` slots were all empty, which gives an O(1) run-length control.

use crate::engine::{sample_by_control, Control, HorizonConfig, SampleReport};
use crate::error::{Error, Result};
use crate::graph::CompatibilityGraph;
use crate::letter::Letter;
use crate::meter::OperationMeter;
use crate::models::{Policy, ProfileKernel, ProfileState, WordKernel, WordProfile};
use crate::randomness::{ArrivalModel, InputEvent, InputTape, Patience, PatienceLaw, DEFAULT_EPSILON};

/// `[max(y, patience) - 1]^+`.
pub fn dominating_step(y: f64, patience: f64) -> f64 {
    (y.max(patience) - 1.0).max(0.0)
}

/// True iff every patience in the window is 0, i.e. the last `p` slots were
/// latency slots.
pub fn latency_endpoint_check(window: &[f64]) -> bool {
    window.iter().all(|&v| v == 0.0)
}

/// Which chain the domination argument is applied to.
#[derive(Clone, Debug, PartialEq)]
pub enum DominatedSpec {
    /// General profile chain, patience bounded by `m`.
    Profile { m: f64 },
    /// Deterministic patience `p + ε` with latency probability `gamma > 0`.
    Latency { p: usize },
}

impl DominatedSpec {
    /// Validates that `P(P <= m) = 1` for some finite `m` and `P(P <= 1) > 0`.
    pub fn from_model(model: &ArrivalModel) -> Result<Self> {
        model.validate()?;
        match &model.patience {
            PatienceLaw::Deterministic(p) => {
                if model.gamma > 0.0 {
                    Ok(DominatedSpec::Latency { p: *p as usize })
                } else {
                    Err(Error::Config("patience law violates P(P<=1)>0".into()))
                }
            }
            PatienceLaw::Discrete(_) => {
                let at_most_one = model.gamma + (1.0 - model.gamma) * model.patience.prob_at_most_one();
                if at_most_one > 0.0 {
                    Ok(DominatedSpec::Profile {
                        m: model.patience.upper_bound(),
                    })
                } else {
                    Err(Error::Config("patience law violates P(P<=1)>0".into()))
                }
            }
        }
    }
}

/// Literal infinite-server control on the general profile chain, started
/// at `m` with endpoint `0 -> ∅`.
#[derive(Clone, Debug)]
pub struct InfiniteServerControl {
    pub start: f64,
    pub eps: f64,
}

impl Control for InfiniteServerControl {
    type State = f64;
    type Target = ProfileState;

    fn start(&self) -> f64 {
        self.start
    }

    fn step(&self, y: &mut f64, ev: &InputEvent, meter: &mut OperationMeter) {
        meter.tick();
        *y = dominating_step(*y, ev.patience.to_f64(self.eps));
    }

    fn target(&self, y: &f64, _: &mut OperationMeter) -> Option<ProfileState> {
        (*y == 0.0).then(ProfileState::empty)
    }
}

/// The same recursion read on the latency word-profile chain; endpoint
/// `0 -> (-1)^p`. Starts at `p + ε - 1`, the largest residual patience a
/// word-profile can hold.
#[derive(Clone, Debug)]
pub struct LiteralLatencyControl {
    pub p: usize,
    pub eps: f64,
}

impl Control for LiteralLatencyControl {
    type State = f64;
    type Target = WordProfile;

    fn start(&self) -> f64 {
        self.p as f64 + self.eps - 1.0
    }

    fn step(&self, y: &mut f64, ev: &InputEvent, meter: &mut OperationMeter) {
        meter.tick();
        *y = dominating_step(*y, ev.patience.to_f64(self.eps));
    }

    fn target(&self, y: &f64, _: &mut OperationMeter) -> Option<WordProfile> {
        (*y == 0.0).then(|| all_latency(self.p))
    }
}

/// Run-length form of [`LiteralLatencyControl`]: counts trailing latency
/// slots, endpoint when the count reaches `p`.
#[derive(Clone, Debug)]
pub struct LatencyRunControl {
    pub p: usize,
}

impl Control for LatencyRunControl {
    type State = usize;
    type Target = WordProfile;

    fn start(&self) -> usize {
        0
    }

    fn step(&self, run: &mut usize, ev: &InputEvent, meter: &mut OperationMeter) {
        meter.tick();
        *run = if ev.patience == Patience::Zero { (*run + 1).min(self.p) } else { 0 };
    }

    fn target(&self, run: &usize, _: &mut OperationMeter) -> Option<WordProfile> {
        (*run >= self.p).then(|| all_latency(self.p))
    }
}

fn all_latency(p: usize) -> WordProfile {
    WordProfile::from_letters(vec![Letter::LATENCY; p]).expect("p >= 1")
}

/// Perfect sample of the general profile chain (bounded discrete patience).
pub fn sample_dominated_profile(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    tape: &mut InputTape,
    cfg: &HorizonConfig,
) -> Result<SampleReport<ProfileState>> {
    let m = match DominatedSpec::from_model(model)? {
        DominatedSpec::Profile { m } => m,
        DominatedSpec::Latency { p } => p as f64 + DEFAULT_EPSILON,
    };
    let kernel = ProfileKernel {
        policy,
        graph,
        eps: DEFAULT_EPSILON,
    };
    let control = InfiniteServerControl {
        start: m,
        eps: DEFAULT_EPSILON,
    };
    sample_by_control(&kernel, &control, tape, cfg)
}

/// Perfect sample of the deterministic-patience chain with latency.
pub fn sample_dominated_latency(
    model: &ArrivalModel,
    policy: &Policy,
    graph: &CompatibilityGraph,
    tape: &mut InputTape,
    cfg: &HorizonConfig,
) -> Result<SampleReport<WordProfile>> {
    let p = match DominatedSpec::from_model(model)? {
        DominatedSpec::Latency { p } => p,
        DominatedSpec::Profile { .. } => {
            return Err(Error::Config("word-profile domination needs deterministic patience".into()))
        }
    };
    sample_by_control(&WordKernel { policy, graph }, &LatencyRunControl { p }, tape, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::primitive_cftp;
    use crate::models::all_word_states;
    use crate::randomness::ForwardStream;
    use crate::engine::Kernel;

    #[test]
    fn recursion_values() {
        assert_eq!(dominating_step(3.5, 2.5), 2.5);
        assert_eq!(dominating_step(0.0, 0.0), 0.0);
        assert_eq!(dominating_step(0.5, 0.0), 0.0);
    }

    #[test]
    fn endpoint_check() {
        assert!(latency_endpoint_check(&[0.0, 0.0, 0.0]));
        assert!(!latency_endpoint_check(&[0.0, 3.5, 0.0]));
    }

    #[test]
    fn configuration_gate() {
        let det = ArrivalModel::uniform(4, PatienceLaw::Deterministic(3), 0.0).unwrap();
        assert_eq!(
            DominatedSpec::from_model(&det),
            Err(Error::Config("patience law violates P(P<=1)>0".into()))
        );
        let never_short = ArrivalModel::uniform(2, PatienceLaw::Discrete(vec![(1.5, 1.0)]), 0.0).unwrap();
        assert!(DominatedSpec::from_model(&never_short).is_err());
        let lat = ArrivalModel::uniform(4, PatienceLaw::Deterministic(3), 0.2).unwrap();
        assert_eq!(DominatedSpec::from_model(&lat), Ok(DominatedSpec::Latency { p: 3 }));
        let ok = ArrivalModel::uniform(2, PatienceLaw::Discrete(vec![(0.5, 0.4), (2.5, 0.6)]), 0.0).unwrap();
        assert_eq!(DominatedSpec::from_model(&ok), Ok(DominatedSpec::Profile { m: 2.5 }));
    }

    #[test]
    fn run_length_control_matches_literal_recursion() {
        for (gamma, p) in [(0.2, 3usize), (0.5, 6)] {
            let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(p as u32), gamma).unwrap();
            let mut stream = ForwardStream::new(model, 77);
            let literal = LiteralLatencyControl { p, eps: DEFAULT_EPSILON };
            let run = LatencyRunControl { p };
            let mut m = OperationMeter::disabled();
            let (mut y, mut r) = (literal.start(), run.start());
            let mut window: Vec<f64> = Vec::new();
            for _ in 0..100_000 {
                let ev = stream.next_event();
                literal.step(&mut y, &ev, &mut m);
                run.step(&mut r, &ev, &mut m);
                window.push(ev.patience.to_f64(DEFAULT_EPSILON));
                let full = window.len() >= p;
                let shortcut = full && latency_endpoint_check(&window[window.len() - p..]);
                assert_eq!(y == 0.0, shortcut);
                assert_eq!(literal.target(&y, &mut m).is_some(), run.target(&r, &mut m).is_some());
            }
        }
    }

    #[test]
    fn detection_is_first_all_latency_window() {
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(3), 0.5).unwrap();
        let g = CompatibilityGraph::paw();
        for seed in 0..300 {
            let mut tape = InputTape::new(model.clone(), seed);
            let r = sample_dominated_latency(&model, &Policy::Fcfm, &g, &mut tape, &HorizonConfig::new(1)).unwrap();
            let t = r.detection_time;
            assert!((t - 3..t).all(|j| tape.event_at(j).is_latency()));
            // no earlier window inside the successful horizon
            for s in r.start_time + 3..t {
                assert!(!(s - 3..s).all(|j| tape.event_at(j).is_latency()));
            }
            assert_eq!(r.sample, {
                let k = WordKernel { policy: &Policy::Fcfm, graph: &g };
                let mut x = all_latency(3);
                for j in t..0 {
                    k.step(&mut x, &tape.event_at(j), &mut OperationMeter::disabled());
                }
                x
            });
        }
    }

    #[test]
    fn profile_control_empties_every_start_state() {
        // whenever Y hits 0, the profile chain from arbitrary states is empty
        let model = ArrivalModel::new(vec![0.5, 0.5], PatienceLaw::Discrete(vec![(0.5, 0.4), (2.5, 0.6)]), 0.0).unwrap();
        let g = CompatibilityGraph::complete(2).unwrap();
        let kernel = ProfileKernel { policy: &Policy::Fcfm, graph: &g, eps: DEFAULT_EPSILON };
        let mut stream = ForwardStream::new(model, 5);
        let mut starts: Vec<ProfileState> = (0..100)
            .map(|k| {
                let items = (0..k % 5).map(|i| (0.5 + ((k + i) % 2) as f64, 1 + (i as u32 % 2))).collect();
                ProfileState::from_items(items)
            })
            .collect();
        let mut y = 2.5;
        let mut m = OperationMeter::disabled();
        let mut hits = 0;
        for _ in 0..5000 {
            let ev = stream.next_event();
            y = dominating_step(y, ev.patience.to_f64(DEFAULT_EPSILON));
            for x in starts.iter_mut() {
                kernel.step(x, &ev, &mut m);
                assert!(x.phi() <= y + 1e-12);
            }
            if y == 0.0 {
                hits += 1;
                assert!(starts.iter().all(ProfileState::is_empty));
            }
        }
        assert!(hits > 100);
    }

    #[test]
    fn latency_domination_agrees_with_cftp() {
        let model = ArrivalModel::uniform(4, PatienceLaw::Deterministic(2), 0.5).unwrap();
        let g = CompatibilityGraph::paw();
        let states = all_word_states(4, 2, true);
        for seed in 0..200 {
            let mut tape = InputTape::new(model.clone(), seed);
            let a = sample_dominated_latency(&model, &Policy::Ml, &g, &mut tape, &HorizonConfig::new(1)).unwrap();
            let b = primitive_cftp(&WordKernel { policy: &Policy::Ml, graph: &g }, &states, &mut tape, &HorizonConfig::new(1)).unwrap();
            assert_eq!(a.sample, b.sample);
        }
    }
}

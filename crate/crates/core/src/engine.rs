//! Perfect sampling by control, and the primitive all-states CFTP baseline.
//!
//! Both samplers read inputs from an [`InputTape`], so every horizon
//! doubling reuses the events already drawn for the more recent past.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::meter::OperationMeter;
use crate::randomness::{InputEvent, InputTape};

/// Default cap on the backward horizon (in time slots).
pub const DEFAULT_HORIZON_CAP: u64 = 1 << 30;

/// A stochastic recursive sequence `X_{n+1} = f(X_n, v_n)`.
pub trait Kernel {
    type State: Clone;

    fn step(&self, state: &mut Self::State, ev: &InputEvent, meter: &mut OperationMeter);

    /// State equality as counted by the operation meter.
    fn same(&self, a: &Self::State, b: &Self::State, meter: &mut OperationMeter) -> bool;
}

/// The auxiliary chain `Y` of a q-control, together with its endpoints.
///
/// `target` returns `Some(a_k)` exactly when `y` is the endpoint `b_k`.
pub trait Control {
    type State: Clone;
    type Target;

    /// Starting state `y`, used afresh at every horizon.
    fn start(&self) -> Self::State;

    fn step(&self, y: &mut Self::State, ev: &InputEvent, meter: &mut OperationMeter);

    fn target(&self, y: &Self::State, meter: &mut OperationMeter) -> Option<Self::Target>;
}

/// An explicit q-control: a step function and a finite list of
/// `(b_k, a_k)` pairs.
pub struct ControlSpec<Y, X, F> {
    pub start: Y,
    pub step: F,
    pub endpoints: Vec<(Y, X)>,
}

impl<Y, X, F> ControlSpec<Y, X, F>
where
    Y: Clone + PartialEq,
    X: Clone,
    F: Fn(&Y, &InputEvent) -> Y,
{
    pub fn new(start: Y, step: F, endpoints: Vec<(Y, X)>) -> Result<Self> {
        if endpoints.is_empty() {
            return Err(Error::Config("a control needs at least one endpoint".into()));
        }
        Ok(ControlSpec { start, step, endpoints })
    }
}

impl<Y, X, F> Control for ControlSpec<Y, X, F>
where
    Y: Clone + PartialEq,
    X: Clone,
    F: Fn(&Y, &InputEvent) -> Y,
{
    type State = Y;
    type Target = X;

    fn start(&self) -> Y {
        self.start.clone()
    }

    fn step(&self, y: &mut Y, ev: &InputEvent, _meter: &mut OperationMeter) {
        *y = (self.step)(y, ev);
    }

    fn target(&self, y: &Y, _: &mut OperationMeter) -> Option<X> {
        self.endpoints.iter().find(|(b, _)| b == y).map(|(_, a)| a.clone())
    }
}

/// Horizon schedule shared by every sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct HorizonConfig {
    /// First backward horizon `-T_up`.
    pub initial: u64,
    /// Largest horizon attempted before giving up.
    pub cap: u64,
}

impl HorizonConfig {
    pub fn new(initial: u64) -> Self {
        HorizonConfig {
            initial,
            cap: DEFAULT_HORIZON_CAP,
        }
    }

    pub fn with_cap(mut self, cap: u64) -> Self {
        self.cap = cap;
        self
    }
}

/// Outcome of one perfect-sampling run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleReport<S> {
    pub sample: S,
    /// Number of horizons tried, the successful one included.
    pub iterations: u32,
    /// Starting time `T` of the successful horizon (negative).
    pub start_time: i64,
    /// Time `t` in `[T, 0]` at which coalescence was established.
    pub detection_time: i64,
    /// Input reads over all horizons.
    pub events_consumed: u64,
    /// Letter comparisons over all horizons.
    pub operations: u64,
}

impl<S> SampleReport<S> {
    pub fn map<U>(self, f: impl FnOnce(S) -> U) -> SampleReport<U> {
        SampleReport {
            sample: f(self.sample),
            iterations: self.iterations,
            start_time: self.start_time,
            detection_time: self.detection_time,
            events_consumed: self.events_consumed,
            operations: self.operations,
        }
    }
}

fn check_horizon(horizon: u64, cfg: &HorizonConfig) -> Result<()> {
    if horizon == 0 {
        return Err(Error::Config("initial horizon must be positive".into()));
    }
    if horizon > cfg.cap {
        return Err(Error::HorizonExceeded { cap: cfg.cap });
    }
    Ok(())
}

/// Perfect sampling by control.
///
/// From `T = -horizon` the control chain is run from its start state until
/// it first sits on an endpoint at some `t <= 0`; the model chain is then
/// set to the endpoint's target and folded over `v_t .. v_{-1}`. Without a
/// hit the horizon doubles and the control restarts from its start state.
pub fn sample_by_control<K, C>(
    kernel: &K,
    control: &C,
    tape: &mut InputTape,
    cfg: &HorizonConfig,
) -> Result<SampleReport<K::State>>
where
    K: Kernel,
    C: Control<Target = K::State>,
{
    let mut meter = OperationMeter::enabled();
    let mut horizon = cfg.initial;
    let mut iterations = 0;
    let mut reads = 0u64;
    loop {
        check_horizon(horizon, cfg)?;
        iterations += 1;
        let start = -(horizon as i64);
        let mut y = control.start();
        let mut t = start;
        let hit = loop {
            if let Some(a) = control.target(&y, &mut meter) {
                break Some(a);
            }
            if t == 0 {
                break None;
            }
            let ev = tape.event_at(t);
            reads += 1;
            control.step(&mut y, &ev, &mut meter);
            t += 1;
        };
        if let Some(mut x) = hit {
            let detection_time = t;
            for j in detection_time..0 {
                let ev = tape.event_at(j);
                reads += 1;
                kernel.step(&mut x, &ev, &mut meter);
            }
            return Ok(SampleReport {
                sample: x,
                iterations,
                start_time: start,
                detection_time,
                events_consumed: reads,
                operations: meter.count(),
            });
        }
        horizon = horizon.saturating_mul(2);
    }
}

/// Primitive coupling from the past over an explicit finite state space.
///
/// Every state is folded from `T` over the same events; the copies are
/// compared after each step and collapse to a single trajectory once they
/// agree. Without agreement by time 0 the horizon doubles.
pub fn primitive_cftp<K>(
    kernel: &K,
    states: &[K::State],
    tape: &mut InputTape,
    cfg: &HorizonConfig,
) -> Result<SampleReport<K::State>>
where
    K: Kernel,
{
    if states.is_empty() {
        return Err(Error::Input("empty state space".into()));
    }
    let mut meter = OperationMeter::enabled();
    let mut horizon = cfg.initial;
    let mut iterations = 0;
    let mut reads = 0u64;
    loop {
        check_horizon(horizon, cfg)?;
        iterations += 1;
        let start = -(horizon as i64);
        let mut copies: Vec<K::State> = states.to_vec();
        let mut coalesced_at = if copies.len() == 1 { Some(start) } else { None };
        for j in start..0 {
            let ev = tape.event_at(j);
            reads += 1;
            for x in copies.iter_mut() {
                kernel.step(x, &ev, &mut meter);
            }
            if coalesced_at.is_none() {
                let (first, rest) = copies.split_first().expect("non-empty");
                if rest.iter().all(|x| kernel.same(first, x, &mut meter)) {
                    copies.truncate(1);
                    coalesced_at = Some(j + 1);
                }
            }
        }
        if let Some(t) = coalesced_at {
            return Ok(SampleReport {
                sample: copies.swap_remove(0),
                iterations,
                start_time: start,
                detection_time: t,
                events_consumed: reads,
                operations: meter.count(),
            });
        }
        horizon = horizon.saturating_mul(2);
    }
}

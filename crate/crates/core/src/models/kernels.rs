use crate::engine::Kernel;
use crate::graph::CompatibilityGraph;
use crate::meter::OperationMeter;
use crate::models::{Policy, ProfileState, WordProfile};
use crate::randomness::InputEvent;

/// Word-profile chain (deterministic patience, with or without latency).
#[derive(Clone, Debug)]
pub struct WordKernel<'a> {
    pub policy: &'a Policy,
    pub graph: &'a CompatibilityGraph,
}

impl Kernel for WordKernel<'_> {
    type State = WordProfile;

    fn step(&self, state: &mut WordProfile, ev: &InputEvent, meter: &mut OperationMeter) {
        state.step(ev.letter, ev.draw, self.policy, self.graph, meter);
    }

    fn same(&self, a: &WordProfile, b: &WordProfile, meter: &mut OperationMeter) -> bool {
        a.metered_eq(b, meter)
    }
}

/// General profile chain with real-valued remaining patience.
#[derive(Clone, Debug)]
pub struct ProfileKernel<'a> {
    pub policy: &'a Policy,
    pub graph: &'a CompatibilityGraph,
    /// Value standing in for `ε` when an event carries patience `p + ε`.
    pub eps: f64,
}

impl Kernel for ProfileKernel<'_> {
    type State = ProfileState;

    fn step(&self, state: &mut ProfileState, ev: &InputEvent, meter: &mut OperationMeter) {
        state.step(ev, self.eps, self.policy, self.graph, meter);
    }

    fn same(&self, a: &ProfileState, b: &ProfileState, meter: &mut OperationMeter) -> bool {
        if a.items().len() != b.items().len() {
            return false;
        }
        for (x, y) in a.items().iter().zip(b.items()) {
            meter.tick();
            if x != y {
                return false;
            }
        }
        true
    }
}

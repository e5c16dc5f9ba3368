//! Perfect sampling for stochastic matching models with reneging.
//!
//! Items of `n` classes arrive one per slot, wait for a compatible partner
//! in a compatibility graph and leave unmatched when their patience runs
//! out. The crate simulates the chain and draws exact samples from its
//! stationary law by coupling from the past:
//!
//! * [`syncsampler`]: deterministic patience, controlled by strongly
//!   synchronizing words of the last `2p` arrivals;
//! * [`dominated`]: general bounded patience, controlled by a dominating
//!   infinite-server queue;
//! * [`engine::primitive_cftp`]: the all-states baseline.

pub mod combinatorics;
pub mod dominated;
pub mod engine;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod letter;
pub mod meter;
pub mod models;
pub mod randomness;
pub mod syncsampler;

pub use engine::{HorizonConfig, SampleReport};
pub use error::{Error, Result};
pub use graph::CompatibilityGraph;
pub use letter::Letter;
pub use meter::OperationMeter;
pub use models::{Policy, ProfileState, WordProfile};
pub use randomness::{ArrivalModel, InputEvent, InputTape, PatienceLaw};

//! Markov kernels of the matching model with reneging.
//!
//! * [`ProfileState`]: general bounded patience, items carry their real
//!   remaining patience.
//! * [`WordProfile`]: deterministic patience `p + ε` (optionally with
//!   latency slots), a length-`p` word indexed by arrival slot.

mod kernels;
mod policy;
mod profile;
mod word;

pub use kernels::{ProfileKernel, WordKernel};
pub use policy::Policy;
pub use profile::ProfileState;
pub use word::{all_word_states, all_words, events_from_letters, StepOutcome, WordProfile};

//! The attacker's side: black-box access to a target identifier, a
//! substitute model extracted from its labels, and a generator that perturbs
//! mutable traffic features to mislead it.

pub mod blackbox;
pub mod camouflage;
pub mod error;
pub mod substitute;

pub use blackbox::{EavesdropCorpus, Oracle, Victim};
pub use error::{AttackError, Result};

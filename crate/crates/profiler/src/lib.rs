//! Device profiling: identify devices from radio-level features that traffic
//! shaping cannot reach. The radio layer is simulated by a small
//! hardware/channel model.

pub mod classifier;
pub mod defense;
pub mod error;
pub mod signal;
pub mod store;

pub use classifier::{fit_profiler, MultiStageClassifier, ProfilerConfig};
pub use defense::{evaluate_defense, DefensePoint, DefenseReport};
pub use error::{ProfilerError, Result};
pub use signal::{synthesize_signature, HardwareIdentity, NoiseLevels, RfSignature};

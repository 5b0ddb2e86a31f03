//! Shared domain types, evaluation metrics and the classifier zoo of the
//! camolab traffic-camouflage laboratory.

pub mod dataset;
pub mod error;
pub mod learners;
pub mod metrics;
pub mod rng;
pub mod schema;

pub use dataset::{split_dataset, ClassSet, Dataset, DeviceClass};
pub use error::{Error, Result};
pub use learners::{Classifier, Hyperparams, Learner, Registry};
pub use metrics::{identification_rate, spoofing_rate, ConfusionCounts};
pub use schema::{FeatureSchema, FeatureSpec};

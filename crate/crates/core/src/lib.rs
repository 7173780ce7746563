//! Sleep-stage scoring from a single airflow channel using topological
//! summaries of breathing-pattern variability.

pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod learner;
pub mod persistence;
pub mod pipeline;
pub mod respiration;
pub mod signal;
pub mod stage;
pub mod stats;
pub mod vectorize;
mod union_find;

pub use dataio::{RunConfig, SubjectRecord, SynthConfig};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, FoldResult, Metrics};
pub use features::{FeatureConfig, FeatureMatrix, FeatureRow, FeatureSet};
pub use learner::{BoostConfig, BoostedModel};
pub use persistence::{FiltrationKind, PersistenceDiagram, PersistencePair, PointCloud};
pub use signal::{Spectrum, TimeSeries};
pub use stage::{SleepStage, Stage};

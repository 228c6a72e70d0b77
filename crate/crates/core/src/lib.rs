//! Concordance-index boosting for right-censored survival data.
//!
//! The crate derives linear marker combinations by component-wise gradient
//! boosting of a smoothed, inverse-probability-of-censoring weighted
//! concordance index, and evaluates them with Harrell's and Uno's estimators.
//!
//! Modules:
//!
//! - [`data`]: survival data model, CSV ingestion, censoring Kaplan-Meier curve
//! - [`concordance`]: hard C estimators, IPCW pair weights, smoothed risk and gradient
//! - [`boosting`]: component-wise boosting with simple linear base-learners
//! - [`selection`]: univariate marker ranking and top-k selection
//! - [`simulation`]: log-logistic AFT data generator with calibrated censoring
//! - [`harness`]: learning/test splits, external evaluation and the simulation study
//!
//! Orientation: the estimators treat larger values as *higher risk* (shorter
//! survival). A fitted [`LinearMarkerModel`] predicts a marker where larger
//! values mean *longer* survival; use [`LinearMarkerModel::risk_score`] when
//! handing its output to the estimators.

pub mod boosting;
pub mod concordance;
pub mod data;
mod error;
pub mod harness;
pub mod rng;
pub mod selection;
pub mod simulation;
pub mod stats;

pub use boosting::{fit, BoostConfig, BoostTrace, Booster, LinearMarkerModel};
pub use concordance::{harrell_c, uno_c, PairWeights, SmoothingParam};
pub use data::{
    censoring_km, load_dataset, ColumnSpec, KaplanMeierCurve, SurvivalDataset, SurvivalObservation,
};
pub use error::{Error, ErrorKind, Result};
pub use selection::{rank_markers, select_top, MarkerRanking};
pub use simulation::{generate_dataset, GeneratedData, SimulationConfig};

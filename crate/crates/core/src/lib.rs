//! Crime-count prediction from directed mobility graphs.
//!
//! The pipeline bins crimes and aggregated venue-to-venue check-in movements
//! onto a metric city grid, builds one directed weighted graph per
//! `(month, interval)`, derives region-risk (DIFFER) and contextual features,
//! and fits linear, random-forest and gradient-boosted regressors. A
//! feature-group ablation with paired t-tests over k-fold cross validation
//! measures which groups matter.

pub mod error;
pub mod features;
pub mod geo;
pub mod graph;
pub mod info;
pub mod ingest;
pub mod model;
pub mod risk;
pub mod seed;
pub mod synth;

pub use error::{Error, Result};
pub use features::{Dataset, FeatureGroup, FeatureRow, RowKey};
pub use geo::{CellId, GeoPoint, GridSpec, IntervalBounds, MonthId, TimeInterval};
pub use graph::{MobilityGraph, NodeFlows};
pub use ingest::{CellCounts, CrimeEvent, MovementRecord, OdAggregate, Reject, Venue};
pub use model::{EvalResult, ModelKind, Regressor};
pub use risk::{DifferFeatures, RiskTable};

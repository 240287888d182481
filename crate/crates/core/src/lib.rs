//! Deterministic 2D simulation and benchmark harness for redirected-walking
//! controllers.
//!
//! Worlds are polygonal [`Environment`]s grouped into physical/virtual
//! [`EnvironmentPair`]s. Three controllers are provided: an alignment-based
//! controller (ARC), steer-to-center (S2C) and artificial potential fields
//! (APF). Trials follow random virtual paths; campaigns run many of them and
//! summarize the results with robust statistics.

pub mod alignment;
pub mod campaign;
pub mod complexity;
pub mod controllers;
pub mod environments;
pub mod geometry;
pub mod metrics;
pub mod simulation;
pub mod stats;

pub use alignment::{alignment_score, ProximityTriple, SystemState, UserState};
pub use campaign::{
    run_campaign, run_campaign_to_dir, CampaignConfig, CampaignError, CampaignOutcome, Metric,
};
pub use complexity::{complexity_ratio, environment_complexity, ComplexityReport};
pub use controllers::{ControllerKind, GainCommand, ResetCommand};
pub use environments::{
    builtin_pair, load_pair, BuiltinPair, Environment, EnvironmentError, EnvironmentPair,
};
pub use geometry::{Point, Polygon};
pub use metrics::{compute_trial_metrics, CurvatureHistogram, HeatMap, TrialMetrics};
pub use simulation::{generate_path, run_trial, PathSpec, SimConfig, SimulationError, TrialRecord};

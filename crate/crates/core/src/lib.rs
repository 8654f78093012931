//! Maximum-entropy inverse reinforcement learning on 8-connected grid worlds,
//! with trajectory interpolation for gaps in recorded paths.

pub mod bench;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod generator;
pub mod grid;
pub mod io;
pub mod irl;
pub mod method;
pub mod metrics;
pub mod oracle;
pub mod planner;
pub mod plot;
pub mod reward;
pub mod visitation;

pub use error::{Error, Result};
pub use grid::{Action, GridSpec, State};
pub use method::{Arrival, Method, MethodKind, StateSpace};
pub use reward::{DistanceNorm, FeatureBank, FeatureMap, Theta};

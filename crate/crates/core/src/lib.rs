//! Pedestrian-aware route planning for e-scooters.
//!
//! Pedestrian tracks are extrapolated into short-horizon predictions, turned
//! into a potential-field energy surface, and descended by a gradient planner
//! that escapes local minima with random perturbations.

pub mod exec;
pub mod field;
pub mod pipeline;
pub mod planner;
pub mod prediction;
pub mod scenario;
pub mod viz;

pub use exec::Execution;
pub use field::{EnergySurface, FieldError, GridGeometry};
pub use planner::{plan, PlanError, PlannedRoute, Termination};
pub use prediction::{PredictedTrajectory, PredictionError};
pub use scenario::{FieldParams, PedestrianTrack, PlannerParams, Point2, Scenario, ScenarioError};

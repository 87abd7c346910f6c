//! Group distance bounding: a deterministic simulator for distance bounding
//! protocols between groups of provers and verifiers, with the estimators,
//! adversary models and closed-form analysis that go with it.

pub mod acceptance;
pub mod analysis;
pub mod crypto;
pub mod estimate;
pub mod geometry;
pub mod model;
pub mod proto;
pub mod scalar;
pub mod scenarios;
pub mod simkit;
pub mod threat;

pub use geometry::{distance, Point};
pub use model::{NodeId, NodeSpec, ProtocolConfig, ProtocolKind, Role, Scenario, ValidScenario};
pub use scalar::{Scalar, EPS_DETECT, EPS_DISTANCE, EPS_TIME, SPEED_OF_LIGHT};

//! Planar walking dynamics and gait analysis for a spring-tendon biped.
//!
//! The crate has two halves that share one set of domain types:
//!
//! * a deterministic fixed-step simulator of a sagittal-plane biped with
//!   passive spring-loaded ankles, CPG + PD hip/knee control, and a
//!   switchable passive-knee mode ([`sim`], [`cpg`], [`tendon`], [`model`]);
//! * an offline analysis pipeline that turns joint-angle logs into gait
//!   events, step-to-step transition momentum accounting, cost of
//!   transport, and paired statistics ([`signal`], [`events`],
//!   [`transition`], [`stats`], [`analysis`]).
//!
//! Both halves operate on the same trajectory schema ([`trajectory`]), so
//! externally recorded logs can be pushed through the identical pipeline.

pub mod analysis;
pub mod cpg;
pub mod events;
pub mod model;
pub mod signal;
pub mod sim;
pub mod stats;
pub mod tendon;
pub mod trajectory;
pub mod transition;

pub use cpg::{ActuationMode, Controller, CpgParams, MotorCommand, PdGains};
pub use model::{
    JointAngles, JointRates, RobotParams, SegmentId, SegmentKinematics, Side, TrunkState,
};
pub use tendon::{ElasticPower, PassiveTorques, TendonState};

/// 2-vector in the sagittal plane: x fore-aft (walking direction), y up.
pub type Vec2 = nalgebra::Vector2<f64>;

//! Sojourn-time bounds and traffic-light controller comparison for an
//! isolated intersection of two one-way streets.
//!
//! The kinematics ([`model`]) and closed-form bounds ([`bounds`]) are generic
//! over the scalar type; the simulator and experiment harness run in `f64`.

pub mod bounds;
pub mod cli;
pub mod config;
pub mod controllers;
pub mod experiments;
pub mod model;
pub mod num;
pub mod sim;
pub mod tolerances;

pub use num::Real;

pub type ModelParams64 = model::ModelParams<f64>;
pub type ModelParams32 = model::ModelParams<f32>;
pub type ValidParams64 = model::ValidParams<f64>;
pub type ValidParams32 = model::ValidParams<f32>;
pub type VehicleDynamics64 = model::VehicleDynamics<f64>;
pub type BoundsReport64 = bounds::BoundsReport<f64>;
pub type BoundsReport32 = bounds::BoundsReport<f32>;
pub type DelayDecomposition64 = bounds::DelayDecomposition<f64>;

//! Shared tolerance and default constants.
//!
//! Every threshold used by validation, the simulator and the acceptance
//! checks is defined here so no module carries its own magic numbers.

/// Relative agreement required between the closed-form kinematics and a
/// brute-force explicit integration of `m·v' + c1·v = F`.
pub const ODE_ORACLE_REL: f64 = 1e-5;

/// Largest explicit-integration step allowed for the ODE oracle (s).
pub const ODE_ORACLE_STEP: f64 = 1e-4;

/// `velocity_at(time_to_speed(v)) == v` round trip, relative.
pub const ROUND_TRIP_REL: f64 = 1e-9;

/// Second finite difference floor used for the convexity check.
pub const CONVEXITY_FLOOR: f64 = -1e-9;

/// Clearance slack (m) before the car-following rule intervenes; absorbs
/// rounding when two cars share an identical launch profile.
pub const CLEARANCE_SLACK: f64 = 1e-9;

/// Slack (s) when comparing elapsed phase time against a duration.
pub const PHASE_SLACK: f64 = 1e-9;

/// Default simulation step (s).
pub const DEFAULT_DT: f64 = 0.01;

/// Default safety horizon (s).
pub const DEFAULT_MAX_T: f64 = 3600.0;

/// Default number of cars in queue 2 for the comparative study.
pub const DEFAULT_M2: usize = 200;

/// Default replication count per (controller, R) cell.
pub const DEFAULT_SEEDS: u64 = 20;

/// Default ratio grid.
pub const DEFAULT_R_VALUES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

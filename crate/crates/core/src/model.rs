//! Vehicle, geometry and signal parameters plus the closed-form kinematics of
//! the linear-drag longitudinal model `m·v' + c1·v = F`.
//!
//! Every car has identical mass and driving force, so the whole fleet is
//! described by one [`VehicleDynamics`]. Solving the first-order equation from
//! an initial speed `v0` gives
//!
//! ```text
//! v(t) = K − (K − v0)·e^(−a·t),   K = F / c1,   a = c1 / m
//! ```
//!
//! and, from rest, the travelled distance `x(t) = K·t − (K/a)(1 − e^(−a·t))`.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("negative time {0} s")]
    NegativeTime(f64),
    #[error("initial speed {v0} m/s outside [0, K={k}]")]
    InitialSpeed { v0: f64, k: f64 },
    #[error("target speed {v} m/s is unreachable (terminal speed K={k})")]
    UnreachableSpeed { v: f64, k: f64 },
    #[error("negative target speed {0} m/s")]
    NegativeSpeed(f64),
}

/// Mass, driving force and linear drag of a car.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleDynamics<T> {
    /// kg
    pub mass: T,
    /// N
    pub force: T,
    /// Linear drag coefficient, N·s/m.
    pub c1: T,
}

impl<T: Real> VehicleDynamics<T> {
    pub fn new(mass: T, force: T, c1: T) -> Self {
        Self { mass, force, c1 }
    }

    /// Terminal speed `K = F / c1` (m/s).
    pub fn terminal_speed(&self) -> T {
        self.force / self.c1
    }

    /// Rate constant `a = c1 / m` (1/s).
    pub fn rate(&self) -> T {
        self.c1 / self.mass
    }
}

/// Lengths of the car, the intersection box and the communication zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry<T> {
    /// `L_C`, m.
    pub car_length: T,
    /// `L_I`, m.
    pub intersection_length: T,
    /// `L_Q`, m.
    pub queue_length: T,
    /// `d_S`, bumper-to-bumper clearance between two stopped cars, m.
    pub safe_distance: T,
}

impl<T: Real> Geometry<T> {
    /// Front-to-front spacing of a packed stopped queue, `L_C + d_S`.
    pub fn stopped_spacing(&self) -> T {
        self.car_length + self.safe_distance
    }

    /// `L_Q / (L_C + d_S)` before rounding.
    pub fn capacity_ratio(&self) -> T {
        self.queue_length / self.stopped_spacing()
    }

    /// Number of stopped cars that fit in the queue zone (`N`).
    ///
    /// Rounds to the nearest integer; [`ModelParams::validate`] rejects
    /// geometries where the ratio is not integral.
    pub fn capacity(&self) -> usize {
        self.capacity_ratio().round().to_usize().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedLimits<T> {
    /// `V_max`, m/s.
    pub v_max: T,
    /// `V_S`: predecessor speed at which a stopped follower starts, m/s.
    pub v_safe: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalTiming<T> {
    /// `T_Y`, s.
    pub yellow: T,
}

/// The complete symbol set of the intersection model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams<T> {
    pub dynamics: VehicleDynamics<T>,
    pub geometry: Geometry<T>,
    pub speeds: SpeedLimits<T>,
    pub signal: SignalTiming<T>,
}

/// One broken model invariant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonPositive { field: &'static str, value: f64 },
    NonFinite { field: &'static str },
    QueueNotMultiple { ratio: f64 },
    SafeSpeedNonPositive { v_safe: f64 },
    SafeSpeedAboveLimit { v_safe: f64, v_max: f64 },
    LimitNotBelowTerminal { v_max: f64, k: f64 },
    AccelerationTooLong { distance: f64, intersection: f64 },
    YellowTooShort { yellow: f64 },
    SpacingTimeAboveYellow { delta_t_t: f64, yellow: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositive { field, value } => {
                write!(f, "{field} > 0 (got {value})")
            }
            Violation::NonFinite { field } => write!(f, "{field} must be finite"),
            Violation::QueueNotMultiple { ratio } => write!(
                f,
                "L_Q integer multiple of L_C+d_S (L_Q/(L_C+d_S) = {ratio})"
            ),
            Violation::SafeSpeedNonPositive { v_safe } => write!(f, "V_S > 0 (got {v_safe})"),
            Violation::SafeSpeedAboveLimit { v_safe, v_max } => {
                write!(f, "V_S ≤ V_max (V_S = {v_safe}, V_max = {v_max})")
            }
            Violation::LimitNotBelowTerminal { v_max, k } => {
                write!(f, "V_max < K (V_max = {v_max}, K = {k})")
            }
            Violation::AccelerationTooLong {
                distance,
                intersection,
            } => write!(
                f,
                "acceleration distance ≤ L_I (needs {distance} m, L_I = {intersection} m)"
            ),
            Violation::YellowTooShort { yellow } => write!(f, "T_Y > 1 s (got {yellow})"),
            Violation::SpacingTimeAboveYellow { delta_t_t, yellow } => write!(
                f,
                "ΔT_t ≤ T_Y (ΔT_t = {delta_t_t} s, T_Y = {yellow} s)"
            ),
        }
    }
}

/// Every violation found by [`ModelParams::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} parameter violation(s)", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl Violations {
    pub fn iter(&self) -> impl Iterator<Item = &Violation> {
        self.0.iter()
    }
}

/// Parameters that passed [`ModelParams::validate`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ValidParams<T>(ModelParams<T>);

impl<T> std::ops::Deref for ValidParams<T> {
    type Target = ModelParams<T>;

    fn deref(&self) -> &ModelParams<T> {
        &self.0
    }
}

impl<T: Real> ValidParams<T> {
    pub fn into_inner(self) -> ModelParams<T> {
        self.0
    }

    /// Queue capacity `N`.
    pub fn capacity(&self) -> usize {
        self.0.geometry.capacity()
    }
}

impl<T: Real> ModelParams<T> {
    /// The reference parameter set of the bundled experiment configuration
    /// (`V_S = V_max / 2`).
    pub fn baseline() -> Self {
        let v_max = T::lit(13.3);
        Self {
            dynamics: VehicleDynamics::new(T::lit(1500.0), T::lit(44444.0), T::lit(1000.0)),
            geometry: Geometry {
                car_length: T::lit(4.0),
                intersection_length: T::lit(25.0),
                queue_length: T::lit(100.0),
                safe_distance: T::lit(1.0),
            },
            speeds: SpeedLimits {
                v_max,
                v_safe: v_max / T::lit(2.0),
            },
            signal: SignalTiming { yellow: T::lit(3.0) },
        }
    }

    /// Checks every invariant and returns all violations, not just the first.
    pub fn validate(self) -> Result<ValidParams<T>, Violations> {
        let mut out = Vec::new();
        let d = &self.dynamics;
        let g = &self.geometry;
        let s = &self.speeds;

        let positives = [
            ("m", d.mass),
            ("F", d.force),
            ("c1", d.c1),
            ("L_C", g.car_length),
            ("L_I", g.intersection_length),
            ("L_Q", g.queue_length),
            ("d_S", g.safe_distance),
            ("V_max", s.v_max),
            ("T_Y", self.signal.yellow),
        ];
        let mut all_finite = true;
        for (field, value) in positives.iter().copied().chain([("V_S", s.v_safe)]) {
            if !value.is_finite() {
                out.push(Violation::NonFinite { field });
                all_finite = false;
            }
        }
        if !all_finite {
            return Err(Violations(out));
        }
        for (field, value) in positives {
            if value <= T::zero() {
                out.push(Violation::NonPositive {
                    field,
                    value: f(value),
                });
            }
        }
        let lengths_ok = g.car_length > T::zero()
            && g.safe_distance > T::zero()
            && g.queue_length > T::zero();
        if lengths_ok {
            let ratio = g.capacity_ratio();
            let nearest = ratio.round();
            if nearest < T::one() || (ratio - nearest).abs() > T::structural_tol() * ratio {
                out.push(Violation::QueueNotMultiple { ratio: f(ratio) });
            }
        }

        if s.v_safe <= T::zero() {
            out.push(Violation::SafeSpeedNonPositive { v_safe: f(s.v_safe) });
        }
        if s.v_safe > s.v_max {
            out.push(Violation::SafeSpeedAboveLimit {
                v_safe: f(s.v_safe),
                v_max: f(s.v_max),
            });
        }
        let dyn_ok = d.mass > T::zero() && d.force > T::zero() && d.c1 > T::zero();
        let k = d.terminal_speed();
        let limit_ok = dyn_ok && s.v_max > T::zero() && s.v_max < k;
        if dyn_ok && s.v_max >= k {
            out.push(Violation::LimitNotBelowTerminal {
                v_max: f(s.v_max),
                k: f(k),
            });
        }
        if limit_ok {
            let distance = acceleration_distance(d, s.v_max);
            if distance > g.intersection_length {
                out.push(Violation::AccelerationTooLong {
                    distance: f(distance),
                    intersection: f(g.intersection_length),
                });
            }
        }

        if self.signal.yellow <= T::one() {
            out.push(Violation::YellowTooShort {
                yellow: f(self.signal.yellow),
            });
        }
        if s.v_max > T::zero() {
            let delta_t_t = g.stopped_spacing() / s.v_max;
            if delta_t_t > self.signal.yellow {
                out.push(Violation::SpacingTimeAboveYellow {
                    delta_t_t: f(delta_t_t),
                    yellow: f(self.signal.yellow),
                });
            }
        }

        if out.is_empty() {
            Ok(ValidParams(self))
        } else {
            Err(Violations(out))
        }
    }
}

fn f<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Speed after `t` seconds of full-force acceleration from `v0`.
pub fn velocity_at<T: Real>(dyn_: &VehicleDynamics<T>, v0: T, t: T) -> Result<T, ModelError> {
    let k = dyn_.terminal_speed();
    if t < T::zero() {
        return Err(ModelError::NegativeTime(f(t)));
    }
    if v0 < T::zero() || v0 > k {
        return Err(ModelError::InitialSpeed { v0: f(v0), k: f(k) });
    }
    Ok(velocity_unchecked(dyn_, v0, t))
}

#[inline]
pub(crate) fn velocity_unchecked<T: Real>(dyn_: &VehicleDynamics<T>, v0: T, t: T) -> T {
    let k = dyn_.terminal_speed();
    k - (k - v0) * (-dyn_.rate() * t).exp()
}

/// Distance covered in `t` seconds when starting from rest.
pub fn distance_at<T: Real>(dyn_: &VehicleDynamics<T>, t: T) -> Result<T, ModelError> {
    if t < T::zero() {
        return Err(ModelError::NegativeTime(f(t)));
    }
    let k = dyn_.terminal_speed();
    let a = dyn_.rate();
    // exp_m1 keeps the small-t regime accurate: 1 − e^(−at) = −expm1(−at).
    Ok(k * t + (k / a) * (-a * t).exp_m1())
}

/// Time to accelerate from rest to `v`.
pub fn time_to_speed<T: Real>(dyn_: &VehicleDynamics<T>, v: T) -> Result<T, ModelError> {
    time_between_speeds(dyn_, T::zero(), v)
}

/// Time to accelerate from `v0` to `v` (zero when `v ≤ v0`).
pub fn time_between_speeds<T: Real>(
    dyn_: &VehicleDynamics<T>,
    v0: T,
    v: T,
) -> Result<T, ModelError> {
    let k = dyn_.terminal_speed();
    if v < T::zero() {
        return Err(ModelError::NegativeSpeed(f(v)));
    }
    if v >= k {
        return Err(ModelError::UnreachableSpeed { v: f(v), k: f(k) });
    }
    if v0 < T::zero() || v0 > k {
        return Err(ModelError::InitialSpeed { v0: f(v0), k: f(k) });
    }
    if v <= v0 {
        return Ok(T::zero());
    }
    Ok(((k - v0).ln() - (k - v).ln()) / dyn_.rate())
}

/// Distance covered from rest while reaching `v`: `K·t_v − v/a`.
pub fn acceleration_distance<T: Real>(dyn_: &VehicleDynamics<T>, v: T) -> T {
    let k = dyn_.terminal_speed();
    let a = dyn_.rate();
    let t = ((k).ln() - (k - v).ln()) / a;
    k * t - v / a
}

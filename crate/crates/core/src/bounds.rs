//! Closed-form best-case and worst-case sojourn bounds.
//!
//! A queue of `N` stopped cars released by a green light discharges with a
//! fixed cadence: each follower waits `ΔT_w` for its predecessor to reach the
//! safe speed and then covers the extra `L_C + d_S` of spacing at `V_max`,
//! adding `ΔT_t`. The departure time of the `i`-th car is therefore affine in
//! `i`, and serving a full queue in one green period is never worse than
//! splitting it across several (each extra split costs a yellow interval plus
//! one more acceleration transient).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{acceleration_distance, ModelParams};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BoundsError {
    #[error("queue position {index} outside 1..={capacity}")]
    PositionOutOfRange { index: usize, capacity: usize },
    #[error("partition is empty")]
    EmptyPartition,
    #[error("partition contains a zero-sized part")]
    ZeroPart,
    #[error("partition sums to {sum}, expected {expected}")]
    PartitionSum { sum: usize, expected: usize },
    #[error("{cars} cars exceed queue capacity {capacity}")]
    TooManyCars { cars: usize, capacity: usize },
    #[error("outside-car position must be at least 1")]
    OutsidePosition,
}

/// Departure time of one queued car split into wait, acceleration and
/// cruise components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayDecomposition<T> {
    /// Queue position, 1 = closest to the stop line.
    pub index: usize,
    /// `T_{i,w}`: waiting for predecessors to reach `V_S`.
    pub wait: T,
    /// `T_{i,a}`: own acceleration to `V_max`.
    pub accel: T,
    /// `T_{i,t}`: cruise through the rest of the queue and the box.
    pub travel: T,
    pub total: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport<T> {
    pub d_min: T,
    pub d_max: T,
    pub t_1: T,
    pub t_n: T,
    pub delta_t_w: T,
    pub delta_t_t: T,
    pub mu_max: T,
}

/// `ΔT_w = (1/a)[ln K − ln(K − V_S)]`.
pub fn delta_t_w<T: Real>(p: &ModelParams<T>) -> T {
    time_from_rest(p, p.speeds.v_safe)
}

/// `ΔT_t = (L_C + d_S) / V_max`.
pub fn delta_t_t<T: Real>(p: &ModelParams<T>) -> T {
    p.geometry.stopped_spacing() / p.speeds.v_max
}

/// `T_{1,a}`: acceleration time from rest to `V_max`.
pub fn accel_time<T: Real>(p: &ModelParams<T>) -> T {
    time_from_rest(p, p.speeds.v_max)
}

/// `T_{1,t}`: time the head car cruises at `V_max` through the rest of the box.
pub fn head_cruise_time<T: Real>(p: &ModelParams<T>) -> T {
    let x = acceleration_distance(&p.dynamics, p.speeds.v_max);
    (p.geometry.intersection_length - x) / p.speeds.v_max
}

fn time_from_rest<T: Real>(p: &ModelParams<T>, v: T) -> T {
    let k = p.dynamics.terminal_speed();
    (k.ln() - (k - v).ln()) / p.dynamics.rate()
}

/// Departure-time decomposition without the `i ≤ N` range check.
fn decomposition<T: Real>(p: &ModelParams<T>, index: usize) -> DelayDecomposition<T> {
    let before = T::from_count(index - 1);
    let wait = before * delta_t_w(p);
    let accel = accel_time(p);
    let travel = before * delta_t_t(p) + head_cruise_time(p);
    DelayDecomposition {
        index,
        wait,
        accel,
        travel,
        total: wait + accel + travel,
    }
}

/// Time for the `i`-th stopped car (1-based) to clear the intersection after
/// the green turns on and stays on.
pub fn departure_time<T: Real>(
    p: &ModelParams<T>,
    index: usize,
) -> Result<DelayDecomposition<T>, BoundsError> {
    let capacity = p.geometry.capacity();
    if index == 0 || index > capacity {
        return Err(BoundsError::PositionOutOfRange { index, capacity });
    }
    Ok(decomposition(p, index))
}

/// Extra time needed to serve `cars` queued cars in the green periods given by
/// `parts` instead of a single one: `Σ T_{n_j} + (M−1)·T_Y − T_i`.
///
/// Evaluated through the closed form, which depends only on the number of
/// parts `M`.
pub fn green_split_penalty<T: Real>(
    p: &ModelParams<T>,
    cars: usize,
    parts: &[usize],
) -> Result<T, BoundsError> {
    if parts.is_empty() {
        return Err(BoundsError::EmptyPartition);
    }
    if parts.iter().any(|&n| n == 0) {
        return Err(BoundsError::ZeroPart);
    }
    let sum: usize = parts.iter().sum();
    if sum != cars {
        return Err(BoundsError::PartitionSum {
            sum,
            expected: cars,
        });
    }
    let capacity = p.geometry.capacity();
    if cars > capacity {
        return Err(BoundsError::TooManyCars { cars, capacity });
    }
    let extra = T::from_count(parts.len() - 1);
    Ok(extra * (accel_time(p) - delta_t_w(p))
        + extra * (head_cruise_time(p) - delta_t_t(p))
        + extra * p.signal.yellow)
}

/// Sojourn of the `i`-th car waiting outside the zone when its queue's green
/// begins under full-queue alternation, given its zone-entry delay `t_iq`
/// (measured from when it starts to accelerate):
/// `2T_N + 2T_Y − (N+i−1)ΔT_w − T_{i,q} + T_i`.
pub fn outside_car_sojourn<T: Real>(
    p: &ModelParams<T>,
    index: usize,
    t_iq: T,
) -> Result<T, BoundsError> {
    if index == 0 {
        return Err(BoundsError::OutsidePosition);
    }
    let n = p.geometry.capacity();
    let t_n = decomposition(p, n.max(1)).total;
    let two = T::lit(2.0);
    Ok(two * t_n + two * p.signal.yellow
        - T::from_count(n + index - 1) * delta_t_w(p)
        - t_iq
        + decomposition(p, index).total)
}

/// Free-flow sojourn `(L_Q + L_I) / V_max`.
pub fn d_min<T: Real>(p: &ModelParams<T>) -> T {
    (p.geometry.queue_length + p.geometry.intersection_length) / p.speeds.v_max
}

/// Worst-case sojourn under saturation, `2T_N + 2T_Y − N·ΔT_w + T_1`.
pub fn d_max<T: Real>(p: &ModelParams<T>) -> T {
    let n = p.geometry.capacity().max(1);
    let two = T::lit(2.0);
    two * decomposition(p, n).total + two * p.signal.yellow
        - T::from_count(n) * delta_t_w(p)
        + decomposition(p, 1).total
}

/// Saturation service rate of one queue: a platoon at `V_max` with
/// front-to-front spacing `L_C + d_S` (cars/s).
pub fn mu_max<T: Real>(p: &ModelParams<T>) -> T {
    p.speeds.v_max / p.geometry.stopped_spacing()
}

pub fn bounds_report<T: Real>(p: &ModelParams<T>) -> BoundsReport<T> {
    let n = p.geometry.capacity().max(1);
    BoundsReport {
        d_min: d_min(p),
        d_max: d_max(p),
        t_1: decomposition(p, 1).total,
        t_n: decomposition(p, n).total,
        delta_t_w: delta_t_w(p),
        delta_t_t: delta_t_t(p),
        mu_max: mu_max(p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{time_to_speed, velocity_at};

    fn base() -> ModelParams<f64> {
        ModelParams::baseline()
    }

    #[test]
    fn delta_t_w_examples() {
        let p = base();
        let w = delta_t_w(&p);
        assert!((w - 0.2432).abs() < 5e-4, "{w}");
        // bisection oracle
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if velocity_at(&p.dynamics, 0.0, mid).unwrap() < p.speeds.v_safe {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((w - lo).abs() < 1e-9);
        assert_eq!(w, time_to_speed(&p.dynamics, p.speeds.v_safe).unwrap());

        let mut q = base();
        q.speeds.v_safe = 0.0;
        assert_eq!(delta_t_w(&q), 0.0);
        q.speeds.v_safe = q.speeds.v_max;
        assert_eq!(delta_t_w(&q), accel_time(&q));
    }

    #[test]
    fn delta_t_t_examples() {
        let p = base();
        assert_eq!(delta_t_t(&p), 5.0 / 13.3);
        assert!((delta_t_t(&p) - 0.3759).abs() < 1e-4);
        let mut q = base();
        q.geometry.car_length = 0.0;
        q.geometry.safe_distance = 0.0;
        assert_eq!(delta_t_t(&q), 0.0);
        let mut q = base();
        q.speeds.v_max *= 2.0;
        assert!((delta_t_t(&q) - delta_t_t(&p) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn departure_time_examples() {
        let p = base();
        let d1 = departure_time(&p, 1).unwrap();
        assert_eq!(d1.wait, 0.0);
        assert!((d1.accel - 0.5334).abs() < 5e-4);
        assert!((d1.travel - 1.5971).abs() < 5e-4);
        assert!((d1.total - 2.131).abs() < 5e-3, "{}", d1.total);
        let d20 = departure_time(&p, 20).unwrap();
        assert!((d20.total - 13.894).abs() < 0.01, "{}", d20.total);
        let d2 = departure_time(&p, 2).unwrap();
        assert!((d2.total - d1.total - 0.6191).abs() < 1e-4);
        assert_eq!(d2.total, d2.wait + d2.accel + d2.travel);
        assert!(matches!(
            departure_time(&p, 0),
            Err(BoundsError::PositionOutOfRange { .. })
        ));
        assert!(departure_time(&p, 21).is_err());
    }

    #[test]
    fn split_penalty_examples() {
        let p = base();
        assert_eq!(green_split_penalty(&p, 5, &[5]).unwrap(), 0.0);
        let two = green_split_penalty(&p, 2, &[1, 1]).unwrap();
        assert!((two - 4.511).abs() < 0.01, "{two}");
        let direct = 2.0 * departure_time(&p, 1).unwrap().total + p.signal.yellow
            - departure_time(&p, 2).unwrap().total;
        assert!((two - direct).abs() < 1e-12);
        let halves = green_split_penalty(&p, 20, &[10, 10]).unwrap();
        assert!((halves - two).abs() < 1e-12);
        let direct = 2.0 * departure_time(&p, 10).unwrap().total + p.signal.yellow
            - departure_time(&p, 20).unwrap().total;
        assert!((halves - direct).abs() < 1e-12);
    }

    #[test]
    fn split_penalty_rejects_malformed() {
        let p = base();
        assert_eq!(
            green_split_penalty(&p, 0, &[]),
            Err(BoundsError::EmptyPartition)
        );
        assert_eq!(
            green_split_penalty(&p, 3, &[3, 0]),
            Err(BoundsError::ZeroPart)
        );
        assert!(matches!(
            green_split_penalty(&p, 4, &[1, 2]),
            Err(BoundsError::PartitionSum { .. })
        ));
        assert!(matches!(
            green_split_penalty(&p, 21, &[20, 1]),
            Err(BoundsError::TooManyCars { .. })
        ));
    }

    #[test]
    fn outside_car_examples() {
        let p = base();
        let s1 = outside_car_sojourn(&p, 1, 0.0).unwrap();
        assert!((s1 - 31.05).abs() < 0.01, "{s1}");
        let dtt = delta_t_t(&p);
        let s2 = outside_car_sojourn(&p, 2, dtt).unwrap();
        assert!((s2 - s1).abs() < 1e-12);
        let s2 = outside_car_sojourn(&p, 2, 0.5).unwrap();
        assert!((s2 - s1 - (-0.124)).abs() < 1e-3, "{}", s2 - s1);
        assert!(outside_car_sojourn(&p, 1, 1.0).unwrap() < s1);
        assert!(outside_car_sojourn(&p, 0, 0.0).is_err());
    }

    #[test]
    fn d_min_examples() {
        let p = base();
        let d = d_min(&p);
        assert!((d - 9.398).abs() < 5e-4);
        assert_eq!(format!("{d:.2}"), "9.40");
        let mut q = base();
        q.geometry.queue_length = 0.0;
        assert_eq!(d_min(&q), 25.0 / 13.3);
        let mut q = base();
        q.geometry.queue_length *= 2.0;
        q.geometry.intersection_length *= 2.0;
        assert!((d_min(&q) - 2.0 * d).abs() < 1e-12);
    }

    #[test]
    fn d_max_examples() {
        let p = base();
        let d = d_max(&p);
        assert!((d - 31.05).abs() < 0.01, "{d}");
        assert_eq!(d, outside_car_sojourn(&p, 1, 0.0).unwrap());
        assert!(d > d_min(&p));

        // N = 1: 2T_1 + 2T_Y − ΔT_w + T_1
        let mut q = base();
        q.geometry.queue_length = 5.0;
        let t1 = departure_time(&q, 1).unwrap().total;
        let expect = 3.0 * t1 + 2.0 * q.signal.yellow - delta_t_w(&q);
        assert!((d_max(&q) - expect).abs() < 1e-12);
    }

    #[test]
    fn mu_max_examples() {
        let p = base();
        assert!((mu_max(&p) - 2.66).abs() < 1e-12);
        let mut q = base();
        q.speeds.v_max = 0.0;
        assert_eq!(mu_max(&q), 0.0);
        let mut q = base();
        q.geometry.car_length /= 2.0;
        q.geometry.safe_distance /= 2.0;
        assert!((mu_max(&q) - 2.0 * mu_max(&p)).abs() < 1e-12);
    }

    #[test]
    fn report_examples() {
        let p = base();
        let r = bounds_report(&p);
        assert!((r.d_min - 9.40).abs() < 0.005);
        assert!((r.d_max - 31.05).abs() < 0.01);
        assert!((r.t_1 - 2.131).abs() < 0.005);
        assert!((r.t_n - 13.894).abs() < 0.01);
        assert!((r.delta_t_w - 0.2432).abs() < 5e-4);
        assert!((r.delta_t_t - 0.3759).abs() < 1e-4);
        assert!((r.mu_max - 2.66).abs() < 1e-12);
        let again = bounds_report(&p);
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
        assert_eq!(r.d_max, outside_car_sojourn(&p, 1, 0.0).unwrap());
    }

    #[test]
    fn single_precision_agrees() {
        let r32 = bounds_report(&ModelParams::<f32>::baseline());
        let r64 = bounds_report(&ModelParams::<f64>::baseline());
        assert!((r32.d_max as f64 - r64.d_max).abs() < 1e-3);
        assert!((r32.d_min as f64 - r64.d_min).abs() < 1e-4);
    }
}

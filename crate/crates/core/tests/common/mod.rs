#![allow(dead_code)]

use intersection_qos::controllers::{Command, ShippedController};
use intersection_qos::model::{Geometry, ModelParams, SignalTiming, SpeedLimits, VehicleDynamics};
use intersection_qos::sim::{InitialState, Phase, WorldState};
use intersection_qos::{ValidParams64, VehicleDynamics64};
use proptest::prelude::*;

pub const DT: f64 = 0.01;

pub fn baseline() -> ValidParams64 {
    ModelParams::baseline().validate().unwrap()
}

/// Random parameter sets that pass validation, with queue capacity in
/// `min_n..=max_n`.
pub fn valid_params(min_n: usize, max_n: usize) -> impl Strategy<Value = ValidParams64> {
    (
        (1000.0..2500.0f64, 3.0e4..6.0e4f64, 800.0..1200.0f64),
        (3.0..5.0f64, 20.0..40.0f64, 0.5..2.0f64, min_n..=max_n),
        (8.0..15.0f64, 0.2..0.9f64),
        2.0..5.0f64,
    )
        .prop_filter_map(
            "invariants",
            |((m, f, c1), (lc, li, ds, n), (v_max, vs_frac), yellow)| {
                ModelParams {
                    dynamics: VehicleDynamics::new(m, f, c1),
                    geometry: Geometry {
                        car_length: lc,
                        intersection_length: li,
                        queue_length: n as f64 * (lc + ds),
                        safe_distance: ds,
                    },
                    speeds: SpeedLimits {
                        v_max,
                        v_safe: vs_frac * v_max,
                    },
                    signal: SignalTiming { yellow },
                }
                .validate()
                .ok()
            },
        )
}

/// Classic fourth-order Runge-Kutta on `m·v' = F − c1·v`, `x' = v`.
pub fn integrate(d: &VehicleDynamics64, v0: f64, t_end: f64, h: f64) -> (f64, f64) {
    let acc = |v: f64| (d.force - d.c1 * v) / d.mass;
    let steps = (t_end / h).round() as usize;
    let h = t_end / steps.max(1) as f64;
    let (mut x, mut v) = (0.0, v0);
    for _ in 0..steps {
        let (k1v, k1x) = (acc(v), v);
        let (k2v, k2x) = (acc(v + 0.5 * h * k1v), v + 0.5 * h * k1v);
        let (k3v, k3x) = (acc(v + 0.5 * h * k2v), v + 0.5 * h * k2v);
        let (k4v, k4x) = (acc(v + h * k3v), v + h * k3v);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    }
    (x, v)
}

/// First time the integrated speed from rest reaches `target`, linearly
/// interpolated inside the crossing step.
pub fn integrated_time_to(d: &VehicleDynamics64, target: f64, h: f64) -> f64 {
    let acc = |v: f64| (d.force - d.c1 * v) / d.mass;
    let (mut t, mut v) = (0.0, 0.0);
    loop {
        let k1 = acc(v);
        let k2 = acc(v + 0.5 * h * k1);
        let k3 = acc(v + 0.5 * h * k2);
        let k4 = acc(v + h * k3);
        let next = v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if next >= target {
            return t + h * (target - v) / (next - v);
        }
        v = next;
        t += h;
    }
}

#[derive(Debug, Default)]
pub struct Checked {
    pub departures: [Vec<u32>; 2],
    pub sojourns: Vec<f64>,
    pub entries: Vec<f64>,
    pub steps: u64,
    pub live: bool,
}

/// Steps a world to completion, checking collision, ordering, speed-box and
/// monotone-motion invariants after every step, and the adaptive
/// controller's switching rules before every step.
pub fn run_checked(p: &ValidParams64, init: &InitialState, ctrl: &ShippedController, max_t: f64) -> Checked {
    let mut world = WorldState::new(p, init, 0, false).unwrap();
    let controller = *ctrl;
    let spacing = p.geometry.stopped_spacing();
    let horizon = (max_t / DT).round() as u64;
    let mut out = Checked::default();
    let mut seen_departed = 0;
    while world.active_cars() > 0 && world.steps < horizon {
        let obs = world.observe(p);
        let cmd = controller.decide(&obs);
        if let ShippedController::Adaptive { trigger_age, .. } = *ctrl {
            if let (Phase::Green, Some(g)) = (obs.light.phase, obs.light.green_dir) {
                let red = g.other();
                let margin = ctrl.deadline_miss_margin(&obs).unwrap();
                if margin <= 0.0 && obs.has_waiting(red) {
                    assert!(matches!(cmd, Command::BeginSwitch { .. }), "deadline passed without a switch at t={}", obs.t);
                }
                let idle = obs.cars(g).is_empty() && obs.box_clear();
                if idle && obs.has_waiting(red) {
                    assert!(matches!(cmd, Command::BeginSwitch { target, .. } if target == red), "idle green held at t={}", obs.t);
                }
                if let Command::BeginSwitch { .. } = cmd {
                    assert!(idle || obs.max_red_wait().unwrap_or(f64::NEG_INFINITY) >= trigger_age);
                }
            }
        }
        let before: Vec<Vec<(u32, f64)>> =
            world.queues.iter().map(|q| q.iter().map(|c| (c.id, c.front_pos)).collect()).collect();
        world.step(p, cmd, DT).unwrap();

        for (qi, q) in world.queues.iter().enumerate() {
            for c in q {
                assert!(c.vel >= 0.0 && c.vel <= p.speeds.v_max + 1e-9, "car {} speed {}", c.id, c.vel);
                if let Some(&(_, x0)) = before[qi].iter().find(|(id, _)| *id == c.id) {
                    assert!(c.front_pos >= x0, "car {} moved backwards", c.id);
                }
            }
            for pair in q.windows(2) {
                assert!(pair[0].id < pair[1].id, "queue reordered");
                let gap = pair[0].front_pos - pair[1].front_pos;
                assert!(gap >= spacing - 1e-9, "cars {} and {} are {gap} m apart", pair[0].id, pair[1].id);
            }
        }
        for c in &world.departed[seen_departed..] {
            out.departures[c.queue.index()].push(c.id);
            out.sojourns.push(c.sojourn().unwrap());
            out.entries.push(c.t_enter_zone.unwrap());
        }
        seen_departed = world.departed.len();
    }
    out.steps = world.steps;
    out.live = world.active_cars() == 0;
    out
}

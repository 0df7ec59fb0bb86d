//! Controller interface and the shipped traffic-light controllers.
//!
//! A controller sees an [`Observation`] each step (only cars inside the
//! communication zone) and answers with a [`Command`]. The phase machine owns
//! all timing: a switch request while green starts the yellow, and the
//! opposite green follows after exactly `T_Y`.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

use crate::bounds;
use crate::sim::{LightPhase, Phase, QueueId};
use crate::tolerances::PHASE_SLACK;
use crate::ValidParams64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedCar {
    pub id: u32,
    /// Time since the car entered the zone.
    pub wait_age: f64,
    pub front_pos: f64,
    pub vel: f64,
}

/// What a controller may see: the light state plus every non-departed car
/// whose front is strictly past `−L_Q`. Per-queue lists are head first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    pub light: LightPhase,
    pub queues: [Vec<ObservedCar>; 2],
    /// Whether a car of each queue is inside the box `(0, L_I)`.
    pub box_occupied: [bool; 2],
}

impl Observation {
    pub fn cars(&self, q: QueueId) -> &[ObservedCar] {
        &self.queues[q.index()]
    }

    /// Cars that have not yet crossed the stop line.
    pub fn waiting(&self, q: QueueId) -> impl Iterator<Item = &ObservedCar> {
        self.cars(q).iter().filter(|c| c.front_pos <= 0.0)
    }

    pub fn has_waiting(&self, q: QueueId) -> bool {
        self.waiting(q).next().is_some()
    }

    pub fn box_clear(&self) -> bool {
        !self.box_occupied.iter().any(|&b| b)
    }

    /// Queue holding the waiting car nearest the stop line; ties go to queue 1.
    pub fn closest_waiting(&self) -> Option<QueueId> {
        let mut best: Option<(QueueId, f64)> = None;
        for q in QueueId::ALL {
            if let Some(head) = self.waiting(q).next() {
                match best {
                    Some((_, pos)) if pos >= head.front_pos => {}
                    _ => best = Some((q, head.front_pos)),
                }
            }
        }
        best.map(|(q, _)| q)
    }

    /// Directions currently held at red.
    pub fn red_dirs(&self) -> Vec<QueueId> {
        match (self.light.phase, self.light.green_dir) {
            (Phase::AllRedNone, _) | (_, None) => QueueId::ALL.to_vec(),
            (_, Some(d)) => vec![d.other()],
        }
    }

    /// Largest wait age among cars of red directions.
    pub fn max_red_wait(&self) -> Option<f64> {
        self.red_dirs()
            .into_iter()
            .flat_map(|q| self.waiting(q))
            .map(|c| c.wait_age)
            .fold(None, |acc: Option<f64>, w| Some(acc.map_or(w, |a| a.max(w))))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchReason {
    /// Green direction idle, other queue waiting.
    Idle,
    /// A red-direction car is about to miss its deadline.
    Deadline,
    /// Fixed green duration elapsed.
    Cycle,
    /// First green of the run.
    Start,
    /// The batch served by the current green has cleared the stop line.
    Batch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Command {
    Hold,
    BeginSwitch {
        target: QueueId,
        reason: SwitchReason,
    },
}

pub trait Controller {
    fn decide(&mut self, obs: &Observation) -> Command;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    AdaptiveDeadline,
    #[serde(rename = "fixed_cycle_1")]
    FixedCycle1,
    #[serde(rename = "fixed_cycle_2")]
    FixedCycle2,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [
        ControllerKind::AdaptiveDeadline,
        ControllerKind::FixedCycle1,
        ControllerKind::FixedCycle2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::AdaptiveDeadline => "adaptive_deadline",
            ControllerKind::FixedCycle1 => "fixed_cycle_1",
            ControllerKind::FixedCycle2 => "fixed_cycle_2",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ControllerKind {
    type Err = ControllerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "adaptive_deadline" | "adaptive" => Ok(ControllerKind::AdaptiveDeadline),
            "fixed_cycle_1" | "fixed1" => Ok(ControllerKind::FixedCycle1),
            "fixed_cycle_2" | "fixed2" => Ok(ControllerKind::FixedCycle2),
            other => Err(ControllerError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("unknown controller `{0}` (expected adaptive_deadline, fixed_cycle_1 or fixed_cycle_2)")]
    UnknownKind(String),
    #[error("deadline {deadline} s below free-flow sojourn {d_min} s")]
    DeadlineTooShort { deadline: f64, d_min: f64 },
    #[error("ratio R = {0} outside (0, 1]")]
    Ratio(f64),
    #[error("green duration {0} s must be positive")]
    Green(f64),
    #[error("deadline margin is only defined for the adaptive controller")]
    NotAdaptive,
}

/// Controller configuration. Unset values resolve from the bounds: the
/// deadline to `D_max`, the cycle length to `T_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub kind: ControllerKind,
    /// Adaptive deadline `D` (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    /// Extra lead (s) subtracted from the deadline trigger.
    #[serde(default)]
    pub margin: f64,
    /// `R` for fixed_cycle_2; in sweeps the cell's ratio is used instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Fixed-cycle green length (s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle: Option<f64>,
    /// Treat cycle lengths as green + yellow instead of green only.
    #[serde(default)]
    pub yellow_included: bool,
}

impl ControllerSpec {
    pub fn new(kind: ControllerKind) -> Self {
        Self {
            kind,
            deadline: None,
            margin: 0.0,
            ratio: None,
            cycle: None,
            yellow_included: false,
        }
    }

    pub fn resolve(&self, params: &ValidParams64) -> Result<ShippedController, ControllerError> {
        let report = bounds::bounds_report(params);
        let yellow = params.signal.yellow;
        let cycle = self.cycle.unwrap_or(report.t_n);
        let green = |len: f64| -> Result<f64, ControllerError> {
            let g = if self.yellow_included { len - yellow } else { len };
            if g > 0.0 && g.is_finite() {
                Ok(g)
            } else {
                Err(ControllerError::Green(g))
            }
        };
        match self.kind {
            ControllerKind::AdaptiveDeadline => {
                let deadline = self.deadline.unwrap_or(report.d_max);
                if !(deadline >= report.d_min) {
                    return Err(ControllerError::DeadlineTooShort {
                        deadline,
                        d_min: report.d_min,
                    });
                }
                Ok(ShippedController::Adaptive {
                    deadline,
                    trigger_age: deadline - yellow - report.t_1 - self.margin,
                })
            }
            ControllerKind::FixedCycle1 => Ok(ShippedController::Fixed {
                green: [green(cycle)?, green(cycle)?],
            }),
            ControllerKind::FixedCycle2 => {
                let r = self.ratio.unwrap_or(1.0);
                if !(r > 0.0 && r <= 1.0) {
                    return Err(ControllerError::Ratio(r));
                }
                Ok(ShippedController::Fixed {
                    green: [green(r * cycle)?, green(cycle)?],
                })
            }
        }
    }
}

/// A shipped controller with its constants resolved against the parameters.
/// Decisions are pure functions of the observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ShippedController {
    Adaptive {
        deadline: f64,
        /// Wait age at which a red-direction car forces a switch,
        /// `D − T_Y − T_1 − margin`.
        trigger_age: f64,
    },
    Fixed {
        /// Green duration per queue (index 0 = queue 1).
        green: [f64; 2],
    },
}

impl ShippedController {
    pub fn decide(&self, obs: &Observation) -> Command {
        match *self {
            ShippedController::Adaptive { trigger_age, .. } => adaptive_decide(trigger_age, obs),
            ShippedController::Fixed { green } => fixed_decide(green, obs),
        }
    }

    /// Distance to the deadline trigger; negative once it has fired and
    /// `+∞` when no car waits at red.
    pub fn deadline_miss_margin(&self, obs: &Observation) -> Result<f64, ControllerError> {
        match *self {
            ShippedController::Adaptive { trigger_age, .. } => {
                Ok(obs.max_red_wait().map_or(f64::INFINITY, |w| trigger_age - w))
            }
            ShippedController::Fixed { .. } => Err(ControllerError::NotAdaptive),
        }
    }
}

impl Controller for ShippedController {
    fn decide(&mut self, obs: &Observation) -> Command {
        ShippedController::decide(self, obs)
    }
}

fn adaptive_decide(trigger_age: f64, obs: &Observation) -> Command {
    match (obs.light.phase, obs.light.green_dir) {
        (Phase::Yellow, _) => Command::Hold,
        (Phase::Green, Some(green)) => {
            let red = green.other();
            let busy = !obs.cars(green).is_empty() || !obs.box_clear();
            if !busy {
                return match obs.closest_waiting() {
                    Some(target) => Command::BeginSwitch {
                        target,
                        reason: SwitchReason::Idle,
                    },
                    None => Command::Hold,
                };
            }
            let pressing = obs.waiting(red).any(|c| c.wait_age >= trigger_age);
            if pressing {
                Command::BeginSwitch {
                    target: red,
                    reason: SwitchReason::Deadline,
                }
            } else {
                Command::Hold
            }
        }
        _ => match obs.closest_waiting() {
            Some(target) => Command::BeginSwitch {
                target,
                reason: SwitchReason::Start,
            },
            None => Command::Hold,
        },
    }
}

fn fixed_decide(green: [f64; 2], obs: &Observation) -> Command {
    match (obs.light.phase, obs.light.green_dir) {
        (Phase::Yellow, _) => Command::Hold,
        (Phase::Green, Some(dir)) => {
            if obs.t - obs.light.phase_start >= green[dir.index()] - PHASE_SLACK {
                Command::BeginSwitch {
                    target: dir.other(),
                    reason: SwitchReason::Cycle,
                }
            } else {
                Command::Hold
            }
        }
        _ => Command::BeginSwitch {
            target: QueueId::Two,
            reason: SwitchReason::Start,
        },
    }
}

/// Reference controller: green to one queue forever.
#[derive(Debug, Clone, Copy)]
pub struct ConstantGreen(pub QueueId);

impl Controller for ConstantGreen {
    fn decide(&mut self, obs: &Observation) -> Command {
        if obs.light.is_green(self.0) {
            Command::Hold
        } else {
            Command::BeginSwitch {
                target: self.0,
                reason: SwitchReason::Start,
            }
        }
    }
}

/// Reference controller for saturated traffic: each green serves exactly the
/// first `capacity` cars of its queue, then switches as soon as the last of
/// them has crossed the stop line.
#[derive(Debug, Clone)]
pub struct FullQueueAlternation {
    capacity: usize,
    first: QueueId,
    batch: Vec<u32>,
    batch_green_start: Option<f64>,
}

impl FullQueueAlternation {
    pub fn new(capacity: usize, first: QueueId) -> Self {
        Self {
            capacity,
            first,
            batch: Vec::new(),
            batch_green_start: None,
        }
    }
}

impl Controller for FullQueueAlternation {
    fn decide(&mut self, obs: &Observation) -> Command {
        let dir = match (obs.light.phase, obs.light.green_dir) {
            (Phase::Green, Some(d)) => d,
            (Phase::Yellow, _) => return Command::Hold,
            _ => {
                return Command::BeginSwitch {
                    target: self.first,
                    reason: SwitchReason::Start,
                }
            }
        };
        if self.batch_green_start != Some(obs.light.phase_start) {
            self.batch_green_start = Some(obs.light.phase_start);
            self.batch = obs
                .cars(dir)
                .iter()
                .take(self.capacity)
                .map(|c| c.id)
                .collect();
        }
        let cleared = self.batch.iter().all(|id| {
            obs.cars(dir)
                .iter()
                .find(|c| c.id == *id)
                .map_or(true, |c| c.front_pos > 0.0)
        });
        if cleared && !obs.cars(dir.other()).is_empty() {
            Command::BeginSwitch {
                target: dir.other(),
                reason: SwitchReason::Batch,
            }
        } else {
            Command::Hold
        }
    }
}

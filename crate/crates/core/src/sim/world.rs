use serde::Serialize;

use super::car::{Car, Motion, Profile, QueueId};
use super::light::LightPhase;
use super::trace::{Event, EventKind};
use super::{InitialState, SimError};
use crate::controllers::{Command, ObservedCar, Observation};
use crate::model::{time_between_speeds, velocity_unchecked};
use crate::tolerances::CLEARANCE_SLACK;
use crate::ValidParams64;

/// Tolerance for "front bumper sits on the stop line".
const AT_LINE: f64 = 1e-9;

/// Full simulation state. Cars of each queue are stored head first; departed
/// cars move to `departed` in departure order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    pub t: f64,
    pub steps: u64,
    pub queues: [Vec<Car>; 2],
    pub departed: Vec<Car>,
    pub light: LightPhase,
    pub rng_seed: u64,
    #[serde(skip)]
    pub(crate) events: Vec<Event>,
    #[serde(skip)]
    pub(crate) record_events: bool,
}

/// Post-update view of a car's predecessor.
#[derive(Clone, Copy)]
struct Lead {
    front_pos: f64,
    vel: f64,
    stopped: bool,
    profile: Profile,
}

impl WorldState {
    pub fn new(
        params: &ValidParams64,
        init: &InitialState,
        rng_seed: u64,
        record_events: bool,
    ) -> Result<Self, SimError> {
        init.check(params)?;
        let zone = -params.geometry.queue_length;
        let mut next_id = 0u32;
        let mut queues: [Vec<Car>; 2] = [Vec::new(), Vec::new()];
        let mut events = Vec::new();
        for q in QueueId::ALL {
            for ic in &init.queues[q.index()] {
                let stopped = ic.vel == 0.0;
                let car = Car {
                    id: next_id,
                    queue: q,
                    front_pos: ic.front_pos,
                    vel: ic.vel,
                    motion: if stopped { Motion::Stopped } else { Motion::Free },
                    t_enter_zone: (ic.front_pos > zone).then_some(0.0),
                    t_depart: None,
                    launch_origin: None,
                    profile: Profile {
                        origin: 0.0,
                        v0: ic.vel,
                    },
                };
                if record_events && car.t_enter_zone.is_some() {
                    events.push(Event::car(0.0, EventKind::ZoneEntry, &car));
                }
                queues[q.index()].push(car);
                next_id += 1;
            }
        }
        Ok(Self {
            t: 0.0,
            steps: 0,
            queues,
            departed: Vec::new(),
            light: LightPhase::default(),
            rng_seed,
            events,
            record_events,
        })
    }

    pub fn active_cars(&self) -> usize {
        self.queues.iter().map(Vec::len).sum()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// What a controller may see at the current instant.
    pub fn observe(&self, params: &ValidParams64) -> Observation {
        let zone = -params.geometry.queue_length;
        let exit = params.geometry.intersection_length;
        let mut queues: [Vec<ObservedCar>; 2] = [Vec::new(), Vec::new()];
        let mut box_occupied = [false; 2];
        for q in QueueId::ALL {
            for car in self.queues[q.index()].iter() {
                if car.front_pos <= zone {
                    break;
                }
                if car.front_pos > 0.0 && car.front_pos < exit {
                    box_occupied[q.index()] = true;
                }
                queues[q.index()].push(ObservedCar {
                    id: car.id,
                    wait_age: car.t_enter_zone.map_or(0.0, |t0| self.t - t0),
                    front_pos: car.front_pos,
                    vel: car.vel,
                });
            }
        }
        Observation {
            t: self.t,
            light: self.light,
            queues,
            box_occupied,
        }
    }

    /// Applies `cmd` to the phase machine at the current instant, advances
    /// every car by `dt`, then ends an expired yellow at the new instant.
    pub fn step(&mut self, params: &ValidParams64, cmd: Command, dt: f64) -> Result<(), SimError> {
        let t = self.t;
        if let Command::BeginSwitch { target, reason } = cmd {
            if self.light.begin_switch(target, t) && self.record_events {
                self.events.push(Event::phase(t, &self.light, Some(reason)));
            }
        }

        let t_end = (self.steps + 1) as f64 * dt;
        for q in QueueId::ALL {
            self.advance_queue(params, q, t, t_end)?;
        }
        self.steps += 1;
        self.t = t_end;

        if self.light.expire_yellow(self.t, params.signal.yellow) && self.record_events {
            self.events.push(Event::phase(self.t, &self.light, None));
        }
        Ok(())
    }

    fn advance_queue(
        &mut self,
        params: &ValidParams64,
        q: QueueId,
        t: f64,
        t_end: f64,
    ) -> Result<(), SimError> {
        let may_enter = self.light.may_enter(q);
        let zone = -params.geometry.queue_length;
        let exit = params.geometry.intersection_length;
        let cars = std::mem::take(&mut self.queues[q.index()]);
        let mut kept = Vec::with_capacity(cars.len());
        let mut lead: Option<Lead> = None;

        for mut car in cars {
            let before = car.front_pos;
            let was_stopped = car.is_stopped();
            advance_car(params, &mut car, lead, may_enter, t, t_end);

            if self.record_events {
                if was_stopped && !car.is_stopped() {
                    let origin = car.launch_origin.unwrap_or(t);
                    self.events.push(Event::car(origin, EventKind::Launch, &car));
                } else if !was_stopped && car.is_stopped() {
                    self.events.push(Event::car(t_end, EventKind::Stop, &car));
                }
            }
            if let Some(l) = lead {
                let spacing = l.front_pos - car.front_pos;
                if spacing < params.geometry.car_length - CLEARANCE_SLACK {
                    return Err(SimError::InvariantBreach(format!(
                        "overlap in queue {q} at t={t_end}: car {} is {spacing} m behind its predecessor",
                        car.id
                    )));
                }
            }
            if car.front_pos < before || car.vel < 0.0 || car.vel > params.speeds.v_max + 1e-9 {
                return Err(SimError::InvariantBreach(format!(
                    "car {} left the speed box or moved backwards at t={t_end} (v={}, x {} -> {})",
                    car.id, car.vel, before, car.front_pos
                )));
            }
            if car.t_enter_zone.is_none() && car.front_pos > zone {
                car.t_enter_zone = Some(t_end);
                if self.record_events {
                    self.events.push(Event::car(t_end, EventKind::ZoneEntry, &car));
                }
            }
            if car.front_pos >= exit {
                car.t_depart = Some(t_end);
                car.motion = Motion::Departed;
                if self.record_events {
                    self.events.push(Event::car(t_end, EventKind::Departure, &car));
                }
                self.departed.push(car);
                // Departed cars leave the road; the follower is unconstrained.
                lead = None;
                continue;
            }
            lead = Some(Lead {
                front_pos: car.front_pos,
                vel: car.vel,
                stopped: car.is_stopped(),
                profile: car.profile,
            });
            kept.push(car);
        }
        self.queues[q.index()] = kept;
        Ok(())
    }
}

/// Moves one car from `t` to `t_end` given its already-updated predecessor.
fn advance_car(
    params: &ValidParams64,
    car: &mut Car,
    lead: Option<Lead>,
    may_enter: bool,
    t: f64,
    t_end: f64,
) {
    let dynamics = &params.dynamics;
    let v_max = params.speeds.v_max;
    let v_safe = params.speeds.v_safe;

    if car.is_stopped() {
        let origin = match lead {
            None => {
                let held = car.front_pos >= -AT_LINE && car.front_pos <= 0.0 && !may_enter;
                (!held).then_some(t)
            }
            Some(l) if !l.stopped && l.vel >= v_safe => {
                // Exact instant the predecessor reached V_S on its profile.
                let reach = if l.profile.v0 < v_safe {
                    l.profile.origin
                        + time_between_speeds(dynamics, l.profile.v0, v_safe).unwrap_or(0.0)
                } else {
                    l.profile.origin
                };
                Some(reach.clamp(t, t_end))
            }
            Some(_) => None,
        };
        match origin {
            Some(o) => {
                car.launch_origin = Some(o);
                car.profile = Profile { origin: o, v0: 0.0 };
                car.vel = 0.0;
                car.motion = Motion::Launching;
            }
            None => return,
        }
    }

    let start = car.profile.origin.max(t);
    let v_start = car.vel;
    let v_end = if v_start >= v_max {
        v_max
    } else {
        velocity_unchecked(dynamics, car.profile.v0, t_end - car.profile.origin).min(v_max)
    };
    let mut x_new = car.front_pos + 0.5 * (v_start + v_end) * (t_end - start);
    let mut v_new = v_end;
    let mut stopped = false;
    let mut clamped = false;

    if car.front_pos <= 0.0 && x_new > 0.0 && !may_enter {
        x_new = 0.0;
        v_new = 0.0;
        stopped = true;
    }
    if let Some(l) = lead {
        let limit = l.front_pos - params.geometry.stopped_spacing();
        if x_new > limit + CLEARANCE_SLACK {
            if l.stopped {
                x_new = limit.max(car.front_pos);
                v_new = 0.0;
                stopped = true;
            } else {
                x_new = limit.max(car.front_pos);
                v_new = v_new.min(l.vel);
                clamped = true;
            }
        }
    }

    car.front_pos = x_new;
    car.vel = v_new;
    if stopped {
        car.motion = Motion::Stopped;
        car.profile = Profile {
            origin: t_end,
            v0: 0.0,
        };
    } else if clamped {
        car.motion = Motion::Following;
        car.profile = Profile {
            origin: t_end,
            v0: v_new,
        };
    } else if x_new > 0.0 {
        car.motion = Motion::Crossing;
    } else if car.motion == Motion::Launching && v_new < v_max {
        // still on its start-from-rest profile
    } else {
        car.motion = Motion::Free;
    }
}

//! Fixed-step hybrid simulator of the two one-way approaches.
//!
//! Cars move on closed-form acceleration profiles anchored at the instant
//! they last started or were re-anchored, so the step size `dt` only
//! quantizes event detection. Positions advance by the trapezoid rule on the
//! profile velocities. There is no braking model: a car that would run the
//! stop line under a non-green phase, or close to within `d_S` of a stopped
//! predecessor, stops on the spot at the constraint.

mod car;
mod light;
mod trace;
mod world;

pub use car::{Car, Motion, Profile, QueueId};
pub use light::{LightPhase, Phase};
pub use trace::{write_trace, CarRecord, Event, EventKind, SimResult, TRACE_HEADER};
pub use world::WorldState;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::Controller;
use crate::tolerances::{CLEARANCE_SLACK, DEFAULT_DT, DEFAULT_MAX_T};
use crate::ValidParams64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid initial state: {0}")]
    Initial(String),
    #[error("simulation invariant breached: {0}")]
    InvariantBreach(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Step size (s).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Safety horizon (s).
    #[serde(default = "default_max_t")]
    pub max_t: f64,
    #[serde(default)]
    pub seed: u64,
    /// Keep the event trace in the result.
    #[serde(default = "yes")]
    pub record_trace: bool,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_max_t() -> f64 {
    DEFAULT_MAX_T
}
fn yes() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            max_t: DEFAULT_MAX_T,
            seed: 0,
            record_trace: true,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.max_t > 0.0 && self.max_t.is_finite()) {
            return Err(SimError::Config(format!(
                "max_t must be positive, got {}",
                self.max_t
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCar {
    pub front_pos: f64,
    pub vel: f64,
}

/// Starting cars of both queues, head (largest `front_pos`) first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub queues: [Vec<InitialCar>; 2],
}

impl InitialState {
    pub fn total(&self) -> usize {
        self.queues.iter().map(Vec::len).sum()
    }

    pub fn check(&self, params: &ValidParams64) -> Result<(), SimError> {
        let g = &params.geometry;
        for q in QueueId::ALL {
            let cars = &self.queues[q.index()];
            for (i, c) in cars.iter().enumerate() {
                if !c.front_pos.is_finite() || c.front_pos >= g.intersection_length {
                    return Err(SimError::Initial(format!(
                        "queue {q} car {i}: position {} outside the road",
                        c.front_pos
                    )));
                }
                if !(0.0..=params.speeds.v_max).contains(&c.vel) {
                    return Err(SimError::Initial(format!(
                        "queue {q} car {i}: speed {} outside [0, V_max]",
                        c.vel
                    )));
                }
                if i > 0 {
                    let spacing = cars[i - 1].front_pos - c.front_pos;
                    if spacing < g.stopped_spacing() - CLEARANCE_SLACK {
                        return Err(SimError::Initial(format!(
                            "queue {q} car {i}: spacing {spacing} m below L_C + d_S"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `n` stopped cars packed behind the stop line of `queue`.
    pub fn stopped_queue(params: &ValidParams64, queue: QueueId, n: usize) -> Self {
        let spacing = params.geometry.stopped_spacing();
        let mut s = Self::default();
        s.queues[queue.index()] = (0..n)
            .map(|i| InitialCar {
                front_pos: -(i as f64) * spacing,
                vel: 0.0,
            })
            .collect();
        s
    }

    /// One car cruising at `V_max`, `lead_in` metres upstream of the zone.
    pub fn single_cruiser(params: &ValidParams64, queue: QueueId, lead_in: f64) -> Self {
        let mut s = Self::default();
        s.queues[queue.index()].push(InitialCar {
            front_pos: -params.geometry.queue_length - lead_in,
            vel: params.speeds.v_max,
        });
        s
    }

    /// Saturated start: each queue holds `batches·N` stopped cars packed
    /// from the stop line, so `N` fill the zone and the next one sits on the
    /// zone boundary.
    pub fn saturated(params: &ValidParams64, batches: usize) -> Self {
        let n = params.capacity();
        let mut s = Self::default();
        for q in QueueId::ALL {
            s.queues[q.index()] = Self::stopped_queue(params, q, n * batches).queues[q.index()].clone();
        }
        s
    }
}

/// Runs until every car has departed or the horizon is reached.
pub fn run(
    params: &ValidParams64,
    init: &InitialState,
    controller: &mut dyn Controller,
    config: &SimConfig,
) -> Result<SimResult, SimError> {
    config.check()?;
    let mut world = WorldState::new(params, init, config.seed, config.record_trace)?;
    let horizon_steps = (config.max_t / config.dt).round() as u64;
    while world.active_cars() > 0 && world.steps < horizon_steps {
        let obs = world.observe(params);
        let cmd = controller.decide(&obs);
        world.step(params, cmd, config.dt)?;
    }
    Ok(finish(world))
}

fn finish(world: WorldState) -> SimResult {
    let mut records: Vec<CarRecord> = world
        .departed
        .iter()
        .chain(world.queues.iter().flatten())
        .map(CarRecord::from)
        .collect();
    records.sort_by_key(|r| r.id);
    let mut liveness_failures: Vec<u32> = world.queues.iter().flatten().map(|c| c.id).collect();
    liveness_failures.sort_unstable();

    let mut max_sojourn = [None::<f64>; 2];
    let (mut sum, mut n) = (0.0, 0usize);
    for r in &records {
        if let Some(d) = r.sojourn {
            let slot = &mut max_sojourn[r.queue.index()];
            *slot = Some(slot.map_or(d, |m| m.max(d)));
            sum += d;
            n += 1;
        }
    }
    SimResult {
        records,
        max_sojourn,
        mean_sojourn: (n > 0).then(|| sum / n as f64),
        liveness_failures,
        end_time: world.t,
        steps: world.steps,
        events: world.events,
    }
}

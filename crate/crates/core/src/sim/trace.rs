//! Event trace and run results.
//!
//! The trace is written as line-delimited comma-separated records under a
//! fixed header:
//!
//! ```text
//! t,event,car_id,queue,position,velocity,detail
//! ```
//!
//! `event` is one of `green`, `yellow`, `zone_entry`, `launch`, `stop`,
//! `departure`. Phase events leave `car_id`, `position` and `velocity` empty
//! and put the affected direction in `queue` and the switch reason (if any)
//! in `detail`. Numbers use the shortest representation that round-trips.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::io::{self, Write};

use super::car::{Car, QueueId};
use super::light::{LightPhase, Phase};
use crate::controllers::SwitchReason;

pub const TRACE_HEADER: &str = "t,event,car_id,queue,position,velocity,detail";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Green,
    Yellow,
    ZoneEntry,
    Launch,
    Stop,
    Departure,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Green => "green",
            EventKind::Yellow => "yellow",
            EventKind::ZoneEntry => "zone_entry",
            EventKind::Launch => "launch",
            EventKind::Stop => "stop",
            EventKind::Departure => "departure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub car_id: Option<u32>,
    pub queue: Option<QueueId>,
    pub position: Option<f64>,
    pub velocity: Option<f64>,
    pub reason: Option<SwitchReason>,
}

impl Event {
    pub(crate) fn car(t: f64, kind: EventKind, car: &Car) -> Self {
        Self {
            t,
            kind,
            car_id: Some(car.id),
            queue: Some(car.queue),
            position: Some(car.front_pos),
            velocity: Some(car.vel),
            reason: None,
        }
    }

    pub(crate) fn phase(t: f64, light: &LightPhase, reason: Option<SwitchReason>) -> Self {
        Self {
            t,
            kind: match light.phase {
                Phase::Yellow => EventKind::Yellow,
                _ => EventKind::Green,
            },
            car_id: None,
            queue: light.green_dir,
            position: None,
            velocity: None,
            reason,
        }
    }

    pub fn to_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{},{},", self.t, self.kind.as_str());
        if let Some(id) = self.car_id {
            let _ = write!(s, "{id}");
        }
        s.push(',');
        if let Some(q) = self.queue {
            let _ = write!(s, "{q}");
        }
        s.push(',');
        if let Some(x) = self.position {
            let _ = write!(s, "{x}");
        }
        s.push(',');
        if let Some(v) = self.velocity {
            let _ = write!(s, "{v}");
        }
        s.push(',');
        if let Some(r) = self.reason {
            s.push_str(match r {
                SwitchReason::Idle => "idle",
                SwitchReason::Deadline => "deadline",
                SwitchReason::Cycle => "cycle",
                SwitchReason::Start => "start",
                SwitchReason::Batch => "batch",
            });
        }
        s
    }
}

pub fn write_trace<W: Write>(events: &[Event], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for e in events {
        writeln!(out, "{}", e.to_line())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarRecord {
    pub id: u32,
    pub queue: QueueId,
    pub t_enter_zone: Option<f64>,
    pub t_depart: Option<f64>,
    pub sojourn: Option<f64>,
    pub launch_origin: Option<f64>,
}

impl From<&Car> for CarRecord {
    fn from(c: &Car) -> Self {
        Self {
            id: c.id,
            queue: c.queue,
            t_enter_zone: c.t_enter_zone,
            t_depart: c.t_depart,
            sojourn: c.sojourn(),
            launch_origin: c.launch_origin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// One record per car, ordered by id.
    pub records: Vec<CarRecord>,
    /// Largest sojourn per queue (index 0 = queue 1).
    pub max_sojourn: [Option<f64>; 2],
    pub mean_sojourn: Option<f64>,
    /// Cars still on the road at the horizon.
    pub liveness_failures: Vec<u32>,
    pub end_time: f64,
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<Event>,
}

impl SimResult {
    pub fn is_live(&self) -> bool {
        self.liveness_failures.is_empty()
    }

    pub fn sojourns(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter_map(|r| r.sojourn)
    }

    pub fn queue_records(&self, q: QueueId) -> impl Iterator<Item = &CarRecord> {
        self.records.iter().filter(move |r| r.queue == q)
    }

    /// Mean sojourn of one queue.
    pub fn queue_mean(&self, q: QueueId) -> Option<f64> {
        let (sum, n) = self
            .queue_records(q)
            .filter_map(|r| r.sojourn)
            .fold((0.0, 0usize), |(s, n), d| (s + d, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    /// Mean of the two per-queue maxima, over the queues that had cars.
    pub fn worst_avg(&self) -> Option<f64> {
        let present: Vec<f64> = self.max_sojourn.iter().flatten().copied().collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn write_trace<W: Write>(&self, out: W) -> io::Result<()> {
        write_trace(&self.events, out)
    }
}

use serde::{Deserialize, Serialize};
use std::fmt;

/// One of the two one-way approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueueId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl QueueId {
    pub const ALL: [QueueId; 2] = [QueueId::One, QueueId::Two];

    pub fn index(self) -> usize {
        match self {
            QueueId::One => 0,
            QueueId::Two => 1,
        }
    }

    pub fn other(self) -> QueueId {
        match self {
            QueueId::One => QueueId::Two,
            QueueId::Two => QueueId::One,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Free,
    Following,
    Stopped,
    Launching,
    Crossing,
    Departed,
}

/// Anchor of the full-force acceleration profile the car is currently on:
/// `v(t) = min(V_max, K − (K − v0)·e^(−a(t − origin)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub origin: f64,
    pub v0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Car {
    pub id: u32,
    pub queue: QueueId,
    /// Front bumper on the queue axis: stop line at 0, upstream negative,
    /// intersection exit at `+L_I`.
    pub front_pos: f64,
    pub vel: f64,
    pub motion: Motion,
    /// First instant the front is strictly past `−L_Q`; a car standing
    /// exactly on the boundary is still outside.
    pub t_enter_zone: Option<f64>,
    /// First instant the front reaches `+L_I`.
    pub t_depart: Option<f64>,
    /// Instant the most recent start-from-rest fired.
    pub launch_origin: Option<f64>,
    pub profile: Profile,
}

impl Car {
    pub fn is_stopped(&self) -> bool {
        self.motion == Motion::Stopped
    }

    pub fn sojourn(&self) -> Option<f64> {
        Some(self.t_depart? - self.t_enter_zone?)
    }
}

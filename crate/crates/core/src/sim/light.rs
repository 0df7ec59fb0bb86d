use serde::{Deserialize, Serialize};

use super::car::QueueId;
use crate::tolerances::PHASE_SLACK;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Green,
    Yellow,
    /// Both directions red; only before the first green.
    AllRedNone,
}

/// Light-phase machine state. During `Yellow`, `green_dir` is the direction
/// being cleared; the opposite direction gets green after exactly `T_Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightPhase {
    pub green_dir: Option<QueueId>,
    pub phase: Phase,
    pub phase_start: f64,
}

impl Default for LightPhase {
    fn default() -> Self {
        Self {
            green_dir: None,
            phase: Phase::AllRedNone,
            phase_start: 0.0,
        }
    }
}

impl LightPhase {
    /// Whether a car of `queue` whose front has not passed the stop line may
    /// cross it now.
    pub fn may_enter(&self, queue: QueueId) -> bool {
        self.phase == Phase::Green && self.green_dir == Some(queue)
    }

    pub fn is_green(&self, queue: QueueId) -> bool {
        self.may_enter(queue)
    }

    /// Direction that is (or was, during yellow) allowed to move.
    pub fn active_dir(&self) -> Option<QueueId> {
        self.green_dir
    }

    /// Starts a switch toward `target`. Returns `true` if the phase changed.
    /// Ignored while yellow is running or when `target` already has green.
    pub(crate) fn begin_switch(&mut self, target: QueueId, t: f64) -> bool {
        match self.phase {
            Phase::AllRedNone => {
                *self = LightPhase {
                    green_dir: Some(target),
                    phase: Phase::Green,
                    phase_start: t,
                };
                true
            }
            Phase::Green if self.green_dir != Some(target) => {
                self.phase = Phase::Yellow;
                self.phase_start = t;
                true
            }
            _ => false,
        }
    }

    /// Ends an expired yellow. Returns `true` if the opposite green began.
    pub(crate) fn expire_yellow(&mut self, t: f64, yellow: f64) -> bool {
        if self.phase != Phase::Yellow || t - self.phase_start < yellow - PHASE_SLACK {
            return false;
        }
        let next = self.green_dir.map(QueueId::other);
        *self = LightPhase {
            green_dir: next,
            phase: Phase::Green,
            phase_start: t,
        };
        true
    }
}

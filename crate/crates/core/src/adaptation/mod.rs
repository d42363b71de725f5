//! The MAPE-K adaptation loop: goal-based analysis, validated proactive
//! planning over the whole product space, and execution of configuration
//! deltas through a command port.
//!
//! One loop step is analyze → plan → execute. Analysis judges the current
//! product against weighted soft goals on a knowledge snapshot. Planning
//! is gated on violations (necessity), searches every valid derivable
//! selection exhaustively, and applies a hysteresis margin before
//! committing. Execution turns the configuration delta into device
//! commands and aborts atomically on a missing acknowledgement.

mod engine;
mod executor;
mod goals;
mod planner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::DEFAULT_BATTERY_FLOOR;

pub use engine::AdaptationEngine;
pub use executor::{execute, Command, CommandAction, CommandPort, ExecutionOutcome, ExecutionResult};
pub use goals::{evaluate_goal, score, EvalNote, Goal, GoalError, GoalEval, GoalKind, View};
pub use planner::{
    analyze, plan, score_with_effects, AdaptationPlan, NoChangeReason, PlanDecision, PlanInputs,
    SatisfactionReport, Violation, TIE_EPSILON,
};

pub const DEFAULT_EPSILON: f64 = 0.05;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_VIOLATION_THRESHOLD: f64 = 0.6;
pub const DEFAULT_ACK_TIMEOUT: u64 = 2;

/// Tunables of one adaptation loop. All constants the loop depends on
/// live here and in the scenario file; none are buried in code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSettings {
    /// Run the loop every this many ticks.
    pub period: u64,
    /// Hysteresis: minimum effective-score gain that justifies adapting.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Blend between current (α) and predicted (1−α) satisfaction.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// How far ahead facts are considered.
    pub horizon: u64,
    /// Readings older than this are stale.
    #[serde(rename = "staleness")]
    pub staleness_window: u64,
    /// Goals below this current-view satisfaction count as violations.
    #[serde(default = "default_violation_threshold")]
    pub violation_threshold: f64,
    /// Ticks to wait for a command acknowledgement.
    #[serde(default = "default_ack_timeout")]
    pub ack_timeout: u64,
    /// Devices at or below this battery level are infeasible.
    #[serde(default = "default_battery_floor")]
    pub battery_floor: f64,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_violation_threshold() -> f64 {
    DEFAULT_VIOLATION_THRESHOLD
}
fn default_ack_timeout() -> u64 {
    DEFAULT_ACK_TIMEOUT
}
fn default_battery_floor() -> f64 {
    DEFAULT_BATTERY_FLOOR
}

#[derive(Debug, Error, PartialEq)]
pub enum SettingsError {
    #[error("loop period must be at least 1")]
    ZeroPeriod,
    #[error("alpha must lie in [0,1], got {0}")]
    AlphaOutOfRange(f64),
    #[error("epsilon must be non-negative, got {0}")]
    NegativeEpsilon(f64),
}

impl LoopSettings {
    pub fn validate(&self) -> Result<(), SettingsError> {
        if self.period < 1 {
            return Err(SettingsError::ZeroPeriod);
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SettingsError::AlphaOutOfRange(self.alpha));
        }
        if !(self.epsilon >= 0.0) {
            return Err(SettingsError::NegativeEpsilon(self.epsilon));
        }
        Ok(())
    }
}

/// A scenario-declared belief about what selecting a feature does to a
/// predicted variable — the planner's actuation model. When a candidate
/// selection contains `feature`, its predicted view gets `variable`
/// overridden to `predicted` before scoring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuationEffect {
    pub feature: String,
    pub variable: String,
    pub predicted: f64,
}

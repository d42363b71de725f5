//! Execution: turning an adaptation plan into device commands, collecting
//! acknowledgements, and aborting atomically when a device goes quiet.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::planner::AdaptationPlan;
use super::LoopSettings;
use crate::trace::{TraceEvent, TraceKind};
use crate::variability::{DConfig, FConfig};

/// What a command asks a device to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum CommandAction {
    Activate { feature: String },
    Deactivate { feature: String },
    Configure { params: DConfig },
}

/// One command addressed to one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Command {
    pub seq: u64,
    pub device: String,
    #[serde(flatten)]
    pub action: CommandAction,
}

/// The executor's transport. The simulator implements this over its bus;
/// tests implement it with mocks.
pub trait CommandPort {
    /// Delivers one command. Returns true when the device acknowledged
    /// within `ack_timeout` ticks, false when the ack never arrived.
    fn send(&mut self, command: &Command, now: u64, ack_timeout: u64) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExecutionResult {
    Applied,
    /// A supposedly-reachable device failed to acknowledge; the plan was
    /// abandoned and the configuration left unchanged.
    Aborted { device: String },
}

/// Result of one execution attempt plus everything the engine needs to
/// finish the step: the trace events emitted and the parameter sets that
/// were actually pushed.
#[derive(Debug)]
pub struct ExecutionOutcome {
    pub result: ExecutionResult,
    pub events: Vec<TraceEvent>,
    /// (device, params) for every Configure that was acknowledged.
    pub configured: Vec<(String, DConfig)>,
}

fn command_list(plan: &AdaptationPlan, current: &FConfig) -> Vec<(String, CommandAction)> {
    let mut commands = Vec::new();
    // Deactivate bindings that vanish or move, in feature order.
    for (feature, device) in &current.bindings {
        if plan.target.bindings.get(feature) != Some(device) {
            commands.push((
                device.clone(),
                CommandAction::Deactivate {
                    feature: feature.clone(),
                },
            ));
        }
    }
    // Activate new or moved bindings, in feature order.
    for (feature, device) in &plan.target.bindings {
        if current.bindings.get(feature) != Some(device) {
            commands.push((
                device.clone(),
                CommandAction::Activate {
                    feature: feature.clone(),
                },
            ));
        }
    }
    // Push parameter sets that changed, in device order.
    for (device, params) in &plan.target.dconfigs {
        if current.dconfigs.get(device) != Some(params) {
            commands.push((
                device.clone(),
                CommandAction::Configure {
                    params: params.clone(),
                },
            ));
        }
    }
    commands
}

/// Executes a plan through the port. Commands addressed to devices the
/// knowledge base already knows to be unreachable are skipped (there is
/// nobody left to acknowledge a deactivation); a missing ack from any
/// other device aborts the remainder and reports that device.
pub fn execute(
    plan: &AdaptationPlan,
    current: &FConfig,
    known_unreachable: &BTreeSet<String>,
    port: &mut dyn CommandPort,
    now: u64,
    settings: &LoopSettings,
    seq: &mut u64,
) -> ExecutionOutcome {
    let mut events = Vec::new();
    let mut configured = Vec::new();
    for (device, action) in command_list(plan, current) {
        if known_unreachable.contains(&device) {
            events.push(TraceEvent::new(
                now,
                TraceKind::Warning,
                json!({
                    "message": "skipped command to unreachable device",
                    "device": device,
                }),
            ));
            continue;
        }
        let command = Command {
            seq: *seq,
            device: device.clone(),
            action: action.clone(),
        };
        *seq += 1;
        events.push(TraceEvent::new(
            now,
            TraceKind::Command,
            serde_json::to_value(&command).expect("commands serialize"),
        ));
        if port.send(&command, now, settings.ack_timeout) {
            events.push(TraceEvent::new(
                now,
                TraceKind::Ack,
                json!({"device": device, "seq": command.seq}),
            ));
            if let CommandAction::Configure { params } = action {
                configured.push((device, params));
            }
        } else {
            events.push(TraceEvent::new(
                now,
                TraceKind::Warning,
                json!({
                    "message": "ack timeout, aborting adaptation",
                    "device": device,
                    "seq": command.seq,
                }),
            ));
            return ExecutionOutcome {
                result: ExecutionResult::Aborted { device },
                events,
                configured,
            };
        }
    }
    ExecutionOutcome {
        result: ExecutionResult::Applied,
        events,
        configured,
    }
}

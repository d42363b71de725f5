//! The loop driver: one `step` call runs analyze → plan → execute against
//! a knowledge base and a command port, emitting the step's trace events
//! in their contractual order.

use std::collections::BTreeMap;

use serde_json::json;

use super::executor::{execute, CommandPort, ExecutionResult};
use super::goals::Goal;
use super::planner::{analyze, plan, unreachable_ids, NoChangeReason, PlanDecision, PlanInputs};
use super::{ActuationEffect, LoopSettings};
use crate::knowledge::KnowledgeBase;
use crate::trace::{TraceEvent, TraceKind};
use crate::variability::{DConfig, FConfig, FeatureModel};

/// Owns the loop's fixed inputs and its only mutable state: the currently
/// deployed configuration and the command sequence counter.
#[derive(Debug)]
pub struct AdaptationEngine {
    model: FeatureModel,
    goals: Vec<Goal>,
    settings: LoopSettings,
    effects: Vec<ActuationEffect>,
    feature_defaults: BTreeMap<String, DConfig>,
    current: FConfig,
    seq: u64,
    adaptations: u64,
    last_effective: f64,
}

impl AdaptationEngine {
    pub fn new(
        model: FeatureModel,
        goals: Vec<Goal>,
        settings: LoopSettings,
        effects: Vec<ActuationEffect>,
        feature_defaults: BTreeMap<String, DConfig>,
        initial: FConfig,
    ) -> Self {
        Self {
            model,
            goals,
            settings,
            effects,
            feature_defaults,
            current: initial,
            seq: 0,
            adaptations: 0,
            last_effective: 1.0,
        }
    }

    pub fn current(&self) -> &FConfig {
        &self.current
    }

    pub fn settings(&self) -> &LoopSettings {
        &self.settings
    }

    pub fn adaptations(&self) -> u64 {
        self.adaptations
    }

    /// Effective score from the most recent analysis.
    pub fn last_effective(&self) -> f64 {
        self.last_effective
    }

    /// Runs one MAPE step at `now`. Events come out in the loop's
    /// contractual order: Analyze, then Plan or NoChange, then any
    /// execution events (Command/Ack/Warning) and finally Adapt when the
    /// new configuration was applied.
    pub fn step(
        &mut self,
        kb: &mut KnowledgeBase,
        now: u64,
        port: &mut dyn CommandPort,
    ) -> Vec<TraceEvent> {
        let ec = kb.snapshot(now, self.settings.horizon, self.settings.staleness_window);
        let report = analyze(&ec, &self.goals, &self.current, &self.settings);
        self.last_effective = report.effective;

        let dimensions: BTreeMap<String, String> = kb
            .dimension_assignment()
            .into_iter()
            .map(|(v, d)| (v, d.to_string()))
            .collect();
        let mut events = vec![TraceEvent::new(
            now,
            TraceKind::Analyze,
            json!({
                "now": now,
                "mode": kb.active_mode(),
                "dimensions": dimensions,
                "current": ec.current,
                "predicted": ec.predicted,
                "feasible": ec.feasible_devices,
                "report": report,
            }),
        )];

        if report.violations.is_empty() {
            events.push(TraceEvent::new(
                now,
                TraceKind::NoChange,
                json!({"reason": "no_violations", "effective": report.effective}),
            ));
            return events;
        }

        let registry = kb.devices();
        let feasible_registry: Vec<_> = registry
            .iter()
            .filter(|d| ec.feasible_devices.contains(&d.id))
            .cloned()
            .collect();
        let inputs = PlanInputs {
            model: &self.model,
            goals: &self.goals,
            effects: &self.effects,
            feature_defaults: &self.feature_defaults,
            feasible_registry: &feasible_registry,
            settings: &self.settings,
        };
        let decision = match plan(&report, &ec, &self.current, &inputs) {
            Ok(decision) => decision,
            Err(e) => {
                events.push(TraceEvent::new(
                    now,
                    TraceKind::Plan,
                    json!({"failure": "enumeration", "error": e.to_string()}),
                ));
                return events;
            }
        };

        match decision {
            PlanDecision::NoChange(reason) => {
                let payload = match reason {
                    NoChangeReason::NoViolations => {
                        json!({"reason": "no_violations", "effective": report.effective})
                    }
                    NoChangeReason::BelowEpsilon { gain } => {
                        json!({"reason": "below_epsilon", "gain": gain, "effective": report.effective})
                    }
                };
                events.push(TraceEvent::new(now, TraceKind::NoChange, payload));
            }
            PlanDecision::NoFeasibleConfiguration => {
                events.push(TraceEvent::new(
                    now,
                    TraceKind::Plan,
                    json!({"failure": "no_feasible_configuration", "reason": report.violations}),
                ));
            }
            PlanDecision::Adapt(p) => {
                events.push(TraceEvent::new(
                    now,
                    TraceKind::Plan,
                    json!({
                        "target": p.target.selection.sorted(),
                        "added": p.delta.added,
                        "removed": p.delta.removed,
                        "bindings": p.target.bindings,
                        "expected_gain": p.expected_gain,
                        "reason": p.reason,
                    }),
                ));
                let known_unreachable = unreachable_ids(&registry);
                let outcome = execute(
                    &p,
                    &self.current,
                    &known_unreachable,
                    port,
                    now,
                    &self.settings,
                    &mut self.seq,
                );
                events.extend(outcome.events);
                match outcome.result {
                    ExecutionResult::Applied => {
                        for (device, params) in outcome.configured {
                            // Configured devices exist in the registry by
                            // construction; a missing one is a bug upstream.
                            let _ = kb.set_device_params(&device, params);
                        }
                        events.push(TraceEvent::new(
                            now,
                            TraceKind::Adapt,
                            json!({
                                "from": self.current.selection.sorted(),
                                "to": p.target.selection.sorted(),
                                "added": p.delta.added,
                                "removed": p.delta.removed,
                                "bindings": p.target.bindings,
                                "expected_gain": p.expected_gain,
                            }),
                        ));
                        self.current = p.target;
                        self.adaptations += 1;
                    }
                    ExecutionResult::Aborted { device } => {
                        // The silent device is now a known casualty; the
                        // next step re-plans around it.
                        let _ = kb.set_reachable(&device, false);
                    }
                }
            }
        }
        events
    }
}

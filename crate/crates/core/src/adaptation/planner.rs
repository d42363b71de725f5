//! Analysis (goal satisfaction and violation detection) and planning
//! (exhaustive search over the product space with hysteresis).

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::goals::{evaluate_goal, score, EvalNote, Goal, View};
use super::{ActuationEffect, LoopSettings};
use crate::knowledge::{DeviceDescriptor, EvaluationContext};
use crate::variability::{
    derive_fconfig, diff_selections, enumerate_configurations, DConfig, FConfig, FeatureModel,
    Selection, SelectionDiff, SelectionError,
};

/// Two effective scores closer than this are a tie.
pub const TIE_EPSILON: f64 = 1e-9;

/// One reason the current configuration dissatisfies.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Violation {
    /// A goal under the violation threshold in the current view.
    Goal { goal: String, satisfaction: f64 },
    /// A goal variable whose reading outlived the staleness window.
    Staleness { variable: String, age: u64 },
    /// A bound device that is no longer feasible.
    Infeasibility {
        device: String,
        features: Vec<String>,
    },
}

/// The analyzer's verdict on the current configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatisfactionReport {
    /// Current-view satisfaction per goal.
    pub per_goal: BTreeMap<String, f64>,
    pub total_current: f64,
    pub total_predicted: f64,
    /// α·current + (1−α)·predicted.
    pub effective: f64,
    pub violations: Vec<Violation>,
}

/// Judges the current configuration against the goals on one snapshot.
///
/// Violations collect, in order: goals whose current-view satisfaction
/// falls under `violation_threshold` (in goal order), stale goal
/// variables (sorted), and bound devices missing from the feasible set
/// (sorted) — the latter regardless of how well the goals score.
pub fn analyze(
    ec: &EvaluationContext,
    goals: &[Goal],
    current: &FConfig,
    settings: &LoopSettings,
) -> SatisfactionReport {
    let mut per_goal = BTreeMap::new();
    let mut goal_violations = Vec::new();
    let mut stale: BTreeMap<String, u64> = BTreeMap::new();
    for goal in goals {
        let eval = evaluate_goal(goal, ec, View::Current, &current.selection);
        per_goal.insert(goal.id.clone(), eval.satisfaction);
        if let Some(EvalNote::Stale { variable, age }) = &eval.note {
            stale.entry(variable.clone()).or_insert(*age);
        }
        if eval.satisfaction < settings.violation_threshold {
            goal_violations.push(Violation::Goal {
                goal: goal.id.clone(),
                satisfaction: eval.satisfaction,
            });
        }
    }
    let (total_current, total_predicted, effective) =
        score(&current.selection, ec, goals, settings.alpha);

    let mut violations = goal_violations;
    violations.extend(
        stale.into_iter()
            .map(|(variable, age)| Violation::Staleness { variable, age }),
    );
    let mut lost: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (feature, device) in &current.bindings {
        if !ec.feasible_devices.contains(device) {
            lost.entry(device).or_default().push(feature.clone());
        }
    }
    violations.extend(lost.into_iter().map(|(device, features)| {
        Violation::Infeasibility {
            device: device.to_string(),
            features,
        }
    }));

    SatisfactionReport {
        per_goal,
        total_current,
        total_predicted,
        effective,
        violations,
    }
}

/// Scores a selection with its actuation effects applied: every effect
/// whose feature the selection contains overrides that variable in the
/// predicted view before the plain score runs.
pub fn score_with_effects(
    sel: &Selection,
    ec: &EvaluationContext,
    goals: &[Goal],
    alpha: f64,
    effects: &[ActuationEffect],
) -> (f64, f64, f64) {
    let needs_override = effects.iter().any(|e| sel.contains(&e.feature));
    if !needs_override {
        return score(sel, ec, goals, alpha);
    }
    let mut overlaid = ec.clone();
    for effect in effects {
        if sel.contains(&effect.feature) {
            overlaid
                .predicted
                .insert(effect.variable.clone(), effect.predicted);
        }
    }
    score(sel, &overlaid, goals, alpha)
}

/// A committed plan: where to go, what changes, and why.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationPlan {
    pub target: FConfig,
    pub delta: SelectionDiff,
    pub reason: Vec<Violation>,
    pub expected_gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoChangeReason {
    /// The necessity gate: nothing is violated.
    NoViolations,
    /// Hysteresis: the best alternative gains less than ε.
    BelowEpsilon { gain: f64 },
}

/// What the planner decided.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanDecision {
    NoChange(NoChangeReason),
    Adapt(AdaptationPlan),
    /// No valid selection is derivable against the feasible devices.
    /// The loop continues degraded.
    NoFeasibleConfiguration,
}

/// Everything the planner reads besides the report and snapshot.
pub struct PlanInputs<'a> {
    pub model: &'a FeatureModel,
    pub goals: &'a [Goal],
    pub effects: &'a [ActuationEffect],
    pub feature_defaults: &'a BTreeMap<String, DConfig>,
    /// Registry restricted to feasible devices (reachable, above the
    /// battery floor).
    pub feasible_registry: &'a [DeviceDescriptor],
    pub settings: &'a LoopSettings,
}

/// Plans the next configuration, or declines to.
///
/// Gated on necessity: an empty violation list short-circuits to
/// NoChange. Otherwise every valid selection is derived against the
/// feasible devices and scored (with actuation effects); the best
/// candidate wins by effective score, then by fewer changed features,
/// then by lexicographically smallest feature list. A plan is returned
/// when the gain over the current configuration reaches ε, or
/// unconditionally when the current configuration is infeasible.
pub fn plan(
    report: &SatisfactionReport,
    ec: &EvaluationContext,
    current: &FConfig,
    inputs: &PlanInputs,
) -> Result<PlanDecision, SelectionError> {
    if report.violations.is_empty() {
        return Ok(PlanDecision::NoChange(NoChangeReason::NoViolations));
    }
    let enumeration = enumerate_configurations(inputs.model, usize::MAX)?;
    struct Best {
        config: FConfig,
        effective: f64,
        changes: usize,
    }
    let mut best: Option<Best> = None;
    for sel in &enumeration.selections {
        let config = match derive_fconfig(
            inputs.model,
            sel,
            inputs.feasible_registry,
            inputs.feature_defaults,
        ) {
            Ok(config) => config,
            Err(_) => continue,
        };
        let (_, _, effective) =
            score_with_effects(sel, ec, inputs.goals, inputs.settings.alpha, inputs.effects);
        let changes = diff_selections(&current.selection, sel).change_count();
        let better = match &best {
            None => true,
            Some(b) => {
                effective > b.effective + TIE_EPSILON
                    || ((effective - b.effective).abs() <= TIE_EPSILON && changes < b.changes)
            }
        };
        // Equal score and equal change count keeps the earlier candidate:
        // enumeration order is lexicographic, which is the final tie-break.
        if better {
            best = Some(Best {
                config,
                effective,
                changes,
            });
        }
    }
    let Some(best) = best else {
        return Ok(PlanDecision::NoFeasibleConfiguration);
    };

    let (_, _, current_effective) = score_with_effects(
        &current.selection,
        ec,
        inputs.goals,
        inputs.settings.alpha,
        inputs.effects,
    );
    let gain = best.effective - current_effective;
    let infeasible = report
        .violations
        .iter()
        .any(|v| matches!(v, Violation::Infeasibility { .. }));
    if infeasible || gain >= inputs.settings.epsilon {
        Ok(PlanDecision::Adapt(AdaptationPlan {
            delta: diff_selections(&current.selection, &best.config.selection),
            target: best.config,
            reason: report.violations.clone(),
            expected_gain: gain,
        }))
    } else {
        Ok(PlanDecision::NoChange(NoChangeReason::BelowEpsilon { gain }))
    }
}

/// Convenience for tests and the engine: the set of unreachable device ids.
pub(crate) fn unreachable_ids(registry: &[DeviceDescriptor]) -> BTreeSet<String> {
    registry
        .iter()
        .filter(|d| !d.reachable)
        .map(|d| d.id.clone())
        .collect()
}

//! Weighted piecewise-linear soft goals and their evaluation against an
//! evaluation context.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::EvaluationContext;
use crate::variability::Selection;

/// What a goal asks of the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalKind {
    /// Variable should sit at or above a threshold; satisfaction ramps
    /// linearly to 0 over `ramp` below it.
    Above {
        variable: String,
        threshold: f64,
        ramp: f64,
    },
    /// Mirror image of `Above`.
    Below {
        variable: String,
        threshold: f64,
        ramp: f64,
    },
    /// Full satisfaction inside [lo, hi], linear ramps outside.
    Band {
        variable: String,
        lo: f64,
        hi: f64,
        ramp: f64,
    },
    /// Satisfied exactly when the feature is not selected.
    FeatureOff { feature: String },
}

/// One weighted soft goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub weight: f64,
    #[serde(flatten)]
    pub kind: GoalKind,
}

#[derive(Debug, Error, PartialEq)]
pub enum GoalError {
    #[error("goal `{0}`: weight must be non-negative")]
    NegativeWeight(String),
    #[error("goal `{0}`: ramp must be positive")]
    NonPositiveRamp(String),
    #[error("goal `{0}`: band needs lo <= hi")]
    EmptyBand(String),
}

impl Goal {
    pub fn validate(&self) -> Result<(), GoalError> {
        if !(self.weight >= 0.0) {
            return Err(GoalError::NegativeWeight(self.id.clone()));
        }
        match &self.kind {
            GoalKind::Above { ramp, .. } | GoalKind::Below { ramp, .. } => {
                if !(*ramp > 0.0) {
                    return Err(GoalError::NonPositiveRamp(self.id.clone()));
                }
            }
            GoalKind::Band { lo, hi, ramp, .. } => {
                if !(*ramp > 0.0) {
                    return Err(GoalError::NonPositiveRamp(self.id.clone()));
                }
                if lo > hi {
                    return Err(GoalError::EmptyBand(self.id.clone()));
                }
            }
            GoalKind::FeatureOff { .. } => {}
        }
        Ok(())
    }

    /// The variable the goal reads, if any.
    pub fn variable(&self) -> Option<&str> {
        match &self.kind {
            GoalKind::Above { variable, .. }
            | GoalKind::Below { variable, .. }
            | GoalKind::Band { variable, .. } => Some(variable),
            GoalKind::FeatureOff { .. } => None,
        }
    }
}

/// Which side of the snapshot a goal is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Current,
    Predicted,
}

/// Why a satisfaction value is not a plain measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "note", rename_all = "snake_case")]
pub enum EvalNote {
    /// The variable is absent from the view; satisfaction is neutral 0.5.
    Unknown { variable: String },
    /// The variable's last reading is older than the staleness window
    /// (current view only); satisfaction is 0.
    Stale { variable: String, age: u64 },
}

/// A satisfaction value plus its caveat, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct GoalEval {
    pub satisfaction: f64,
    pub note: Option<EvalNote>,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn value_satisfaction(kind: &GoalKind, v: f64) -> f64 {
    match kind {
        GoalKind::Above {
            threshold, ramp, ..
        } => {
            if v >= *threshold {
                1.0
            } else {
                clamp01(1.0 - (threshold - v) / ramp)
            }
        }
        GoalKind::Below {
            threshold, ramp, ..
        } => {
            if v <= *threshold {
                1.0
            } else {
                clamp01(1.0 - (v - threshold) / ramp)
            }
        }
        GoalKind::Band { lo, hi, ramp, .. } => {
            if v < *lo {
                clamp01(1.0 - (lo - v) / ramp)
            } else if v > *hi {
                clamp01(1.0 - (v - hi) / ramp)
            } else {
                1.0
            }
        }
        GoalKind::FeatureOff { .. } => unreachable!("feature goals carry no variable"),
    }
}

/// Evaluates one goal against one view. Total: every input produces a
/// satisfaction in [0,1]. Missing variables score a neutral 0.5; stale
/// variables (current view only) score 0 — dead sensors should hurt.
pub fn evaluate_goal(goal: &Goal, ec: &EvaluationContext, view: View, sel: &Selection) -> GoalEval {
    if let GoalKind::FeatureOff { feature } = &goal.kind {
        return GoalEval {
            satisfaction: if sel.contains(feature) { 0.0 } else { 1.0 },
            note: None,
        };
    }
    let variable = goal.variable().expect("value goals carry a variable");
    match view {
        View::Current => match ec.current.get(variable) {
            Some(entry) if entry.stale => GoalEval {
                satisfaction: 0.0,
                note: Some(EvalNote::Stale {
                    variable: variable.to_string(),
                    age: entry.age,
                }),
            },
            Some(entry) => GoalEval {
                satisfaction: value_satisfaction(&goal.kind, entry.value),
                note: None,
            },
            None => GoalEval {
                satisfaction: 0.5,
                note: Some(EvalNote::Unknown {
                    variable: variable.to_string(),
                }),
            },
        },
        View::Predicted => match ec.predicted.get(variable) {
            Some(&value) => GoalEval {
                satisfaction: value_satisfaction(&goal.kind, value),
                note: None,
            },
            None => GoalEval {
                satisfaction: 0.5,
                note: Some(EvalNote::Unknown {
                    variable: variable.to_string(),
                }),
            },
        },
    }
}

/// Weighted-mean satisfaction of a selection under both views, blended.
///
/// Each total is Σ wᵢsᵢ / Σ wᵢ over its view; an empty goal list (or all
/// weights zero) scores 1.0 by convention. The effective score blends the
/// two: α·current + (1−α)·predicted.
pub fn score(
    sel: &Selection,
    ec: &EvaluationContext,
    goals: &[Goal],
    alpha: f64,
) -> (f64, f64, f64) {
    let total = |view: View| -> f64 {
        let weight_sum: f64 = goals.iter().map(|g| g.weight).sum();
        if weight_sum == 0.0 {
            return 1.0;
        }
        let weighted: f64 = goals
            .iter()
            .map(|g| g.weight * evaluate_goal(g, ec, view, sel).satisfaction)
            .sum();
        weighted / weight_sum
    };
    let current = total(View::Current);
    let predicted = total(View::Predicted);
    let effective = alpha * current + (1.0 - alpha) * predicted;
    (current, predicted, effective)
}

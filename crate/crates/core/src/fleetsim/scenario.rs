//! Scenario files: the single JSON document that declares a model, a fleet,
//! the dimension map, goals, loop settings, world dynamics, and a scripted
//! timeline. Loading validates everything up front so a `World` can only be
//! built from a coherent scenario.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::adaptation::{ActuationEffect, Goal, GoalError, LoopSettings, SettingsError};
use crate::knowledge::{DeviceDescriptor, Dimension, DimensionMap, KnowledgeError, BASE_MODE};
use crate::variability::{
    check_selection, derive_fconfig, parse_model, DConfig, DeriveError, FConfig, FeatureModel,
    ModelError, Selection, SelectionError,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    /// Malformed JSON or a missing/unknown key; the message names it.
    #[error("scenario: {0}")]
    Syntax(String),
    #[error("scenario model: {0}")]
    Model(#[from] ModelError),
    #[error("could not read model file `{path}`: {message}")]
    ModelFile { path: String, message: String },
    #[error("loop settings: {0}")]
    Settings(#[from] SettingsError),
    #[error("goal: {0}")]
    Goal(#[from] GoalError),
    #[error("duplicate goal id `{0}`")]
    DuplicateGoal(String),
    #[error("dimension_map entry `{variable}`: unknown dimension `{value}`")]
    UnknownDimension { variable: String, value: String },
    #[error("dimension map: {0}")]
    Dimensions(KnowledgeError),
    #[error("device `{id}`: {message}")]
    Device { id: String, message: String },
    #[error("duplicate device id `{0}`")]
    DuplicateDevice(String),
    #[error("effect references unknown feature `{0}`")]
    UnknownEffectFeature(String),
    #[error("dconfig_defaults references unknown feature `{0}`")]
    UnknownDefaultFeature(String),
    #[error("timeline entry at t={t}: {message}")]
    Timeline { t: u64, message: String },
    #[error("initial selection invalid: {0}")]
    InitialSelectionInvalid(String),
}

/// One scripted world event. The `event` tag picks the variant.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TimelineAction {
    /// Inject a forecast fact (issued at the entry's tick).
    Fact {
        variable: String,
        predicted_value: f64,
        valid_at: u64,
    },
    /// Switch the dimension-map mode.
    Mode { mode: String },
    /// Rain falling during this tick, in dynamics units.
    Rain { amount: f64 },
    /// Hard failure: the device stops acking and publishing for good.
    DeviceFail { device: String },
    /// Miscalibrate a device: it reports `value` for `variable` from now on.
    ReadingOverride {
        device: String,
        variable: String,
        value: f64,
    },
    /// Drop the next command sent to the device (it goes unacknowledged).
    CommandDrop { device: String },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TimelineEvent {
    pub t: u64,
    #[serde(flatten)]
    pub action: TimelineAction,
}

/// World-dynamics constants and initial variable values.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub dry_rate: f64,
    pub irrigation_gain: f64,
    pub rain_gain: f64,
    /// Uniform noise half-width added to soil moisture each tick; zero (the
    /// default) keeps the run independent of the seed.
    #[serde(default)]
    pub noise: f64,
    pub initial: BTreeMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    id: String,
    capabilities: Vec<String>,
    battery: f64,
    #[serde(default)]
    params: DConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    model: Value,
    devices: Vec<RawDevice>,
    dimension_map: BTreeMap<String, String>,
    #[serde(default)]
    modes: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default = "default_mode")]
    active_mode: String,
    initial_selection: Vec<String>,
    goals: Vec<Goal>,
    #[serde(rename = "loop")]
    loop_settings: LoopSettings,
    dynamics: DynamicsSpec,
    #[serde(default)]
    timeline: Vec<TimelineEvent>,
    /// Actuation model: what selecting a feature is believed to do to a
    /// predicted variable. Extension beyond the base format; without it the
    /// planner cannot tell watering variants apart.
    #[serde(default)]
    effects: Vec<ActuationEffect>,
    /// Per-feature parameter defaults merged into bound devices at
    /// derivation. Extension beyond the base format.
    #[serde(default)]
    dconfig_defaults: BTreeMap<String, DConfig>,
}

fn default_mode() -> String {
    BASE_MODE.to_string()
}

/// A validated scenario, ready to build a world from.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: FeatureModel,
    pub devices: Vec<DeviceDescriptor>,
    pub dimension_map: DimensionMap,
    pub initial: FConfig,
    pub goals: Vec<Goal>,
    pub settings: LoopSettings,
    pub effects: Vec<ActuationEffect>,
    pub dconfig_defaults: BTreeMap<String, DConfig>,
    pub dynamics: DynamicsSpec,
    /// Sorted by tick; same-tick entries keep file order.
    pub timeline: Vec<TimelineEvent>,
}

fn parse_dimension(variable: &str, value: &str) -> Result<Dimension, ScenarioError> {
    match value {
        "system" => Ok(Dimension::System),
        "context" => Ok(Dimension::Context),
        "environment" => Ok(Dimension::Environment),
        other => Err(ScenarioError::UnknownDimension {
            variable: variable.to_string(),
            value: other.to_string(),
        }),
    }
}

/// Parses and validates a scenario document. `base_dir` anchors a relative
/// `model` path (use the scenario file's directory).
pub fn load_scenario(text: &str, base_dir: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let raw: RawScenario =
        serde_json::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;

    let model = match &raw.model {
        Value::String(path) => {
            let resolved = match base_dir {
                Some(dir) => dir.join(path),
                None => Path::new(path).to_path_buf(),
            };
            let model_text =
                std::fs::read_to_string(&resolved).map_err(|e| ScenarioError::ModelFile {
                    path: resolved.display().to_string(),
                    message: e.to_string(),
                })?;
            parse_model(&model_text)?
        }
        inline => parse_model(&inline.to_string())?,
    };

    raw.loop_settings.validate()?;

    let mut seen_goals = std::collections::BTreeSet::new();
    for goal in &raw.goals {
        goal.validate()?;
        if !seen_goals.insert(goal.id.clone()) {
            return Err(ScenarioError::DuplicateGoal(goal.id.clone()));
        }
    }

    let mut assignment = BTreeMap::new();
    for (variable, value) in &raw.dimension_map {
        assignment.insert(variable.clone(), parse_dimension(variable, value)?);
    }
    let mut modes = BTreeMap::new();
    for (mode, overrides) in &raw.modes {
        let mut parsed = BTreeMap::new();
        for (variable, value) in overrides {
            parsed.insert(variable.clone(), parse_dimension(variable, value)?);
        }
        modes.insert(mode.clone(), parsed);
    }
    let dimension_map = DimensionMap::new(assignment, modes, raw.active_mode.clone())
        .map_err(ScenarioError::Dimensions)?;

    let mut devices = Vec::new();
    let mut seen_devices = std::collections::BTreeSet::new();
    for d in &raw.devices {
        if !seen_devices.insert(d.id.clone()) {
            return Err(ScenarioError::DuplicateDevice(d.id.clone()));
        }
        if !(0.0..=100.0).contains(&d.battery) {
            return Err(ScenarioError::Device {
                id: d.id.clone(),
                message: format!("battery {} outside [0,100]", d.battery),
            });
        }
        devices.push(DeviceDescriptor {
            id: d.id.clone(),
            capabilities: d.capabilities.iter().cloned().collect(),
            battery: d.battery,
            reachable: true,
            params: d.params.clone(),
        });
    }

    for effect in &raw.effects {
        if !model.contains(&effect.feature) {
            return Err(ScenarioError::UnknownEffectFeature(effect.feature.clone()));
        }
    }
    for feature in raw.dconfig_defaults.keys() {
        if !model.contains(feature) {
            return Err(ScenarioError::UnknownDefaultFeature(feature.clone()));
        }
    }

    let known_modes: std::collections::BTreeSet<&str> = raw.modes.keys().map(String::as_str).collect();
    for entry in &raw.timeline {
        match &entry.action {
            TimelineAction::Mode { mode } => {
                if mode != BASE_MODE && !known_modes.contains(mode.as_str()) {
                    return Err(ScenarioError::Timeline {
                        t: entry.t,
                        message: format!("unknown mode `{mode}`"),
                    });
                }
            }
            TimelineAction::DeviceFail { device }
            | TimelineAction::CommandDrop { device }
            | TimelineAction::ReadingOverride { device, .. } => {
                if !seen_devices.contains(device) {
                    return Err(ScenarioError::Timeline {
                        t: entry.t,
                        message: format!("unknown device `{device}`"),
                    });
                }
            }
            TimelineAction::Fact { valid_at, .. } => {
                if *valid_at < entry.t {
                    return Err(ScenarioError::Timeline {
                        t: entry.t,
                        message: format!("fact valid_at {valid_at} precedes issue tick"),
                    });
                }
            }
            TimelineAction::Rain { .. } => {}
        }
    }
    let mut timeline = raw.timeline;
    timeline.sort_by_key(|e| e.t);

    let selection = Selection::new(raw.initial_selection.iter().map(String::as_str));
    match check_selection(&model, &selection) {
        Ok(verdict) if !verdict.is_valid() => {
            let lines: Vec<String> = verdict
                .violations()
                .iter()
                .map(ToString::to_string)
                .collect();
            return Err(ScenarioError::InitialSelectionInvalid(lines.join("; ")));
        }
        Err(SelectionError::UnknownFeature(f)) => {
            return Err(ScenarioError::InitialSelectionInvalid(format!(
                "unknown feature `{f}`"
            )));
        }
        Err(e) => return Err(ScenarioError::InitialSelectionInvalid(e.to_string())),
        Ok(_) => {}
    }
    let initial = derive_fconfig(&model, &selection, &devices, &raw.dconfig_defaults)
        .map_err(|e: DeriveError| ScenarioError::InitialSelectionInvalid(e.to_string()))?;

    Ok(Scenario {
        model,
        devices,
        dimension_map,
        initial,
        goals: raw.goals,
        settings: raw.loop_settings,
        effects: raw.effects,
        dconfig_defaults: raw.dconfig_defaults,
        dynamics: raw.dynamics,
        timeline,
    })
}

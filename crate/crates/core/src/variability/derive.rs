//! Product derivation: turning a valid selection into a deployable
//! configuration with concrete device bindings and per-device parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::FeatureModel;
use super::selection::{check_selection, RuleViolation, Selection, SelectionError};
use crate::knowledge::DeviceDescriptor;

/// A parameter value in a device configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

impl ParamValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ParamValue::Number(n) => Some(*n),
            _ => None,
        }
    }
}

/// Parameters to push to one device.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DConfig {
    pub params: BTreeMap<String, ParamValue>,
}

impl DConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: ParamValue) {
        self.params.insert(key.into(), value);
    }

    /// Later entries win on key collisions.
    pub fn merge_from(&mut self, other: &DConfig) {
        for (k, v) in &other.params {
            self.params.insert(k.clone(), v.clone());
        }
    }
}

/// A fully derived product: the selection, which device realizes each
/// capability-bearing feature, and what parameters each bound device gets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FConfig {
    pub selection: Selection,
    /// feature name -> device id
    pub bindings: BTreeMap<String, String>,
    /// device id -> merged parameters
    pub dconfigs: BTreeMap<String, DConfig>,
}

/// Why derivation failed.
#[derive(Debug, Error, PartialEq)]
pub enum DeriveError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("selection is invalid: {}", format_violations(.violations))]
    InvalidSelection { violations: Vec<RuleViolation> },
    #[error("no reachable device offers [{}] for feature `{feature}`", .missing.join(","))]
    UnsatisfiedCapability { feature: String, missing: Vec<String> },
}

fn format_violations(violations: &[RuleViolation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl From<SelectionError> for DeriveError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::UnknownFeature(f) => DeriveError::UnknownFeature(f),
            // Derivation never enumerates, so the size cap cannot trip here.
            SelectionError::ModelTooLarge { .. } => {
                unreachable!("derivation does not enumerate")
            }
        }
    }
}

/// Derives an `FConfig` from a valid selection. Each feature that declares
/// capability needs is bound to the reachable device with the smallest id
/// whose capability set covers all of them. Feature defaults (feature name
/// -> DConfig) are merged into each bound device's DConfig in sorted
/// feature order, so later feature names win on parameter collisions.
pub fn derive_fconfig(
    model: &FeatureModel,
    selection: &Selection,
    registry: &[DeviceDescriptor],
    feature_defaults: &BTreeMap<String, DConfig>,
) -> Result<FConfig, DeriveError> {
    let verdict = check_selection(model, selection)?;
    if !verdict.is_valid() {
        return Err(DeriveError::InvalidSelection {
            violations: verdict.violations().to_vec(),
        });
    }
    let mut bindings = BTreeMap::new();
    for feature in selection.iter() {
        let needs = model.capability_needs(feature);
        if needs.is_empty() {
            continue;
        }
        let device = registry
            .iter()
            .filter(|d| d.reachable && needs.iter().all(|c| d.capabilities.contains(c)))
            .map(|d| d.id.as_str())
            .min();
        match device {
            Some(id) => {
                bindings.insert(feature.to_string(), id.to_string());
            }
            None => {
                let mut missing = needs.to_vec();
                missing.sort();
                return Err(DeriveError::UnsatisfiedCapability {
                    feature: feature.to_string(),
                    missing,
                });
            }
        }
    }
    let mut dconfigs: BTreeMap<String, DConfig> = BTreeMap::new();
    for (feature, device) in &bindings {
        if let Some(defaults) = feature_defaults.get(feature) {
            dconfigs
                .entry(device.clone())
                .or_default()
                .merge_from(defaults);
        }
    }
    Ok(FConfig {
        selection: selection.clone(),
        bindings,
        dconfigs,
    })
}

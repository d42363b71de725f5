//! The MAPE-K knowledge base: a three-dimension variable map with
//! runtime reassignment, timestamped readings, environment facts
//! (forecasts), the device registry, and evaluation snapshots.
//!
//! Variables live in one of three dimensions. `system` covers the fleet
//! itself (battery, reachability) and is surfaced through the device
//! registry rather than the variable views. `context` variables are what
//! the running system senses and reasons about now. `environment`
//! variables are outside the system's sensing reach; they enter analysis
//! only through facts, so they show up in the predicted view and never in
//! the current one. Which dimension a variable belongs to can change at
//! runtime by switching modes — a fleet moved from a covered hall into an
//! open field suddenly has weather as context rather than environment.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::variability::DConfig;

/// Reserved name of the mode holding the unmodified base assignment.
pub const BASE_MODE: &str = "base";

/// Default battery floor (percent) below which a device is infeasible.
pub const DEFAULT_BATTERY_FLOOR: f64 = 10.0;

/// The three knowledge dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    System,
    Context,
    Environment,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::System => "system",
            Dimension::Context => "context",
            Dimension::Environment => "environment",
        })
    }
}

/// Maps variables to dimensions, with named modes that override parts of
/// the base assignment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionMap {
    pub assignment: BTreeMap<String, Dimension>,
    pub modes: BTreeMap<String, BTreeMap<String, Dimension>>,
    pub active_mode: String,
}

impl DimensionMap {
    /// Builds a map, checking that every mode only overrides declared
    /// variables and that the requested active mode exists.
    pub fn new(
        assignment: BTreeMap<String, Dimension>,
        modes: BTreeMap<String, BTreeMap<String, Dimension>>,
        active_mode: impl Into<String>,
    ) -> Result<Self, KnowledgeError> {
        for (mode, overrides) in &modes {
            for variable in overrides.keys() {
                if !assignment.contains_key(variable) {
                    return Err(KnowledgeError::UnknownModeVariable {
                        mode: mode.clone(),
                        variable: variable.clone(),
                    });
                }
            }
        }
        let active_mode = active_mode.into();
        if active_mode != BASE_MODE && !modes.contains_key(&active_mode) {
            return Err(KnowledgeError::UnknownMode(active_mode));
        }
        Ok(Self {
            assignment,
            modes,
            active_mode,
        })
    }

    /// The full variable→dimension assignment under the active mode.
    pub fn effective_assignment(&self) -> BTreeMap<String, Dimension> {
        let mut out = self.assignment.clone();
        if self.active_mode != BASE_MODE {
            if let Some(overrides) = self.modes.get(&self.active_mode) {
                for (variable, dim) in overrides {
                    out.insert(variable.clone(), *dim);
                }
            }
        }
        out
    }

    /// The dimension of a variable under the active mode, or `None` if the
    /// variable is unmapped.
    pub fn dimension_of(&self, variable: &str) -> Option<Dimension> {
        if self.active_mode != BASE_MODE {
            if let Some(overrides) = self.modes.get(&self.active_mode) {
                if let Some(dim) = overrides.get(variable) {
                    return Some(*dim);
                }
            }
        }
        self.assignment.get(variable).copied()
    }

    fn set_active(&mut self, mode: &str) -> Result<(), KnowledgeError> {
        if mode != BASE_MODE && !self.modes.contains_key(mode) {
            return Err(KnowledgeError::UnknownMode(mode.to_string()));
        }
        self.active_mode = mode.to_string();
        Ok(())
    }
}

/// A timestamped sensor reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub variable: String,
    pub value: f64,
    pub tick: u64,
    pub source: String,
}

/// A statement about the future value of a variable, e.g. a forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub variable: String,
    pub predicted_value: f64,
    pub valid_at: u64,
    pub issued_at: u64,
}

/// One fleet device as the knowledge base sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub id: String,
    pub capabilities: BTreeSet<String>,
    pub battery: f64,
    pub reachable: bool,
    #[serde(default)]
    pub params: DConfig,
}

/// A context variable's latest value in a snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurrentEntry {
    pub value: f64,
    /// Ticks since the value was sensed.
    pub age: u64,
    /// True when age exceeded the staleness window. The value is kept; the
    /// analyzer decides what staleness costs.
    pub stale: bool,
}

/// The frozen view the analyzer works from: what is known now, what is
/// predicted over the horizon, and which devices can take work.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationContext {
    pub now: u64,
    pub current: BTreeMap<String, CurrentEntry>,
    pub predicted: BTreeMap<String, f64>,
    pub feasible_devices: BTreeSet<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum KnowledgeError {
    #[error("battery {battery} out of range [0,100] for device `{id}`")]
    RangeError { id: String, battery: f64 },
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error(
        "out-of-order reading for `{variable}` from `{source_id}`: tick {tick} is before {latest}"
    )]
    StaleOutOfOrder {
        variable: String,
        source_id: String,
        tick: u64,
        latest: u64,
    },
    #[error("fact for `{variable}` is valid at {valid_at}, before its issue at {issued_at}")]
    InvalidFact {
        variable: String,
        valid_at: u64,
        issued_at: u64,
    },
    #[error("unknown mode `{0}`")]
    UnknownMode(String),
    #[error("mode `{mode}` overrides undeclared variable `{variable}`")]
    UnknownModeVariable { mode: String, variable: String },
}

/// The knowledge base. Single-writer: all mutation happens on the
/// adaptation loop's logical thread. Snapshots are plain values.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    dimension_map: DimensionMap,
    battery_floor: f64,
    /// variable -> latest (value, tick) across all sources.
    latest: BTreeMap<String, (f64, u64)>,
    /// (variable, source) -> last accepted tick, for the monotonicity rule.
    source_ticks: BTreeMap<(String, String), u64>,
    facts: Vec<Fact>,
    registry: BTreeMap<String, DeviceDescriptor>,
}

impl KnowledgeBase {
    pub fn new(dimension_map: DimensionMap, battery_floor: f64) -> Self {
        Self {
            dimension_map,
            battery_floor,
            latest: BTreeMap::new(),
            source_ticks: BTreeMap::new(),
            facts: Vec::new(),
            registry: BTreeMap::new(),
        }
    }

    pub fn battery_floor(&self) -> f64 {
        self.battery_floor
    }

    pub fn active_mode(&self) -> &str {
        &self.dimension_map.active_mode
    }

    pub fn dimension_of(&self, variable: &str) -> Option<Dimension> {
        self.dimension_map.dimension_of(variable)
    }

    /// The variable→dimension assignment under the active mode.
    pub fn dimension_assignment(&self) -> BTreeMap<String, Dimension> {
        self.dimension_map.effective_assignment()
    }

    /// True when the variable has readings but no dimension under the
    /// active mode, i.e. it is stored but invisible to snapshots.
    pub fn is_unmapped(&self, variable: &str) -> bool {
        self.latest.contains_key(variable) && self.dimension_of(variable).is_none()
    }

    /// Adds or replaces a device descriptor (last write wins).
    pub fn register_device(&mut self, descriptor: DeviceDescriptor) -> Result<(), KnowledgeError> {
        if !(0.0..=100.0).contains(&descriptor.battery) {
            return Err(KnowledgeError::RangeError {
                id: descriptor.id.clone(),
                battery: descriptor.battery,
            });
        }
        self.registry.insert(descriptor.id.clone(), descriptor);
        Ok(())
    }

    pub fn device(&self, id: &str) -> Option<&DeviceDescriptor> {
        self.registry.get(id)
    }

    /// The registry as a list, ordered by device id.
    pub fn devices(&self) -> Vec<DeviceDescriptor> {
        self.registry.values().cloned().collect()
    }

    pub fn set_reachable(&mut self, id: &str, reachable: bool) -> Result<(), KnowledgeError> {
        let device = self
            .registry
            .get_mut(id)
            .ok_or_else(|| KnowledgeError::UnknownDevice(id.to_string()))?;
        device.reachable = reachable;
        Ok(())
    }

    /// Records what configuration a device was last pushed.
    pub fn set_device_params(&mut self, id: &str, params: DConfig) -> Result<(), KnowledgeError> {
        let device = self
            .registry
            .get_mut(id)
            .ok_or_else(|| KnowledgeError::UnknownDevice(id.to_string()))?;
        device.params = params;
        Ok(())
    }

    /// Stores a reading. Readings must arrive with non-decreasing ticks
    /// per (variable, source); older ones are dropped with
    /// `StaleOutOfOrder`. Variables absent from the dimension map are
    /// stored but stay invisible to snapshots.
    pub fn ingest_reading(&mut self, r: Reading) -> Result<(), KnowledgeError> {
        let key = (r.variable.clone(), r.source.clone());
        if let Some(&latest) = self.source_ticks.get(&key) {
            if r.tick < latest {
                return Err(KnowledgeError::StaleOutOfOrder {
                    variable: r.variable,
                    source_id: r.source,
                    tick: r.tick,
                    latest,
                });
            }
        }
        self.source_ticks.insert(key, r.tick);
        match self.latest.get(&r.variable) {
            Some(&(_, tick)) if r.tick < tick => {}
            _ => {
                self.latest.insert(r.variable, (r.value, r.tick));
            }
        }
        Ok(())
    }

    /// Stores a fact for the predicted view. Facts must not claim validity
    /// before they were issued.
    pub fn ingest_fact(&mut self, f: Fact) -> Result<(), KnowledgeError> {
        if f.valid_at < f.issued_at {
            return Err(KnowledgeError::InvalidFact {
                variable: f.variable,
                valid_at: f.valid_at,
                issued_at: f.issued_at,
            });
        }
        self.facts.push(f);
        Ok(())
    }

    /// Switches the active mode, atomically changing every dimension
    /// assignment the mode overrides. Returns the previous mode name.
    pub fn set_mode(&mut self, mode: &str) -> Result<String, KnowledgeError> {
        let previous = self.dimension_map.active_mode.clone();
        self.dimension_map.set_active(mode)?;
        Ok(previous)
    }

    /// Builds the evaluation view at `now`.
    ///
    /// The current view holds the latest value of every context-dimension
    /// variable, with its age; entries older than `staleness_window` are
    /// flagged stale. The predicted view starts from the current values
    /// and is overridden by facts (context or environment dimension) that
    /// become valid within `[now, now + horizon]`, nearest-future first.
    /// Environment variables appear only in the predicted view. Feasible
    /// devices are the reachable ones above the battery floor.
    pub fn snapshot(&self, now: u64, horizon: u64, staleness_window: u64) -> EvaluationContext {
        let mut current = BTreeMap::new();
        for (variable, &(value, tick)) in &self.latest {
            if self.dimension_of(variable) != Some(Dimension::Context) {
                continue;
            }
            let age = now.saturating_sub(tick);
            current.insert(
                variable.clone(),
                CurrentEntry {
                    value,
                    age,
                    stale: age > staleness_window,
                },
            );
        }

        let mut predicted: BTreeMap<String, f64> =
            current.iter().map(|(k, e)| (k.clone(), e.value)).collect();
        // Pick the nearest-future fact per variable; ties on valid_at go
        // to the most recently issued, then the larger value, so the
        // choice is independent of ingestion order.
        let mut chosen: BTreeMap<&str, &Fact> = BTreeMap::new();
        for fact in &self.facts {
            if fact.valid_at < now || fact.valid_at > now.saturating_add(horizon) {
                continue;
            }
            match self.dimension_of(&fact.variable) {
                Some(Dimension::Context) | Some(Dimension::Environment) => {}
                _ => continue,
            }
            let replace = match chosen.get(fact.variable.as_str()) {
                None => true,
                Some(prev) => {
                    (fact.valid_at, prev.issued_at, prev.predicted_value)
                        < (prev.valid_at, fact.issued_at, fact.predicted_value)
                }
            };
            if replace {
                chosen.insert(&fact.variable, fact);
            }
        }
        for (variable, fact) in chosen {
            predicted.insert(variable.to_string(), fact.predicted_value);
        }

        let feasible_devices = self
            .registry
            .values()
            .filter(|d| d.reachable && d.battery > self.battery_floor)
            .map(|d| d.id.clone())
            .collect();

        EvaluationContext {
            now,
            current,
            predicted,
            feasible_devices,
        }
    }
}

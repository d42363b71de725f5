//! Simulated device state. A device holds the features currently active on
//! it and its parameter set; command effects are staged and promoted at the
//! start of the next tick (actuation latency of one tick).

use std::collections::BTreeSet;

use crate::adaptation::CommandAction;
use crate::variability::{DConfig, ParamValue};

#[derive(Debug, Clone, PartialEq)]
pub enum StagedChange {
    Activate(String),
    Deactivate(String),
    Configure(DConfig),
}

#[derive(Debug, Clone)]
pub struct SimDevice {
    pub id: String,
    pub capabilities: BTreeSet<String>,
    pub battery: f64,
    /// Features currently running on this device.
    pub active: BTreeSet<String>,
    pub params: DConfig,
    /// Changes acknowledged this tick, applied at the next tick boundary.
    pub pending: Vec<StagedChange>,
    pub failed: bool,
    /// Scripted one-shot loss: the next command to this device is dropped.
    pub drop_next_command: bool,
    /// Scripted sensor miscalibration: variable → reported value.
    pub overrides: std::collections::BTreeMap<String, f64>,
}

impl SimDevice {
    pub fn new(id: impl Into<String>, capabilities: BTreeSet<String>, battery: f64) -> Self {
        Self {
            id: id.into(),
            capabilities,
            battery,
            active: BTreeSet::new(),
            params: DConfig::default(),
            pending: Vec::new(),
            failed: false,
            drop_next_command: false,
            overrides: std::collections::BTreeMap::new(),
        }
    }

    /// Delivers a command. Returns whether the device acknowledges: a failed
    /// device never does, and a scripted drop swallows exactly one command.
    pub fn handle_command(&mut self, action: &CommandAction) -> bool {
        if self.failed {
            return false;
        }
        if self.drop_next_command {
            self.drop_next_command = false;
            return false;
        }
        let staged = match action {
            CommandAction::Activate { feature } => StagedChange::Activate(feature.clone()),
            CommandAction::Deactivate { feature } => StagedChange::Deactivate(feature.clone()),
            CommandAction::Configure { params } => StagedChange::Configure(params.clone()),
        };
        self.pending.push(staged);
        true
    }

    /// Promotes staged changes; called at the start of every tick.
    pub fn apply_pending(&mut self) {
        for change in std::mem::take(&mut self.pending) {
            match change {
                StagedChange::Activate(feature) => {
                    self.active.insert(feature);
                }
                StagedChange::Deactivate(feature) => {
                    self.active.remove(&feature);
                }
                StagedChange::Configure(params) => {
                    self.params.merge_from(&params);
                }
            }
        }
    }

    /// Numeric `rate` parameter, the actuation strength for watering
    /// features; absent or non-numeric counts as zero.
    pub fn rate(&self) -> f64 {
        self.params
            .params
            .get("rate")
            .and_then(ParamValue::as_number)
            .unwrap_or(0.0)
    }
}

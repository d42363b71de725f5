//! The simulated world: a lock-step clock driving scripted events, plant
//! dynamics, device sensing, knowledge ingestion, and the adaptation loop,
//! all over the in-process bus. Identical (scenario, seed) inputs produce
//! byte-identical traces.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use thiserror::Error;

use super::bus::Bus;
use super::device::SimDevice;
use super::scenario::{load_scenario, DynamicsSpec, Scenario, ScenarioError, TimelineAction, TimelineEvent};
use crate::adaptation::{AdaptationEngine, Command, CommandPort};
use crate::knowledge::{Fact, KnowledgeBase, Reading};
use crate::trace::{TraceEvent, TraceKind};

/// The world variable governed by the irrigation dynamics.
const MOISTURE: &str = "soil_moisture";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("until must be positive")]
    InvalidUntil,
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug)]
struct Dynamics {
    spec: DynamicsSpec,
    state: BTreeMap<String, f64>,
    rain_now: f64,
}

pub struct World {
    clock: u64,
    devices: BTreeMap<String, SimDevice>,
    bus: Bus,
    kb: KnowledgeBase,
    engine: AdaptationEngine,
    dynamics: Dynamics,
    timeline: Vec<TimelineEvent>,
    next_event: usize,
    rng: ChaCha8Rng,
    /// feature → world variables its sensing capabilities report.
    sensed_by_feature: BTreeMap<String, Vec<String>>,
    /// Features whose capability needs include a watering actuator.
    watering: BTreeSet<String>,
}

/// The executor's transport, implemented over the bus: the command is
/// published to `cmd/<id>`, delivered to the device, and the device's
/// acknowledgement is awaited on `ack/<id>` — all within the same tick.
struct SimPort<'a> {
    bus: &'a mut Bus,
    devices: &'a mut BTreeMap<String, SimDevice>,
}

impl CommandPort for SimPort<'_> {
    fn send(&mut self, command: &Command, now: u64, _ack_timeout: u64) -> bool {
        let cmd_topic = format!("cmd/{}", command.device);
        let ack_topic = format!("ack/{}", command.device);
        self.bus
            .publish(&cmd_topic, serde_json::to_value(command).expect("command serializes"), now);
        while let Some(message) = self.bus.pop(&cmd_topic) {
            let Ok(delivered) = serde_json::from_value::<Command>(message.payload) else {
                continue;
            };
            if let Some(device) = self.devices.get_mut(&delivered.device) {
                if device.handle_command(&delivered.action) {
                    self.bus
                        .publish(&ack_topic, json!({"seq": delivered.seq}), now);
                }
            }
        }
        let mut acked = false;
        while let Some(ack) = self.bus.pop(&ack_topic) {
            if ack.payload["seq"] == json!(command.seq) {
                acked = true;
            }
        }
        acked
    }
}

impl World {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        let Scenario {
            model,
            devices: descriptors,
            dimension_map,
            initial,
            goals,
            settings,
            effects,
            dconfig_defaults,
            dynamics,
            timeline,
        } = scenario;

        let mut kb = KnowledgeBase::new(dimension_map, settings.battery_floor);
        let mut devices = BTreeMap::new();
        for d in &descriptors {
            kb.register_device(d.clone())
                .expect("scenario validated device");
            let mut sim = SimDevice::new(&d.id, d.capabilities.clone(), d.battery);
            sim.params = d.params.clone();
            devices.insert(d.id.clone(), sim);
        }

        // Pre-apply the initial configuration: the fleet starts already
        // running it, not converging toward it.
        for (feature, device) in &initial.bindings {
            if let Some(sim) = devices.get_mut(device) {
                sim.active.insert(feature.clone());
            }
        }
        for (device, dconfig) in &initial.dconfigs {
            if let Some(sim) = devices.get_mut(device) {
                sim.params.merge_from(dconfig);
                kb.set_device_params(device, sim.params.clone())
                    .expect("device registered above");
            }
        }

        let mut sensed_by_feature = BTreeMap::new();
        let mut watering = BTreeSet::new();
        for feature in model.feature_names() {
            let needs = model.capability_needs(&feature);
            let sensed: Vec<String> = needs
                .iter()
                .filter_map(|cap| cap.strip_prefix("sense."))
                .map(str::to_string)
                .collect();
            if !sensed.is_empty() {
                sensed_by_feature.insert(feature.clone(), sensed);
            }
            if needs.iter().any(|cap| cap.starts_with("water.")) {
                watering.insert(feature.clone());
            }
        }

        let state = dynamics.initial.clone();
        let engine = AdaptationEngine::new(
            model,
            goals,
            settings,
            effects,
            dconfig_defaults,
            initial,
        );
        Self {
            clock: 0,
            devices,
            bus: Bus::new(),
            kb,
            engine,
            dynamics: Dynamics {
                spec: dynamics,
                state,
                rain_now: 0.0,
            },
            timeline,
            next_event: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            sensed_by_feature,
            watering,
        }
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn kb(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn engine(&self) -> &AdaptationEngine {
        &self.engine
    }

    pub fn device(&self, id: &str) -> Option<&SimDevice> {
        self.devices.get(id)
    }

    pub fn dynamics_value(&self, variable: &str) -> Option<f64> {
        self.dynamics.state.get(variable).copied()
    }

    fn apply_timeline(&mut self, events: &mut Vec<TraceEvent>) {
        while self.next_event < self.timeline.len() && self.timeline[self.next_event].t <= self.clock
        {
            let entry = self.timeline[self.next_event].clone();
            self.next_event += 1;
            match entry.action {
                TimelineAction::Fact {
                    variable,
                    predicted_value,
                    valid_at,
                } => {
                    let fact = Fact {
                        variable: variable.clone(),
                        predicted_value,
                        valid_at,
                        issued_at: self.clock,
                    };
                    match self.kb.ingest_fact(fact) {
                        Ok(()) => events.push(TraceEvent::new(
                            self.clock,
                            TraceKind::Fact,
                            json!({
                                "variable": variable,
                                "predicted_value": predicted_value,
                                "valid_at": valid_at,
                                "issued_at": self.clock,
                            }),
                        )),
                        Err(e) => events.push(TraceEvent::new(
                            self.clock,
                            TraceKind::Warning,
                            json!({"message": e.to_string()}),
                        )),
                    }
                }
                TimelineAction::Mode { mode } => match self.kb.set_mode(&mode) {
                    Ok(previous) => events.push(TraceEvent::new(
                        self.clock,
                        TraceKind::ModeSwitch,
                        json!({"from": previous, "to": mode}),
                    )),
                    Err(e) => events.push(TraceEvent::new(
                        self.clock,
                        TraceKind::Warning,
                        json!({"message": e.to_string()}),
                    )),
                },
                TimelineAction::Rain { amount } => {
                    self.dynamics.rain_now += amount;
                }
                TimelineAction::DeviceFail { device } => {
                    if let Some(sim) = self.devices.get_mut(&device) {
                        sim.failed = true;
                    }
                    let _ = self.kb.set_reachable(&device, false);
                    events.push(TraceEvent::new(
                        self.clock,
                        TraceKind::Warning,
                        json!({"message": "device failed", "device": device}),
                    ));
                }
                TimelineAction::ReadingOverride {
                    device,
                    variable,
                    value,
                } => {
                    if let Some(sim) = self.devices.get_mut(&device) {
                        sim.overrides.insert(variable, value);
                    }
                }
                TimelineAction::CommandDrop { device } => {
                    if let Some(sim) = self.devices.get_mut(&device) {
                        sim.drop_next_command = true;
                    }
                }
            }
        }
    }

    /// Sum of `rate` parameters over live devices running a watering
    /// feature.
    fn active_rate(&self) -> f64 {
        self.devices
            .values()
            .filter(|d| !d.failed && d.active.iter().any(|f| self.watering.contains(f)))
            .map(SimDevice::rate)
            .sum()
    }

    fn advance_dynamics(&mut self) {
        let Some(moisture) = self.dynamics.state.get(MOISTURE).copied() else {
            return;
        };
        let spec = &self.dynamics.spec;
        let mut next = moisture - spec.dry_rate
            + spec.irrigation_gain * self.active_rate()
            + spec.rain_gain * self.dynamics.rain_now;
        if spec.noise > 0.0 {
            next += self.rng.gen_range(-spec.noise..=spec.noise);
        }
        self.dynamics.state.insert(MOISTURE.to_string(), next.clamp(0.0, 100.0));
    }

    fn publish_readings(&mut self) {
        for device in self.devices.values() {
            if device.failed {
                continue;
            }
            for feature in &device.active {
                let Some(variables) = self.sensed_by_feature.get(feature) else {
                    continue;
                };
                for variable in variables {
                    let value = device
                        .overrides
                        .get(variable)
                        .copied()
                        .or_else(|| self.dynamics.state.get(variable).copied());
                    if let Some(value) = value {
                        self.bus.publish(
                            format!("sensor/{}", device.id),
                            json!({"variable": variable, "value": value}),
                            self.clock,
                        );
                    }
                }
            }
        }
    }

    fn ingest_readings(&mut self, events: &mut Vec<TraceEvent>) {
        for message in self.bus.drain_prefix("sensor/") {
            let source = message.topic.trim_start_matches("sensor/").to_string();
            let (Some(variable), Some(value)) = (
                message.payload["variable"].as_str(),
                message.payload["value"].as_f64(),
            ) else {
                continue;
            };
            let reading = Reading {
                variable: variable.to_string(),
                value,
                tick: message.tick,
                source: source.clone(),
            };
            match self.kb.ingest_reading(reading) {
                Ok(()) => events.push(TraceEvent::new(
                    self.clock,
                    TraceKind::Reading,
                    json!({"device": source, "variable": variable, "value": value}),
                )),
                Err(e) => events.push(TraceEvent::new(
                    self.clock,
                    TraceKind::Warning,
                    json!({"message": e.to_string()}),
                )),
            }
        }
    }

    /// Advances the world one tick and returns the events it produced.
    pub fn step(&mut self) -> Vec<TraceEvent> {
        let mut events = Vec::new();
        // Commands acknowledged last tick take effect now.
        for device in self.devices.values_mut() {
            device.apply_pending();
        }
        self.dynamics.rain_now = 0.0;
        self.apply_timeline(&mut events);
        self.advance_dynamics();
        self.publish_readings();
        self.ingest_readings(&mut events);
        if self.clock % self.engine.settings().period == 0 {
            let mut port = SimPort {
                bus: &mut self.bus,
                devices: &mut self.devices,
            };
            events.extend(self.engine.step(&mut self.kb, self.clock, &mut port));
        }
        self.clock += 1;
        events
    }

    /// Steps until the clock reaches `until`, writing each event as one
    /// JSONL line to `sink`, and returns the full event list.
    pub fn run(&mut self, until: u64, sink: &mut dyn Write) -> Result<Vec<TraceEvent>, RunError> {
        if until == 0 {
            return Err(RunError::InvalidUntil);
        }
        let mut all = Vec::new();
        while self.clock < until {
            let events = self.step();
            for event in &events {
                writeln!(sink, "{}", event.to_line())?;
            }
            all.extend(events);
        }
        Ok(all)
    }
}

/// Parses a scenario and builds a world from it in one go.
pub fn load_world(text: &str, base_dir: Option<&Path>, seed: u64) -> Result<World, ScenarioError> {
    Ok(World::new(load_scenario(text, base_dir)?, seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini_scenario(initial_moisture: f64, initial_selection: &[&str]) -> String {
        json!({
            "model": {
                "name": "mini",
                "root": {"name": "R", "groups": [
                    {"kind": "mandatory", "children": [{"name": "Sense"}]},
                    {"kind": "optional", "children": [{"name": "Water"}]}
                ]},
                "capabilities": {
                    "Sense": ["sense.soil_moisture"],
                    "Water": ["water.pump"]
                }
            },
            "devices": [
                {"id": "p1", "capabilities": ["water.pump"], "battery": 80},
                {"id": "s1", "capabilities": ["sense.soil_moisture"], "battery": 90}
            ],
            "dimension_map": {"soil_moisture": "context"},
            "initial_selection": initial_selection,
            "goals": [
                {"id": "moist", "weight": 1, "kind": "above",
                 "variable": "soil_moisture", "threshold": 32, "ramp": 2}
            ],
            "loop": {"period": 4, "horizon": 10, "staleness": 6},
            "effects": [
                {"feature": "Water", "variable": "soil_moisture", "predicted": 40.0}
            ],
            "dconfig_defaults": {"Water": {"rate": 1.0}},
            "dynamics": {
                "dry_rate": 0.5, "irrigation_gain": 3.5, "rain_gain": 2.0,
                "initial": {"soil_moisture": initial_moisture}
            }
        })
        .to_string()
    }

    #[test]
    fn dry_rate_applies_once_per_step() {
        let mut world = load_world(&mini_scenario(41.0, &["R", "Sense"]), None, 0).unwrap();
        world.step();
        assert_eq!(world.dynamics_value("soil_moisture"), Some(40.5));
    }

    #[test]
    fn moisture_clamps_at_zero() {
        let mut world = load_world(&mini_scenario(0.2, &["R", "Sense"]), None, 0).unwrap();
        world.step();
        assert_eq!(world.dynamics_value("soil_moisture"), Some(0.0));
    }

    #[test]
    fn loop_runs_on_period_multiples_only() {
        let mut world = load_world(&mini_scenario(80.0, &["R", "Sense"]), None, 0).unwrap();
        let mut analyze_ticks = Vec::new();
        for _ in 0..9 {
            for event in world.step() {
                if event.kind == TraceKind::Analyze {
                    analyze_ticks.push(event.t);
                }
            }
        }
        assert_eq!(analyze_ticks, vec![0, 4, 8]);
    }

    #[test]
    fn actuation_takes_effect_next_tick() {
        // Moisture 10 → violation at the t=0 loop; Water activates on p1
        // but its pump only contributes from t=1 on.
        let mut world = load_world(&mini_scenario(10.0, &["R", "Sense"]), None, 0).unwrap();
        let events = world.step();
        assert!(events.iter().any(|e| e.kind == TraceKind::Adapt));
        assert_eq!(world.dynamics_value("soil_moisture"), Some(9.5));
        assert!(world.device("p1").unwrap().active.is_empty());
        world.step();
        assert!(world.device("p1").unwrap().active.contains("Water"));
        // 9.5 − 0.5 + 3.5·1.0
        assert_eq!(world.dynamics_value("soil_moisture"), Some(12.5));
    }

    #[test]
    fn initial_config_is_preapplied() {
        let world = load_world(&mini_scenario(50.0, &["R", "Sense", "Water"]), None, 0).unwrap();
        assert!(world.device("p1").unwrap().active.contains("Water"));
        assert_eq!(world.device("p1").unwrap().rate(), 1.0);
        assert!(world.device("s1").unwrap().active.contains("Sense"));
    }

    #[test]
    fn run_rejects_zero_until() {
        let mut world = load_world(&mini_scenario(50.0, &["R", "Sense"]), None, 0).unwrap();
        let mut sink = Vec::new();
        assert!(matches!(world.run(0, &mut sink), Err(RunError::InvalidUntil)));
    }

    #[test]
    fn identical_seed_and_scenario_reproduce_trace_bytes() {
        let text = mini_scenario(25.0, &["R", "Sense"]);
        let mut a = Vec::new();
        load_world(&text, None, 7).unwrap().run(40, &mut a).unwrap();
        let mut b = Vec::new();
        load_world(&text, None, 7).unwrap().run(40, &mut b).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn device_failure_warns_and_marks_unreachable() {
        let mut v: serde_json::Value =
            serde_json::from_str(&mini_scenario(50.0, &["R", "Sense"])).unwrap();
        v["timeline"] = json!([{"t": 2, "event": "device_fail", "device": "s1"}]);
        let mut world = load_world(&v.to_string(), None, 0).unwrap();
        world.step();
        world.step();
        let events = world.step();
        assert!(events
            .iter()
            .any(|e| e.kind == TraceKind::Warning && e.payload["device"] == "s1" && e.t == 2));
        assert!(!world.kb().device("s1").unwrap().reachable);
        // The failed sensor stops publishing from its failure tick on.
        assert!(!events.iter().any(|e| e.kind == TraceKind::Reading));
    }

    #[test]
    fn command_drop_aborts_and_marks_device() {
        let mut v: serde_json::Value =
            serde_json::from_str(&mini_scenario(10.0, &["R", "Sense"])).unwrap();
        v["timeline"] = json!([{"t": 0, "event": "command_drop", "device": "p1"}]);
        let mut world = load_world(&v.to_string(), None, 0).unwrap();
        let events = world.step();
        assert!(!events.iter().any(|e| e.kind == TraceKind::Adapt));
        assert!(events
            .iter()
            .any(|e| e.kind == TraceKind::Warning
                && e.payload["message"]
                    .as_str()
                    .unwrap()
                    .contains("ack timeout")));
        assert!(!world.kb().device("p1").unwrap().reachable);
        assert!(!world.engine().current().selection.contains("Water"));
    }

    #[test]
    fn fact_event_is_traced_and_feeds_prediction() {
        let mut v: serde_json::Value =
            serde_json::from_str(&mini_scenario(50.0, &["R", "Sense"])).unwrap();
        v["timeline"] = json!([
            {"t": 1, "event": "fact", "variable": "soil_moisture",
             "predicted_value": 70.0, "valid_at": 6}
        ]);
        let mut world = load_world(&v.to_string(), None, 0).unwrap();
        world.step();
        let events = world.step();
        assert!(events
            .iter()
            .any(|e| e.kind == TraceKind::Fact && e.payload["valid_at"] == 6));
        let snapshot = world.kb().snapshot(2, 10, 6);
        assert_eq!(snapshot.predicted.get("soil_moisture"), Some(&70.0));
    }

    #[test]
    fn mode_switch_is_traced() {
        let mut v: serde_json::Value =
            serde_json::from_str(&mini_scenario(50.0, &["R", "Sense"])).unwrap();
        v["dimension_map"]["rain_expected"] = json!("environment");
        v["modes"] = json!({"open": {"rain_expected": "context"}});
        v["timeline"] = json!([{"t": 1, "event": "mode", "mode": "open"}]);
        let mut world = load_world(&v.to_string(), None, 0).unwrap();
        world.step();
        let events = world.step();
        let switch = events
            .iter()
            .find(|e| e.kind == TraceKind::ModeSwitch)
            .unwrap();
        assert_eq!(switch.payload, json!({"from": "base", "to": "open"}));
        assert_eq!(world.kb().active_mode(), "open");
    }
}

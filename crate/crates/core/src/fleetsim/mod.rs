//! Deterministic discrete-time fleet simulation: virtual devices on an
//! in-process pub/sub bus, linear irrigation dynamics, scripted timelines,
//! and trace recording. The simulator is single-threaded and lock-step; the
//! bus contract (FIFO per topic, same-tick delivery) is defined so another
//! transport could replace it without changing observable traces.

mod bus;
mod device;
mod scenario;
mod world;

pub use bus::{Bus, BusMessage};
pub use device::{SimDevice, StagedChange};
pub use scenario::{
    load_scenario, DynamicsSpec, Scenario, ScenarioError, TimelineAction, TimelineEvent,
};
pub use world::{load_world, RunError, World};

//! fleetline — a dynamic product-line engine for self-adaptive IoT fleets.
//!
//! The crate is organized around a MAPE-K loop over a fleet of devices:
//!
//! * [`variability`] — feature models, selection validation/enumeration,
//!   and derivation of deployable configurations bound to devices.
//! * [`knowledge`] — the knowledge base: three-dimension variable map,
//!   readings, forecast facts, device registry, evaluation snapshots.
//! * [`adaptation`] — goals, the analyzer, the planner, and the executor
//!   that together close the loop.
//! * [`trace`] — the byte-stable JSONL event trace and its replay checker.
//! * [`fleetsim`] — a deterministic discrete-time fleet simulator with an
//!   in-process message bus, used by the CLI and the test suite.

pub mod adaptation;
pub mod cli;
pub mod fleetsim;
pub mod knowledge;
pub mod trace;
pub mod variability;

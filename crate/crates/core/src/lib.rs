//! Deterministic, event-sourced simulator of an autonomous supply chain.
//!
//! Structural entities (suppliers, a wholesaler, retailers, logistics
//! companies and 3PL carriers) negotiate through nested Contract Net rounds.
//! Awarded orders are shipped along routes with simulated sensors, received
//! into inventory and assessed. Every change is an [`event::Event`]; the
//! [`world::World`] is a fold over the log, so a log replays to the same
//! state byte for byte.

pub mod agents;
pub mod autonomy;
pub mod contract_net;
pub mod event;
pub mod model;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod world;

pub use event::{Event, EventBody, EventLog, SimTime};
pub use scenario::{load_scenario, Scenario};
pub use sim::engine::{SimError, Simulation};
pub use world::{Snapshot, World};

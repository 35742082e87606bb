//! Service layer for the simulator: scenario and log files, the live driver
//! and the HTTP API used by the operator console.

pub mod api;
pub mod files;
pub mod live;

pub use api::router;
pub use live::{LiveConfig, LiveHandle, Pacing};

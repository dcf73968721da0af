//! Ledger-backed edge node selection for computation offloading.
//!
//! Devices, resource samples and latency probes are recorded through four
//! deterministic contracts on a small hash-chained ledger. A gateway exposes
//! the contracts over HTTP, a daemon feeds them from each device, and the
//! simulator replays whole network scenarios end to end.

pub mod clock;
pub mod contracts;
pub mod ledger;
pub mod daemon;
pub mod gateway;
pub mod sim;
pub mod cli;

//! Scenario simulator.
//!
//! Runs a gateway, a ledger and one daemon per edge server in-process, with
//! emulated links between the servers and the sensors, then reports the
//! selection alongside per-server means. Time is compressed: the ledger clock
//! runs `timeScale` times faster than the wall clock, while probe latencies
//! are real round trips over loopback with injected delays.

pub mod link;
pub mod report;
pub mod runner;
pub mod scenario;

pub use link::{stream_rng, LinkTable, SyntheticMeter, VirtualLink};
pub use report::{
    compare_to_expectation, load_expectation, parse_expectation, Comparison, Expectation,
    ScenarioReport, ServerExpectation, ServerReport,
};
pub use runner::{run_scenario, run_scenario_file, run_scenario_full, ScenarioRun, SimError};
pub use scenario::{
    load_scenario, parse_scenario, DeviceSpec, LinkProfile, ResourceProfile, ScenarioError,
    ScenarioSpec,
};

//! Scenario runner, signal traces and the operator WebSocket API.

pub mod batch;
pub mod runner;
pub mod scenario;
pub mod trace;
pub mod ws;

pub use runner::{
    resolve_seed, resolve_signal, seed_from_env, ExitStatus, HarnessError, PlcBinding, RunConfig, RunOutcome,
    Runner, Verdict, PRESS_SECONDS,
};
pub use scenario::{Command, Scenario, ScenarioError, TimedCommand};
pub use trace::TraceRow;

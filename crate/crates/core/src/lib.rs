//! Headless road-tunnel digital twin: signal bus, PLC variable-list code
//! generation, a soft PLC for guarded-transition controllers, the plant
//! simulation, the gateway between them and the scenario harness.

pub mod bus;
pub mod gateway;
pub mod gts;
pub mod harness;
pub mod plant;
pub mod policy;
pub mod varlist;

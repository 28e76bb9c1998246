//! Slot-level simulator of a massive-MIMO downlink cell with joint antenna
//! and transmit-power adaptation.
//!
//! The crate is organised by simulator subsystem:
//!
//! - [`mcs`] and [`la`]: MCS table, BLER abstraction and the link-adaptation
//!   solvers (rate-maximising baseline, PSD-minimising POLITE, load-driven β).
//! - [`channel`]: abstract per-UE SINR model, wideband CSI reports and the
//!   adjacent-allocation leakage model that produces per-RB interference.
//! - [`scheduler`]: PF metric, contiguous RB allocation, the joint antenna
//!   and power adaptation scheduler and the five baseline schemes.
//! - [`power`]: active-state power model and the sleep-state machine.
//! - [`traffic`]: FTP3 arrivals, per-UE buffers and HARQ bookkeeping.
//! - [`engine`]: the slot loop, drops and campaigns.
//! - [`kpi`]: UPT, power, IPV and RB-utilisation aggregation and CSV export.
//! - [`config`]: the scenario file format, overrides and validation.

pub mod channel;
pub mod config;
pub mod engine;
mod error;
pub mod fixtures;
pub mod kpi;
pub mod la;
pub mod mcs;
pub mod power;
pub mod rng;
pub mod scheduler;
pub mod traffic;

pub use error::{Error, Issue, Result};

//! Proportional-fair MAC scheduling with joint antenna and power adaptation.

mod alg;
mod alloc;
mod pf;
mod types;

pub use alg::{alg1_schedule, baseline_schedule, schedule, SlotContext};
pub use alloc::{allocate_contiguous, distribute_leftover, Demand};
pub use pf::{pf_metric, pf_order, update_average};
pub use types::{
    Allocation, ConfigId, ConfigSet, CsiRsConfig, Scheme, SchemeSetup, SlotDecision, UeView,
};

//! gNB power consumption in relative units (deep sleep = 1).
//!
//! Active slots follow a static term plus two dynamic terms: one scaled by
//! the active TRX share alone, and a PA term that also scales with the
//! occupied bandwidth and the transmit PSD, divided by the PA efficiency.
//! Idle slots fall through a ladder of sleep states by idle duration.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::db_to_lin;
use crate::error::{Error, Issue, Result};
use crate::scheduler::{ConfigSet, SlotDecision};

/// PA efficiency as a function of the load product `x = s_f·s_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EtaModel {
    /// `η = max · x^exponent`.
    Power { max: f64, exponent: f64 },
    /// Piecewise-linear in `x` through `(load, eta)` points, flat beyond the ends.
    Table { points: Vec<[f64; 2]> },
}

impl Default for EtaModel {
    fn default() -> Self {
        EtaModel::Power {
            max: 0.4,
            exponent: 0.1,
        }
    }
}

impl EtaModel {
    pub fn eta(&self, s_f: f64, s_p: f64) -> f64 {
        let x = s_f * s_p;
        match self {
            EtaModel::Power { max, exponent } => max * x.powf(*exponent),
            EtaModel::Table { points } => {
                let i = points.partition_point(|p| p[0] <= x);
                if i == 0 {
                    points[0][1]
                } else if i == points.len() {
                    points[i - 1][1]
                } else {
                    let ([x0, y0], [x1, y1]) = (points[i - 1], points[i]);
                    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
                }
            }
        }
    }

    fn validate(&self, path: &str) -> Vec<Issue> {
        let mut issues = Vec::new();
        match self {
            EtaModel::Power { max, exponent } => {
                if !(*max > 0.0 && *max <= 1.0) {
                    issues.push(Issue::new(format!("{path}.max"), format!("eta max in (0,1], got {max}")));
                }
                if !(exponent.is_finite() && *exponent >= 0.0) {
                    issues.push(Issue::new(
                        format!("{path}.exponent"),
                        format!("exponent must be >= 0, got {exponent}"),
                    ));
                }
            }
            EtaModel::Table { points } => {
                if points.is_empty() {
                    issues.push(Issue::new(format!("{path}.points"), "at least one point required"));
                }
                for (i, p) in points.iter().enumerate() {
                    if !(p[1] > 0.0 && p[1] <= 1.0) {
                        issues.push(Issue::new(
                            format!("{path}.points[{i}]"),
                            format!("eta in (0,1], got {}", p[1]),
                        ));
                    }
                }
                for (i, w) in points.windows(2).enumerate() {
                    if w[1][0] <= w[0][0] {
                        issues.push(Issue::new(
                            format!("{path}.points[{}]", i + 1),
                            "loads must be strictly increasing",
                        ));
                    } else if w[1][1] < w[0][1] {
                        issues.push(Issue::new(
                            format!("{path}.points[{}]", i + 1),
                            "eta must not decrease with load",
                        ));
                    }
                }
            }
        }
        issues
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerState {
    Active,
    Micro,
    Light,
    Deep,
}

impl fmt::Display for PowerState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PowerState::Active => "active",
            PowerState::Micro => "micro",
            PowerState::Light => "light",
            PowerState::Deep => "deep",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SleepLevel {
    pub state: PowerState,
    pub pc: f64,
    /// Consecutive idle slots needed before entering the state.
    pub entry_slots: u64,
    /// Energy charged on the slot that wakes from this state.
    pub transition_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PcParams {
    pub p_static: f64,
    pub p_dyn_ante: f64,
    pub p_dyn_joint: f64,
    pub eta: EtaModel,
    /// Ordered from lightest to deepest; the lightest is always micro sleep.
    pub sleep: Vec<SleepLevel>,
}

impl Default for PcParams {
    fn default() -> Self {
        Self {
            p_static: 6.0,
            p_dyn_ante: 4.0,
            p_dyn_joint: 25.0,
            eta: EtaModel::default(),
            sleep: vec![
                SleepLevel {
                    state: PowerState::Micro,
                    pc: 5.5,
                    entry_slots: 1,
                    transition_energy: 0.0,
                },
                SleepLevel {
                    state: PowerState::Light,
                    pc: 2.1,
                    entry_slots: 10,
                    transition_energy: 1.0,
                },
                SleepLevel {
                    state: PowerState::Deep,
                    pc: 1.0,
                    entry_slots: 100,
                    transition_energy: 5.0,
                },
            ],
        }
    }
}

impl PcParams {
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        for (name, v) in [
            ("p_static", self.p_static),
            ("p_dyn_ante", self.p_dyn_ante),
            ("p_dyn_joint", self.p_dyn_joint),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                issues.push(Issue::new(format!("power.{name}"), format!("must be >= 0, got {v}")));
            }
        }
        issues.extend(self.eta.validate("power.eta"));
        match self.sleep.first() {
            Some(l) if l.state == PowerState::Micro => {}
            _ => issues.push(Issue::new("power.sleep[0]", "the first sleep level must be micro")),
        }
        for (i, l) in self.sleep.iter().enumerate() {
            if l.state == PowerState::Active {
                issues.push(Issue::new(format!("power.sleep[{i}].state"), "active is not a sleep state"));
            }
            if !(l.pc > 0.0 && l.pc.is_finite()) {
                issues.push(Issue::new(format!("power.sleep[{i}].pc"), format!("must be > 0, got {}", l.pc)));
            }
            if !(l.transition_energy >= 0.0 && l.transition_energy.is_finite()) {
                issues.push(Issue::new(
                    format!("power.sleep[{i}].transition_energy"),
                    format!("must be >= 0, got {}", l.transition_energy),
                ));
            }
        }
        if self.sleep.first().is_some_and(|l| l.entry_slots < 1) {
            issues.push(Issue::new("power.sleep[0].entry_slots", "must be >= 1"));
        }
        for (i, w) in self.sleep.windows(2).enumerate() {
            let path = format!("power.sleep[{}]", i + 1);
            if w[1].state <= w[0].state {
                issues.push(Issue::new(format!("{path}.state"), "states must go micro, light, deep"));
            }
            if w[1].entry_slots <= w[0].entry_slots {
                issues.push(Issue::new(
                    format!("{path}.entry_slots"),
                    "deeper states need strictly more idle slots",
                ));
            }
            if w[1].pc > w[0].pc {
                issues.push(Issue::new(
                    format!("{path}.pc"),
                    format!("{} sleep ({}) must not exceed {} sleep ({})", w[1].state, w[1].pc, w[0].state, w[0].pc),
                ));
            }
        }
        if let Some(micro) = self.sleep.first() {
            if micro.pc >= self.p_static {
                issues.push(Issue::new(
                    "power.sleep[0].pc",
                    format!("micro sleep ({}) must be below any active PC (>= p_static = {})", micro.pc, self.p_static),
                ));
            }
        }
        issues
    }

    /// Lower bound on active-slot PC with at least one TRX on.
    pub fn min_active_pc(&self) -> f64 {
        self.p_static
    }
}

/// Active-state PC for the given ratios.
pub fn active_pc(s_a: f64, s_f: f64, s_p: f64, params: &PcParams) -> Result<f64> {
    for (name, v) in [("s_a", s_a), ("s_f", s_f), ("s_p", s_p)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("{name} must lie in [0,1], got {v}")));
        }
    }
    let load = s_f * s_p;
    let pa = if load == 0.0 {
        0.0
    } else {
        let eta = params.eta.eta(s_f, s_p);
        if !(eta > 0.0) {
            return Err(Error::Domain(format!("PA efficiency must be positive, got {eta}")));
        }
        load * params.p_dyn_joint / eta
    };
    Ok(s_a * (pa + params.p_dyn_ante) + params.p_static)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratios {
    pub s_a: f64,
    pub s_f: f64,
    pub s_p: f64,
}

/// Ratios of one scheduled slot. CSI-RS RBs count as occupied bandwidth and
/// are transmitted at the chosen configuration's reference PSD; `s_p` is the
/// RB-weighted mean linear PSD relative to `P̄_M / B`.
pub fn ratios_from_decision(decision: &SlotDecision, configs: &ConfigSet, total_rbs: u32) -> Result<Ratios> {
    let cfg = configs.get(decision.config)?;
    let reference = configs.reference();
    let s_a = f64::from(cfg.num_trx) / f64::from(reference.num_trx);
    let used = decision.used_rbs();
    if used > total_rbs {
        return Err(Error::Contract(format!("{used} RBs used of {total_rbs}")));
    }
    let s_f = f64::from(used) / f64::from(total_rbs);
    let s_p = if used == 0 {
        0.0
    } else {
        let psd_sum: f64 = decision
            .allocations
            .iter()
            .map(|a| f64::from(a.rb_len) * db_to_lin(a.psd_dbm_per_rb))
            .sum::<f64>()
            + f64::from(decision.csi_overhead_rbs) * db_to_lin(cfg.reference_psd_dbm(total_rbs));
        let mean = psd_sum / f64::from(used);
        (mean / db_to_lin(reference.reference_psd_dbm(total_rbs))).min(1.0)
    };
    Ok(Ratios { s_a, s_f, s_p })
}

/// State and PC for a slot that is the `idle_slots`-th consecutive idle one:
/// the deepest level whose entry threshold is met (micro if none is).
pub fn sleep_step(idle_slots: u64, params: &PcParams) -> (PowerState, f64) {
    params
        .sleep
        .iter()
        .rev()
        .find(|l| idle_slots >= l.entry_slots)
        .or(params.sleep.first())
        .map_or((PowerState::Micro, params.p_static), |l| (l.state, l.pc))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlotPowerSample {
    pub slot: u64,
    pub state: PowerState,
    pub pc: f64,
    pub s_a: f64,
    pub s_f: f64,
    pub s_p: f64,
}

/// Idle-history counter driving the sleep ladder.
#[derive(Debug, Clone, Default)]
pub struct SleepTracker {
    idle_slots: u64,
    state: Option<PowerState>,
}

impl SleepTracker {
    pub fn idle(&mut self, slot: u64, params: &PcParams) -> SlotPowerSample {
        self.idle_slots += 1;
        let (state, pc) = sleep_step(self.idle_slots, params);
        self.state = Some(state);
        SlotPowerSample {
            slot,
            state,
            pc,
            s_a: 0.0,
            s_f: 0.0,
            s_p: 0.0,
        }
    }

    /// An active slot; the wake-up cost of the state being left is added.
    pub fn active(&mut self, slot: u64, ratios: Ratios, params: &PcParams) -> Result<SlotPowerSample> {
        let mut pc = active_pc(ratios.s_a, ratios.s_f, ratios.s_p, params)?;
        if let Some(state) = self.state.take() {
            pc += params
                .sleep
                .iter()
                .find(|l| l.state == state)
                .map_or(0.0, |l| l.transition_energy);
        }
        self.idle_slots = 0;
        Ok(SlotPowerSample {
            slot,
            state: PowerState::Active,
            pc,
            s_a: ratios.s_a,
            s_f: ratios.s_f,
            s_p: ratios.s_p,
        })
    }
}

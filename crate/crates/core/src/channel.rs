//! Abstract per-UE SINR model, wideband CSI and intra-cell leakage.
//!
//! Every UE has a static path gain, a per-slot log-normal fading multiplier
//! and a thermal noise floor. The wanted signal additionally sees the array
//! gain of the active configuration. Adjacent allocations leak into each
//! other through the wider beams of smaller arrays; leakage attenuation is
//! configured per TRX count and grows by a fixed slope per RB of separation.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Issue, Result};
use crate::scheduler::{Allocation, ConfigId, CsiRsConfig, SlotDecision};

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Linear-domain sum of two dB quantities; `-inf` is the additive identity.
pub fn db_sum(a_db: f64, b_db: f64) -> f64 {
    lin_to_db(db_to_lin(a_db) + db_to_lin(b_db))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UeChannel {
    /// Long-term gain between the gNB and the UE (dB, negative).
    pub path_gain_db: f64,
    pub noise_floor_dbm_per_rb: f64,
    /// Small-scale multiplier for the current slot, unit mean.
    pub fading: f64,
}

impl UeChannel {
    /// Received power offset (dB) a transmit PSD experiences without array gain.
    pub fn coupling_db(&self) -> f64 {
        self.path_gain_db + lin_to_db(self.fading)
    }
}

/// Per-drop channel generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelParams {
    pub path_gain_min_db: f64,
    pub path_gain_max_db: f64,
    pub fading_sigma_db: f64,
    pub noise_floor_dbm_per_rb: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            path_gain_min_db: -145.0,
            path_gain_max_db: -115.0,
            fading_sigma_db: 2.0,
            noise_floor_dbm_per_rb: -111.4,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !(self.path_gain_min_db.is_finite()
            && self.path_gain_max_db.is_finite()
            && self.path_gain_min_db <= self.path_gain_max_db)
        {
            issues.push(Issue::new(
                "channel.path_gain_min_db",
                "path gain range must be finite with min <= max",
            ));
        }
        if !(self.fading_sigma_db.is_finite() && self.fading_sigma_db >= 0.0) {
            issues.push(Issue::new("channel.fading_sigma_db", "must be >= 0"));
        }
        if !self.noise_floor_dbm_per_rb.is_finite() {
            issues.push(Issue::new("channel.noise_floor_dbm_per_rb", "must be finite"));
        }
        issues
    }

    pub fn draw_path_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.path_gain_min_db + u * (self.path_gain_max_db - self.path_gain_min_db)
    }

    /// Unit-mean log-normal multiplier with the configured dB spread.
    pub fn draw_fading<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        let sigma = self.fading_sigma_db * std::f64::consts::LN_10 / 10.0;
        (sigma * z - 0.5 * sigma * sigma).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterferenceModel {
    /// Adjacent-allocation leakage attenuation per active TRX count.
    pub leakage_db: BTreeMap<u32, f64>,
    pub intercell_floor_dbm_per_rb: f64,
    /// Extra attenuation per RB of separation.
    pub distance_slope_db: f64,
    /// Neighbours farther than this many RBs contribute nothing.
    pub max_distance_rbs: u32,
}

impl Default for InterferenceModel {
    fn default() -> Self {
        Self {
            leakage_db: BTreeMap::from([(8, 20.0), (16, 25.0), (32, 30.0)]),
            intercell_floor_dbm_per_rb: -110.0,
            distance_slope_db: 3.0,
            max_distance_rbs: 8,
        }
    }
}

impl InterferenceModel {
    pub fn validate(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        let values: Vec<(u32, f64)> = self.leakage_db.iter().map(|(&k, &v)| (k, v)).collect();
        for w in values.windows(2) {
            if w[1].1 < w[0].1 {
                issues.push(Issue::new(
                    format!("channel.leakage_db.{}", w[1].0),
                    format!(
                        "leakage attenuation must not decrease with TRX count ({} TRX: {} dB < {} TRX: {} dB)",
                        w[1].0, w[1].1, w[0].0, w[0].1
                    ),
                ));
            }
        }
        if values.iter().any(|(_, v)| !v.is_finite()) {
            issues.push(Issue::new("channel.leakage_db", "values must be finite"));
        }
        if !self.intercell_floor_dbm_per_rb.is_finite() {
            issues.push(Issue::new("channel.intercell_floor_dbm_per_rb", "must be finite"));
        }
        if !(self.distance_slope_db.is_finite() && self.distance_slope_db >= 0.0) {
            issues.push(Issue::new("channel.leakage_distance_slope_db", "must be >= 0"));
        }
        issues
    }

    pub fn leakage_for(&self, cfg: &CsiRsConfig) -> Result<f64> {
        self.leakage_db.get(&cfg.num_trx).copied().ok_or_else(|| {
            Error::Contract(format!("no leakage attenuation configured for {} TRX", cfg.num_trx))
        })
    }
}

pub fn array_gain_db(cfg: &CsiRsConfig) -> f64 {
    lin_to_db(f64::from(cfg.num_trx))
}

/// Per-RB SINR of a transmission at `psd_dbm_per_rb`; `interference_dbm_per_rb`
/// may be `-inf` for a noise-limited link.
pub fn sinr_db(
    ue: &UeChannel,
    psd_dbm_per_rb: f64,
    cfg: &CsiRsConfig,
    interference_dbm_per_rb: f64,
) -> f64 {
    let noise_plus_interference =
        db_to_lin(ue.noise_floor_dbm_per_rb) + db_to_lin(interference_dbm_per_rb);
    psd_dbm_per_rb + array_gain_db(cfg) + ue.path_gain_db + lin_to_db(ue.fading)
        - lin_to_db(noise_plus_interference)
}

/// Wideband CSI report of one UE for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CsiReport {
    pub ue: usize,
    pub config: ConfigId,
    /// γ_{n,m} at the reference PSD.
    pub sinr_db: f64,
    /// α̂_{n,m} = γ_{n,m} / S, in dB.
    pub alpha_db: f64,
    pub reference_psd_dbm: f64,
}

impl CsiReport {
    /// SINR the report predicts for a transmission at `psd_dbm_per_rb`.
    pub fn sinr_at(&self, psd_dbm_per_rb: f64) -> f64 {
        self.alpha_db + psd_dbm_per_rb
    }
}

pub fn wideband_csi(
    ue_id: usize,
    ue: &UeChannel,
    cfg: &CsiRsConfig,
    reference_psd_dbm: f64,
    interference_dbm_per_rb: f64,
) -> CsiReport {
    let gamma = sinr_db(ue, reference_psd_dbm, cfg, interference_dbm_per_rb);
    CsiReport {
        ue: ue_id,
        config: cfg.id,
        sinr_db: gamma,
        alpha_db: gamma - reference_psd_dbm,
        reference_psd_dbm,
    }
}

/// UE × configuration report matrix; holes mark missing reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsiReports {
    num_configs: usize,
    rows: Vec<Vec<Option<CsiReport>>>,
}

impl CsiReports {
    pub fn empty(num_ues: usize, num_configs: usize) -> Self {
        Self {
            num_configs,
            rows: vec![vec![None; num_configs]; num_ues],
        }
    }

    pub fn num_ues(&self) -> usize {
        self.rows.len()
    }

    pub fn num_configs(&self) -> usize {
        self.num_configs
    }

    pub fn insert(&mut self, report: CsiReport) {
        let m = usize::from(report.config.0) - 1;
        self.rows[report.ue][m] = Some(report);
    }

    pub fn remove(&mut self, ue: usize, config: ConfigId) {
        if let Some(slot) = self.rows.get_mut(ue).and_then(|r| r.get_mut(usize::from(config.0) - 1)) {
            *slot = None;
        }
    }

    pub fn get(&self, ue: usize, config: ConfigId) -> Option<&CsiReport> {
        self.rows
            .get(ue)?
            .get(usize::from(config.0).checked_sub(1)?)?
            .as_ref()
    }
}

/// Leakage received on one occupied RB from the neighbouring allocations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RbLeakage {
    pub rb: u32,
    /// UE occupying the RB.
    pub ue: usize,
    /// Transmit-referred leakage power (dBm); `-inf` when no neighbour is in range.
    pub leakage_dbm: f64,
}

fn check_disjoint(allocs: &[&Allocation]) -> Result<()> {
    for w in allocs.windows(2) {
        if w[1].rb_start < w[0].rb_end() {
            return Err(Error::Contract(format!(
                "allocations of UE {} and UE {} overlap",
                w[0].ue, w[1].ue
            )));
        }
    }
    Ok(())
}

/// Leakage into every occupied RB, in RB order.
///
/// Each allocation receives from its immediate left and right neighbours;
/// a neighbour with PSD `p` at a gap of `d` RBs contributes
/// `p − leakage_db(m) − slope·d` dBm when `d` is within range.
pub fn leakage_per_rb(
    allocations: &[Allocation],
    cfg: &CsiRsConfig,
    model: &InterferenceModel,
) -> Result<Vec<RbLeakage>> {
    let mut sorted: Vec<&Allocation> = allocations.iter().collect();
    sorted.sort_by_key(|a| a.rb_start);
    check_disjoint(&sorted)?;
    let attenuation = model.leakage_for(cfg)?;
    let reach = |b: u32, nb: &Allocation| -> f64 {
        let gap = if nb.rb_start > b {
            nb.rb_start - b - 1
        } else {
            b - (nb.rb_end() - 1) - 1
        };
        if gap > model.max_distance_rbs {
            0.0
        } else {
            db_to_lin(nb.psd_dbm_per_rb - attenuation - model.distance_slope_db * f64::from(gap))
        }
    };
    let mut out = Vec::with_capacity(sorted.iter().map(|a| a.rb_len as usize).sum());
    for (i, a) in sorted.iter().enumerate() {
        let left = i.checked_sub(1).map(|j| sorted[j]);
        let right = sorted.get(i + 1).copied();
        for b in a.rb_start..a.rb_end() {
            let lin = left.map_or(0.0, |nb| reach(b, nb)) + right.map_or(0.0, |nb| reach(b, nb));
            out.push(RbLeakage {
                rb: b,
                ue: a.ue,
                leakage_dbm: lin_to_db(lin),
            });
        }
    }
    Ok(out)
}

/// Interference power value per occupied RB: the inter-cell floor plus the
/// adjacent-allocation leakage, in RB order. Unoccupied RBs yield no sample.
pub fn interference_per_rb(
    decision: &SlotDecision,
    cfg: &CsiRsConfig,
    model: &InterferenceModel,
) -> Result<Vec<f64>> {
    if decision.config != cfg.id {
        return Err(Error::Contract(format!(
            "decision uses {} but {} was supplied",
            decision.config, cfg.id
        )));
    }
    Ok(leakage_per_rb(&decision.allocations, cfg, model)?
        .into_iter()
        .map(|s| db_sum(model.intercell_floor_dbm_per_rb, s.leakage_dbm))
        .collect())
}

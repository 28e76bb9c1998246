//! Per-drop KPI accumulation and campaign export.
//!
//! Two files are written per campaign: one row per (scheme, load, drop) and
//! an empirical IPV CDF per (scheme, load). Floats carry six significant
//! digits so re-exports are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::power::SlotPowerSample;
use crate::scheduler::{ConfigId, Scheme};
use crate::traffic::{BitLedger, CompletedPacket, LoadLabel};

pub const CAMPAIGN_FILE: &str = "campaign.csv";
pub const IPV_CDF_FILE: &str = "ipv_cdf.csv";
pub const CAMPAIGN_HEADER: &str =
    "scheme,load,drop,upt_mbps,pc_mean,rb_utilization,loss_rate,m_prime_histogram";
pub const IPV_HEADER: &str = "scheme,load,ipv_dbm,cdf";
/// Quantile points per CDF series.
pub const CDF_POINTS: usize = 101;

/// UPT of one packet in Mbit/s; the arrival and completion slots both count.
pub fn upt_sample_mbps(size_bits: u64, arrival_slot: u64, completion_slot: u64, slot_duration_s: f64) -> f64 {
    debug_assert!(completion_slot >= arrival_slot);
    let slots = (completion_slot - arrival_slot + 1) as f64;
    size_bits as f64 / (slots * slot_duration_s) / 1e6
}

/// Uniform fixed-size sample of a stream (Algorithm R).
#[derive(Debug, Clone)]
pub struct Reservoir {
    capacity: usize,
    seen: u64,
    samples: Vec<f64>,
    rng: ChaCha8Rng,
}

impl Reservoir {
    pub fn new(capacity: usize, rng: ChaCha8Rng) -> Self {
        Self {
            capacity,
            seen: 0,
            samples: Vec::with_capacity(capacity.min(1 << 16)),
            rng,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.seen += 1;
        if self.samples.len() < self.capacity {
            self.samples.push(x);
        } else if self.capacity > 0 {
            let j = self.rng.random_range(0..self.seen);
            if let Ok(j) = usize::try_from(j) {
                if j < self.capacity {
                    self.samples[j] = x;
                }
            }
        }
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KpiRecord {
    pub scheme: Scheme,
    pub load: LoadLabel,
    pub drop: u32,
    /// Mean UPT over completed packets; `None` when none completed.
    pub upt_mbps: Option<f64>,
    pub pc_mean: f64,
    pub energy: f64,
    pub rb_utilization: f64,
    pub loss_rate: f64,
    /// Exact mean over every IPV sample (dBm), not just the reservoir.
    pub ipv_mean_dbm: Option<f64>,
    pub ipv_samples: Vec<f64>,
    /// Scheduled slots per chosen configuration.
    pub m_prime_histogram: BTreeMap<u8, u64>,
    pub slots: u64,
    pub packets_completed: u64,
}

/// Drop-local accumulator; KPI slots are those at or after the warm-up.
#[derive(Debug, Clone)]
pub struct KpiAccumulator {
    slot_duration_s: f64,
    total_rbs: u32,
    upt_sum: f64,
    upt_count: u64,
    energy: f64,
    slots: u64,
    utilization_sum: f64,
    ipv: Reservoir,
    ipv_sum: f64,
    m_prime: BTreeMap<u8, u64>,
}

impl KpiAccumulator {
    pub fn new(slot_duration_s: f64, total_rbs: u32, reservoir: Reservoir) -> Self {
        Self {
            slot_duration_s,
            total_rbs,
            upt_sum: 0.0,
            upt_count: 0,
            energy: 0.0,
            slots: 0,
            utilization_sum: 0.0,
            ipv: reservoir,
            ipv_sum: 0.0,
            m_prime: BTreeMap::new(),
        }
    }

    pub fn record_packet(&mut self, p: &CompletedPacket) {
        self.upt_sum += upt_sample_mbps(p.size_bits, p.arrival_slot, p.completion_slot, self.slot_duration_s);
        self.upt_count += 1;
    }

    pub fn record_slot(&mut self, power: &SlotPowerSample, used_rbs: u32, config: Option<ConfigId>) {
        self.energy += power.pc;
        self.slots += 1;
        self.utilization_sum += f64::from(used_rbs) / f64::from(self.total_rbs);
        if let Some(m) = config {
            *self.m_prime.entry(m.0).or_default() += 1;
        }
    }

    pub fn record_ipv(&mut self, samples: &[f64]) {
        for &s in samples {
            self.ipv_sum += s;
            self.ipv.push(s);
        }
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn finish(self, scheme: Scheme, load: LoadLabel, drop: u32, ledger: &BitLedger) -> KpiRecord {
        let lost = ledger.packets_overflowed + ledger.packets_lost;
        let ipv_seen = self.ipv.seen();
        KpiRecord {
            scheme,
            load,
            drop,
            upt_mbps: (self.upt_count > 0).then(|| self.upt_sum / self.upt_count as f64),
            pc_mean: if self.slots > 0 { self.energy / self.slots as f64 } else { 0.0 },
            energy: self.energy,
            rb_utilization: if self.slots > 0 {
                self.utilization_sum / self.slots as f64
            } else {
                0.0
            },
            loss_rate: if ledger.packets_arrived > 0 {
                lost as f64 / ledger.packets_arrived as f64
            } else {
                0.0
            },
            ipv_mean_dbm: (ipv_seen > 0).then(|| self.ipv_sum / ipv_seen as f64),
            ipv_samples: self.ipv.into_samples(),
            m_prime_histogram: self.m_prime,
            slots: self.slots,
            packets_completed: self.upt_count,
        }
    }
}

/// Six significant digits: fixed notation for moderate magnitudes,
/// scientific otherwise.
pub fn fmt_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..].parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        format!("{:.*}", (5 - exp) as usize, x)
    } else {
        sci
    }
}

pub fn fmt_histogram(h: &BTreeMap<u8, u64>) -> String {
    h.iter().map(|(m, c)| format!("{m}:{c}")).collect::<Vec<_>>().join(";")
}

pub fn campaign_csv(records: &[KpiRecord]) -> String {
    let mut out = String::from(CAMPAIGN_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.scheme,
            r.load,
            r.drop,
            r.upt_mbps.map(fmt_sig6).unwrap_or_default(),
            fmt_sig6(r.pc_mean),
            fmt_sig6(r.rb_utilization),
            fmt_sig6(r.loss_rate),
            fmt_histogram(&r.m_prime_histogram)
        );
    }
    out
}

/// Empirical CDF at `CDF_POINTS` evenly spaced probabilities.
pub fn cdf_points(samples: &[f64]) -> Vec<(f64, f64)> {
    if samples.is_empty() {
        return Vec::new();
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    (0..CDF_POINTS)
        .map(|i| {
            let q = i as f64 / (CDF_POINTS - 1) as f64;
            let idx = (q * (n - 1) as f64).round() as usize;
            (sorted[idx], q)
        })
        .collect()
}

/// One CDF series per (scheme, load) in order of first appearance, pooling
/// the reservoirs of all drops.
pub fn ipv_cdf_csv(records: &[KpiRecord]) -> String {
    let mut groups: Vec<((Scheme, LoadLabel), Vec<f64>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(k, _)| *k == (r.scheme, r.load)) {
            Some((_, v)) => v.extend_from_slice(&r.ipv_samples),
            None => groups.push(((r.scheme, r.load), r.ipv_samples.clone())),
        }
    }
    let mut out = String::from(IPV_HEADER);
    out.push('\n');
    for ((scheme, load), samples) in groups {
        for (x, q) in cdf_points(&samples) {
            let _ = writeln!(out, "{scheme},{load},{},{}", fmt_sig6(x), fmt_sig6(q));
        }
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the campaign table and the IPV CDF file into `dir`.
pub fn export_campaign(records: &[KpiRecord], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    if records.is_empty() {
        return Err(Error::Contract("nothing to export".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let campaign = dir.join(CAMPAIGN_FILE);
    let ipv = dir.join(IPV_CDF_FILE);
    write(&campaign, &campaign_csv(records))?;
    write(&ipv, &ipv_cdf_csv(records))?;
    Ok((campaign, ipv))
}

/// Per-slot power trace of one drop.
pub fn trace_csv(trace: &[SlotPowerSample]) -> String {
    let mut out = String::from("slot,state,pc,s_a,s_f,s_p\n");
    for s in trace {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.slot,
            s.state,
            fmt_sig6(s.pc),
            fmt_sig6(s.s_a),
            fmt_sig6(s.s_f),
            fmt_sig6(s.s_p)
        );
    }
    out
}

pub fn export_trace(trace: &[SlotPowerSample], path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write(path, &trace_csv(trace))
}

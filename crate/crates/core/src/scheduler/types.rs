use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{db_to_lin, lin_to_db};
use crate::error::{Error, Issue, Result};
use crate::la::BetaParams;
use crate::mcs::McsIndex;

/// One-based CSI-RS configuration id `m ∈ 1..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigId(pub u8);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}", self.0)
    }
}

/// An antenna configuration advertised through its own CSI-RS resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsiRsConfig {
    pub id: ConfigId,
    pub num_ports: u32,
    pub num_trx: u32,
    /// Maximum transmit power P̄_m.
    pub max_power_dbm: f64,
    /// RBs consumed by this configuration's CSI-RS in a CSI slot.
    pub csi_overhead_rbs: u32,
}

impl CsiRsConfig {
    /// Per-RB PSD when P̄_m is spread over the full bandwidth.
    pub fn reference_psd_dbm(&self, total_rbs: u32) -> f64 {
        self.max_power_dbm - lin_to_db(f64::from(total_rbs))
    }
}

/// The ordered set 𝓜 of antenna configurations; the last one is the
/// full-array reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSet {
    configs: Vec<CsiRsConfig>,
}

impl ConfigSet {
    pub fn new(configs: Vec<CsiRsConfig>) -> Result<Self> {
        let issues = Self::check(&configs);
        if issues.is_empty() {
            Ok(Self { configs })
        } else {
            Err(Error::Invalid(issues))
        }
    }

    /// Builds 𝓜 from (ports, trx, overhead, optional power override) tuples,
    /// deriving P̄_m = P̄_M − 10·log10(trx_M / trx_m) where not overridden.
    pub fn with_scaled_power(
        reference_power_dbm: f64,
        specs: &[(u32, u32, u32, Option<f64>)],
    ) -> Result<Self> {
        let max_trx = specs.iter().map(|s| s.1).max().unwrap_or(1).max(1);
        let configs = specs
            .iter()
            .enumerate()
            .map(|(i, &(ports, trx, overhead, power))| CsiRsConfig {
                id: ConfigId(i as u8 + 1),
                num_ports: ports,
                num_trx: trx,
                max_power_dbm: power.unwrap_or_else(|| {
                    reference_power_dbm - lin_to_db(f64::from(max_trx) / f64::from(trx.max(1)))
                }),
                csi_overhead_rbs: overhead,
            })
            .collect();
        Self::new(configs)
    }

    /// 8/16/32 TRX with one overhead RB per eight ports and 52 dBm at the
    /// full array.
    pub fn default_three() -> Self {
        Self::with_scaled_power(52.0, &[(8, 8, 1, None), (16, 16, 2, None), (32, 32, 4, None)])
            .expect("default configuration set is valid")
    }

    fn check(configs: &[CsiRsConfig]) -> Vec<Issue> {
        let mut issues = Vec::new();
        if configs.is_empty() {
            issues.push(Issue::new("antennas.configs", "at least one configuration required"));
            return issues;
        }
        let last = configs.last().unwrap();
        for (i, c) in configs.iter().enumerate() {
            let path = format!("antennas.configs[{i}]");
            if usize::from(c.id.0) != i + 1 {
                issues.push(Issue::new(
                    &path,
                    format!("id {} out of sequence, expected {}", c.id.0, i + 1),
                ));
            }
            if c.num_trx == 0 || c.num_ports == 0 {
                issues.push(Issue::new(&path, "num_trx and num_ports must be positive"));
            }
            if !c.max_power_dbm.is_finite() {
                issues.push(Issue::new(&path, "max_power_dbm must be finite"));
            }
            // overhead_m / ports_m == overhead_M / ports_M
            if u64::from(c.csi_overhead_rbs) * u64::from(last.num_ports)
                != u64::from(last.csi_overhead_rbs) * u64::from(c.num_ports)
            {
                issues.push(Issue::new(
                    &path,
                    "csi_overhead_rbs must be proportional to num_ports across configurations",
                ));
            }
            if i > 0 {
                let prev = &configs[i - 1];
                if c.num_trx <= prev.num_trx {
                    issues.push(Issue::new(
                        &path,
                        format!("num_trx {} not greater than previous {}", c.num_trx, prev.num_trx),
                    ));
                }
                if c.max_power_dbm < prev.max_power_dbm {
                    issues.push(Issue::new(
                        &path,
                        format!(
                            "max_power_dbm {} below previous {}",
                            c.max_power_dbm, prev.max_power_dbm
                        ),
                    ));
                }
            }
        }
        issues
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &CsiRsConfig> {
        self.configs.iter()
    }

    pub fn reference(&self) -> &CsiRsConfig {
        self.configs.last().expect("config set is never empty")
    }

    pub fn get(&self, id: ConfigId) -> Result<&CsiRsConfig> {
        usize::from(id.0)
            .checked_sub(1)
            .and_then(|i| self.configs.get(i))
            .ok_or_else(|| Error::Contract(format!("unknown configuration {id}")))
    }

    pub fn by_trx(&self, num_trx: u32) -> Option<&CsiRsConfig> {
        self.configs.iter().find(|c| c.num_trx == num_trx)
    }

    pub fn max_overhead(&self) -> u32 {
        self.configs.iter().map(|c| c.csi_overhead_rbs).max().unwrap_or(0)
    }
}

/// Contiguous RB span granted to one UE in one slot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Allocation {
    pub ue: usize,
    /// Zero-based first RB.
    pub rb_start: u32,
    pub rb_len: u32,
    pub mcs: McsIndex,
    pub power_dbm: f64,
    pub psd_dbm_per_rb: f64,
    pub retransmission: bool,
}

impl Allocation {
    pub fn rb_end(&self) -> u32 {
        self.rb_start + self.rb_len
    }

    pub fn power_mw(&self) -> f64 {
        db_to_lin(self.power_dbm)
    }
}

/// Output of one scheduling decision.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotDecision {
    pub config: ConfigId,
    /// Sorted by `rb_start`.
    pub allocations: Vec<Allocation>,
    /// CSI-RS RBs charged this slot (zero outside CSI slots).
    pub csi_overhead_rbs: u32,
    pub leftover_rbs: u32,
    /// Final MCS per UE id; `None` for UEs without a grant decision.
    pub mcs: Vec<Option<McsIndex>>,
    /// β applied by the POLITE step, if it ran.
    pub beta: Option<f64>,
    pub warnings: Vec<String>,
}

impl SlotDecision {
    pub fn idle(config: ConfigId, num_ues: usize, total_rbs: u32, overhead: u32) -> Self {
        Self {
            config,
            allocations: Vec::new(),
            csi_overhead_rbs: overhead,
            leftover_rbs: total_rbs.saturating_sub(overhead),
            mcs: vec![None; num_ues],
            beta: None,
            warnings: Vec::new(),
        }
    }

    pub fn allocated_rbs(&self) -> u32 {
        self.allocations.iter().map(|a| a.rb_len).sum()
    }

    /// Data RBs plus CSI-RS RBs.
    pub fn used_rbs(&self) -> u32 {
        self.allocated_rbs() + self.csi_overhead_rbs
    }

    pub fn allocation_for(&self, ue: usize) -> Option<&Allocation> {
        self.allocations.iter().find(|a| a.ue == ue)
    }

    pub fn is_idle(&self) -> bool {
        self.allocations.is_empty()
    }

    /// Checks the structural invariants: disjoint spans inside the band, the
    /// leftover count, the PSD-power relation per allocation and the total power cap.
    pub fn check(&self, total_rbs: u32, cfg: &CsiRsConfig) -> Result<()> {
        let mut prev_end = 0u32;
        for a in &self.allocations {
            if a.rb_len == 0 {
                return Err(Error::Contract(format!("UE {} has an empty allocation", a.ue)));
            }
            if a.rb_start < prev_end {
                return Err(Error::Contract(format!(
                    "allocation of UE {} at RB {} overlaps the previous span ending at {}",
                    a.ue, a.rb_start, prev_end
                )));
            }
            if a.rb_end() > total_rbs {
                return Err(Error::Contract(format!(
                    "allocation of UE {} exceeds the band ({} > {})",
                    a.ue,
                    a.rb_end(),
                    total_rbs
                )));
            }
            let expected_psd = a.power_dbm - lin_to_db(f64::from(a.rb_len));
            if (expected_psd - a.psd_dbm_per_rb).abs() > 1e-9 {
                return Err(Error::Contract(format!(
                    "UE {}: PSD {} inconsistent with power {} over {} RBs",
                    a.ue, a.psd_dbm_per_rb, a.power_dbm, a.rb_len
                )));
            }
            prev_end = a.rb_end();
        }
        let used = self.used_rbs();
        if used > total_rbs || self.leftover_rbs != total_rbs - used {
            return Err(Error::Contract(format!(
                "leftover {} inconsistent with {} used of {} RBs",
                self.leftover_rbs, used, total_rbs
            )));
        }
        let total_mw: f64 = self.allocations.iter().map(Allocation::power_mw).sum();
        let cap_mw = db_to_lin(cfg.max_power_dbm);
        if total_mw > cap_mw * (1.0 + 1e-9) {
            return Err(Error::Contract(format!(
                "total power {:.3} dBm above cap {:.3} dBm",
                lin_to_db(total_mw),
                cfg.max_power_dbm
            )));
        }
        Ok(())
    }
}

/// Scheduler-facing view of one UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeView {
    pub id: usize,
    /// Bits to serve this slot: the pending HARQ block if any, else Q_n.
    pub demand_bits: u64,
    /// R_{n,avg} in bits/slot/RB.
    pub r_avg: f64,
    /// The demand is a HARQ retransmission, scheduled ahead of new data.
    pub retransmission: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    Proposed,
    Static8,
    Static16,
    Static32,
    AntennaAdaptation,
    PowerAdaptation,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Proposed,
        Scheme::Static8,
        Scheme::Static16,
        Scheme::Static32,
        Scheme::AntennaAdaptation,
        Scheme::PowerAdaptation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "Proposed",
            Scheme::Static8 => "Static8",
            Scheme::Static16 => "Static16",
            Scheme::Static32 => "Static32",
            Scheme::AntennaAdaptation => "AntennaAdaptation",
            Scheme::PowerAdaptation => "PowerAdaptation",
        }
    }

    pub fn static_trx(self) -> Option<u32> {
        match self {
            Scheme::Static8 => Some(8),
            Scheme::Static16 => Some(16),
            Scheme::Static32 => Some(32),
            _ => None,
        }
    }

    pub fn adapts_antennas(self) -> bool {
        matches!(self, Scheme::Proposed | Scheme::AntennaAdaptation)
    }

    pub fn uses_polite(self) -> bool {
        matches!(self, Scheme::Proposed | Scheme::PowerAdaptation)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("schemes", format!("unknown scheme `{s}`")))
    }
}

/// A scheme together with its resolved parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemeSetup {
    pub scheme: Scheme,
    /// Configurations the scheme may select, ascending. For static schemes
    /// this is the single fixed configuration.
    pub configs: Vec<ConfigId>,
    pub beta: BetaParams,
}

impl SchemeSetup {
    /// Resolves the default configuration subset for `scheme` against 𝓜.
    pub fn resolve(scheme: Scheme, all: &ConfigSet, beta: BetaParams) -> Result<Self> {
        let configs = match scheme.static_trx() {
            Some(trx) => vec![all
                .by_trx(trx)
                .ok_or_else(|| {
                    Error::invalid(
                        "schemes",
                        format!("{scheme} needs a configuration with {trx} TRX"),
                    )
                })?
                .id],
            None if scheme.adapts_antennas() => all.iter().map(|c| c.id).collect(),
            None => vec![all.reference().id],
        };
        Ok(Self {
            scheme,
            configs,
            beta,
        })
    }

    pub fn with_configs(mut self, configs: Vec<ConfigId>) -> Self {
        self.configs = configs;
        self
    }
}

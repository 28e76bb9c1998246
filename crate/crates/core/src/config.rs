//! Scenario files: a TOML document with `scenario`, `antennas`, `link`,
//! `traffic`, `channel`, `power` and `schemes` sections. Unknown keys are
//! rejected; every semantic problem is reported with its dotted path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelParams, InterferenceModel};
use crate::engine::Scenario;
use crate::error::{Error, Issue, Result};
use crate::la::BetaParams;
use crate::mcs::{BlerModel, LinkModel, McsTable, DEFAULT_RES_PER_RB};
use crate::power::{EtaModel, PcParams, SleepLevel};
use crate::scheduler::{ConfigSet, Scheme, SchemeSetup};
use crate::traffic::{LoadLabel, RateScope, TrafficParams};

pub const DEFAULT_SCENARIO: &str = include_str!("../data/default_scenario.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub antennas: AntennaSection,
    #[serde(default)]
    pub link: LinkSection,
    pub traffic: TrafficSection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub power: PowerSection,
    pub schemes: Vec<SchemeEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub num_ues: usize,
    pub total_rbs: u32,
    pub slot_duration_s: f64,
    pub slots_per_drop: u64,
    pub num_drops: u32,
    pub base_seed: u64,
    #[serde(default)]
    pub warmup_slots: u64,
    #[serde(default = "one")]
    pub csi_period_slots: u64,
    #[serde(default = "default_ema")]
    pub ema_coefficient: f64,
    #[serde(default = "default_reservoir")]
    pub ipv_reservoir: usize,
    #[serde(default)]
    pub power_trace: bool,
}

fn one() -> u64 {
    1
}
fn default_ema() -> f64 {
    0.01
}
fn default_reservoir() -> usize {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaSection {
    pub reference_power_dbm: f64,
    pub configs: Vec<AntennaEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AntennaEntry {
    pub num_ports: u32,
    pub num_trx: u32,
    pub csi_overhead_rbs: u32,
    /// Overrides the TRX-scaled maximum power.
    pub max_power_dbm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    /// MCS table file, relative to the scenario file; bundled table if absent.
    pub mcs_table: Option<PathBuf>,
    pub res_per_rb: u32,
    pub bler_steepness: f64,
    pub target_bler: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let bler = BlerModel::default();
        Self {
            mcs_table: None,
            res_per_rb: DEFAULT_RES_PER_RB,
            bler_steepness: bler.steepness,
            target_bler: bler.target_bler,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSection {
    pub loads: Vec<LoadLabel>,
    #[serde(default)]
    pub rate_scope: RateScope,
    pub packet_size_bits: u64,
    pub max_buffer_bits: u64,
    pub max_retransmissions: u32,
    /// Packets per second for each load label.
    #[serde(default)]
    pub rates: BTreeMap<LoadLabel, f64>,
    /// Explicit rate applied to every selected load.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub path_gain_min_db: f64,
    pub path_gain_max_db: f64,
    pub fading_sigma_db: f64,
    pub noise_floor_dbm_per_rb: f64,
    pub intercell_floor_dbm_per_rb: f64,
    pub leakage_distance_slope_db: f64,
    pub leakage_max_distance_rbs: u32,
    /// Leakage attenuation keyed by TRX count.
    pub leakage_db: BTreeMap<String, f64>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        let ch = ChannelParams::default();
        let im = InterferenceModel::default();
        Self {
            path_gain_min_db: ch.path_gain_min_db,
            path_gain_max_db: ch.path_gain_max_db,
            fading_sigma_db: ch.fading_sigma_db,
            noise_floor_dbm_per_rb: ch.noise_floor_dbm_per_rb,
            intercell_floor_dbm_per_rb: im.intercell_floor_dbm_per_rb,
            leakage_distance_slope_db: im.distance_slope_db,
            leakage_max_distance_rbs: im.max_distance_rbs,
            leakage_db: im.leakage_db.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerSection {
    pub p_static: f64,
    pub p_dyn_ante: f64,
    pub p_dyn_joint: f64,
    pub eta: EtaModel,
    pub sleep: Vec<SleepLevel>,
}

impl Default for PowerSection {
    fn default() -> Self {
        let p = PcParams::default();
        Self {
            p_static: p.p_static,
            p_dyn_ante: p.p_dyn_ante,
            p_dyn_joint: p.p_dyn_joint,
            eta: p.eta,
            sleep: p.sleep,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeEntry {
    pub name: String,
    #[serde(default = "default_chi")]
    pub chi: f64,
    #[serde(default = "default_floor")]
    pub beta_floor: f64,
    /// TRX counts the scheme may use; scheme default if absent.
    pub configs: Option<Vec<u32>>,
}

fn default_chi() -> f64 {
    BetaParams::default().chi
}
fn default_floor() -> f64 {
    BetaParams::default().floor
}

/// Sets `key` (dotted, with `name[i]` for array elements) to `value`, parsed
/// as a TOML value when possible and as a string otherwise.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::invalid(assignment, "override must look like key=value"))?;
    let (key, raw) = (key.trim(), raw.trim());
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));

    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for (depth, part) in parts.iter().enumerate() {
        let (name, index) = match part.split_once('[') {
            Some((n, rest)) => {
                let idx: usize = rest
                    .strip_suffix(']')
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::invalid(key, format!("bad index in `{part}`")))?;
                (n, Some(idx))
            }
            None => (*part, None),
        };
        let last = depth + 1 == parts.len();
        match (index, last) {
            (None, true) => {
                table.insert(name.to_string(), value);
                return Ok(());
            }
            (None, false) => {
                let entry = table
                    .entry(name.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()));
                table = entry
                    .as_table_mut()
                    .ok_or_else(|| Error::invalid(key, format!("`{name}` is not a table")))?;
            }
            (Some(i), _) => {
                let arr = table
                    .get_mut(name)
                    .and_then(toml::Value::as_array_mut)
                    .ok_or_else(|| Error::invalid(key, format!("`{name}` is not an array")))?;
                let len = arr.len();
                let elem = arr
                    .get_mut(i)
                    .ok_or_else(|| Error::invalid(key, format!("index {i} out of range (len {len})")))?;
                if last {
                    *elem = value;
                    return Ok(());
                }
                table = elem
                    .as_table_mut()
                    .ok_or_else(|| Error::invalid(key, format!("`{name}[{i}]` is not a table")))?;
            }
        }
    }
    Ok(())
}

/// A parsed scenario file together with the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ScenarioConfig,
    pub base_dir: PathBuf,
    pub source: PathBuf,
}

impl LoadedConfig {
    pub fn from_str_with_overrides(
        text: &str,
        source: &Path,
        base_dir: &Path,
        overrides: &[String],
    ) -> Result<Self> {
        let parse_err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            message,
        };
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let config = ScenarioConfig::deserialize(doc).map_err(|e| parse_err(e.to_string()))?;
        Ok(Self {
            config,
            base_dir: base_dir.to_path_buf(),
            source: source.to_path_buf(),
        })
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with_overrides(&text, path, base, overrides)
    }

    pub fn bundled(overrides: &[String]) -> Result<Self> {
        Self::from_str_with_overrides(DEFAULT_SCENARIO, Path::new("<bundled>"), Path::new("."), overrides)
    }

    /// Checks every section and resolves one [`Scenario`] per scheme × load,
    /// schemes outermost, both in file order.
    pub fn build(&self) -> Result<Vec<Scenario>> {
        let c = &self.config;
        let mut issues = Vec::new();
        let s = &c.scenario;

        if s.num_ues == 0 {
            issues.push(Issue::new("scenario.num_ues", "must be >= 1"));
        }
        if s.total_rbs == 0 {
            issues.push(Issue::new("scenario.total_rbs", "must be >= 1"));
        }
        if !(s.slot_duration_s > 0.0 && s.slot_duration_s.is_finite()) {
            issues.push(Issue::new("scenario.slot_duration_s", format!("must be > 0, got {}", s.slot_duration_s)));
        }
        if s.slots_per_drop == 0 {
            issues.push(Issue::new("scenario.slots_per_drop", "must be >= 1"));
        }
        if s.num_drops == 0 {
            issues.push(Issue::new("scenario.num_drops", "must be >= 1"));
        }
        if s.csi_period_slots == 0 {
            issues.push(Issue::new("scenario.csi_period_slots", "must be >= 1"));
        }
        if !(s.ema_coefficient > 0.0 && s.ema_coefficient <= 1.0) {
            issues.push(Issue::new(
                "scenario.ema_coefficient",
                format!("must lie in (0,1], got {}", s.ema_coefficient),
            ));
        }
        if s.warmup_slots >= s.slots_per_drop && s.slots_per_drop > 0 {
            issues.push(Issue::new("scenario.warmup_slots", "must be below slots_per_drop"));
        }

        let configs = match self.configs() {
            Ok(cs) => {
                if cs.max_overhead() > s.total_rbs {
                    issues.push(Issue::new(
                        "scenario.total_rbs",
                        format!("must cover the largest CSI-RS overhead ({})", cs.max_overhead()),
                    ));
                }
                Some(cs)
            }
            Err(Error::Invalid(mut v)) => {
                issues.append(&mut v);
                None
            }
            Err(e) => return Err(e),
        };

        let link = match self.link() {
            Ok(l) => Some(l),
            Err(Error::Invalid(mut v)) => {
                issues.append(&mut v);
                None
            }
            Err(e) => return Err(e),
        };

        let channel = ChannelParams {
            path_gain_min_db: c.channel.path_gain_min_db,
            path_gain_max_db: c.channel.path_gain_max_db,
            fading_sigma_db: c.channel.fading_sigma_db,
            noise_floor_dbm_per_rb: c.channel.noise_floor_dbm_per_rb,
        };
        issues.extend(channel.validate());
        let mut leakage = BTreeMap::new();
        for (k, v) in &c.channel.leakage_db {
            match k.parse::<u32>() {
                Ok(trx) => {
                    leakage.insert(trx, *v);
                }
                Err(_) => issues.push(Issue::new(
                    format!("channel.leakage_db.{k}"),
                    "keys must be TRX counts",
                )),
            }
        }
        let interference = InterferenceModel {
            leakage_db: leakage,
            intercell_floor_dbm_per_rb: c.channel.intercell_floor_dbm_per_rb,
            distance_slope_db: c.channel.leakage_distance_slope_db,
            max_distance_rbs: c.channel.leakage_max_distance_rbs,
        };
        issues.extend(interference.validate());
        if let Some(cs) = &configs {
            for cfg in cs.iter() {
                if !interference.leakage_db.contains_key(&cfg.num_trx) {
                    issues.push(Issue::new(
                        "channel.leakage_db",
                        format!("no entry for {} TRX", cfg.num_trx),
                    ));
                }
            }
        }

        let power = PcParams {
            p_static: c.power.p_static,
            p_dyn_ante: c.power.p_dyn_ante,
            p_dyn_joint: c.power.p_dyn_joint,
            eta: c.power.eta.clone(),
            sleep: c.power.sleep.clone(),
        };
        issues.extend(power.validate());

        let t = &c.traffic;
        if t.loads.is_empty() {
            issues.push(Issue::new("traffic.loads", "at least one load required"));
        }
        if t.packet_size_bits == 0 {
            issues.push(Issue::new("traffic.packet_size_bits", "must be >= 1"));
        }
        if t.max_buffer_bits < t.packet_size_bits {
            issues.push(Issue::new("traffic.max_buffer_bits", "must hold at least one packet"));
        }
        let mut rates = Vec::new();
        for load in &t.loads {
            let rate = t.rate.or_else(|| t.rates.get(load).copied()).unwrap_or(load.default_rate());
            if !(rate >= 0.0 && rate.is_finite()) {
                let path = if t.rate.is_some() {
                    "traffic.rate".to_string()
                } else {
                    format!("traffic.rates.{load}")
                };
                issues.push(Issue::new(path, format!("rate must be >= 0, got {rate}")));
            }
            rates.push((*load, t.rate_scope.per_ue_rate(rate, s.num_ues.max(1))));
        }

        if c.schemes.is_empty() {
            issues.push(Issue::new("schemes", "at least one scheme required"));
        }
        let mut setups = Vec::new();
        for (i, e) in c.schemes.iter().enumerate() {
            let path = format!("schemes[{i}]");
            let beta = BetaParams {
                chi: e.chi,
                floor: e.beta_floor,
            };
            issues.extend(beta.validate(&path));
            let scheme = match e.name.parse::<Scheme>() {
                Ok(sch) => sch,
                Err(_) => {
                    issues.push(Issue::new(format!("{path}.name"), format!("unknown scheme `{}`", e.name)));
                    continue;
                }
            };
            let Some(cs) = &configs else { continue };
            let setup = match SchemeSetup::resolve(scheme, cs, beta) {
                Ok(s) => s,
                Err(_) => {
                    issues.push(Issue::new(
                        format!("{path}.name"),
                        format!("{scheme} needs a configuration it cannot find"),
                    ));
                    continue;
                }
            };
            let setup = match &e.configs {
                None => setup,
                Some(trx) => {
                    let mut ids = Vec::new();
                    for (j, x) in trx.iter().enumerate() {
                        match cs.by_trx(*x) {
                            Some(cfg) => ids.push(cfg.id),
                            None => issues.push(Issue::new(
                                format!("{path}.configs[{j}]"),
                                format!("no configuration with {x} TRX"),
                            )),
                        }
                    }
                    ids.sort();
                    ids.dedup();
                    if ids.is_empty() {
                        issues.push(Issue::new(format!("{path}.configs"), "must not be empty"));
                    } else if scheme.static_trx().is_some() && ids.len() != 1 {
                        issues.push(Issue::new(
                            format!("{path}.configs"),
                            "static schemes use exactly one configuration",
                        ));
                    } else if scheme.adapts_antennas() && ids.last() != Some(&cs.reference().id) {
                        issues.push(Issue::new(
                            format!("{path}.configs"),
                            "adaptive schemes must include the reference configuration",
                        ));
                    }
                    setup.with_configs(ids)
                }
            };
            setups.push(setup);
        }

        if !issues.is_empty() {
            return Err(Error::Invalid(issues));
        }
        let (configs, link) = (configs.expect("checked"), link.expect("checked"));
        let mut out = Vec::new();
        for setup in setups {
            for &(load, rate) in &rates {
                out.push(Scenario {
                    num_ues: s.num_ues,
                    total_rbs: s.total_rbs,
                    slot_duration_s: s.slot_duration_s,
                    slots_per_drop: s.slots_per_drop,
                    num_drops: s.num_drops,
                    base_seed: s.base_seed,
                    warmup_slots: s.warmup_slots,
                    csi_period_slots: s.csi_period_slots,
                    ema_coefficient: s.ema_coefficient,
                    ipv_reservoir: s.ipv_reservoir,
                    power_trace: s.power_trace,
                    configs: configs.clone(),
                    link: link.clone(),
                    channel: channel.clone(),
                    interference: interference.clone(),
                    power: power.clone(),
                    traffic: TrafficParams {
                        arrival_rate: rate,
                        packet_size_bits: t.packet_size_bits,
                        max_buffer_bits: t.max_buffer_bits,
                        max_retransmissions: t.max_retransmissions,
                        load,
                    },
                    scheme: setup.clone(),
                });
            }
        }
        Ok(out)
    }

    fn configs(&self) -> Result<ConfigSet> {
        let a = &self.config.antennas;
        let entries: Vec<(u32, u32, u32, Option<f64>)> = a
            .configs
            .iter()
            .map(|e| (e.num_ports, e.num_trx, e.csi_overhead_rbs, e.max_power_dbm))
            .collect();
        ConfigSet::with_scaled_power(a.reference_power_dbm, &entries)
    }

    fn link(&self) -> Result<LinkModel> {
        let l = &self.config.link;
        let table = match &l.mcs_table {
            None => McsTable::bundled(),
            Some(p) => {
                let path = self.base_dir.join(p);
                match McsTable::load(&path) {
                    Ok(t) => t,
                    Err(Error::Invalid(v)) => {
                        return Err(Error::Invalid(
                            v.into_iter()
                                .map(|i| Issue::new(format!("link.mcs_table: {}", i.path), i.message))
                                .collect(),
                        ))
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        let bler = BlerModel {
            steepness: l.bler_steepness,
            target_bler: l.target_bler,
        };
        let bler_issues = bler.validate("link");
        if !bler_issues.is_empty() {
            return Err(Error::Invalid(bler_issues));
        }
        LinkModel::new(table, bler, l.res_per_rb)
    }
}

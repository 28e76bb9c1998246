//! MCS table and the SINR→BLER abstraction.
//!
//! The BLER curve of MCS `k` is a logistic function of the wideband SINR in
//! dB, shifted so that it crosses the target BLER exactly at the table's
//! `snr_threshold_db(k)`:
//!
//! ```text
//! bler(γ, k) = ε̄ / (ε̄ + (1 − ε̄) · exp(s · (γ − θ_k)))
//! ```
//!
//! which is the same curve as `1 / (1 + exp(s·(γ − θ_k) + ln((1−ε̄)/ε̄)))`
//! but evaluates to `ε̄` bit-exactly at `γ = θ_k`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Issue, Result};

/// Bundled default table, 28 entries.
pub const DEFAULT_MCS_TABLE: &str = include_str!("../data/mcs_table.toml");

/// 12 subcarriers × 13 data symbols; one symbol of the slot is reserved.
pub const DEFAULT_RES_PER_RB: u32 = 12 * 13;

/// One-based MCS index `k ∈ 1..=K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsIndex(u8);

impl McsIndex {
    pub const LOWEST: McsIndex = McsIndex(1);

    pub const fn new(k: u8) -> Self {
        McsIndex(k)
    }

    pub const fn get(self) -> u8 {
        self.0
    }

    fn offset(self) -> usize {
        usize::from(self.0) - 1
    }
}

impl fmt::Display for McsIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MCS{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsEntry {
    pub index: u8,
    /// Information bits per resource element.
    pub spectral_efficiency: f64,
    /// SINR (dB) at which the BLER equals the target.
    pub snr_threshold_db: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McsTableFile {
    mcs: Vec<McsEntry>,
}

/// A validated MCS table: indices `1..=K` without gaps, spectral efficiency
/// and SINR threshold both strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn new(entries: Vec<McsEntry>) -> Result<Self> {
        let issues = Self::check(&entries);
        if issues.is_empty() {
            Ok(Self { entries })
        } else {
            Err(Error::Invalid(issues))
        }
    }

    fn check(entries: &[McsEntry]) -> Vec<Issue> {
        let mut issues = Vec::new();
        if entries.is_empty() {
            issues.push(Issue::new("mcs", "table has no entries"));
            return issues;
        }
        if entries.len() > usize::from(u8::MAX) {
            issues.push(Issue::new("mcs", "table has more than 255 entries"));
        }
        for (row, e) in entries.iter().enumerate() {
            let path = format!("mcs[{row}]");
            if usize::from(e.index) != row + 1 {
                issues.push(Issue::new(
                    &path,
                    format!("index {} out of sequence, expected {}", e.index, row + 1),
                ));
            }
            if !(e.spectral_efficiency.is_finite() && e.spectral_efficiency > 0.0) {
                issues.push(Issue::new(
                    &path,
                    format!("spectral_efficiency must be positive, got {}", e.spectral_efficiency),
                ));
            }
            if !e.snr_threshold_db.is_finite() {
                issues.push(Issue::new(&path, "snr_threshold_db must be finite"));
            }
            if row > 0 {
                let prev = &entries[row - 1];
                if e.spectral_efficiency <= prev.spectral_efficiency {
                    issues.push(Issue::new(
                        &path,
                        format!(
                            "spectral_efficiency {} (index {}) not greater than {} (index {})",
                            e.spectral_efficiency, e.index, prev.spectral_efficiency, prev.index
                        ),
                    ));
                }
                if e.snr_threshold_db <= prev.snr_threshold_db {
                    issues.push(Issue::new(
                        &path,
                        format!(
                            "snr_threshold_db {} (index {}) not greater than {} (index {})",
                            e.snr_threshold_db, e.index, prev.snr_threshold_db, prev.index
                        ),
                    ));
                }
            }
        }
        issues
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: McsTableFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: "<mcs table>".into(),
            message: e.to_string(),
        })?;
        Self::new(file.mcs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: McsTableFile = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::new(file.mcs)
    }

    pub fn bundled() -> Self {
        Self::from_toml_str(DEFAULT_MCS_TABLE).expect("bundled MCS table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn highest(&self) -> McsIndex {
        McsIndex(self.entries.len() as u8)
    }

    pub fn contains(&self, k: McsIndex) -> bool {
        k.0 >= 1 && usize::from(k.0) <= self.entries.len()
    }

    pub fn entry(&self, k: McsIndex) -> Result<&McsEntry> {
        if self.contains(k) {
            Ok(&self.entries[k.offset()])
        } else {
            Err(Error::Domain(format!(
                "{k} outside table range 1..={}",
                self.entries.len()
            )))
        }
    }

    /// All indices, lowest first.
    pub fn indices(&self) -> impl DoubleEndedIterator<Item = McsIndex> + ExactSizeIterator {
        (1..=self.entries.len() as u8).map(McsIndex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlerModel {
    /// Slope of the logistic transition, per dB.
    pub steepness: f64,
    /// First-transmission BLER target ε̄.
    pub target_bler: f64,
}

impl Default for BlerModel {
    fn default() -> Self {
        Self {
            steepness: 1.5,
            target_bler: 0.1,
        }
    }
}

impl BlerModel {
    pub fn validate(&self, path: &str) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            issues.push(Issue::new(
                format!("{path}.bler_steepness"),
                format!("steepness must be positive, got {}", self.steepness),
            ));
        }
        if !(self.target_bler > 0.0 && self.target_bler < 1.0) {
            issues.push(Issue::new(
                format!("{path}.target_bler"),
                format!("target_bler in (0,1), got {}", self.target_bler),
            ));
        }
        issues
    }

    /// BLER of a transmission at `gamma_db` on an MCS whose threshold is
    /// `threshold_db`.
    pub fn eval(&self, gamma_db: f64, threshold_db: f64) -> f64 {
        let eps = self.target_bler;
        let x = self.steepness * (gamma_db - threshold_db);
        let v = eps / (eps + (1.0 - eps) * x.exp());
        v.clamp(0.0, 1.0)
    }
}

/// MCS table plus everything needed to turn an MCS into bits: the BLER curve
/// and the number of data resource elements per RB and slot.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    table: McsTable,
    bler: BlerModel,
    res_per_rb: u32,
    bits_per_rb: Vec<u64>,
}

impl LinkModel {
    pub fn new(table: McsTable, bler: BlerModel, res_per_rb: u32) -> Result<Self> {
        let mut issues = bler.validate("link");
        if res_per_rb == 0 {
            issues.push(Issue::new("scenario.resource_elements_per_rb", "must be at least 1"));
        }
        let bits_per_rb: Vec<u64> = table
            .entries()
            .iter()
            .map(|e| (e.spectral_efficiency * f64::from(res_per_rb)).floor() as u64)
            .collect();
        if let Some(row) = bits_per_rb.iter().position(|&b| b == 0) {
            issues.push(Issue::new(
                format!("mcs[{row}]"),
                "spectral efficiency yields zero bits per RB",
            ));
        }
        if bits_per_rb.windows(2).any(|w| w[1] <= w[0]) {
            issues.push(Issue::new(
                "mcs",
                "bits per RB must be strictly increasing after rounding down",
            ));
        }
        if !issues.is_empty() {
            return Err(Error::Invalid(issues));
        }
        Ok(Self {
            table,
            bler,
            res_per_rb,
            bits_per_rb,
        })
    }

    pub fn bundled() -> Self {
        Self::new(McsTable::bundled(), BlerModel::default(), DEFAULT_RES_PER_RB)
            .expect("bundled link model is valid")
    }

    pub fn table(&self) -> &McsTable {
        &self.table
    }

    pub fn bler_model(&self) -> &BlerModel {
        &self.bler
    }

    pub fn target_bler(&self) -> f64 {
        self.bler.target_bler
    }

    pub fn res_per_rb(&self) -> u32 {
        self.res_per_rb
    }

    pub fn highest(&self) -> McsIndex {
        self.table.highest()
    }

    pub fn threshold_db(&self, k: McsIndex) -> Result<f64> {
        Ok(self.table.entry(k)?.snr_threshold_db)
    }

    pub fn bler(&self, gamma_db: f64, k: McsIndex) -> Result<f64> {
        let entry = self.table.entry(k)?;
        Ok(self.bler.eval(gamma_db, entry.snr_threshold_db))
    }

    /// `bler(γ, k) ≤ ε̄`.
    pub fn meets_target(&self, gamma_db: f64, k: McsIndex) -> bool {
        self.bler(gamma_db, k)
            .map(|b| b <= self.bler.target_bler)
            .unwrap_or(false)
    }

    /// Transport bits carried by one RB in one slot at MCS `k`.
    ///
    /// Panics if `k` is not in the table.
    pub fn bits_per_rb(&self, k: McsIndex) -> u64 {
        self.bits_per_rb[k.offset()]
    }

    /// Per-RB rate R(k) in bits/slot/RB.
    pub fn rate(&self, k: McsIndex) -> f64 {
        self.bits_per_rb(k) as f64
    }

    /// RBs needed to empty `buffer_bits` at MCS `k`.
    pub fn rbs_needed(&self, buffer_bits: u64, k: McsIndex) -> u32 {
        let rbs = buffer_bits.div_ceil(self.bits_per_rb(k));
        u32::try_from(rbs).unwrap_or(u32::MAX)
    }
}

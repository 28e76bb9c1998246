//! Link adaptation: the rate-maximising baseline (P1), the load-driven rate
//! scaling factor β and the PSD-minimising POLITE refinement (P2).

use serde::{Deserialize, Serialize};

use crate::channel::{lin_to_db, CsiReport};
use crate::error::{Error, Issue, Result};
use crate::mcs::{LinkModel, McsIndex};
use crate::scheduler::CsiRsConfig;

/// Result of the baseline LA. `feasible == false` means even the lowest MCS
/// misses the BLER target; the UE is not scheduled in that slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LaOutcome {
    pub mcs: McsIndex,
    pub feasible: bool,
}

/// Largest MCS meeting the BLER target at the reported SINR.
///
/// The report is taken at the configuration's reference PSD, which is the
/// maximum allowable PSD for that configuration, so the PSD cap holds by
/// construction.
pub fn solve_baseline_la(link: &LinkModel, report: &CsiReport, cfg: &CsiRsConfig) -> LaOutcome {
    debug_assert_eq!(report.config, cfg.id, "report belongs to another configuration");
    let gamma = report.sinr_db;
    // Feasibility is a prefix of 1..=K: binary search for its end.
    let (mut lo, mut hi) = (0u8, link.highest().get());
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if link.meets_target(gamma, McsIndex::new(mid)) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    if lo == 0 {
        LaOutcome {
            mcs: McsIndex::LOWEST,
            feasible: false,
        }
    } else {
        LaOutcome {
            mcs: McsIndex::new(lo),
            feasible: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams {
    /// Multiplicative factor χ ∈ (0, 1].
    pub chi: f64,
    /// Lower clamp on β, in (0, 1].
    pub floor: f64,
}

impl Default for BetaParams {
    fn default() -> Self {
        Self {
            chi: 0.5,
            floor: 0.05,
        }
    }
}

impl BetaParams {
    pub fn validate(&self, path: &str) -> Vec<Issue> {
        let mut issues = Vec::new();
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            issues.push(Issue::new(
                format!("{path}.chi"),
                format!("chi in (0,1], got {}", self.chi),
            ));
        }
        if !(self.floor > 0.0 && self.floor <= 1.0) {
            issues.push(Issue::new(
                format!("{path}.beta_floor"),
                format!("beta_floor in (0,1], got {}", self.floor),
            ));
        }
        issues
    }
}

/// Load-driven β = min[χ · Σ_n Q_n / (R_{n,avg} · B), 1], clamped below at
/// the configured floor. One value serves every UE in the slot.
pub fn compute_beta(
    buffers: &[u64],
    avg_rates: &[f64],
    total_rbs: u32,
    params: &BetaParams,
) -> Result<f64> {
    if buffers.len() != avg_rates.len() {
        return Err(Error::Contract(format!(
            "{} buffers but {} average rates",
            buffers.len(),
            avg_rates.len()
        )));
    }
    if total_rbs == 0 {
        return Err(Error::Domain("total RB count must be at least 1".into()));
    }
    if let Some(r) = avg_rates.iter().find(|r| !(**r > 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("average rate must be positive, got {r}")));
    }
    let b = f64::from(total_rbs);
    let load: f64 = buffers
        .iter()
        .zip(avg_rates)
        .map(|(&q, &r)| q as f64 / (r * b))
        .sum();
    Ok((params.chi * load).min(1.0).max(params.floor))
}

/// POLITE refinement of the baseline MCS `k`.
///
/// The UE keeps the transmit power of its baseline grant,
/// `P = S_ref · B_n(k)`, and a lower MCS `k′` spreads it over
/// `B_n(k′) = min(rbs_needed(Q, k′), max_rbs)` RBs. The SINR then drops by
/// `10·log10(B_n(k′)/B_n(k))`. Among the `k′ ≤ k` with
/// `R(k′) ≥ β·R(k)` whose BLER at the reduced SINR stays within target, the
/// one with the lowest PSD (most RBs) wins; ties go to the higher MCS.
pub fn solve_polite_la(
    link: &LinkModel,
    k: McsIndex,
    beta: f64,
    report: &CsiReport,
    cfg: &CsiRsConfig,
    buffer_bits: u64,
    max_rbs: u32,
) -> McsIndex {
    debug_assert_eq!(report.config, cfg.id, "report belongs to another configuration");
    if buffer_bits == 0 || max_rbs == 0 {
        return k;
    }
    let base_rbs = link.rbs_needed(buffer_bits, k).min(max_rbs);
    let min_rate = beta * link.rate(k);
    // R is strictly increasing, so the rate constraint is a suffix of 1..=k.
    let first = link
        .table()
        .indices()
        .take(usize::from(k.get()))
        .find(|&c| link.rate(c) >= min_rate)
        .unwrap_or(k);

    let mut best = (base_rbs, k);
    for cand in (first.get()..k.get()).map(McsIndex::new) {
        let rbs = link.rbs_needed(buffer_bits, cand).min(max_rbs);
        if rbs <= best.0 && !(rbs == best.0 && cand > best.1) {
            continue;
        }
        let gamma = report.sinr_db - lin_to_db(f64::from(rbs) / f64::from(base_rbs));
        if link.meets_target(gamma, cand) {
            best = (rbs, cand);
        }
    }
    best.1
}

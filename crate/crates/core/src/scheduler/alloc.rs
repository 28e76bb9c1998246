use crate::channel::lin_to_db;
use crate::mcs::{LinkModel, McsIndex};

use super::Allocation;

/// RB demand of one UE entering the contiguous allocator.
#[derive(Debug, Clone, PartialEq)]
pub struct Demand {
    pub ue: usize,
    pub mcs: McsIndex,
    pub rbs: u32,
    /// Power the UE's grant may use; its PSD never exceeds the reference PSD.
    pub power_dbm: f64,
    pub retransmission: bool,
}

/// Greedy first fit in the given order: each UE gets `min(demand, remaining)`
/// contiguous RBs starting at RB 0. Zero demands are skipped.
pub fn allocate_contiguous(ordered: &[Demand], budget: u32, reference_psd_dbm: f64) -> Vec<Allocation> {
    let mut next = 0u32;
    let mut out = Vec::new();
    for d in ordered {
        if d.rbs == 0 {
            continue;
        }
        let len = d.rbs.min(budget - next);
        if len == 0 {
            break;
        }
        let psd = (d.power_dbm - lin_to_db(f64::from(len))).min(reference_psd_dbm);
        out.push(Allocation {
            ue: d.ue,
            rb_start: next,
            rb_len: len,
            mcs: d.mcs,
            power_dbm: psd + lin_to_db(f64::from(len)),
            psd_dbm_per_rb: psd,
            retransmission: d.retransmission,
        });
        next += len;
    }
    out
}

/// Extends grants with leftover RBs in `order` (UE ids), power held fixed.
///
/// A UE keeps its MCS, so it absorbs extra RBs only while the lowered PSD
/// still meets the BLER target at the SINR its report predicts. Spans are
/// re-laid contiguously afterwards. Returns the RBs still unused.
pub fn distribute_leftover(
    allocations: &mut [Allocation],
    order: &[usize],
    mut leftover: u32,
    link: &LinkModel,
    predicted_sinr: impl Fn(usize, f64) -> f64,
) -> u32 {
    for &ue in order {
        if leftover == 0 {
            break;
        }
        let Some(a) = allocations.iter_mut().find(|a| a.ue == ue) else {
            continue;
        };
        let fits = |len: u32| {
            let psd = a.power_dbm - lin_to_db(f64::from(len));
            link.meets_target(predicted_sinr(ue, psd), a.mcs)
        };
        let limit = a.rb_len + leftover;
        let Ok(threshold) = link.threshold_db(a.mcs) else {
            continue;
        };
        let margin = predicted_sinr(ue, a.psd_dbm_per_rb) - threshold;
        let estimate = (f64::from(a.rb_len) * 10f64.powf(margin / 10.0)).floor();
        let mut len = if estimate.is_finite() {
            (estimate as u32).clamp(a.rb_len, limit)
        } else {
            a.rb_len
        };
        while len > a.rb_len && !fits(len) {
            len -= 1;
        }
        while len < limit && fits(len + 1) {
            len += 1;
        }
        if len > a.rb_len {
            leftover -= len - a.rb_len;
            a.rb_len = len;
            a.psd_dbm_per_rb = a.power_dbm - lin_to_db(f64::from(len));
        }
    }
    let mut next = 0;
    for a in allocations.iter_mut() {
        a.rb_start = next;
        next += a.rb_len;
    }
    leftover
}

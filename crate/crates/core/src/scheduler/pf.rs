use crate::mcs::{LinkModel, McsIndex};

use super::UeView;

/// X_n = R(k) / R_{n,avg}. With wideband CQI this is one value per UE for
/// the whole band.
pub fn pf_metric(link: &LinkModel, ue: &UeView, k: McsIndex) -> f64 {
    link.rate(k) / ue.r_avg
}

/// Exponential moving average of the delivered rate, in bits/slot/RB.
pub fn update_average(r_avg: f64, delivered_bits: u64, total_rbs: u32, coefficient: f64) -> f64 {
    (1.0 - coefficient) * r_avg + coefficient * delivered_bits as f64 / f64::from(total_rbs)
}

/// Scheduling order over `candidates` (positions into `ues`): pending
/// retransmissions first, then descending X_n, ties broken by ascending UE id.
pub fn pf_order(
    link: &LinkModel,
    ues: &[UeView],
    candidates: &[usize],
    mcs_of: impl Fn(usize) -> McsIndex,
) -> Vec<usize> {
    let mut keyed: Vec<(usize, f64)> = candidates
        .iter()
        .map(|&i| (i, pf_metric(link, &ues[i], mcs_of(i))))
        .collect();
    keyed.sort_by(|a, b| {
        let (ua, ub) = (&ues[a.0], &ues[b.0]);
        ub.retransmission
            .cmp(&ua.retransmission)
            .then(b.1.total_cmp(&a.1))
            .then(ua.id.cmp(&ub.id))
    });
    keyed.into_iter().map(|(i, _)| i).collect()
}

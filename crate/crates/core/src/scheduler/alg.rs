use log::warn;

use crate::channel::{lin_to_db, CsiReports};
use crate::error::{Error, Result};
use crate::la::{compute_beta, solve_baseline_la, solve_polite_la, BetaParams, LaOutcome};
use crate::mcs::LinkModel;

use super::alloc::{allocate_contiguous, distribute_leftover, Demand};
use super::pf::pf_order;
use super::{ConfigId, ConfigSet, CsiRsConfig, Scheme, SchemeSetup, SlotDecision, UeView};

/// Everything the scheduler reads besides the UE views.
#[derive(Debug, Clone, Copy)]
pub struct SlotContext<'a> {
    pub configs: &'a ConfigSet,
    pub link: &'a LinkModel,
    pub reports: &'a CsiReports,
    pub total_rbs: u32,
    /// CSI-RS is transmitted this slot and its RBs are unavailable for data.
    pub csi_slot: bool,
}

impl SlotContext<'_> {
    fn overhead(&self, cfg: &CsiRsConfig) -> u32 {
        if self.csi_slot {
            cfg.csi_overhead_rbs
        } else {
            0
        }
    }

    fn budget(&self, cfg: &CsiRsConfig) -> u32 {
        self.total_rbs.saturating_sub(self.overhead(cfg))
    }

    /// Baseline LA for every UE in `active` (positions into `ues`), or `None`
    /// if some UE has no report for `cfg`.
    fn la_at(&self, ues: &[UeView], active: &[usize], cfg: &CsiRsConfig) -> Option<Vec<LaOutcome>> {
        let mut out = vec![
            LaOutcome {
                mcs: crate::mcs::McsIndex::LOWEST,
                feasible: false
            };
            ues.len()
        ];
        for &i in active {
            let report = self.reports.get(ues[i].id, cfg.id)?;
            out[i] = solve_baseline_la(self.link, report, cfg);
        }
        Some(out)
    }
}

enum Antennas<'s> {
    Fixed(ConfigId),
    /// Allowed subset, ascending.
    Adaptive(&'s [ConfigId]),
}

/// Joint antenna and power adaptation: the largest power saving over the
/// allowed configurations that still serves every schedulable UE's demand,
/// followed by POLITE and leftover spreading at power held fixed.
pub fn alg1_schedule(
    ctx: &SlotContext<'_>,
    ues: &[UeView],
    configs: &[ConfigId],
    beta: &BetaParams,
) -> Result<SlotDecision> {
    run(ctx, ues, Antennas::Adaptive(configs), Some(beta))
}

/// The comparison schemes. `Proposed` is routed to [`alg1_schedule`].
pub fn baseline_schedule(
    ctx: &SlotContext<'_>,
    ues: &[UeView],
    setup: &SchemeSetup,
) -> Result<SlotDecision> {
    let first = *setup
        .configs
        .first()
        .ok_or_else(|| Error::Contract(format!("{} has no configurations", setup.scheme)))?;
    match setup.scheme {
        Scheme::Static8 | Scheme::Static16 | Scheme::Static32 => {
            run(ctx, ues, Antennas::Fixed(first), None)
        }
        Scheme::AntennaAdaptation => run(ctx, ues, Antennas::Adaptive(&setup.configs), None),
        Scheme::PowerAdaptation => {
            let last = *setup.configs.last().expect("non-empty");
            run(ctx, ues, Antennas::Fixed(last), Some(&setup.beta))
        }
        Scheme::Proposed => alg1_schedule(ctx, ues, &setup.configs, &setup.beta),
    }
}

/// Dispatches one slot to the scheme's scheduler.
pub fn schedule(ctx: &SlotContext<'_>, ues: &[UeView], setup: &SchemeSetup) -> Result<SlotDecision> {
    match setup.scheme {
        Scheme::Proposed => alg1_schedule(ctx, ues, &setup.configs, &setup.beta),
        _ => baseline_schedule(ctx, ues, setup),
    }
}

fn run(
    ctx: &SlotContext<'_>,
    ues: &[UeView],
    antennas: Antennas<'_>,
    polite: Option<&BetaParams>,
) -> Result<SlotDecision> {
    let link = ctx.link;
    let num_ues = ctx.reports.num_ues().max(ues.iter().map(|u| u.id + 1).max().unwrap_or(0));
    let start_id = match antennas {
        Antennas::Fixed(id) => id,
        Antennas::Adaptive(ids) => *ids
            .iter()
            .max()
            .ok_or_else(|| Error::Contract("no configurations to adapt over".into()))?,
    };
    let start = ctx.configs.get(start_id)?;
    let active: Vec<usize> = (0..ues.len()).filter(|&i| ues[i].demand_bits > 0).collect();
    if active.is_empty() {
        return Ok(SlotDecision::idle(start.id, num_ues, ctx.total_rbs, ctx.overhead(start)));
    }

    let mut warnings = Vec::new();
    let k_start = ctx.la_at(ues, &active, start).ok_or_else(|| {
        Error::Contract(format!("missing CSI report for reference configuration {}", start.id))
    })?;
    let schedulable_at_start: Vec<bool> = k_start.iter().map(|o| o.feasible).collect();

    let (chosen, k) = match antennas {
        Antennas::Fixed(_) => (start, k_start),
        Antennas::Adaptive(ids) => {
            let mut current = (start, k_start);
            for &id in ids.iter().rev().filter(|&&id| id != start_id) {
                let cfg = ctx.configs.get(id)?;
                let Some(k_m) = ctx.la_at(ues, &active, cfg) else {
                    let msg = format!("missing CSI report for {id}; configuration skipped");
                    warn!("{msg}");
                    warnings.push(msg);
                    continue;
                };
                let mut needed = 0u64;
                let mut feasible = true;
                for &i in active.iter().filter(|&&i| schedulable_at_start[i]) {
                    if !k_m[i].feasible {
                        feasible = false;
                        break;
                    }
                    needed += u64::from(link.rbs_needed(ues[i].demand_bits, k_m[i].mcs));
                }
                if feasible && needed <= u64::from(ctx.budget(cfg)) {
                    current = (cfg, k_m);
                } else {
                    break;
                }
            }
            current
        }
    };

    let budget = ctx.budget(chosen);
    let ref_psd = chosen.reference_psd_dbm(ctx.total_rbs);
    let served: Vec<usize> = active.iter().copied().filter(|&i| k[i].feasible).collect();
    let order = pf_order(link, ues, &served, |i| k[i].mcs);
    let p1_rbs: Vec<u32> = (0..ues.len())
        .map(|i| {
            if k[i].feasible && ues[i].demand_bits > 0 {
                link.rbs_needed(ues[i].demand_bits, k[i].mcs).min(budget)
            } else {
                0
            }
        })
        .collect();

    let mut final_mcs: Vec<_> = k.iter().map(|o| o.mcs).collect();
    let mut rbs = p1_rbs.clone();
    let mut beta = None;
    if let Some(params) = polite {
        let buffers: Vec<u64> = ues.iter().map(|u| u.demand_bits).collect();
        let rates: Vec<f64> = ues.iter().map(|u| u.r_avg).collect();
        let b = compute_beta(&buffers, &rates, ctx.total_rbs, params)?;
        beta = Some(b);
        let mut reserved: u32 = order.iter().map(|&i| p1_rbs[i]).sum();
        let mut used = 0u32;
        for &i in &order {
            reserved -= p1_rbs[i];
            let cap = budget.saturating_sub(used + reserved).max(p1_rbs[i]);
            let report = ctx
                .reports
                .get(ues[i].id, chosen.id)
                .expect("report checked by la_at");
            let kp = solve_polite_la(link, k[i].mcs, b, report, chosen, ues[i].demand_bits, cap);
            final_mcs[i] = kp;
            rbs[i] = link.rbs_needed(ues[i].demand_bits, kp).min(cap);
            used = used.saturating_add(rbs[i]);
        }
    }

    let demands: Vec<Demand> = order
        .iter()
        .map(|&i| Demand {
            ue: ues[i].id,
            mcs: final_mcs[i],
            rbs: rbs[i],
            power_dbm: ref_psd + lin_to_db(f64::from(p1_rbs[i].max(1))),
            retransmission: ues[i].retransmission,
        })
        .collect();
    let mut allocations = allocate_contiguous(&demands, budget, ref_psd);
    let allocated: u32 = allocations.iter().map(|a| a.rb_len).sum();
    let mut leftover = budget - allocated;
    if leftover > 0 && !allocations.is_empty() {
        let granted: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&i| allocations.iter().any(|a| a.ue == ues[i].id))
            .collect();
        let refreshed: Vec<usize> = pf_order(link, ues, &granted, |i| final_mcs[i])
            .into_iter()
            .map(|i| ues[i].id)
            .collect();
        let reports = ctx.reports;
        leftover = distribute_leftover(&mut allocations, &refreshed, leftover, link, |ue, psd| {
            reports
                .get(ue, chosen.id)
                .map_or(f64::NEG_INFINITY, |r| r.sinr_at(psd))
        });
    }

    let mut mcs = vec![None; num_ues];
    for &i in &served {
        mcs[ues[i].id] = Some(final_mcs[i]);
    }
    Ok(SlotDecision {
        config: chosen.id,
        allocations,
        csi_overhead_rbs: ctx.overhead(chosen),
        leftover_rbs: leftover,
        mcs,
        beta,
        warnings,
    })
}

//! Independent reference implementations used as test oracles. They are
//! written from the model definitions, not from the library code.
#![allow(dead_code)]

use nessim_core::channel::CsiReports;
use nessim_core::mcs::{BlerModel, LinkModel, McsEntry, McsIndex, McsTable};
use nessim_core::scheduler::{ConfigId, ConfigSet, UeView};
use rand::Rng;

/// Logistic BLER written as 1 / (1 + exp(s·(γ − θ) + ln((1 − ε)/ε))).
pub fn bler_closed_form(gamma: f64, theta: f64, s: f64, eps: f64) -> f64 {
    1.0 / (1.0 + (s * (gamma - theta) + ((1.0 - eps) / eps).ln()).exp())
}

/// A random valid table with 4 to 28 entries.
pub fn random_link<R: Rng>(rng: &mut R) -> LinkModel {
    let k = rng.random_range(4..=28u8);
    let mut se = rng.random_range(0.1..0.4);
    let mut th = rng.random_range(-8.0..-2.0);
    let entries = (1..=k)
        .map(|i| {
            let e = McsEntry {
                index: i,
                spectral_efficiency: se,
                snr_threshold_db: th,
            };
            se += rng.random_range(0.05..0.5);
            th += rng.random_range(0.3..2.5);
            e
        })
        .collect();
    let bler = BlerModel {
        steepness: rng.random_range(0.5..4.0),
        target_bler: rng.random_range(0.01..0.3),
    };
    LinkModel::new(McsTable::new(entries).unwrap(), bler, rng.random_range(100..=168)).unwrap()
}

/// Exhaustive P1: the largest index meeting the target, or (1, infeasible).
pub fn oracle_p1(link: &LinkModel, gamma: f64) -> (McsIndex, bool) {
    let mut best = None;
    for k in link.table().indices() {
        if link.bler(gamma, k).unwrap() <= link.target_bler() {
            best = Some(k);
        }
    }
    match best {
        Some(k) => (k, true),
        None => (McsIndex::LOWEST, false),
    }
}

fn rbs(q: u64, bits_per_rb: u64) -> u64 {
    (q + bits_per_rb - 1) / bits_per_rb
}

/// Brute-force POLITE over every k′ ≤ k: fixed power, PSD falls with the RB
/// count; lowest PSD wins, ties to the higher MCS.
pub fn oracle_polite(link: &LinkModel, k: McsIndex, beta: f64, gamma: f64, q: u64, max_rbs: u32) -> McsIndex {
    if q == 0 || max_rbs == 0 {
        return k;
    }
    let b_of = |c: McsIndex| rbs(q, link.bits_per_rb(c)).min(u64::from(max_rbs)) as f64;
    let base = b_of(k);
    let mut best: Option<(f64, McsIndex)> = None;
    for c in link.table().indices().filter(|c| *c <= k) {
        if link.rate(c) < beta * link.rate(k) {
            continue;
        }
        let b = b_of(c);
        let psd_drop_db = 10.0 * (b / base).log10();
        if link.bler(gamma - psd_drop_db, c).unwrap() > link.target_bler() {
            continue;
        }
        // lower PSD ⇔ more RBs
        let better = match best {
            None => true,
            Some((bb, bk)) => b > bb || (b == bb && c > bk),
        };
        if better {
            best = Some((b, c));
        }
    }
    best.map_or(k, |(_, c)| c)
}

pub fn oracle_beta(q: &[u64], r: &[f64], b: u32, chi: f64, floor: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..q.len() {
        sum += q[i] as f64 / (r[i] * f64::from(b));
    }
    let raw = chi * sum;
    let clamped = if raw > 1.0 { 1.0 } else { raw };
    if clamped < floor {
        floor
    } else {
        clamped
    }
}

/// Active PC written term by term.
pub fn oracle_pc(s_a: f64, s_f: f64, s_p: f64, p_static: f64, ante: f64, joint: f64, eta: f64) -> f64 {
    let pa = if s_f * s_p > 0.0 { s_f * s_p * joint / eta } else { 0.0 };
    p_static + s_a * ante + s_a * pa
}

/// Greedy descent over `allowed` (ascending, reference last): keep going
/// down while the configuration can empty every buffer, stop at the first
/// one that cannot.
pub fn oracle_descent(
    link: &LinkModel,
    configs: &ConfigSet,
    reports: &CsiReports,
    ues: &[UeView],
    allowed: &[ConfigId],
    total_rbs: u32,
    csi_slot: bool,
) -> ConfigId {
    let top = *allowed.last().unwrap();
    let schedulable_top: Vec<bool> = ues
        .iter()
        .map(|u| oracle_p1(link, reports.get(u.id, top).unwrap().sinr_db).1)
        .collect();
    let mut chosen = top;
    for &m in allowed.iter().rev().skip(1) {
        let cfg = configs.get(m).unwrap();
        let budget = total_rbs - if csi_slot { cfg.csi_overhead_rbs } else { 0 };
        let mut need = 0u64;
        let mut ok = true;
        for (u, &s) in ues.iter().zip(&schedulable_top) {
            if u.demand_bits == 0 || !s {
                continue;
            }
            let (k, feasible) = oracle_p1(link, reports.get(u.id, m).unwrap().sinr_db);
            if !feasible {
                ok = false;
                break;
            }
            need += rbs(u.demand_bits, link.bits_per_rb(k));
        }
        if ok && need <= u64::from(budget) {
            chosen = m;
        } else {
            break;
        }
    }
    chosen
}

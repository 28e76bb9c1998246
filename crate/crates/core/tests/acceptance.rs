//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nessim_core::channel::{db_to_lin, CsiReport};
use nessim_core::config::LoadedConfig;
use nessim_core::engine::{run_campaign, DropState, Scenario};
use nessim_core::fixtures::slot_fixtures;
use nessim_core::kpi::{campaign_csv, export_campaign, ipv_cdf_csv, KpiRecord};
use nessim_core::la::{compute_beta, solve_baseline_la, solve_polite_la, BetaParams};
use nessim_core::mcs::LinkModel;
use nessim_core::power::{active_pc, EtaModel, PcParams};
use nessim_core::scheduler::{schedule, ConfigSet, Scheme, SchemeSetup};
use nessim_core::traffic::{generate_arrivals, LoadLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

type Outcome = Result<String, String>;

struct Suite {
    lines: Vec<(bool, String, String)>,
}

impl Suite {
    fn check(&mut self, name: &str, f: impl FnOnce() -> Outcome) {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = started.elapsed().as_secs_f64();
        let (ok, detail) = match outcome {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        println!("{} {name}: {detail} [{elapsed:.2}s]", if ok { "PASS" } else { "FAIL" });
        self.lines.push((ok, name.to_string(), detail));
    }
}

fn report_at(cfg_id: nessim_core::scheduler::ConfigId, gamma: f64) -> CsiReport {
    CsiReport {
        ue: 0,
        config: cfg_id,
        sinr_db: gamma,
        alpha_db: gamma,
        reference_psd_dbm: 0.0,
    }
}

fn la_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11A);
    let cfg = ConfigSet::default_three().reference().clone();
    let mut mismatches = 0;
    let mut link = random_link(&mut rng);
    for i in 0..1000 {
        if i % 10 == 0 {
            link = random_link(&mut rng);
        }
        let lo = link.threshold_db(nessim_core::mcs::McsIndex::LOWEST).unwrap() - 5.0;
        let hi = link.threshold_db(link.highest()).unwrap() + 5.0;
        let gamma = rng.random_range(lo..hi);
        let got = solve_baseline_la(&link, &report_at(cfg.id, gamma), &cfg);
        if (got.mcs, got.feasible) != oracle_p1(&link, gamma) {
            mismatches += 1;
        }
    }
    let t = started.elapsed();
    if mismatches == 0 && t < Duration::from_secs(1) {
        Ok(format!("1000/1000 match exhaustive search over 100 random tables in {:.3}s", t.as_secs_f64()))
    } else {
        Err(format!("{mismatches} mismatches, {:.3}s", t.as_secs_f64()))
    }
}

fn polite_oracle() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9017);
    let link = LinkModel::bundled();
    let cfg = ConfigSet::default_three().reference().clone();
    let (mut done, mut mismatches, mut moved) = (0, 0, 0);
    while done < 1000 {
        let gamma = rng.random_range(-6.0..32.0);
        let (k, feasible) = oracle_p1(&link, gamma);
        if !feasible {
            continue;
        }
        let beta = rng.random_range(0.05..=1.0);
        let q = match rng.random_range(0..3) {
            0 => rng.random_range(1..2_000u64),
            1 => 40_000 * rng.random_range(1..=4u64),
            _ => rng.random_range(1..1_000_000u64),
        };
        let max_rbs = rng.random_range(1..=273u32);
        let report = report_at(cfg.id, gamma);
        let got = solve_polite_la(&link, k, beta, &report, &cfg, q, max_rbs);
        let want = oracle_polite(&link, k, beta, gamma, q, max_rbs);
        if got != want {
            mismatches += 1;
        }
        if got != k {
            moved += 1;
        }
        done += 1;
    }
    let t = started.elapsed();
    if mismatches == 0 && t < Duration::from_secs(1) {
        Ok(format!("1000/1000 match brute force ({moved} lowered the MCS) in {:.3}s", t.as_secs_f64()))
    } else {
        Err(format!("{mismatches} mismatches, {:.3}s", t.as_secs_f64()))
    }
}

fn beta_law() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xBE7A);
    let mut worst: f64 = 0.0;
    let (mut clamped_top, mut clamped_floor) = (0, 0);
    for _ in 0..100 {
        let n = rng.random_range(1..=12);
        let q: Vec<u64> = (0..n).map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(1..400_000) }).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2000.0)).collect();
        let b = rng.random_range(1..=273);
        let p = BetaParams {
            chi: rng.random_range(0.01..=1.0),
            floor: rng.random_range(0.01..0.2),
        };
        let got = compute_beta(&q, &r, b, &p).map_err(|e| e.to_string())?;
        let want = oracle_beta(&q, &r, b, p.chi, p.floor);
        worst = worst.max((got - want).abs());
        clamped_top += usize::from(want == 1.0);
        clamped_floor += usize::from(want == p.floor);
    }
    let p = BetaParams { chi: 0.5, floor: 0.05 };
    let top = compute_beta(&[160_000], &[400.0], 100, &p).unwrap();
    let floor = compute_beta(&[0, 0], &[400.0, 400.0], 100, &p).unwrap();
    let example = compute_beta(&[40_000], &[400.0], 100, &p).unwrap();
    if worst <= 1e-12 && top == 1.0 && floor == 0.05 && example == 0.5 {
        Ok(format!(
            "max |err| {worst:.1e} over 100 inputs ({clamped_top} at 1, {clamped_floor} at floor); clamp cases exact"
        ))
    } else {
        Err(format!("max |err| {worst:e}, clamp top {top}, floor {floor}, example {example}"))
    }
}

fn pc_model(bundled_power: &PcParams) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9C);
    let p = PcParams::default();
    let fixed_eta = PcParams {
        eta: EtaModel::Power { max: 0.4, exponent: 0.0 },
        ..PcParams::default()
    };
    let mut worst: f64 = 0.0;
    let mut monotone_violations = 0;
    let mut sleep_violations = 0;
    let sets = [&p, bundled_power];
    for _ in 0..1000 {
        let (s_a, s_f, s_p): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let eta = 0.4 * (s_f * s_p).powf(0.1);
        let got = active_pc(s_a, s_f, s_p, &p).unwrap();
        worst = worst.max((got - oracle_pc(s_a, s_f, s_p, 6.0, 4.0, 25.0, eta)).abs());

        let base = active_pc(s_a, s_f, s_p, &fixed_eta).unwrap();
        let up = |x: f64, r: &mut ChaCha8Rng| x + (1.0 - x) * r.random::<f64>();
        let bumps = [
            active_pc(up(s_a, &mut rng), s_f, s_p, &fixed_eta).unwrap(),
            active_pc(s_a, up(s_f, &mut rng), s_p, &fixed_eta).unwrap(),
            active_pc(s_a, s_f, up(s_p, &mut rng), &fixed_eta).unwrap(),
        ];
        monotone_violations += bumps.iter().filter(|&&b| b < base).count();
        // with the configured η the total is still monotone in s_a
        if active_pc(up(s_a, &mut rng), s_f, s_p, &p).unwrap() < got {
            monotone_violations += 1;
        }
        if s_a > 0.0 {
            for set in sets {
                let pcs: BTreeMap<_, _> = set.sleep.iter().map(|l| (l.state, l.pc)).collect();
                let values: Vec<f64> = pcs.values().copied().collect();
                let ordered = values.windows(2).all(|w| w[1] <= w[0]);
                let below_active = values[0] < active_pc(s_a, s_f, s_p, set).unwrap();
                if !(ordered && below_active) {
                    sleep_violations += 1;
                }
            }
        }
    }
    if worst <= 1e-9 && monotone_violations == 0 && sleep_violations == 0 {
        Ok(format!(
            "max |err| {worst:.1e} on 1000 triples; monotone on all samples; sleep ordering holds for {} parameter sets",
            sets.len()
        ))
    } else {
        Err(format!(
            "max |err| {worst:e}, {monotone_violations} monotonicity and {sleep_violations} sleep-order violations"
        ))
    }
}

fn alg1_invariants() -> Outcome {
    let configs = ConfigSet::default_three();
    let link = LinkModel::bundled();
    let setup = SchemeSetup::resolve(Scheme::Proposed, &configs, BetaParams::default()).unwrap();
    let reference = configs.reference().id;
    let mut violations: BTreeMap<&str, usize> = BTreeMap::new();
    let mut m_hist: BTreeMap<u8, usize> = BTreeMap::new();
    let mut bump = |what: &'static str| *violations.entry(what).or_default() += 1;
    for fx in slot_fixtures(0x0A16_0001, 500) {
        let ctx = fx.context(&configs, &link);
        let d = schedule(&ctx, &fx.ues, &setup).map_err(|e| e.to_string())?;
        *m_hist.entry(d.config.0).or_default() += 1;
        let cfg = configs.get(d.config).unwrap();
        let busy = fx.ues.iter().any(|u| u.demand_bits > 0);
        if busy && d.config != oracle_descent(&link, &configs, &fx.reports, &fx.ues, &setup.configs, fx.total_rbs, fx.csi_slot) {
            bump("m' differs from greedy descent");
        }
        let budget = fx.total_rbs - if fx.csi_slot { cfg.csi_overhead_rbs } else { 0 };
        let p1 = |id: usize, m| oracle_p1(&link, fx.reports.get(id, m).unwrap().sinr_db);
        if d.config != reference {
            let need: u64 = fx
                .ues
                .iter()
                .filter(|u| u.demand_bits > 0 && p1(u.id, reference).1)
                .map(|u| u64::from(link.rbs_needed(u.demand_bits, p1(u.id, d.config).0)))
                .sum();
            if need > u64::from(budget) {
                bump("demand exceeds budget at m' < M");
            }
        }
        let beta = d.beta.unwrap_or(1.0);
        for u in fx.ues.iter().filter(|u| u.demand_bits > 0) {
            let (k, feasible) = p1(u.id, d.config);
            let Some(kp) = d.mcs[u.id] else {
                if feasible {
                    bump("schedulable UE without an MCS");
                }
                continue;
            };
            if kp > k {
                bump("k' > k");
            }
            if link.rate(kp) < beta * link.rate(k) {
                bump("R(k') < beta R(k)");
            }
        }
        let mut spans: Vec<(u32, u32)> = d.allocations.iter().map(|a| (a.rb_start, a.rb_end())).collect();
        spans.sort();
        if spans.windows(2).any(|w| w[1].0 < w[0].1) || spans.iter().any(|s| s.1 > fx.total_rbs) {
            bump("overlapping or out-of-band allocations");
        }
        let total_mw: f64 = d.allocations.iter().map(|a| db_to_lin(a.power_dbm)).sum();
        if total_mw > db_to_lin(cfg.max_power_dbm) * (1.0 + 1e-9) {
            bump("total power above cap");
        }
        for a in &d.allocations {
            let gamma = fx.reports.get(a.ue, d.config).unwrap().sinr_at(a.psd_dbm_per_rb);
            if !link.meets_target(gamma, a.mcs) {
                bump("granted MCS misses the BLER target at the granted PSD");
            }
        }
        if d.check(fx.total_rbs, cfg).is_err() {
            bump("decision check failed");
        }
    }
    let hist = m_hist.iter().map(|(m, c)| format!("m{m}:{c}")).collect::<Vec<_>>().join(" ");
    if violations.is_empty() {
        Ok(format!("500 fixtures, zero violations (m' spread {hist})"))
    } else {
        Err(format!("{violations:?}"))
    }
}

fn degeneracies() -> Outcome {
    let configs = ConfigSet::default_three();
    let link = LinkModel::bundled();
    let forced = BetaParams { chi: 1.0, floor: 1.0 };
    let power = SchemeSetup::resolve(Scheme::PowerAdaptation, &configs, forced).unwrap();
    let static32 = SchemeSetup::resolve(Scheme::Static32, &configs, forced).unwrap();
    let proposed = SchemeSetup::resolve(Scheme::Proposed, &configs, BetaParams::default()).unwrap();
    let proposed_forced = SchemeSetup::resolve(Scheme::Proposed, &configs, forced).unwrap();
    let antenna = SchemeSetup::resolve(Scheme::AntennaAdaptation, &configs, BetaParams::default()).unwrap();
    let (mut pa_diff, mut aa_diff, mut aa_full_diff) = (0, 0, 0);
    for fx in slot_fixtures(0xDE6E, 100) {
        let ctx = fx.context(&configs, &link);
        let a = schedule(&ctx, &fx.ues, &power).unwrap();
        let b = schedule(&ctx, &fx.ues, &static32).unwrap();
        if (a.config, &a.allocations, &a.mcs, a.leftover_rbs, a.csi_overhead_rbs)
            != (b.config, &b.allocations, &b.mcs, b.leftover_rbs, b.csi_overhead_rbs)
        {
            pa_diff += 1;
        }
        let p = schedule(&ctx, &fx.ues, &proposed).unwrap();
        let aa = schedule(&ctx, &fx.ues, &antenna).unwrap();
        if p.config != aa.config {
            aa_diff += 1;
        }
        let pf = schedule(&ctx, &fx.ues, &proposed_forced).unwrap();
        if (&pf.allocations, &pf.mcs, pf.config) != (&aa.allocations, &aa.mcs, aa.config) {
            aa_full_diff += 1;
        }
    }
    if pa_diff + aa_diff + aa_full_diff == 0 {
        Ok("100 fixtures: PowerAdaptation(beta=1) == Static32; AntennaAdaptation m' == Proposed m'; Proposed(beta=1) == AntennaAdaptation".into())
    } else {
        Err(format!("{pa_diff} PA/Static32, {aa_diff} m' and {aa_full_diff} forced-beta differences"))
    }
}

fn bit_conservation() -> Outcome {
    let mut details = Vec::new();
    for (scheme, load) in [(Scheme::Proposed, LoadLabel::High), (Scheme::Static8, LoadLabel::High), (Scheme::Proposed, LoadLabel::Low)] {
        let mut sc = Scenario::default_for(scheme, load).unwrap();
        sc.slots_per_drop = 5000;
        let mut st = DropState::new(&sc, 0);
        for _ in 0..sc.slots_per_drop {
            st.run_slot(&sc).map_err(|e| e.to_string())?;
            let l = st.ledger();
            let buffered: u64 = st.ues().iter().map(|u| u.buffer_bits()).sum();
            let harq: u64 = st.ues().iter().map(|u| u.harq_pending_bits()).sum();
            if l.arrived != l.delivered + buffered + harq + l.overflow_dropped + l.harq_dropped {
                return Err(format!("{scheme} {load}: ledger off at slot {}", st.slot()));
            }
        }
        let l = st.ledger();
        details.push(format!(
            "{scheme}/{load}: {} arrived, {} delivered, {} overflow, {} HARQ-dropped",
            l.arrived, l.delivered, l.overflow_dropped, l.harq_dropped
        ));
    }
    Ok(format!("exact every slot of 5000; {}", details.join("; ")))
}

fn poisson_mean() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9015);
    let slots = 1_000_000u64;
    let total: u64 = (0..slots).map(|_| u64::from(generate_arrivals(100.0, 0.0005, &mut rng))).sum();
    let mean = total as f64 / slots as f64;
    let lambda = 0.05;
    let sigma = (lambda / slots as f64).sqrt();
    let z = (mean - lambda) / sigma;
    if z.abs() <= 3.0 {
        Ok(format!("mean {mean:.6} vs {lambda}, {z:+.2} sigma"))
    } else {
        Err(format!("mean {mean:.6} vs {lambda}, {z:+.2} sigma"))
    }
}

struct Campaign {
    records: Vec<KpiRecord>,
    elapsed: Duration,
}

fn run(scenarios: &[Scenario], threads: usize) -> Campaign {
    let started = Instant::now();
    let records = run_campaign(scenarios, threads)
        .unwrap()
        .into_iter()
        .map(|c| c.result.expect("drop failed").kpi)
        .collect();
    Campaign {
        records,
        elapsed: started.elapsed(),
    }
}

fn mean_of(records: &[KpiRecord], scheme: Scheme, load: LoadLabel, f: impl Fn(&KpiRecord) -> Option<f64>) -> f64 {
    let v: Vec<f64> = records
        .iter()
        .filter(|r| r.scheme == scheme && r.load == load)
        .filter_map(f)
        .collect();
    assert!(!v.is_empty(), "no {scheme}/{load} values");
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() {
    let mut suite = Suite { lines: Vec::new() };
    let loaded = LoadedConfig::bundled(&[]).expect("bundled scenario parses");
    let scenarios = loaded.build().expect("bundled scenario validates");
    let bundled_power = scenarios[0].power.clone();

    suite.check("la_oracle_equivalence", la_oracle);
    suite.check("polite_oracle_equivalence", polite_oracle);
    suite.check("beta_law", beta_law);
    suite.check("pc_model", || pc_model(&bundled_power));
    suite.check("alg1_invariants", alg1_invariants);
    suite.check("scheme_degeneracies", degeneracies);
    suite.check("bit_conservation", bit_conservation);
    suite.check("poisson_arrival_mean", poisson_mean);

    let campaign = run(&scenarios, 1);
    let recs = &campaign.records;
    let pc = |s, l| mean_of(recs, s, l, |r| Some(r.pc_mean));
    let upt = |s, l| mean_of(recs, s, l, |r| r.upt_mbps);
    let util = |s, l| mean_of(recs, s, l, |r| Some(r.rb_utilization));
    let ipv = |s, l| mean_of(recs, s, l, |r| r.ipv_mean_dbm);
    use LoadLabel::*;
    use Scheme::*;

    suite.check("campaign_runtime", || {
        let secs = campaign.elapsed.as_secs_f64();
        let msg = format!("{} drops of {} slots in {secs:.1}s (bound 300s)", recs.len(), scenarios[0].slots_per_drop);
        if recs.len() == 48 && secs < 300.0 { Ok(msg) } else { Err(msg) }
    });
    suite.check("trend_a_pc_not_above_static32", || {
        let parts: Vec<String> = LoadLabel::ALL
            .iter()
            .map(|&l| format!("{l} {:.2}<={:.2}", pc(Proposed, l), pc(Static32, l)))
            .collect();
        if LoadLabel::ALL.iter().all(|&l| pc(Proposed, l) <= pc(Static32, l)) {
            Ok(parts.join(", "))
        } else {
            Err(parts.join(", "))
        }
    });
    suite.check("trend_b_low_load_saving_25pct", || {
        let saving = 1.0 - pc(Proposed, Low) / pc(Static32, Low);
        let msg = format!("PC reduction vs Static32 at low load {:.1}%", 100.0 * saving);
        if saving >= 0.25 { Ok(msg) } else { Err(msg) }
    });
    suite.check("trend_c_low_load_upt_90pct", || {
        let (p, s) = (upt(Proposed, Low), upt(Static32, Low));
        let msg = format!("{p:.2} vs 0.9 x {s:.2} = {:.2} Mbit/s", 0.9 * s);
        if p >= 0.9 * s { Ok(msg) } else { Err(msg) }
    });
    suite.check("trend_d_high_load_upt_above_static8", || {
        let (p, s) = (upt(Proposed, High), upt(Static8, High));
        let msg = format!("{p:.2} > {s:.2} Mbit/s");
        if p > s { Ok(msg) } else { Err(msg) }
    });
    suite.check("trend_e_low_load_ipv_not_above_antenna_adaptation", || {
        let (p, a) = (ipv(Proposed, Low), ipv(AntennaAdaptation, Low));
        let msg = format!("mean IPV {p:.2} <= {a:.2} dBm");
        if p <= a { Ok(msg) } else { Err(msg) }
    });
    suite.check("trend_f_utilization_not_below_static32", || {
        let parts: Vec<String> = LoadLabel::ALL
            .iter()
            .map(|&l| format!("{l} {:.3}>={:.3}", util(Proposed, l), util(Static32, l)))
            .collect();
        if LoadLabel::ALL.iter().all(|&l| util(Proposed, l) >= util(Static32, l)) {
            Ok(parts.join(", "))
        } else {
            Err(parts.join(", "))
        }
    });
    suite.check("determinism_across_parallelism", || {
        let again = run(&scenarios, 4);
        let (a, b) = (campaign_csv(recs), campaign_csv(&again.records));
        let (ia, ib) = (ipv_cdf_csv(recs), ipv_cdf_csv(&again.records));
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        export_campaign(recs, dir1.path()).unwrap();
        export_campaign(&again.records, dir2.path()).unwrap();
        let files_equal = ["campaign.csv", "ipv_cdf.csv"].iter().all(|f| {
            std::fs::read(dir1.path().join(f)).unwrap() == std::fs::read(dir2.path().join(f)).unwrap()
        });
        if a == b && ia == ib && files_equal {
            Ok(format!("1 vs 4 threads: campaign.csv ({} bytes) and ipv_cdf.csv ({} bytes) byte-identical", a.len(), ia.len()))
        } else {
            Err("exports differ between 1 and 4 threads".into())
        }
    });

    let failed: Vec<&str> = suite.lines.iter().filter(|l| !l.0).map(|l| l.1.as_str()).collect();
    println!(
        "acceptance: {} passed, {} failed",
        suite.lines.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

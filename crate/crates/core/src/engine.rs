//! The slot loop and the campaign runner.
//!
//! Slot phases, in order: arrivals; channel and CSI refresh; sleep or
//! schedule; interference, realized SINR, HARQ outcomes; power; rate
//! averages; KPIs. Random draws come from per-drop named streams and every
//! UE consumes the same number of draws per slot whatever the scheme does,
//! so schemes are compared on common random numbers.

use std::collections::BTreeMap;

use log::info;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::{
    db_sum, db_to_lin, leakage_per_rb, lin_to_db, sinr_db, wideband_csi, ChannelParams, CsiReports,
    InterferenceModel, UeChannel,
};
use crate::error::{Error, Result};
use crate::kpi::{KpiAccumulator, KpiRecord, Reservoir};
use crate::mcs::LinkModel;
use crate::power::{ratios_from_decision, PcParams, SleepTracker, SlotPowerSample};
use crate::rng::{drop_seed, stream, Stream};
use crate::scheduler::{schedule, update_average, ConfigSet, SchemeSetup, SlotContext, SlotDecision, UeView};
use crate::traffic::{generate_arrivals, BitLedger, CompletedPacket, TrafficParams, UeState};

/// One (scheme, load) cell with every parameter resolved.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub num_ues: usize,
    pub total_rbs: u32,
    pub slot_duration_s: f64,
    pub slots_per_drop: u64,
    pub num_drops: u32,
    pub base_seed: u64,
    /// Slots excluded from the KPIs at the start of each drop.
    pub warmup_slots: u64,
    pub csi_period_slots: u64,
    pub ema_coefficient: f64,
    pub ipv_reservoir: usize,
    pub power_trace: bool,
    pub configs: ConfigSet,
    #[serde(skip)]
    pub link: LinkModel,
    pub channel: ChannelParams,
    pub interference: InterferenceModel,
    pub power: PcParams,
    pub traffic: TrafficParams,
    pub scheme: SchemeSetup,
}

impl Scenario {
    /// Bundled defaults for one scheme and load.
    pub fn default_for(scheme: crate::scheduler::Scheme, load: crate::traffic::LoadLabel) -> Result<Self> {
        let configs = ConfigSet::default_three();
        let scheme = SchemeSetup::resolve(scheme, &configs, crate::la::BetaParams::default())?;
        Ok(Self {
            num_ues: 10,
            total_rbs: 273,
            slot_duration_s: 0.0005,
            slots_per_drop: 5000,
            num_drops: 2,
            base_seed: 1,
            warmup_slots: 0,
            csi_period_slots: 1,
            ema_coefficient: 0.01,
            ipv_reservoir: 100_000,
            power_trace: false,
            configs,
            link: LinkModel::bundled(),
            channel: ChannelParams::default(),
            interference: InterferenceModel::default(),
            power: PcParams::default(),
            traffic: TrafficParams::for_load(load),
            scheme,
        })
    }
}

/// Everything a drop carries from slot to slot.
#[derive(Debug, Clone)]
pub struct DropState {
    pub drop: u32,
    slot: u64,
    ues: Vec<UeState>,
    channels: Vec<UeChannel>,
    reports: CsiReports,
    sleep: SleepTracker,
    kpi: KpiAccumulator,
    traffic_rng: ChaCha8Rng,
    fading_rng: ChaCha8Rng,
    outcome_rng: ChaCha8Rng,
    trace: Vec<SlotPowerSample>,
    warnings: BTreeMap<String, u64>,
}

/// What one slot did.
#[derive(Debug, Clone)]
pub struct SlotOutcome {
    pub power: SlotPowerSample,
    pub decision: Option<SlotDecision>,
    pub ipv_dbm: Vec<f64>,
    pub delivered_bits: Vec<u64>,
    pub completed: Vec<CompletedPacket>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DropResult {
    pub kpi: KpiRecord,
    pub ledger: BitLedger,
    pub trace: Option<Vec<SlotPowerSample>>,
    /// Distinct warnings with their occurrence counts.
    pub warnings: BTreeMap<String, u64>,
}

impl DropState {
    pub fn new(scenario: &Scenario, drop: u32) -> Self {
        let root = drop_seed(scenario.base_seed, drop);
        let mut placement = stream(root, Stream::Placement);
        let r0 = scenario.link.rate(crate::mcs::McsIndex::LOWEST);
        let channels = (0..scenario.num_ues)
            .map(|_| UeChannel {
                path_gain_db: scenario.channel.draw_path_gain(&mut placement),
                noise_floor_dbm_per_rb: scenario.channel.noise_floor_dbm_per_rb,
                fading: 1.0,
            })
            .collect();
        Self {
            drop,
            slot: 0,
            ues: (0..scenario.num_ues).map(|n| UeState::new(n, r0)).collect(),
            channels,
            reports: CsiReports::empty(scenario.num_ues, scenario.configs.len()),
            sleep: SleepTracker::default(),
            kpi: KpiAccumulator::new(
                scenario.slot_duration_s,
                scenario.total_rbs,
                Reservoir::new(scenario.ipv_reservoir, stream(root, Stream::Kpi)),
            ),
            traffic_rng: stream(root, Stream::Traffic),
            fading_rng: stream(root, Stream::Fading),
            outcome_rng: stream(root, Stream::Outcome),
            trace: Vec::new(),
            warnings: BTreeMap::new(),
        }
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn ues(&self) -> &[UeState] {
        &self.ues
    }

    /// Direct access for injecting traffic in tests and tools.
    pub fn ues_mut(&mut self) -> &mut [UeState] {
        &mut self.ues
    }

    pub fn channels(&self) -> &[UeChannel] {
        &self.channels
    }

    pub fn energy(&self) -> f64 {
        self.kpi.energy()
    }

    /// Sum of the per-UE ledgers.
    pub fn ledger(&self) -> BitLedger {
        let mut total = BitLedger::default();
        for ue in &self.ues {
            let l = ue.ledger();
            total.arrived += l.arrived;
            total.delivered += l.delivered;
            total.overflow_dropped += l.overflow_dropped;
            total.harq_dropped += l.harq_dropped;
            total.packets_arrived += l.packets_arrived;
            total.packets_overflowed += l.packets_overflowed;
            total.packets_lost += l.packets_lost;
            total.packets_completed += l.packets_completed;
            total.blocks_dropped += l.blocks_dropped;
        }
        total
    }

    pub fn run_slot(&mut self, sc: &Scenario) -> Result<SlotOutcome> {
        let t = self.slot;
        let cfgs = &sc.configs;

        for ue in &mut self.ues {
            let n = generate_arrivals(sc.traffic.arrival_rate, sc.slot_duration_s, &mut self.traffic_rng);
            ue.enqueue(n, t, &sc.traffic);
        }

        for ch in &mut self.channels {
            ch.fading = sc.channel.draw_fading(&mut self.fading_rng);
        }
        let csi_slot = t % sc.csi_period_slots == 0;
        if csi_slot {
            for (n, ch) in self.channels.iter().enumerate() {
                for cfg in cfgs.iter() {
                    let psd = cfg.reference_psd_dbm(sc.total_rbs);
                    self.reports.insert(wideband_csi(
                        n,
                        ch,
                        cfg,
                        psd,
                        sc.interference.intercell_floor_dbm_per_rb,
                    ));
                }
            }
        }
        let draws: Vec<f64> = (0..self.ues.len()).map(|_| self.outcome_rng.random()).collect();

        let backlogged: Vec<bool> = self.ues.iter().map(UeState::has_data).collect();
        let mut delivered = vec![0u64; self.ues.len()];
        let mut ipv = Vec::new();
        let mut completed = Vec::new();
        let (power, decision) = if !backlogged.iter().any(|&b| b) {
            (self.sleep.idle(t, &sc.power), None)
        } else {
            let views: Vec<UeView> = self
                .ues
                .iter()
                .map(|ue| {
                    let (demand_bits, retransmission) = ue.demand();
                    UeView {
                        id: ue.id,
                        demand_bits,
                        r_avg: ue.r_avg,
                        retransmission,
                    }
                })
                .collect();
            let ctx = SlotContext {
                configs: cfgs,
                link: &sc.link,
                reports: &self.reports,
                total_rbs: sc.total_rbs,
                csi_slot,
            };
            let decision = schedule(&ctx, &views, &sc.scheme)?;
            let cfg = cfgs.get(decision.config)?;
            decision.check(sc.total_rbs, cfg)?;
            for w in &decision.warnings {
                *self.warnings.entry(w.clone()).or_default() += 1;
            }

            let leakage = leakage_per_rb(&decision.allocations, cfg, &sc.interference)?;
            let floor = sc.interference.intercell_floor_dbm_per_rb;
            ipv = leakage.iter().map(|s| db_sum(floor, s.leakage_dbm)).collect();
            let mut received = vec![0.0f64; self.ues.len()];
            for s in &leakage {
                let victim = &self.channels[s.ue];
                received[s.ue] += db_to_lin(s.leakage_dbm + victim.coupling_db());
            }
            for a in &decision.allocations {
                let interference_mw = db_to_lin(floor) + received[a.ue] / f64::from(a.rb_len);
                let gamma = sinr_db(&self.channels[a.ue], a.psd_dbm_per_rb, cfg, lin_to_db(interference_mw));
                let bler = sc.link.bler(gamma, a.mcs)?;
                let success = draws[a.ue] >= bler;
                let ue = &mut self.ues[a.ue];
                let r = ue.apply_transmission(a, &sc.link, success, t, &sc.traffic)?;
                delivered[a.ue] = r.delivered_bits;
                if t >= sc.warmup_slots {
                    for p in &r.completed {
                        self.kpi.record_packet(p);
                    }
                }
                completed.extend(r.completed);
            }
            let ratios = ratios_from_decision(&decision, cfgs, sc.total_rbs)?;
            (self.sleep.active(t, ratios, &sc.power)?, Some(decision))
        };

        for (ue, &was_backlogged) in self.ues.iter_mut().zip(&backlogged) {
            if was_backlogged {
                ue.r_avg = update_average(ue.r_avg, delivered[ue.id], sc.total_rbs, sc.ema_coefficient);
            }
        }

        if t >= sc.warmup_slots {
            let used = decision.as_ref().map_or(0, SlotDecision::used_rbs);
            self.kpi.record_slot(&power, used, decision.as_ref().map(|d| d.config));
            self.kpi.record_ipv(&ipv);
            if sc.power_trace {
                self.trace.push(power);
            }
        }
        self.slot += 1;
        Ok(SlotOutcome {
            power,
            decision,
            ipv_dbm: ipv,
            delivered_bits: delivered,
            completed,
        })
    }

    pub fn finish(self, sc: &Scenario) -> DropResult {
        let ledger = self.ledger();
        DropResult {
            kpi: self
                .kpi
                .finish(sc.scheme.scheme, sc.traffic.load, self.drop, &ledger),
            ledger,
            trace: sc.power_trace.then_some(self.trace),
            warnings: self.warnings,
        }
    }
}

pub fn run_drop(sc: &Scenario, drop: u32) -> Result<DropResult> {
    let mut state = DropState::new(sc, drop);
    for _ in 0..sc.slots_per_drop {
        state.run_slot(sc).map_err(|e| match e {
            Error::Contract(msg) => Error::Contract(format!(
                "{} {} drop {} slot {}: {msg}",
                sc.scheme.scheme,
                sc.traffic.load,
                drop,
                state.slot()
            )),
            other => other,
        })?;
    }
    Ok(state.finish(sc))
}

/// Outcome of one (scheme, load, drop) cell.
#[derive(Debug)]
pub struct CellResult {
    pub scenario: usize,
    pub drop: u32,
    pub result: Result<DropResult>,
}

/// Runs every drop of every scenario on a pool of `threads` workers
/// (0 = rayon's default). Results come back in (scenario, drop) order
/// whatever the parallelism.
pub fn run_campaign(scenarios: &[Scenario], threads: usize) -> Result<Vec<CellResult>> {
    if scenarios.is_empty() {
        return Err(Error::Contract("campaign has no scenarios".into()));
    }
    let units: Vec<(usize, u32)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, sc)| (0..sc.num_drops).map(move |d| (i, d)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Contract(format!("thread pool: {e}")))?;
    info!("running {} drops on {} threads", units.len(), pool.current_num_threads());
    Ok(pool.install(|| {
        units
            .par_iter()
            .map(|&(i, d)| {
                let sc = &scenarios[i];
                let result = run_drop(sc, d);
                match &result {
                    Ok(_) => info!("{} {} drop {d} done", sc.scheme.scheme, sc.traffic.load),
                    Err(e) => log::error!("{} {} drop {d} failed: {e}", sc.scheme.scheme, sc.traffic.load),
                }
                CellResult {
                    scenario: i,
                    drop: d,
                    result,
                }
            })
            .collect()
    }))
}

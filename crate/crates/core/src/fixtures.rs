//! Seeded random single-slot scheduler inputs, shared by the test suites
//! and the `fixtures` CLI subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::channel::{wideband_csi, ChannelParams, CsiReports, InterferenceModel, UeChannel};
use crate::scheduler::{ConfigSet, SlotContext, UeView};
use crate::mcs::LinkModel;

#[derive(Debug, Clone, Serialize)]
pub struct SlotFixture {
    pub seed: u64,
    pub total_rbs: u32,
    pub csi_slot: bool,
    pub ues: Vec<UeView>,
    pub channels: Vec<UeChannel>,
    pub reports: CsiReports,
}

impl SlotFixture {
    pub fn context<'a>(&'a self, configs: &'a ConfigSet, link: &'a LinkModel) -> SlotContext<'a> {
        SlotContext {
            configs,
            link,
            reports: &self.reports,
            total_rbs: self.total_rbs,
            csi_slot: self.csi_slot,
        }
    }
}

/// One fixture: 1 to 12 UEs with mixed buffers (some empty, some a few
/// packets, some large), random rate histories and occasional pending
/// retransmissions.
pub fn slot_fixture(
    seed: u64,
    configs: &ConfigSet,
    channel: &ChannelParams,
    interference: &InterferenceModel,
    total_rbs: u32,
) -> SlotFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=12usize);
    let mut ues = Vec::with_capacity(n);
    let mut channels = Vec::with_capacity(n);
    let mut reports = CsiReports::empty(n, configs.len());
    for id in 0..n {
        let demand_bits = match rng.random_range(0..10) {
            0 | 1 => 0,
            2..=6 => 40_000 * rng.random_range(1..=3u64),
            7 | 8 => rng.random_range(1..=5_000u64),
            _ => rng.random_range(100_000..=1_000_000u64),
        };
        ues.push(UeView {
            id,
            demand_bits,
            r_avg: rng.random_range(36.0..1500.0),
            retransmission: demand_bits > 0 && rng.random_bool(0.1),
        });
        let ch = UeChannel {
            path_gain_db: channel.draw_path_gain(&mut rng),
            noise_floor_dbm_per_rb: channel.noise_floor_dbm_per_rb,
            fading: channel.draw_fading(&mut rng),
        };
        for cfg in configs.iter() {
            reports.insert(wideband_csi(
                id,
                &ch,
                cfg,
                cfg.reference_psd_dbm(total_rbs),
                interference.intercell_floor_dbm_per_rb,
            ));
        }
        channels.push(ch);
    }
    SlotFixture {
        seed,
        total_rbs,
        csi_slot: rng.random_bool(0.5),
        ues,
        channels,
        reports,
    }
}

/// `count` fixtures with seeds derived from `base_seed`.
pub fn slot_fixtures(base_seed: u64, count: usize) -> Vec<SlotFixture> {
    let configs = ConfigSet::default_three();
    let channel = ChannelParams::default();
    let interference = InterferenceModel::default();
    (0..count as u64)
        .map(|i| {
            slot_fixture(
                crate::rng::splitmix64(base_seed ^ i.wrapping_mul(0x9E37_79B9)),
                &configs,
                &channel,
                &interference,
                273,
            )
        })
        .collect()
}

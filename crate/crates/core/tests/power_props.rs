mod common;

use nessim_core::power::{active_pc, sleep_step, EtaModel, PcParams, PowerState, Ratios, SleepTracker};
use proptest::prelude::*;

use common::oracle_pc;

fn constant_eta() -> PcParams {
    PcParams {
        eta: EtaModel::Power { max: 0.4, exponent: 0.0 },
        ..PcParams::default()
    }
}

/// Independent sleep ladder for the default parameters.
fn ladder(idle: u64) -> (PowerState, f64, f64) {
    match idle {
        0..=9 => (PowerState::Micro, 5.5, 0.0),
        10..=99 => (PowerState::Light, 2.1, 1.0),
        _ => (PowerState::Deep, 1.0, 5.0),
    }
}

proptest! {
    #[test]
    fn active_pc_matches_closed_form(s_a in 0.0f64..=1.0, s_f in 0.0f64..=1.0, s_p in 0.0f64..=1.0) {
        let eta = 0.4 * (s_f * s_p).powf(0.1);
        let got = active_pc(s_a, s_f, s_p, &PcParams::default()).unwrap();
        prop_assert!((got - oracle_pc(s_a, s_f, s_p, 6.0, 4.0, 25.0, eta)).abs() <= 1e-9);
    }

    #[test]
    fn active_pc_monotone_in_each_ratio(
        r in (0.0f64..=1.0, 0.0f64..=1.0, 0.0f64..=1.0),
        bump in 0.0f64..=1.0,
        which in 0usize..3,
    ) {
        let p = constant_eta();
        let mut up = [r.0, r.1, r.2];
        up[which] += (1.0 - up[which]) * bump;
        let lo = active_pc(r.0, r.1, r.2, &p).unwrap();
        let hi = active_pc(up[0], up[1], up[2], &p).unwrap();
        prop_assert!(hi >= lo);
    }

    #[test]
    fn sleep_states_sit_below_any_active_slot(s_a in 0.01f64..=1.0, s_f in 0.0f64..=1.0, s_p in 0.0f64..=1.0) {
        let p = PcParams::default();
        let pcs: Vec<f64> = p.sleep.iter().map(|l| l.pc).collect();
        prop_assert!(pcs.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(pcs[0] < active_pc(s_a, s_f, s_p, &p).unwrap());
    }

    #[test]
    fn trace_energy_matches_ladder_walk(pattern in prop::collection::vec(any::<bool>(), 1..400), run in 0usize..300) {
        // A random activity pattern with one long idle stretch spliced in.
        let mut active = pattern.clone();
        let at = active.len() / 2;
        active.splice(at..at, std::iter::repeat_n(false, run));
        let p = PcParams::default();
        let ratios = Ratios { s_a: 0.5, s_f: 0.3, s_p: 0.7 };
        let active_cost = oracle_pc(0.5, 0.3, 0.7, 6.0, 4.0, 25.0, 0.4 * 0.21f64.powf(0.1));

        let mut tracker = SleepTracker::default();
        let mut energy = 0.0;
        let (mut idle, mut last_wake, mut want) = (0u64, None, 0.0);
        for (t, &on) in active.iter().enumerate() {
            let sample = if on {
                tracker.active(t as u64, ratios, &p).unwrap()
            } else {
                tracker.idle(t as u64, &p)
            };
            energy += sample.pc;
            if on {
                want += active_cost + last_wake.take().unwrap_or(0.0);
                idle = 0;
            } else {
                idle += 1;
                let (state, pc, wake) = ladder(idle);
                prop_assert_eq!(sample.state, state);
                want += pc;
                last_wake = Some(wake);
            }
        }
        prop_assert!((energy - want).abs() <= 1e-9 * want.max(1.0));
    }
}

#[test]
fn ladder_thresholds() {
    let p = PcParams::default();
    for idle in [1, 9, 10, 99, 100, 10_000] {
        let (state, pc, _) = ladder(idle);
        assert_eq!(sleep_step(idle, &p), (state, pc));
    }
}

#[test]
fn eta_table_interpolates_and_clamps() {
    let eta = EtaModel::Table { points: vec![[0.0, 0.1], [0.5, 0.3], [1.0, 0.4]] };
    assert!((eta.eta(0.5, 0.5) - 0.2).abs() < 1e-12);
    assert!((eta.eta(1.0, 1.0) - 0.4).abs() < 1e-12);
    assert!((eta.eta(0.0, 0.3) - 0.1).abs() < 1e-12);
}

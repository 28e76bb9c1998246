//! FTP3-style Poisson packet arrivals, per-UE FIFO buffers with a cap, and
//! HARQ bookkeeping with one transport block in flight per UE.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcs::LinkModel;
use crate::scheduler::Allocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadLabel {
    Low,
    Light,
    Medium,
    High,
}

impl LoadLabel {
    pub const ALL: [LoadLabel; 4] = [LoadLabel::Low, LoadLabel::Light, LoadLabel::Medium, LoadLabel::High];

    pub fn name(self) -> &'static str {
        match self {
            LoadLabel::Low => "low",
            LoadLabel::Light => "light",
            LoadLabel::Medium => "medium",
            LoadLabel::High => "high",
        }
    }

    /// Default arrival rate in packets per second.
    pub fn default_rate(self) -> f64 {
        match self {
            LoadLabel::Low => 100.0,
            LoadLabel::Light => 180.0,
            LoadLabel::Medium => 340.0,
            LoadLabel::High => 500.0,
        }
    }
}

impl fmt::Display for LoadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LoadLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LoadLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid("traffic.loads", format!("unknown load `{s}`")))
    }
}

/// Whether a configured rate is per UE or shared by the whole cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateScope {
    #[default]
    PerUe,
    PerCell,
}

impl RateScope {
    pub fn per_ue_rate(self, rate: f64, num_ues: usize) -> f64 {
        match self {
            RateScope::PerUe => rate,
            RateScope::PerCell => rate / num_ues as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficParams {
    /// Mean packets per second per UE.
    pub arrival_rate: f64,
    pub packet_size_bits: u64,
    /// Buffer cap Q̄.
    pub max_buffer_bits: u64,
    pub max_retransmissions: u32,
    pub load: LoadLabel,
}

impl TrafficParams {
    pub fn for_load(load: LoadLabel) -> Self {
        Self {
            arrival_rate: load.default_rate(),
            packet_size_bits: 40_000,
            max_buffer_bits: 1_000_000,
            max_retransmissions: 4,
            load,
        }
    }
}

/// Packets arriving in one slot.
pub fn generate_arrivals<R: Rng + ?Sized>(rate_pps: f64, slot_duration_s: f64, rng: &mut R) -> u32 {
    let lambda = rate_pps * slot_duration_s;
    if !(lambda > 0.0) {
        return 0;
    }
    let poisson = Poisson::new(lambda).expect("positive finite mean");
    poisson.sample(rng) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Packet {
    pub arrival_slot: u64,
    pub size_bits: u64,
    /// Bits not yet put in a transport block.
    unsent_bits: u64,
    /// Bits neither delivered nor lost.
    outstanding_bits: u64,
    /// Some of its bits were lost with a dropped transport block.
    damaged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HarqBlock {
    pub bits: u64,
    /// Failed attempts so far, the initial transmission included.
    pub failures: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CompletedPacket {
    pub ue: usize,
    pub arrival_slot: u64,
    pub completion_slot: u64,
    pub size_bits: u64,
}

/// Per-UE bit and packet counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct BitLedger {
    pub arrived: u64,
    pub delivered: u64,
    pub overflow_dropped: u64,
    pub harq_dropped: u64,
    pub packets_arrived: u64,
    pub packets_overflowed: u64,
    pub packets_lost: u64,
    pub packets_completed: u64,
    pub blocks_dropped: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TxResult {
    pub delivered_bits: u64,
    pub completed: Vec<CompletedPacket>,
    pub block_dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UeState {
    pub id: usize,
    queue: VecDeque<Packet>,
    buffer_bits: u64,
    /// R_{n,avg} in bits/slot/RB.
    pub r_avg: f64,
    harq: Option<HarqBlock>,
    ledger: BitLedger,
}

impl UeState {
    pub fn new(id: usize, r_avg: f64) -> Self {
        Self {
            id,
            queue: VecDeque::new(),
            buffer_bits: 0,
            r_avg,
            harq: None,
            ledger: BitLedger::default(),
        }
    }

    /// Q_n: bits waiting for a first transmission.
    pub fn buffer_bits(&self) -> u64 {
        self.buffer_bits
    }

    pub fn harq(&self) -> Option<HarqBlock> {
        self.harq
    }

    pub fn harq_pending_bits(&self) -> u64 {
        self.harq.map_or(0, |b| b.bits)
    }

    pub fn has_data(&self) -> bool {
        self.buffer_bits > 0 || self.harq.is_some()
    }

    /// Bits to serve this slot and whether they are a retransmission.
    pub fn demand(&self) -> (u64, bool) {
        match self.harq {
            Some(b) => (b.bits, true),
            None => (self.buffer_bits, false),
        }
    }

    pub fn ledger(&self) -> &BitLedger {
        &self.ledger
    }

    pub fn packets(&self) -> impl Iterator<Item = &Packet> {
        self.queue.iter()
    }

    /// Appends `count` packets; a packet that would push Q_n past the cap is
    /// dropped whole.
    pub fn enqueue(&mut self, count: u32, slot: u64, params: &TrafficParams) {
        for _ in 0..count {
            let size = params.packet_size_bits;
            self.ledger.arrived += size;
            self.ledger.packets_arrived += 1;
            if self.buffer_bits + size > params.max_buffer_bits {
                self.ledger.overflow_dropped += size;
                self.ledger.packets_overflowed += 1;
                continue;
            }
            self.buffer_bits += size;
            self.queue.push_back(Packet {
                arrival_slot: slot,
                size_bits: size,
                unsent_bits: size,
                outstanding_bits: size,
                damaged: false,
            });
        }
    }

    /// Applies one transmission outcome.
    ///
    /// A pending HARQ block is retransmitted whole; it fails if the grant is
    /// too small for it. New data takes `min(Q_n, capacity)` bits FIFO. A
    /// block is dropped once its failures exceed `max_retransmissions`.
    pub fn apply_transmission(
        &mut self,
        allocation: &Allocation,
        link: &LinkModel,
        success: bool,
        slot: u64,
        params: &TrafficParams,
    ) -> Result<TxResult> {
        if allocation.ue != self.id {
            return Err(Error::Contract(format!(
                "allocation for UE {} applied to UE {}",
                allocation.ue, self.id
            )));
        }
        let capacity = u64::from(allocation.rb_len) * link.bits_per_rb(allocation.mcs);
        let mut out = TxResult::default();
        let block = match self.harq.take() {
            Some(block) => block,
            None if self.buffer_bits > 0 => {
                let bits = self.buffer_bits.min(capacity);
                self.take_unsent(bits);
                HarqBlock { bits, failures: 0 }
            }
            None => {
                return Err(Error::Contract(format!(
                    "UE {} scheduled with an empty buffer and no HARQ block",
                    self.id
                )))
            }
        };
        if success && capacity >= block.bits {
            self.ledger.delivered += block.bits;
            out.delivered_bits = block.bits;
            self.resolve(block.bits, false, slot, &mut out.completed);
        } else {
            let failures = block.failures + 1;
            if failures > params.max_retransmissions {
                self.ledger.harq_dropped += block.bits;
                self.ledger.blocks_dropped += 1;
                out.block_dropped = true;
                self.resolve(block.bits, true, slot, &mut out.completed);
            } else {
                self.harq = Some(HarqBlock { failures, ..block });
            }
        }
        Ok(out)
    }

    fn take_unsent(&mut self, mut bits: u64) {
        self.buffer_bits -= bits;
        for p in self.queue.iter_mut() {
            if bits == 0 {
                break;
            }
            let t = p.unsent_bits.min(bits);
            p.unsent_bits -= t;
            bits -= t;
        }
    }

    fn resolve(&mut self, mut bits: u64, lost: bool, slot: u64, completed: &mut Vec<CompletedPacket>) {
        for p in self.queue.iter_mut() {
            if bits == 0 {
                break;
            }
            let in_flight = p.outstanding_bits - p.unsent_bits;
            let t = in_flight.min(bits);
            p.outstanding_bits -= t;
            p.damaged |= lost && t > 0;
            bits -= t;
        }
        debug_assert_eq!(bits, 0, "resolved more bits than were in flight");
        while self.queue.front().is_some_and(|p| p.outstanding_bits == 0) {
            let p = self.queue.pop_front().expect("front exists");
            if p.damaged {
                self.ledger.packets_lost += 1;
            } else {
                self.ledger.packets_completed += 1;
                completed.push(CompletedPacket {
                    ue: self.id,
                    arrival_slot: p.arrival_slot,
                    completion_slot: slot,
                    size_bits: p.size_bits,
                });
            }
        }
    }

    /// `arrived − (delivered + buffered + HARQ-pending + overflow + HARQ-dropped)`;
    /// zero whenever the bookkeeping is consistent.
    pub fn conservation_residual(&self) -> i128 {
        let l = &self.ledger;
        i128::from(l.arrived)
            - i128::from(l.delivered)
            - i128::from(self.buffer_bits)
            - i128::from(self.harq_pending_bits())
            - i128::from(l.overflow_dropped)
            - i128::from(l.harq_dropped)
    }
}

//! DCF building blocks: contention window, backoff, airtime, reception and
//! head-of-line delay accounting.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{RngStream, SimTime};
use crate::phy::{sinr_db, McsTable, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    pub cw_min: u32,
    pub max_stage: u32,
    pub n_agg: u32,
    pub frame_bits: u64,
    pub slot_us: u64,
    pub difs_us: u64,
    pub sifs_us: u64,
    pub ack_us: u64,
    pub phy_header_us: u64,
    pub rate_control: RateControl,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            cw_min: 16,
            max_stage: 5,
            n_agg: 64,
            frame_bits: 12_000,
            slot_us: 9,
            difs_us: 34,
            sifs_us: 16,
            ack_us: 44,
            phy_header_us: 44,
            rate_control: RateControl::Arf,
        }
    }
}

impl MacParams {
    pub fn ampdu_bits(&self) -> u64 {
        u64::from(self.n_agg) * self.frame_bits
    }

    /// Time from the end of the data burst until the outcome is known.
    pub fn ack_exchange_us(&self) -> u64 {
        self.sifs_us + self.ack_us
    }
}

/// How a transmitter picks the MCS of its next A-MPDU.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateControl {
    /// Highest MCS the interference-free link budget supports.
    LinkBudget,
    /// Auto Rate Fallback below the link-budget ceiling: down one MCS after
    /// two consecutive failures (or one failed probe), up one after ten
    /// consecutive successes.
    #[default]
    Arf,
}

pub const ARF_UP_AFTER: u32 = 10;
pub const ARF_DOWN_AFTER: u32 = 2;

/// ARF state over positions in the MCS table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArfState {
    position: Option<usize>,
    ceiling: Option<usize>,
    successes: u32,
    failures: u32,
    probing: bool,
}

impl ArfState {
    /// Table position to use given the current link-budget ceiling.
    pub fn select(&mut self, ceiling: Option<usize>) -> Option<usize> {
        self.ceiling = ceiling;
        let ceiling = ceiling?;
        let pos = self.position.map_or(ceiling, |p| p.min(ceiling));
        self.position = Some(pos);
        Some(pos)
    }

    pub fn on_outcome(&mut self, outcome: Outcome) {
        let (Some(pos), Some(ceiling)) = (self.position, self.ceiling) else {
            return;
        };
        match outcome {
            Outcome::Success => {
                self.failures = 0;
                self.probing = false;
                self.successes += 1;
                if self.successes >= ARF_UP_AFTER && pos < ceiling {
                    self.position = Some(pos + 1);
                    self.successes = 0;
                    self.probing = true;
                }
            }
            Outcome::Failure => {
                self.successes = 0;
                self.failures += 1;
                if (self.probing || self.failures >= ARF_DOWN_AFTER) && pos > 0 {
                    self.position = Some(pos - 1);
                    self.failures = 0;
                }
                self.probing = false;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Success,
    Failure,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Success => "success",
            Outcome::Failure => "failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackoffState {
    pub stage: u32,
    pub counter: u32,
    pub frozen: bool,
}

impl BackoffState {
    pub fn initial(params: &MacParams, rng: &mut RngStream) -> Self {
        Self {
            stage: 0,
            counter: sample_backoff(0, params, rng),
            frozen: true,
        }
    }
}

/// One A-MPDU on the air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionAttempt {
    pub tx_node: usize,
    pub rx_node: usize,
    pub start: SimTime,
    pub end: SimTime,
    pub tx_power_dbm: f64,
    pub mcs: u8,
    pub bits: u64,
    pub outcome: Outcome,
}

impl TransmissionAttempt {
    pub fn airtime_us(&self) -> u64 {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &TransmissionAttempt) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// Only full-buffer traffic is implemented: every AP always has an A-MPDU
/// queued for its station.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrafficModel {
    #[default]
    #[serde(rename = "full-buffer")]
    FullBuffer,
}

/// Contention window at `stage`: `cw_min * 2^min(stage, max_stage)`.
pub fn cw(stage: u32, params: &MacParams) -> u32 {
    params.cw_min << stage.min(params.max_stage)
}

/// Uniform draw on `[0, cw(stage) - 1]`.
pub fn sample_backoff(stage: u32, params: &MacParams, rng: &mut RngStream) -> u32 {
    rng.random_range(0..cw(stage, params))
}

/// PHY header plus payload time rounded up to whole microseconds. `None`
/// when there is no usable rate.
pub fn tx_duration_us(bits: u64, rate_mbps: f64, params: &MacParams) -> Option<u64> {
    if !(rate_mbps > 0.0) {
        return None;
    }
    Some(params.phy_header_us + (bits as f64 / rate_mbps).ceil() as u64)
}

/// Decides an attempt under the worst-case interference set: every
/// transmitter whose airtime overlaps at any point interferes for the whole
/// burst.
pub fn resolve_reception(
    attempt: &TransmissionAttempt,
    concurrent: &[TransmissionAttempt],
    topology: &Topology,
    noise_dbm: f64,
    table: &McsTable,
) -> Outcome {
    let Some(row) = table.row(attempt.mcs) else {
        return Outcome::Failure;
    };
    let signal = attempt.tx_power_dbm - topology.loss_db(attempt.tx_node, attempt.rx_node);
    let interferers: Vec<f64> = concurrent
        .iter()
        .filter(|c| c.tx_node != attempt.tx_node && c.overlaps(attempt))
        .map(|c| c.tx_power_dbm - topology.loss_db(c.tx_node, attempt.rx_node))
        .collect();
    if sinr_db(signal, &interferers, noise_dbm) >= row.min_sinr_db {
        Outcome::Success
    } else {
        Outcome::Failure
    }
}

/// Binary exponential backoff update followed by a fresh draw.
pub fn on_tx_outcome(
    state: BackoffState,
    outcome: Outcome,
    params: &MacParams,
    rng: &mut RngStream,
) -> BackoffState {
    let stage = match outcome {
        Outcome::Success => 0,
        Outcome::Failure => (state.stage + 1).min(params.max_stage),
    };
    BackoffState {
        stage,
        counter: sample_backoff(stage, params, rng),
        frozen: true,
    }
}

/// Head-of-line delays, in milliseconds, of the A-MPDUs one transmitter
/// delivered before `horizon`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayAccount {
    pub delays_ms: Vec<f64>,
    pub delivered_bits: u64,
    /// A-MPDUs attempted at least once but not acknowledged by the horizon.
    pub undelivered: u32,
}

/// Walks one transmitter's attempts in start order. With full-buffer
/// traffic an A-MPDU becomes head-of-line at time zero or when the previous
/// one is acknowledged, so the chain is recoverable from the attempts alone.
pub fn head_of_line_delays(
    attempts: &[&TransmissionAttempt],
    params: &MacParams,
    horizon: SimTime,
) -> DelayAccount {
    let mut acc = DelayAccount::default();
    let mut hol_since: SimTime = 0;
    let mut pending = false;
    for a in attempts {
        pending = true;
        if a.outcome != Outcome::Success {
            continue;
        }
        let acked = a.end + params.ack_exchange_us();
        if acked > horizon {
            break;
        }
        acc.delays_ms.push((acked - hol_since) as f64 / 1000.0);
        acc.delivered_bits += a.bits;
        hol_since = acked;
        pending = false;
    }
    acc.undelivered = u32::from(pending);
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::substream;
    use crate::phy::{PathLossParams, Position};

    #[test]
    fn contention_window_examples() {
        let p = MacParams::default();
        assert_eq!(cw(0, &p), 16);
        assert_eq!(cw(3, &p), 128);
        assert_eq!(cw(5, &p), 512);
        assert_eq!(cw(7, &p), 512);
    }

    #[test]
    fn arf_steps_within_ceiling() {
        let mut arf = ArfState::default();
        assert_eq!(arf.select(Some(5)), Some(5));
        arf.on_outcome(Outcome::Failure);
        assert_eq!(arf.select(Some(5)), Some(5));
        arf.on_outcome(Outcome::Failure);
        assert_eq!(arf.select(Some(5)), Some(4));
        for _ in 0..ARF_UP_AFTER - 1 {
            arf.on_outcome(Outcome::Success);
        }
        assert_eq!(arf.select(Some(5)), Some(4));
        arf.on_outcome(Outcome::Success);
        assert_eq!(arf.select(Some(5)), Some(5));
        // a failed probe falls back at once
        arf.on_outcome(Outcome::Failure);
        assert_eq!(arf.select(Some(5)), Some(4));
        // a lower ceiling clamps, and no step goes above it
        assert_eq!(arf.select(Some(2)), Some(2));
        for _ in 0..ARF_UP_AFTER {
            arf.on_outcome(Outcome::Success);
        }
        assert_eq!(arf.select(Some(2)), Some(2));
        assert_eq!(arf.select(None), None);
    }

    #[test]
    fn arf_floor_is_lowest_row() {
        let mut arf = ArfState::default();
        arf.select(Some(0));
        for _ in 0..10 {
            arf.on_outcome(Outcome::Failure);
        }
        assert_eq!(arf.select(Some(0)), Some(0));
    }

    #[test]
    fn backoff_range_and_mean() {
        let p = MacParams::default();
        let mut rng = substream(5, "backoff/node0");
        let n = 100_000;
        let mut sum = 0u64;
        for _ in 0..n {
            let v = sample_backoff(0, &p, &mut rng);
            assert!(v <= 15);
            sum += u64::from(v);
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 7.5).abs() < 0.1, "{mean}");
        for _ in 0..10_000 {
            assert!(sample_backoff(5, &p, &mut rng) <= 511);
        }
    }

    #[test]
    fn backoff_reproducible() {
        let p = MacParams::default();
        let a: Vec<u32> = {
            let mut r = substream(8, "backoff/node3");
            (0..50).map(|_| sample_backoff(2, &p, &mut r)).collect()
        };
        let mut r = substream(8, "backoff/node3");
        let b: Vec<u32> = (0..50).map(|_| sample_backoff(2, &p, &mut r)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn duration_examples() {
        let p = MacParams::default();
        assert_eq!(p.ampdu_bits(), 768_000);
        // 768000 / 143.4 = 5355.6 -> 5356
        assert_eq!(tx_duration_us(768_000, 143.4, &p), Some(5400));
        // 768000 / 77.4 = 9922.5 -> 9923
        assert_eq!(tx_duration_us(768_000, 77.4, &p), Some(9967));
        assert_eq!(tx_duration_us(0, 143.4, &p), Some(44));
        assert_eq!(tx_duration_us(768_000, 0.0, &p), None);
    }

    #[test]
    fn stage_transitions() {
        let p = MacParams::default();
        let mut rng = substream(1, "t");
        let s = |stage| BackoffState {
            stage,
            counter: 0,
            frozen: true,
        };
        assert_eq!(on_tx_outcome(s(3), Outcome::Success, &p, &mut rng).stage, 0);
        assert_eq!(on_tx_outcome(s(3), Outcome::Failure, &p, &mut rng).stage, 4);
        assert_eq!(on_tx_outcome(s(5), Outcome::Failure, &p, &mut rng).stage, 5);
        for _ in 0..1000 {
            let next = on_tx_outcome(s(4), Outcome::Failure, &p, &mut rng);
            assert!(next.counter < cw(next.stage, &p));
        }
    }

    fn attempt(
        tx: usize,
        rx: usize,
        start: u64,
        end: u64,
        power: f64,
        mcs: u8,
    ) -> TransmissionAttempt {
        TransmissionAttempt {
            tx_node: tx,
            rx_node: rx,
            start,
            end,
            tx_power_dbm: power,
            mcs,
            bits: 768_000,
            outcome: Outcome::Failure,
        }
    }

    /// Nodes on a line: AP0 at 0, STA0 at 10 m (signal -72 dBm at 20 dBm),
    /// plus an interferer whose position is given.
    fn line(interferer_x: f64) -> Topology {
        Topology::new(
            vec![
                Position::new(0.0, 0.0),
                Position::new(10.0, 0.0),
                Position::new(interferer_x, 0.0),
            ],
            PathLossParams::default(),
        )
    }

    #[test]
    fn reception_without_overlap_succeeds() {
        let topo = line(1000.0);
        let t = McsTable::default();
        // SNR 22 dB -> MCS 6 (21 dB threshold)
        let a = attempt(0, 1, 0, 9967, 20.0, 6);
        assert_eq!(
            resolve_reception(&a, &[], &topo, -94.0, &t),
            Outcome::Success
        );
        // interferer that does not overlap in time is ignored
        let late = attempt(2, 0, 9967, 12000, 20.0, 0);
        assert_eq!(
            resolve_reception(&a, &[late], &topo, -94.0, &t),
            Outcome::Success
        );
    }

    #[test]
    fn reception_fails_under_strong_interference() {
        // interferer 10 m from the STA on the far side delivers -72 dBm at
        // 20 dBm; at 12 dBm it delivers -80 dBm -> SINR 7.83 dB < 21 dB
        let topo = line(20.0);
        let t = McsTable::default();
        let a = attempt(0, 1, 0, 9967, 20.0, 6);
        let i = attempt(2, 3, 5000, 12000, 12.0, 6);
        let loss = topo.loss_db(2, 1);
        assert!((12.0 - loss - -80.0).abs() < 1e-9);
        assert_eq!(
            resolve_reception(&a, &[i], &topo, -94.0, &t),
            Outcome::Failure
        );
    }

    #[test]
    fn distant_interferer_allows_spatial_reuse() {
        let t = McsTable::default();
        let a = attempt(0, 1, 0, 9967, 20.0, 6);
        let i = attempt(2, 3, 100, 9000, 20.0, 6);
        for x in [40.0, 60.0, 200.0] {
            let topo = line(x);
            // brute-force recomputation of the SINR in milliwatts
            let sig = 10f64.powf((20.0 - topo.loss_db(0, 1)) / 10.0);
            let intf = 10f64.powf((20.0 - topo.loss_db(2, 1)) / 10.0);
            let noise = 10f64.powf(-9.4);
            let sinr = 10.0 * (sig / (intf + noise)).log10();
            let expected = if sinr >= 21.0 {
                Outcome::Success
            } else {
                Outcome::Failure
            };
            assert_eq!(
                resolve_reception(&a, &[i], &topo, -94.0, &t),
                expected,
                "x={x}"
            );
        }
        assert_eq!(
            resolve_reception(&a, &[i], &line(200.0), -94.0, &t),
            Outcome::Success
        );
    }

    #[test]
    fn single_success_delay() {
        let p = MacParams::default();
        let mut a = attempt(0, 1, 34 + 5 * 9, 34 + 5 * 9 + 5400, 20.0, 11);
        a.outcome = Outcome::Success;
        let acc = head_of_line_delays(&[&a], &p, 100_000_000);
        let expected_us = 5 * 9 + 34 + 5400 + 16 + 44;
        assert_eq!(acc.delays_ms, vec![expected_us as f64 / 1000.0]);
        assert_eq!(acc.undelivered, 0);
        assert_eq!(acc.delivered_bits, 768_000);
    }

    #[test]
    fn retry_delay_spans_both_attempts() {
        let p = MacParams::default();
        let first = attempt(0, 1, 70, 5470, 20.0, 11);
        let mut second = attempt(0, 1, 5470 + 60 + 34 + 20 * 9, 0, 20.0, 11);
        second.end = second.start + 5400;
        second.outcome = Outcome::Success;
        let acc = head_of_line_delays(&[&first, &second], &p, 100_000_000);
        assert_eq!(acc.delays_ms.len(), 1);
        assert_eq!(acc.delays_ms[0], (second.end + 60) as f64 / 1000.0);
        assert!(acc.delays_ms[0] * 1000.0 > (first.airtime_us() + second.airtime_us()) as f64);
    }

    #[test]
    fn undelivered_at_horizon_is_dropped() {
        let p = MacParams::default();
        let mut a = attempt(0, 1, 100, 5500, 20.0, 11);
        a.outcome = Outcome::Success;
        let acc = head_of_line_delays(&[&a], &p, 5520);
        assert!(acc.delays_ms.is_empty());
        assert_eq!(acc.undelivered, 1);
        assert_eq!(acc.delivered_bits, 0);
    }
}

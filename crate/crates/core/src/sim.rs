//! Event-driven simulation of overlapping BSSs with saturated downlink
//! traffic.
//!
//! Each AP runs the DCF state machine: it waits DIFS plus its backoff in
//! idle slots, freezes the counter while the sensed power from other
//! transmitters exceeds its own carrier-sense threshold, sends one A-MPDU,
//! then waits SIFS + ACK for the outcome. The MCS never exceeds what the
//! interference-free link budget supports; with ARF it also backs off after
//! failures. Nodes whose counters expire at the same instant all transmit;
//! that is the only way a node can start while another transmission it
//! would sense is already on the air.

use std::io::Write;

use crate::bandit::{Agent, AgentSettings, ApKpis, CoordinationBus, EpochRecord, EpsilonSchedule};
use crate::engine::{substream, EventKind, EventQueue, RngStream, SimTime, Subject, US_PER_S};
use crate::error::Result;
use crate::mac::{
    on_tx_outcome, resolve_reception, tx_duration_us, ArfState, BackoffState, Outcome, RateControl,
    TransmissionAttempt,
};
use crate::phy::{dbm_to_mw, select_mcs, sinr_db, RadioConfig, Topology};
use crate::scenario::{Deployment, ScenarioConfig};

/// How an AP's radio configuration evolves during a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    /// Fixed for the whole run.
    Static(RadioConfig),
    /// Driven by a bandit agent using the config's agent section.
    Learner,
}

pub struct SimOutput {
    /// Every A-MPDU whose airtime ended by the horizon, in end order.
    pub attempts: Vec<TransmissionAttempt>,
    pub agent_log: Vec<EpochRecord>,
    /// Channel accesses skipped because no MCS could decode the link.
    pub aborted: u64,
    pub events: u64,
}

#[derive(Debug, Clone, Copy)]
struct Countdown {
    started: SimTime,
    expiry_at: SimTime,
    seq: u64,
}

#[derive(Debug, Clone, Copy)]
enum Phase {
    /// `None` while frozen by a busy channel.
    Contending(Option<Countdown>),
    Transmitting,
    AwaitingAck(Outcome),
}

struct Ap {
    radio: RadioConfig,
    backoff: BackoffState,
    phase: Phase,
    rng: RngStream,
    arf: ArfState,
    epoch_bits: u64,
}

struct InFlight {
    attempt: TransmissionAttempt,
    overlapping: Vec<TransmissionAttempt>,
}

struct Learner {
    bss: usize,
    agent: Agent,
    rng: RngStream,
}

pub struct Network<'a> {
    config: &'a ScenarioConfig,
    topology: Topology,
    aps: Vec<Ap>,
    in_flight: Vec<Option<InFlight>>,
    learners: Vec<Learner>,
    bus: CoordinationBus,
    queue: EventQueue,
    attempts: Vec<TransmissionAttempt>,
    agent_log: Vec<EpochRecord>,
    aborted: u64,
    events: u64,
}

impl<'a> Network<'a> {
    /// `controllers` holds one entry per BSS of `deployment`. Random streams
    /// derive from `deployment.seed`.
    pub fn new(
        config: &'a ScenarioConfig,
        deployment: &Deployment,
        controllers: &[Controller],
    ) -> Self {
        assert_eq!(
            controllers.len(),
            deployment.n_bss(),
            "one controller per BSS"
        );
        let seed = deployment.seed;
        let n = deployment.n_bss();
        let aps = controllers
            .iter()
            .enumerate()
            .map(|(b, c)| {
                let mut rng = substream(seed, &format!("backoff/node{b}"));
                let radio = match c {
                    Controller::Static(r) => *r,
                    Controller::Learner => config.radio,
                };
                Ap {
                    radio,
                    backoff: BackoffState::initial(&config.mac, &mut rng),
                    phase: Phase::Contending(None),
                    rng,
                    arf: ArfState::default(),
                    epoch_bits: 0,
                }
            })
            .collect();

        let learners = match config.agent.mode.sr_mode() {
            Some(mode) => {
                let settings = AgentSettings {
                    mode,
                    reward_kind: config.agent.reward,
                    schedule: EpsilonSchedule {
                        epsilon0: config.agent.epsilon0,
                    },
                    norm_mbps: config.mcs.table.top_rate_mbps(),
                    base: config.radio,
                    rule: config.power_cap(),
                };
                controllers
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| matches!(c, Controller::Learner))
                    .map(|(b, _)| Learner {
                        bss: b,
                        agent: Agent::new(b, &settings),
                        rng: substream(seed, &format!("agent/bss{b}")),
                    })
                    .collect()
            }
            None => Vec::new(),
        };

        Self {
            config,
            topology: deployment.topology(config.pathloss),
            aps,
            in_flight: (0..n).map(|_| None).collect(),
            learners,
            bus: CoordinationBus::new(n),
            queue: EventQueue::new(),
            attempts: Vec::new(),
            agent_log: Vec::new(),
            aborted: 0,
            events: 0,
        }
    }

    pub fn with_event_trace(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.queue = std::mem::take(&mut self.queue).with_trace(sink);
        self
    }

    fn n_bss(&self) -> usize {
        self.aps.len()
    }

    pub fn run(mut self) -> Result<SimOutput> {
        let horizon = self.config.horizon_us();
        self.queue
            .schedule(horizon, EventKind::SimEnd, Subject::Engine)?;
        if !self.learners.is_empty() {
            for l in &mut self.learners {
                self.aps[l.bss].radio = l.agent.decide(&mut l.rng)?;
            }
            let epoch = self.config.epoch_us();
            if epoch < horizon {
                self.queue
                    .schedule(epoch, EventKind::EpochBoundary, Subject::Agents)?;
            }
        }
        for k in 0..self.n_bss() {
            self.reevaluate(k)?;
        }

        while let Some(ev) = self.queue.pop_next() {
            self.events += 1;
            match (ev.kind, ev.subject) {
                (EventKind::BackoffExpiry, Subject::Node(k)) => {
                    self.on_backoff_expiry(k, ev.seq)?
                }
                (EventKind::TxEnd, Subject::Node(k)) => self.on_tx_end(k)?,
                (EventKind::AckEnd, Subject::Node(k)) => self.on_ack_end(k)?,
                (EventKind::EpochBoundary, _) => {
                    self.close_epoch(false)?;
                    let next = self.queue.now() + self.config.epoch_us();
                    if next < horizon {
                        self.queue
                            .schedule(next, EventKind::EpochBoundary, Subject::Agents)?;
                    }
                }
                (EventKind::SimEnd, _) => {
                    if !self.learners.is_empty() {
                        self.close_epoch(true)?;
                    }
                    break;
                }
                (kind, subject) => unreachable!("{kind} for {subject}"),
            }
        }
        self.queue.flush_trace()?;
        Ok(SimOutput {
            attempts: self.attempts,
            agent_log: self.agent_log,
            aborted: self.aborted,
            events: self.events,
        })
    }

    /// Aggregate power from every other ongoing transmission at AP `k`,
    /// compared against its threshold.
    fn senses_busy(&self, k: usize) -> bool {
        let mw: f64 = self
            .in_flight
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .filter_map(|(j, f)| {
                f.as_ref()
                    .map(|f| dbm_to_mw(f.attempt.tx_power_dbm - self.topology.loss_db(j, k)))
            })
            .sum();
        mw > 0.0 && 10.0 * mw.log10() > self.aps[k].radio.cca_dbm
    }

    /// Freezes or resumes AP `k`'s countdown after a change in what it senses.
    fn reevaluate(&mut self, k: usize) -> Result<()> {
        let Phase::Contending(countdown) = self.aps[k].phase else {
            return Ok(());
        };
        let busy = self.senses_busy(k);
        let now = self.queue.now();
        let config = self.config;
        let mac = &config.mac;
        match (countdown, busy) {
            (Some(cd), true) if cd.expiry_at != now => {
                self.queue.cancel(cd.seq);
                let counting_since = cd.started + mac.difs_us;
                let elapsed = if now > counting_since {
                    (now - counting_since) / mac.slot_us
                } else {
                    0
                };
                let ap = &mut self.aps[k];
                ap.backoff.counter -= (elapsed as u32).min(ap.backoff.counter);
                ap.backoff.frozen = true;
                ap.phase = Phase::Contending(None);
            }
            (None, false) => {
                let ap = &mut self.aps[k];
                let expiry_at = now + mac.difs_us + u64::from(ap.backoff.counter) * mac.slot_us;
                let seq =
                    self.queue
                        .schedule(expiry_at, EventKind::BackoffExpiry, Subject::Node(k))?;
                ap.backoff.frozen = false;
                ap.phase = Phase::Contending(Some(Countdown {
                    started: now,
                    expiry_at,
                    seq,
                }));
            }
            _ => {}
        }
        Ok(())
    }

    fn reevaluate_others(&mut self, k: usize) -> Result<()> {
        for j in 0..self.n_bss() {
            if j != k {
                self.reevaluate(j)?;
            }
        }
        Ok(())
    }

    fn on_backoff_expiry(&mut self, k: usize, seq: u64) -> Result<()> {
        match self.aps[k].phase {
            Phase::Contending(Some(cd)) if cd.seq == seq => {}
            _ => unreachable!("stale backoff expiry for node{k}"),
        }
        let now = self.queue.now();
        let config = self.config;
        let sta = self.n_bss() + k;
        let ap = &mut self.aps[k];
        ap.backoff.counter = 0;

        // the interference-free link budget caps the rate
        let signal = ap.radio.tx_power_dbm - self.topology.loss_db(k, sta);
        let snr = sinr_db(signal, &[], config.radio.noise_dbm);
        let table = &config.mcs.table;
        let ceiling = select_mcs(snr, table).and_then(|mcs| table.position(mcs));
        let position = match config.mac.rate_control {
            RateControl::LinkBudget => ceiling,
            RateControl::Arf => ap.arf.select(ceiling),
        };
        let usable = position.and_then(|p| {
            let row = table.rows()[p];
            tx_duration_us(config.mac.ampdu_bits(), row.rate_mbps, &config.mac)
                .map(|d| (row.index, d))
        });
        let Some((mcs, duration)) = usable else {
            self.aborted += 1;
            ap.backoff = on_tx_outcome(ap.backoff, Outcome::Failure, &config.mac, &mut ap.rng);
            ap.phase = Phase::Contending(None);
            return self.reevaluate(k);
        };

        let attempt = TransmissionAttempt {
            tx_node: k,
            rx_node: sta,
            start: now,
            end: now + duration,
            tx_power_dbm: ap.radio.tx_power_dbm,
            mcs,
            bits: config.mac.ampdu_bits(),
            outcome: Outcome::Failure,
        };
        ap.phase = Phase::Transmitting;
        let mut overlapping = Vec::new();
        for other in self.in_flight.iter_mut().flatten() {
            other.overlapping.push(attempt);
            overlapping.push(other.attempt);
        }
        self.in_flight[k] = Some(InFlight {
            attempt,
            overlapping,
        });
        self.queue
            .schedule(attempt.end, EventKind::TxEnd, Subject::Node(k))?;
        self.reevaluate_others(k)
    }

    fn on_tx_end(&mut self, k: usize) -> Result<()> {
        let InFlight {
            mut attempt,
            overlapping,
        } = self.in_flight[k]
            .take()
            .expect("tx-end without transmission");
        attempt.outcome = resolve_reception(
            &attempt,
            &overlapping,
            &self.topology,
            self.config.radio.noise_dbm,
            &self.config.mcs.table,
        );
        self.attempts.push(attempt);
        self.aps[k].phase = Phase::AwaitingAck(attempt.outcome);
        let at = self.queue.now() + self.config.mac.ack_exchange_us();
        self.queue
            .schedule(at, EventKind::AckEnd, Subject::Node(k))?;
        self.reevaluate_others(k)
    }

    fn on_ack_end(&mut self, k: usize) -> Result<()> {
        let config = self.config;
        let mac = &config.mac;
        let ap = &mut self.aps[k];
        let Phase::AwaitingAck(outcome) = ap.phase else {
            unreachable!("ack-end outside ack wait for node{k}");
        };
        if outcome == Outcome::Success {
            ap.epoch_bits += mac.ampdu_bits();
        }
        ap.arf.on_outcome(outcome);
        ap.backoff = on_tx_outcome(ap.backoff, outcome, mac, &mut ap.rng);
        ap.phase = Phase::Contending(None);
        self.reevaluate(k)
    }

    /// Agent loop at an epoch boundary: every AP reports, coordinated
    /// rewards read one shared snapshot, then every agent picks its next
    /// configuration.
    fn close_epoch(&mut self, last: bool) -> Result<()> {
        let epoch_s = self.config.epoch_us() as f64 / US_PER_S as f64;
        let norm = self.config.mcs.table.top_rate_mbps();
        let throughput: Vec<f64> = self
            .aps
            .iter()
            .map(|ap| ap.epoch_bits as f64 / epoch_s / 1e6)
            .collect();
        self.bus.clear();
        for (b, &t) in throughput.iter().enumerate() {
            self.bus.publish(b, (t / norm).min(1.0));
        }
        for l in &mut self.learners {
            let kpis = ApKpis {
                throughput_mbps: throughput[l.bss],
            };
            self.agent_log.push(l.agent.observe(&kpis, &self.bus)?);
        }
        for ap in &mut self.aps {
            ap.epoch_bits = 0;
        }
        if last {
            return Ok(());
        }
        for l in &mut self.learners {
            self.aps[l.bss].radio = l.agent.decide(&mut l.rng)?;
        }
        for k in 0..self.n_bss() {
            self.reevaluate(k)?;
        }
        Ok(())
    }
}

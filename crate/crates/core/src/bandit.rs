//! Per-AP epsilon-greedy bandit agents with decentralized or coordinated
//! (max-min) rewards.
//!
//! At every epoch boundary an agent reads the AP's last-epoch KPIs, turns
//! them into a reward, credits that reward to the arm it played, picks the
//! next arm and hands the resulting radio configuration back to the AP.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{build_action_space, effective_config, Arm, PowerCapRule, SrMode};
use crate::engine::RngStream;
use crate::error::{Error, Result};
use crate::phy::RadioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    /// Own throughput only.
    Dec,
    /// Minimum normalized throughput across all BSSs.
    Coord,
}

impl RewardKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardKind::Dec => "dec",
            RewardKind::Coord => "coord",
        }
    }
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RewardKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dec" => Ok(RewardKind::Dec),
            "coord" => Ok(RewardKind::Coord),
            other => Err(format!("unknown reward `{other}` (expected dec or coord)")),
        }
    }
}

/// `eps_t = eps0 / sqrt(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    pub epsilon0: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self { epsilon0: 1.0 }
    }
}

pub fn epsilon(t: u64, sched: &EpsilonSchedule) -> Result<f64> {
    if t < 1 {
        return Err(Error::EpochIndex(t));
    }
    Ok((sched.epsilon0 / (t as f64).sqrt()).clamp(0.0, 1.0))
}

pub fn reward_dec(own_throughput_mbps: f64, norm_mbps: f64) -> Result<f64> {
    if !(norm_mbps > 0.0) {
        return Err(Error::Normalizer(norm_mbps));
    }
    Ok((own_throughput_mbps / norm_mbps).clamp(0.0, 1.0))
}

/// Normalized per-BSS throughput for one epoch, indexed by BSS.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiSnapshot {
    pub values: Vec<f64>,
}

pub fn reward_coord(snapshot: &KpiSnapshot) -> Result<f64> {
    snapshot
        .values
        .iter()
        .copied()
        .reduce(f64::min)
        .ok_or(Error::MissingBss(0))
}

/// Out-of-band KPI exchange used by coordinated agents. Every AP publishes
/// before any agent reads, so all agents see the same snapshot.
#[derive(Debug, Clone)]
pub struct CoordinationBus {
    slots: Vec<Option<f64>>,
}

impl CoordinationBus {
    pub fn new(n_bss: usize) -> Self {
        Self {
            slots: vec![None; n_bss],
        }
    }

    pub fn clear(&mut self) {
        self.slots.iter_mut().for_each(|s| *s = None);
    }

    pub fn publish(&mut self, bss: usize, normalized_throughput: f64) {
        self.slots[bss] = Some(normalized_throughput);
    }

    pub fn snapshot(&self) -> Result<KpiSnapshot> {
        let values = self
            .slots
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(Error::MissingBss(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(KpiSnapshot { values })
    }
}

/// What the AP reports to its agent at an epoch boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApKpis {
    pub throughput_mbps: f64,
}

/// One completed epoch, as written to the agent log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: u64,
    pub bss: usize,
    pub arm_index: usize,
    pub config: RadioConfig,
    pub reward: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct Agent {
    bss: usize,
    mode: SrMode,
    reward_kind: RewardKind,
    schedule: EpsilonSchedule,
    norm_mbps: f64,
    base: RadioConfig,
    rule: PowerCapRule,
    arms: Vec<Arm>,
    arm_count: Vec<u64>,
    arm_mean: Vec<f64>,
    t: u64,
    current_arm: Option<usize>,
    current_epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct AgentSettings {
    pub mode: SrMode,
    pub reward_kind: RewardKind,
    pub schedule: EpsilonSchedule,
    pub norm_mbps: f64,
    pub base: RadioConfig,
    pub rule: PowerCapRule,
}

impl Agent {
    pub fn new(bss: usize, settings: &AgentSettings) -> Self {
        let arms = build_action_space(settings.mode, settings.base.tx_power_dbm);
        let n = arms.len();
        Self {
            bss,
            mode: settings.mode,
            reward_kind: settings.reward_kind,
            schedule: settings.schedule,
            norm_mbps: settings.norm_mbps,
            base: settings.base,
            rule: settings.rule,
            arms,
            arm_count: vec![0; n],
            arm_mean: vec![0.0; n],
            t: 1,
            current_arm: None,
            current_epsilon: 1.0,
        }
    }

    pub fn bss(&self) -> usize {
        self.bss
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn arm_count(&self) -> &[u64] {
        &self.arm_count
    }

    pub fn arm_mean(&self) -> &[f64] {
        &self.arm_mean
    }

    /// Epoch counter; equals one plus the number of completed epochs.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn current_arm(&self) -> Option<usize> {
        self.current_arm
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }

    /// Epsilon-greedy choice at the current epoch index.
    pub fn select_arm(&self, rng: &mut RngStream) -> Result<usize> {
        let eps = epsilon(self.t, &self.schedule)?;
        Ok(select_arm_with(&self.arm_mean, eps, rng))
    }

    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardOutOfRange(reward));
        }
        self.arm_count[arm] += 1;
        self.arm_mean[arm] += (reward - self.arm_mean[arm]) / self.arm_count[arm] as f64;
        self.t += 1;
        Ok(())
    }

    /// Picks the arm for the next epoch and returns the AP's new radio
    /// configuration.
    pub fn decide(&mut self, rng: &mut RngStream) -> Result<RadioConfig> {
        let eps = epsilon(self.t, &self.schedule)?;
        let arm = select_arm_with(&self.arm_mean, eps, rng);
        self.current_arm = Some(arm);
        self.current_epsilon = eps;
        effective_config(&self.arms[arm], self.mode, &self.base, &self.rule)
    }

    /// Computes the reward for the epoch that just ended and credits it to
    /// the arm played. Coordinated agents read the shared snapshot.
    pub fn observe(&mut self, kpis: &ApKpis, bus: &CoordinationBus) -> Result<EpochRecord> {
        let arm = self
            .current_arm
            .expect("observe called before the first decision");
        let reward = match self.reward_kind {
            RewardKind::Dec => reward_dec(kpis.throughput_mbps, self.norm_mbps)?,
            RewardKind::Coord => reward_coord(&bus.snapshot()?)?,
        };
        let record = EpochRecord {
            epoch: self.t,
            bss: self.bss,
            arm_index: arm,
            config: effective_config(&self.arms[arm], self.mode, &self.base, &self.rule)?,
            reward,
            epsilon: self.current_epsilon,
        };
        self.update(arm, reward)?;
        Ok(record)
    }

    /// Full epoch-boundary step: observe, update, select, configure.
    pub fn epoch_step(
        &mut self,
        kpis: &ApKpis,
        bus: &CoordinationBus,
        rng: &mut RngStream,
    ) -> Result<(EpochRecord, RadioConfig)> {
        let record = self.observe(kpis, bus)?;
        let config = self.decide(rng)?;
        Ok((record, config))
    }
}

/// With probability `eps` a uniformly random arm, otherwise a uniformly
/// random arm among those with the largest estimate.
pub fn select_arm_with(means: &[f64], eps: f64, rng: &mut RngStream) -> usize {
    assert!(!means.is_empty(), "empty action space");
    let explore: f64 = rng.random();
    if explore < eps {
        return rng.random_range(0..means.len());
    }
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..means.len()).filter(|&i| means[i] == best).collect();
    if ties.len() == 1 {
        ties[0]
    } else {
        ties[rng.random_range(0..ties.len())]
    }
}

//! Experiment configuration schema and random deployment generation.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{PowerCapRule, SrMode, CCA_LEVELS_DBM, TX_POWER_LEVELS_DBM};
use crate::bandit::RewardKind;
use crate::engine::{substream, SimTime, US_PER_S};
use crate::error::{Error, Result};
use crate::mac::{MacParams, TrafficModel};
use crate::phy::{McsTable, PathLossParams, Position, RadioConfig, Topology};

/// Station-to-AP distance range in meters.
pub const STA_DISTANCE_M: (f64, f64) = (1.0, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AgentMode {
    /// Plain DCF, no agents.
    #[serde(rename = "dcf")]
    Dcf,
    #[serde(rename = "11axsr")]
    Constrained11ax,
    #[serde(rename = "free")]
    Free,
}

impl AgentMode {
    pub fn sr_mode(self) -> Option<SrMode> {
        match self {
            AgentMode::Dcf => None,
            AgentMode::Constrained11ax => Some(SrMode::Constrained11ax),
            AgentMode::Free => Some(SrMode::Free),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AgentMode::Dcf => "dcf",
            AgentMode::Constrained11ax => "11axsr",
            AgentMode::Free => "free",
        }
    }
}

impl fmt::Display for AgentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dcf" => Ok(AgentMode::Dcf),
            "11axsr" => Ok(AgentMode::Constrained11ax),
            "free" => Ok(AgentMode::Free),
            other => Err(format!(
                "unknown mode `{other}` (expected dcf, 11axsr or free)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub n_deployments: u32,
    pub side_m: f64,
    pub n_bss: u32,
    pub sim_time_s: f64,
    pub traffic: TrafficModel,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            n_deployments: 100,
            side_m: 20.0,
            n_bss: 4,
            sim_time_s: 100.0,
            traffic: TrafficModel::FullBuffer,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McsSection {
    pub table: McsTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub mode: AgentMode,
    pub reward: RewardKind,
    pub epoch_s: f64,
    pub epsilon0: f64,
    pub txp_ref_dbm: f64,
    pub obss_pd_min_dbm: f64,
}

impl Default for AgentSection {
    fn default() -> Self {
        let rule = PowerCapRule::default();
        Self {
            mode: AgentMode::Dcf,
            reward: RewardKind::Dec,
            epoch_s: 1.0,
            epsilon0: 1.0,
            txp_ref_dbm: rule.txp_ref_dbm,
            obss_pd_min_dbm: rule.obss_pd_min_dbm,
        }
    }
}

/// Complete experiment configuration. Every key is optional in the file and
/// falls back to the defaults below; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub radio: RadioConfig,
    pub pathloss: PathLossParams,
    pub mac: MacParams,
    pub mcs: McsSection,
    pub agent: AgentSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scenario: ScenarioSection::default(),
            radio: RadioConfig::default(),
            pathloss: PathLossParams::default(),
            mac: MacParams::default(),
            mcs: McsSection::default(),
            agent: AgentSection::default(),
        }
    }
}

fn seconds_to_us(s: f64) -> SimTime {
    (s * US_PER_S as f64).round() as SimTime
}

impl ScenarioConfig {
    pub fn horizon_us(&self) -> SimTime {
        seconds_to_us(self.scenario.sim_time_s)
    }

    pub fn epoch_us(&self) -> SimTime {
        seconds_to_us(self.agent.epoch_s)
    }

    pub fn n_epochs(&self) -> u64 {
        self.horizon_us() / self.epoch_us().max(1)
    }

    pub fn n_bss(&self) -> usize {
        self.scenario.n_bss as usize
    }

    pub fn power_cap(&self) -> PowerCapRule {
        PowerCapRule {
            txp_ref_dbm: self.agent.txp_ref_dbm,
            obss_pd_min_dbm: self.agent.obss_pd_min_dbm,
        }
    }

    /// Seed of deployment `index` within a batch.
    pub fn deployment_seed(&self, index: u32) -> u64 {
        self.seed.wrapping_add(u64::from(index))
    }
}

pub fn validate_config(config: &ScenarioConfig) -> std::result::Result<(), Vec<String>> {
    let mut v = Vec::new();
    let s = &config.scenario;
    if s.n_deployments == 0 {
        v.push("scenario.n_deployments: must be positive".into());
    }
    if !(s.side_m > 0.0) {
        v.push("scenario.side_m: must be positive".into());
    } else if s.side_m < 2.0 * STA_DISTANCE_M.1 {
        // station placement needs an inward direction from every AP position
        v.push(format!(
            "scenario.side_m: must be at least {} m to place stations",
            2.0 * STA_DISTANCE_M.1
        ));
    }
    if s.n_bss == 0 {
        v.push("scenario.n_bss: must be positive".into());
    }
    if !(s.sim_time_s > 0.0) || config.horizon_us() == 0 {
        v.push("scenario.sim_time_s: must be positive".into());
    }

    let r = &config.radio;
    if !TX_POWER_LEVELS_DBM.contains(&r.tx_power_dbm) {
        v.push(format!(
            "radio.tx_power_dbm: {} not in {:?}",
            r.tx_power_dbm, TX_POWER_LEVELS_DBM
        ));
    }
    if !CCA_LEVELS_DBM.contains(&r.cca_dbm) {
        v.push(format!(
            "radio.cca_dbm: {} not in {:?}",
            r.cca_dbm, CCA_LEVELS_DBM
        ));
    }
    if !(r.freq_ghz > 0.0) {
        v.push("radio.freq_ghz: must be positive".into());
    }
    if !(r.bw_mhz > 0.0) {
        v.push("radio.bw_mhz: must be positive".into());
    }
    if !r.noise_dbm.is_finite() {
        v.push("radio.noise_dbm: must be finite".into());
    }

    if !(config.pathloss.pl_1m_db > 0.0) {
        v.push("pathloss.pl_1m_db: must be positive".into());
    }
    if !(config.pathloss.gamma >= 2.0) {
        v.push("pathloss.gamma: must be at least 2".into());
    }

    let m = &config.mac;
    for (name, value) in [
        ("cw_min", u64::from(m.cw_min)),
        ("n_agg", u64::from(m.n_agg)),
        ("frame_bits", m.frame_bits),
        ("slot_us", m.slot_us),
    ] {
        if value == 0 {
            v.push(format!("mac.{name}: must be positive"));
        }
    }
    if m.max_stage > 16 {
        v.push("mac.max_stage: must be at most 16".into());
    }

    v.extend(config.mcs.table.violations());

    let a = &config.agent;
    if !(a.epoch_s > 0.0) || config.epoch_us() == 0 {
        v.push("agent.epoch_s: must be positive".into());
    } else if !config.horizon_us().is_multiple_of(config.epoch_us()) {
        v.push(format!(
            "agent.epoch_s: {} s does not divide scenario.sim_time_s {} s",
            a.epoch_s, s.sim_time_s
        ));
    }
    if !(a.epsilon0 > 0.0) {
        v.push("agent.epsilon0: must be positive".into());
    }
    if !a.txp_ref_dbm.is_finite() || !a.obss_pd_min_dbm.is_finite() {
        v.push("agent.txp_ref_dbm / agent.obss_pd_min_dbm: must be finite".into());
    } else if CCA_LEVELS_DBM.iter().any(|&c| c < a.obss_pd_min_dbm) {
        v.push("agent.obss_pd_min_dbm: above the lowest carrier-sense level".into());
    }

    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_config(text: &str) -> std::result::Result<ScenarioConfig, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn save_config(config: &ScenarioConfig, path: &Path) -> Result<()> {
    let text = toml::to_string_pretty(config).expect("config is always serializable");
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bss {
    pub ap: Position,
    pub sta: Position,
}

/// APs and their stations for one scenario instance. Node ids: the AP of
/// BSS `b` is `b`, its station is `n_bss + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub seed: u64,
    pub bss: Vec<Bss>,
}

impl Deployment {
    pub fn n_bss(&self) -> usize {
        self.bss.len()
    }

    pub fn ap_node(&self, bss: usize) -> usize {
        bss
    }

    pub fn sta_node(&self, bss: usize) -> usize {
        self.bss.len() + bss
    }

    pub fn positions(&self) -> Vec<Position> {
        self.bss
            .iter()
            .map(|b| b.ap)
            .chain(self.bss.iter().map(|b| b.sta))
            .collect()
    }

    pub fn topology(&self, params: PathLossParams) -> Topology {
        Topology::new(self.positions(), params)
    }
}

/// APs uniform in the square; each station at a uniform distance in
/// `STA_DISTANCE_M` and a uniform angle, the angle redrawn until the station
/// lands inside the square.
pub fn generate_deployment(seed: u64, config: &ScenarioConfig) -> Deployment {
    let side = config.scenario.side_m;
    let mut rng = substream(seed, "deployment");
    let bss = (0..config.scenario.n_bss)
        .map(|_| {
            let ap = Position::new(rng.random_range(0.0..=side), rng.random_range(0.0..=side));
            let d = rng.random_range(STA_DISTANCE_M.0..=STA_DISTANCE_M.1);
            let sta = loop {
                let theta = rng.random_range(0.0..std::f64::consts::TAU);
                let p = Position::new(ap.x + d * theta.cos(), ap.y + d * theta.sin());
                if p.inside_square(side) {
                    break p;
                }
            };
            Bss { ap, sta }
        })
        .collect();
    Deployment { seed, bss }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_control_parses() {
        let c = parse_config("[mac]\nrate_control = \"link-budget\"\n").unwrap();
        assert_eq!(c.mac.rate_control, crate::mac::RateControl::LinkBudget);
        assert!(parse_config("[mac]\nrate_control = \"minstrel\"\n").is_err());
    }

    #[test]
    fn defaults_are_valid() {
        let c = ScenarioConfig::default();
        assert_eq!(validate_config(&c), Ok(()));
        assert_eq!(c.horizon_us(), 100_000_000);
        assert_eq!(c.n_epochs(), 100);
    }

    #[test]
    fn zero_side_reported() {
        let mut c = ScenarioConfig::default();
        c.scenario.side_m = 0.0;
        let v = validate_config(&c).unwrap_err();
        assert!(v.iter().any(|m| m.starts_with("scenario.side_m")), "{v:?}");
    }

    #[test]
    fn non_divisor_epoch_reported() {
        let mut c = ScenarioConfig::default();
        c.agent.epoch_s = 0.3;
        let v = validate_config(&c).unwrap_err();
        assert!(v.iter().any(|m| m.starts_with("agent.epoch_s")), "{v:?}");
        c.agent.epoch_s = 0.5;
        assert_eq!(validate_config(&c), Ok(()));
    }

    #[test]
    fn out_of_set_levels_reported() {
        let mut c = ScenarioConfig::default();
        c.radio.cca_dbm = -80.0;
        c.radio.tx_power_dbm = 17.0;
        c.mcs.table = McsTable::new(vec![]);
        let v = validate_config(&c).unwrap_err();
        assert_eq!(v.len(), 3, "{v:?}");
    }

    #[test]
    fn round_trip_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        let c = ScenarioConfig::default();
        save_config(&c, &path).unwrap();
        assert_eq!(load_config(&path).unwrap(), c);
    }

    #[test]
    fn missing_fields_take_defaults() {
        let c =
            parse_config("seed = 9\n[scenario]\nn_bss = 2\n[agent]\nmode = \"free\"\n").unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.scenario.n_bss, 2);
        assert_eq!(c.scenario.side_m, 20.0);
        assert_eq!(c.agent.mode, AgentMode::Free);
        assert_eq!(c.agent.reward, RewardKind::Dec);
        assert_eq!(c.mac, MacParams::default());
        assert_eq!(parse_config("").unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn unknown_field_is_an_error_with_location() {
        let err = parse_config("[scenario]\nn_bss = 4\nwalls = 3\n").unwrap_err();
        assert!(err.contains("walls"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        let err = parse_config("[radio]\ntx_power_dbm = \"loud\"\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn parse_error_carries_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[bogus]\n").unwrap();
        match load_config(&path) {
            Err(Error::Parse { path: p, .. }) => assert_eq!(p, path),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mcs_table_in_config() {
        let c = parse_config(
            "[mcs]\ntable = [{ index = 0, min_sinr_db = 5.0, rate_mbps = 10.0 }, { index = 1, min_sinr_db = 9.0, rate_mbps = 20.0 }]\n",
        )
        .unwrap();
        assert_eq!(c.mcs.table.rows().len(), 2);
        assert_eq!(c.mcs.table.top_rate_mbps(), 20.0);
    }

    #[test]
    fn deployment_deterministic_and_sized() {
        let c = ScenarioConfig::default();
        let a = generate_deployment(7, &c);
        assert_eq!(a, generate_deployment(7, &c));
        assert_ne!(a, generate_deployment(8, &c));
        assert_eq!(a.n_bss(), 4);
        assert_eq!(a.positions().len(), 8);
        for b in &a.bss {
            assert!(b.ap.inside_square(20.0) && b.sta.inside_square(20.0));
            let d = b.ap.distance(&b.sta);
            assert!((1.0 - 1e-9..=5.0 + 1e-9).contains(&d));
        }
    }
}

//! Spatial-reuse action spaces and the OBSS/PD power cap.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phy::RadioConfig;

/// Selectable carrier-sense thresholds, dBm.
pub const CCA_LEVELS_DBM: [f64; 6] = [-82.0, -78.0, -74.0, -70.0, -66.0, -62.0];
/// Selectable transmit powers, dBm.
pub const TX_POWER_LEVELS_DBM: [f64; 4] = [5.0, 10.0, 15.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SrMode {
    /// 802.11ax OBSS/PD: only the threshold is learned, power follows the cap.
    #[serde(rename = "11axsr")]
    Constrained11ax,
    /// Threshold and power chosen independently.
    #[serde(rename = "free")]
    Free,
}

impl SrMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SrMode::Constrained11ax => "11axsr",
            SrMode::Free => "free",
        }
    }
}

impl fmt::Display for SrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SrMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "11axsr" => Ok(SrMode::Constrained11ax),
            "free" => Ok(SrMode::Free),
            other => Err(format!(
                "unknown SR mode `{other}` (expected 11axsr or free)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arm {
    pub cca_dbm: f64,
    pub tx_power_dbm: f64,
}

/// Linear OBSS/PD rule `cap(C) = txp_ref - (C - obss_pd_min)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCapRule {
    pub txp_ref_dbm: f64,
    pub obss_pd_min_dbm: f64,
}

impl Default for PowerCapRule {
    fn default() -> Self {
        Self {
            txp_ref_dbm: 21.0,
            obss_pd_min_dbm: -82.0,
        }
    }
}

/// Arms for `mode`. Constrained arms carry `default_power_dbm` before the
/// cap is applied; free arms are ordered by threshold, then power.
pub fn build_action_space(mode: SrMode, default_power_dbm: f64) -> Vec<Arm> {
    match mode {
        SrMode::Constrained11ax => CCA_LEVELS_DBM
            .iter()
            .map(|&cca_dbm| Arm {
                cca_dbm,
                tx_power_dbm: default_power_dbm,
            })
            .collect(),
        SrMode::Free => CCA_LEVELS_DBM
            .iter()
            .flat_map(|&cca_dbm| {
                TX_POWER_LEVELS_DBM.iter().map(move |&tx_power_dbm| Arm {
                    cca_dbm,
                    tx_power_dbm,
                })
            })
            .collect(),
    }
}

pub fn max_tx_power_dbm(cca_dbm: f64, rule: &PowerCapRule) -> Result<f64> {
    if cca_dbm < rule.obss_pd_min_dbm {
        return Err(Error::CcaBelowMinimum {
            cca_dbm,
            min_dbm: rule.obss_pd_min_dbm,
        });
    }
    Ok(rule.txp_ref_dbm - (cca_dbm - rule.obss_pd_min_dbm))
}

/// Radio configuration an AP runs with after selecting `arm`. Carrier
/// sensing stays enabled at the arm's threshold in both modes.
pub fn effective_config(
    arm: &Arm,
    mode: SrMode,
    base: &RadioConfig,
    rule: &PowerCapRule,
) -> Result<RadioConfig> {
    let tx_power_dbm = match mode {
        SrMode::Constrained11ax => arm.tx_power_dbm.min(max_tx_power_dbm(arm.cca_dbm, rule)?),
        SrMode::Free => arm.tx_power_dbm,
    };
    Ok(RadioConfig {
        tx_power_dbm,
        cca_dbm: arm.cca_dbm,
        ..*base
    })
}

//! Geometry, propagation, interference and rate selection.

use serde::{Deserialize, Serialize};

/// Shortest distance used for path loss; co-located nodes are clamped here.
pub const MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn inside_square(&self, side: f64) -> bool {
        (0.0..=side).contains(&self.x) && (0.0..=side).contains(&self.y)
    }
}

/// Log-distance propagation: `PL(d) = pl_1m + 10 * gamma * log10(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathLossParams {
    pub pl_1m_db: f64,
    pub gamma: f64,
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self {
            pl_1m_db: 48.0,
            gamma: 4.4,
        }
    }
}

/// Per-AP radio settings. The first two fields are what the agents tune.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub cca_dbm: f64,
    pub freq_ghz: f64,
    pub bw_mhz: f64,
    pub noise_dbm: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            tx_power_dbm: 20.0,
            cca_dbm: -82.0,
            freq_ghz: 6.0,
            bw_mhz: 20.0,
            // -101 dBm thermal over 20 MHz plus a 7 dB noise figure
            noise_dbm: -94.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsRow {
    pub index: u8,
    pub min_sinr_db: f64,
    pub rate_mbps: f64,
}

/// Rate table ordered by index; both thresholds and rates strictly increase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct McsTable(Vec<McsRow>);

const DEFAULT_MCS: [(f64, f64); 12] = [
    (3.0, 8.6),
    (6.0, 17.2),
    (9.0, 25.8),
    (12.0, 34.4),
    (16.0, 51.6),
    (19.0, 68.8),
    (21.0, 77.4),
    (23.0, 86.0),
    (27.0, 103.2),
    (29.0, 114.7),
    (32.0, 129.0),
    (34.0, 143.4),
];

impl Default for McsTable {
    /// 802.11ax rates for 20 MHz, one spatial stream, 0.8 us guard interval.
    fn default() -> Self {
        Self(
            DEFAULT_MCS
                .iter()
                .enumerate()
                .map(|(i, &(min_sinr_db, rate_mbps))| McsRow {
                    index: i as u8,
                    min_sinr_db,
                    rate_mbps,
                })
                .collect(),
        )
    }
}

impl McsTable {
    pub fn new(rows: Vec<McsRow>) -> Self {
        Self(rows)
    }

    pub fn rows(&self) -> &[McsRow] {
        &self.0
    }

    /// Problems that make the table unusable, empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.0.is_empty() {
            out.push("mcs.table: must contain at least one row".to_string());
        }
        for (i, row) in self.0.iter().enumerate() {
            if !(row.rate_mbps > 0.0) || !row.min_sinr_db.is_finite() {
                out.push(format!(
                    "mcs.table[{i}]: rate must be positive and threshold finite"
                ));
            }
        }
        for pair in self.0.windows(2) {
            if pair[1].index <= pair[0].index
                || pair[1].min_sinr_db <= pair[0].min_sinr_db
                || pair[1].rate_mbps <= pair[0].rate_mbps
            {
                out.push(format!(
                    "mcs.table: rows {} and {} not strictly increasing",
                    pair[0].index, pair[1].index
                ));
            }
        }
        out
    }

    /// Row with the given MCS index.
    pub fn row(&self, index: u8) -> Option<&McsRow> {
        self.0.iter().find(|r| r.index == index)
    }

    pub fn position(&self, index: u8) -> Option<usize> {
        self.0.iter().position(|r| r.index == index)
    }

    pub fn top_rate_mbps(&self) -> f64 {
        self.0.last().map_or(0.0, |r| r.rate_mbps)
    }
}

/// Node positions with the pairwise path loss precomputed.
#[derive(Debug, Clone)]
pub struct Topology {
    positions: Vec<Position>,
    loss: Vec<f64>,
}

impl Topology {
    pub fn new(positions: Vec<Position>, params: PathLossParams) -> Self {
        let n = positions.len();
        let mut loss = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                loss[a * n + b] = path_loss_db(positions[a].distance(&positions[b]), &params);
            }
        }
        Self { positions, loss }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn loss_db(&self, from: usize, to: usize) -> f64 {
        self.loss[from * self.positions.len() + to]
    }
}

pub fn path_loss_db(distance_m: f64, params: &PathLossParams) -> f64 {
    let d = distance_m.max(MIN_DISTANCE_M);
    params.pl_1m_db + 10.0 * params.gamma * d.log10()
}

pub fn rx_power_dbm(tx_dbm: f64, loss_db: f64) -> f64 {
    tx_dbm - loss_db
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Power sum in the linear domain. An empty input yields `-inf`.
pub fn aggregate_power_dbm<I>(components: I) -> f64
where
    I: IntoIterator<Item = f64>,
{
    let total: f64 = components.into_iter().map(dbm_to_mw).sum();
    // log10(0) = -inf covers the empty case
    mw_to_dbm(total)
}

pub fn sinr_db(signal_dbm: f64, interferers: &[f64], noise_dbm: f64) -> f64 {
    let floor = aggregate_power_dbm(interferers.iter().copied().chain([noise_dbm]));
    signal_dbm - floor
}

pub fn carrier_sense_busy(aggregate_dbm: f64, cca_dbm: f64) -> bool {
    aggregate_dbm > cca_dbm
}

/// Highest MCS whose threshold does not exceed `sinr`; `None` if the link
/// cannot be decoded at any rate.
pub fn select_mcs(sinr: f64, table: &McsTable) -> Option<u8> {
    table
        .rows()
        .iter()
        .rev()
        .find(|row| row.min_sinr_db <= sinr)
        .map(|row| row.index)
}

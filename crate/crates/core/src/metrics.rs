//! Per-BSS KPIs and the reliability / median / peak percentile report.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mac::{head_of_line_delays, TransmissionAttempt};
use crate::scenario::ScenarioConfig;

/// Percentile with linear interpolation between closest ranks: for sorted
/// `x_1..x_n`, `h = (n - 1) p / 100 + 1` and the result is
/// `x_floor(h) + (h - floor(h)) (x_floor(h)+1 - x_floor(h))`.
pub fn percentile(p: f64, samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(interpolate(p, sorted.len() as u64, |rank| {
        sorted[rank as usize]
    }))
}

/// Shared interpolation rule over a sorted population of `n` values where
/// `value_at(r)` returns the zero-based `r`-th smallest value.
fn interpolate(p: f64, n: u64, value_at: impl Fn(u64) -> f64) -> f64 {
    let p = p.clamp(0.0, 100.0);
    let h = (n - 1) as f64 * p / 100.0;
    let lo = h.floor();
    let frac = h - lo;
    let lo = lo as u64;
    let x = value_at(lo);
    if lo + 1 >= n || frac == 0.0 {
        return x;
    }
    x + frac * (value_at(lo + 1) - x)
}

/// Pooled delay distribution keyed by whole microseconds. Head-of-line
/// delays are integer microsecond spans, so this stores them exactly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DelayHistogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl DelayHistogram {
    pub fn add_us(&mut self, delay_us: u64, count: u64) {
        if count > 0 {
            *self.counts.entry(delay_us).or_default() += count;
            self.total += count;
        }
    }

    pub fn add_ms(&mut self, delay_ms: f64) {
        self.add_us((delay_ms * 1000.0).round() as u64, 1);
    }

    pub fn merge(&mut self, other: &DelayHistogram) {
        for (&us, &c) in &other.counts {
            self.add_us(us, c);
        }
    }

    pub fn len(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    fn value_at_rank(&self, rank: u64) -> u64 {
        let mut seen = 0;
        for (&us, &c) in &self.counts {
            seen += c;
            if rank < seen {
                return us;
            }
        }
        unreachable!("rank {rank} beyond {} samples", self.total)
    }

    /// Same rule as [`percentile`], in milliseconds.
    pub fn percentile_ms(&self, p: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySamples);
        }
        let us = interpolate(p, self.total, |r| self.value_at_rank(r) as f64);
        Ok(us / 1000.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpiRecord {
    pub bss: usize,
    pub throughput_mbps: f64,
    pub delay_ms_samples: Vec<f64>,
    pub airtime_fraction: f64,
    /// A-MPDUs left undelivered at the horizon; excluded from the delays.
    pub undelivered: u32,
}

/// One record per BSS from a completed run's attempts. Throughput counts
/// only A-MPDUs acknowledged by the horizon.
pub fn collect_run(attempts: &[TransmissionAttempt], config: &ScenarioConfig) -> Vec<KpiRecord> {
    let horizon = config.horizon_us();
    let horizon_s = horizon as f64 / 1e6;
    (0..config.n_bss())
        .map(|bss| {
            let mut mine: Vec<&TransmissionAttempt> =
                attempts.iter().filter(|a| a.tx_node == bss).collect();
            mine.sort_by_key(|a| a.start);
            let airtime_us: u64 = mine.iter().map(|a| a.airtime_us()).sum();
            let acc = head_of_line_delays(&mine, &config.mac, horizon);
            KpiRecord {
                bss,
                throughput_mbps: acc.delivered_bits as f64 / horizon_s / 1e6,
                delay_ms_samples: acc.delays_ms,
                airtime_fraction: airtime_us as f64 / horizon as f64,
                undelivered: acc.undelivered,
            }
        })
        .collect()
}

/// Jain's index `(sum x)^2 / (n sum x^2)`.
pub fn jain_index(values: &[f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    let sq: f64 = values.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return 1.0;
    }
    sum * sum / (values.len() as f64 * sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Percentiles {
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub n_samples: u64,
}

impl Percentiles {
    pub fn of(samples: &[f64]) -> Result<Self> {
        Ok(Self {
            p25: percentile(25.0, samples)?,
            p50: percentile(50.0, samples)?,
            p75: percentile(75.0, samples)?,
            n_samples: samples.len() as u64,
        })
    }

    pub fn of_delays(hist: &DelayHistogram) -> Result<Self> {
        Ok(Self {
            p25: hist.percentile_ms(25.0)?,
            p50: hist.percentile_ms(50.0)?,
            p75: hist.percentile_ms(75.0)?,
            n_samples: hist.len(),
        })
    }
}

/// Compact per-run result kept by batch aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub deployment: u32,
    pub bss: Vec<BssSummary>,
    pub delays: DelayHistogram,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BssSummary {
    pub bss: usize,
    pub throughput_mbps: f64,
    pub airtime: f64,
    pub delay_p50_ms: Option<f64>,
    pub n_delay_samples: u64,
}

impl RunSummary {
    pub fn from_records(deployment: u32, records: &[KpiRecord]) -> Self {
        let mut delays = DelayHistogram::default();
        let bss = records
            .iter()
            .map(|r| {
                r.delay_ms_samples.iter().for_each(|&d| delays.add_ms(d));
                BssSummary {
                    bss: r.bss,
                    throughput_mbps: r.throughput_mbps,
                    airtime: r.airtime_fraction,
                    delay_p50_ms: percentile(50.0, &r.delay_ms_samples).ok(),
                    n_delay_samples: r.delay_ms_samples.len() as u64,
                }
            })
            .collect();
        Self {
            deployment,
            bss,
            delays,
        }
    }
}

/// Pooled percentiles for one configuration. Latency is absent when no
/// A-MPDU was delivered in any run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileReport {
    pub throughput: Percentiles,
    pub latency: Option<Percentiles>,
    pub airtime: Percentiles,
}

/// Pools per-BSS values across all runs, then takes percentiles.
pub fn aggregate(runs: &[RunSummary]) -> Result<PercentileReport> {
    let throughput: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.bss.iter().map(|b| b.throughput_mbps))
        .collect();
    let airtime: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.bss.iter().map(|b| b.airtime))
        .collect();
    let mut delays = DelayHistogram::default();
    runs.iter().for_each(|r| delays.merge(&r.delays));
    Ok(PercentileReport {
        throughput: Percentiles::of(&throughput)?,
        latency: Percentiles::of_delays(&delays).ok(),
        airtime: Percentiles::of(&airtime)?,
    })
}

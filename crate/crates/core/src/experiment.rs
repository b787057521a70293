//! Single runs, paired-seed batches and their CSV outputs.
//!
//! Every configuration in a batch sees the same deployments (deployment `i`
//! uses seed `root_seed + i`), so comparisons between configurations are
//! paired. Results are merged in job order and are independent of the
//! number of worker threads.

use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bandit::{EpochRecord, RewardKind};
use crate::error::{Error, Result};
use crate::mac::TransmissionAttempt;
use crate::metrics::{
    aggregate, collect_run, BssSummary, DelayHistogram, KpiRecord, PercentileReport, Percentiles,
    RunSummary,
};
use crate::scenario::{
    generate_deployment, validate_config, AgentMode, Deployment, ScenarioConfig,
};
use crate::sim::{Controller, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub mode: AgentMode,
    pub reward: RewardKind,
}

impl Configuration {
    pub const DCF: Configuration = Configuration {
        mode: AgentMode::Dcf,
        reward: RewardKind::Dec,
    };
    pub const AX_DEC: Configuration = Configuration {
        mode: AgentMode::Constrained11ax,
        reward: RewardKind::Dec,
    };
    pub const AX_COORD: Configuration = Configuration {
        mode: AgentMode::Constrained11ax,
        reward: RewardKind::Coord,
    };
    pub const FREE_DEC: Configuration = Configuration {
        mode: AgentMode::Free,
        reward: RewardKind::Dec,
    };
    pub const FREE_COORD: Configuration = Configuration {
        mode: AgentMode::Free,
        reward: RewardKind::Coord,
    };

    pub const ALL: [Configuration; 5] = [
        Self::DCF,
        Self::AX_DEC,
        Self::AX_COORD,
        Self::FREE_DEC,
        Self::FREE_COORD,
    ];

    pub fn name(&self) -> String {
        match self.mode {
            AgentMode::Dcf => "dcf".to_string(),
            mode => format!("{mode}-{}", self.reward),
        }
    }

    /// The config with its agent section switched to this configuration.
    pub fn apply(&self, config: &ScenarioConfig) -> ScenarioConfig {
        let mut c = config.clone();
        c.agent.mode = self.mode;
        c.agent.reward = self.reward;
        c
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Configuration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase();
        Configuration::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| {
                format!("unknown configuration `{s}` (expected dcf, 11axsr-dec, 11axsr-coord, free-dec or free-coord)")
            })
    }
}

#[derive(Default)]
pub struct RunOptions {
    pub event_trace: Option<Box<dyn Write + Send>>,
}

pub struct RunResult {
    pub deployment: Deployment,
    pub kpis: Vec<KpiRecord>,
    pub attempts: Vec<TransmissionAttempt>,
    pub agent_log: Vec<EpochRecord>,
    pub aborted: u64,
}

/// One complete simulation of deployment `deployment_seed` under
/// `configuration`. Agents are active unless the configuration is DCF.
pub fn run_single(
    config: &ScenarioConfig,
    deployment_seed: u64,
    configuration: Configuration,
    options: RunOptions,
) -> Result<RunResult> {
    let config = configuration.apply(config);
    validate_config(&config).map_err(Error::InvalidConfig)?;
    let deployment = generate_deployment(deployment_seed, &config);
    let controller = match configuration.mode {
        AgentMode::Dcf => Controller::Static(config.radio),
        _ => Controller::Learner,
    };
    let controllers = vec![controller; deployment.n_bss()];
    let mut network = Network::new(&config, &deployment, &controllers);
    if let Some(sink) = options.event_trace {
        network = network.with_event_trace(sink);
    }
    let out = network.run()?;
    let kpis = collect_run(&out.attempts, &config);
    Ok(RunResult {
        deployment,
        kpis,
        attempts: out.attempts,
        agent_log: out.agent_log,
        aborted: out.aborted,
    })
}

pub struct ExperimentPlan {
    pub config: ScenarioConfig,
    pub configurations: Vec<Configuration>,
    pub out_dir: PathBuf,
    pub parallelism: usize,
    pub spider: bool,
}

#[derive(Debug, Clone)]
pub struct ConfigurationResult {
    pub configuration: Configuration,
    pub runs: Vec<RunSummary>,
    pub report: PercentileReport,
}

#[derive(Debug, Clone)]
pub struct BatchOutcome {
    pub results: Vec<ConfigurationResult>,
    pub failures: Vec<(Configuration, u32, String)>,
}

fn summarize(
    config: &ScenarioConfig,
    configuration: Configuration,
    index: u32,
) -> Result<RunSummary> {
    let seed = config.deployment_seed(index);
    let run = run_single(config, seed, configuration, RunOptions::default())?;
    Ok(RunSummary::from_records(index, &run.kpis))
}

/// Runs every selected configuration over all deployments, writes the
/// reports into `plan.out_dir` and returns the aggregated results. Failed
/// runs are recorded in the manifest; the call then returns
/// [`Error::BatchFailed`] after writing whatever completed.
pub fn run_batch(plan: &ExperimentPlan) -> Result<BatchOutcome> {
    validate_config(&plan.config).map_err(Error::InvalidConfig)?;
    fs::create_dir_all(&plan.out_dir)?;
    let n = plan.config.scenario.n_deployments;
    let jobs: Vec<(Configuration, u32)> = plan
        .configurations
        .iter()
        .flat_map(|&c| (0..n).map(move |i| (c, i)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism.max(1))
        .build()
        .expect("thread pool");
    let outputs: Vec<Result<RunSummary>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, i)| summarize(&plan.config, c, i))
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut manifest = String::from("deployment,seed,configuration,status,output_hash\n");
    let mut outputs = outputs.into_iter();
    for &configuration in &plan.configurations {
        let mut runs = Vec::new();
        for i in 0..n {
            let seed = plan.config.deployment_seed(i);
            match outputs.next().expect("one output per job") {
                Ok(run) => {
                    let hash = run_hash(&run);
                    writeln!(manifest, "{i},{seed},{configuration},ok,{hash}").unwrap();
                    runs.push(run);
                }
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    writeln!(manifest, "{i},{seed},{configuration},failed: {msg},").unwrap();
                    failures.push((configuration, i, e.to_string()));
                }
            }
        }
        if runs.is_empty() {
            continue;
        }
        write_raw(&plan.out_dir, configuration, &runs)?;
        let report = aggregate(&runs)?;
        results.push(ConfigurationResult {
            configuration,
            runs,
            report,
        });
    }

    fs::write(plan.out_dir.join("manifest.csv"), manifest)?;
    let total = jobs.len();
    fs::write(
        plan.out_dir.join("manifest_status.txt"),
        format!(
            "complete={}\nruns_ok={}\nruns_failed={}\n",
            failures.is_empty(),
            total - failures.len(),
            failures.len()
        ),
    )?;
    write_reports(&plan.out_dir, &results, plan.spider)?;

    if failures.is_empty() {
        Ok(BatchOutcome { results, failures })
    } else {
        Err(Error::BatchFailed {
            failed: failures.len(),
            total,
        })
    }
}

fn run_hash(run: &RunSummary) -> String {
    let mut hasher = Sha256::new();
    hasher.update(raw_rows(std::slice::from_ref(run)).as_bytes());
    for (us, c) in run.delays.iter() {
        hasher.update(us.to_le_bytes());
        hasher.update(c.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

pub const RESULTS_FILE: &str = "results.csv";
pub const SPIDER_FILE: &str = "spider.csv";
const RAW_HEADER: &str = "deployment,bss,throughput_mbps,airtime,delay_p50_ms,n_delay_samples";
const HIST_HEADER: &str = "delay_us,count";

fn raw_path(dir: &Path, c: Configuration) -> PathBuf {
    dir.join(format!("raw_{c}.csv"))
}

fn hist_path(dir: &Path, c: Configuration) -> PathBuf {
    dir.join(format!("delays_{c}.csv"))
}

fn raw_rows(runs: &[RunSummary]) -> String {
    let mut s = String::new();
    for run in runs {
        for b in &run.bss {
            // shortest round-trip formatting so `report` can re-aggregate exactly
            let p50 = b
                .delay_p50_ms
                .map_or_else(|| "nan".to_string(), |v| v.to_string());
            writeln!(
                s,
                "{},{},{},{},{},{}",
                run.deployment, b.bss, b.throughput_mbps, b.airtime, p50, b.n_delay_samples
            )
            .unwrap();
        }
    }
    s
}

/// Per-BSS raw rows plus the pooled delay histogram of one configuration.
fn write_raw(dir: &Path, c: Configuration, runs: &[RunSummary]) -> Result<()> {
    fs::write(
        raw_path(dir, c),
        format!("{RAW_HEADER}\n{}", raw_rows(runs)),
    )?;
    let mut pooled = DelayHistogram::default();
    runs.iter().for_each(|r| pooled.merge(&r.delays));
    let mut s = format!("{HIST_HEADER}\n");
    for (us, count) in pooled.iter() {
        writeln!(s, "{us},{count}").unwrap();
    }
    fs::write(hist_path(dir, c), s)?;
    Ok(())
}

fn fmt_percentiles(p: Option<&Percentiles>) -> [String; 4] {
    match p {
        Some(p) => [
            format!("{:.6}", p.p25),
            format!("{:.6}", p.p50),
            format!("{:.6}", p.p75),
            p.n_samples.to_string(),
        ],
        None => ["nan".into(), "nan".into(), "nan".into(), "0".into()],
    }
}

pub fn results_csv(results: &[ConfigurationResult]) -> String {
    let mut s = String::from("config,metric,p25,p50,p75,n_samples\n");
    for r in results {
        for (metric, p) in [
            ("throughput_mbps", Some(&r.report.throughput)),
            ("latency_ms", r.report.latency.as_ref()),
            ("airtime", Some(&r.report.airtime)),
        ] {
            let [a, b, c, n] = fmt_percentiles(p);
            writeln!(s, "{},{metric},{a},{b},{c},{n}", r.configuration).unwrap();
        }
    }
    s
}

/// Nine axes per configuration: reliability, median and peak of
/// throughput, latency and airtime. Latency reliability is the pooled 25th
/// percentile of head-of-line delay.
pub fn spider_csv(results: &[ConfigurationResult]) -> String {
    let mut s = String::from(
        "config,throughput_reliability_mbps,throughput_median_mbps,throughput_peak_mbps,\
latency_reliability_ms,latency_median_ms,latency_peak_ms,\
airtime_reliability,airtime_median,airtime_peak\n",
    );
    for r in results {
        let [t25, t50, t75, _] = fmt_percentiles(Some(&r.report.throughput));
        let [l25, l50, l75, _] = fmt_percentiles(r.report.latency.as_ref());
        let [a25, a50, a75, _] = fmt_percentiles(Some(&r.report.airtime));
        writeln!(
            s,
            "{},{t25},{t50},{t75},{l25},{l50},{l75},{a25},{a50},{a75}",
            r.configuration
        )
        .unwrap();
    }
    s
}

fn write_reports(dir: &Path, results: &[ConfigurationResult], spider: bool) -> Result<()> {
    fs::write(dir.join(RESULTS_FILE), results_csv(results))?;
    if spider {
        fs::write(dir.join(SPIDER_FILE), spider_csv(results))?;
    }
    Ok(())
}

fn parse_field<T: FromStr>(path: &Path, line: usize, field: &str, text: &str) -> Result<T> {
    text.parse().map_err(|_| Error::Record {
        path: path.to_path_buf(),
        message: format!("line {line}: bad {field} `{text}`"),
    })
}

fn read_runs(dir: &Path, c: Configuration) -> Result<Vec<RunSummary>> {
    let path = raw_path(dir, c);
    let text = fs::read_to_string(&path)?;
    let mut runs: Vec<RunSummary> = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Record {
                path,
                message: format!("line {}: expected 6 fields", n + 1),
            });
        }
        let deployment: u32 = parse_field(&path, n + 1, "deployment", fields[0])?;
        let p50: f64 = parse_field(&path, n + 1, "delay_p50_ms", fields[4])?;
        let summary = BssSummary {
            bss: parse_field(&path, n + 1, "bss", fields[1])?,
            throughput_mbps: parse_field(&path, n + 1, "throughput_mbps", fields[2])?,
            airtime: parse_field(&path, n + 1, "airtime", fields[3])?,
            delay_p50_ms: (!p50.is_nan()).then_some(p50),
            n_delay_samples: parse_field(&path, n + 1, "n_delay_samples", fields[5])?,
        };
        match runs.last_mut() {
            Some(r) if r.deployment == deployment => r.bss.push(summary),
            _ => runs.push(RunSummary {
                deployment,
                bss: vec![summary],
                delays: DelayHistogram::default(),
            }),
        }
    }

    // the pooled histogram is attached to the first run; aggregation only
    // ever sees the merged total
    let path = hist_path(dir, c);
    let text = fs::read_to_string(&path)?;
    if let Some(first) = runs.first_mut() {
        for (n, line) in text.lines().enumerate().skip(1) {
            let (us, count) = line.split_once(',').ok_or_else(|| Error::Record {
                path: path.clone(),
                message: format!("line {}: expected 2 fields", n + 1),
            })?;
            first.delays.add_us(
                parse_field(&path, n + 1, "delay_us", us)?,
                parse_field(&path, n + 1, "count", count)?,
            );
        }
    }
    Ok(runs)
}

/// Re-aggregates the raw files of a previous batch in `dir`, rewriting the
/// same reports `run_batch` produced.
pub fn report(dir: &Path, spider: bool) -> Result<Vec<ConfigurationResult>> {
    let mut results = Vec::new();
    for c in Configuration::ALL {
        if !raw_path(dir, c).exists() {
            continue;
        }
        let runs = read_runs(dir, c)?;
        let report = aggregate(&runs)?;
        results.push(ConfigurationResult {
            configuration: c,
            runs,
            report,
        });
    }
    write_reports(dir, &results, spider)?;
    Ok(results)
}

pub fn attempts_csv(attempts: &[TransmissionAttempt]) -> String {
    let mut s = String::from("start_us,end_us,tx,rx,power_dbm,mcs,bits,outcome\n");
    for a in attempts {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            a.start, a.end, a.tx_node, a.rx_node, a.tx_power_dbm, a.mcs, a.bits, a.outcome
        )
        .unwrap();
    }
    s
}

pub fn agent_log_csv(log: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,bss,arm_index,cca_dbm,txpower_dbm,reward,epsilon\n");
    for r in log {
        writeln!(
            s,
            "{},{},{},{},{},{:.6},{:.6}",
            r.epoch,
            r.bss,
            r.arm_index,
            r.config.cca_dbm,
            r.config.tx_power_dbm,
            r.reward,
            r.epsilon
        )
        .unwrap();
    }
    s
}

pub fn kpi_csv(kpis: &[KpiRecord]) -> String {
    let run = RunSummary::from_records(0, kpis);
    format!("{RAW_HEADER}\n{}", raw_rows(std::slice::from_ref(&run)))
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wifi_sr::actions::{build_action_space, effective_config, SrMode};
use wifi_sr::bandit::RewardKind;
use wifi_sr::experiment::{
    agent_log_csv, attempts_csv, kpi_csv, report, run_batch, run_single, Configuration,
    ExperimentPlan, RunOptions, RESULTS_FILE,
};
use wifi_sr::scenario::{
    generate_deployment, load_config, validate_config, AgentMode, ScenarioConfig,
};
use wifi_sr::Error;

#[derive(Parser)]
#[command(
    name = "wifi-sr",
    version,
    about = "Bandit-driven spatial reuse in overlapping 802.11 BSSs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// List the arms of an action space with their effective power.
    DescribeActions {
        #[arg(long)]
        mode: SrMode,
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Check a config file and print every violation.
    Validate {
        #[command(flatten)]
        config: ConfigArg,
    },
    /// Dump the deployments of a batch as CSV.
    Generate {
        #[command(flatten)]
        config: ConfigArg,
        /// Root seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a single deployment.
    Run {
        #[command(flatten)]
        config: ConfigArg,
        /// Deployment seed; defaults to the config's root seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        mode: Option<AgentMode>,
        #[arg(long)]
        reward: Option<RewardKind>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write every popped event to events.tsv.
        #[arg(long)]
        trace_events: bool,
        /// Write every transmission attempt to attempts.csv.
        #[arg(long)]
        trace_attempts: bool,
        /// Write per-epoch agent decisions to agent_log.csv.
        #[arg(long)]
        agent_log: bool,
    },
    /// Run configurations over all deployments and write percentile reports.
    Experiment {
        #[command(flatten)]
        config: ConfigArg,
        /// Root seed; overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        /// Comma-separated subset of dcf,11axsr-dec,11axsr-coord,free-dec,free-coord.
        #[arg(long, value_delimiter = ',')]
        configs: Option<Vec<Configuration>>,
        /// Also write the nine-axis spider table.
        #[arg(long)]
        spider: bool,
    },
    /// Re-aggregate the raw CSVs of a previous experiment.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        spider: bool,
    },
}

fn load(arg: &ConfigArg) -> Result<ScenarioConfig, Error> {
    let config = match &arg.config {
        Some(path) => load_config(path)?,
        None => ScenarioConfig::default(),
    };
    validate_config(&config).map_err(Error::InvalidConfig)?;
    Ok(config)
}

fn describe_actions(mode: SrMode, config: &ScenarioConfig) -> Result<(), Error> {
    println!("index\tcca_dbm\ttx_power_dbm");
    for (i, arm) in build_action_space(mode, config.radio.tx_power_dbm)
        .iter()
        .enumerate()
    {
        let eff = effective_config(arm, mode, &config.radio, &config.power_cap())?;
        println!("{i}\t{}\t{}", eff.cca_dbm, eff.tx_power_dbm);
    }
    Ok(())
}

fn generate(config: &ScenarioConfig, out: Option<&Path>) -> Result<(), Error> {
    let mut csv = String::from("deployment,seed,bss,ap_x,ap_y,sta_x,sta_y\n");
    for i in 0..config.scenario.n_deployments {
        let seed = config.deployment_seed(i);
        for (b, bss) in generate_deployment(seed, config).bss.iter().enumerate() {
            csv.push_str(&format!(
                "{i},{seed},{b},{},{},{},{}\n",
                bss.ap.x, bss.ap.y, bss.sta.x, bss.sta.y
            ));
        }
    }
    match out {
        Some(path) => fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

struct RunArgs {
    seed: Option<u64>,
    mode: Option<AgentMode>,
    reward: Option<RewardKind>,
    out: PathBuf,
    trace_events: bool,
    trace_attempts: bool,
    agent_log: bool,
}

fn run(config: &ScenarioConfig, args: RunArgs) -> Result<(), Error> {
    let configuration = Configuration {
        mode: args.mode.unwrap_or(config.agent.mode),
        reward: args.reward.unwrap_or(config.agent.reward),
    };
    let configuration = if configuration.mode == AgentMode::Dcf {
        Configuration::DCF
    } else {
        configuration
    };
    fs::create_dir_all(&args.out)?;
    let mut options = RunOptions::default();
    if args.trace_events {
        let file = File::create(args.out.join("events.tsv"))?;
        options.event_trace = Some(Box::new(BufWriter::new(file)));
    }
    let seed = args.seed.unwrap_or(config.seed);
    let result = run_single(config, seed, configuration, options)?;
    fs::write(args.out.join("kpis.csv"), kpi_csv(&result.kpis))?;
    if args.trace_attempts {
        fs::write(
            args.out.join("attempts.csv"),
            attempts_csv(&result.attempts),
        )?;
    }
    if args.agent_log {
        fs::write(
            args.out.join("agent_log.csv"),
            agent_log_csv(&result.agent_log),
        )?;
    }
    println!("configuration {configuration}, deployment seed {seed}");
    for k in &result.kpis {
        println!(
            "bss {}: throughput {:.2} Mb/s, airtime {:.3}, {} delay samples",
            k.bss,
            k.throughput_mbps,
            k.airtime_fraction,
            k.delay_ms_samples.len()
        );
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::DescribeActions { mode, config } => describe_actions(mode, &load(&config)?),
        Command::Validate { config } => {
            load(&config)?;
            println!("ok");
            Ok(())
        }
        Command::Generate { config, seed, out } => {
            let mut config = load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            generate(&config, out.as_deref())
        }
        Command::Run {
            config,
            seed,
            mode,
            reward,
            out,
            trace_events,
            trace_attempts,
            agent_log,
        } => run(
            &load(&config)?,
            RunArgs {
                seed,
                mode,
                reward,
                out,
                trace_events,
                trace_attempts,
                agent_log,
            },
        ),
        Command::Experiment {
            config,
            seed,
            out,
            parallel,
            configs,
            spider,
        } => {
            let mut config = load(&config)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let plan = ExperimentPlan {
                config,
                configurations: configs.unwrap_or_else(|| Configuration::ALL.to_vec()),
                out_dir: out.clone(),
                parallelism: parallel,
                spider,
            };
            run_batch(&plan)?;
            print!("{}", fs::read_to_string(out.join(RESULTS_FILE))?);
            Ok(())
        }
        Command::Report { out, spider } => {
            report(&out, spider)?;
            print!("{}", fs::read_to_string(out.join(RESULTS_FILE))?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

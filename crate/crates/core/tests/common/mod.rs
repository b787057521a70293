#![allow(dead_code)]

use wifi_sr::metrics::{collect_run, KpiRecord};
use wifi_sr::phy::Position;
use wifi_sr::scenario::{Bss, Deployment, ScenarioConfig};
use wifi_sr::sim::{Controller, Network, SimOutput};

type Point = (f64, f64);

/// One BSS per `(ap, sta)` pair.
pub fn deployment(seed: u64, links: &[(Point, Point)]) -> Deployment {
    Deployment {
        seed,
        bss: links
            .iter()
            .map(|&((ax, ay), (sx, sy))| Bss {
                ap: Position::new(ax, ay),
                sta: Position::new(sx, sy),
            })
            .collect(),
    }
}

/// Defaults resized to `n_bss` BSSs simulated for `sim_time_s` seconds.
pub fn config(n_bss: u32, sim_time_s: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.scenario.n_bss = n_bss;
    c.scenario.sim_time_s = sim_time_s;
    c
}

pub fn simulate(
    config: &ScenarioConfig,
    deployment: &Deployment,
    controllers: &[Controller],
) -> (SimOutput, Vec<KpiRecord>) {
    let out = Network::new(config, deployment, controllers).run().unwrap();
    let kpis = collect_run(&out.attempts, config);
    (out, kpis)
}

/// Two BSSs 10 m apart with stations 1 m outside; every node hears every
/// other above -82 dBm.
pub fn symmetric_pair(seed: u64) -> Deployment {
    deployment(
        seed,
        &[((5.0, 10.0), (4.0, 10.0)), ((15.0, 10.0), (16.0, 10.0))],
    )
}

/// A learning BSS at the origin and a static interferer whose signal
/// arrives at -76 dBm: sensed at C in {-82, -78}, ignored above.
pub fn learner_and_interferer(seed: u64) -> Deployment {
    deployment(
        seed,
        &[((0.0, 0.0), (-1.5, 0.0)), ((12.3, 0.0), (13.8, 0.0))],
    )
}

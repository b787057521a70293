use wifi_sr::scenario::{generate_deployment, ScenarioConfig};

/// Two-sided Kolmogorov-Smirnov statistic against a uniform CDF on [lo, hi].
fn ks_uniform(mut samples: Vec<f64>, lo: f64, hi: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = (x - lo) / (hi - lo);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

// asymptotic critical value at alpha = 0.01
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[test]
fn station_distances_and_ap_positions_are_uniform() {
    let config = ScenarioConfig::default();
    let side = config.scenario.side_m;
    let mut distances = Vec::new();
    let mut xs = Vec::new();
    for seed in 0..2500 {
        for bss in generate_deployment(seed, &config).bss {
            assert!(bss.sta.inside_square(side));
            distances.push(bss.ap.distance(&bss.sta));
            xs.push(bss.ap.x);
        }
    }
    let n = distances.len();
    assert_eq!(n, 10_000);
    let d = ks_uniform(distances, 1.0, 5.0);
    assert!(d < ks_critical(n), "distance KS {d}");
    let d = ks_uniform(xs, 0.0, side);
    assert!(d < ks_critical(n), "AP x KS {d}");
}

#[test]
fn deployments_depend_only_on_their_seed() {
    let config = ScenarioConfig::default();
    assert_eq!(
        generate_deployment(11, &config),
        generate_deployment(11, &config)
    );
    assert_ne!(
        generate_deployment(11, &config),
        generate_deployment(12, &config)
    );
    let mut other = config.clone();
    other.agent.epsilon0 = 0.5;
    assert_eq!(
        generate_deployment(11, &config),
        generate_deployment(11, &other)
    );
}

use std::time::Instant;

use erto_core::config::ExperimentConfig;
use erto_core::routing::Mode;
use erto_core::sim::build_scenario;

fn cell(n: u32, pairs: u32, mode: Mode, dur: f64, rate: f64, seed: u64) {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.duration_s = dur;
    cfg.sim.cbr_rate_pps = rate;
    cfg.sim.hello_period_s = 5.0;
    cfg.energy.initial_j = 10.0;
    cfg.ga.population = 32;
    cfg.ga.generations = 40;
    let t0 = Instant::now();
    let mut w = build_scenario(&cfg, mode, n, pairs, seed).unwrap();
    let m = w.run();
    println!(
        "n={n} pairs={pairs} mode={mode} rate={rate}: {:.1}s wall, sent={} pdr={:.4} cfs={:.2} dup={} drops={:?} residual={:.1} delay={:.3} dtx={}",
        t0.elapsed().as_secs_f64(),
        m.sent,
        m.pdr.unwrap_or(f64::NAN),
        m.cfs_mean.unwrap_or(f64::NAN),
        m.duplicates,
        m.drops_by_reason,
        m.residual_j,
        m.delay_s.unwrap_or(f64::NAN),
        m.data_tx,
    );
}

#[test]
#[ignore]
fn probe() {
    for mode in [Mode::Exor, Mode::Erto] {
        cell(40, 20, mode, 300.0, 0.25, 11);
        cell(80, 20, mode, 300.0, 0.25, 11);
        cell(120, 20, mode, 300.0, 0.25, 11);
        cell(100, 20, mode, 300.0, 0.25, 11);
        cell(100, 60, mode, 300.0, 0.25, 11);
        cell(100, 100, mode, 300.0, 0.25, 11);
    }
}

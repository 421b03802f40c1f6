use erto_core::config::ExperimentConfig;
use erto_core::routing::Mode;
use erto_core::sim::build_scenario;
use std::time::Instant;

#[test]
#[ignore]
fn probe2() {
    let (mut mx, mut me) = (0.0, 0.0);
    for seed in 1..=3u64 {
        for &(mode, tag) in &[(Mode::Exor, "X"), (Mode::Erto, "E")] {
            let mut cfg = ExperimentConfig::default();
            cfg.sim.duration_s = 300.0;
            cfg.sim.cbr_rate_pps = 0.1;
            cfg.sim.hello_period_s = 5.0;
            cfg.energy.initial_j = 100.0;
            cfg.ga.population = 32;
            cfg.ga.generations = 40;
            let t = Instant::now();
            let mut w = build_scenario(&cfg, mode, 100, 60, seed).unwrap();
            let m = w.run();
            let p = m.pdr.unwrap_or(f64::NAN);
            if tag == "X" { mx += p } else { me += p }
            println!("pairs=60 seed={seed} {tag}: {p:.4} [{:.0}s]", t.elapsed().as_secs_f64());
        }
    }
    println!("pairs=60 MEANS: X {:.4} | E {:.4}", mx / 3.0, me / 3.0);
}

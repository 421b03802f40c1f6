//! Statistical verification suites.
//!
//! Each suite re-derives one closed-form model with an oracle that shares no
//! arithmetic with it — Monte-Carlo sampling of the underlying random
//! process, or exhaustive grid evaluation — and reports the measured error
//! against a fixed tolerance. All suites are deterministic in `seed`.
//!
//! | suite       | closed form under test        | oracle                         | tolerance            |
//! |-------------|-------------------------------|--------------------------------|----------------------|
//! | `linkmodel` | per-link delivery probability | fading/activity MC, 10⁶ draws  | 3 standard errors    |
//! | `area`      | two-circle lens area          | rejection sampling, 2·10⁶ pts  | 0.5% relative        |
//! | `degree`    | candidate-count pmf           | 10⁵ uniform placements         | total variation 0.02 |
//! | `energy`    | expected one-hop cost         | retransmit-process MC, 10⁵     | 2% relative          |
//! | `pareto`    | genetic-search front          | 200×11 exhaustive grid         | L∞ 0.01, HV ≥ 98%    |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::degree::{empirical_degree_check, p_rnd, poisson_pmf};
use crate::energy::{
    expected_attempts, expected_cost, simulate_attempts, simulate_cost, EnergyParams,
};
use crate::error::{Error, Result};
use crate::geometry::{candidate_area, candidate_area_montecarlo, ForwardingRegion, Position, RangeMap};
use crate::linkmodel::{
    p_si, p_si_montecarlo, Interferer, InterfererSource, PredictionContext, RadioParams,
};
use crate::pareto::{
    brute_force_front, coverage_linf, hypervolume, nsga2_front, GaConfig, GridSpec,
    OptimizationContext,
};
use crate::seedmix::mix;

/// One named check with its measured error, formatted for the report line.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    /// Human-readable measured-vs-allowed statement.
    pub detail: String,
}

/// Every check of one suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// One line per check plus a suite verdict, as printed by the CLI.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let mark = if c.pass { "pass" } else { "FAIL" };
            out.push_str(&format!("[{mark}] {}::{} — {}\n", self.suite, c.name, c.detail));
        }
        let verdict = if self.pass() { "passed" } else { "FAILED" };
        out.push_str(&format!(
            "suite {}: {} ({}/{} checks)\n",
            self.suite,
            verdict,
            self.checks.iter().filter(|c| c.pass).count(),
            self.checks.len()
        ));
        out
    }
}

/// Suites in the order `all` runs them.
pub const SUITE_NAMES: [&str; 5] = ["linkmodel", "area", "degree", "energy", "pareto"];

/// Runs one suite by name (`"all"` is handled by the caller via
/// [`SUITE_NAMES`]).
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    match name {
        "linkmodel" => Ok(verify_linkmodel(seed)),
        "area" => Ok(verify_area(seed)),
        "degree" => Ok(verify_degree(seed)),
        "energy" => Ok(verify_energy(seed)),
        "pareto" => Ok(verify_pareto(seed)),
        other => Err(Error::InvalidParameter(format!(
            "unknown verification suite '{other}' (expected one of {} or all)",
            SUITE_NAMES.join(", ")
        ))),
    }
}

fn table_radio() -> RadioParams {
    RadioParams {
        beta: 3.16,
        eta: 4.0,
        k: 1e-4,
        g: 10.0,
        p_n: 1e-15,
    }
}

fn table_energy() -> EnergyParams {
    EnergyParams {
        e_r: 0.05,
        xi: 1.0,
        packet_bits: 1024.0,
        bandwidth_bps: 15000.0,
    }
}

fn table_range_map() -> RangeMap {
    RangeMap::new(200.0, 0.8, 4.0).expect("reference anchor is valid")
}

/// Closed-form link delivery probability vs. direct Monte-Carlo sampling of
/// the fading and interferer-activity variables: 50 random parameter draws,
/// 10⁶ samples each, agreement within 3 standard errors.
pub fn verify_linkmodel(seed: u64) -> SuiteReport {
    const DRAWS: usize = 50;
    const SAMPLES: u64 = 1_000_000;
    let params = table_radio();
    let mut rng = ChaCha12Rng::seed_from_u64(mix(seed, 1));
    let mut checks = Vec::with_capacity(DRAWS);
    for case in 0..DRAWS {
        let p_ts = rng.random_range(0.1..=0.8);
        let d_rs = rng.random_range(30.0..250.0);
        let n_int = rng.random_range(0..=4usize);
        let interferers: Vec<Interferer> = (0..n_int)
            .map(|_| Interferer {
                p_ti: rng.random_range(0.1..=0.8),
                d_ri: rng.random_range(50.0..500.0),
                activity: rng.random_range(0.0..=1.0),
            })
            .collect();
        let closed = p_si(p_ts, d_rs, &interferers, &params).expect("draw is in the valid domain");
        let mc = p_si_montecarlo(p_ts, d_rs, &interferers, &params, SAMPLES, mix(seed, 100 + case as u64))
            .expect("draw is in the valid domain");
        // The binomial standard error estimated from the sample can hit zero
        // when every draw succeeds; the model-side error never does.
        let se_model = (closed * (1.0 - closed) / SAMPLES as f64).sqrt();
        let se = mc.std_error.max(se_model);
        let err = (closed - mc.estimate).abs();
        let allowed = 3.0 * se;
        checks.push(CheckResult {
            name: format!("draw{case:02}_p{p_ts:.2}_d{d_rs:.0}_i{n_int}"),
            pass: err <= allowed,
            detail: format!(
                "closed {closed:.6}, mc {:.6} ± {se:.2e}: |err| {err:.2e} ≤ 3σ {allowed:.2e}",
                mc.estimate
            ),
        });
    }
    SuiteReport {
        suite: "linkmodel",
        checks,
    }
}

/// Closed-form lens area vs. rejection sampling: 100 random `(r_s, d_ds)`
/// pairs — every fifth one in the covered-disk regime `r_s ≥ 2·d_ds` — each
/// within 0.5% relative at 2·10⁶ points.
pub fn verify_area(seed: u64) -> SuiteReport {
    const PAIRS: usize = 100;
    const SAMPLES: u64 = 2_000_000;
    const REL_TOL: f64 = 0.005;
    let mut rng = ChaCha12Rng::seed_from_u64(mix(seed, 2));
    let mut checks = Vec::with_capacity(PAIRS);
    for case in 0..PAIRS {
        let (r_s, d_ds) = if case % 5 == 4 {
            // Clamped regime: the sender's disk covers the whole
            // destination disk and the lens is exactly π·d_ds².
            let d: f64 = rng.random_range(20.0..150.0);
            let r = rng.random_range(2.0 * d..=500.0f64.max(2.0 * d + 1.0));
            (r, d)
        } else {
            let r: f64 = rng.random_range(20.0..400.0);
            let d = rng.random_range(r * 0.55..600.0f64.max(r * 0.55 + 1.0));
            (r, d)
        };
        let closed = candidate_area(r_s, d_ds).expect("positive radii");
        let mc = candidate_area_montecarlo(r_s, d_ds, SAMPLES, mix(seed, 200 + case as u64))
            .expect("positive radii");
        let rel = (closed - mc).abs() / closed;
        checks.push(CheckResult {
            name: format!("pair{case:02}_r{r_s:.0}_d{d_ds:.0}"),
            pass: rel <= REL_TOL,
            detail: format!("closed {closed:.1} m², mc {mc:.1} m²: rel err {rel:.2e} ≤ {REL_TOL:.1e}"),
        });
    }
    SuiteReport {
        suite: "area",
        checks,
    }
}

/// Candidate-degree pmf vs. empirical placement histograms (10⁵ placements,
/// total variation ≤ 0.02) plus pmf normalization to 1 within 1e−9,
/// including a mean large enough to require the log-space evaluation.
pub fn verify_degree(seed: u64) -> SuiteReport {
    const PLACEMENTS: u64 = 100_000;
    const TV_TOL: f64 = 0.02;
    let map = table_range_map();
    let mut checks = Vec::new();
    // Three densities spanning sparse to dense candidate areas, on the
    // Table-scale geometry (0.8 W sender, 160–320 m to the destination).
    let geometries: [(f64, f64, f64); 3] = [
        // (p_ts, d_ds, target mean candidates in the lens)
        (0.8, 200.0, 2.5),
        (0.8, 160.0, 6.0),
        (0.6, 320.0, 11.0),
    ];
    for (i, &(p_ts, d_ds, mean)) in geometries.iter().enumerate() {
        let r_s = map.range_of_power(p_ts).expect("power is in band");
        let area = candidate_area(r_s, d_ds).expect("positive radii");
        let rho = mean / area;
        let sender = Position::new(500.0, 500.0);
        let destination = Position::new(500.0 + d_ds, 500.0);
        let region = ForwardingRegion::new(sender, destination, r_s).expect("valid lens");
        let hist = empirical_degree_check(PLACEMENTS, rho, &region, mix(seed, 300 + i as u64))
            .expect("valid deployment");
        let tv = hist.total_variation(|n| {
            p_rnd(p_ts, n, d_ds, rho, &map).expect("pmf arguments are valid")
        });
        checks.push(CheckResult {
            name: format!("tv_mean{mean:.1}"),
            pass: tv <= TV_TOL,
            detail: format!("ρΔ = {mean:.1}: total variation {tv:.4} ≤ {TV_TOL}"),
        });
    }
    // Normalization, including a mean far beyond naive factorial range.
    for mean in [0.37f64, 7.3, 450.0] {
        let upto = (12.0 * mean).ceil() as u32 + 50;
        let total: f64 = (0..=upto).map(|n| poisson_pmf(mean, n)).sum();
        let err = (total - 1.0).abs();
        checks.push(CheckResult {
            name: format!("normalization_mean{mean}"),
            pass: err <= 1e-9,
            detail: format!("Σ pmf(0..={upto}) = {total:.12}: |err| {err:.2e} ≤ 1e-9"),
        });
    }
    SuiteReport {
        suite: "degree",
        checks,
    }
}

/// Closed-form expected attempts and one-hop cost vs. simulation of the
/// retransmit-until-success process: 20 random configurations, 10⁵ trials,
/// 2% relative agreement; and the inverse-square law in the delivery
/// probability holds bitwise.
pub fn verify_energy(seed: u64) -> SuiteReport {
    const CONFIGS: usize = 20;
    const TRIALS: u64 = 100_000;
    const REL_TOL: f64 = 0.02;
    let params = table_energy();
    let mut rng = ChaCha12Rng::seed_from_u64(mix(seed, 4));
    let mut checks = Vec::new();
    for case in 0..CONFIGS {
        let p_ts = rng.random_range(0.1..=0.8);
        let n_rel = rng.random_range(1..=8u32);
        let p_sc = rng.random_range(0.15..=0.99);
        let t_closed = expected_attempts(p_sc).expect("probability is in band");
        let t_mc = simulate_attempts(p_sc, TRIALS, mix(seed, 400 + case as u64))
            .expect("probability is in band");
        let t_rel = (t_closed - t_mc).abs() / t_closed;
        let c_closed = expected_cost(p_ts, n_rel, p_sc, &params).expect("config is valid");
        let c_mc = simulate_cost(p_ts, n_rel, p_sc, &params, TRIALS, mix(seed, 500 + case as u64))
            .expect("config is valid");
        let c_rel = (c_closed - c_mc).abs() / c_closed;
        checks.push(CheckResult {
            name: format!("config{case:02}_n{n_rel}_psc{p_sc:.2}"),
            pass: t_rel <= REL_TOL && c_rel <= REL_TOL,
            detail: format!(
                "attempts rel err {t_rel:.2e}, cost rel err {c_rel:.2e} ≤ {REL_TOL:.0e}"
            ),
        });
        // C(p_sc) = C(1)/p_sc² must hold exactly, not statistically: both
        // sides reduce to the same floating-point expression.
        let unit = expected_cost(p_ts, n_rel, 1.0, &params).expect("config is valid");
        let scaled = unit / (p_sc * p_sc);
        checks.push(CheckResult {
            name: format!("config{case:02}_inverse_square"),
            pass: scaled == c_closed,
            detail: format!("C(1)/p² {scaled:.12e} == C(p) {c_closed:.12e} bitwise"),
        });
    }
    SuiteReport {
        suite: "energy",
        checks,
    }
}

/// One randomized desk-scale optimization context: sender at the origin, a
/// destination 250–400 m out, a corridor of relay nodes, up to two foreign
/// interferer sources.
fn desk_context(rng: &mut ChaCha12Rng) -> OptimizationContext {
    let d_ds = rng.random_range(250.0..400.0);
    let destination = Position::new(d_ds, 0.0);
    let mut nodes = vec![(0u32, Position::new(0.0, 0.0)), (1u32, destination)];
    let relays = rng.random_range(10..=18u32);
    for i in 0..relays {
        // Scatter inside the sender's reachable half-plane toward the
        // destination, where candidates actually live.
        let x = rng.random_range(20.0..220.0);
        let y = rng.random_range(-140.0..140.0);
        nodes.push((2 + i, Position::new(x, y)));
    }
    let n_sources = rng.random_range(0..=2u32);
    let sources = (0..n_sources)
        .map(|i| InterfererSource {
            id: 100 + i,
            position: Position::new(rng.random_range(-100.0..500.0), rng.random_range(120.0..400.0)),
            p_ti: rng.random_range(0.1..=0.8),
            activity: rng.random_range(0.1..=1.0),
        })
        .collect();
    OptimizationContext {
        link: PredictionContext {
            sender: 0,
            destination: 1,
            nodes,
            sources,
            radio: table_radio(),
            range_map: table_range_map(),
        },
        rho: rng.random_range(5e-5..1.5e-4),
        energy: table_energy(),
        p_min: 0.1,
        p_max: 0.8,
        n_cap: 10,
    }
}

/// Genetic front vs. exhaustive 200-power × 11-degree grid front on 10
/// random desk contexts: every grid-front point within normalized L∞ 0.01
/// of a genetic point, and genetic hypervolume ≥ 98% of the grid's.
pub fn verify_pareto(seed: u64) -> SuiteReport {
    const CONTEXTS: usize = 10;
    const LINF_TOL: f64 = 1e-2;
    const HV_RATIO: f64 = 0.98;
    let grid = GridSpec {
        power_steps: 200,
        n_rel_max: 10,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(mix(seed, 5));
    let mut checks = Vec::new();
    for case in 0..CONTEXTS {
        let ctx = desk_context(&mut rng);
        let reference = brute_force_front(&ctx, &grid).expect("desk context has a feasible front");
        let ga = GaConfig {
            population: 400,
            generations: 300,
            seed: mix(seed, 600 + case as u64),
            ..GaConfig::default()
        };
        let approx = nsga2_front(&ctx, &ga).expect("desk context has a feasible front");
        let ref_objs: Vec<[f64; 3]> = reference.solutions.iter().map(|s| s.objectives).collect();
        let ga_objs: Vec<[f64; 3]> = approx.solutions.iter().map(|s| s.objectives).collect();
        let linf = coverage_linf(&ref_objs, &ga_objs);
        // Reference point: componentwise worst over both fronts plus a 10%
        // margin of the reference front's span, so every point counts.
        let mut refpt = [f64::NEG_INFINITY; 3];
        for p in ref_objs.iter().chain(ga_objs.iter()) {
            for j in 0..3 {
                refpt[j] = refpt[j].max(p[j]);
            }
        }
        for j in 0..3 {
            let lo = ref_objs.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
            let span = (refpt[j] - lo).max(1e-12);
            refpt[j] += 0.1 * span;
        }
        let hv_ref = hypervolume(&ref_objs, refpt);
        let hv_ga = hypervolume(&ga_objs, refpt);
        let ratio = if hv_ref > 0.0 { hv_ga / hv_ref } else { 1.0 };
        checks.push(CheckResult {
            name: format!("context{case:02}"),
            pass: linf <= LINF_TOL && ratio >= HV_RATIO,
            detail: format!(
                "grid {} pts, genetic {} pts: L∞ {linf:.2e} ≤ {LINF_TOL:.0e}, HV ratio {ratio:.4} ≥ {HV_RATIO}",
                ref_objs.len(),
                ga_objs.len()
            ),
        });
    }
    SuiteReport {
        suite: "pareto",
        checks,
    }
}

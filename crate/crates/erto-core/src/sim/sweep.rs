//! Experiment sweeps: the cross-product of algorithms × node counts ×
//! flow counts × replications, run in parallel and reported as CSV plus a
//! reproducibility manifest.
//!
//! Seeding: replication `r` of scenario cell `s` runs from
//! `mix(mix(base_seed, s), r)`, and **both** algorithms of that cell reuse
//! the same seed, so they face the identical placement, flow choice, and
//! fading stream — the comparison is paired. Results are assembled in task
//! order, which makes the CSV byte-identical for any worker count.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::routing::Mode;
use crate::seedmix::mix;

use super::engine::build_scenario;
use super::metrics::RunMetrics;

/// Everything needed to reproduce a sweep bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    /// SHA-256 of the canonical configuration serialization.
    pub config_hash: String,
    pub base_seed: u64,
    /// `"<scenario_id>:r<replication>" -> seed`; shared by every algorithm.
    pub cell_seeds: BTreeMap<String, u64>,
    pub tool_version: String,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// One CSV row: a single run and where it sat in the sweep grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub scenario_id: String,
    pub algorithm: Mode,
    pub n_nodes: u32,
    pub n_cbr: u32,
    pub replication: u32,
    pub metrics: RunMetrics,
    /// Present when the sweep ran with tracing enabled.
    pub trace: Option<String>,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl MetricsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            self.scenario_id,
            self.algorithm,
            self.n_nodes,
            self.n_cbr,
            self.replication,
            opt_cell(self.metrics.pdr),
            opt_cell(self.metrics.delay_s),
            format_args!("{:.6}", self.metrics.throughput_bps),
            format_args!("{:.6}", self.metrics.residual_j),
            opt_cell(self.metrics.cfs_mean),
            self.metrics.duplicates,
            self.metrics.drops,
        )
    }
}

pub const CSV_HEADER: &str =
    "scenario_id,algorithm,n_nodes,n_cbr,replication,pdr,delay_s,throughput_bps,residual_j,cfs_mean,duplicates,drops\n";

/// Mean and sample standard deviation of one metric over the replications
/// of one `(scenario, algorithm)` group. `n` counts the replications where
/// the metric was defined.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario_id: String,
    pub algorithm: Mode,
    pub metric: &'static str,
    pub n: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

/// All runs of a sweep plus the manifest that reproduces them.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<MetricsRecord>,
    pub manifest: Manifest,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl SweepResult {
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        for row in &self.rows {
            out.push_str(&row.csv_row());
        }
        out
    }

    /// Per-(scenario, algorithm) mean/std over replications, in row order.
    pub fn summaries(&self) -> Vec<SummaryRow> {
        let mut groups: Vec<(String, Mode)> = Vec::new();
        for r in &self.rows {
            let key = (r.scenario_id.clone(), r.algorithm);
            if !groups.contains(&key) {
                groups.push(key);
            }
        }
        let metrics: [(&'static str, fn(&RunMetrics) -> Option<f64>); 7] = [
            ("pdr", |m| m.pdr),
            ("delay_s", |m| m.delay_s),
            ("throughput_bps", |m| Some(m.throughput_bps)),
            ("residual_j", |m| Some(m.residual_j)),
            ("cfs_mean", |m| m.cfs_mean),
            ("duplicates", |m| Some(m.duplicates as f64)),
            ("drops", |m| Some(m.drops as f64)),
        ];
        let mut out = Vec::new();
        for (sid, alg) in groups {
            for (name, get) in metrics {
                let values: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.scenario_id == sid && r.algorithm == alg)
                    .filter_map(|r| get(&r.metrics))
                    .collect();
                let (mean, std) = if values.is_empty() {
                    (None, None)
                } else {
                    let (m, s) = mean_std(&values);
                    (Some(m), Some(s))
                };
                out.push(SummaryRow {
                    scenario_id: sid.clone(),
                    algorithm: alg,
                    metric: name,
                    n: values.len(),
                    mean,
                    std,
                });
            }
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("scenario_id,algorithm,metric,n,mean,std\n");
        for s in self.summaries() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                s.scenario_id,
                s.algorithm,
                s.metric,
                s.n,
                opt_cell(s.mean),
                opt_cell(s.std),
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Task {
    scenario_id: String,
    algorithm: Mode,
    n_nodes: u32,
    n_cbr: u32,
    replication: u32,
    seed: u64,
}

/// Runs the full sweep described by `cfg` on `workers` threads (`0` lets
/// the thread pool pick). Output is independent of `workers`.
pub fn sweep(cfg: &ExperimentConfig, workers: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let base = cfg.sweep.base_seed;
    let mut cell_seeds = BTreeMap::new();
    let mut tasks = Vec::new();
    let mut scenario_idx: u64 = 0;
    for &n_nodes in &cfg.sweep.n_nodes {
        for &n_cbr in &cfg.sweep.n_cbr {
            let scenario_id = format!("n{n_nodes}_c{n_cbr}");
            for rep in 0..cfg.sweep.replications {
                let seed = mix(mix(base, scenario_idx), u64::from(rep));
                cell_seeds.insert(format!("{scenario_id}:r{rep}"), seed);
            }
            for &algorithm in &cfg.sweep.algorithms {
                for rep in 0..cfg.sweep.replications {
                    tasks.push(Task {
                        scenario_id: scenario_id.clone(),
                        algorithm,
                        n_nodes,
                        n_cbr,
                        replication: rep,
                        seed: cell_seeds[&format!("{scenario_id}:r{rep}")],
                    });
                }
            }
            scenario_idx += 1;
        }
    }
    let run_task = |t: &Task| -> Result<MetricsRecord> {
        let mut world = build_scenario(cfg, t.algorithm, t.n_nodes, t.n_cbr, t.seed)?;
        world.set_trace(cfg.output.trace);
        let metrics = world.run();
        Ok(MetricsRecord {
            scenario_id: t.scenario_id.clone(),
            algorithm: t.algorithm,
            n_nodes: t.n_nodes,
            n_cbr: t.n_cbr,
            replication: t.replication,
            metrics,
            trace: world.take_trace(),
        })
    };
    let rows: Vec<MetricsRecord> = if workers == 1 {
        tasks.iter().map(run_task).collect::<Result<_>>()?
    } else {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        pool.install(|| tasks.par_iter().map(run_task).collect::<Result<_>>())?
    };
    let manifest = Manifest {
        config_hash: cfg.config_hash(),
        base_seed: base,
        cell_seeds,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok(SweepResult { rows, manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::metrics::RunMetrics;

    /// Small but non-trivial grid that still finishes in seconds: two node
    /// counts, one flow count, both algorithms, two replications.
    fn tiny_cfg() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.sim.duration_s = 8.0;
        cfg.sim.warmup_s = 2.0;
        cfg.sim.cbr_rate_pps = 1.0;
        cfg.sweep.n_nodes = vec![10, 14];
        cfg.sweep.n_cbr = vec![2];
        cfg.sweep.replications = 2;
        cfg.sweep.base_seed = 7;
        cfg.ga.population = 24;
        cfg.ga.generations = 12;
        cfg
    }

    /// Row order is scenario, then algorithm, then replication, and the
    /// manifest holds one seed per (scenario, replication) cell, shared by
    /// both algorithms of that cell.
    #[test]
    fn grid_rows_and_cell_seeds_are_laid_out_predictably() {
        let cfg = tiny_cfg();
        let result = sweep(&cfg, 1).unwrap();
        let labels: Vec<String> = result
            .rows
            .iter()
            .map(|r| format!("{}/{}/r{}", r.scenario_id, r.algorithm, r.replication))
            .collect();
        assert_eq!(
            labels,
            [
                "n10_c2/erto/r0",
                "n10_c2/erto/r1",
                "n10_c2/exor/r0",
                "n10_c2/exor/r1",
                "n14_c2/erto/r0",
                "n14_c2/erto/r1",
                "n14_c2/exor/r0",
                "n14_c2/exor/r1",
            ]
        );
        let keys: Vec<&str> = result.manifest.cell_seeds.keys().map(|k| k.as_str()).collect();
        assert_eq!(keys, ["n10_c2:r0", "n10_c2:r1", "n14_c2:r0", "n14_c2:r1"]);
        assert_eq!(result.manifest.config_hash, cfg.config_hash());
        assert_eq!(result.manifest.base_seed, 7);
        for row in &result.rows {
            assert!(row.metrics.conserved(), "{}: ledger must close", row.scenario_id);
            assert!(row.trace.is_none(), "tracing was off");
        }
        // Paired seeding: the two algorithms of a cell see the same world.
        let erto = &result.rows[0];
        let exor = &result.rows[2];
        assert_eq!(erto.replication, exor.replication);
        assert_eq!(erto.metrics.sent, exor.metrics.sent, "same flows, same emission schedule");
        let csv = result.metrics_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 1 + result.rows.len());
    }

    /// The whole artifact set — metrics CSV, summary CSV, manifest JSON,
    /// and every per-run trace — is byte-identical between a serial run
    /// and a four-worker run.
    #[test]
    fn worker_count_never_changes_a_byte() {
        let mut cfg = tiny_cfg();
        cfg.output.trace = true;
        let serial = sweep(&cfg, 1).unwrap();
        let parallel = sweep(&cfg, 4).unwrap();
        assert_eq!(serial.metrics_csv(), parallel.metrics_csv());
        assert_eq!(serial.summary_csv(), parallel.summary_csv());
        assert_eq!(serial.manifest.to_json(), parallel.manifest.to_json());
        let serial_traces: Vec<&Option<String>> = serial.rows.iter().map(|r| &r.trace).collect();
        let parallel_traces: Vec<&Option<String>> = parallel.rows.iter().map(|r| &r.trace).collect();
        assert_eq!(serial_traces, parallel_traces);
        assert!(serial.rows.iter().all(|r| r.trace.is_some()));
    }

    /// Summary rows aggregate replications with the sample standard
    /// deviation, and skip undefined values rather than coercing them.
    #[test]
    fn summaries_match_hand_computed_statistics() {
        let cfg = tiny_cfg();
        let result = sweep(&cfg, 1).unwrap();
        let rows = &result.rows;
        let summaries = result.summaries();
        // 2 scenarios x 2 algorithms x 7 metrics.
        assert_eq!(summaries.len(), 2 * 2 * 7);
        let s = summaries
            .iter()
            .find(|s| s.scenario_id == "n10_c2" && s.algorithm == Mode::Erto && s.metric == "residual_j")
            .unwrap();
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| r.scenario_id == "n10_c2" && r.algorithm == Mode::Erto)
            .map(|r| r.metrics.residual_j)
            .collect();
        assert_eq!(s.n, 2);
        let mean = (vals[0] + vals[1]) / 2.0;
        let std = ((vals[0] - mean).powi(2) + (vals[1] - mean).powi(2)).sqrt();
        assert!((s.mean.unwrap() - mean).abs() < 1e-12);
        assert!((s.std.unwrap() - std).abs() < 1e-12);
        let header = "scenario_id,algorithm,metric,n,mean,std\n";
        assert!(result.summary_csv().starts_with(header));
    }

    /// Undefined ratios leave their CSV cells empty instead of writing a
    /// stand-in number.
    #[test]
    fn undefined_metrics_become_empty_csv_cells() {
        let record = MetricsRecord {
            scenario_id: "n10_c2".into(),
            algorithm: Mode::Exor,
            n_nodes: 10,
            n_cbr: 2,
            replication: 0,
            metrics: RunMetrics::default(),
            trace: None,
        };
        assert_eq!(
            record.csv_row(),
            "n10_c2,exor,10,2,0,,,0.000000,0.000000,,0,0\n"
        );
    }
}

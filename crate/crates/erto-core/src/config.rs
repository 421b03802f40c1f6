//! Experiment configuration: one structured file drives a whole run.
//!
//! Every section falls back to the standard defaults (1000 m × 1000 m
//! area, 1024-bit packets over a 15 kbit/s channel, 0.1–0.8 W power band
//! with 200 m initial range, 5 J initial energy, 0.05 W receive draw), so
//! an empty file is a valid experiment. Unknown keys are rejected at every
//! level — a typo fails loudly instead of silently running the default.
//!
//! The configuration is hashed (SHA-256 over its canonical serialized
//! form) into the run manifest, which together with the base seed fully
//! determines every output byte.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::geometry::RangeMap;
use crate::linkmodel::RadioParams;
use crate::pareto::GaConfig;
use crate::routing::{Mode, PlannerConfig};

/// Radio propagation and detection constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioSection {
    /// SINR detection threshold (linear).
    pub beta: f64,
    /// Path-loss exponent; also drives the power→range law.
    pub eta: f64,
    /// Propagation constant.
    pub k: f64,
    /// Processing gain applied to interference.
    pub g: f64,
    /// Noise power, watts.
    pub p_n: f64,
}

impl Default for RadioSection {
    fn default() -> Self {
        RadioSection {
            beta: 3.16, // ≈ 5 dB detection threshold
            eta: 4.0,
            k: 1e-4,
            g: 10.0,
            p_n: 1e-15,
        }
    }
}

/// The power→range anchor: `initial_range_m` is reached at `initial_power_w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeSection {
    pub initial_range_m: f64,
    pub initial_power_w: f64,
}

impl Default for RangeSection {
    fn default() -> Self {
        RangeSection {
            initial_range_m: 200.0,
            initial_power_w: 0.8,
        }
    }
}

/// Energy accounting constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergySection {
    /// Receive power draw, watts.
    pub e_r: f64,
    /// Transmit-power scaling of the energy model.
    pub xi: f64,
    /// Data packet length, bits.
    pub packet_bits: f64,
    /// Channel rate, bits/second.
    pub bandwidth_bps: f64,
    /// Per-node starting energy, joules.
    pub initial_j: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        EnergySection {
            e_r: 0.05,
            xi: 1.0,
            packet_bits: 1024.0,
            bandwidth_bps: 15000.0,
            initial_j: 5.0,
        }
    }
}

/// Transmission power band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSection {
    pub min_w: f64,
    pub max_w: f64,
}

impl Default for PowerSection {
    fn default() -> Self {
        PowerSection {
            min_w: 0.1,
            max_w: 0.8,
        }
    }
}

/// Genetic-search knobs (seeds are derived from the sweep's base seed, not
/// configured here).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaSection {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub crossover_index: f64,
    pub mutation_prob: f64,
    pub mutation_index: f64,
}

impl Default for GaSection {
    fn default() -> Self {
        let d = GaConfig::default();
        GaSection {
            population: d.population,
            generations: d.generations,
            crossover_prob: d.crossover_prob,
            crossover_index: d.crossover_index,
            mutation_prob: d.mutation_prob,
            mutation_index: d.mutation_index,
        }
    }
}

/// Post-processing tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TolerancesSection {
    /// Relative window below the maximal `P_rnd` that still counts as equal
    /// when extracting the feasible set.
    pub feasible_tol: f64,
    /// Relative power mismatch still treated as "already on the front".
    pub power_match_tol: f64,
}

impl Default for TolerancesSection {
    fn default() -> Self {
        TolerancesSection {
            feasible_tol: 0.01,
            power_match_tol: 0.01,
        }
    }
}

/// World and traffic parameters of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub area_width_m: f64,
    pub area_height_m: f64,
    pub hello_period_s: f64,
    pub hello_bits: f64,
    /// Hello periods after which a silent neighbor is considered gone.
    pub staleness_periods: u32,
    /// Per-flow constant bit rate, packets/second.
    pub cbr_rate_pps: f64,
    /// Settling time before traffic starts and metrics count, seconds.
    pub warmup_s: f64,
    /// Total simulated time, seconds.
    pub duration_s: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            area_width_m: 1000.0,
            area_height_m: 1000.0,
            hello_period_s: 1.0,
            hello_bits: 128.0,
            staleness_periods: 3,
            cbr_rate_pps: 4.0,
            warmup_s: 2.0,
            duration_s: 300.0,
        }
    }
}

/// The experiment grid: every algorithm × node count × flow count cell,
/// replicated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub algorithms: Vec<Mode>,
    pub n_nodes: Vec<u32>,
    pub n_cbr: Vec<u32>,
    pub replications: u32,
    pub base_seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            algorithms: vec![Mode::Erto, Mode::Exor],
            n_nodes: vec![40, 60, 80, 100, 120],
            n_cbr: vec![20],
            replications: 5,
            base_seed: 42,
        }
    }
}

/// Output locations (overridable from the command line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Emit per-event trace files alongside the metrics.
    pub trace: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".to_string(),
            trace: false,
        }
    }
}

/// The complete experiment description.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub radio: RadioSection,
    pub range: RangeSection,
    pub energy: EnergySection,
    pub power: PowerSection,
    pub ga: GaSection,
    pub tolerances: TolerancesSection,
    pub sim: SimSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads, parses and validates a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.radio_params().validate()?;
        self.range_map()?;
        self.energy_params().validate()?;
        if !(self.power.min_w > 0.0 && self.power.max_w >= self.power.min_w) {
            return Err(Error::Config(format!(
                "power band must satisfy 0 < min_w ≤ max_w, got [{}, {}]",
                self.power.min_w, self.power.max_w
            )));
        }
        if !(self.range.initial_power_w >= self.power.min_w
            && self.range.initial_power_w <= self.power.max_w)
        {
            return Err(Error::Config(format!(
                "range.initial_power_w = {} lies outside the power band [{}, {}]",
                self.range.initial_power_w, self.power.min_w, self.power.max_w
            )));
        }
        self.ga_config(0).validate().map_err(|e| match e {
            Error::InvalidParameter(msg) => Error::Config(format!("ga: {msg}")),
            other => other,
        })?;
        for (name, tol) in [
            ("tolerances.feasible_tol", self.tolerances.feasible_tol),
            ("tolerances.power_match_tol", self.tolerances.power_match_tol),
        ] {
            if !(0.0..1.0).contains(&tol) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1), got {tol}"
                )));
            }
        }
        let s = &self.sim;
        for (name, v) in [
            ("sim.area_width_m", s.area_width_m),
            ("sim.area_height_m", s.area_height_m),
            ("sim.hello_period_s", s.hello_period_s),
            ("sim.hello_bits", s.hello_bits),
            ("sim.cbr_rate_pps", s.cbr_rate_pps),
            ("sim.duration_s", s.duration_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(s.warmup_s >= 0.0 && s.warmup_s < s.duration_s) {
            return Err(Error::Config(format!(
                "sim.warmup_s = {} must lie in [0, duration_s = {})",
                s.warmup_s, s.duration_s
            )));
        }
        if s.staleness_periods == 0 {
            return Err(Error::Config(
                "sim.staleness_periods must be at least 1".to_string(),
            ));
        }
        if self.energy.initial_j <= 0.0 {
            return Err(Error::Config(format!(
                "energy.initial_j must be positive, got {}",
                self.energy.initial_j
            )));
        }
        let w = &self.sweep;
        if w.algorithms.is_empty() || w.n_nodes.is_empty() || w.n_cbr.is_empty() {
            return Err(Error::Config(
                "sweep.algorithms, sweep.n_nodes and sweep.n_cbr must be non-empty".to_string(),
            ));
        }
        if w.replications == 0 {
            return Err(Error::Config(
                "sweep.replications must be at least 1".to_string(),
            ));
        }
        for &n in &w.n_nodes {
            if n < 2 {
                return Err(Error::Config(format!(
                    "sweep.n_nodes entries must be at least 2, got {n}"
                )));
            }
            for &c in &w.n_cbr {
                let max_pairs = u64::from(n) * u64::from(n - 1);
                if u64::from(c) > max_pairs {
                    return Err(Error::Config(format!(
                        "{c} CBR pairs exceed the {max_pairs} distinct ordered pairs \
                         available among {n} nodes"
                    )));
                }
                if c == 0 {
                    return Err(Error::Config(
                        "sweep.n_cbr entries must be at least 1".to_string(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn radio_params(&self) -> RadioParams {
        RadioParams {
            beta: self.radio.beta,
            eta: self.radio.eta,
            k: self.radio.k,
            g: self.radio.g,
            p_n: self.radio.p_n,
        }
    }

    /// The power→range law anchored at the configured initial point, using
    /// the radio section's path-loss exponent.
    pub fn range_map(&self) -> Result<RangeMap> {
        RangeMap::new(
            self.range.initial_range_m,
            self.range.initial_power_w,
            self.radio.eta,
        )
    }

    pub fn energy_params(&self) -> EnergyParams {
        EnergyParams {
            e_r: self.energy.e_r,
            xi: self.energy.xi,
            packet_bits: self.energy.packet_bits,
            bandwidth_bps: self.energy.bandwidth_bps,
        }
    }

    pub fn ga_config(&self, seed: u64) -> GaConfig {
        GaConfig {
            population: self.ga.population,
            generations: self.ga.generations,
            crossover_prob: self.ga.crossover_prob,
            crossover_index: self.ga.crossover_index,
            mutation_prob: self.ga.mutation_prob,
            mutation_index: self.ga.mutation_index,
            seed,
        }
    }

    /// Deployment density for a given node count, nodes/m².
    pub fn rho(&self, n_nodes: u32) -> f64 {
        f64::from(n_nodes) / (self.sim.area_width_m * self.sim.area_height_m)
    }

    /// Degree-decision ceiling: the expected neighbor count at maximum
    /// power, rounded up.
    pub fn n_cap(&self, n_nodes: u32) -> Result<u32> {
        let r = self.range_map()?.range_of_power(self.power.max_w)?;
        Ok((self.rho(n_nodes) * std::f64::consts::PI * r * r).ceil() as u32)
    }

    /// Assembles the planner configuration for one run cell.
    pub fn planner_config(&self, mode: Mode, n_nodes: u32, ga_seed: u64) -> Result<PlannerConfig> {
        Ok(PlannerConfig {
            mode,
            range_map: self.range_map()?,
            radio: self.radio_params(),
            energy: self.energy_params(),
            rho: self.rho(n_nodes),
            p_min: self.power.min_w,
            p_max: self.power.max_w,
            n_cap: self.n_cap(n_nodes)?.max(1),
            ga: self.ga_config(ga_seed),
            feasible_tol: self.tolerances.feasible_tol,
            power_match_tol: self.tolerances.power_match_tol,
        })
    }

    /// Canonical serialized form (stable field order).
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 hex digest of the canonical form; the manifest key that ties
    /// outputs to the exact configuration.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_canonical_toml().as_bytes());
        let digest = h.finalize();
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_experiment() {
        let cfg = ExperimentConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.sim.area_width_m, 1000.0);
        assert_eq!(cfg.energy.packet_bits, 1024.0);
        assert_eq!(cfg.energy.bandwidth_bps, 15000.0);
        assert_eq!(cfg.energy.initial_j, 5.0);
        assert_eq!(cfg.energy.e_r, 0.05);
        assert_eq!((cfg.power.min_w, cfg.power.max_w), (0.1, 0.8));
        assert_eq!(cfg.range.initial_range_m, 200.0);
        assert_eq!(cfg.sweep.n_nodes, vec![40, 60, 80, 100, 120]);
    }

    #[test]
    fn default_config_validates() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn out_of_band_exponent_is_rejected() {
        let err = ExperimentConfig::from_toml_str("[radio]\neta = 7.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("eta") || msg.contains("exponent"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml_str("[radio]\nbetaa = 3.0\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = ExperimentConfig::from_toml_str("[typo_section]\nx = 1\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn round_trip_preserves_the_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep.n_nodes = vec![40, 80];
        cfg.sim.cbr_rate_pps = 2.5;
        cfg.ga.population = 80;
        let text = cfg.to_canonical_toml();
        let again = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.config_hash(), again.config_hash());
    }

    #[test]
    fn config_hash_tracks_content() {
        let a = ExperimentConfig::default();
        let mut b = ExperimentConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        b.sweep.base_seed = 43;
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }

    #[test]
    fn too_many_pairs_for_the_node_count_fails() {
        let err = ExperimentConfig::from_toml_str(
            "[sweep]\nn_nodes = [5]\nn_cbr = [21]\n",
        )
        .unwrap_err();
        assert!(err.to_string().contains("ordered pairs"));
    }

    #[test]
    fn derived_quantities_match_hand_values() {
        let cfg = ExperimentConfig::default();
        // 120 nodes on 1 km²: ρπr² with r = 200 m → 120e-6·π·4e4 ≈ 15.08.
        assert_eq!(cfg.n_cap(120).unwrap(), 16);
        assert!((cfg.rho(100) - 1e-4).abs() < 1e-18);
        let map = cfg.range_map().unwrap();
        assert!((map.range_of_power(0.8).unwrap() - 200.0).abs() < 1e-12);
    }

    #[test]
    fn warmup_must_precede_duration() {
        let err =
            ExperimentConfig::from_toml_str("[sim]\nwarmup_s = 10.0\nduration_s = 5.0\n")
                .unwrap_err();
        assert!(err.to_string().contains("warmup"));
    }
}

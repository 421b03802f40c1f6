//! Forwarding-degree model: under uniform random deployment with density ρ,
//! the number of nodes falling in a candidate forwarding lens of area Δ is
//! Poisson-distributed with mean ρΔ, so the probability that exactly `n_rel`
//! forwarding candidates are available is
//!
//! ```text
//! P_rnd(n_rel) = (ρΔ)^n_rel · e^(−ρΔ) / n_rel!
//! ```
//!
//! `P_rnd` is the optimizer's robustness objective: decisions whose assumed
//! degree is a likely degree survive node-placement randomness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::geometry::{candidate_area, ForwardingRegion, Position, RangeMap};

/// Poisson pmf evaluated in log space so large means and degrees cannot
/// overflow: `exp(n·ln(m) − m − ln Γ(n+1))`.
pub fn poisson_pmf(mean: f64, n: u32) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    (nf * mean.ln() - mean - ln_gamma(nf + 1.0)).exp()
}

/// Probability that exactly `n_rel` candidates populate the forwarding lens
/// bought by `p_ts` toward a destination at distance `d_ds`, under uniform
/// deployment density `rho` (nodes/m²).
pub fn p_rnd(p_ts: f64, n_rel: u32, d_ds: f64, rho: f64, map: &RangeMap) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "deployment density must be positive, got {rho}"
        )));
    }
    let r_s = map.range_of_power(p_ts)?;
    let area = candidate_area(r_s, d_ds)?;
    Ok(poisson_pmf(rho * area, n_rel))
}

/// Empirical degree histogram from repeated uniform placements.
#[derive(Debug, Clone)]
pub struct DegreeHistogram {
    /// `counts[k]` = number of placements with exactly `k` nodes in the lens.
    pub counts: Vec<u64>,
    pub placements: u64,
}

impl DegreeHistogram {
    /// Normalized frequencies.
    pub fn probabilities(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.placements as f64)
            .collect()
    }

    /// Total variation distance to a model pmf: ½·Σ|empirical − model|,
    /// with the model's tail mass beyond the histogram support included.
    pub fn total_variation(&self, model: impl Fn(u32) -> f64) -> f64 {
        let emp = self.probabilities();
        let mut covered = 0.0;
        let mut tv = 0.0;
        for (k, &e) in emp.iter().enumerate() {
            let m = model(k as u32);
            covered += m;
            tv += (e - m).abs();
        }
        tv += (1.0 - covered).max(0.0);
        0.5 * tv
    }
}

/// Scatters `placements` independent uniform deployments over the lens's
/// bounding box (a Poisson-distributed node count per placement, so the
/// in-lens count is exactly Poisson(ρΔ)) and histograms how many nodes land
/// inside the region. Independent of [`p_rnd`]'s closed form.
pub fn empirical_degree_check(
    placements: u64,
    rho: f64,
    region: &ForwardingRegion,
    seed: u64,
) -> Result<DegreeHistogram> {
    if placements == 0 {
        return Err(Error::InvalidParameter(
            "placements must be > 0".to_string(),
        ));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "deployment density must be positive, got {rho}"
        )));
    }
    // Bounding box of the lens: intersection of the two disc bounding boxes
    // (sender disc radius r_s, destination disc radius d_ds).
    let (s, d) = (region.sender, region.destination);
    let x_lo = (s.x - region.r_s).max(d.x - region.d_ds);
    let x_hi = (s.x + region.r_s).min(d.x + region.d_ds);
    let y_lo = (s.y - region.r_s).max(d.y - region.d_ds);
    let y_hi = (s.y + region.r_s).min(d.y + region.d_ds);
    if !(x_hi > x_lo && y_hi > y_lo) {
        return Err(Error::InvalidParameter(
            "degenerate lens bounding box".to_string(),
        ));
    }
    let box_area = (x_hi - x_lo) * (y_hi - y_lo);
    let poisson = Poisson::new(rho * box_area)
        .map_err(|e| Error::InvalidParameter(format!("poisson mean: {e}")))?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut counts: Vec<u64> = Vec::new();
    for _ in 0..placements {
        let n = poisson.sample(&mut rng) as u64;
        let mut inside: usize = 0;
        for _ in 0..n {
            let p = Position::new(
                x_lo + rng.random::<f64>() * (x_hi - x_lo),
                y_lo + rng.random::<f64>() * (y_hi - y_lo),
            );
            if region.contains(p) {
                inside += 1;
            }
        }
        if counts.len() <= inside {
            counts.resize(inside + 1, 0);
        }
        counts[inside] += 1;
    }
    Ok(DegreeHistogram { counts, placements })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: RangeMap = RangeMap {
        r_ref: 200.0,
        p_ref: 0.8,
        eta: 4.0,
    };

    #[test]
    fn zero_degree_probability_is_exponential() {
        // Choose rho so that ρΔ = 2 at r_s = d_ds = 200 (Δ ≈ 49134.788 m²).
        let area = candidate_area(200.0, 200.0).unwrap();
        let rho = 2.0 / area;
        let p = p_rnd(0.8, 0, 200.0, rho, &MAP).unwrap();
        assert!((p - (-2.0f64).exp()).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn pmf_normalizes_and_peaks_at_the_mean() {
        let mean: f64 = 7.3;
        let upto = (12.0 * mean).ceil() as u32;
        let total: f64 = (0..=upto).map(|n| poisson_pmf(mean, n)).sum();
        assert!((total - 1.0).abs() < 1e-9, "sum = {total}");
        // Mode of a Poisson distribution is floor(mean).
        let mode = mean.floor() as u32;
        let pm = poisson_pmf(mean, mode);
        for n in 0..=upto {
            assert!(poisson_pmf(mean, n) <= pm + 1e-15);
        }
    }

    #[test]
    fn log_space_pmf_survives_large_means() {
        // Direct (ρΔ)^n / n! would overflow long before n = 400.
        let p = poisson_pmf(400.0, 400);
        assert!(p > 0.0 && p < 1.0);
        // Stirling check: pmf at the mode of Poisson(m) ≈ 1/sqrt(2πm).
        let approx = 1.0 / (2.0 * std::f64::consts::PI * 400.0).sqrt();
        assert!((p - approx).abs() / approx < 0.01, "p = {p}, approx = {approx}");
    }

    #[test]
    fn empirical_histogram_matches_closed_form() {
        let region = ForwardingRegion::new(
            Position::new(0.0, 0.0),
            Position::new(220.0, 0.0),
            180.0,
        )
        .unwrap();
        let rho = 8e-5; // ≈ 80 nodes per km²: ρΔ ≈ 2.5
        let hist = empirical_degree_check(100_000, rho, &region, 0xDE6).unwrap();
        let mean = rho * region.area;
        let tv = hist.total_variation(|n| poisson_pmf(mean, n));
        assert!(tv <= 0.02, "total variation {tv}");
    }

    #[test]
    fn vanishing_lens_concentrates_all_mass_at_zero() {
        let region = ForwardingRegion::new(
            Position::new(0.0, 0.0),
            Position::new(200.0, 0.0),
            1e-6,
        )
        .unwrap();
        let hist = empirical_degree_check(10_000, 1e-4, &region, 0xD1CE).unwrap();
        assert_eq!(hist.counts.len(), 1, "counts: {:?}", hist.counts);
        assert_eq!(hist.counts[0], 10_000);
    }
}

//! One-hop energy-cost model.
//!
//! A forwarding attempt transmits for `δ = L/B` seconds at power `ξ·P_Ts`
//! while `n_rel` candidates listen at `E_r` each (radios burn receive power
//! whether or not decoding succeeds). Attempts repeat until the candidate set
//! receives, a geometric process with expectation `E{T} = 1/P_sc`; the
//! expected spend until success is normalized once more per successfully
//! delivered packet, giving
//!
//! ```text
//! C_s = (n_rel·E_r + ξ·P_Ts) · δ / P_sc²
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delivery probabilities below this floor are treated as saturation: the
/// expected-attempt and expected-cost formulas reject them instead of
/// returning astronomically large values.
pub const P_SC_FLOOR: f64 = 1e-6;

/// Energy accounting constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyParams {
    /// Per-candidate receive power, watts.
    pub e_r: f64,
    /// Transmit-chain overhead multiplier ξ applied to radiated power.
    pub xi: f64,
    /// Payload length L, bits.
    pub packet_bits: f64,
    /// Channel rate B, bits/second.
    pub bandwidth_bps: f64,
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("receive power", self.e_r),
            ("transmit overhead", self.xi),
            ("packet bits", self.packet_bits),
            ("channel rate", self.bandwidth_bps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Airtime of one packet, seconds: `δ = L/B`.
    pub fn delta(&self) -> f64 {
        self.packet_bits / self.bandwidth_bps
    }
}

fn check_p_sc(p_sc: f64) -> Result<()> {
    if !p_sc.is_finite() || p_sc > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "delivery probability must lie in (0, 1], got {p_sc}"
        )));
    }
    if p_sc < P_SC_FLOOR {
        return Err(Error::SaturatedLink(p_sc));
    }
    Ok(())
}

/// Expected number of attempts until the candidate set receives:
/// `E{T} = 1/P_sc`.
pub fn expected_attempts(p_sc: f64) -> Result<f64> {
    check_p_sc(p_sc)?;
    Ok(1.0 / p_sc)
}

/// Expected one-hop energy per successfully delivered packet, joules:
/// `C_s = (n_rel·E_r + ξ·P_Ts)·δ / P_sc²`.
pub fn expected_cost(p_ts: f64, n_rel: u32, p_sc: f64, params: &EnergyParams) -> Result<f64> {
    params.validate()?;
    if !(p_ts > 0.0 && p_ts.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "transmit power must be positive, got {p_ts}"
        )));
    }
    if n_rel == 0 {
        return Err(Error::InvalidParameter(
            "expected cost needs at least one forwarding candidate".to_string(),
        ));
    }
    check_p_sc(p_sc)?;
    let per_attempt = n_rel as f64 * params.e_r + params.xi * p_ts;
    Ok(per_attempt * params.delta() / (p_sc * p_sc))
}

/// Simulation oracle for [`expected_attempts`]: mean attempt count over
/// `trials` independent Bernoulli(p_sc) retransmit-until-success runs.
pub fn simulate_attempts(p_sc: f64, trials: u64, seed: u64) -> Result<f64> {
    check_p_sc(p_sc)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be > 0".to_string()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut total: u64 = 0;
    for _ in 0..trials {
        let mut attempts: u64 = 1;
        while rng.random::<f64>() >= p_sc {
            attempts += 1;
        }
        total += attempts;
    }
    Ok(total as f64 / trials as f64)
}

/// Simulation oracle for [`expected_cost`]: runs the retransmit-until-success
/// process charging `ξ·P_Ts·δ` transmit plus `n_rel·E_r·δ` listening energy
/// per attempt, then applies the same deterministic per-delivered-packet
/// normalization (÷P_sc) the closed form carries. Shares no arithmetic with
/// [`expected_cost`] beyond that final division.
pub fn simulate_cost(
    p_ts: f64,
    n_rel: u32,
    p_sc: f64,
    params: &EnergyParams,
    trials: u64,
    seed: u64,
) -> Result<f64> {
    params.validate()?;
    if n_rel == 0 {
        return Err(Error::InvalidParameter(
            "expected cost needs at least one forwarding candidate".to_string(),
        ));
    }
    check_p_sc(p_sc)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be > 0".to_string()));
    }
    let delta = params.delta();
    let per_attempt = params.xi * p_ts * delta + n_rel as f64 * params.e_r * delta;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for _ in 0..trials {
        let mut spent = per_attempt;
        while rng.random::<f64>() >= p_sc {
            spent += per_attempt;
        }
        total += spent;
    }
    Ok(total / trials as f64 / p_sc)
}

//! Rayleigh-faded SINR link model: single-link delivery probability under
//! interference, and the anypath delivery probability over a candidate set.
//!
//! Received power over a link of length `d` with transmit power `P` is
//! `K·α²·P/d^η`, where `α²` is unit-mean exponential (Rayleigh envelope) and
//! `K` collects antenna gains, carrier wavelength, and system loss. A frame is
//! decoded when its SINR clears the threshold `β`, with interference summed
//! over concurrent transmitters (reduced by the processing gain `G`) plus
//! noise power `P_n`. Averaging the SINR test over the independent fading
//! variables gives the closed-form delivery probability
//!
//! ```text
//! p_si = exp(−β·P_n·d_rs^η / (P_Ts·K)) · Π_i 1 / (1 + β·P_Ti·(d_rs/d_ri)^η / (G·P_Ts))
//! ```
//!
//! An interferer that transmits only a fraction `a` of the time contributes
//! the convex blend `a·factor + (1−a)` — exactly the marginal over an
//! independent Bernoulli(a) activity indicator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{candidate_set, distance, NodeId, Position, RangeMap};

/// Number of interferer factors above which the product is accumulated in
/// log space to dodge underflow.
const LOG_SPACE_THRESHOLD: usize = 20;

/// Physical-layer constants of the radio model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    /// SINR decode threshold β, unitless. Must be > 0.
    pub beta: f64,
    /// Path-loss exponent η. Must lie in [2, 5].
    pub eta: f64,
    /// Composite channel-gain constant K (antenna gains × wavelength² /
    /// ((4π)² × system loss)). Must be > 0.
    pub k: f64,
    /// Processing gain G applied to interference power. Must be > 0.
    pub g: f64,
    /// Noise power P_n, watts. Must be ≥ 0 (zero models the noise-free limit).
    pub p_n: f64,
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "SINR threshold must be positive, got {}",
                self.beta
            )));
        }
        if !(2.0..=5.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent must lie in [2, 5], got {}",
                self.eta
            )));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "channel gain K must be positive, got {}",
                self.k
            )));
        }
        if !(self.g > 0.0 && self.g.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "processing gain must be positive, got {}",
                self.g
            )));
        }
        if !(self.p_n >= 0.0 && self.p_n.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise power must be non-negative, got {}",
                self.p_n
            )));
        }
        Ok(())
    }

    /// Composite channel gain from its physical factors:
    /// `K = G_t·G_r·λ² / ((4π)²·Γ)` with antenna gains `G_t`, `G_r`,
    /// wavelength `λ` (metres) and system loss `Γ ≥ 1`.
    pub fn channel_gain(g_t: f64, g_r: f64, lambda: f64, gamma: f64) -> f64 {
        g_t * g_r * lambda * lambda / ((4.0 * std::f64::consts::PI).powi(2) * gamma)
    }
}

/// One interferer as seen from a specific receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interferer {
    /// Interferer transmit power, watts. Must be ≥ 0.
    pub p_ti: f64,
    /// Interferer→receiver distance, metres. Must be > 0.
    pub d_ri: f64,
    /// Fraction of time the interferer transmits, in [0, 1].
    pub activity: f64,
}

/// Per-receiver list of interferers.
pub type InterfererSnapshot = Vec<Interferer>;

fn validate_link(p_ts: f64, d_rs: f64, interferers: &[Interferer]) -> Result<()> {
    if !(p_ts > 0.0 && p_ts.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "transmit power must be positive, got {p_ts}"
        )));
    }
    if !(d_rs > 0.0 && d_rs.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "link distance must be positive, got {d_rs}"
        )));
    }
    for i in interferers {
        if !(i.p_ti >= 0.0 && i.p_ti.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "interferer power must be non-negative, got {}",
                i.p_ti
            )));
        }
        if !(i.d_ri > 0.0 && i.d_ri.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "interferer distance must be positive, got {}",
                i.d_ri
            )));
        }
        if !(0.0..=1.0).contains(&i.activity) {
            return Err(Error::InvalidParameter(format!(
                "interferer activity must lie in [0, 1], got {}",
                i.activity
            )));
        }
    }
    Ok(())
}

/// Closed-form delivery probability of a single link of length `d_rs` under
/// the given interferer snapshot. See the module docs for the formula.
pub fn p_si(
    p_ts: f64,
    d_rs: f64,
    interferers: &[Interferer],
    params: &RadioParams,
) -> Result<f64> {
    params.validate()?;
    validate_link(p_ts, d_rs, interferers)?;
    let noise_exponent = params.beta * params.p_n * d_rs.powf(params.eta) / (p_ts * params.k);
    let noise_term = (-noise_exponent).exp();
    let factor = |i: &Interferer| -> f64 {
        let f = 1.0
            / (1.0
                + params.beta * i.p_ti * (d_rs / i.d_ri).powf(params.eta)
                    / (params.g * p_ts));
        i.activity * f + (1.0 - i.activity)
    };
    let product = if interferers.len() > LOG_SPACE_THRESHOLD {
        interferers
            .iter()
            .map(|i| factor(i).ln())
            .sum::<f64>()
            .exp()
    } else {
        interferers.iter().map(factor).product()
    };
    Ok(noise_term * product)
}

/// Unit-mean exponential fading draw via inversion; `1 − u` avoids `ln(0)`.
fn fading_draw(rng: &mut impl Rng) -> f64 {
    let u: f64 = rng.random();
    -(1.0 - u).ln()
}

/// One Rayleigh draw of the SINR decode test, shared by the Monte-Carlo
/// oracle and the simulator's per-attempt reception sampling. Every entry in
/// `active` is a currently-transmitting interferer `(p_ti, d_ri)`.
pub fn sample_delivery(
    rng: &mut impl Rng,
    p_ts: f64,
    d_rs: f64,
    active: &[(f64, f64)],
    params: &RadioParams,
) -> bool {
    let signal = params.k * fading_draw(rng) * p_ts / d_rs.powf(params.eta);
    let mut interference = params.p_n;
    for &(p_ti, d_ri) in active {
        interference += params.k * fading_draw(rng) * p_ti / d_ri.powf(params.eta) / params.g;
    }
    signal >= params.beta * interference
}

/// A Monte-Carlo estimate with its binomial standard error.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte-Carlo oracle for [`p_si`]: samples the fading variables and the
/// Bernoulli activity of every interferer directly and counts SINR-test
/// successes. Shares no arithmetic with the closed form.
pub fn p_si_montecarlo(
    p_ts: f64,
    d_rs: f64,
    interferers: &[Interferer],
    params: &RadioParams,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    params.validate()?;
    validate_link(p_ts, d_rs, interferers)?;
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be > 0".to_string()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut active: Vec<(f64, f64)> = Vec::with_capacity(interferers.len());
    let mut successes: u64 = 0;
    for _ in 0..samples {
        active.clear();
        for i in interferers {
            let on = if i.activity >= 1.0 {
                true
            } else if i.activity <= 0.0 {
                false
            } else {
                rng.random::<f64>() < i.activity
            };
            if on {
                active.push((i.p_ti, i.d_ri));
            }
        }
        if sample_delivery(&mut rng, p_ts, d_rs, &active, params) {
            successes += 1;
        }
    }
    let estimate = successes as f64 / samples as f64;
    let std_error = (estimate * (1.0 - estimate) / samples as f64).sqrt();
    Ok(McEstimate {
        estimate,
        std_error,
        samples,
    })
}

/// Anypath delivery probability over independent candidate links:
/// `P_sc = 1 − Π(1 − p_si)`. An empty list yields 0.
pub fn p_sc(p_si_values: &[f64]) -> Result<f64> {
    for &p in p_si_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!(
                "per-link delivery probability must lie in [0, 1], got {p}"
            )));
        }
    }
    if p_si_values.len() > LOG_SPACE_THRESHOLD {
        let log_miss: f64 = p_si_values.iter().map(|&p| (1.0 - p).ln()).sum();
        Ok(1.0 - log_miss.exp())
    } else {
        Ok(1.0 - p_si_values.iter().map(|&p| 1.0 - p).product::<f64>())
    }
}

/// A node that may interfere at candidate receivers: its location, announced
/// transmit power, and activity weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfererSource {
    pub id: NodeId,
    pub position: Position,
    pub p_ti: f64,
    pub activity: f64,
}

/// Everything the closed-form prediction needs about one sender's
/// surroundings: known node geometry plus the interference picture.
#[derive(Debug, Clone)]
pub struct PredictionContext {
    pub sender: NodeId,
    pub destination: NodeId,
    /// Known node positions; must contain `sender` and `destination`.
    pub nodes: Vec<(NodeId, Position)>,
    /// Potential interferers (typically the active flow sources/relays the
    /// sender has heard about). The sender itself never interferes with its
    /// own frames and is filtered out, as is each receiver.
    pub sources: Vec<InterfererSource>,
    pub radio: RadioParams,
    pub range_map: RangeMap,
}

/// Per-candidate link estimate at a given transmit power.
#[derive(Debug, Clone, Copy)]
pub struct CandidateLink {
    pub id: NodeId,
    /// Sender→candidate distance, metres.
    pub distance: f64,
    /// Closed-form delivery probability of this link.
    pub p_si: f64,
}

/// Anypath estimate over a full candidate set at one power.
#[derive(Debug, Clone)]
pub struct LinkEstimate {
    /// Candidate links sorted best-first (descending `p_si`, ties by id).
    pub candidates: Vec<CandidateLink>,
    /// Anypath delivery probability over all candidates.
    pub p_sc: f64,
}

impl PredictionContext {
    fn position_of(&self, id: NodeId) -> Result<Position> {
        self.nodes
            .iter()
            .find(|(nid, _)| *nid == id)
            .map(|(_, p)| *p)
            .ok_or(Error::UnknownNode(id))
    }

    /// Interferers visible at `receiver`: sources whose transmission range
    /// covers it, excluding the sender and the receiver itself.
    pub fn snapshot_for(&self, receiver: NodeId, receiver_pos: Position) -> InterfererSnapshot {
        let mut snapshot = Vec::new();
        for s in &self.sources {
            if s.id == self.sender || s.id == receiver {
                continue;
            }
            let d_ri = distance(s.position, receiver_pos);
            if d_ri <= 0.0 {
                continue;
            }
            let range = match self.range_map.range_of_power(s.p_ti) {
                Ok(r) => r,
                Err(_) => continue, // zero-power source cannot interfere
            };
            if d_ri <= range {
                snapshot.push(Interferer {
                    p_ti: s.p_ti,
                    d_ri,
                    activity: s.activity,
                });
            }
        }
        snapshot
    }

    /// Closed-form delivery probability of the sender→`id` link at power
    /// `p_ts`, with the interference snapshot seen at that receiver.
    pub fn link_to(&self, id: NodeId, p_ts: f64) -> Result<CandidateLink> {
        let s_pos = self.position_of(self.sender)?;
        let pos = self.position_of(id)?;
        let d_rs = distance(s_pos, pos);
        if d_rs <= 0.0 {
            return Err(Error::InvalidParameter(
                "receiver coincides with sender".to_string(),
            ));
        }
        let snapshot = self.snapshot_for(id, pos);
        let p = p_si(p_ts, d_rs, &snapshot, &self.radio)?;
        Ok(CandidateLink {
            id,
            distance: d_rs,
            p_si: p,
        })
    }

    /// Candidate links at power `p_ts`, sorted best-first (descending
    /// delivery probability, ties broken by ascending id).
    pub fn candidate_links(&self, p_ts: f64) -> Result<Vec<CandidateLink>> {
        let r_s = self.range_map.range_of_power(p_ts)?;
        let members = candidate_set(self.sender, self.destination, &self.nodes, r_s)?;
        let mut links = Vec::with_capacity(members.len());
        for id in members {
            links.push(self.link_to(id, p_ts)?);
        }
        links.sort_by(|a, b| {
            b.p_si
                .partial_cmp(&a.p_si)
                .expect("delivery probabilities are finite")
                .then(a.id.cmp(&b.id))
        });
        Ok(links)
    }

    /// Anypath estimate over the full candidate set at power `p_ts`.
    pub fn estimate(&self, p_ts: f64) -> Result<LinkEstimate> {
        let candidates = self.candidate_links(p_ts)?;
        let probs: Vec<f64> = candidates.iter().map(|c| c.p_si).collect();
        Ok(LinkEstimate {
            p_sc: p_sc(&probs)?,
            candidates,
        })
    }
}

/// Predicted anypath delivery probability when transmitting at `p_ts` and
/// counting on the best `n_rel` candidates: candidate set at
/// `range_of_power(p_ts)`, per-candidate closed-form `p_si`, top `n_rel`
/// combined. Returns 0 when the effective set is empty.
pub fn p_sc_predict(ctx: &PredictionContext, p_ts: f64, n_rel: u32) -> Result<f64> {
    if n_rel == 0 {
        return Ok(0.0);
    }
    let links = ctx.candidate_links(p_ts)?;
    if links.is_empty() {
        return Ok(0.0);
    }
    let take = links.len().min(n_rel as usize);
    let probs: Vec<f64> = links[..take].iter().map(|c| c.p_si).collect();
    p_sc(&probs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_params() -> RadioParams {
        RadioParams {
            beta: 1.0,
            eta: 2.0,
            k: 1.0,
            g: 1.0,
            p_n: 0.0,
        }
    }

    #[test]
    fn noise_only_link_is_closed_form_exponential() {
        // β = 1, P_n = ln 2, d = 1, P = 1, K = 1, no interferers:
        // p_si = exp(−ln 2) = 0.5 exactly.
        let params = RadioParams {
            p_n: std::f64::consts::LN_2,
            ..unit_params()
        };
        let p = p_si(1.0, 1.0, &[], &params).unwrap();
        assert!((p - 0.5).abs() < 1e-15, "p = {p}");
    }

    #[test]
    fn equal_power_equal_distance_interferer_halves_delivery() {
        // Zero noise, one always-on interferer with P_Ti = P_Ts and
        // d_ri = d_rs, G = 1: p_si = 1/(1+β) = 0.5 at β = 1.
        let params = unit_params();
        let interferers = [Interferer {
            p_ti: 0.7,
            d_ri: 55.0,
            activity: 1.0,
        }];
        let p = p_si(0.7, 55.0, &interferers, &params).unwrap();
        assert!((p - 0.5).abs() < 1e-15, "p = {p}");
    }

    #[test]
    fn zero_noise_zero_interference_is_certain() {
        let params = RadioParams {
            beta: 4.2,
            eta: 3.0,
            k: 1e-4,
            g: 8.0,
            p_n: 0.0,
        };
        let p = p_si(0.3, 180.0, &[], &params).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn inactive_interferer_contributes_nothing() {
        let params = RadioParams {
            beta: 3.16,
            eta: 4.0,
            k: 1e-4,
            g: 10.0,
            p_n: 1e-15,
        };
        let idle = [Interferer {
            p_ti: 0.8,
            d_ri: 100.0,
            activity: 0.0,
        }];
        let without = p_si(0.4, 150.0, &[], &params).unwrap();
        let with = p_si(0.4, 150.0, &idle, &params).unwrap();
        assert_eq!(without, with);
    }

    #[test]
    fn monotonicity_in_power_distance_threshold_and_interference() {
        let params = RadioParams {
            beta: 3.16,
            eta: 4.0,
            k: 1e-4,
            g: 10.0,
            p_n: 1e-15,
        };
        let interferers = [Interferer {
            p_ti: 0.5,
            d_ri: 300.0,
            activity: 1.0,
        }];
        let base = p_si(0.4, 150.0, &interferers, &params).unwrap();
        assert!(p_si(0.6, 150.0, &interferers, &params).unwrap() > base);
        assert!(p_si(0.4, 180.0, &interferers, &params).unwrap() < base);
        let harsher = RadioParams {
            beta: 5.0,
            ..params
        };
        assert!(p_si(0.4, 150.0, &interferers, &harsher).unwrap() < base);
        let louder = [Interferer {
            p_ti: 0.8,
            d_ri: 300.0,
            activity: 1.0,
        }];
        assert!(p_si(0.4, 150.0, &louder, &params).unwrap() < base);
    }

    #[test]
    fn closed_form_matches_monte_carlo_with_fractional_activity() {
        let params = RadioParams {
            beta: 3.16,
            eta: 3.0,
            k: 1e-4,
            g: 10.0,
            p_n: 1e-13,
        };
        let interferers = [
            Interferer {
                p_ti: 0.3,
                d_ri: 250.0,
                activity: 0.6,
            },
            Interferer {
                p_ti: 0.5,
                d_ri: 180.0,
                activity: 1.0,
            },
            Interferer {
                p_ti: 0.8,
                d_ri: 400.0,
                activity: 0.25,
            },
        ];
        let closed = p_si(0.4, 120.0, &interferers, &params).unwrap();
        let mc = p_si_montecarlo(0.4, 120.0, &interferers, &params, 1_000_000, 0xF00D).unwrap();
        let sigma = mc.std_error.max(1e-9);
        assert!(
            (closed - mc.estimate).abs() <= 3.0 * sigma,
            "closed {closed} vs mc {} ± {}",
            mc.estimate,
            mc.std_error
        );
    }

    #[test]
    fn log_space_product_agrees_with_direct_product() {
        // 25 interferers trip the log-space path; compare against a direct
        // product computed here.
        let params = RadioParams {
            beta: 2.0,
            eta: 3.5,
            k: 1e-4,
            g: 12.0,
            p_n: 1e-14,
        };
        let interferers: Vec<Interferer> = (0..25)
            .map(|i| Interferer {
                p_ti: 0.1 + 0.02 * i as f64,
                d_ri: 150.0 + 25.0 * i as f64,
                activity: 0.5 + 0.02 * (i % 10) as f64,
            })
            .collect();
        let p = p_si(0.5, 130.0, &interferers, &params).unwrap();
        let noise = (-params.beta * params.p_n * 130f64.powf(params.eta) / (0.5 * params.k)).exp();
        let direct: f64 = interferers
            .iter()
            .map(|i| {
                let f = 1.0
                    / (1.0
                        + params.beta * i.p_ti * (130.0 / i.d_ri).powf(params.eta)
                            / (params.g * 0.5));
                i.activity * f + (1.0 - i.activity)
            })
            .product::<f64>()
            * noise;
        assert!((p - direct).abs() <= 1e-12 * direct.max(1e-12), "{p} vs {direct}");
    }

    #[test]
    fn anypath_probability_combines_independent_links() {
        assert_eq!(p_sc(&[]).unwrap(), 0.0);
        let p = p_sc(&[0.5, 0.5]).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        assert_eq!(p_sc(&[1.0, 0.2]).unwrap(), 1.0);
        assert!(p_sc(&[1.2]).is_err());
        assert!(p_sc(&[-0.1]).is_err());
    }

    fn two_candidate_context() -> PredictionContext {
        PredictionContext {
            sender: 0,
            destination: 1,
            nodes: vec![
                (0, Position::new(0.0, 0.0)),
                (1, Position::new(400.0, 0.0)),
                (2, Position::new(150.0, 20.0)),
                (3, Position::new(180.0, -40.0)),
            ],
            sources: vec![InterfererSource {
                id: 9,
                position: Position::new(100.0, 300.0),
                p_ti: 0.8,
                activity: 1.0,
            }],
            radio: RadioParams {
                beta: 3.16,
                eta: 4.0,
                k: 1e-4,
                g: 10.0,
                p_n: 1e-15,
            },
            range_map: RangeMap {
                r_ref: 200.0,
                p_ref: 0.8,
                eta: 4.0,
            },
        }
    }

    #[test]
    fn predicted_anypath_takes_the_best_n_candidates() {
        let ctx = two_candidate_context();
        let links = ctx.candidate_links(0.8).unwrap();
        assert_eq!(links.len(), 2);
        // Best-first ordering.
        assert!(links[0].p_si >= links[1].p_si);
        let best_only = p_sc_predict(&ctx, 0.8, 1).unwrap();
        assert!((best_only - links[0].p_si).abs() < 1e-15);
        let both = p_sc_predict(&ctx, 0.8, 2).unwrap();
        let expect = 1.0 - (1.0 - links[0].p_si) * (1.0 - links[1].p_si);
        assert!((both - expect).abs() < 1e-15);
        // Asking for more candidates than exist clamps to the set.
        let clamped = p_sc_predict(&ctx, 0.8, 7).unwrap();
        assert!((clamped - both).abs() < 1e-15);
    }

    #[test]
    fn predicted_anypath_degenerate_cases() {
        let ctx = two_candidate_context();
        assert_eq!(p_sc_predict(&ctx, 0.8, 0).unwrap(), 0.0);
        // At minimum power the range (≈119 m) reaches neither candidate.
        // Candidate 2 sits at ~151 m, candidate 3 at ~184 m.
        assert_eq!(p_sc_predict(&ctx, 0.1, 3).unwrap(), 0.0);
    }

    #[test]
    fn snapshot_excludes_sender_receiver_and_out_of_range_sources() {
        let mut ctx = two_candidate_context();
        ctx.sources = vec![
            // The sender itself must never interfere with its own frame.
            InterfererSource {
                id: 0,
                position: Position::new(0.0, 0.0),
                p_ti: 0.8,
                activity: 1.0,
            },
            // The receiver itself.
            InterfererSource {
                id: 2,
                position: Position::new(150.0, 20.0),
                p_ti: 0.8,
                activity: 1.0,
            },
            // In range of the receiver at full power (range 200 m).
            InterfererSource {
                id: 7,
                position: Position::new(250.0, 100.0),
                p_ti: 0.8,
                activity: 1.0,
            },
            // Too far for its own range to cover the receiver.
            InterfererSource {
                id: 8,
                position: Position::new(900.0, 900.0),
                p_ti: 0.8,
                activity: 1.0,
            },
        ];
        let snap = ctx.snapshot_for(2, Position::new(150.0, 20.0));
        assert_eq!(snap.len(), 1);
        let expected_d = distance(Position::new(250.0, 100.0), Position::new(150.0, 20.0));
        assert!((snap[0].d_ri - expected_d).abs() < 1e-12);
    }
}

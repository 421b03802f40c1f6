//! Plane geometry for opportunistic forwarding: node positions, the
//! power ↔ transmission-range map, and the candidate forwarding area.
//!
//! The candidate forwarding area of a sender `s` transmitting with range `r_s`
//! toward a destination `d` at distance `d_ds` is the lens-shaped intersection
//! of two discs: the sender's coverage disc (radius `r_s` around `s`) and the
//! progress disc (radius `d_ds` around `d`). Every node inside it is reachable
//! in one hop *and* strictly closer to the destination than the sender is.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node identifier. Scenario builders use dense ids `0..n`.
pub type NodeId = u32;

/// A point in the deployment plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    /// Euclidean distance to `other`, metres.
    pub fn distance_to(&self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Euclidean distance between two positions, metres.
pub fn distance(a: Position, b: Position) -> f64 {
    a.distance_to(b)
}

/// Monotone map between transmission power and transmission range,
/// anchored at a reference point: `r(p) = r_ref · (p / p_ref)^(1/η)`.
///
/// This is the inverse of the path-loss relation `p ∝ r^η`: the anchor pair
/// `(p_ref, r_ref)` states which power buys which range, and the exponent is
/// the same path-loss exponent the link model uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeMap {
    /// Range bought by `p_ref`, metres. Must be > 0.
    pub r_ref: f64,
    /// Reference power, watts. Must be > 0.
    pub p_ref: f64,
    /// Path-loss exponent, unitless. Must lie in [2, 5].
    pub eta: f64,
}

impl RangeMap {
    pub fn new(r_ref: f64, p_ref: f64, eta: f64) -> Result<Self> {
        if !(r_ref > 0.0 && r_ref.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "reference range must be positive, got {r_ref}"
            )));
        }
        if !(p_ref > 0.0 && p_ref.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "reference power must be positive, got {p_ref}"
            )));
        }
        if !(2.0..=5.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent must lie in [2, 5], got {eta}"
            )));
        }
        Ok(RangeMap { r_ref, p_ref, eta })
    }

    /// Transmission range bought by `power` watts, metres.
    pub fn range_of_power(&self, power: f64) -> Result<f64> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "transmission power must be positive, got {power}"
            )));
        }
        Ok(self.r_ref * (power / self.p_ref).powf(1.0 / self.eta))
    }

    /// Power needed to buy `range` metres, watts. Inverse of
    /// [`range_of_power`](Self::range_of_power).
    pub fn power_of_range(&self, range: f64) -> Result<f64> {
        if !(range > 0.0 && range.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "range must be positive, got {range}"
            )));
        }
        Ok(self.p_ref * (range / self.r_ref).powf(self.eta))
    }
}

/// Area of the candidate forwarding lens, m².
///
/// With `θ = arccos(r_s / (2·d_ds))` the lens area is
///
/// ```text
/// Δ = r_s²·θ + d_ds²·[(π − 2θ) − sin(π − 2θ)]
/// ```
///
/// valid for `r_s < 2·d_ds`; once the sender's coverage disc swallows the
/// whole progress disc (`r_s ≥ 2·d_ds`) the area saturates at `π·d_ds²`.
pub fn candidate_area(r_s: f64, d_ds: f64) -> Result<f64> {
    if !(r_s > 0.0 && r_s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sender range must be positive, got {r_s}"
        )));
    }
    if !(d_ds > 0.0 && d_ds.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sender-destination distance must be positive, got {d_ds}"
        )));
    }
    if r_s >= 2.0 * d_ds {
        return Ok(std::f64::consts::PI * d_ds * d_ds);
    }
    let theta = (r_s / (2.0 * d_ds)).acos();
    let outer = std::f64::consts::PI - 2.0 * theta;
    Ok(r_s * r_s * theta + d_ds * d_ds * (outer - outer.sin()))
}

/// Monte-Carlo rejection estimate of the candidate-lens area, m².
///
/// Samples points uniformly over the bounding box of the lens and counts the
/// fraction inside both discs. Entirely independent of [`candidate_area`]; it
/// exists solely to cross-check the closed form (relative standard error is
/// roughly `sqrt((1−f)/(f·samples))` with `f` the in-box hit fraction).
pub fn candidate_area_montecarlo(r_s: f64, d_ds: f64, samples: u64, seed: u64) -> Result<f64> {
    if !(r_s > 0.0 && d_ds > 0.0 && r_s.is_finite() && d_ds.is_finite()) {
        return Err(Error::InvalidParameter(
            "lens radii must be positive".to_string(),
        ));
    }
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be > 0".to_string()));
    }
    // Sender at the origin, destination on the +x axis. The lens sits inside
    // the intersection of the two disc bounding boxes.
    let sender = Position::new(0.0, 0.0);
    let dest = Position::new(d_ds, 0.0);
    let x_lo = (-r_s).max(0.0);
    let x_hi = r_s.min(2.0 * d_ds);
    let half_h = r_s.min(d_ds);
    let box_area = (x_hi - x_lo) * 2.0 * half_h;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut hits: u64 = 0;
    for _ in 0..samples {
        let x = x_lo + rng.random::<f64>() * (x_hi - x_lo);
        let y = -half_h + rng.random::<f64>() * 2.0 * half_h;
        let p = Position::new(x, y);
        if p.distance_to(sender) <= r_s && p.distance_to(dest) <= d_ds {
            hits += 1;
        }
    }
    Ok(box_area * hits as f64 / samples as f64)
}

/// The candidate forwarding lens for one (sender, destination) pair.
#[derive(Debug, Clone, Copy)]
pub struct ForwardingRegion {
    pub sender: Position,
    pub destination: Position,
    /// Sender transmission range, metres.
    pub r_s: f64,
    /// Sender-destination distance, metres.
    pub d_ds: f64,
    /// Lens area per [`candidate_area`], m².
    pub area: f64,
}

impl ForwardingRegion {
    pub fn new(sender: Position, destination: Position, r_s: f64) -> Result<Self> {
        let d_ds = sender.distance_to(destination);
        let area = candidate_area(r_s, d_ds)?;
        Ok(ForwardingRegion {
            sender,
            destination,
            r_s,
            d_ds,
            area,
        })
    }

    /// Membership test used everywhere a point must be a forwarding
    /// candidate: within the sender's range and strictly closer to the
    /// destination than the sender is.
    pub fn contains(&self, p: Position) -> bool {
        p.distance_to(self.sender) <= self.r_s && p.distance_to(self.destination) < self.d_ds
    }
}

/// Ids of the forwarding candidates for `sender` toward `destination`:
/// nodes within range `r_s` of the sender that are strictly closer to the
/// destination, excluding the sender and the destination themselves.
/// Returned sorted ascending by id regardless of input order.
pub fn candidate_set(
    sender: NodeId,
    destination: NodeId,
    positions: &[(NodeId, Position)],
    r_s: f64,
) -> Result<Vec<NodeId>> {
    if !(r_s > 0.0 && r_s.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sender range must be positive, got {r_s}"
        )));
    }
    let find = |id: NodeId| -> Result<Position> {
        positions
            .iter()
            .find(|(nid, _)| *nid == id)
            .map(|(_, p)| *p)
            .ok_or(Error::UnknownNode(id))
    };
    let s_pos = find(sender)?;
    let d_pos = find(destination)?;
    let d_ds = s_pos.distance_to(d_pos);
    if d_ds <= 0.0 {
        return Err(Error::InvalidParameter(
            "sender and destination coincide".to_string(),
        ));
    }
    let mut members: Vec<NodeId> = positions
        .iter()
        .filter(|(id, p)| {
            *id != sender
                && *id != destination
                && p.distance_to(s_pos) <= r_s
                && p.distance_to(d_pos) < d_ds
        })
        .map(|(id, _)| *id)
        .collect();
    members.sort_unstable();
    Ok(members)
}

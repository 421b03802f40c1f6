//! Opportunistic forwarding: candidate plans, ETX priorities and the
//! power-adjusting planner.
//!
//! A sender holding a packet for destination `d` builds a **forward plan**:
//! the candidate nodes that make geometric progress toward `d` within the
//! chosen transmission range, ordered by expected transmission count
//! `ETX = 1/p_si` (ascending — the most reliable candidate fires first),
//! ties broken by ascending node id. The destination itself, when in range,
//! takes top priority unconditionally. Receivers arm slotted timers at
//! `slot · rank`; overhearing a higher-priority forward of the same packet
//! suppresses the lower-priority copies, so in the common case exactly one
//! candidate relays per hop.
//!
//! Two planner modes share the plan construction and differ only in power:
//!
//! - **power-adjusting** (the protocol under study): before planning, the
//!   sender re-derives the Pareto front over `(P_Ts, n_rel)` from its
//!   current neighborhood knowledge, reduces it to the feasible set and
//!   either keeps its current power (when already on the front) or adjusts
//!   to the balanced selection. Fronts are cached per neighborhood state,
//!   so the genetic search reruns only when the relevant inputs (neighbor
//!   powers, activity, destination) actually change — equivalent to
//!   re-optimizing every hello period, since between hellos the inputs are
//!   constant.
//! - **fixed-power** (the ExOR-style baseline): transmits at the initial
//!   power forever; candidate priorities use the same closed-form `p_si`,
//!   so the comparison isolates the power/degree optimization and not the
//!   link-estimation machinery.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::geometry::{distance, NodeId, Position, RangeMap};
use crate::linkmodel::{InterfererSource, PredictionContext, RadioParams};
use crate::pareto::{nsga2_front, GaConfig, OptimizationContext, ParetoSet};
use crate::seedmix::mix;
use crate::topocontrol::{decide, feasible_set, Decision, FeasibleSet};

/// Priority slot length, seconds: rank-k receivers fire `k` slots after
/// decoding.
pub const SLOT_S: f64 = 0.005;
/// Hop budget per packet; exceeding it drops the packet.
pub const HOP_LIMIT: u32 = 32;
/// Per-hop retransmission budget.
pub const RETX_BUDGET: u32 = 7;
/// How many hello periods a holder without candidates waits before dropping.
pub const NO_ROUTE_RETRIES: u32 = 3;

/// Forwarding mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Joint power/degree optimization before every plan.
    Erto,
    /// Fixed initial power, plain ETX-prioritized opportunistic forwarding.
    Exor,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Erto => write!(f, "erto"),
            Mode::Exor => write!(f, "exor"),
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "erto" => Ok(Mode::Erto),
            "exor" => Ok(Mode::Exor),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?}, expected \"erto\" or \"exor\""
            ))),
        }
    }
}

/// What a node knows about one neighbor, learned from its hellos.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub id: NodeId,
    pub position: Position,
    /// The neighbor's advertised transmission power, watts.
    pub power: f64,
    /// The neighbor's advertised data-traffic duty cycle in `[0, 1]` —
    /// the interference context used by the closed-form predictions.
    pub activity: f64,
    /// Timestamp of the hello this entry came from, seconds.
    pub last_seen: f64,
}

/// Per-node neighbor knowledge with staleness-based expiry.
#[derive(Debug, Clone)]
pub struct NeighborTable {
    window: f64,
    entries: BTreeMap<NodeId, NeighborEntry>,
}

impl NeighborTable {
    /// `window`: entries older than this many seconds are considered gone.
    pub fn new(window: f64) -> Self {
        NeighborTable {
            window,
            entries: BTreeMap::new(),
        }
    }

    /// Records a hello observation; an entry is replaced only by a newer
    /// (or equally fresh) timestamp.
    pub fn observe(&mut self, entry: NeighborEntry) {
        match self.entries.get(&entry.id) {
            Some(existing) if existing.last_seen > entry.last_seen => {}
            _ => {
                self.entries.insert(entry.id, entry);
            }
        }
    }

    /// Entries still within the staleness window at time `now`, ascending
    /// by node id.
    pub fn fresh(&self, now: f64) -> impl Iterator<Item = &NeighborEntry> {
        let window = self.window;
        self.entries
            .values()
            .filter(move |e| now - e.last_seen <= window)
    }

    pub fn get(&self, id: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&id)
    }

    /// Drops entries outside the staleness window (bookkeeping only; `fresh`
    /// already filters).
    pub fn expire(&mut self, now: f64) {
        let window = self.window;
        self.entries.retain(|_, e| now - e.last_seen <= window);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Expected transmission count of a link with delivery probability `p_si`.
pub fn etx(p_si: f64) -> Result<f64> {
    if !(p_si > 0.0 && p_si <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delivery probability must lie in (0, 1], got {p_si}"
        )));
    }
    Ok(1.0 / p_si)
}

/// One prioritized candidate in a forward plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanEntry {
    pub id: NodeId,
    pub is_destination: bool,
    pub p_si: f64,
    pub etx: f64,
    /// 1-based priority (1 fires first).
    pub rank: u32,
}

/// A transmission decision: the power to use and the prioritized candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPlan {
    pub power: f64,
    /// The degree decision adopted alongside `power` (unchanged from the
    /// sender's current one when the optimizer kept it; untouched in
    /// fixed-power mode).
    pub degree: u32,
    pub entries: Vec<PlanEntry>,
}

impl ForwardPlan {
    /// Candidate forwarding set size.
    pub fn cfs_size(&self) -> usize {
        self.entries.len()
    }

    pub fn rank_of(&self, id: NodeId) -> Option<u32> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.rank)
    }
}

/// Static planner configuration shared by every node of a run.
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub mode: Mode,
    pub range_map: RangeMap,
    pub radio: RadioParams,
    pub energy: EnergyParams,
    /// Deployment density, nodes/m².
    pub rho: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Degree-decision ceiling for the optimizer.
    pub n_cap: u32,
    pub ga: GaConfig,
    /// Relative tolerance for the feasible-set `P_rnd` equality.
    pub feasible_tol: f64,
    /// Relative power tolerance for the keep-current-decision test.
    pub power_match_tol: f64,
}

/// Immutable snapshot of the sender's situation handed to the planner.
#[derive(Debug, Clone, Copy)]
pub struct SenderView<'a> {
    pub id: NodeId,
    pub position: Position,
    /// Current transmission power, watts.
    pub power: f64,
    /// Current degree decision (`n_rel`). Zero means the node has not yet
    /// adopted an optimized decision; a zero-degree pair can never match a
    /// front member (zero candidates is infeasible), so the first
    /// optimization always adjusts.
    pub degree: u32,
    pub destination: NodeId,
    /// Destination position (carried in the packet header).
    pub destination_pos: Position,
    pub neighbors: &'a NeighborTable,
    pub now: f64,
}

#[derive(Debug, Clone)]
struct CachedFront {
    front: ParetoSet,
    fs: FeasibleSet,
}

/// Keeps the optimizer state of one node: the per-neighborhood-state front
/// cache. Plans themselves are stateless.
#[derive(Debug, Clone)]
pub struct Planner {
    pub cfg: PlannerConfig,
    /// Pareto fronts keyed by a hash of every optimizer input (destination,
    /// fresh-neighbor ids/powers/activities); `None` records that the
    /// search found no feasible decision for that state.
    cache: BTreeMap<u64, Option<CachedFront>>,
    /// Feasible sets whose construction dropped ordering violators.
    pub ordering_drops: usize,
}

const CACHE_CAP: usize = 256;

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Self {
        Planner {
            cfg,
            cache: BTreeMap::new(),
            ordering_drops: 0,
        }
    }

    /// Builds the closed-form prediction context from the sender's current
    /// knowledge: fresh neighbors as geometry, active ones as interferers.
    fn prediction_context(&self, view: &SenderView) -> PredictionContext {
        let mut nodes: Vec<(NodeId, Position)> = vec![
            (view.id, view.position),
            (view.destination, view.destination_pos),
        ];
        let mut sources = Vec::new();
        for e in view.neighbors.fresh(view.now) {
            if e.id != view.id && e.id != view.destination {
                nodes.push((e.id, e.position));
            }
            if e.id != view.id && e.activity > 0.0 {
                sources.push(InterfererSource {
                    id: e.id,
                    position: e.position,
                    p_ti: e.power,
                    activity: e.activity,
                });
            }
        }
        PredictionContext {
            sender: view.id,
            destination: view.destination,
            nodes,
            sources,
            radio: self.cfg.radio,
            range_map: self.cfg.range_map,
        }
    }

    /// Hash of everything the optimizer's answer depends on. Power and
    /// activity are quantized so immaterial float jitter does not defeat
    /// the cache.
    fn state_hash(&self, view: &SenderView) -> u64 {
        let mut h = mix(0x706c_616e, u64::from(view.destination));
        h = mix(h, view.destination_pos.x.to_bits());
        h = mix(h, view.destination_pos.y.to_bits());
        for e in view.neighbors.fresh(view.now) {
            h = mix(h, u64::from(e.id));
            h = mix(h, (e.power * 1.0e4).round() as u64);
            h = mix(h, (e.activity * 20.0).round() as u64);
        }
        h
    }

    /// The power-adjustment step: reuse or compute the Pareto front for the
    /// current neighborhood state, then keep or adjust the current
    /// `(power, degree)` decision. An empty front keeps the current power
    /// (the optimizer has nothing better to offer — the packet still needs
    /// to move).
    fn decide_power(&mut self, view: &SenderView, ctx: &PredictionContext) -> Result<(f64, u32)> {
        let key = self.state_hash(view);
        if !self.cache.contains_key(&key) {
            if self.cache.len() >= CACHE_CAP {
                self.cache.clear();
            }
            let opt = OptimizationContext {
                link: ctx.clone(),
                rho: self.cfg.rho,
                energy: self.cfg.energy,
                p_min: self.cfg.p_min,
                p_max: self.cfg.p_max,
                n_cap: self.cfg.n_cap,
            };
            let ga = GaConfig {
                seed: mix(mix(self.cfg.ga.seed, u64::from(view.id)), key),
                ..self.cfg.ga
            };
            let cached = match nsga2_front(&opt, &ga) {
                Ok(front) => {
                    let fs = feasible_set(&front, self.cfg.feasible_tol)?;
                    self.ordering_drops += fs.dropped;
                    Some(CachedFront { front, fs })
                }
                Err(Error::EmptyFront) => None,
                Err(e) => return Err(e),
            };
            self.cache.insert(key, cached);
        }
        match self.cache.get(&key).expect("inserted above") {
            None => Ok((view.power, view.degree)),
            Some(cf) => {
                match decide(
                    view.power,
                    view.degree,
                    &cf.front,
                    &cf.fs,
                    self.cfg.power_match_tol,
                )? {
                    Decision::Keep => Ok((view.power, view.degree)),
                    Decision::AdjustTo(s) => Ok((s.p_ts, s.n_rel)),
                }
            }
        }
    }

    /// Produces the forward plan for the sender's current packet: decides
    /// the power (mode-dependent), then prioritizes every candidate at that
    /// power by ascending ETX, the destination first when in range. Errors
    /// with [`Error::NoRoute`] when no candidate exists.
    pub fn plan(&mut self, view: &SenderView) -> Result<ForwardPlan> {
        let ctx = self.prediction_context(view);
        let (power, degree) = match self.cfg.mode {
            Mode::Erto => self.decide_power(view, &ctx)?,
            Mode::Exor => (view.power, view.degree),
        };
        let r_s = self.cfg.range_map.range_of_power(power)?;
        let mut entries: Vec<PlanEntry> = Vec::new();
        let d_sd = distance(view.position, view.destination_pos);
        if d_sd <= r_s {
            let link = ctx.link_to(view.destination, power)?;
            if link.p_si > 0.0 {
                entries.push(PlanEntry {
                    id: view.destination,
                    is_destination: true,
                    p_si: link.p_si,
                    etx: etx(link.p_si)?,
                    rank: 0, // assigned below
                });
            }
        }
        // candidate_links is sorted by descending p_si (= ascending ETX),
        // ties by ascending id — exactly the plan priority order.
        for link in ctx.candidate_links(power)? {
            if link.p_si > 0.0 {
                entries.push(PlanEntry {
                    id: link.id,
                    is_destination: false,
                    p_si: link.p_si,
                    etx: etx(link.p_si)?,
                    rank: 0,
                });
            }
        }
        if entries.is_empty() {
            return Err(Error::NoRoute);
        }
        for (i, e) in entries.iter_mut().enumerate() {
            e.rank = (i + 1) as u32;
        }
        Ok(ForwardPlan {
            power,
            degree,
            entries,
        })
    }
}

//! Aggregate outcome of a single simulation run.
//!
//! Ratio metrics are `Option` so that a run with no traffic (or no
//! deliveries) reports "undefined" instead of a fake zero; the CSV layer
//! turns `None` into an empty cell.

use std::collections::BTreeMap;

use crate::geometry::NodeId;

/// Terminal reason a packet left the network undelivered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    /// A copy reached the per-packet hop ceiling.
    HopLimit,
    /// A holder exhausted its per-hop transmission budget unacknowledged.
    RetxExhausted,
    /// No forwarding candidate could be found after the retry grace periods.
    NoRoute,
    /// The last holder ran out of energy.
    NodeDead,
}

impl DropReason {
    pub fn label(self) -> &'static str {
        match self {
            DropReason::HopLimit => "hop_limit",
            DropReason::RetxExhausted => "retx_exhausted",
            DropReason::NoRoute => "no_route",
            DropReason::NodeDead => "node_dead",
        }
    }
}

/// Per-flow packet accounting; `sent = delivered + dropped + in_flight`
/// always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStats {
    pub src: NodeId,
    pub dst: NodeId,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight: u64,
}

/// Everything measured over one run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    /// Packets emitted by alive sources.
    pub sent: u64,
    /// Packets decoded at least once by their destination.
    pub delivered: u64,
    /// Successful decodes of a data frame by a node that already held the
    /// packet (the cooperative-diversity overhead).
    pub duplicates: u64,
    /// Packets that terminally left the network undelivered.
    pub drops: u64,
    pub drops_by_reason: BTreeMap<DropReason, u64>,
    /// Packets still held somewhere when the run ended.
    pub in_flight: u64,
    /// Data transmissions, first attempts and retransmissions, excluding
    /// the destination's confirmation frames.
    pub data_tx: u64,
    /// delivered / sent; `None` when nothing was sent.
    pub pdr: Option<f64>,
    /// Mean source-to-destination latency of delivered packets, seconds.
    pub delay_s: Option<f64>,
    /// Delivered payload bits per second of traffic time.
    pub throughput_bps: f64,
    /// Sum over nodes of the energy left at the end, joules.
    pub residual_j: f64,
    /// Mean candidate-set size over all data transmissions.
    pub cfs_mean: Option<f64>,
    pub flows: Vec<FlowStats>,
}

impl RunMetrics {
    /// Whether every flow's ledger closes: emitted packets are exactly
    /// partitioned into delivered, dropped, and still-in-flight.
    pub fn conserved(&self) -> bool {
        let totals = self.flows.iter().fold((0, 0, 0, 0), |acc, f| {
            (
                acc.0 + f.sent,
                acc.1 + f.delivered,
                acc.2 + f.dropped,
                acc.3 + f.in_flight,
            )
        });
        self.flows
            .iter()
            .all(|f| f.sent == f.delivered + f.dropped + f.in_flight)
            && totals == (self.sent, self.delivered, self.drops, self.in_flight)
    }
}

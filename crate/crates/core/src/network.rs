//! Range- and degree-limited peer links with one-tick message delivery.

use alloc::vec::Vec;

use crate::geo::{distance3, Point3};

/// Pairs closer than this are reported; the strength `gamma / d` is left
/// unbounded.
pub const CLOSE_PAIR_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkSelector {
    All,
    /// Undirected link between two vehicles.
    Pair(usize, usize),
}

impl LinkSelector {
    fn matches(&self, a: usize, b: usize) -> bool {
        match *self {
            LinkSelector::All => true,
            LinkSelector::Pair(x, y) => (x == a && y == b) || (x == b && y == a),
        }
    }
}

/// Link suppression over `start_s <= t < end_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    pub start_s: f64,
    pub end_s: f64,
    pub links: LinkSelector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommConfig {
    pub range: f64,
    pub max_neighbors: usize,
    pub gamma_signal: f64,
    pub dropouts: Vec<Dropout>,
}

impl Default for CommConfig {
    fn default() -> Self {
        Self {
            range: 30_000.0,
            max_neighbors: 2,
            gamma_signal: 1.0,
            dropouts: Vec::new(),
        }
    }
}

impl CommConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.range > 0.0) {
            return Err("communication range must be positive");
        }
        if self.max_neighbors == 0 {
            return Err("neighbor cap must be at least 1");
        }
        if !(self.gamma_signal > 0.0) || !self.gamma_signal.is_finite() {
            return Err("signal constant must be positive and finite");
        }
        for d in &self.dropouts {
            if !(d.start_s < d.end_s) {
                return Err("dropout windows need start < end");
            }
            if let LinkSelector::Pair(a, b) = d.links {
                if a == b {
                    return Err("dropout pair must name two different vehicles");
                }
            }
        }
        Ok(())
    }

    pub fn link_suppressed(&self, a: usize, b: usize, t: f64) -> bool {
        self.dropouts
            .iter()
            .any(|d| d.start_s <= t && t < d.end_s && d.links.matches(a, b))
    }
}

/// All-link blackouts of `window_s` seconds alternating with equal connected
/// windows, starting connected at `t = 0`, up to `until_s`.
pub fn alternating_blackouts(window_s: f64, until_s: f64) -> Vec<Dropout> {
    let mut out = Vec::new();
    let mut start = window_s;
    while start < until_s {
        out.push(Dropout {
            start_s: start,
            end_s: start + window_s,
            links: LinkSelector::All,
        });
        start += 2.0 * window_s;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    pub tick: u64,
    /// `neighbors[i]` is the admitted peer list of vehicle `i`, strongest first.
    pub neighbors: Vec<Vec<Neighbor>>,
    /// Pairs `(i, j, d)` with `i < j` closer than [`CLOSE_PAIR_DISTANCE`].
    pub close_pairs: Vec<(usize, usize, f64)>,
}

impl CommGraph {
    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }
}

/// Neighbor sets from geometry at time `t`: peers within range and not
/// suppressed, strongest (nearest) first, lower id on ties, at most
/// `max_neighbors` each.
pub fn build_topology(positions: &[Point3], config: &CommConfig, tick: u64, t: f64) -> CommGraph {
    let ids: Vec<usize> = (0..positions.len()).collect();
    build_topology_for(positions, &ids, config, tick, t)
}

/// Same as [`build_topology`] for a subset of the fleet: `ids[k]` is the
/// fleet index of `positions[k]`, used for dropout matching. Neighbor ids in
/// the result are positions in the subset.
pub fn build_topology_for(
    positions: &[Point3],
    ids: &[usize],
    config: &CommConfig,
    tick: u64,
    t: f64,
) -> CommGraph {
    let n = positions.len();
    let mut neighbors = Vec::with_capacity(n);
    let mut close_pairs = Vec::new();
    for i in 0..n {
        let mut admitted: Vec<Neighbor> = Vec::new();
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = distance3(&positions[i], &positions[j]);
            if i < j && d < CLOSE_PAIR_DISTANCE {
                close_pairs.push((i, j, d));
            }
            if d <= config.range && !config.link_suppressed(ids[i], ids[j], t) {
                admitted.push(Neighbor {
                    id: j,
                    strength: config.gamma_signal / d,
                });
            }
        }
        admitted.sort_by(|a, b| b.strength.total_cmp(&a.strength).then(a.id.cmp(&b.id)));
        admitted.truncate(config.max_neighbors);
        neighbors.push(admitted);
    }
    CommGraph {
        tick,
        neighbors,
        close_pairs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaMessage {
    pub sender: usize,
    pub theta: f64,
    pub sent_tick: u64,
}

/// A message as received, with the link strength it travelled over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Received {
    pub message: ThetaMessage,
    pub strength: f64,
}

/// Inboxes for the next tick: vehicle `i` gets the message of every member
/// of its neighbor set at send time, ordered by sender id.
pub fn deliver(messages: &[ThetaMessage], graph: &CommGraph) -> Vec<Vec<Received>> {
    graph
        .neighbors
        .iter()
        .map(|list| {
            let mut inbox: Vec<Received> = list
                .iter()
                .filter_map(|nb| {
                    messages
                        .iter()
                        .find(|m| m.sender == nb.id && m.sent_tick == graph.tick)
                        .map(|m| Received {
                            message: *m,
                            strength: nb.strength,
                        })
                })
                .collect();
            inbox.sort_by_key(|r| r.message.sender);
            inbox
        })
        .collect()
}

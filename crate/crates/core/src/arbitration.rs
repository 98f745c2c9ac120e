//! Arbitration architectures for the AER output interface.
//!
//! Five architectures are modelled: a plain binary arbiter tree, the greedy
//! tree, a linear token ring, a two-level hierarchical token ring and the
//! hierarchical arbiter tree (HAT). Each has a closed-form latency/area model
//! and an event-driven simulation on top of [`Kernel`].
//!
//! All latencies are in arbiter units (one two-input arbiter decision); the
//! simulator works in subticks and every delay in [`UnitDelays`] defaults to
//! an integer number of units, so simulated and analytic values compare
//! exactly.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{ComponentId, Kernel, SimTime};
use crate::rng::SimRng;
use crate::stats::SampleStats;
use crate::workloads::{Spike, Workload};

/// Exact latency in arbiter units.
pub type Units = Ratio<u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureKind {
    BinaryTree,
    GreedyTree,
    TokenRing,
    #[serde(rename = "hier-ring")]
    HierTokenRing,
    #[serde(rename = "hier-tree")]
    HierArbiterTree,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 5] = [
        ArchitectureKind::BinaryTree,
        ArchitectureKind::GreedyTree,
        ArchitectureKind::TokenRing,
        ArchitectureKind::HierTokenRing,
        ArchitectureKind::HierArbiterTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::BinaryTree => "binary-tree",
            ArchitectureKind::GreedyTree => "greedy-tree",
            ArchitectureKind::TokenRing => "token-ring",
            ArchitectureKind::HierTokenRing => "hier-ring",
            ArchitectureKind::HierArbiterTree => "hier-tree",
        }
    }

    /// Whether repeated sparse measurements are random (token position).
    pub fn is_stochastic_sparse(self) -> bool {
        matches!(
            self,
            ArchitectureKind::TokenRing | ArchitectureKind::HierTokenRing
        )
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown architecture `{0}`; expected one of binary-tree, greedy-tree, token-ring, hier-ring, hier-tree")]
pub struct UnknownArchitecture(pub String);

impl FromStr for ArchitectureKind {
    type Err = UnknownArchitecture;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ArchitectureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| UnknownArchitecture(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ArbError {
    #[error("N={n} is invalid for {kind}: {reason}")]
    InvalidN {
        kind: ArchitectureKind,
        n: u64,
        reason: &'static str,
    },
}

pub(crate) fn exact_log2(n: u64) -> Option<u32> {
    (n.is_power_of_two()).then(|| n.trailing_zeros())
}

pub(crate) fn exact_log4(n: u64) -> Option<u32> {
    exact_log2(n).filter(|b| b % 2 == 0).map(|b| b / 2)
}

pub(crate) fn exact_sqrt(n: u64) -> Option<u64> {
    let r = (n as f64).sqrt().round() as u64;
    (r * r == n).then_some(r)
}

/// Check the neuron-count constraints of `kind`.
pub fn validate(kind: ArchitectureKind, n: u64) -> Result<(), ArbError> {
    let err = |reason| Err(ArbError::InvalidN { kind, n, reason });
    if n < 2 {
        return err("at least two neurons are required");
    }
    if n > 1 << 20 {
        return err("at most 2^20 neurons are supported");
    }
    match kind {
        ArchitectureKind::BinaryTree | ArchitectureKind::GreedyTree if exact_log2(n).is_none() => {
            err("tree architectures need a power of two")
        }
        ArchitectureKind::HierTokenRing if exact_sqrt(n).is_none() => {
            err("the hierarchical ring needs a perfect square")
        }
        ArchitectureKind::HierArbiterTree if exact_log4(n).is_none() => {
            err("the hierarchical arbiter tree needs a power of four")
        }
        _ => Ok(()),
    }
}

/// Average single-event latency with sparse traffic.
pub fn analytic_sparse_latency(kind: ArchitectureKind, n: u64) -> Result<Units, ArbError> {
    validate(kind, n)?;
    Ok(match kind {
        ArchitectureKind::BinaryTree | ArchitectureKind::GreedyTree => {
            Units::from_integer(2 * (exact_log2(n).unwrap() as u64 - 1))
        }
        ArchitectureKind::TokenRing => Units::new(n + 1, 2),
        ArchitectureKind::HierTokenRing => Units::from_integer(exact_sqrt(n).unwrap()),
        ArchitectureKind::HierArbiterTree => Units::from_integer(exact_log2(n).unwrap() as u64),
    })
}

/// Time until the last output when all `n` neurons fire together.
pub fn analytic_burst_latency(kind: ArchitectureKind, n: u64) -> Result<Units, ArbError> {
    validate(kind, n)?;
    Ok(match kind {
        ArchitectureKind::BinaryTree => {
            Units::from_integer(2 * n * (exact_log2(n).unwrap() as u64 - 1))
        }
        ArchitectureKind::GreedyTree => Units::from_integer(3 * n - 6),
        ArchitectureKind::TokenRing => Units::from_integer(n),
        ArchitectureKind::HierTokenRing => Units::from_integer(n + 2 * exact_sqrt(n).unwrap()),
        ArchitectureKind::HierArbiterTree => Units::new(17 * n, 16) + Units::from_integer(3),
    })
}

/// Number of two-input arbiter cells.
pub fn arbiter_count(kind: ArchitectureKind, n: u64) -> Result<u64, ArbError> {
    validate(kind, n)?;
    Ok(match kind {
        ArchitectureKind::BinaryTree | ArchitectureKind::GreedyTree => n - 1,
        ArchitectureKind::TokenRing => n,
        ArchitectureKind::HierTokenRing => n + 2 * exact_sqrt(n).unwrap(),
        ArchitectureKind::HierArbiterTree => 3 * exact_log4(n).unwrap() as u64,
    })
}

/// Arbiter count plus the wired-OR request-sharing overhead of HAT
/// (pull-down transistors per neuron, pull-ups per cluster), expressed in
/// two-input-arbiter areas. Only HAT shares request pins.
pub fn normalized_area(kind: ArchitectureKind, n: u64, per_neuron_overhead: f64) -> Result<f64, ArbError> {
    let cells = arbiter_count(kind, n)? as f64;
    Ok(match kind {
        ArchitectureKind::HierArbiterTree => cells + per_neuron_overhead * n as f64,
        _ => cells,
    })
}

/// Default wired-OR overhead per neuron; fitted so HAT at N=64 lands on the
/// 59.4 reference figure. A calibration, not a prediction.
pub const DEFAULT_WIRED_OR_OVERHEAD: f64 = 50.4 / 64.0;

// ---------------------------------------------------------------------------
// Two-input arbiter cell
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Grant {
    #[default]
    None,
    A,
    B,
}

/// Mutex state of one two-input arbiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ArbiterCell {
    pub grant: Grant,
}

/// One evaluation of a two-input mutex. A grant is held while the winner keeps
/// requesting; simultaneous fresh requests are resolved by a seeded coin.
pub fn two_input_arbitrate(req_a: bool, req_b: bool, cell: &mut ArbiterCell, rng: &mut SimRng) -> Grant {
    cell.grant = match (cell.grant, req_a, req_b) {
        (Grant::A, true, _) => Grant::A,
        (Grant::B, _, true) => Grant::B,
        (_, true, false) => Grant::A,
        (_, false, true) => Grant::B,
        (_, true, true) => {
            if rng.coin() {
                Grant::A
            } else {
                Grant::B
            }
        }
        (_, false, false) => Grant::None,
    };
    cell.grant
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Per-stage delays. The two-input arbiter is one unit by definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitDelays {
    pub arbiter: SimTime,
    pub ring_hop: SimTime,
    /// Extra cost when a HAT grant moves between 16-neuron clusters.
    pub cluster_switch: SimTime,
    /// Hierarchical-ring charge for entering a leaf ring under contention.
    pub ring_boundary: SimTime,
}

impl Default for UnitDelays {
    fn default() -> Self {
        UnitDelays {
            arbiter: SimTime::from_units(1),
            ring_hop: SimTime::from_units(1),
            cluster_switch: SimTime::from_units(1),
            ring_boundary: SimTime::from_units(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbiterConfig {
    pub kind: ArchitectureKind,
    pub n_neurons: u32,
    #[serde(default)]
    pub unit_delays: UnitDelays,
    /// Extra neuron response time paid on every greedy-tree hand-off.
    #[serde(default)]
    pub greedy_neuron_response: SimTime,
}

impl ArbiterConfig {
    pub fn new(kind: ArchitectureKind, n_neurons: u32) -> Self {
        ArbiterConfig {
            kind,
            n_neurons,
            unit_delays: UnitDelays::default(),
            greedy_neuron_response: SimTime::ZERO,
        }
    }
}

/// One encoded output event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressEvent {
    pub neuron_id: u32,
    pub encoded_address: u32,
    pub t_request: SimTime,
    pub t_output: SimTime,
}

impl AddressEvent {
    pub fn latency(&self) -> SimTime {
        self.t_output - self.t_request
    }
}

/// Interval during which a two-input cell granted one requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GrantInterval {
    pub cell: u32,
    pub neuron: u32,
    pub start: SimTime,
    pub end: SimTime,
}

#[derive(Debug, Clone)]
enum Topology {
    Tree { levels: u32 },
    Greedy { levels: u32, last: Option<u32> },
    Ring { token: u32 },
    HierRing {
        side: u32,
        top_token: u32,
        leaf_tokens: Vec<u32>,
        active: Option<u32>,
    },
    Hat { levels: u32, last: Option<u32> },
}

/// A selected request together with its service cost and grant path.
struct Selection {
    neuron: u32,
    address: u32,
    cost: SimTime,
    path: Vec<u32>,
}

/// A built arbitration architecture with its simulation state.
#[derive(Debug, Clone)]
pub struct ArbiterInstance {
    config: ArbiterConfig,
    topology: Topology,
    pending: BTreeMap<u32, VecDeque<SimTime>>,
    pending_count: usize,
    rng: SimRng,
    seed: u64,
    grants: Vec<GrantInterval>,
    /// HAT arbitrations performed per level (index 0 = top).
    level_arbitrations: Vec<u64>,
}

pub fn build(config: ArbiterConfig) -> Result<ArbiterInstance, ArbError> {
    ArbiterInstance::new(config, 0)
}

impl ArbiterInstance {
    pub fn new(config: ArbiterConfig, seed: u64) -> Result<Self, ArbError> {
        let n = config.n_neurons as u64;
        validate(config.kind, n)?;
        let topology = match config.kind {
            ArchitectureKind::BinaryTree => Topology::Tree {
                levels: exact_log2(n).unwrap(),
            },
            ArchitectureKind::GreedyTree => Topology::Greedy {
                levels: exact_log2(n).unwrap(),
                last: None,
            },
            ArchitectureKind::TokenRing => Topology::Ring { token: 0 },
            ArchitectureKind::HierTokenRing => {
                let side = exact_sqrt(n).unwrap() as u32;
                Topology::HierRing {
                    side,
                    top_token: 0,
                    leaf_tokens: vec![0; side as usize],
                    active: None,
                }
            }
            ArchitectureKind::HierArbiterTree => Topology::Hat {
                levels: exact_log4(n).unwrap(),
                last: None,
            },
        };
        let levels = match &topology {
            Topology::Hat { levels, .. } => *levels as usize,
            _ => 0,
        };
        Ok(ArbiterInstance {
            config,
            topology,
            pending: BTreeMap::new(),
            pending_count: 0,
            rng: SimRng::new(seed),
            seed,
            grants: Vec::new(),
            level_arbitrations: vec![0; levels],
        })
    }

    pub fn config(&self) -> &ArbiterConfig {
        &self.config
    }

    pub fn kind(&self) -> ArchitectureKind {
        self.config.kind
    }

    pub fn n(&self) -> u32 {
        self.config.n_neurons
    }

    pub fn cell_count(&self) -> u64 {
        arbiter_count(self.config.kind, self.config.n_neurons as u64).unwrap()
    }

    /// Number of hierarchy levels of four-input arbiters (HAT only).
    pub fn hat_levels(&self) -> Option<u32> {
        match self.topology {
            Topology::Hat { levels, .. } => Some(levels),
            _ => None,
        }
    }

    /// Leaf rings and their size (hierarchical ring only).
    pub fn ring_geometry(&self) -> Option<(u32, u32)> {
        match self.topology {
            Topology::HierRing { side, .. } => Some((side, side)),
            Topology::Ring { .. } => Some((1, self.n())),
            _ => None,
        }
    }

    pub fn token_position(&self) -> Option<u32> {
        match self.topology {
            Topology::Ring { token } => Some(token),
            _ => None,
        }
    }

    pub fn grant_log(&self) -> &[GrantInterval] {
        &self.grants
    }

    pub fn level_arbitrations(&self) -> &[u64] {
        &self.level_arbitrations
    }

    /// Back to the freshly built state, including the coin-flip stream.
    pub fn reset(&mut self) {
        *self = ArbiterInstance::new(self.config, self.seed).expect("config was validated");
    }

    fn push_pending(&mut self, neuron: u32, t: SimTime) {
        self.pending.entry(neuron).or_default().push_back(t);
        self.pending_count += 1;
    }

    fn take_pending(&mut self, neuron: u32) -> SimTime {
        let q = self.pending.get_mut(&neuron).expect("selected neuron is pending");
        let t = q.pop_front().expect("non-empty queue");
        if q.is_empty() {
            self.pending.remove(&neuron);
        }
        self.pending_count -= 1;
        t
    }

    fn any_pending_in(&self, lo: u32, hi: u32) -> bool {
        self.pending.range(lo..hi).next().is_some()
    }

    /// Arbitrate among pending requests in `[lo, hi)` with a binary tree of
    /// cells: the earlier request wins a cell, exact ties go to the coin.
    /// Returns (neuron, request time, address bits below `lo`).
    fn tree_pick(&mut self, lo: u32, hi: u32) -> Option<(u32, SimTime, u32)> {
        let mut it = self.pending.range(lo..hi);
        let (&first, q) = it.next()?;
        if it.next().is_none() {
            return Some((first, q[0], first - lo));
        }
        let mid = lo + (hi - lo) / 2;
        let a = self.tree_pick(lo, mid);
        let b = self.tree_pick(mid, hi);
        let half = mid - lo;
        match (a, b) {
            (Some(a), None) => Some(a),
            (None, Some((n, t, addr))) => Some((n, t, addr + half)),
            (Some(a), Some(b)) => {
                let take_a = match a.1.cmp(&b.1) {
                    std::cmp::Ordering::Less => true,
                    std::cmp::Ordering::Greater => false,
                    std::cmp::Ordering::Equal => {
                        let mut cell = ArbiterCell::default();
                        two_input_arbitrate(true, true, &mut cell, &mut self.rng) == Grant::A
                    }
                };
                if take_a {
                    Some(a)
                } else {
                    Some((b.0, b.1, b.2 + half))
                }
            }
            (None, None) => None,
        }
    }

    fn tree_path(levels: u32, n: u32, neuron: u32) -> Vec<u32> {
        let mut path = Vec::with_capacity(levels as usize);
        let mut offset = 0;
        for k in 1..=levels {
            path.push(offset + (neuron >> k));
            offset += n >> k;
        }
        path
    }

    fn hat_path(levels: u32, neuron: u32) -> Vec<u32> {
        (0..levels)
            .flat_map(|l| {
                let digit = (neuron >> (2 * (levels - 1 - l))) & 3;
                [3 * l + digit / 2, 3 * l + 2]
            })
            .collect()
    }

    fn select(&mut self, handoff: bool) -> Option<Selection> {
        if self.pending_count == 0 {
            return None;
        }
        let n = self.n();
        let d = self.config.unit_delays;
        let response = self.config.greedy_neuron_response;
        let pending_total = self.pending_count;
        let mut topology = std::mem::replace(&mut self.topology, Topology::Ring { token: 0 });
        let sel = match &mut topology {
            Topology::Tree { levels } => {
                let (neuron, _, address) = self.tree_pick(0, n)?;
                Selection {
                    neuron,
                    address,
                    cost: SimTime(2 * (*levels as u64 - 1) * d.arbiter.0),
                    path: Self::tree_path(*levels, n, neuron),
                }
            }
            Topology::Greedy { levels, last } => {
                let m = *levels;
                let full = SimTime(2 * (m as u64 - 1) * d.arbiter.0);
                let (lo, hi) = match (*last, handoff) {
                    (Some(prev), true) => (1..=m)
                        .map(|k| ((prev >> k) << k, ((prev >> k) + 1) << k))
                        .find(|&(lo, hi)| self.any_pending_in(lo, hi))
                        .expect("some subtree holds the pending requests"),
                    _ => (0, n),
                };
                let (neuron, _, sub) = self.tree_pick(lo, hi)?;
                let cost = match (*last, handoff) {
                    (Some(prev), true) => {
                        let k = (32 - (prev ^ neuron).leading_zeros()).max(1);
                        let base = if k < m {
                            SimTime((2 * k as u64 - 1) * d.arbiter.0)
                        } else {
                            full
                        };
                        base + response
                    }
                    _ => full,
                };
                *last = Some(neuron);
                Selection {
                    neuron,
                    address: lo + sub,
                    cost,
                    path: Self::tree_path(m, n, neuron),
                }
            }
            Topology::Ring { token } => {
                let neuron = self
                    .pending
                    .range(*token..)
                    .next()
                    .or_else(|| self.pending.range(..*token).next())
                    .map(|(&k, _)| k)?;
                let dist = (neuron + n - *token) % n;
                *token = (neuron + 1) % n;
                Selection {
                    neuron,
                    address: neuron,
                    cost: SimTime((dist as u64 + 1) * d.ring_hop.0),
                    path: vec![neuron],
                }
            }
            Topology::HierRing {
                side,
                top_token,
                leaf_tokens,
                active,
            } => {
                let s = *side;
                let ring_has = |me: &Self, r: u32| me.any_pending_in(r * s, (r + 1) * s);
                let (ring, entering) = match *active {
                    Some(r) if ring_has(self, r) => (r, false),
                    _ => {
                        let r = (0..s)
                            .map(|i| (*top_token + i) % s)
                            .find(|&r| ring_has(self, r))
                            .expect("pending requests lie in some ring");
                        (r, true)
                    }
                };
                let q = leaf_tokens[ring as usize];
                let j = (0..s)
                    .map(|i| (q + i) % s)
                    .find(|&j| self.pending.contains_key(&(ring * s + j)))
                    .expect("ring has a pending request");
                let mut hops = ((j + s - q) % s) as u64;
                let mut cost = SimTime::ZERO;
                if entering {
                    hops += ((ring + s - *top_token) % s) as u64 + 1;
                    *top_token = (ring + 1) % s;
                    if pending_total > 1 {
                        cost = cost + d.ring_boundary;
                    }
                }
                cost = cost + SimTime(hops * d.ring_hop.0);
                leaf_tokens[ring as usize] = j;
                *active = Some(ring);
                let neuron = ring * s + j;
                Selection {
                    neuron,
                    address: neuron,
                    cost,
                    path: vec![ring, s + ring, 2 * s + neuron],
                }
            }
            Topology::Hat { levels, last } => {
                let l = *levels;
                let full = SimTime(2 * l as u64 * d.arbiter.0);
                let (lo, hi, held) = match (*last, handoff) {
                    (Some(prev), true) => (1..=l)
                        .map(|k| ((prev >> (2 * k)) << (2 * k), ((prev >> (2 * k)) + 1) << (2 * k), l - k))
                        .find(|&(lo, hi, _)| self.any_pending_in(lo, hi))
                        .expect("some cluster holds the pending requests"),
                    _ => (0, n, 0),
                };
                let (neuron, _, sub) = self.tree_pick(lo, hi)?;
                for lvl in held..l {
                    self.level_arbitrations[lvl as usize] += 1;
                }
                let cost = match (*last, handoff) {
                    (Some(prev), true) => {
                        let mut c = d.arbiter;
                        if prev >> 4 != neuron >> 4 {
                            c = c + d.cluster_switch;
                        }
                        c.min(full)
                    }
                    _ => full,
                };
                *last = Some(neuron);
                Selection {
                    neuron,
                    address: lo + sub,
                    cost,
                    path: Self::hat_path(l, neuron),
                }
            }
        };
        self.topology = topology;
        Some(sel)
    }

    fn on_drain(&mut self) {
        if let Topology::HierRing { active, .. } = &mut self.topology {
            *active = None;
        }
    }

    /// Run `spikes` (time-ordered or not) through the arbiter; returns one
    /// event per spike in output order.
    pub fn simulate(&mut self, spikes: &[Spike]) -> Vec<AddressEvent> {
        #[derive(Debug)]
        enum Ev {
            Arrive(u32),
            Decide,
            Complete { neuron: u32, address: u32, t_request: SimTime },
        }
        const ARB: ComponentId = ComponentId(0);
        let n = self.n();
        let mut kernel: Kernel<Ev> = Kernel::new();
        for s in spikes {
            assert!(s.neuron < n, "neuron {} out of range for N={}", s.neuron, n);
            kernel.schedule(s.t, ARB, Ev::Arrive(s.neuron)).expect("kernel starts at zero");
        }
        let mut out = Vec::with_capacity(spikes.len());
        let mut busy = false;
        let mut decide_queued = false;

        let start = |me: &mut Self, k: &mut Kernel<Ev>, handoff: bool| -> bool {
            let Some(sel) = me.select(handoff) else {
                return false;
            };
            let now = k.now();
            let t_request = me.take_pending(sel.neuron);
            let done = now + sel.cost;
            for cell in sel.path {
                me.grants.push(GrantInterval {
                    cell,
                    neuron: sel.neuron,
                    start: now,
                    end: done,
                });
            }
            k.schedule(
                done,
                ARB,
                Ev::Complete {
                    neuron: sel.neuron,
                    address: sel.address,
                    t_request,
                },
            )
            .expect("completion is never in the past");
            true
        };

        kernel.run_to_completion(|k, ev| match ev.payload {
            Ev::Arrive(neuron) => {
                self.push_pending(neuron, ev.at);
                if !busy && !decide_queued {
                    k.schedule(ev.at, ARB, Ev::Decide).expect("now");
                    decide_queued = true;
                }
            }
            Ev::Decide => {
                decide_queued = false;
                if !busy {
                    busy = start(self, k, false);
                }
            }
            Ev::Complete {
                neuron,
                address,
                t_request,
            } => {
                out.push(AddressEvent {
                    neuron_id: neuron,
                    encoded_address: address,
                    t_request,
                    t_output: ev.at,
                });
                busy = start(self, k, true);
                if !busy {
                    self.on_drain();
                }
            }
        });
        out
    }

    /// Mean single-event latency (units) over `trials` uniform sparse spikes.
    pub fn measure_sparse(&mut self, trials: u64, seed: u64) -> SampleStats {
        self.reset();
        let spikes = Workload::sparse(trials, seed)
            .generate(self.n())
            .expect("n >= 2");
        let events = self.simulate(&spikes);
        SampleStats::from_iter(events.iter().map(|e| e.latency().as_units()))
    }

    /// Time of the last output (units) when all neurons fire at t=0.
    pub fn measure_burst(&mut self) -> SimTime {
        self.reset();
        let spikes = Workload::burst(0).generate(self.n()).expect("n >= 2");
        self.simulate(&spikes)
            .iter()
            .map(|e| e.t_output)
            .max()
            .unwrap_or(SimTime::ZERO)
    }
}

/// Pairs of overlapping grants on the same cell.
pub fn mutual_exclusion_violations(grants: &[GrantInterval]) -> Vec<(GrantInterval, GrantInterval)> {
    let mut by_cell: BTreeMap<u32, Vec<GrantInterval>> = BTreeMap::new();
    for g in grants {
        by_cell.entry(g.cell).or_default().push(*g);
    }
    let mut out = Vec::new();
    for (_, mut v) in by_cell {
        v.sort_by_key(|g| (g.start, g.end));
        for w in v.windows(2) {
            if w[1].start < w[0].end && w[0].end > w[0].start && w[1].end > w[1].start {
                out.push((w[0], w[1]));
            }
        }
    }
    out
}

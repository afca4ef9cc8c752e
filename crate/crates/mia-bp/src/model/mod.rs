//! Network description: topology, activation patterns, arrival processes,
//! policy parameters, and the TOML config that ties them together.
//!
//! Everything here is immutable after construction and safe to share across
//! parallel simulation runs. Link rates are exact rationals; after
//! [`normalize_rates`] every rate is a unit fraction `1/m`, which the engine
//! relies on so that partial-packet accumulators hit exactly 1.

mod config;

pub use config::{load_config, ConfigError};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{BigInt, One, Signed, Zero};
use thiserror::Error;

use crate::rational::{format_rat, Rat};

/// 1-based node index.
pub type NodeId = u32;

/// Commodities are labeled by their destination node.
pub type CommodityId = u32;

/// A directed link key `(from, to)`.
pub type Link = (NodeId, NodeId);

/// Node connectivity and per-link rates.
///
/// `links` is a directed map but always holds both directions of every link
/// with equal rates (reciprocity is a validation invariant, not a storage
/// convention you can rely on for hand-built values: run [`validate`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub n_nodes: u32,
    pub links: BTreeMap<Link, Rat>,
    pub commodities: BTreeSet<CommodityId>,
}

impl Topology {
    /// Out-neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.links
            .range((i, 0)..(i + 1, 0))
            .map(|(&(_, j), _)| j)
    }

    pub fn rate(&self, i: NodeId, j: NodeId) -> Option<&Rat> {
        self.links.get(&(i, j))
    }

    /// Maximum out-degree over all nodes; the `d` used by the theorem bounds.
    pub fn degree_bound(&self) -> u32 {
        (1..=self.n_nodes)
            .map(|i| self.neighbors(i).count() as u32)
            .max()
            .unwrap_or(0)
    }

    /// A link is strong when it moves a whole packet per slot.
    pub fn is_strong(&self, i: NodeId, j: NodeId) -> bool {
        self.rate(i, j).map(|r| r.is_one()).unwrap_or(false)
    }

    /// Copy of the topology with every rate-below-1 link removed.
    ///
    /// This is the comparison network in which partial accumulation buys
    /// nothing; the CLI exposes it as `--no-mia`.
    pub fn strip_weak_links(&self) -> Topology {
        Topology {
            n_nodes: self.n_nodes,
            links: self
                .links
                .iter()
                .filter(|(_, r)| r.is_one())
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            commodities: self.commodities.clone(),
        }
    }
}

/// Rounds every rate down to a unit fraction: `r -> 1/ceil(1/r)`.
///
/// Strong links (rate 1) are unchanged. Errors on any rate outside `(0, 1]`
/// rather than silently clamping.
pub fn normalize_rates(topo: &Topology) -> Result<Topology, ModelError> {
    let mut links = BTreeMap::new();
    for (&(a, b), r) in &topo.links {
        if !r.is_positive() || *r > Rat::one() {
            return Err(ModelError::RateOutOfRange {
                a,
                b,
                rate: format_rat(r),
            });
        }
        links.insert((a, b), unit_fraction_floor(r));
    }
    Ok(Topology {
        n_nodes: topo.n_nodes,
        links,
        commodities: topo.commodities.clone(),
    })
}

/// `1 / ceil(1/r)` for `r` in `(0, 1]`.
pub(crate) fn unit_fraction_floor(r: &Rat) -> Rat {
    // ceil(q/p) for the reciprocal p/q of r = p/q with p, q > 0.
    let (p, q) = (r.numer(), r.denom());
    let m = (q + p - BigInt::one()) / p;
    Rat::new(BigInt::one(), m)
}

/// Which subsets of nodes may transmit simultaneously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Patterns {
    /// Interference-free: any subset of nodes may be active. Kept symbolic;
    /// max-weight selection decomposes per node so enumeration is never
    /// needed, and the capacity solver uses the single full pattern.
    AllSubsets,
    /// Explicit list, in the order given by the config (ties in pattern
    /// selection break toward the earlier entry).
    Explicit(Vec<BTreeSet<NodeId>>),
}

/// Pattern collection plus optional per-pattern rate overrides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSet {
    pub patterns: Patterns,
    /// `(pattern index, directed link) -> rate`; applies in both directions
    /// (the loader expands each override entry reciprocally).
    pub overrides: BTreeMap<(usize, Link), Rat>,
}

impl PatternSet {
    pub fn all_subsets() -> Self {
        PatternSet {
            patterns: Patterns::AllSubsets,
            overrides: BTreeMap::new(),
        }
    }

    pub fn explicit(patterns: Vec<BTreeSet<NodeId>>) -> Self {
        PatternSet {
            patterns: Patterns::Explicit(patterns),
            overrides: BTreeMap::new(),
        }
    }

    pub fn is_all_subsets(&self) -> bool {
        matches!(self.patterns, Patterns::AllSubsets)
    }

    /// Rate of `(i, j)` while pattern `idx` is active.
    pub fn rate_in<'a>(&'a self, idx: usize, link: Link, base: &'a Rat) -> &'a Rat {
        self.overrides.get(&(idx, link)).unwrap_or(base)
    }

    /// The pattern list a solver should iterate over: explicit sets as given,
    /// or just the full set when any subset may be active (valid because
    /// idle nodes in the full pattern transmit nothing, and without
    /// per-pattern overrides activating fewer nodes never raises any rate).
    pub fn effective_patterns(&self, n_nodes: u32) -> Vec<BTreeSet<NodeId>> {
        match &self.patterns {
            Patterns::AllSubsets => vec![(1..=n_nodes).collect()],
            Patterns::Explicit(list) => list.clone(),
        }
    }
}

/// How many packets arrive in one slot for one stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalDist {
    /// 0 or 1 packet, mean `rate`.
    Bernoulli,
    /// Integer in `[0, a_max]`, mean `rate`: drawn as `floor(rate)` plus a
    /// Bernoulli on the fractional part, so the mean is exact.
    Batch,
}

/// One exogenous arrival stream into the network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalStream {
    pub node: NodeId,
    pub commodity: CommodityId,
    pub rate: Rat,
    pub dist: ArrivalDist,
    pub a_max: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ArrivalSpec {
    pub streams: Vec<ArrivalStream>,
}

impl ArrivalSpec {
    /// Largest per-slot arrival burst any stream can produce.
    pub fn a_max(&self) -> u32 {
        self.streams.iter().map(|s| s.a_max).max().unwrap_or(0)
    }

    /// Arrival-rate vector keyed by `(source, commodity)`.
    pub fn lambda_map(&self) -> BTreeMap<(NodeId, CommodityId), Rat> {
        let mut m = BTreeMap::new();
        for s in &self.streams {
            *m.entry((s.node, s.commodity)).or_insert_with(Rat::zero) += &s.rate;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    TSlot,
    Vq,
    VqEnhanced,
    Randomized,
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::TSlot => "tslot",
            PolicyKind::Vq => "vq",
            PolicyKind::VqEnhanced => "vq-enhanced",
            PolicyKind::Randomized => "randomized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyParams {
    pub kind: PolicyKind,
    /// Epoch length of the T-slot policy. 1 degenerates to classic
    /// backpressure where weak links are useless.
    pub t: u32,
    /// Decode threshold offset; must be at least 1 so that a decode always
    /// finds a whole packet's worth of accumulated information.
    pub eta: Rat,
    /// Weak-link suppression offset of the enhanced virtual-queue policy;
    /// 0 recovers the plain policy exactly.
    pub gamma: Rat,
}

impl Default for PolicyParams {
    fn default() -> Self {
        PolicyParams {
            kind: PolicyKind::Vq,
            t: 1,
            eta: Rat::one(),
            gamma: Rat::new(BigInt::one(), BigInt::from(2)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimParams {
    pub horizon: u64,
    pub seed: u64,
}

/// A complete, runnable experiment description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub topology: Topology,
    pub patterns: PatternSet,
    pub arrivals: ArrivalSpec,
    pub policy: PolicyParams,
    pub sim: SimParams,
}

impl NetworkConfig {
    /// Sets every declared arrival stream's rate to `lambda` (the symmetric
    /// per-flow load used by sweeps).
    pub fn with_uniform_rate(&self, lambda: &Rat) -> NetworkConfig {
        let mut c = self.clone();
        for s in &mut c.arrivals.streams {
            s.rate = lambda.clone();
        }
        c
    }

    /// Drops weak links from the topology (and from pattern-rate overrides).
    pub fn without_weak_links(&self) -> NetworkConfig {
        let mut c = self.clone();
        c.topology = self.topology.strip_weak_links();
        c.patterns.overrides = self
            .patterns
            .overrides
            .iter()
            .filter(|((_, (a, b)), _)| c.topology.links.contains_key(&(*a, *b)))
            .map(|(k, v)| (*k, v.clone()))
            .collect();
        c
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("link ({a},{b}) has rate {rate}, outside (0, 1]")]
    RateOutOfRange { a: NodeId, b: NodeId, rate: String },
}

/// A single failed configuration check. `validate` returns all of them at
/// once rather than stopping at the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NodeOutOfRange { what: String, node: NodeId },
    SelfLink { node: NodeId },
    Reciprocity { a: NodeId, b: NodeId },
    RateNotUnitFraction { a: NodeId, b: NodeId, rate: String },
    PatternNotClosed { pattern: Vec<NodeId>, missing: Vec<NodeId> },
    EmptyPatternMissing,
    OverridesNeedExplicitPatterns,
    OverrideOutOfRange { index: usize, a: NodeId, b: NodeId },
    EtaBelowOne { eta: String },
    EpochLengthZero,
    GammaNegative { gamma: String },
    ArrivalExceedsCap { node: NodeId, dest: CommodityId, rate: String, a_max: u32 },
    BernoulliNeedsUnitCap { node: NodeId, dest: CommodityId, a_max: u32 },
    UnknownCommodity { node: NodeId, dest: CommodityId },
    DuplicateArrival { node: NodeId, dest: CommodityId },
    SelfArrival { node: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NodeOutOfRange { what, node } => {
                write!(f, "{what} references node {node}, outside 1..=N")
            }
            SelfLink { node } => write!(f, "self-link at node {node}"),
            Reciprocity { a, b } => {
                write!(f, "link ({a},{b}) is not reciprocal: missing or unequal reverse rate")
            }
            RateNotUnitFraction { a, b, rate } => {
                write!(f, "link ({a},{b}) rate {rate} is not a unit fraction; run rate normalization first")
            }
            PatternNotClosed { pattern, missing } => write!(
                f,
                "pattern set is not downward closed: contains {pattern:?} but not its subset {missing:?}"
            ),
            EmptyPatternMissing => write!(f, "explicit pattern set must contain the empty pattern"),
            OverridesNeedExplicitPatterns => write!(
                f,
                "per-pattern rate overrides require an explicit pattern list, not \"all-subsets\""
            ),
            OverrideOutOfRange { index, a, b } => write!(
                f,
                "pattern-rate override (pattern {index}, link ({a},{b})) references a pattern or link that does not exist"
            ),
            EtaBelowOne { eta } => {
                write!(f, "eta = {eta} but the decode threshold requires eta >= 1")
            }
            EpochLengthZero => write!(f, "T must be at least 1"),
            GammaNegative { gamma } => write!(f, "gamma = {gamma} but gamma >= 0 is required"),
            ArrivalExceedsCap { node, dest, rate, a_max } => write!(
                f,
                "arrival stream ({node} -> {dest}) has rate {rate} above its per-slot cap {a_max}"
            ),
            BernoulliNeedsUnitCap { node, dest, a_max } => write!(
                f,
                "arrival stream ({node} -> {dest}) is Bernoulli but a_max = {a_max} (must be 1)"
            ),
            UnknownCommodity { node, dest } => write!(
                f,
                "arrival stream ({node} -> {dest}) targets an undeclared commodity"
            ),
            DuplicateArrival { node, dest } => {
                write!(f, "duplicate arrival stream for ({node} -> {dest})")
            }
            SelfArrival { node } => {
                write!(f, "arrival stream at node {node} targets itself")
            }
        }
    }
}

/// Checks every structural invariant of a config and returns the complete
/// list of failures (empty means valid).
pub fn validate(config: &NetworkConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let topo = &config.topology;
    let n = topo.n_nodes;
    let in_range = |id: NodeId| id >= 1 && id <= n;

    for (&(a, b), r) in &topo.links {
        if !in_range(a) || !in_range(b) {
            out.push(Violation::NodeOutOfRange {
                what: format!("link ({a},{b})"),
                node: if in_range(a) { b } else { a },
            });
            continue;
        }
        if a == b {
            out.push(Violation::SelfLink { node: a });
            continue;
        }
        match topo.links.get(&(b, a)) {
            Some(rev) if rev == r => {}
            // Report each non-reciprocal pair once, from its smaller endpoint.
            _ if a < b => out.push(Violation::Reciprocity { a, b }),
            _ => {}
        }
        if !r.is_positive() || !(Rat::one() / r).is_integer() {
            out.push(Violation::RateNotUnitFraction {
                a,
                b,
                rate: format_rat(r),
            });
        }
    }

    for &c in &topo.commodities {
        if !in_range(c) {
            out.push(Violation::NodeOutOfRange {
                what: "commodity destination".into(),
                node: c,
            });
        }
    }

    if let Patterns::Explicit(list) = &config.patterns.patterns {
        let members: BTreeSet<&BTreeSet<NodeId>> = list.iter().collect();
        if !members.contains(&BTreeSet::new()) {
            out.push(Violation::EmptyPatternMissing);
        }
        for s in list {
            for &node in s {
                if !in_range(node) {
                    out.push(Violation::NodeOutOfRange {
                        what: format!("pattern {:?}", s.iter().collect::<Vec<_>>()),
                        node,
                    });
                }
            }
            // Checking one-element-removed subsets suffices: closure failures
            // surface transitively.
            for &drop in s {
                let mut sub = s.clone();
                sub.remove(&drop);
                if !members.contains(&sub) {
                    out.push(Violation::PatternNotClosed {
                        pattern: s.iter().copied().collect(),
                        missing: sub.iter().copied().collect(),
                    });
                }
            }
        }
    }

    if !config.patterns.overrides.is_empty() {
        match &config.patterns.patterns {
            Patterns::AllSubsets => out.push(Violation::OverridesNeedExplicitPatterns),
            Patterns::Explicit(list) => {
                for &(idx, (a, b)) in config.patterns.overrides.keys() {
                    if idx >= list.len() || !topo.links.contains_key(&(a, b)) {
                        out.push(Violation::OverrideOutOfRange { index: idx, a, b });
                    }
                }
            }
        }
    }

    if config.policy.eta < Rat::one() {
        out.push(Violation::EtaBelowOne {
            eta: format_rat(&config.policy.eta),
        });
    }
    if config.policy.t == 0 {
        out.push(Violation::EpochLengthZero);
    }
    if config.policy.gamma.is_negative() {
        out.push(Violation::GammaNegative {
            gamma: format_rat(&config.policy.gamma),
        });
    }

    let mut seen = BTreeSet::new();
    for s in &config.arrivals.streams {
        if !in_range(s.node) || !in_range(s.commodity) {
            out.push(Violation::NodeOutOfRange {
                what: format!("arrival stream ({} -> {})", s.node, s.commodity),
                node: if in_range(s.node) { s.commodity } else { s.node },
            });
            continue;
        }
        if s.node == s.commodity {
            out.push(Violation::SelfArrival { node: s.node });
        }
        if !topo.commodities.contains(&s.commodity) {
            out.push(Violation::UnknownCommodity {
                node: s.node,
                dest: s.commodity,
            });
        }
        if !seen.insert((s.node, s.commodity)) {
            out.push(Violation::DuplicateArrival {
                node: s.node,
                dest: s.commodity,
            });
        }
        if s.rate.is_negative() || s.rate > Rat::from(BigInt::from(s.a_max)) {
            out.push(Violation::ArrivalExceedsCap {
                node: s.node,
                dest: s.commodity,
                rate: format_rat(&s.rate),
                a_max: s.a_max,
            });
        }
        if s.dist == ArrivalDist::Bernoulli && s.a_max != 1 {
            out.push(Violation::BernoulliNeedsUnitCap {
                node: s.node,
                dest: s.commodity,
                a_max: s.a_max,
            });
        }
    }

    out
}

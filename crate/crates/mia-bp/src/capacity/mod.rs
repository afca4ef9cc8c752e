//! Stability-region oracles.
//!
//! The achievable arrival-rate region of a network is characterized by a
//! linear program over per-commodity link flows, activation-pattern
//! probabilities, and per-node routing shares. This module builds that LP in
//! two formulations and answers exact-rational queries against it:
//!
//! * the **direct** region: one flow layer per commodity, conservation at
//!   every non-destination node, per-link capacity tied to pattern shares;
//! * the **layered** region: the same network with each link split into a
//!   commitment stage, an information-transfer stage, and a decode stage
//!   (the pipeline the per-slot virtual-queue scheduler actually runs).
//!   The two regions coincide; the layered build exists so that claim is
//!   checkable instead of assumed.
//!
//! Queries: feasibility of a given rate vector, the maximum uniform margin
//! that can be added before leaving the region, the exact boundary crossing
//! along a ray, and extraction of a stationary randomized policy from a
//! feasible certificate.

pub mod simplex;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::{One, Signed, Zero};
use thiserror::Error;

use crate::model::{CommodityId, NodeId, PatternSet, Topology};
use crate::rational::{format_rat, Rat};
use simplex::{Cmp, LpBuilder, LpOutcome};

/// A directed per-commodity flow entry `(from, to, commodity)`.
pub type FlowKey = (NodeId, NodeId, CommodityId);

/// Which entries of the rate vector receive the margin increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginMode {
    /// Only `(node, commodity)` pairs with a positive arrival rate. This is
    /// the margin the backlog-bound theorems quantify over.
    ActiveFlows,
    /// Every `(node, commodity)` pair with `node != commodity`. Uniform
    /// slack in every conservation row; the layered-region comparison
    /// factor `1/(2d+1)` is only guaranteed in this mode.
    AllFlows,
}

/// An exact margin, possibly infinite (nothing constrains the increment,
/// e.g. an active-flows query on an all-zero rate vector).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Margin {
    Finite(Rat),
    Unbounded,
}

impl Margin {
    pub fn is_nonnegative(&self) -> bool {
        match self {
            Margin::Finite(r) => !r.is_negative(),
            Margin::Unbounded => true,
        }
    }

    pub fn finite(&self) -> Option<&Rat> {
        match self {
            Margin::Finite(r) => Some(r),
            Margin::Unbounded => None,
        }
    }
}

impl fmt::Display for Margin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Margin::Finite(r) => f.write_str(&format_rat(r)),
            Margin::Unbounded => f.write_str("+inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Region {
    Direct,
    Layered,
}

impl Region {
    /// Flow layers: the direct region has a single layer 0; the layered
    /// region has commitment (1), transfer (2), and decode (3).
    fn layers(self) -> &'static [u8] {
        match self {
            Region::Direct => &[0],
            Region::Layered => &[1, 2, 3],
        }
    }

    /// Layer feeding conservation inflow at the receiving node.
    fn in_layer(self) -> u8 {
        match self {
            Region::Direct => 0,
            Region::Layered => 3,
        }
    }

    /// Layer drained by conservation outflow at the sending node.
    fn out_layer(self) -> u8 {
        match self {
            Region::Direct => 0,
            Region::Layered => 1,
        }
    }

    /// Layer the physical link-rate constraint applies to.
    fn link_layer(self) -> u8 {
        match self {
            Region::Direct => 0,
            Region::Layered => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Var {
    Flow {
        layer: u8,
        i: NodeId,
        j: NodeId,
        c: CommodityId,
    },
    /// Probability that activation pattern `s` is in effect.
    PatternProb(usize),
    /// Joint probability that pattern `s` is active and node `i` spends its
    /// transmission on `(commodity c, forwarder j)`: the product that
    /// linearizes pattern probability times routing probability.
    Share {
        s: usize,
        i: NodeId,
        j: NodeId,
        c: CommodityId,
    },
    MarginPos,
    MarginNeg,
    RayScale,
}

enum Perturb<'a> {
    None,
    Margin(&'a BTreeSet<(NodeId, CommodityId)>),
    Ray(&'a BTreeMap<(NodeId, CommodityId), Rat>),
}

/// A built region LP, ready to solve.
pub struct CapacityLp {
    lp: LpBuilder,
    vars: Vec<Var>,
    patterns: Vec<BTreeSet<NodeId>>,
}

impl CapacityLp {
    /// Does a flow assignment exist? Equivalent to membership of the rate
    /// vector in the region.
    pub fn feasible(&self) -> bool {
        self.lp.solve().is_feasible()
    }

    pub fn solve(&self) -> LpOutcome {
        self.lp.solve()
    }
}

/// Builds the direct-region membership LP for `lambda`.
///
/// Panics if per-pattern rate overrides are combined with the symbolic
/// all-subsets pattern set; config validation rejects that combination
/// before it can reach here.
pub fn build_capacity_lp(
    topo: &Topology,
    patterns: &PatternSet,
    lambda: &BTreeMap<(NodeId, CommodityId), Rat>,
) -> CapacityLp {
    build_lp(topo, patterns, lambda, Region::Direct, Perturb::None)
}

/// Builds the layered-region membership LP (the virtual-queue pipeline's
/// network) for `lambda`. Same panics as [`build_capacity_lp`].
pub fn build_virtual_capacity_lp(
    topo: &Topology,
    patterns: &PatternSet,
    lambda: &BTreeMap<(NodeId, CommodityId), Rat>,
) -> CapacityLp {
    build_lp(topo, patterns, lambda, Region::Layered, Perturb::None)
}

fn build_lp(
    topo: &Topology,
    patterns: &PatternSet,
    lambda: &BTreeMap<(NodeId, CommodityId), Rat>,
    region: Region,
    perturb: Perturb<'_>,
) -> CapacityLp {
    assert!(
        patterns.overrides.is_empty() || !patterns.is_all_subsets(),
        "per-pattern rate overrides require an explicit pattern list"
    );
    debug_assert!(
        lambda.keys().all(|(i, c)| i != c),
        "arrival rate addressed to its own source node"
    );

    let pats = patterns.effective_patterns(topo.n_nodes);
    let commodities = &topo.commodities;

    // Variable layout.
    let mut vars = Vec::new();
    for &layer in region.layers() {
        for (&(i, j), _) in &topo.links {
            for &c in commodities {
                if i != c {
                    vars.push(Var::Flow { layer, i, j, c });
                }
            }
        }
    }
    for (s, members) in pats.iter().enumerate() {
        vars.push(Var::PatternProb(s));
        for &i in members {
            for j in topo.neighbors(i) {
                for &c in commodities {
                    vars.push(Var::Share { s, i, j, c });
                }
            }
        }
    }
    match perturb {
        Perturb::None => {}
        Perturb::Margin(_) => {
            vars.push(Var::MarginPos);
            vars.push(Var::MarginNeg);
        }
        Perturb::Ray(_) => vars.push(Var::RayScale),
    }
    let index: BTreeMap<Var, usize> = vars.iter().enumerate().map(|(n, v)| (*v, n)).collect();
    let mut lp = LpBuilder::new(vars.len());

    // Conservation at every non-destination node: inflow + arrivals
    // (+ perturbation) <= outflow.
    for &c in commodities {
        for i in 1..=topo.n_nodes {
            if i == c {
                continue;
            }
            let mut row: Vec<(usize, Rat)> = Vec::new();
            for (&(l, _), _) in topo.links.range((0, i)..(u32::MAX, u32::MAX)) {
                // range over all links is wasteful; done below instead
                let _ = l;
                break;
            }
            for (&(l, m), _) in &topo.links {
                if m == i && l != c {
                    let v = index[&Var::Flow {
                        layer: region.in_layer(),
                        i: l,
                        j: i,
                        c,
                    }];
                    row.push((v, Rat::one()));
                }
            }
            for j in topo.neighbors(i) {
                let v = index[&Var::Flow {
                    layer: region.out_layer(),
                    i,
                    j,
                    c,
                }];
                row.push((v, -Rat::one()));
            }
            match &perturb {
                Perturb::None => {}
                Perturb::Margin(mask) => {
                    if mask.contains(&(i, c)) {
                        row.push((index[&Var::MarginPos], Rat::one()));
                        row.push((index[&Var::MarginNeg], -Rat::one()));
                    }
                }
                Perturb::Ray(direction) => {
                    if let Some(d) = direction.get(&(i, c)) {
                        if !d.is_zero() {
                            row.push((index[&Var::RayScale], d.clone()));
                        }
                    }
                }
            }
            let base = lambda.get(&(i, c)).cloned().unwrap_or_else(Rat::zero);
            lp.constraint(&row, Cmp::Le, -base);
        }
    }

    // Layer ordering: commitment <= transfer <= decode, per flow entry.
    if region == Region::Layered {
        for (&(i, j), _) in &topo.links {
            for &c in commodities {
                if i == c {
                    continue;
                }
                for (lo, hi) in [(1u8, 2u8), (2, 3)] {
                    let a = index[&Var::Flow { layer: lo, i, j, c }];
                    let b = index[&Var::Flow { layer: hi, i, j, c }];
                    lp.constraint(
                        &[(a, Rat::one()), (b, -Rat::one())],
                        Cmp::Le,
                        Rat::zero(),
                    );
                }
            }
        }
    }

    // Physical link constraint: total commodity flow on (i,j) is covered by
    // the time shares node i spends transmitting on (i,j), weighted by the
    // link rate in effect under each pattern.
    for (&(i, j), base_rate) in &topo.links {
        let mut row: Vec<(usize, Rat)> = Vec::new();
        for &c in commodities {
            if i != c {
                let v = index[&Var::Flow {
                    layer: region.link_layer(),
                    i,
                    j,
                    c,
                }];
                row.push((v, Rat::one()));
            }
        }
        let mut any_share = false;
        for (s, members) in pats.iter().enumerate() {
            if !members.contains(&i) {
                continue;
            }
            let r = patterns.rate_in(s, (i, j), base_rate);
            for &c in commodities {
                row.push((index[&Var::Share { s, i, j, c }], -r.clone()));
                any_share = true;
            }
        }
        if !row.is_empty() {
            let _ = any_share;
            lp.constraint(&row, Cmp::Le, Rat::zero());
        }
    }

    // Each active node's shares sum to its pattern's probability (a node in
    // an active pattern always spends its slot on exactly one choice; nodes
    // with no neighbors are exempt).
    for (s, members) in pats.iter().enumerate() {
        for &i in members {
            let mut row: Vec<(usize, Rat)> = Vec::new();
            for j in topo.neighbors(i) {
                for &c in commodities {
                    row.push((index[&Var::Share { s, i, j, c }], Rat::one()));
                }
            }
            if row.is_empty() {
                continue;
            }
            row.push((index[&Var::PatternProb(s)], -Rat::one()));
            lp.constraint(&row, Cmp::Eq, Rat::zero());
        }
    }

    // Pattern probabilities form a (sub-)distribution.
    let budget: Vec<(usize, Rat)> = (0..pats.len())
        .map(|s| (index[&Var::PatternProb(s)], Rat::one()))
        .collect();
    if !budget.is_empty() {
        lp.constraint(&budget, Cmp::Le, Rat::one());
    }

    match perturb {
        Perturb::None => {}
        Perturb::Margin(_) => {
            lp.objective(index[&Var::MarginPos], Rat::one());
            lp.objective(index[&Var::MarginNeg], -Rat::one());
        }
        Perturb::Ray(_) => lp.objective(index[&Var::RayScale], Rat::one()),
    }

    CapacityLp {
        lp,
        vars,
        patterns: pats,
    }
}

/// A solved margin query with the flow assignment that witnesses it.
#[derive(Clone, Debug)]
pub struct CapacityCertificate {
    /// Whether the base rate vector itself lies in the region
    /// (margin >= 0).
    pub feasible: bool,
    pub margin: Margin,
    /// The base rate vector the query was posed at.
    pub lambda: BTreeMap<(NodeId, CommodityId), Rat>,
    /// Entries that received the margin increment.
    pub mask: BTreeSet<(NodeId, CommodityId)>,
    /// Nonzero flows at the optimum, at the perturbed rates.
    pub flows: BTreeMap<FlowKey, Rat>,
    /// The pattern list `pattern_probs` indexes into.
    pub patterns: Vec<BTreeSet<NodeId>>,
    pub pattern_probs: Vec<Rat>,
    /// Nonzero joint shares `(pattern, (i, j, c))` at the optimum.
    pub shares: BTreeMap<(usize, FlowKey), Rat>,
}

impl CapacityCertificate {
    /// The rate vector the witness flows actually support:
    /// `lambda + margin` on masked entries.
    pub fn effective_lambda(&self) -> BTreeMap<(NodeId, CommodityId), Rat> {
        let mut out = self.lambda.clone();
        if let Margin::Finite(eps) = &self.margin {
            for &key in &self.mask {
                let entry = out.entry(key).or_insert_with(Rat::zero);
                *entry += eps;
            }
        }
        out
    }

    /// Per-(pattern, node) routing distributions over `(commodity,
    /// forwarder)`: shares divided by the pattern probability where it is
    /// positive, uniform over the node's choices where it is zero.
    pub fn routing(&self, topo: &Topology) -> BTreeMap<(usize, NodeId), Vec<((CommodityId, NodeId), Rat)>> {
        let mut out = BTreeMap::new();
        for (s, members) in self.patterns.iter().enumerate() {
            let prob = &self.pattern_probs[s];
            for &i in members {
                let options: Vec<(CommodityId, NodeId)> = topo
                    .commodities
                    .iter()
                    .flat_map(|&c| topo.neighbors(i).map(move |j| (c, j)))
                    .collect();
                if options.is_empty() {
                    continue;
                }
                let dist: Vec<((CommodityId, NodeId), Rat)> = if prob.is_zero() {
                    let u = Rat::new(1.into(), (options.len() as i64).into());
                    options.into_iter().map(|o| (o, u.clone())).collect()
                } else {
                    options
                        .into_iter()
                        .map(|(c, j)| {
                            let phi = self
                                .shares
                                .get(&(s, (i, j, c)))
                                .cloned()
                                .unwrap_or_else(Rat::zero);
                            ((c, j), phi / prob)
                        })
                        .collect()
                };
                out.insert((s, i), dist);
            }
        }
        out
    }

    /// Replays the witness against every region constraint at the effective
    /// rates, in exact arithmetic. `Ok` means zero residue everywhere.
    pub fn verify(&self, topo: &Topology, patterns: &PatternSet) -> Result<(), String> {
        let lambda = self.effective_lambda();
        if self
            .flows
            .values()
            .chain(self.pattern_probs.iter())
            .chain(self.shares.values())
            .any(|v| v.is_negative())
        {
            return Err("negative variable in certificate".into());
        }
        for (&(i, j, c), _) in &self.flows {
            if i == c {
                return Err(format!("flow of commodity {c} out of its destination on ({i},{j})"));
            }
            if !topo.links.contains_key(&(i, j)) {
                return Err(format!("flow on nonexistent link ({i},{j})"));
            }
        }
        for &c in &topo.commodities {
            for i in 1..=topo.n_nodes {
                if i == c {
                    continue;
                }
                let inflow: Rat = self
                    .flows
                    .iter()
                    .filter(|(&(_, m, cc), _)| m == i && cc == c)
                    .map(|(_, v)| v.clone())
                    .sum();
                let outflow: Rat = self
                    .flows
                    .iter()
                    .filter(|(&(l, _, cc), _)| l == i && cc == c)
                    .map(|(_, v)| v.clone())
                    .sum();
                let arr = lambda.get(&(i, c)).cloned().unwrap_or_else(Rat::zero);
                if inflow.clone() + &arr > outflow {
                    return Err(format!(
                        "conservation fails at node {i}, commodity {c}: {} + {} > {}",
                        format_rat(&inflow),
                        format_rat(&arr),
                        format_rat(&outflow)
                    ));
                }
            }
        }
        for (&(i, j), base) in &topo.links {
            let flow: Rat = self
                .flows
                .iter()
                .filter(|(&(l, m, _), _)| l == i && m == j)
                .map(|(_, v)| v.clone())
                .sum();
            let mut cover = Rat::zero();
            for (s, members) in self.patterns.iter().enumerate() {
                if !members.contains(&i) {
                    continue;
                }
                let r = patterns.rate_in(s, (i, j), base);
                for &c in &topo.commodities {
                    if let Some(phi) = self.shares.get(&(s, (i, j, c))) {
                        cover += phi * r;
                    }
                }
            }
            if flow > cover {
                return Err(format!(
                    "link ({i},{j}) carries {} but its shares only cover {}",
                    format_rat(&flow),
                    format_rat(&cover)
                ));
            }
        }
        for (s, members) in self.patterns.iter().enumerate() {
            for &i in members {
                if topo.neighbors(i).next().is_none() {
                    continue;
                }
                let total: Rat = self
                    .shares
                    .iter()
                    .filter(|(&(ss, (l, _, _)), _)| ss == s && l == i)
                    .map(|(_, v)| v.clone())
                    .sum();
                if total != self.pattern_probs[s] {
                    return Err(format!(
                        "node {i} shares in pattern {s} sum to {} != pattern probability {}",
                        format_rat(&total),
                        format_rat(&self.pattern_probs[s])
                    ));
                }
            }
        }
        let total_prob: Rat = self.pattern_probs.iter().cloned().sum();
        if total_prob > Rat::one() {
            return Err(format!(
                "pattern probabilities sum to {} > 1",
                format_rat(&total_prob)
            ));
        }
        Ok(())
    }
}

/// Maximizes the uniform increment that keeps `lambda` inside the direct
/// region. Negative margin means `lambda` is infeasible and reports the
/// distance; an unbounded margin means no masked entry constrains it
/// (active-flows mode with an all-zero rate vector).
pub fn max_margin(
    topo: &Topology,
    patterns: &PatternSet,
    lambda: &BTreeMap<(NodeId, CommodityId), Rat>,
    mode: MarginMode,
) -> CapacityCertificate {
    let mask = margin_mask(topo, lambda, mode);
    let built = build_lp(topo, patterns, lambda, Region::Direct, Perturb::Margin(&mask));
    let (margin, solution) = match built.lp.solve() {
        LpOutcome::Optimal {
            objective,
            solution,
        } => (Margin::Finite(objective), solution),
        LpOutcome::Unbounded => (Margin::Unbounded, vec![Rat::zero(); built.lp.n_vars()]),
        LpOutcome::Infeasible => {
            unreachable!("margin LP is always feasible: the negative part is unbounded below")
        }
    };

    let mut flows = BTreeMap::new();
    let mut shares = BTreeMap::new();
    let mut pattern_probs = vec![Rat::zero(); built.patterns.len()];
    for (var, value) in built.vars.iter().zip(&solution) {
        if value.is_zero() {
            continue;
        }
        match *var {
            Var::Flow { i, j, c, .. } => {
                flows.insert((i, j, c), value.clone());
            }
            Var::PatternProb(s) => pattern_probs[s] = value.clone(),
            Var::Share { s, i, j, c } => {
                shares.insert((s, (i, j, c)), value.clone());
            }
            Var::MarginPos | Var::MarginNeg | Var::RayScale => {}
        }
    }

    CapacityCertificate {
        feasible: margin.is_nonnegative(),
        margin,
        lambda: lambda.clone(),
        mask,
        flows,
        patterns: built.patterns,
        pattern_probs,
        shares,
    }
}

/// Margin of the layered region, same perturbation semantics as
/// [`max_margin`].
pub fn virtual_margin(
    topo: &Topology,
    patterns: &PatternSet,
    lambda: &BTreeMap<(NodeId, CommodityId), Rat>,
    mode: MarginMode,
) -> Margin {
    let mask = margin_mask(topo, lambda, mode);
    let built = build_lp(
        topo,
        patterns,
        lambda,
        Region::Layered,
        Perturb::Margin(&mask),
    );
    match built.lp.solve() {
        LpOutcome::Optimal { objective, .. } => Margin::Finite(objective),
        LpOutcome::Unbounded => Margin::Unbounded,
        LpOutcome::Infeasible => unreachable!("margin LP is always feasible"),
    }
}

fn margin_mask(
    topo: &Topology,
    lambda: &BTreeMap<(NodeId, CommodityId), Rat>,
    mode: MarginMode,
) -> BTreeSet<(NodeId, CommodityId)> {
    match mode {
        MarginMode::ActiveFlows => lambda
            .iter()
            .filter(|(_, r)| r.is_positive())
            .map(|(&k, _)| k)
            .collect(),
        MarginMode::AllFlows => topo
            .commodities
            .iter()
            .flat_map(|&c| (1..=topo.n_nodes).filter(move |&i| i != c).map(move |i| (i, c)))
            .collect(),
    }
}

/// Largest `rho` with `rho * direction` inside the direct region: the exact
/// boundary crossing along the ray. Unbounded only if the direction vector
/// puts no load on any conservation row.
pub fn ray_boundary(
    topo: &Topology,
    patterns: &PatternSet,
    direction: &BTreeMap<(NodeId, CommodityId), Rat>,
) -> Margin {
    let zero = BTreeMap::new();
    let built = build_lp(topo, patterns, &zero, Region::Direct, Perturb::Ray(direction));
    match built.lp.solve() {
        LpOutcome::Optimal { objective, .. } => Margin::Finite(objective),
        LpOutcome::Unbounded => Margin::Unbounded,
        LpOutcome::Infeasible => unreachable!("the origin is always on the ray"),
    }
}

/// A stationary randomized schedule: sample a pattern each slot, then each
/// active node samples its `(commodity, forwarder)` choice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StationaryPolicy {
    /// `(members, probability)`; residual probability mass idles the slot.
    pub patterns: Vec<(BTreeSet<NodeId>, Rat)>,
    /// `(pattern index, node)` to distribution over `(commodity,
    /// forwarder)`; each distribution sums to 1.
    pub choices: BTreeMap<(usize, NodeId), Vec<((CommodityId, NodeId), Rat)>>,
}

impl StationaryPolicy {
    /// A policy that never transmits.
    pub fn idle() -> Self {
        StationaryPolicy {
            patterns: Vec::new(),
            choices: BTreeMap::new(),
        }
    }

    /// Long-run fraction of slots link `(i, j)` spends transmitting
    /// commodity `c` (the certificate share).
    pub fn link_share(&self, i: NodeId, j: NodeId, c: CommodityId) -> Rat {
        let mut total = Rat::zero();
        for (s, (members, prob)) in self.patterns.iter().enumerate() {
            if !members.contains(&i) {
                continue;
            }
            if let Some(dist) = self.choices.get(&(s, i)) {
                for ((cc, jj), p) in dist {
                    if *cc == c && *jj == j {
                        total += prob * p;
                    }
                }
            }
        }
        total
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CertificateError {
    #[error("cannot extract a policy from an infeasible certificate")]
    Infeasible,
    #[error("certificate carries positive arrival rates but no active pattern")]
    DegeneratePatterns,
}

/// Turns a feasible certificate into a runnable stationary policy.
pub fn extract_randomized_policy(
    topo: &Topology,
    cert: &CapacityCertificate,
) -> Result<StationaryPolicy, CertificateError> {
    if !cert.feasible {
        return Err(CertificateError::Infeasible);
    }
    let demand = cert.lambda.values().any(|r| r.is_positive());
    let live = cert.pattern_probs.iter().any(|p| p.is_positive());
    if !demand && !live {
        return Ok(StationaryPolicy::idle());
    }
    if !live {
        return Err(CertificateError::DegeneratePatterns);
    }
    let routing = cert.routing(topo);
    let mut patterns = Vec::new();
    let mut choices = BTreeMap::new();
    for (s, members) in cert.patterns.iter().enumerate() {
        if !cert.pattern_probs[s].is_positive() {
            continue;
        }
        let idx = patterns.len();
        patterns.push((members.clone(), cert.pattern_probs[s].clone()));
        for &i in members {
            if let Some(dist) = routing.get(&(s, i)) {
                debug_assert_eq!(
                    dist.iter().map(|(_, p)| p.clone()).sum::<Rat>(),
                    Rat::one(),
                    "routing distribution must be normalized"
                );
                choices.insert((idx, i), dist.clone());
            }
        }
    }
    Ok(StationaryPolicy { patterns, choices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Patterns;
    use crate::rational::rat;

    fn net(n: u32, pairs: &[(NodeId, NodeId, Rat)], commodities: &[CommodityId]) -> Topology {
        let mut links = BTreeMap::new();
        for (a, b, r) in pairs {
            links.insert((*a, *b), r.clone());
            links.insert((*b, *a), r.clone());
        }
        Topology {
            n_nodes: n,
            links,
            commodities: commodities.iter().copied().collect(),
        }
    }

    fn two_node() -> Topology {
        net(2, &[(1, 2, rat(1, 2))], &[2])
    }

    /// Reference net: strong square 1-2-3-4 plus the rate-1/9 side link.
    fn four_node() -> Topology {
        net(
            4,
            &[
                (1, 2, rat(1, 1)),
                (2, 4, rat(1, 1)),
                (2, 3, rat(1, 1)),
                (3, 4, rat(1, 1)),
                (1, 4, rat(1, 9)),
            ],
            &[4],
        )
    }

    fn sym(rate: Rat) -> BTreeMap<(NodeId, CommodityId), Rat> {
        [((1, 4), rate.clone()), ((2, 4), rate)].into()
    }

    #[test]
    fn two_node_feasibility_flips_at_the_link_rate() {
        let topo = two_node();
        let pats = PatternSet::all_subsets();
        let ok: BTreeMap<_, _> = [((1u32, 2u32), rat(1, 3))].into();
        assert!(build_capacity_lp(&topo, &pats, &ok).feasible());
        let too_much: BTreeMap<_, _> = [((1u32, 2u32), rat(3, 5))].into();
        assert!(!build_capacity_lp(&topo, &pats, &too_much).feasible());
    }

    #[test]
    fn two_node_margin_is_one_sixth() {
        let topo = two_node();
        let lambda: BTreeMap<_, _> = [((1u32, 2u32), rat(1, 3))].into();
        let cert = max_margin(&topo, &PatternSet::all_subsets(), &lambda, MarginMode::ActiveFlows);
        assert!(cert.feasible);
        assert_eq!(cert.margin, Margin::Finite(rat(1, 6)));
        cert.verify(&topo, &PatternSet::all_subsets()).unwrap();
    }

    #[test]
    fn two_node_infeasible_margin_reports_distance() {
        let topo = two_node();
        let lambda: BTreeMap<_, _> = [((1u32, 2u32), rat(3, 5))].into();
        let cert = max_margin(&topo, &PatternSet::all_subsets(), &lambda, MarginMode::ActiveFlows);
        assert!(!cert.feasible);
        assert_eq!(cert.margin, Margin::Finite(rat(-1, 10)));
        // The witness satisfies the constraints at the reduced rates.
        cert.verify(&topo, &PatternSet::all_subsets()).unwrap();
    }

    #[test]
    fn four_node_corner_has_zero_margin() {
        let topo = four_node();
        let cert = max_margin(
            &topo,
            &PatternSet::all_subsets(),
            &sym(rat(9, 17)),
            MarginMode::ActiveFlows,
        );
        assert!(cert.feasible);
        assert_eq!(cert.margin, Margin::Finite(rat(0, 1)));
    }

    #[test]
    fn four_node_margin_at_half_is_one_thirty_fourth() {
        let topo = four_node();
        for mode in [MarginMode::ActiveFlows, MarginMode::AllFlows] {
            let cert = max_margin(&topo, &PatternSet::all_subsets(), &sym(rat(1, 2)), mode);
            assert_eq!(cert.margin, Margin::Finite(rat(1, 34)), "mode {mode:?}");
            cert.verify(&topo, &PatternSet::all_subsets()).unwrap();
        }
    }

    #[test]
    fn four_node_margin_at_052() {
        let topo = four_node();
        let cert = max_margin(
            &topo,
            &PatternSet::all_subsets(),
            &sym(rat(13, 25)),
            MarginMode::ActiveFlows,
        );
        // 9/17 - 13/25 = 4/425.
        assert_eq!(cert.margin, Margin::Finite(rat(4, 425)));
    }

    #[test]
    fn zero_rates_give_unbounded_active_margin_and_finite_all_margin() {
        let topo = two_node();
        let lambda = BTreeMap::new();
        let active = max_margin(&topo, &PatternSet::all_subsets(), &lambda, MarginMode::ActiveFlows);
        assert!(active.feasible);
        assert_eq!(active.margin, Margin::Unbounded);
        let all = max_margin(&topo, &PatternSet::all_subsets(), &lambda, MarginMode::AllFlows);
        assert_eq!(all.margin, Margin::Finite(rat(1, 2)));
    }

    #[test]
    fn symmetric_ray_hits_the_four_node_corner() {
        let topo = four_node();
        let dir: BTreeMap<_, _> = [((1u32, 4u32), rat(1, 1)), ((2, 4), rat(1, 1))].into();
        assert_eq!(
            ray_boundary(&topo, &PatternSet::all_subsets(), &dir),
            Margin::Finite(rat(9, 17))
        );
    }

    #[test]
    fn stripping_weak_links_moves_the_corner_to_one_half() {
        let topo = four_node().strip_weak_links();
        let dir: BTreeMap<_, _> = [((1u32, 4u32), rat(1, 1)), ((2, 4), rat(1, 1))].into();
        assert_eq!(
            ray_boundary(&topo, &PatternSet::all_subsets(), &dir),
            Margin::Finite(rat(1, 2))
        );
    }

    #[test]
    fn layered_region_matches_direct_region() {
        let topo = four_node();
        let pats = PatternSet::all_subsets();
        let lambda: BTreeMap<_, _> = [((1u32, 2u32), rat(1, 3))].into();
        assert!(build_virtual_capacity_lp(&two_node(), &pats, &lambda).feasible());
        for lam in [sym(rat(1, 2)), sym(rat(9, 17)), sym(rat(3, 5))] {
            let direct = max_margin(&topo, &pats, &lam, MarginMode::AllFlows);
            let layered = virtual_margin(&topo, &pats, &lam, MarginMode::AllFlows);
            assert_eq!(direct.margin, layered, "lambda {lam:?}");
        }
    }

    #[test]
    fn explicit_patterns_restrict_the_region() {
        // Only one of nodes 1, 2 may talk at a time; each has a rate-1 link
        // to node 3, so the symmetric boundary drops to 1/2 per flow.
        let topo = net(3, &[(1, 3, rat(1, 1)), (2, 3, rat(1, 1))], &[3]);
        let pats = PatternSet {
            patterns: Patterns::Explicit(vec![
                BTreeSet::new(),
                [1].into(),
                [2].into(),
            ]),
            overrides: BTreeMap::new(),
        };
        let dir: BTreeMap<_, _> = [((1u32, 3u32), rat(1, 1)), ((2, 3), rat(1, 1))].into();
        assert_eq!(ray_boundary(&topo, &pats, &dir), Margin::Finite(rat(1, 2)));
        // Interference-free, both can transmit every slot.
        assert_eq!(
            ray_boundary(&topo, &PatternSet::all_subsets(), &dir),
            Margin::Finite(rat(1, 1))
        );
    }

    #[test]
    fn pattern_rate_overrides_shrink_capacity() {
        // One pattern activates both endpoints but halves the (1,2) rate.
        let topo = net(2, &[(1, 2, rat(1, 1))], &[2]);
        let mut pats = PatternSet {
            patterns: Patterns::Explicit(vec![
                BTreeSet::new(),
                [1].into(),
                [2].into(),
                [1, 2].into(),
            ]),
            overrides: BTreeMap::new(),
        };
        pats.overrides.insert((3, (1, 2)), rat(1, 2));
        pats.overrides.insert((3, (2, 1)), rat(1, 2));
        let dir: BTreeMap<_, _> = [((1u32, 2u32), rat(1, 1))].into();
        // Best single choice: activate {1} alone at full rate.
        assert_eq!(ray_boundary(&topo, &pats, &dir), Margin::Finite(rat(1, 1)));
        // Forentity the two-member pattern only, the override bites.
        let mut only_joint = PatternSet {
            patterns: Patterns::Explicit(vec![BTreeSet::new(), [1, 2].into()]),
            overrides: BTreeMap::new(),
        };
        only_joint.overrides.insert((1, (1, 2)), rat(1, 2));
        only_joint.overrides.insert((1, (2, 1)), rat(1, 2));
        assert_eq!(
            ray_boundary(&topo, &only_joint, &dir),
            Margin::Finite(rat(1, 2))
        );
    }

    #[test]
    fn certificate_replay_catches_tampering() {
        let topo = four_node();
        let pats = PatternSet::all_subsets();
        let mut cert = max_margin(&topo, &pats, &sym(rat(1, 2)), MarginMode::ActiveFlows);
        cert.verify(&topo, &pats).unwrap();
        // Claim more flow on the weak link than its share covers.
        cert.flows.insert((1, 4, 4), rat(1, 2));
        assert!(cert.verify(&topo, &pats).is_err());
    }

    #[test]
    fn extracted_policy_reproduces_hand_certificate() {
        // Hand-built witness for the 2-node net at rate 1/3: transmit 2/3 of
        // slots, always commodity 2 toward node 2.
        let topo = two_node();
        let cert = CapacityCertificate {
            feasible: true,
            margin: Margin::Finite(rat(0, 1)),
            lambda: [((1u32, 2u32), rat(1, 3))].into(),
            mask: BTreeSet::new(),
            flows: [((1u32, 2u32, 2u32), rat(1, 3))].into(),
            patterns: vec![[1, 2].into()],
            pattern_probs: vec![rat(2, 3)],
            shares: [((0usize, (1u32, 2u32, 2u32)), rat(2, 3))].into(),
        };
        cert.verify(&topo, &PatternSet::all_subsets()).unwrap();
        let policy = extract_randomized_policy(&topo, &cert).unwrap();
        assert_eq!(policy.patterns.len(), 1);
        assert_eq!(policy.patterns[0].1, rat(2, 3));
        assert_eq!(policy.link_share(1, 2, 2), rat(2, 3));
        // Node 2 idles (its share of the pattern is uniform over its own
        // options only when the pattern probability is zero; here it holds
        // explicit zero shares).
        assert_eq!(policy.link_share(2, 1, 2), rat(0, 1));
    }

    #[test]
    fn zero_rate_certificate_extracts_idle_policy() {
        let topo = two_node();
        let cert = max_margin(
            &topo,
            &PatternSet::all_subsets(),
            &BTreeMap::new(),
            MarginMode::ActiveFlows,
        );
        let policy = extract_randomized_policy(&topo, &cert).unwrap();
        assert_eq!(policy, StationaryPolicy::idle());
    }

    #[test]
    fn degenerate_certificate_is_rejected() {
        let topo = two_node();
        let cert = CapacityCertificate {
            feasible: true,
            margin: Margin::Finite(rat(0, 1)),
            lambda: [((1u32, 2u32), rat(1, 3))].into(),
            mask: BTreeSet::new(),
            flows: BTreeMap::new(),
            patterns: vec![[1, 2].into()],
            pattern_probs: vec![rat(0, 1)],
            shares: BTreeMap::new(),
        };
        assert_eq!(
            extract_randomized_policy(&topo, &cert),
            Err(CertificateError::DegeneratePatterns)
        );
        let infeasible = CapacityCertificate {
            feasible: false,
            ..cert
        };
        assert_eq!(
            extract_randomized_policy(&topo, &infeasible),
            Err(CertificateError::Infeasible)
        );
    }

    #[test]
    fn monotone_in_lambda() {
        let topo = four_node();
        let pats = PatternSet::all_subsets();
        assert!(build_capacity_lp(&topo, &pats, &sym(rat(9, 17))).feasible());
        assert!(build_capacity_lp(&topo, &pats, &sym(rat(1, 4))).feasible());
        assert!(!build_capacity_lp(&topo, &pats, &sym(rat(5, 9))).feasible());
    }
}

//! Exact attacker locating.
//!
//! Each edge `P → N` carries `λ` MAC tags per packet under keys `X_PN` that
//! the parent derives from its own secret. The child can check only a secret
//! `δ`-subset `Y_PN`; the controller checks the other `λ − δ`. On an alert,
//! every node reports one random combination of what it received from each
//! parent together with the combined tags. Neither side can cheat about that
//! report without guessing tags it cannot compute, so the controller sees the
//! true set of polluted edges and blames exactly the nodes that have a
//! polluted outgoing edge but no polluted incoming one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{Basis, FieldVector, Gf256};
use crate::mac::{self, Dimensions, KeyedSpace, MacCache, MacKey, SpaceId, Tag};
use crate::prf::{BlockCipher, Key};
use crate::rlnc::{self, CodedPacket, Generation};
use crate::topology::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LocatingParams {
    pub lambda: usize,
    pub delta: usize,
    pub theta: usize,
}

impl LocatingParams {
    pub fn new(lambda: usize, delta: usize, theta: usize) -> Result<Self> {
        let p = LocatingParams { lambda, delta, theta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta == 0 || self.delta >= self.lambda {
            return Err(Error::invalid("delta", format!("need 1 <= delta < lambda, got delta = {}, lambda = {}", self.delta, self.lambda)));
        }
        if self.theta == 0 || self.theta > self.lambda - self.delta {
            return Err(Error::invalid(
                "theta",
                format!("need 1 <= theta <= lambda - delta = {}, got {}", self.lambda - self.delta, self.theta),
            ));
        }
        if self.lambda > u16::MAX as usize {
            return Err(Error::invalid("lambda", "too large"));
        }
        Ok(())
    }

    pub fn checked_by_controller(&self) -> usize {
        self.lambda - self.delta
    }
}

impl Default for LocatingParams {
    fn default() -> Self {
        LocatingParams { lambda: 19, delta: 9, theta: 3 }
    }
}

/// Geometry of locating tags: one symbol per key.
pub fn locating_dims(dims: Dimensions) -> Dimensions {
    Dimensions { l: 1, ..dims }
}

/// `C(n, k)`, exact.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The `index`-th `delta`-subset of `0..lambda` in lexicographic order.
pub fn unrank_subset(mut index: u128, lambda: usize, delta: usize) -> Result<Vec<usize>> {
    let total = binomial(lambda, delta);
    if index >= total {
        return Err(Error::IndexOutOfRange { index: index as usize, max: total.saturating_sub(1) as usize });
    }
    let mut out = Vec::with_capacity(delta);
    let mut next = 0;
    for slot in 0..delta {
        let remaining = delta - slot - 1;
        let mut x = next;
        loop {
            // subsets whose element at this slot is x
            let count = binomial(lambda - x - 1, remaining);
            if index < count {
                break;
            }
            index -= count;
            x += 1;
        }
        out.push(x);
        next = x + 1;
    }
    Ok(out)
}

/// Key `i` (1-based) of `X_PN`: two cipher blocks under the parent's secret.
pub fn edge_key(parent_secret: &Key, child: NodeId, i: usize) -> MacKey {
    let c = BlockCipher::new(parent_secret);
    let block = |half: u8| {
        let mut b = [0u8; 16];
        b[0] = 0x01;
        b[1..5].copy_from_slice(&child.0.to_be_bytes());
        b[5..9].copy_from_slice(&(i as u32).to_be_bytes());
        b[9] = half;
        c.encrypt(b)
    };
    MacKey::new(block(0), block(1))
}

/// Rank of the child's `δ`-subset, chosen with the child's secret.
pub fn subset_index(child_secret: &Key, parent: NodeId, params: &LocatingParams) -> u128 {
    let mut b = [0u8; 16];
    b[0] = 0x02;
    b[1..5].copy_from_slice(&parent.0.to_be_bytes());
    let out = BlockCipher::new(child_secret).encrypt(b);
    let raw = u64::from_be_bytes(out[..8].try_into().expect("8 bytes"));
    raw as u128 % binomial(params.lambda, params.delta)
}

/// Key material of one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeKeySets {
    pub parent: NodeId,
    pub child: NodeId,
    /// `X_PN`, known to the parent and the controller.
    pub x_set: Vec<MacKey>,
    /// Positions of `Y_PN` inside `x_set`, sorted; known to the child.
    pub y_indices: Vec<usize>,
}

impl EdgeKeySets {
    pub fn y_set(&self) -> Vec<MacKey> {
        self.y_indices.iter().map(|&i| self.x_set[i]).collect()
    }

    /// Positions the controller checks.
    pub fn complement_indices(&self) -> Vec<usize> {
        (0..self.x_set.len()).filter(|i| self.y_indices.binary_search(i).is_err()).collect()
    }

    pub fn y_complement(&self) -> Vec<MacKey> {
        self.complement_indices().into_iter().map(|i| self.x_set[i]).collect()
    }

    pub fn child_view(&self) -> ChildKeys {
        ChildKeys { indices: self.y_indices.clone(), keys: self.y_set() }
    }
}

/// What a child knows about its parent's tags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChildKeys {
    pub indices: Vec<usize>,
    pub keys: Vec<MacKey>,
}

pub fn derive_edge_keys(
    parent_secret: &Key,
    child_secret: &Key,
    parent: NodeId,
    child: NodeId,
    params: &LocatingParams,
) -> Result<EdgeKeySets> {
    params.validate()?;
    let x_set = (1..=params.lambda).map(|i| edge_key(parent_secret, child, i)).collect();
    let y_indices = unrank_subset(subset_index(child_secret, parent, params), params.lambda, params.delta)?;
    Ok(EdgeKeySets { parent, child, x_set, y_indices })
}

/// Per-node secrets shared with the controller.
#[derive(Debug, Clone)]
pub struct LocatingSecrets {
    pub node_secrets: BTreeMap<NodeId, Key>,
}

impl LocatingSecrets {
    pub fn random<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> Self {
        let node_secrets = topology
            .node_ids()
            .map(|id| {
                let mut k = [0u8; 16];
                rng.fill(&mut k);
                (id, k)
            })
            .collect();
        LocatingSecrets { node_secrets }
    }

    fn secret(&self, id: NodeId) -> Result<&Key> {
        self.node_secrets.get(&id).ok_or(Error::UnknownNode(id))
    }

    pub fn edge_keys(&self, parent: NodeId, child: NodeId, params: &LocatingParams) -> Result<EdgeKeySets> {
        derive_edge_keys(self.secret(parent)?, self.secret(child)?, parent, child, params)
    }

    /// Key sets of every edge in `topology`.
    pub fn all_edge_keys(
        &self,
        topology: &Topology,
        params: &LocatingParams,
    ) -> Result<BTreeMap<(NodeId, NodeId), EdgeKeySets>> {
        topology
            .edges()
            .iter()
            .map(|e| Ok(((e.from, e.to), self.edge_keys(e.from, e.to, params)?)))
            .collect()
    }
}

/// Locating keys bound to one generation, for tagging or checking many
/// packets without going through the cache each time.
#[derive(Debug, Clone)]
pub struct PreparedKeys {
    lambda: usize,
    indices: Vec<usize>,
    spaces: Vec<Arc<KeyedSpace>>,
    dims: Dimensions,
}

impl PreparedKeys {
    /// All `λ` keys of an edge, as the parent holds them.
    pub fn parent(x_set: &[MacKey], id: SpaceId, dims: Dimensions, cache: &MacCache) -> Result<Self> {
        let d = locating_dims(dims);
        let spaces = x_set.iter().map(|k| cache.get(k, id, d)).collect::<Result<_>>()?;
        Ok(PreparedKeys { lambda: x_set.len(), indices: (0..x_set.len()).collect(), spaces, dims })
    }

    /// The `δ` keys the child of an edge holds.
    pub fn child(child: &ChildKeys, lambda: usize, id: SpaceId, dims: Dimensions, cache: &MacCache) -> Result<Self> {
        let d = locating_dims(dims);
        let spaces = child.keys.iter().map(|k| cache.get(k, id, d)).collect::<Result<_>>()?;
        Ok(PreparedKeys { lambda, indices: child.indices.clone(), spaces, dims })
    }

    /// The `λ` tags of `y`; needs the full key set.
    pub fn tags(&self, y: &CodedPacket) -> Result<Tag> {
        if self.indices.len() != self.lambda {
            return Err(Error::Malformed(format!("tagging needs all {} keys, have {}", self.lambda, self.indices.len())));
        }
        let mut out = Vec::with_capacity(self.lambda);
        for ks in &self.spaces {
            out.push(ks.mac_instance(0, y.data())?.0);
        }
        Ok(Tag::from_bytes(out))
    }

    /// Checks the positions these keys cover.
    pub fn check(&self, y: &CodedPacket, tags: &Tag) -> Result<bool> {
        if tags.len() != self.lambda {
            return Err(Error::Malformed(format!("expected {} locating tags, got {}", self.lambda, tags.len())));
        }
        if y.len() != self.dims.packet_len() {
            return Err(Error::Malformed(format!("expected a {}-symbol packet, got {}", self.dims.packet_len(), y.len())));
        }
        for (&i, ks) in self.indices.iter().zip(&self.spaces) {
            if ks.mac_instance(0, y.data())? != tags.get(i) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// The `λ` tags of `y`, one symbol per key of `x_set`.
pub fn locating_emit(x_set: &[MacKey], id: SpaceId, dims: Dimensions, y: &CodedPacket, cache: &MacCache) -> Result<Tag> {
    PreparedKeys::parent(x_set, id, dims, cache)?.tags(y)
}

/// Child-side check of the `δ` tags it can verify.
pub fn locating_receive(
    child: &ChildKeys,
    lambda: usize,
    id: SpaceId,
    dims: Dimensions,
    y: &CodedPacket,
    tags: &Tag,
    cache: &MacCache,
) -> Result<bool> {
    PreparedKeys::child(child, lambda, id, dims, cache)?.check(y, tags)
}

/// Packets a node received from one parent, with their locating tags.
#[derive(Debug, Clone)]
pub struct ParentSpace {
    basis: Basis,
    packets: Vec<CodedPacket>,
    tags: Vec<Tag>,
}

impl ParentSpace {
    pub fn packets(&self) -> &[CodedPacket] {
        &self.packets
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }
}

/// A node's per-parent received spaces for one generation. Packets that do not
/// grow the space from their parent are not kept; the span, which is all a
/// report describes, is unchanged by them.
#[derive(Debug, Clone)]
pub struct LocatingStore {
    id: SpaceId,
    dims: Dimensions,
    spaces: BTreeMap<NodeId, ParentSpace>,
}

impl LocatingStore {
    pub fn new(id: SpaceId, dims: Dimensions) -> Self {
        LocatingStore { id, dims, spaces: BTreeMap::new() }
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn insert(&mut self, parent: NodeId, y: &CodedPacket, tags: &Tag) -> Result<bool> {
        let len = self.dims.packet_len();
        let space = self
            .spaces
            .entry(parent)
            .or_insert_with(|| ParentSpace { basis: Basis::new(len), packets: Vec::new(), tags: Vec::new() });
        let innovative = space.basis.insert(y.data())?;
        if innovative {
            space.packets.push(y.clone());
            space.tags.push(tags.clone());
        }
        Ok(innovative)
    }

    pub fn space(&self, parent: NodeId) -> Option<&ParentSpace> {
        self.spaces.get(&parent)
    }
}

/// A sampled vector from a parent's space and its combined tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportBody {
    pub y_r: CodedPacket,
    pub tags: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub generation: SpaceId,
    pub reporter: NodeId,
    pub parent: NodeId,
    /// `None` when nothing was received from the parent.
    pub body: Option<ReportBody>,
}

/// `y_r = Σ α_i y_i` and `t_j = Σ α_i t_{i,j}` over the stored packets, with
/// fresh random `α`.
pub fn make_report<R: Rng + ?Sized>(
    reporter: NodeId,
    parent: NodeId,
    store: &LocatingStore,
    rng: &mut R,
) -> Result<Report> {
    let body = match store.space(parent) {
        Some(space) if !space.packets.is_empty() => {
            let alphas: Vec<Gf256> = (0..space.packets.len()).map(|_| Gf256::random(rng)).collect();
            Some(report_body(space, &alphas)?)
        }
        _ => None,
    };
    Ok(Report { generation: store.id, reporter, parent, body })
}

/// Report body for given coefficients.
pub fn report_body(space: &ParentSpace, alphas: &[Gf256]) -> Result<ReportBody> {
    let y_r = rlnc::recode(&space.packets, alphas)?;
    let tags = mac::combine_tags(alphas.iter().copied().zip(&space.tags))?;
    Ok(ReportBody { y_r, tags })
}

/// Number of controller-checked tags of `body` that verify.
pub fn count_valid_complement(
    keys: &EdgeKeySets,
    id: SpaceId,
    dims: Dimensions,
    body: &ReportBody,
    cache: &MacCache,
) -> Result<usize> {
    if body.tags.len() != keys.x_set.len() {
        return Err(Error::Malformed(format!("expected {} report tags, got {}", keys.x_set.len(), body.tags.len())));
    }
    let d = locating_dims(dims);
    let mut valid = 0;
    for i in keys.complement_indices() {
        if cache.get(&keys.x_set[i], id, d)?.mac_instance(0, body.y_r.data())? == body.tags.get(i) {
            valid += 1;
        }
    }
    Ok(valid)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Alert {
    pub generation: SpaceId,
    pub reporter: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgnoreReason {
    /// A round already ran (or is running) for this generation.
    DuplicateGeneration,
    /// The alerting node is blacklisted.
    Blacklisted,
    /// The alerting node raised too many false alerts recently.
    Throttled,
    /// The alerting node is not part of the network.
    UnknownNode,
}

impl fmt::Display for IgnoreReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            IgnoreReason::DuplicateGeneration => "duplicate_generation",
            IgnoreReason::Blacklisted => "blacklisted",
            IgnoreReason::Throttled => "throttled",
            IgnoreReason::UnknownNode => "unknown_node",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportVerdict {
    /// Accepted; the sampled vector lies in the source space.
    Clean,
    /// Accepted; the sampled vector lies outside the source space.
    Polluted,
    /// Fewer than `θ` controller-checked tags verified.
    Rejected,
    /// Nothing was received from the parent.
    Empty,
    /// No report arrived for this edge.
    Missing,
}

impl fmt::Display for ReportVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ReportVerdict::Clean => "clean",
            ReportVerdict::Polluted => "polluted",
            ReportVerdict::Rejected => "rejected",
            ReportVerdict::Empty => "empty",
            ReportVerdict::Missing => "missing",
        };
        f.write_str(s)
    }
}

/// One classified report, in the flat form used for logs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub generation: SpaceId,
    pub reporter: NodeId,
    pub parent: NodeId,
    pub y_r_hex: String,
    pub tags_hex: Vec<String>,
    pub verdict: ReportVerdict,
}

impl ReportRecord {
    /// `generation_id, reporter, parent, y_r_hex, tag_hex × λ, verdict`.
    pub fn fields(&self) -> Vec<String> {
        let mut f = vec![self.generation.to_string(), self.reporter.to_string(), self.parent.to_string(), self.y_r_hex.clone()];
        f.extend(self.tags_hex.iter().cloned());
        f.push(self.verdict.to_string());
        f
    }

    pub fn to_line(&self) -> String {
        self.fields().join(",")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundReport {
    pub generation: SpaceId,
    pub alert_from: NodeId,
    /// Nodes classified malicious in this round.
    pub identified: BTreeSet<NodeId>,
    pub polluted_edges: BTreeSet<(NodeId, NodeId)>,
    pub clean_edges: BTreeSet<(NodeId, NodeId)>,
    /// Edges whose report failed the tag threshold, as `(parent, child)`.
    pub rejected_edges: BTreeSet<(NodeId, NodeId)>,
    /// Edges nobody reported on, as `(parent, child)`.
    pub missing_edges: BTreeSet<(NodeId, NodeId)>,
    pub records: Vec<ReportRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundOutcome {
    Ignored(IgnoreReason),
    Completed(RoundReport),
}

/// False-alert throttling settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DosPolicy {
    /// Alerts from a node are ignored once this many of its alerts found no pollution.
    pub tau: u32,
    /// How many generations the throttle lasts; the counter resets afterwards.
    pub cooldown_generations: u64,
}

impl Default for DosPolicy {
    fn default() -> Self {
        DosPolicy { tau: 3, cooldown_generations: 10 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct DosCounter {
    ctr: u32,
    throttled_until: Option<u64>,
}

/// Controller bookkeeping across generations.
#[derive(Debug, Clone)]
pub struct ControllerState {
    topology: Topology,
    params: LocatingParams,
    dims: Dimensions,
    edge_keys: BTreeMap<(NodeId, NodeId), EdgeKeySets>,
    processed: BTreeSet<SpaceId>,
    blacklist: BTreeSet<NodeId>,
    dos: BTreeMap<NodeId, DosCounter>,
    policy: DosPolicy,
    clock: u64,
}

impl ControllerState {
    pub fn new(
        topology: Topology,
        secrets: &LocatingSecrets,
        params: LocatingParams,
        dims: Dimensions,
        policy: DosPolicy,
    ) -> Result<Self> {
        params.validate()?;
        dims.validate()?;
        let edge_keys = secrets.all_edge_keys(&topology, &params)?;
        Ok(ControllerState {
            topology,
            params,
            dims,
            edge_keys,
            processed: BTreeSet::new(),
            blacklist: BTreeSet::new(),
            dos: BTreeMap::new(),
            policy,
            clock: 0,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn blacklist(&self) -> &BTreeSet<NodeId> {
        &self.blacklist
    }

    pub fn params(&self) -> LocatingParams {
        self.params
    }

    pub fn edge_keys(&self, parent: NodeId, child: NodeId) -> Option<&EdgeKeySets> {
        self.edge_keys.get(&(parent, child))
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Moves the throttle clock forward by one generation.
    pub fn advance_generation(&mut self) {
        self.clock += 1;
    }

    pub fn false_alert_count(&self, node: NodeId) -> u32 {
        self.dos.get(&node).map_or(0, |c| c.ctr)
    }

    /// Admission control for an alert. On `Ok(())` the generation is marked
    /// as processed and a round must follow.
    pub fn receive_alert(&mut self, alert: &Alert) -> std::result::Result<(), IgnoreReason> {
        if self.blacklist.contains(&alert.reporter) {
            return Err(IgnoreReason::Blacklisted);
        }
        if !self.topology.contains(alert.reporter) {
            return Err(IgnoreReason::UnknownNode);
        }
        if self.processed.contains(&alert.generation) {
            return Err(IgnoreReason::DuplicateGeneration);
        }
        let clock = self.clock;
        let c = self.dos.entry(alert.reporter).or_default();
        if let Some(until) = c.throttled_until {
            if clock >= until {
                *c = DosCounter::default();
            }
        }
        if c.ctr >= self.policy.tau {
            return Err(IgnoreReason::Throttled);
        }
        self.processed.insert(alert.generation);
        Ok(())
    }

    /// Admission plus classification in one step.
    pub fn controller_round(
        &mut self,
        alert: &Alert,
        generation: &Generation,
        reports: &[Report],
        cache: &MacCache,
    ) -> Result<RoundOutcome> {
        if let Err(reason) = self.receive_alert(alert) {
            return Ok(RoundOutcome::Ignored(reason));
        }
        self.locate(alert, generation, reports, cache).map(RoundOutcome::Completed)
    }

    /// Classifies every edge from the reports, blames the nodes with a
    /// polluted outgoing edge and no polluted incoming edge, blacklists them
    /// and prunes the topology. A node whose report for some incoming edge is
    /// missing or fails the tag threshold is blamed as well; such an edge
    /// counts as evidence against the reporter only.
    pub fn locate(&mut self, alert: &Alert, generation: &Generation, reports: &[Report], cache: &MacCache) -> Result<RoundReport> {
        let id = generation.id();
        let mut by_edge: BTreeMap<(NodeId, NodeId), &Report> = BTreeMap::new();
        for r in reports {
            if r.generation == id {
                by_edge.entry((r.parent, r.reporter)).or_insert(r);
            }
        }

        let mut out = RoundReport {
            generation: id,
            alert_from: alert.reporter,
            identified: BTreeSet::new(),
            polluted_edges: BTreeSet::new(),
            clean_edges: BTreeSet::new(),
            rejected_edges: BTreeSet::new(),
            missing_edges: BTreeSet::new(),
            records: Vec::new(),
        };
        let mut misreporters = BTreeSet::new();

        for e in self.topology.edges() {
            let edge = (e.from, e.to);
            let keys = self.edge_keys.get(&edge).ok_or(Error::Topology(format!("no keys for edge {} -> {}", e.from, e.to)))?;
            let (verdict, y_hex, tags_hex) = match by_edge.get(&edge) {
                None => (ReportVerdict::Missing, String::new(), Vec::new()),
                Some(Report { body: None, .. }) => (ReportVerdict::Empty, String::new(), Vec::new()),
                Some(Report { body: Some(body), .. }) => {
                    let tags_hex = body.tags.as_bytes().iter().map(|b| format!("{b:02x}")).collect();
                    let y_hex = body.y_r.data().to_hex();
                    let malformed = body.y_r.len() != self.dims.packet_len()
                        || body.y_r.m() != self.dims.m
                        || body.tags.len() != self.params.lambda;
                    let verdict = if malformed
                        || count_valid_complement(keys, id, self.dims, body, cache)? < self.params.theta
                    {
                        ReportVerdict::Rejected
                    } else if rlnc::in_source_space(generation, &body.y_r) {
                        ReportVerdict::Clean
                    } else {
                        ReportVerdict::Polluted
                    };
                    (verdict, y_hex, tags_hex)
                }
            };
            match verdict {
                ReportVerdict::Clean | ReportVerdict::Empty => {
                    out.clean_edges.insert(edge);
                }
                ReportVerdict::Polluted => {
                    out.polluted_edges.insert(edge);
                }
                ReportVerdict::Rejected => {
                    out.rejected_edges.insert(edge);
                    misreporters.insert(e.to);
                }
                ReportVerdict::Missing => {
                    out.missing_edges.insert(edge);
                    misreporters.insert(e.to);
                }
            }
            out.records.push(ReportRecord {
                generation: id,
                reporter: e.to,
                parent: e.from,
                y_r_hex: y_hex,
                tags_hex,
                verdict,
            });
        }

        let polluted_in: BTreeSet<NodeId> = out.polluted_edges.iter().map(|(_, c)| *c).collect();
        let polluted_out: BTreeSet<NodeId> = out.polluted_edges.iter().map(|(p, _)| *p).collect();
        out.identified = polluted_out.difference(&polluted_in).copied().collect();
        out.identified.extend(misreporters);
        // the trusted source is never blamed
        out.identified.remove(&self.topology.source());

        if out.polluted_edges.is_empty() {
            let c = self.dos.entry(alert.reporter).or_default();
            c.ctr += 1;
            if c.ctr >= self.policy.tau && c.throttled_until.is_none() {
                c.throttled_until = Some(self.clock + self.policy.cooldown_generations);
            }
        }

        if !out.identified.is_empty() {
            self.blacklist.extend(out.identified.iter().copied());
            self.topology = self.topology.without(&self.blacklist)?;
            self.edge_keys.retain(|(p, c), _| !self.blacklist.contains(p) && !self.blacklist.contains(c));
        }
        Ok(out)
    }
}

/// Misbehaviour available to a malicious node against this protocol.
pub mod adversary {
    use super::*;

    /// A report claiming the parent sent something outside what the child
    /// actually received: an honest combination plus a random error, with
    /// the tags of the honest part shifted by guesses for the error's tags.
    /// The child can compute the tags it verifies itself; the rest are
    /// guesses.
    pub fn fabricate_report<R: Rng + ?Sized>(
        honest: &ReportBody,
        child: &ChildKeys,
        id: SpaceId,
        dims: Dimensions,
        cache: &MacCache,
        rng: &mut R,
    ) -> Result<ReportBody> {
        let mut error = FieldVector::random(dims.packet_len(), rng);
        // keep the claimed coefficients; corrupt only the payload
        error.as_bytes_mut()[dims.n..].fill(0);
        if error.is_zero() {
            error.set(0, Gf256::ONE);
        }
        let mut y = honest.y_r.data().clone();
        y.add_assign(&error)?;
        let mut tags = honest.tags.clone();
        let d = locating_dims(dims);
        let child_positions: BTreeMap<usize, &MacKey> = child.indices.iter().copied().zip(&child.keys).collect();
        for j in 0..tags.len() {
            let shift = match child_positions.get(&j) {
                Some(k) => cache.get(k, id, d)?.mac_instance(0, &error)?,
                None => Gf256::random(rng),
            };
            tags.as_bytes_mut()[j] ^= shift.0;
        }
        Ok(ReportBody { y_r: CodedPacket::new(y, dims.m)?, tags })
    }

    /// Locating tags where only `valid` positions are genuine and the rest are
    /// uniformly random symbols.
    pub fn sabotaged_tags<R: Rng + ?Sized>(
        x_set: &[MacKey],
        valid: &BTreeSet<usize>,
        id: SpaceId,
        dims: Dimensions,
        y: &CodedPacket,
        cache: &MacCache,
        rng: &mut R,
    ) -> Result<Tag> {
        let d = locating_dims(dims);
        let mut out = Vec::with_capacity(x_set.len());
        for (j, k) in x_set.iter().enumerate() {
            if valid.contains(&j) {
                out.push(cache.get(k, id, d)?.mac_instance(0, y.data())?.0);
            } else {
                out.push(rng.gen());
            }
        }
        Ok(Tag::from_bytes(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Edge, Role};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(29, 14), 77_558_760);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
    }

    #[test]
    fn unranking_matches_enumeration() {
        let mut all = Vec::new();
        for a in 0..5 {
            for b in a + 1..5 {
                all.push(vec![a, b]);
            }
        }
        assert_eq!(all.len(), 10);
        for (i, s) in all.iter().enumerate() {
            assert_eq!(&unrank_subset(i as u128, 5, 2).unwrap(), s);
        }
        assert_eq!(unrank_subset(0, 5, 2).unwrap(), vec![0, 1]);
        assert_eq!(unrank_subset(9, 5, 2).unwrap(), vec![3, 4]);
        assert!(unrank_subset(10, 5, 2).is_err());
        // three-element subsets, checked against nested loops
        let mut k = 0;
        for a in 0..7 {
            for b in a + 1..7 {
                for c in b + 1..7 {
                    assert_eq!(unrank_subset(k, 7, 3).unwrap(), vec![a, b, c]);
                    k += 1;
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(LocatingParams::new(19, 9, 3).is_ok());
        assert!(LocatingParams::new(5, 5, 1).is_err());
        assert!(LocatingParams::new(5, 0, 1).is_err());
        assert!(LocatingParams::new(5, 2, 4).is_err());
        assert!(LocatingParams::new(5, 2, 0).is_err());
    }

    #[test]
    fn edge_key_derivation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = LocatingParams::default();
        for _ in 0..100 {
            let mut kp = [0u8; 16];
            let mut kc = [0u8; 16];
            rng.fill(&mut kp);
            rng.fill(&mut kc);
            let e = derive_edge_keys(&kp, &kc, NodeId(1), NodeId(2), &params).unwrap();
            assert_eq!(e, derive_edge_keys(&kp, &kc, NodeId(1), NodeId(2), &params).unwrap());
            assert_eq!(e.x_set.len(), 19);
            assert_eq!(e.y_indices.len(), 9);
            assert!(e.y_indices.windows(2).all(|w| w[0] < w[1]));
            assert!(e.y_set().iter().all(|k| e.x_set.contains(k)));
            assert_eq!(e.complement_indices().len(), 10);
            let other_child = derive_edge_keys(&kp, &kc, NodeId(1), NodeId(3), &params).unwrap();
            assert!(e.x_set.iter().all(|k| !other_child.x_set.contains(k)));
        }
    }

    fn setup(seed: u64) -> (ChaCha8Rng, EdgeKeySets, Dimensions, MacCache, Generation) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = LocatingParams::default();
        let mut kp = [0u8; 16];
        let mut kc = [0u8; 16];
        rng.fill(&mut kp);
        rng.fill(&mut kc);
        let keys = derive_edge_keys(&kp, &kc, NodeId(1), NodeId(2), &params).unwrap();
        let dims = Dimensions::new(12, 4, 1).unwrap();
        let g = Generation::random(SpaceId(7), 12, 4, &mut rng).unwrap();
        (rng, keys, dims, MacCache::new(), g)
    }

    #[test]
    fn honest_emit_receive_and_report() {
        let (mut rng, keys, dims, cache, g) = setup(2);
        let child = keys.child_view();
        let mut store = LocatingStore::new(g.id(), dims);
        for p in g.packets() {
            let tags = locating_emit(&keys.x_set, g.id(), dims, p, &cache).unwrap();
            assert!(locating_receive(&child, 19, g.id(), dims, p, &tags, &cache).unwrap());
            assert!(store.insert(NodeId(1), p, &tags).unwrap());
        }
        let r = make_report(NodeId(2), NodeId(1), &store, &mut rng).unwrap();
        let body = r.body.unwrap();
        assert_eq!(count_valid_complement(&keys, g.id(), dims, &body, &cache).unwrap(), 10);
        assert!(rlnc::in_source_space(&g, &body.y_r));

        let single = report_body(store.space(NodeId(1)).unwrap(), &[Gf256::ONE, Gf256::ZERO, Gf256::ZERO, Gf256::ZERO]).unwrap();
        assert_eq!(&single.y_r, &g.packets()[0]);
        assert_eq!(single.tags, locating_emit(&keys.x_set, g.id(), dims, &g.packets()[0], &cache).unwrap());

        let empty = make_report(NodeId(2), NodeId(9), &store, &mut rng).unwrap();
        assert!(empty.body.is_none());
    }

    #[test]
    fn child_drops_bad_visible_tag_only() {
        let (mut rng, keys, dims, cache, g) = setup(3);
        let child = keys.child_view();
        let p = &g.packets()[1];
        let good = locating_emit(&keys.x_set, g.id(), dims, p, &cache).unwrap();
        let mut bad = good.clone();
        bad.as_bytes_mut()[keys.y_indices[0]] ^= 1;
        assert!(!locating_receive(&child, 19, g.id(), dims, p, &bad, &cache).unwrap());
        let hidden: BTreeSet<usize> = keys.y_indices.iter().copied().collect();
        let t = adversary::sabotaged_tags(&keys.x_set, &hidden, g.id(), dims, p, &cache, &mut rng).unwrap();
        assert!(locating_receive(&child, 19, g.id(), dims, p, &t, &cache).unwrap());
        assert!(locating_receive(&child, 18, g.id(), dims, p, &t, &cache).is_err());
    }

    #[test]
    fn fabricated_report_is_outside_source_space() {
        let (mut rng, keys, dims, cache, g) = setup(4);
        let mut store = LocatingStore::new(g.id(), dims);
        for p in g.packets() {
            store.insert(NodeId(1), p, &locating_emit(&keys.x_set, g.id(), dims, p, &cache).unwrap()).unwrap();
        }
        let honest = make_report(NodeId(2), NodeId(1), &store, &mut rng).unwrap().body.unwrap();
        let fake = adversary::fabricate_report(&honest, &keys.child_view(), g.id(), dims, &cache, &mut rng).unwrap();
        assert!(!rlnc::in_source_space(&g, &fake.y_r));
        // the tags the child can compute are right
        let d = locating_dims(dims);
        for (&i, k) in keys.y_indices.iter().zip(keys.y_set().iter()) {
            assert_eq!(cache.get(k, g.id(), d).unwrap().mac_instance(0, fake.y_r.data()).unwrap(), fake.tags.get(i));
        }
    }

    fn diamond() -> Topology {
        // 0 -> 1 -> 3 -> 4, 0 -> 2 -> 3
        let nodes = [(NodeId(0), Role::Source), (NodeId(1), Role::Intermediate), (NodeId(2), Role::Intermediate), (NodeId(3), Role::Intermediate), (NodeId(4), Role::Receiver)];
        let edges = [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)]
            .into_iter()
            .map(|(a, b)| Edge { from: NodeId(a), to: NodeId(b), delay_ms: 10 })
            .collect();
        Topology::new(nodes, edges).unwrap()
    }

    fn controller(seed: u64) -> (ControllerState, LocatingSecrets, ChaCha8Rng, Dimensions) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = diamond();
        let secrets = LocatingSecrets::random(&t, &mut rng);
        let dims = Dimensions::new(12, 4, 1).unwrap();
        let c = ControllerState::new(t, &secrets, LocatingParams::default(), dims, DosPolicy::default()).unwrap();
        (c, secrets, rng, dims)
    }

    fn honest_reports(
        c: &ControllerState,
        g: &Generation,
        dims: Dimensions,
        cache: &MacCache,
        polluted_from: Option<NodeId>,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Report> {
        let mut out = Vec::new();
        for e in c.topology().edges().to_vec() {
            let keys = c.edge_keys(e.from, e.to).unwrap();
            let mut store = LocatingStore::new(g.id(), dims);
            for p in g.packets() {
                let mut y = p.clone();
                if Some(e.from) == polluted_from {
                    y.data_mut().as_bytes_mut()[0] ^= 0x5A;
                }
                store.insert(e.from, &y, &locating_emit(&keys.x_set, g.id(), dims, &y, cache).unwrap()).unwrap();
            }
            out.push(make_report(e.to, e.from, &store, rng).unwrap());
        }
        out
    }

    #[test]
    fn single_polluter_is_identified() {
        let (mut c, _, mut rng, dims) = controller(5);
        let cache = MacCache::new();
        let g = Generation::random(SpaceId(1), 12, 4, &mut rng).unwrap();
        let reports = honest_reports(&c, &g, dims, &cache, Some(NodeId(2)), &mut rng);
        let alert = Alert { generation: g.id(), reporter: NodeId(3) };
        let RoundOutcome::Completed(r) = c.controller_round(&alert, &g, &reports, &cache).unwrap() else { panic!() };
        assert_eq!(r.identified, BTreeSet::from([NodeId(2)]));
        assert_eq!(r.polluted_edges, BTreeSet::from([(NodeId(2), NodeId(3))]));
        assert_eq!(r.records.len(), 5);
        assert!(c.blacklist().contains(&NodeId(2)));
        assert!(!c.topology().contains(NodeId(2)));
        assert_eq!(
            c.controller_round(&alert, &g, &reports, &cache).unwrap(),
            RoundOutcome::Ignored(IgnoreReason::DuplicateGeneration)
        );
        let from_blacklisted = Alert { generation: SpaceId(2), reporter: NodeId(2) };
        assert_eq!(c.receive_alert(&from_blacklisted), Err(IgnoreReason::Blacklisted));
    }

    #[test]
    fn silent_or_rejected_reporter_is_blamed_alone() {
        let (mut c, _, mut rng, dims) = controller(6);
        let cache = MacCache::new();
        let g = Generation::random(SpaceId(1), 12, 4, &mut rng).unwrap();
        let mut reports = honest_reports(&c, &g, dims, &cache, None, &mut rng);
        // node 3 withholds its report about parent 1 and garbles the one about 2
        reports.retain(|r| !(r.reporter == NodeId(3) && r.parent == NodeId(1)));
        for r in reports.iter_mut().filter(|r| r.reporter == NodeId(3)) {
            let body = r.body.as_mut().unwrap();
            body.y_r.data_mut().as_bytes_mut()[0] ^= 1;
        }
        let alert = Alert { generation: g.id(), reporter: NodeId(3) };
        let RoundOutcome::Completed(r) = c.controller_round(&alert, &g, &reports, &cache).unwrap() else { panic!() };
        assert_eq!(r.identified, BTreeSet::from([NodeId(3)]));
        assert_eq!(r.missing_edges, BTreeSet::from([(NodeId(1), NodeId(3))]));
        // altering y_r invalidates every controller-checked tag with high probability
        assert_eq!(r.rejected_edges, BTreeSet::from([(NodeId(2), NodeId(3))]));
        let line = r.records.iter().find(|x| x.verdict == ReportVerdict::Rejected).unwrap().to_line();
        assert_eq!(line.split(',').count(), 4 + 19 + 1);
        assert!(line.ends_with(",rejected"));
    }

    #[test]
    fn false_alerts_are_throttled_then_forgiven() {
        let (mut c, _, mut rng, dims) = controller(7);
        let cache = MacCache::new();
        let mut outcomes = Vec::new();
        for gen in 0..4u64 {
            let g = Generation::random(SpaceId(100 + gen), 12, 4, &mut rng).unwrap();
            let reports = honest_reports(&c, &g, dims, &cache, None, &mut rng);
            let alert = Alert { generation: g.id(), reporter: NodeId(4) };
            outcomes.push(c.controller_round(&alert, &g, &reports, &cache).unwrap());
            c.advance_generation();
        }
        for o in &outcomes[..3] {
            let RoundOutcome::Completed(r) = o else { panic!("{o:?}") };
            assert!(r.identified.is_empty() && r.polluted_edges.is_empty());
        }
        assert_eq!(outcomes[3], RoundOutcome::Ignored(IgnoreReason::Throttled));
        assert_eq!(c.false_alert_count(NodeId(4)), 3);
        // another node is unaffected
        assert!(c.receive_alert(&Alert { generation: SpaceId(500), reporter: NodeId(3) }).is_ok());
        for _ in 0..10 {
            c.advance_generation();
        }
        assert!(c.receive_alert(&Alert { generation: SpaceId(501), reporter: NodeId(4) }).is_ok());
        assert_eq!(c.false_alert_count(NodeId(4)), 0);
    }
}

//! Event-driven simulation of one network across generations.
//!
//! Virtual time is in whole milliseconds and only moves when an event fires.
//! Events with equal timestamps run in scheduling order, so a run is a pure
//! function of its seed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spacemac::detection::{
    self, node_emit, node_receive, receiver_check, source_tag, DetectionKeys, DropKind, TaggedPacket, Verdict,
};
use spacemac::locating::{
    locating_emit, make_report, report_body, Alert, ChildKeys, ControllerState, DosPolicy,
    EdgeKeySets, IgnoreReason, LocatingParams, LocatingSecrets, LocatingStore, PreparedKeys, Report, RoundReport,
};
use spacemac::mac::{self, MacCache};
use spacemac::rlnc::{self, DecodeOutcome, Generation};
use spacemac::{Dimensions, FieldVector, Gf256, NodeId, Role, SpaceId, Tag, Topology};

use crate::attacker::{AttackerSpec, Behavior};
use crate::error::{Result, SimError};
use crate::topogen::DelayRange;

/// Protocol and timing settings shared by every node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dims: Dimensions,
    pub locating: LocatingParams,
    pub dos: DosPolicy,
    /// Delay of each alert, request and report message.
    pub control_delay_ms: DelayRange,
    /// How long the controller waits for reports after sending requests.
    pub round_timeout_ms: u64,
    /// Check every honest emission against the sender's received span.
    pub audit: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        let control = DelayRange::default();
        SimParams {
            dims: Dimensions { n: 1024, m: 32, l: 1 },
            locating: LocatingParams::default(),
            dos: DosPolicy::default(),
            control_delay_ms: control,
            round_timeout_ms: 2 * control.max as u64,
            audit: true,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        detection::e2e_dims(self.dims)?;
        self.locating.validate()?;
        self.control_delay_ms.validate("control delay")?;
        if self.round_timeout_ms < 2 * self.control_delay_ms.max as u64 {
            return Err(SimError::Config(format!(
                "round timeout {} ms cannot cover a request and a report ({} ms each at most)",
                self.round_timeout_ms, self.control_delay_ms.max
            )));
        }
        Ok(())
    }
}

/// One entry of the event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEntry {
    GenerationStart { generation: u64, at_ms: u64 },
    FirstPolluted { generation: u64, at_ms: u64, node: NodeId, from: NodeId },
    Drop { generation: u64, at_ms: u64, detector: NodeId, parent: NodeId, kind: DropKind },
    AlertSent { generation: u64, at_ms: u64, node: NodeId },
    AlertIgnored { generation: u64, at_ms: u64, node: NodeId, reason: IgnoreReason },
    RoundStarted { generation: u64, at_ms: u64, alert_from: NodeId },
    RoundDecided {
        generation: u64,
        at_ms: u64,
        identified: Vec<NodeId>,
        polluted_edges: usize,
        rejected_edges: usize,
        missing_edges: usize,
    },
    GenerationEnd { generation: u64, at_ms: u64, alerted: bool, decoded: usize, receivers: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub at_ms: u64,
    pub detector: NodeId,
    pub parent: NodeId,
    pub kind: DropKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub alert_from: NodeId,
    pub started_ms: u64,
    pub decided_ms: u64,
    pub identified: BTreeSet<NodeId>,
    pub polluted_edges: BTreeSet<(NodeId, NodeId)>,
    pub rejected_edges: BTreeSet<(NodeId, NodeId)>,
    pub missing_edges: BTreeSet<(NodeId, NodeId)>,
}

impl RoundSummary {
    fn new(r: &RoundReport, started_ms: u64, decided_ms: u64) -> Self {
        RoundSummary {
            alert_from: r.alert_from,
            started_ms,
            decided_ms,
            identified: r.identified.clone(),
            polluted_edges: r.polluted_edges.clone(),
            rejected_edges: r.rejected_edges.clone(),
            missing_edges: r.missing_edges.clone(),
        }
    }
}

/// What happened in one generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub index: u64,
    pub start_ms: u64,
    pub end_ms: u64,
    pub delivered: u64,
    pub drops: Vec<DropRecord>,
    /// Nodes whose alert reached the controller.
    pub alerts: Vec<NodeId>,
    pub ignored_alerts: Vec<(NodeId, IgnoreReason)>,
    pub round: Option<RoundSummary>,
    /// Whether each receiver recovered the source messages.
    pub decoded: BTreeMap<NodeId, bool>,
    /// Edges that carried at least one packet outside the source space.
    pub polluted_edges: BTreeSet<(NodeId, NodeId)>,
    /// Attackers with a polluted outgoing edge and no polluted incoming one.
    pub exposed: BTreeSet<NodeId>,
    /// Corrupted packets sent by attackers that reached honest nodes.
    pub corrupted_received: u64,
    /// Of those, how many the receiving node dropped.
    pub corrupted_dropped: u64,
    /// Honest emissions outside the sender's received span.
    pub span_violations: u64,
}

impl GenerationRecord {
    /// No alert was raised.
    pub fn is_clean(&self) -> bool {
        self.alerts.is_empty()
    }

    pub fn is_polluted(&self) -> bool {
        !self.polluted_edges.is_empty()
    }

    pub fn identified(&self) -> BTreeSet<NodeId> {
        self.round.as_ref().map(|r| r.identified.clone()).unwrap_or_default()
    }
}

struct InFlight {
    packet: TaggedPacket,
    locating: Tag,
    /// Ground truth: the payload lies outside the source space.
    polluted: bool,
}

enum EventKind {
    Deliver { from: NodeId, to: NodeId, packet: Box<InFlight> },
    AlertArrives(Alert),
    RequestArrives(NodeId),
    ReportsArrive(Vec<Report>),
    RoundDeadline,
}

struct Scheduled {
    at: u64,
    /// Deadlines sort after everything else due at the same instant.
    late: bool,
    seq: u64,
    kind: EventKind,
}

impl Scheduled {
    fn key(&self) -> (u64, bool, u64) {
        (self.at, self.late, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key().cmp(&self.key())
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Scheduled>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, at: u64, kind: EventKind) {
        self.seq += 1;
        let late = matches!(kind, EventKind::RoundDeadline);
        self.heap.push(Scheduled { at, late, seq: self.seq, kind });
    }

    fn pop(&mut self) -> Option<Scheduled> {
        self.heap.pop()
    }
}

struct NodeState {
    buffer: detection::NodeBuffer,
    store: LocatingStore,
    alerted: bool,
    /// Ground truth: something outside the source space was buffered.
    tainted: bool,
    seen_polluted: bool,
    /// Set when the controller's request arrives; later packets of this
    /// generation are ignored so the report covers everything forwarded.
    frozen: bool,
}

struct PendingRound {
    alert: Alert,
    started_ms: u64,
    reports: Vec<Report>,
    /// Nodes asked for reports that have not answered yet.
    awaiting: usize,
}

struct GenContext {
    index: u64,
    id: SpaceId,
    generation: Generation,
    topology: Topology,
    nodes: BTreeMap<NodeId, NodeState>,
    queue: Queue,
    now: u64,
    round: Option<PendingRound>,
    record: GenerationRecord,
    taggers: BTreeMap<(NodeId, NodeId), PreparedKeys>,
    checkers: BTreeMap<(NodeId, NodeId), PreparedKeys>,
}

/// A network with its keys, attackers and controller.
pub struct Simulation {
    params: SimParams,
    original: Topology,
    attackers: BTreeMap<NodeId, AttackerSpec>,
    malicious: BTreeSet<NodeId>,
    keys: DetectionKeys,
    edge_keys: BTreeMap<(NodeId, NodeId), EdgeKeySets>,
    child_keys: BTreeMap<(NodeId, NodeId), ChildKeys>,
    controller: ControllerState,
    cache: MacCache,
    rng: ChaCha8Rng,
    now_ms: u64,
    generations: u64,
    log: Vec<LogEntry>,
}

impl Simulation {
    pub fn new(topology: Topology, attackers: Vec<AttackerSpec>, params: SimParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut by_node = BTreeMap::new();
        for a in attackers {
            if topology.role(a.node)? != Role::Intermediate {
                return Err(SimError::Config(format!("attacker {} is not an intermediate node", a.node)));
            }
            let node = a.node;
            if by_node.insert(node, a).is_some() {
                return Err(SimError::Config(format!("attacker {node} listed twice")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys = detection::bootstrap(&topology, &mut rng);
        let secrets = LocatingSecrets::random(&topology, &mut rng);
        let edge_keys = secrets.all_edge_keys(&topology, &params.locating)?;
        let child_keys = edge_keys.iter().map(|(&e, k)| (e, k.child_view())).collect();
        let controller = ControllerState::new(topology.clone(), &secrets, params.locating, params.dims, params.dos)?;
        Ok(Simulation {
            params,
            original: topology,
            malicious: by_node.keys().copied().collect(),
            attackers: by_node,
            keys,
            edge_keys,
            child_keys,
            controller,
            cache: MacCache::new(),
            rng,
            now_ms: 0,
            generations: 0,
            log: Vec::new(),
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn original_topology(&self) -> &Topology {
        &self.original
    }

    /// The network as the controller currently sees it.
    pub fn topology(&self) -> &Topology {
        self.controller.topology()
    }

    pub fn attackers(&self) -> &BTreeMap<NodeId, AttackerSpec> {
        &self.attackers
    }

    pub fn malicious(&self) -> &BTreeSet<NodeId> {
        &self.malicious
    }

    pub fn blacklist(&self) -> &BTreeSet<NodeId> {
        self.controller.blacklist()
    }

    pub fn controller(&self) -> &ControllerState {
        &self.controller
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn generations_run(&self) -> u64 {
        self.generations
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<LogEntry> {
        std::mem::take(&mut self.log)
    }

    /// Sends one generation from the source. The generation ends when no
    /// events remain or when a locating round reaches its decision, whichever
    /// comes first; the next one starts at that moment.
    pub fn run_generation(&mut self) -> Result<GenerationRecord> {
        self.generations += 1;
        let index = self.generations;
        let id = SpaceId(index);
        let start = self.now_ms;
        let dims = self.params.dims;
        let topology = self.controller.topology().clone();
        let generation = detection::random_generation(id, &self.keys.e2e_key, dims, &mut self.rng)?;
        let nodes = topology
            .node_ids()
            .map(|n| {
                let st = NodeState {
                    buffer: detection::NodeBuffer::new(id, dims),
                    store: LocatingStore::new(id, dims),
                    alerted: false,
                    tainted: false,
                    seen_polluted: false,
                    frozen: false,
                };
                (n, st)
            })
            .collect();
        let mut taggers = BTreeMap::new();
        let mut checkers = BTreeMap::new();
        for e in topology.edges() {
            let edge = (e.from, e.to);
            taggers.insert(edge, PreparedKeys::parent(&self.edge_keys[&edge].x_set, id, dims, &self.cache)?);
            let lambda = self.params.locating.lambda;
            checkers.insert(edge, PreparedKeys::child(&self.child_keys[&edge], lambda, id, dims, &self.cache)?);
        }
        let mut cx = GenContext {
            taggers,
            checkers,
            index,
            id,
            generation,
            topology,
            nodes,
            queue: Queue::default(),
            now: start,
            round: None,
            record: GenerationRecord {
                index,
                start_ms: start,
                end_ms: start,
                delivered: 0,
                drops: Vec::new(),
                alerts: Vec::new(),
                ignored_alerts: Vec::new(),
                round: None,
                decoded: BTreeMap::new(),
                polluted_edges: BTreeSet::new(),
                exposed: BTreeSet::new(),
                corrupted_received: 0,
                corrupted_dropped: 0,
                span_violations: 0,
            },
        };
        self.log.push(LogEntry::GenerationStart { generation: index, at_ms: start });

        let s = cx.topology.source();
        let ring = &self.keys.keyrings[&s];
        for &c in cx.topology.children(s) {
            let delay = edge_delay(&cx.topology, s, c);
            let tagger = &cx.taggers[&(s, c)];
            for p in cx.generation.packets() {
                let packet = source_tag(ring, c, id, dims, p, &self.cache)?;
                let locating = tagger.tags(p)?;
                let packet = Box::new(InFlight { packet, locating, polluted: false });
                cx.queue.push(start + delay, EventKind::Deliver { from: s, to: c, packet });
            }
        }
        let flooders: Vec<NodeId> = self
            .attackers
            .values()
            .filter(|a| a.has(Behavior::AlertFlood) && cx.topology.contains(a.node))
            .map(|a| a.node)
            .collect();
        for a in flooders {
            self.send_alert(&mut cx, a);
        }

        let mut decided = false;
        while let Some(ev) = cx.queue.pop() {
            cx.now = ev.at;
            match ev.kind {
                EventKind::Deliver { from, to, packet } => self.deliver(&mut cx, from, to, *packet)?,
                EventKind::AlertArrives(alert) => self.alert_arrives(&mut cx, alert),
                EventKind::RequestArrives(node) => self.request_arrives(&mut cx, node)?,
                EventKind::ReportsArrive(mut reports) => {
                    let Some(r) = cx.round.as_mut() else { continue };
                    r.reports.append(&mut reports);
                    r.awaiting -= 1;
                    // everyone answered: no need to wait for the deadline
                    if r.awaiting == 0 {
                        self.decide(&mut cx)?;
                        decided = true;
                        break;
                    }
                }
                EventKind::RoundDeadline => {
                    self.decide(&mut cx)?;
                    decided = true;
                    break;
                }
            }
        }
        debug_assert!(decided || cx.round.is_none());

        let mut record = cx.record;
        record.end_ms = cx.now;
        for r in cx.topology.receivers() {
            let ok = match rlnc::decode(cx.nodes[&r].buffer.packets()) {
                Ok(DecodeOutcome::Decoded(msgs)) => msgs.as_slice() == cx.generation.payloads(),
                _ => false,
            };
            record.decoded.insert(r, ok);
        }
        record.exposed = self
            .malicious
            .iter()
            .copied()
            .filter(|&a| {
                record.polluted_edges.iter().any(|&(p, _)| p == a) && !record.polluted_edges.iter().any(|&(_, c)| c == a)
            })
            .collect();
        self.log.push(LogEntry::GenerationEnd {
            generation: index,
            at_ms: record.end_ms,
            alerted: !record.alerts.is_empty(),
            decoded: record.decoded.values().filter(|&&d| d).count(),
            receivers: record.decoded.len(),
        });
        self.controller.advance_generation();
        self.cache.retire(id);
        self.now_ms = record.end_ms;
        Ok(record)
    }

    fn control_delay(&mut self) -> u64 {
        self.params.control_delay_ms.sample(&mut self.rng) as u64
    }

    fn send_alert(&mut self, cx: &mut GenContext, node: NodeId) {
        self.log.push(LogEntry::AlertSent { generation: cx.index, at_ms: cx.now, node });
        cx.record.alerts.push(node);
        let at = cx.now + self.control_delay();
        cx.queue.push(at, EventKind::AlertArrives(Alert { generation: cx.id, reporter: node }));
    }

    fn alert_arrives(&mut self, cx: &mut GenContext, alert: Alert) {
        match self.controller.receive_alert(&alert) {
            Ok(()) => {
                self.log.push(LogEntry::RoundStarted { generation: cx.index, at_ms: cx.now, alert_from: alert.reporter });
                let targets: Vec<NodeId> = cx.topology.node_ids().collect();
                cx.round = Some(PendingRound { alert, started_ms: cx.now, reports: Vec::new(), awaiting: targets.len() });
                for n in targets {
                    let at = cx.now + self.control_delay();
                    cx.queue.push(at, EventKind::RequestArrives(n));
                }
                cx.queue.push(cx.now + self.params.round_timeout_ms, EventKind::RoundDeadline);
            }
            Err(reason) => {
                self.log.push(LogEntry::AlertIgnored { generation: cx.index, at_ms: cx.now, node: alert.reporter, reason });
                cx.record.ignored_alerts.push((alert.reporter, reason));
            }
        }
    }

    fn request_arrives(&mut self, cx: &mut GenContext, node: NodeId) -> Result<()> {
        if !self.malicious.contains(&node) {
            if let Some(st) = cx.nodes.get_mut(&node) {
                st.frozen = true;
            }
        }
        let parents = cx.topology.parents(node).to_vec();
        let mut reports = Vec::with_capacity(parents.len());
        for p in parents {
            let lie = self.attackers.get(&node).is_some_and(|a| a.lies_about(p, &self.malicious));
            let r = if lie {
                self.lying_report(cx, node, p)?
            } else {
                make_report(node, p, &cx.nodes[&node].store, &mut self.rng)?
            };
            reports.push(r);
        }
        let at = cx.now + self.control_delay();
        cx.queue.push(at, EventKind::ReportsArrive(reports));
        Ok(())
    }

    /// A report for edge `parent -> node` built from what `node` got from its
    /// honest parents, signed with the edge's keys that the colluding parent
    /// hands over.
    fn lying_report(&mut self, cx: &GenContext, node: NodeId, parent: NodeId) -> Result<Report> {
        let st = &cx.nodes[&node];
        let honest_space = cx
            .topology
            .parents(node)
            .iter()
            .filter(|p| !self.malicious.contains(p))
            .filter_map(|p| st.store.space(*p))
            .find(|s| s.dim() > 0);
        let body = match honest_space {
            Some(space) => {
                let alphas: Vec<Gf256> = (0..space.packets().len()).map(|_| Gf256::random(&mut self.rng)).collect();
                let mut body = report_body(space, &alphas)?;
                body.tags = locating_emit(&self.edge_keys[&(parent, node)].x_set, cx.id, self.params.dims, &body.y_r, &self.cache)?;
                Some(body)
            }
            None => None,
        };
        Ok(Report { generation: cx.id, reporter: node, parent, body })
    }

    fn decide(&mut self, cx: &mut GenContext) -> Result<()> {
        let round = cx.round.take().ok_or_else(|| SimError::Config("round deadline without a round".into()))?;
        let report = self.controller.locate(&round.alert, &cx.generation, &round.reports, &self.cache)?;
        self.log.push(LogEntry::RoundDecided {
            generation: cx.index,
            at_ms: cx.now,
            identified: report.identified.iter().copied().collect(),
            polluted_edges: report.polluted_edges.len(),
            rejected_edges: report.rejected_edges.len(),
            missing_edges: report.missing_edges.len(),
        });
        cx.record.round = Some(RoundSummary::new(&report, round.started_ms, cx.now));
        Ok(())
    }

    fn deliver(&mut self, cx: &mut GenContext, from: NodeId, to: NodeId, pkt: InFlight) -> Result<()> {
        let Some(st) = cx.nodes.get_mut(&to) else { return Ok(()) };
        if st.frozen {
            return Ok(());
        }
        cx.record.delivered += 1;
        if pkt.polluted {
            cx.record.polluted_edges.insert((from, to));
            if !st.seen_polluted {
                st.seen_polluted = true;
                self.log.push(LogEntry::FirstPolluted { generation: cx.index, at_ms: cx.now, node: to, from });
            }
        }
        if self.attackers.contains_key(&to) {
            return self.attacker_receive(cx, from, to, pkt);
        }
        let from_attacker = self.malicious.contains(&from);
        let counted = pkt.polluted && from_attacker;
        if counted {
            cx.record.corrupted_received += 1;
        }

        let st = cx.nodes.get_mut(&to).expect("checked above");
        let verdict = if !cx.checkers[&(from, to)].check(&pkt.packet.payload, &pkt.locating)? {
            Verdict::Drop(detection::DetectionEvent {
                detector: to,
                suspected_parent: from,
                generation: cx.id,
                kind: DropKind::Locating,
            })
        } else {
            st.store.insert(from, &pkt.packet.payload, &pkt.locating)?;
            let ring = &self.keys.keyrings[&to];
            if cx.topology.role(to)? == Role::Receiver {
                receiver_check(ring, from, &pkt.packet, &mut st.buffer, &self.cache)?
            } else {
                node_receive(ring, from, &pkt.packet, &mut st.buffer, &self.cache)?
            }
        };
        match verdict {
            Verdict::Drop(ev) => {
                if counted {
                    cx.record.corrupted_dropped += 1;
                }
                cx.record.drops.push(DropRecord { at_ms: cx.now, detector: to, parent: from, kind: ev.kind });
                self.log.push(LogEntry::Drop { generation: cx.index, at_ms: cx.now, detector: to, parent: from, kind: ev.kind });
                let st = cx.nodes.get_mut(&to).expect("checked above");
                if !st.alerted {
                    st.alerted = true;
                    self.send_alert(cx, to);
                }
            }
            Verdict::Accept { innovative } => {
                st.tainted |= pkt.polluted;
                if innovative {
                    self.honest_emit(cx, to)?;
                }
            }
        }
        Ok(())
    }

    fn honest_emit(&mut self, cx: &mut GenContext, node: NodeId) -> Result<()> {
        let ring = &self.keys.keyrings[&node];
        let children = cx.topology.children(node).to_vec();
        for c in children {
            let st = &cx.nodes[&node];
            let coeffs = fresh_coefficients(st.buffer.len(), &mut self.rng);
            let packet = node_emit(ring, c, &st.buffer, &coeffs, &self.cache)?;
            if self.params.audit && !st.buffer.basis().contains(packet.payload.data())? {
                cx.record.span_violations += 1;
            }
            let polluted = st.tainted && !rlnc::in_source_space(&cx.generation, &packet.payload);
            let locating = cx.taggers[&(node, c)].tags(&packet.payload)?;
            let at = cx.now + edge_delay(&cx.topology, node, c);
            cx.queue.push(at, EventKind::Deliver { from: node, to: c, packet: Box::new(InFlight { packet, locating, polluted }) });
        }
        Ok(())
    }

    fn attacker_receive(&mut self, cx: &mut GenContext, from: NodeId, to: NodeId, pkt: InFlight) -> Result<()> {
        let st = cx.nodes.get_mut(&to).expect("caller checked");
        // reports stay truthful unless the attacker chooses to lie
        if cx.checkers[&(from, to)].check(&pkt.packet.payload, &pkt.locating)? {
            st.store.insert(from, &pkt.packet.payload, &pkt.locating)?;
        }
        st.tainted |= pkt.polluted;
        let InFlight { packet, .. } = pkt;
        if st.buffer.store(from, packet.payload, packet.helper)? {
            self.attacker_emit(cx, to)?;
        }
        Ok(())
    }

    fn attacker_emit(&mut self, cx: &mut GenContext, node: NodeId) -> Result<()> {
        let dims = self.params.dims;
        let spec = &self.attackers[&node];
        let pollute = spec.has(Behavior::PolluteAllOutgoing);
        let tamper = spec.has(Behavior::TamperHelperTag);
        let knows_own_key = cx.topology.parents(node).iter().any(|p| {
            self.attackers.get(p).is_some_and(|a| a.has(Behavior::LeakKeyToChild))
        });
        let ring = &self.keys.keyrings[&node];
        let children = cx.topology.children(node).to_vec();
        for c in children {
            let st = &cx.nodes[&node];
            let coeffs = fresh_coefficients(st.buffer.len(), &mut self.rng);
            let mut payload = rlnc::recode(st.buffer.packets(), &coeffs)?;
            let mut verification = mac::combine_tags(coeffs.iter().copied().zip(st.buffer.helpers()))?;
            let mut polluted = st.tainted && !rlnc::in_source_space(&cx.generation, &payload);
            if pollute {
                let mut error = FieldVector::zeros(dims.packet_len());
                for i in 0..dims.n {
                    error.set(i, Gf256::random(&mut self.rng));
                }
                if error.is_zero() {
                    error.set(0, Gf256::ONE);
                }
                payload.data_mut().add_assign(&error)?;
                polluted = true;
            }
            if knows_own_key {
                let own = &self.keys.node_keys[&node];
                verification = self.cache.get(own, cx.id, dims)?.mac(payload.data())?;
            }
            let mut helper = self.cache.get(ring.key_for(c)?, cx.id, dims)?.mac(payload.data())?;
            if tamper {
                let delta = Gf256::random_nonzero(&mut self.rng);
                helper.as_bytes_mut()[0] ^= delta.0;
            }
            let locating = cx.taggers[&(node, c)].tags(&payload)?;
            let packet = TaggedPacket { helper, verification, payload };
            let at = cx.now + edge_delay(&cx.topology, node, c);
            cx.queue.push(at, EventKind::Deliver { from: node, to: c, packet: Box::new(InFlight { packet, locating, polluted }) });
        }
        Ok(())
    }
}

/// Random coefficients for a recombination of `len` buffered packets, with
/// the newest one weighted by a nonzero value. A child only ever saw
/// combinations of the older packets from this sender, so the result is
/// innovative for it.
fn fresh_coefficients(len: usize, rng: &mut ChaCha8Rng) -> Vec<Gf256> {
    let mut coeffs: Vec<Gf256> = (0..len).map(|_| Gf256::random(rng)).collect();
    if let Some(last) = coeffs.last_mut() {
        *last = Gf256::random_nonzero(rng);
    }
    coeffs
}

fn edge_delay(t: &Topology, from: NodeId, to: NodeId) -> u64 {
    t.edge(from, to).map_or(0, |e| e.delay_ms as u64)
}

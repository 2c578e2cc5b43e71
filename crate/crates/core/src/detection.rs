//! Hop-by-hop pollution detection.
//!
//! Every node `X` owns a key `k_X̄` that `X` itself never learns. Its parents
//! use it to attach a *helper* tag to what they send to `X`; `X` combines the
//! helper tags of its buffered packets into the *verification* tag of each
//! packet it emits, and `X`'s children check that tag under `k_X̄`. Payloads
//! additionally embed an end-to-end tag under `k*`, known only to the source
//! and the receivers, so adjacent colluders are still caught at a receiver.
//!
//! Wire layout: `[helper: l][verification: l][payload: n + m]`, with the
//! end-to-end tag in payload symbols `0..l`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf::{Basis, FieldVector, Gf256};
use crate::mac::{self, Dimensions, KeyedSpace, MacCache, MacKey, SpaceId, Tag};
use crate::rlnc::{self, CodedPacket, Generation};
use crate::topology::{NodeId, Role, Topology};

/// Keys held by one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionKeyring {
    pub node: NodeId,
    /// `k_X̄` for every parent and child `X`.
    pub neighbor_keys: BTreeMap<NodeId, MacKey>,
    /// The node's own `k_N̄`; only the trusted source holds it, to sign its
    /// verification tags directly.
    pub own_key: Option<MacKey>,
    /// `k*`, present exactly at the source and the receivers.
    pub e2e_key: Option<MacKey>,
}

impl DetectionKeyring {
    pub fn key_for(&self, peer: NodeId) -> Result<&MacKey> {
        self.neighbor_keys
            .get(&peer)
            .ok_or_else(|| Error::MissingKey { node: self.node, peer: peer.to_string() })
    }

    fn e2e(&self) -> Result<&MacKey> {
        self.e2e_key.as_ref().ok_or_else(|| Error::MissingKey { node: self.node, peer: "k*".into() })
    }
}

/// The controller's view of all detection keys.
#[derive(Debug, Clone)]
pub struct DetectionKeys {
    pub node_keys: BTreeMap<NodeId, MacKey>,
    pub e2e_key: MacKey,
    pub keyrings: BTreeMap<NodeId, DetectionKeyring>,
}

/// Draws one key per node plus `k*` and assembles every node's keyring.
pub fn bootstrap<R: Rng + ?Sized>(topology: &Topology, rng: &mut R) -> DetectionKeys {
    let node_keys: BTreeMap<NodeId, MacKey> = topology.node_ids().map(|id| (id, MacKey::random(rng))).collect();
    let e2e_key = MacKey::random(rng);
    let keyrings = topology
        .node_ids()
        .map(|id| {
            let neighbor_keys = topology
                .parents(id)
                .iter()
                .chain(topology.children(id))
                .map(|&x| (x, node_keys[&x]))
                .collect();
            let role = topology.role(id).expect("node from topology");
            let ring = DetectionKeyring {
                node: id,
                neighbor_keys,
                own_key: (role == Role::Source).then(|| node_keys[&id]),
                e2e_key: matches!(role, Role::Source | Role::Receiver).then_some(e2e_key),
            };
            (id, ring)
        })
        .collect();
    DetectionKeys { node_keys, e2e_key, keyrings }
}

/// Packet as it travels over one edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedPacket {
    pub helper: Tag,
    pub verification: Tag,
    pub payload: CodedPacket,
}

impl TaggedPacket {
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.helper.len() * 2 + self.payload.len());
        out.extend_from_slice(self.helper.as_bytes());
        out.extend_from_slice(self.verification.as_bytes());
        out.extend_from_slice(self.payload.data().as_bytes());
        out
    }

    pub fn from_wire(bytes: &[u8], dims: Dimensions) -> Result<Self> {
        let want = 2 * dims.l + dims.packet_len();
        if bytes.len() != want {
            return Err(Error::Malformed(format!("expected {want} bytes on the wire, got {}", bytes.len())));
        }
        let l = dims.l;
        Ok(TaggedPacket {
            helper: Tag::from_bytes(&bytes[..l]),
            verification: Tag::from_bytes(&bytes[l..2 * l]),
            payload: CodedPacket::new(FieldVector::from_bytes(&bytes[2 * l..]), dims.m)?,
        })
    }

    fn check_framing(&self, dims: Dimensions) -> Result<()> {
        if self.helper.len() != dims.l || self.verification.len() != dims.l {
            return Err(Error::Malformed(format!("tags must have {} symbols", dims.l)));
        }
        if self.payload.len() != dims.packet_len() || self.payload.m() != dims.m {
            return Err(Error::Malformed(format!(
                "payload must have {} symbols with {} coefficients",
                dims.packet_len(),
                dims.m
            )));
        }
        Ok(())
    }
}

/// Geometry of the end-to-end MAC: the packet minus the embedded tag.
pub fn e2e_dims(dims: Dimensions) -> Result<Dimensions> {
    if dims.n <= dims.l {
        return Err(Error::invalid("n", format!("must exceed l = {} to hold the end-to-end tag", dims.l)));
    }
    Dimensions::new(dims.n - dims.l, dims.m, dims.l)
}

fn strip_e2e(p: &CodedPacket, l: usize) -> FieldVector {
    FieldVector::from_bytes(&p.data().as_bytes()[l..])
}

/// Builds a generation from `m` raw messages of `n - l` symbols each, prefixing
/// every message with its end-to-end tag under `k*`.
pub fn embed_e2e(messages: Vec<FieldVector>, id: SpaceId, e2e_key: &MacKey, dims: Dimensions) -> Result<Generation> {
    let inner = e2e_dims(dims)?;
    Error::check_len(dims.m, messages.len())?;
    let ks = KeyedSpace::new(e2e_key, id, inner)?;
    let mut payloads = Vec::with_capacity(dims.m);
    for (i, w) in messages.iter().enumerate() {
        Error::check_len(inner.n, w.len())?;
        let t = ks.mac(&w.concat(&FieldVector::unit(dims.m, i)))?;
        payloads.push(FieldVector::from_bytes(t.as_bytes()).concat(w));
    }
    rlnc::augment(payloads, id)
}

/// Random messages wrapped by [`embed_e2e`].
pub fn random_generation<R: Rng + ?Sized>(id: SpaceId, e2e_key: &MacKey, dims: Dimensions, rng: &mut R) -> Result<Generation> {
    let inner = e2e_dims(dims)?;
    let msgs = (0..dims.m).map(|_| FieldVector::random(inner.n, rng)).collect();
    embed_e2e(msgs, id, e2e_key, dims)
}

/// Checks the tag embedded in `p` under `k*`.
pub fn verify_e2e(p: &CodedPacket, id: SpaceId, e2e_key: &MacKey, dims: Dimensions, cache: &MacCache) -> Result<bool> {
    let inner = e2e_dims(dims)?;
    let ks = cache.get(e2e_key, id, inner)?;
    let tag = Tag::from_bytes(&p.data().as_bytes()[..dims.l]);
    ks.verify(&strip_e2e(p, dims.l), &tag)
}

/// Tags the source attaches to packet `p` sent to `child`.
pub fn source_tag(
    ring: &DetectionKeyring,
    child: NodeId,
    id: SpaceId,
    dims: Dimensions,
    p: &CodedPacket,
    cache: &MacCache,
) -> Result<TaggedPacket> {
    let own = ring.own_key.as_ref().ok_or_else(|| Error::MissingKey { node: ring.node, peer: "own".into() })?;
    Ok(TaggedPacket {
        helper: cache.get(ring.key_for(child)?, id, dims)?.mac(p.data())?,
        verification: cache.get(own, id, dims)?.mac(p.data())?,
        payload: p.clone(),
    })
}

/// The source packets of `g`, tagged for `child`.
pub fn source_emit(
    g: &Generation,
    ring: &DetectionKeyring,
    child: NodeId,
    dims: Dimensions,
    cache: &MacCache,
) -> Result<Vec<TaggedPacket>> {
    g.packets().iter().map(|p| source_tag(ring, child, g.id(), dims, p, cache)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropKind {
    /// The verification tag under the sender's key failed.
    HopTag,
    /// The embedded end-to-end tag failed at a receiver.
    EndToEnd,
    /// A child-verifiable locating tag failed.
    Locating,
}

/// Alert payload: who dropped what from whom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub detector: NodeId,
    pub suspected_parent: NodeId,
    pub generation: SpaceId,
    pub kind: DropKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// `innovative` is true iff the packet grew the received space.
    Accept { innovative: bool },
    Drop(DetectionEvent),
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        matches!(self, Verdict::Accept { .. })
    }
}

/// A node's received packets for one generation. Only innovative packets are
/// kept, since the others add nothing to what the node can emit.
#[derive(Debug, Clone)]
pub struct NodeBuffer {
    id: SpaceId,
    dims: Dimensions,
    basis: Basis,
    packets: Vec<CodedPacket>,
    helpers: Vec<Tag>,
    senders: Vec<NodeId>,
}

impl NodeBuffer {
    pub fn new(id: SpaceId, dims: Dimensions) -> Self {
        NodeBuffer {
            id,
            dims,
            basis: Basis::new(dims.packet_len()),
            packets: Vec::new(),
            helpers: Vec::new(),
            senders: Vec::new(),
        }
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }

    pub fn dims(&self) -> Dimensions {
        self.dims
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn rank(&self) -> usize {
        self.basis.dim()
    }

    pub fn packets(&self) -> &[CodedPacket] {
        &self.packets
    }

    pub fn helpers(&self) -> &[Tag] {
        &self.helpers
    }

    pub fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.packets.len()
    }

    /// Stored packets that arrived from `parent`.
    pub fn from_parent(&self, parent: NodeId) -> impl Iterator<Item = &CodedPacket> + '_ {
        self.packets.iter().zip(&self.senders).filter(move |(_, s)| **s == parent).map(|(p, _)| p)
    }

    /// Adds a packet that already passed verification. Returns whether it was
    /// innovative (and hence stored).
    pub fn store(&mut self, from: NodeId, payload: CodedPacket, helper: Tag) -> Result<bool> {
        let innovative = self.basis.insert(payload.data())?;
        if innovative {
            self.packets.push(payload);
            self.helpers.push(helper);
            self.senders.push(from);
        }
        Ok(innovative)
    }
}

/// Verifies a packet from `from` and, if it passes, buffers it.
pub fn node_receive(
    ring: &DetectionKeyring,
    from: NodeId,
    pkt: &TaggedPacket,
    buffer: &mut NodeBuffer,
    cache: &MacCache,
) -> Result<Verdict> {
    let dims = buffer.dims;
    pkt.check_framing(dims)?;
    let key = ring.key_for(from)?;
    if !cache.get(key, buffer.id, dims)?.verify(pkt.payload.data(), &pkt.verification)? {
        return Ok(Verdict::Drop(DetectionEvent {
            detector: ring.node,
            suspected_parent: from,
            generation: buffer.id,
            kind: DropKind::HopTag,
        }));
    }
    let innovative = buffer.store(from, pkt.payload.clone(), pkt.helper.clone())?;
    Ok(Verdict::Accept { innovative })
}

/// Receiver-side check: the hop check, then the end-to-end tag. The packet is
/// buffered only if both pass.
pub fn receiver_check(
    ring: &DetectionKeyring,
    from: NodeId,
    pkt: &TaggedPacket,
    buffer: &mut NodeBuffer,
    cache: &MacCache,
) -> Result<Verdict> {
    let dims = buffer.dims;
    pkt.check_framing(dims)?;
    let e2e = ring.e2e()?;
    let key = ring.key_for(from)?;
    let event = |kind| {
        Verdict::Drop(DetectionEvent { detector: ring.node, suspected_parent: from, generation: buffer.id, kind })
    };
    if !cache.get(key, buffer.id, dims)?.verify(pkt.payload.data(), &pkt.verification)? {
        return Ok(event(DropKind::HopTag));
    }
    if !verify_e2e(&pkt.payload, buffer.id, e2e, dims, cache)? {
        return Ok(event(DropKind::EndToEnd));
    }
    let innovative = buffer.store(from, pkt.payload.clone(), pkt.helper.clone())?;
    Ok(Verdict::Accept { innovative })
}

/// Emits `Σ coeffs[i] · buffered_i` to `dest`, with the verification tag
/// combined from the stored helper tags and a fresh helper tag for `dest`.
pub fn node_emit(
    ring: &DetectionKeyring,
    dest: NodeId,
    buffer: &NodeBuffer,
    coeffs: &[Gf256],
    cache: &MacCache,
) -> Result<TaggedPacket> {
    let payload = rlnc::recode(&buffer.packets, coeffs)?;
    let verification = mac::combine_tags(coeffs.iter().copied().zip(&buffer.helpers))?;
    let helper = cache.get(ring.key_for(dest)?, buffer.id, buffer.dims)?.mac(payload.data())?;
    Ok(TaggedPacket { helper, verification, payload })
}

/// Like [`node_emit`] with uniformly random coefficients.
pub fn node_emit_random<R: Rng + ?Sized>(
    ring: &DetectionKeyring,
    dest: NodeId,
    buffer: &NodeBuffer,
    cache: &MacCache,
    rng: &mut R,
) -> Result<(TaggedPacket, Vec<Gf256>)> {
    let coeffs: Vec<Gf256> = (0..buffer.len()).map(|_| Gf256::random(rng)).collect();
    Ok((node_emit(ring, dest, buffer, &coeffs, cache)?, coeffs))
}

//! Anonymous descriptor propagation and co-interest (C-IOR) establishment.
//!
//! A source device floods its owner's descriptor, stripped of the owner,
//! along SIoT edges for at most `ttl` hops. Every device sees a token once,
//! remembers only the token id and the device that handed it over, and
//! decides locally whether it wants a C-IOR with the (unknown) originator.
//! Requests travel back hop by hop along the remembered previous hops.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::human::{AuthorizationMap, UserIx};
use crate::interest::{cosine_similarity, has_interest, InterestDescriptor, MacroId};
use crate::rng::{keyed_rng, TAG_TOKEN};
use crate::siot::{fixed_of, mobile_of, DeviceIx, SiotGraph, SiotView};

pub const DEFAULT_TTL: u32 = 6;
pub const DEFAULT_SIM_THRESHOLD: f64 = 0.5;
/// Slack on the similarity gate so that an exact 0.5 is not lost to rounding.
pub const SIM_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OriginDevice {
    #[default]
    Mobile,
    Both,
}

impl std::str::FromStr for OriginDevice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mobile" => Ok(OriginDevice::Mobile),
            "both" => Ok(OriginDevice::Both),
            other => Err(Error::Config(format!("origin_device must be mobile or both, got `{other}`"))),
        }
    }
}

impl OriginDevice {
    pub fn devices(self, owner: UserIx) -> Vec<DeviceIx> {
        match self {
            OriginDevice::Mobile => vec![mobile_of(owner)],
            OriginDevice::Both => vec![mobile_of(owner), fixed_of(owner)],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    pub ttl: u32,
    pub sim_threshold: f64,
    pub origin: OriginDevice,
    /// Interest the established relationships are scoped to.
    pub interest: MacroId,
}

impl ProtocolParams {
    pub fn new(interest: MacroId) -> Self {
        ProtocolParams {
            ttl: DEFAULT_TTL,
            sim_threshold: DEFAULT_SIM_THRESHOLD,
            origin: OriginDevice::Mobile,
            interest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VuipToken {
    pub token_id: u64,
    /// Always anonymized.
    pub payload: InterestDescriptor,
    pub ttl: u32,
}

/// What one device keeps about a token it received.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RelayRecord {
    pub holder: DeviceIx,
    pub token_id: u64,
    pub previous_hop: DeviceIx,
    /// Remaining TTL on arrival.
    pub received_ttl: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiorRequest {
    pub requester: DeviceIx,
    pub token_id: u64,
    /// Interests the requester shares with the payload.
    pub interests: BTreeSet<MacroId>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CiorEdge {
    pub source_device: DeviceIx,
    pub requester_device: DeviceIx,
    pub interests: BTreeSet<MacroId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationTrace {
    pub token: VuipToken,
    /// Known only to the originating device; never serialized.
    origin: DeviceIx,
    /// One record per receiving device, in delivery order.
    pub records: Vec<RelayRecord>,
    pub evaluated: BTreeSet<DeviceIx>,
    pub hop: BTreeMap<DeviceIx, u32>,
    pub established: Vec<CiorEdge>,
    by_holder: BTreeMap<DeviceIx, usize>,
}

impl PropagationTrace {
    pub fn origin(&self) -> DeviceIx {
        self.origin
    }

    pub fn record_of(&self, holder: DeviceIx) -> Option<&RelayRecord> {
        self.by_holder.get(&holder).map(|&i| &self.records[i])
    }

    /// Debug export, `token_id,holder,previous_hop,hop` per line.
    pub fn export_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let hop = self.token.ttl - r.received_ttl;
            let _ = writeln!(out, "{},{},{},{}", r.token_id, r.holder, r.previous_hop, hop);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.export_lines()).map_err(|e| Error::io(path, e))
    }
}

/// Per-thread flood buffers.
#[derive(Debug, Default)]
pub struct FloodScratch {
    stamp: Vec<u32>,
    epoch: u32,
    prev: Vec<DeviceIx>,
    hop: Vec<u32>,
    /// `(device, hop, previous)` in delivery order.
    order: Vec<(DeviceIx, u32, DeviceIx)>,
    frontier: Vec<DeviceIx>,
    next: Vec<DeviceIx>,
}

impl FloodScratch {
    fn reset(&mut self, n: usize) {
        if self.stamp.len() != n {
            self.stamp = vec![0; n];
            self.prev = vec![0; n];
            self.hop = vec![0; n];
            self.epoch = 0;
        }
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.order.clear();
        self.frontier.clear();
        self.next.clear();
    }

    fn seen(&self, d: DeviceIx) -> bool {
        self.stamp[d] == self.epoch
    }

    fn mark(&mut self, d: DeviceIx, hop: u32, prev: DeviceIx) {
        self.stamp[d] = self.epoch;
        self.hop[d] = hop;
        self.prev[d] = prev;
    }
}

/// Level-synchronous flood. The origin always sends; others forward while
/// hops remain and their replicate decision allows it.
fn flood(
    origin: DeviceIx,
    view: &SiotView,
    auth: &AuthorizationMap,
    ttl: u32,
    s: &mut FloodScratch,
) {
    s.reset(view.len());
    s.mark(origin, 0, origin);
    s.frontier.push(origin);
    let mut hop = 0;
    while !s.frontier.is_empty() && hop < ttl {
        let frontier = std::mem::take(&mut s.frontier);
        for &d in &frontier {
            if hop > 0 && !auth.forwards(d, hop) {
                continue;
            }
            for &n in view.neighbors(d) {
                if !s.seen(n) {
                    s.mark(n, hop + 1, d);
                    s.order.push((n, hop + 1, d));
                    s.next.push(n);
                }
            }
        }
        s.frontier = frontier;
        s.frontier.clear();
        std::mem::swap(&mut s.frontier, &mut s.next);
        hop += 1;
    }
}

fn token_id(seed: u64, replicate: u32, origin: DeviceIx) -> u64 {
    keyed_rng(seed, &[TAG_TOKEN, replicate as u64, origin as u64]).gen()
}

#[allow(clippy::too_many_arguments)]
pub fn propagate_vuip(
    source_device: DeviceIx,
    view: &SiotView,
    auth: &AuthorizationMap,
    payload: &InterestDescriptor,
    ttl: u32,
    seed: u64,
    replicate: u32,
) -> Result<PropagationTrace> {
    if source_device >= view.len() {
        return Err(Error::UnknownNode(source_device));
    }
    if ttl == 0 {
        return Err(Error::Config("ttl must be at least 1".into()));
    }
    let mut s = FloodScratch::default();
    flood(source_device, view, auth, ttl, &mut s);
    let token = VuipToken {
        token_id: token_id(seed, replicate, source_device),
        payload: payload.anonymized(),
        ttl,
    };
    let mut records = Vec::with_capacity(s.order.len());
    let mut by_holder = BTreeMap::new();
    let mut hop = BTreeMap::new();
    for &(d, h, p) in &s.order {
        by_holder.insert(d, records.len());
        hop.insert(d, h);
        records.push(RelayRecord {
            holder: d,
            token_id: token.token_id,
            previous_hop: p,
            received_ttl: ttl - h,
        });
    }
    Ok(PropagationTrace {
        token,
        origin: source_device,
        evaluated: by_holder.keys().copied().collect(),
        records,
        hop,
        established: Vec::new(),
        by_holder,
    })
}

/// Similarity and interest gate for one receiving owner.
pub fn wants_cior(
    own: &InterestDescriptor,
    payload: &InterestDescriptor,
    sim_threshold: f64,
    interest: MacroId,
) -> bool {
    has_interest(own, interest) && cosine_similarity(own, payload) + SIM_EPSILON >= sim_threshold
}

fn shared(own: &InterestDescriptor, payload: &InterestDescriptor) -> BTreeSet<MacroId> {
    own.held.intersection(&payload.held).copied().collect()
}

/// Requests emitted by the devices that received the token. `owner_of`
/// maps devices to users and `vuips` holds one descriptor per user.
pub fn evaluate_candidates(
    trace: &PropagationTrace,
    owner_of: impl Fn(DeviceIx) -> UserIx,
    vuips: &[InterestDescriptor],
    sim_threshold: f64,
    interest: MacroId,
) -> Vec<CiorRequest> {
    let source_owner = owner_of(trace.origin);
    trace
        .records
        .iter()
        .filter(|r| owner_of(r.holder) != source_owner)
        .filter_map(|r| {
            let own = &vuips[owner_of(r.holder)];
            wants_cior(own, &trace.token.payload, sim_threshold, interest).then(|| CiorRequest {
                requester: r.holder,
                token_id: r.token_id,
                interests: shared(own, &trace.token.payload),
            })
        })
        .collect()
}

/// Routes a request back along previous hops. Returns the new edge and the
/// devices the request visited, origin last.
pub fn backpropagate(
    request: &CiorRequest,
    trace: &PropagationTrace,
) -> Result<(CiorEdge, Vec<DeviceIx>)> {
    let mut walk = Vec::new();
    let mut at = request.requester;
    while at != trace.origin {
        let rec = trace
            .record_of(at)
            .filter(|r| r.token_id == request.token_id)
            .ok_or(Error::BrokenRelayChain(at))?;
        at = rec.previous_hop;
        walk.push(at);
        if walk.len() > trace.token.ttl as usize {
            return Err(Error::BrokenRelayChain(at));
        }
    }
    Ok((
        CiorEdge {
            source_device: trace.origin,
            requester_device: request.requester,
            interests: request.interests.clone(),
        },
        walk,
    ))
}

/// Propagate, evaluate and back-propagate for one origin device.
#[allow(clippy::too_many_arguments)]
pub fn establish_for_origin(
    origin: DeviceIx,
    graph: &SiotGraph,
    view: &SiotView,
    vuips: &[InterestDescriptor],
    auth: &AuthorizationMap,
    params: &ProtocolParams,
    seed: u64,
    replicate: u32,
) -> Result<PropagationTrace> {
    let owner = graph.owner_of(origin);
    let mut trace = propagate_vuip(origin, view, auth, &vuips[owner], params.ttl, seed, replicate)?;
    let requests = evaluate_candidates(
        &trace,
        |d| graph.owner_of(d),
        vuips,
        params.sim_threshold,
        params.interest,
    );
    for req in &requests {
        let (edge, _) = backpropagate(req, &trace)?;
        trace.established.push(edge);
    }
    Ok(trace)
}

/// Fast path for campaigns: same outcome as [`establish_for_origin`] without
/// materializing relay records.
pub(crate) fn cior_edges_for_origin(
    origin: DeviceIx,
    graph: &SiotGraph,
    view: &SiotView,
    vuips: &[InterestDescriptor],
    auth: &AuthorizationMap,
    params: &ProtocolParams,
    scratch: &mut FloodScratch,
    out: &mut Vec<CiorEdge>,
) {
    let owner = graph.owner_of(origin);
    let payload = &vuips[owner];
    flood(origin, view, auth, params.ttl, scratch);
    for &(d, _, _) in &scratch.order {
        let o = graph.owner_of(d);
        if o == owner {
            continue;
        }
        let own = &vuips[o];
        if wants_cior(own, payload, params.sim_threshold, params.interest) {
            out.push(CiorEdge {
                source_device: origin,
                requester_device: d,
                interests: shared(own, payload),
            });
        }
    }
}

/// Runs the protocol for every listed source user and returns the sorted
/// set of established edges. Sources propagate over `view` only, so the
/// outcome does not depend on processing order.
#[allow(clippy::too_many_arguments)]
pub fn establish_cior_edges(
    sources: &[UserIx],
    graph: &SiotGraph,
    view: &SiotView,
    vuips: &[InterestDescriptor],
    auth: &AuthorizationMap,
    params: &ProtocolParams,
) -> Vec<CiorEdge> {
    let mut edges: Vec<CiorEdge> = sources
        .par_iter()
        .map_init(FloodScratch::default, |scratch, &u| {
            let mut out = Vec::new();
            for origin in params.origin.devices(u) {
                if origin < view.len() && graph.owner_of(origin) == u {
                    cior_edges_for_origin(origin, graph, view, vuips, auth, params, scratch, &mut out);
                }
            }
            out
        })
        .flatten()
        .collect();
    edges.sort();
    edges.dedup();
    edges
}

/// Full round: returns `graph` plus every C-IOR edge established.
#[allow(clippy::too_many_arguments)]
pub fn run_cior_round(
    sources: &[UserIx],
    graph: &SiotGraph,
    view: &SiotView,
    vuips: &[InterestDescriptor],
    auth: &AuthorizationMap,
    params: &ProtocolParams,
) -> SiotGraph {
    let mut out = graph.clone();
    for e in establish_cior_edges(sources, graph, view, vuips, auth, params) {
        out.add_cior(e.source_device, e.requester_device, &e.interests);
    }
    out
}

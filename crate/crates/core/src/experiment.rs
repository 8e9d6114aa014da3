//! Campaign orchestration: Friendships vs Enhanced-SIoT discovery over
//! parameter sweeps with coupled randomness.
//!
//! Every replicate draws one uniform per user (authorization) and one per
//! device (forwarding). Those draws are shared by every mode and sweep
//! point, and a node cooperates at level `p` iff its draw is below `p`.
//! Raising a probability or adding edges can therefore only add reach,
//! sample by sample.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::human::{
    community_of, discover, giant_component_pct, interested_mask, AuthorizationMap,
    AuthorizationPolicy, FriendshipGraph, Layers, ReachScratch, UserIx,
};
use crate::interest::{read_vuips, write_vuips, InterestDescriptor, MacroId};
use crate::protocol::{establish_cior_edges, CiorEdge, OriginDevice, ProtocolParams};
use crate::rng::{keyed_rng, TAG_AUTH, TAG_FORWARD, TAG_SOURCES};
use crate::siot::{edge_visible, fixed_of, mobile_of, DeviceKind, KindSet, RelationshipKind, SiotGraph, SiotView};
use crate::trace::{parse_friendships, write_friendships};

/// Uniform draws of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionDraws {
    /// One per user.
    pub auth: Vec<f64>,
    /// One per device.
    pub forward: Vec<f64>,
}

/// Draws for `(seed, replicate)`. Draw `i` of each stream depends only on
/// `i`, so adding nodes never perturbs existing ones.
pub fn couple_randomness(seed: u64, replicate: u32, n_users: usize, n_devices: usize) -> DecisionDraws {
    let mut a = keyed_rng(seed, &[TAG_AUTH, replicate as u64]);
    let mut f = keyed_rng(seed, &[TAG_FORWARD, replicate as u64]);
    DecisionDraws {
        auth: (0..n_users).map(|_| a.gen()).collect(),
        forward: (0..n_devices).map(|_| f.gen()).collect(),
    }
}

/// The graphs and descriptors a campaign runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub users: FriendshipGraph,
    /// One descriptor per user index.
    pub vuips: Vec<InterestDescriptor>,
    pub siot: SiotGraph,
}

pub const FRIENDSHIPS_FILE: &str = "friendships.tsv";
pub const DEVICES_FILE: &str = "devices.csv";
pub const SIOT_EDGES_FILE: &str = "siot_edges.csv";
pub const VUIPS_FILE: &str = "vuips.csv";

impl Scenario {
    /// Checks the device layout: device `2u` mobile and `2u + 1` fixed.
    pub fn validate(&self) -> Result<()> {
        let n = self.users.len();
        if self.vuips.len() != n {
            return Err(Error::InvalidScenario("descriptor count differs from user count".into()));
        }
        if self.siot.devices().len() != 2 * n {
            return Err(Error::InvalidScenario(format!(
                "{} devices for {n} users; every user needs exactly two",
                self.siot.devices().len()
            )));
        }
        for u in 0..n {
            let m = self.siot.device(mobile_of(u));
            let f = self.siot.device(fixed_of(u));
            if m.owner != u || m.kind != DeviceKind::Mobile || f.owner != u || f.kind != DeviceKind::Fixed {
                return Err(Error::InvalidScenario(format!(
                    "devices of `{}` are not laid out as mobile {} / fixed {}",
                    self.users.name(u),
                    mobile_of(u),
                    fixed_of(u)
                )));
            }
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let mut users = FriendshipGraph::default();
        let devices = SiotGraph::read_devices(&dir.join(DEVICES_FILE), &mut users)?;
        let (pairs, _) = parse_friendships(&dir.join(FRIENDSHIPS_FILE))?;
        for (a, b) in &pairs {
            for u in [a, b] {
                if users.index_of(u).is_none() {
                    return Err(Error::InvalidScenario(format!("friend `{u}` has no devices")));
                }
            }
            users.add_named_edge(a, b);
        }
        let users = users.finish();
        let mut siot = SiotGraph::new(devices, users.len());
        siot.read_edges(&dir.join(SIOT_EDGES_FILE))?;
        let mut by_name = read_vuips(&dir.join(VUIPS_FILE))?;
        let vuips = users
            .names()
            .iter()
            .map(|n| {
                by_name.remove(n).unwrap_or_else(|| InterestDescriptor {
                    owner: Some(n.clone()),
                    ..Default::default()
                })
            })
            .collect();
        if let Some(stray) = by_name.keys().next() {
            return Err(Error::InvalidScenario(format!("descriptor for unknown user `{stray}`")));
        }
        let s = Scenario { users, vuips, siot };
        s.validate()?;
        Ok(s)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let pairs: BTreeSet<(String, String)> = self
            .users
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let (a, b) = (self.users.name(a), self.users.name(b));
                if a < b {
                    (a.to_string(), b.to_string())
                } else {
                    (b.to_string(), a.to_string())
                }
            })
            .collect();
        write_friendships(&dir.join(FRIENDSHIPS_FILE), &pairs)?;
        self.siot.write_devices(&dir.join(DEVICES_FILE), &self.users)?;
        self.siot.write_edges(&dir.join(SIOT_EDGES_FILE))?;
        let named: BTreeMap<String, InterestDescriptor> = self
            .users
            .names()
            .iter()
            .cloned()
            .zip(self.vuips.iter().cloned())
            .collect();
        write_vuips(&dir.join(VUIPS_FILE), &named)
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_devices(&self) -> usize {
        self.siot.devices().len()
    }

    /// Users without any friendship and without any SIoT edge to another
    /// owner. No mode can ever reach them.
    pub fn isolated_mask(&self) -> Vec<bool> {
        let mut linked: Vec<bool> = (0..self.n_users())
            .map(|u| !self.users.neighbors(u).is_empty())
            .collect();
        for &(a, b) in self.siot.edges().keys() {
            let (oa, ob) = (self.siot.owner_of(a), self.siot.owner_of(b));
            if oa != ob {
                linked[oa] = true;
                linked[ob] = true;
            }
        }
        linked.into_iter().map(|l| !l).collect()
    }

    pub fn interested(&self, interest: MacroId) -> Vec<bool> {
        interested_mask(&self.vuips, interest)
    }
}

/// Owner-level SIoT contact lists for one interest: every visible edge
/// between devices of different owners, plus `extra` C-IOR edges when
/// C-IOR is selected.
pub fn siot_contacts(
    siot: &SiotGraph,
    kinds: KindSet,
    interest: MacroId,
    extra: &[CiorEdge],
) -> Vec<Vec<UserIx>> {
    let n = siot.devices().len().div_ceil(2);
    let mut adj: Vec<Vec<UserIx>> = vec![Vec::new(); n];
    let mut link = |a: UserIx, b: UserIx| {
        if a != b {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for (&(a, b), e) in siot.edges() {
        if edge_visible(e, kinds, Some(interest)) {
            link(siot.owner_of(a), siot.owner_of(b));
        }
    }
    if kinds.contains(RelationshipKind::Cior) {
        for e in extra.iter().filter(|e| e.interests.contains(&interest)) {
            link(siot.owner_of(e.source_device), siot.owner_of(e.requester_device));
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Mode {
    Friendships,
    /// Friendships plus the SIoT contact lists over `kinds`; the C-IOR
    /// protocol runs iff `kinds` contains C-IOR.
    EnhancedSiot { kinds: KindSet },
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Friendships => "friendships",
            Mode::EnhancedSiot { .. } => "enhanced_siot",
        }
    }

    pub fn kinds(&self) -> KindSet {
        match self {
            Mode::Friendships => KindSet::EMPTY,
            Mode::EnhancedSiot { kinds } => *kinds,
        }
    }

    pub fn series_label(&self) -> String {
        format!("{}[{}]", self.label(), self.kinds().label())
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.series_label())
    }
}

/// Mode as written in a config; resolved against a sweep point's kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeSpec {
    Friendships,
    Enhanced,
    EnhancedNoCior,
}

impl ModeSpec {
    pub fn resolve(self, kinds: KindSet) -> Mode {
        match self {
            ModeSpec::Friendships => Mode::Friendships,
            ModeSpec::Enhanced => Mode::EnhancedSiot { kinds },
            ModeSpec::EnhancedNoCior => Mode::EnhancedSiot {
                kinds: kinds.without(RelationshipKind::Cior),
            },
        }
    }
}

impl std::str::FromStr for ModeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "friendships" => Ok(ModeSpec::Friendships),
            "enhanced" | "enhanced_siot" => Ok(ModeSpec::Enhanced),
            "enhanced_nocior" => Ok(ModeSpec::EnhancedNoCior),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepVar {
    #[default]
    None,
    Spread,
    Auth,
    Kinds,
    Ttl,
    MaxHops,
}

impl SweepVar {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVar::None => "none",
            SweepVar::Spread => "spread",
            SweepVar::Auth => "auth",
            SweepVar::Kinds => "kinds",
            SweepVar::Ttl => "ttl",
            SweepVar::MaxHops => "max_hops",
        }
    }
}

impl std::str::FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "none" | "" => SweepVar::None,
            "spread" => SweepVar::Spread,
            "auth" => SweepVar::Auth,
            "kinds" => SweepVar::Kinds,
            "ttl" => SweepVar::Ttl,
            "max_hops" => SweepVar::MaxHops,
            other => return Err(Error::Config(format!("unknown sweep_var `{other}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub campaign: String,
    /// Scenario directory, resolved relative to the config file.
    pub scenario: Option<PathBuf>,
    pub interest: MacroId,
    pub modes: Vec<ModeSpec>,
    pub kinds: KindSet,
    pub sweep_var: SweepVar,
    /// Raw sweep point strings; per-hop vectors use `/` between hops.
    pub sweep_values: Vec<String>,
    pub auth_prob_per_hop: Vec<f64>,
    pub spread_prob_per_hop: Vec<f64>,
    pub replicates: u32,
    pub seed: u64,
    pub include_isolated: bool,
    pub max_hops: u32,
    pub ttl: u32,
    pub sim_threshold: f64,
    pub origin_device: OriginDevice,
    /// Cap on sources per replicate; 0 means every eligible user.
    pub max_sources: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            campaign: "campaign".into(),
            scenario: None,
            interest: 3,
            modes: vec![ModeSpec::Friendships, ModeSpec::Enhanced],
            kinds: KindSet::all(),
            sweep_var: SweepVar::None,
            sweep_values: Vec::new(),
            auth_prob_per_hop: vec![1.0],
            spread_prob_per_hop: vec![1.0],
            replicates: 30,
            seed: 0,
            include_isolated: true,
            max_hops: crate::human::DEFAULT_MAX_HOPS_INTEREST_STUDY,
            ttl: crate::protocol::DEFAULT_TTL,
            sim_threshold: crate::protocol::DEFAULT_SIM_THRESHOLD,
            origin_device: OriginDevice::Mobile,
            max_sources: 0,
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split([',', '/'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse `{s}`")))
        })
        .collect()
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{v}`")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true/false, got `{v}`"))),
    }
}

/// One resolved sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub label: String,
    pub x: f64,
    pub policy: AuthorizationPolicy,
    pub kinds: KindSet,
    pub ttl: u32,
    pub max_hops: u32,
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "campaign" => c.campaign = value.to_string(),
                "scenario" => c.scenario = Some(PathBuf::from(value)),
                "interest" => c.interest = parse_one(key, value)?,
                "modes" => c.modes = parse_list(key, value)?,
                "kinds" => c.kinds = parse_one(key, value)?,
                "sweep_var" => c.sweep_var = parse_one(key, value)?,
                "sweep_values" => {
                    c.sweep_values = value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(String::from)
                        .collect()
                }
                "auth_prob_per_hop" => c.auth_prob_per_hop = parse_list(key, value)?,
                "spread_prob_per_hop" => c.spread_prob_per_hop = parse_list(key, value)?,
                "replicates" => c.replicates = parse_one(key, value)?,
                "seed" => c.seed = parse_one(key, value)?,
                "include_isolated" => c.include_isolated = parse_bool(key, value)?,
                "max_hops" => c.max_hops = parse_one(key, value)?,
                "ttl" => c.ttl = parse_one(key, value)?,
                "sim_threshold" => c.sim_threshold = parse_one(key, value)?,
                "origin_device" => c.origin_device = parse_one(key, value)?,
                "max_sources" => c.max_sources = parse_one(key, value)?,
                other => return Err(Error::UnknownConfigKey(other.to_string())),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::parse(&text)?;
        if let (Some(s), Some(dir)) = (&c.scenario, path.parent()) {
            if s.is_relative() {
                c.scenario = Some(dir.join(s));
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::Config("modes is empty".into()));
        }
        if self.ttl == 0 {
            return Err(Error::Config("ttl must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sim_threshold) {
            return Err(Error::Config("sim_threshold must be in [0,1]".into()));
        }
        if self.sweep_var != SweepVar::None && self.sweep_values.is_empty() {
            return Err(Error::Config("sweep_values is empty".into()));
        }
        self.points().map(|_| ())
    }

    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let base = SweepPoint {
            label: "-".into(),
            x: 0.0,
            policy: AuthorizationPolicy::new(
                self.auth_prob_per_hop.clone(),
                self.spread_prob_per_hop.clone(),
            )?,
            kinds: self.kinds,
            ttl: self.ttl,
            max_hops: self.max_hops,
        };
        if self.sweep_var == SweepVar::None {
            return Ok(vec![base]);
        }
        self.sweep_values
            .iter()
            .enumerate()
            .map(|(i, raw)| {
                let key = "sweep_values";
                let mut p = SweepPoint {
                    label: raw.clone(),
                    x: i as f64,
                    ..base.clone()
                };
                match self.sweep_var {
                    SweepVar::None => unreachable!(),
                    SweepVar::Spread | SweepVar::Auth => {
                        let probs: Vec<f64> = parse_list(key, raw)?;
                        p.x = *probs.first().ok_or_else(|| Error::Config("empty sweep point".into()))?;
                        p.policy = if self.sweep_var == SweepVar::Spread {
                            AuthorizationPolicy::new(self.auth_prob_per_hop.clone(), probs)?
                        } else {
                            AuthorizationPolicy::new(probs, self.spread_prob_per_hop.clone())?
                        };
                    }
                    SweepVar::Kinds => p.kinds = parse_one(key, raw)?,
                    SweepVar::Ttl => {
                        p.ttl = parse_one(key, raw)?;
                        if p.ttl == 0 {
                            return Err(Error::Config("ttl must be at least 1".into()));
                        }
                        p.x = p.ttl as f64;
                    }
                    SweepVar::MaxHops => {
                        p.max_hops = parse_one(key, raw)?;
                        p.x = p.max_hops as f64;
                    }
                }
                Ok(p)
            })
            .collect()
    }
}

/// Reach of one source under one mode, sweep point and replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceRun {
    pub source: UserIx,
    pub mode: Mode,
    pub point: usize,
    pub replicate: u32,
    /// Reached interested nodes (source excluded) with first-reach hops, by node.
    pub reached: Vec<(UserIx, u32)>,
    pub denominator: usize,
}

impl SourceRun {
    pub fn irn_pct(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            100.0 * self.reached.len() as f64 / self.denominator as f64
        }
    }

    /// Cumulative IRN% counting nodes reached within `hop` hops.
    pub fn irn_pct_within(&self, hop: u32) -> f64 {
        if self.denominator == 0 {
            return 0.0;
        }
        let n = self.reached.iter().filter(|(_, h)| *h <= hop).count();
        100.0 * n as f64 / self.denominator as f64
    }

    pub fn mean_hops(&self) -> Option<f64> {
        if self.reached.is_empty() {
            return None;
        }
        Some(self.reached.iter().map(|&(_, h)| h as f64).sum::<f64>() / self.reached.len() as f64)
    }

    pub fn reached_set(&self) -> BTreeSet<UserIx> {
        self.reached.iter().map(|&(v, _)| v).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GiantRecord {
    pub mode: Mode,
    pub point: usize,
    pub replicate: u32,
    pub pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub campaign: String,
    pub interest: MacroId,
    pub sweep_var: SweepVar,
    pub points: Vec<SweepPoint>,
    pub user_names: Vec<String>,
    /// Ordered by (point, mode, replicate, source).
    pub runs: Vec<SourceRun>,
    pub giant: Vec<GiantRecord>,
}

/// Reach of `source` for `interest` in `mode`. `cior_edges` are the C-IOR
/// relationships established in this replicate.
pub fn run_source(
    scenario: &Scenario,
    source: UserIx,
    interest: MacroId,
    mode: Mode,
    cior_edges: &[CiorEdge],
    auth: &AuthorizationMap,
    max_hops: u32,
) -> Result<SourceRun> {
    let interested = scenario.interested(interest);
    let contacts;
    let layers = match mode {
        Mode::Friendships => Layers::friends_only(&scenario.users),
        Mode::EnhancedSiot { kinds } => {
            contacts = siot_contacts(&scenario.siot, kinds, interest, cior_edges);
            Layers {
                friends: scenario.users.adjacency(),
                siot: Some(&contacts),
            }
        }
    };
    let r = community_of(source, interest, layers, &interested, auth, max_hops).map_err(|e| match e {
        Error::SourceLacksInterest { interest, .. } => Error::SourceLacksInterest {
            source_user: scenario.users.name(source).to_string(),
            interest,
        },
        other => other,
    })?;
    Ok(SourceRun {
        source,
        mode,
        point: 0,
        replicate: 0,
        reached: r.hop_count.into_iter().collect(),
        denominator: interested.iter().filter(|&&b| b).count().saturating_sub(1),
    })
}

/// C-IOR edges a replicate establishes for one sweep point and kind set.
pub fn cior_round_edges(
    scenario: &Scenario,
    interested: &[bool],
    kinds: KindSet,
    point: &SweepPoint,
    auth: &AuthorizationMap,
    config: &ExperimentConfig,
) -> Vec<CiorEdge> {
    let base = kinds.without(RelationshipKind::Cior);
    if !kinds.contains(RelationshipKind::Cior) || base.is_empty() {
        return Vec::new();
    }
    let view = SiotView::new(&scenario.siot, base, None).expect("non-empty kinds");
    let sources: Vec<UserIx> = (0..scenario.n_users()).filter(|&u| interested[u]).collect();
    let params = ProtocolParams {
        ttl: point.ttl,
        sim_threshold: config.sim_threshold,
        origin: config.origin_device,
        interest: config.interest,
    };
    establish_cior_edges(&sources, &scenario.siot, &view, &scenario.vuips, auth, &params)
}

fn policy_key(p: &AuthorizationPolicy) -> Vec<u64> {
    p.auth_prob_per_hop.iter().map(|x| x.to_bits()).collect()
}

struct ReplicateOutput {
    runs: Vec<SourceRun>,
    giant: Vec<GiantRecord>,
}

pub fn run_campaign(config: &ExperimentConfig, scenario: &Scenario) -> Result<ExperimentResult> {
    config.validate()?;
    scenario.validate()?;
    let interest = config.interest;
    let interested = scenario.interested(interest);
    let isolated = scenario.isolated_mask();
    let counted: Vec<bool> = interested
        .iter()
        .zip(&isolated)
        .map(|(&i, &iso)| i && (config.include_isolated || !iso))
        .collect();
    let mut sources: Vec<UserIx> = (0..scenario.n_users()).filter(|&u| counted[u]).collect();
    if sources.is_empty() {
        return Err(Error::NoEligibleSources(interest));
    }
    let denominator = sources.len() - 1;
    if config.max_sources > 0 && config.max_sources < sources.len() {
        sources.shuffle(&mut keyed_rng(config.seed, &[TAG_SOURCES]));
        sources.truncate(config.max_sources);
        sources.sort_unstable();
    }
    let points = config.points()?;
    let friend_edges = scenario.users.edges();

    let outputs: Vec<ReplicateOutput> = (0..config.replicates)
        .into_par_iter()
        .map(|replicate| {
            let draws = Arc::new(couple_randomness(
                config.seed,
                replicate,
                scenario.n_users(),
                scenario.n_devices(),
            ));
            let mut scratch = ReachScratch::default();
            let mut friend_cache: HashMap<(Vec<u64>, u32), Vec<Vec<(UserIx, u32)>>> = HashMap::new();
            let mut out = ReplicateOutput {
                runs: Vec::new(),
                giant: Vec::new(),
            };
            for (pi, point) in points.iter().enumerate() {
                let auth = AuthorizationMap::new(draws.clone(), point.policy.clone());
                for spec in &config.modes {
                    let mode = spec.resolve(point.kinds);
                    let (reached, giant) = match mode {
                        Mode::Friendships => {
                            let key = (policy_key(&point.policy), point.max_hops);
                            let reached = friend_cache
                                .entry(key)
                                .or_insert_with(|| {
                                    let layers = Layers::friends_only(&scenario.users);
                                    sources
                                        .iter()
                                        .map(|&s| {
                                            collect_interested(
                                                discover(s, layers, &interested, &auth, point.max_hops, true, &mut scratch),
                                                &interested,
                                            )
                                        })
                                        .collect()
                                })
                                .clone();
                            let giant = giant_component_pct(&counted, friend_edges.iter().copied());
                            (reached, giant)
                        }
                        Mode::EnhancedSiot { kinds } => {
                            let cior = cior_round_edges(scenario, &interested, kinds, point, &auth, config);
                            let contacts = siot_contacts(&scenario.siot, kinds, interest, &cior);
                            let layers = Layers {
                                friends: scenario.users.adjacency(),
                                siot: Some(&contacts),
                            };
                            let reached = sources
                                .iter()
                                .map(|&s| {
                                    collect_interested(
                                        discover(s, layers, &interested, &auth, point.max_hops, true, &mut scratch),
                                        &interested,
                                    )
                                })
                                .collect();
                            let siot_edges = contacts
                                .iter()
                                .enumerate()
                                .flat_map(|(a, l)| l.iter().map(move |&b| (a, b)));
                            let giant = giant_component_pct(
                                &counted,
                                friend_edges.iter().copied().chain(siot_edges),
                            );
                            (reached, giant)
                        }
                    };
                    for (&source, reached) in sources.iter().zip(reached) {
                        out.runs.push(SourceRun {
                            source,
                            mode,
                            point: pi,
                            replicate,
                            reached,
                            denominator,
                        });
                    }
                    out.giant.push(GiantRecord {
                        mode,
                        point: pi,
                        replicate,
                        pct: giant.expect("sources imply a non-empty node set"),
                    });
                }
            }
            out
        })
        .collect();

    let mode_rank: HashMap<ModeSpec, usize> = config.modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
    let rank = |point: usize, mode: Mode| {
        let spec = config
            .modes
            .iter()
            .find(|s| s.resolve(points[point].kinds) == mode)
            .expect("mode comes from config");
        mode_rank[spec]
    };
    let mut runs: Vec<SourceRun> = Vec::new();
    let mut giant: Vec<GiantRecord> = Vec::new();
    for o in outputs {
        runs.extend(o.runs);
        giant.extend(o.giant);
    }
    runs.sort_by_key(|r| (r.point, rank(r.point, r.mode), r.replicate, r.source));
    giant.sort_by_key(|g| (g.point, rank(g.point, g.mode), g.replicate));
    Ok(ExperimentResult {
        campaign: config.campaign.clone(),
        interest,
        sweep_var: config.sweep_var,
        points,
        user_names: scenario.users.names().to_vec(),
        runs,
        giant,
    })
}

fn collect_interested(visited: Vec<(UserIx, u32)>, interested: &[bool]) -> Vec<(UserIx, u32)> {
    let mut v: Vec<_> = visited.into_iter().filter(|(u, _)| interested[*u]).collect();
    v.sort_unstable();
    v
}

pub const RESULT_HEADER: [&str; 12] = [
    "campaign",
    "interest",
    "mode",
    "kinds",
    "sweep_var",
    "sweep_value",
    "replicate",
    "source",
    "reached",
    "denominator",
    "irn_pct",
    "mean_hops",
];

impl ExperimentResult {
    pub fn write_runs_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(RESULT_HEADER).map_err(|e| Error::csv(path, e))?;
        for r in &self.runs {
            w.write_record([
                self.campaign.clone(),
                self.interest.to_string(),
                r.mode.label().to_string(),
                r.mode.kinds().label(),
                self.sweep_var.as_str().to_string(),
                self.points[r.point].label.clone(),
                r.replicate.to_string(),
                self.user_names[r.source].clone(),
                r.reached.len().to_string(),
                r.denominator.to_string(),
                crate::metrics::fmt_sig(r.irn_pct()),
                r.mean_hops().map(crate::metrics::fmt_sig).unwrap_or_default(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `mode,kinds,sweep_value,replicate,source,hop,count`: reached nodes per
    /// first-reach hop, so hop curves can be rebuilt from files.
    pub fn write_hops_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["mode", "kinds", "sweep_value", "replicate", "source", "hop", "count"])
            .map_err(|e| Error::csv(path, e))?;
        for r in &self.runs {
            let mut per_hop: BTreeMap<u32, usize> = BTreeMap::new();
            for &(_, h) in &r.reached {
                *per_hop.entry(h).or_default() += 1;
            }
            for (h, n) in per_hop {
                w.write_record([
                    r.mode.label().to_string(),
                    r.mode.kinds().label(),
                    self.points[r.point].label.clone(),
                    r.replicate.to_string(),
                    self.user_names[r.source].clone(),
                    h.to_string(),
                    n.to_string(),
                ])
                .map_err(|e| Error::csv(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `mode,kinds,sweep_value,replicate,giant_pct`.
    pub fn write_giant_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["mode", "kinds", "sweep_value", "replicate", "giant_pct"])
            .map_err(|e| Error::csv(path, e))?;
        for g in &self.giant {
            w.write_record([
                g.mode.label().to_string(),
                g.mode.kinds().label(),
                self.points[g.point].label.clone(),
                g.replicate.to_string(),
                crate::metrics::fmt_sig(g.pct),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn runs_for(&self, mode: Mode, point: usize) -> impl Iterator<Item = &SourceRun> + Clone {
        self.runs
            .iter()
            .filter(move |r| r.mode == mode && r.point == point)
    }
}

fn sweep_x(var: SweepVar, label: &str, index: usize) -> f64 {
    match var {
        SweepVar::Spread | SweepVar::Auth | SweepVar::Ttl | SweepVar::MaxHops => label
            .split(['/', ','])
            .next()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(index as f64),
        SweepVar::None | SweepVar::Kinds => index as f64,
    }
}

fn parse_mode(label: &str, kinds: &str) -> Option<Mode> {
    match label {
        "friendships" => Some(Mode::Friendships),
        "enhanced_siot" => Some(Mode::EnhancedSiot {
            kinds: kinds.parse().ok()?,
        }),
        _ => None,
    }
}

impl ExperimentResult {
    /// Rebuilds a result from `results.csv` and `hops.csv` exports, plus
    /// `giant.csv` when given. Node identities are not exported, so reached
    /// nodes get placeholder indices; hop counts and sizes are exact.
    /// Sweep points keep only their label and x value.
    pub fn from_csv(results: &Path, hops: &Path, giant: Option<&Path>) -> Result<Self> {
        type Key = (String, String, String, u32, String);
        let mut per_hop: HashMap<Key, Vec<(u32, usize)>> = HashMap::new();
        let mut rd = csv::Reader::from_path(hops).map_err(|e| Error::csv(hops, e))?;
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(hops, e))?;
            let bad = || Error::parse(hops, i + 2, "malformed hop row");
            if rec.len() != 7 {
                return Err(bad());
            }
            let key = (
                rec[0].to_string(),
                rec[1].to_string(),
                rec[2].to_string(),
                rec[3].parse().map_err(|_| bad())?,
                rec[4].to_string(),
            );
            per_hop
                .entry(key)
                .or_default()
                .push((rec[5].parse().map_err(|_| bad())?, rec[6].parse().map_err(|_| bad())?));
        }

        let mut out = ExperimentResult {
            campaign: String::new(),
            interest: 0,
            sweep_var: SweepVar::None,
            points: Vec::new(),
            user_names: Vec::new(),
            runs: Vec::new(),
            giant: Vec::new(),
        };
        let mut point_ix: HashMap<String, usize> = HashMap::new();
        let mut user_ix: HashMap<String, usize> = HashMap::new();
        let template = SweepPoint {
            label: String::new(),
            x: 0.0,
            policy: AuthorizationPolicy::uniform(1.0, 1.0)?,
            kinds: KindSet::all(),
            ttl: crate::protocol::DEFAULT_TTL,
            max_hops: crate::human::DEFAULT_MAX_HOPS_INTEREST_STUDY,
        };
        let mut rd = csv::Reader::from_path(results).map_err(|e| Error::csv(results, e))?;
        for (i, rec) in rd.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(results, e))?;
            let line = i + 2;
            let bad = |m: &str| Error::parse(results, line, m);
            if rec.len() != RESULT_HEADER.len() {
                return Err(bad("wrong field count"));
            }
            out.campaign = rec[0].to_string();
            out.interest = rec[1].parse().map_err(|_| bad("bad interest"))?;
            out.sweep_var = rec[4].parse().map_err(|_| bad("bad sweep_var"))?;
            let mode = parse_mode(&rec[2], &rec[3]).ok_or_else(|| bad("bad mode"))?;
            let n_points = out.points.len();
            let point = *point_ix.entry(rec[5].to_string()).or_insert(n_points);
            if point == n_points {
                out.points.push(SweepPoint {
                    label: rec[5].to_string(),
                    x: sweep_x(out.sweep_var, &rec[5], point),
                    ..template.clone()
                });
            }
            let n_users = out.user_names.len();
            let source = *user_ix.entry(rec[7].to_string()).or_insert(n_users);
            if source == n_users {
                out.user_names.push(rec[7].to_string());
            }
            let replicate: u32 = rec[6].parse().map_err(|_| bad("bad replicate"))?;
            let reached_n: usize = rec[8].parse().map_err(|_| bad("bad reached"))?;
            let key = (rec[2].to_string(), rec[3].to_string(), rec[5].to_string(), replicate, rec[7].to_string());
            let mut reached = Vec::with_capacity(reached_n);
            for (h, n) in per_hop.remove(&key).unwrap_or_default() {
                let start = reached.len();
                reached.extend((start..start + n).map(|v| (v, h)));
            }
            if reached.len() != reached_n {
                return Err(bad("hop counts do not add up to the reached count"));
            }
            reached.sort_unstable();
            out.runs.push(SourceRun {
                source,
                mode,
                point,
                replicate,
                reached,
                denominator: rec[9].parse().map_err(|_| bad("bad denominator"))?,
            });
        }
        if let Some(gpath) = giant {
            let mut rd = csv::Reader::from_path(gpath).map_err(|e| Error::csv(gpath, e))?;
            for (i, rec) in rd.records().enumerate() {
                let rec = rec.map_err(|e| Error::csv(gpath, e))?;
                let bad = || Error::parse(gpath, i + 2, "malformed giant row");
                if rec.len() != 5 {
                    return Err(bad());
                }
                let Some(&point) = point_ix.get(&rec[2]) else {
                    return Err(bad());
                };
                out.giant.push(GiantRecord {
                    mode: parse_mode(&rec[0], &rec[1]).ok_or_else(bad)?,
                    point,
                    replicate: rec[3].parse().map_err(|_| bad())?,
                    pct: rec[4].parse().map_err(|_| bad())?,
                });
            }
        }
        Ok(out)
    }
}

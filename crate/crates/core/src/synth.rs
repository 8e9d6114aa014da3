//! Synthetic community scenarios for desk-scale experiments.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::experiment::Scenario;
use crate::human::FriendshipGraph;
use crate::interest::{InterestDescriptor, MacroId};
use crate::rng::{keyed_rng, TAG_SYNTH};
use crate::siot::{fixed_of, mobile_of, Device, DeviceKind, RelationshipKind, SiotGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenarioSpec {
    pub communities: usize,
    pub nodes_per_community: usize,
    /// Probability of each extra intra-community friendship.
    pub intra_friend_prob: f64,
    /// Connect each community with a friendship ring first.
    pub ring: bool,
    /// Probability of an SIoT edge between mobile devices of two members of
    /// the same community; the kind cycles through POR, C-LOR, SOR.
    pub intra_siot_prob: f64,
    /// Exact number of cross-community device edges per kind.
    pub cross_edges: BTreeMap<RelationshipKind, usize>,
    /// OOR edge between each user's two devices.
    pub ownership_edges: bool,
    pub interest: MacroId,
    /// Probability that a user holds `interest`.
    pub interest_fraction: f64,
    /// Held in addition by interested users with `secondary_prob`.
    pub secondary_interest: MacroId,
    pub secondary_prob: f64,
    pub seed: u64,
}

impl Default for SyntheticScenarioSpec {
    fn default() -> Self {
        SyntheticScenarioSpec {
            communities: 2,
            nodes_per_community: 10,
            intra_friend_prob: 0.2,
            ring: true,
            intra_siot_prob: 0.0,
            cross_edges: BTreeMap::new(),
            ownership_edges: true,
            interest: 3,
            interest_fraction: 1.0,
            secondary_interest: 6,
            secondary_prob: 0.0,
            seed: 0,
        }
    }
}

fn prob(key: &str, v: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be in [0,1], got {v}")))
    }
}

impl SyntheticScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        prob("intra_friend_prob", self.intra_friend_prob)?;
        prob("intra_siot_prob", self.intra_siot_prob)?;
        prob("interest_fraction", self.interest_fraction)?;
        prob("secondary_prob", self.secondary_prob)?;
        if self.cross_edges.contains_key(&RelationshipKind::Oor) {
            return Err(Error::Config("OOR edges cannot cross communities".into()));
        }
        let cross: usize = self.cross_edges.values().sum();
        if cross > 0 && self.communities < 2 {
            return Err(Error::Config("cross-community edges need at least two communities".into()));
        }
        let n = self.communities * self.nodes_per_community;
        let possible = 2 * n * 2 * n / 2;
        if cross > possible {
            return Err(Error::Config(format!("{cross} cross edges requested, at most {possible} fit")));
        }
        Ok(())
    }

    /// Parses `key = value` lines; cross-edge counts use keys `cross_por`,
    /// `cross_clor`, `cross_sor`, `cross_cior`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = SyntheticScenarioSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", idx + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || Error::Config(format!("{k}: cannot parse `{v}`"));
            let num = |_: ()| v.parse::<f64>().map_err(|_| bad());
            let int = |_: ()| v.parse::<usize>().map_err(|_| bad());
            let flag = |_: ()| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(bad()),
            };
            match k {
                "communities" => s.communities = int(())?,
                "nodes_per_community" => s.nodes_per_community = int(())?,
                "intra_friend_prob" => s.intra_friend_prob = num(())?,
                "ring" => s.ring = flag(())?,
                "intra_siot_prob" => s.intra_siot_prob = num(())?,
                "ownership_edges" => s.ownership_edges = flag(())?,
                "interest" => s.interest = v.parse().map_err(|_| bad())?,
                "interest_fraction" => s.interest_fraction = num(())?,
                "secondary_interest" => s.secondary_interest = v.parse().map_err(|_| bad())?,
                "secondary_prob" => s.secondary_prob = num(())?,
                "seed" => s.seed = v.parse().map_err(|_| bad())?,
                "cross_por" | "cross_clor" | "cross_sor" | "cross_cior" => {
                    let kind = match k {
                        "cross_por" => RelationshipKind::Por,
                        "cross_clor" => RelationshipKind::Clor,
                        "cross_sor" => RelationshipKind::Sor,
                        _ => RelationshipKind::Cior,
                    };
                    let n = int(())?;
                    if n > 0 {
                        s.cross_edges.insert(kind, n);
                    } else {
                        s.cross_edges.remove(&kind);
                    }
                }
                other => return Err(Error::UnknownConfigKey(other.to_string())),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn community_of(&self, user: usize) -> usize {
        user / self.nodes_per_community.max(1)
    }
}

pub fn generate(spec: &SyntheticScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let (c, k) = (spec.communities, spec.nodes_per_community);
    let n = c * k;
    let names: Vec<String> = (0..n).map(|u| format!("c{:02}n{:04}", u / k, u % k)).collect();
    let mut users = FriendshipGraph::new(names);

    let mut rng = keyed_rng(spec.seed, &[TAG_SYNTH, 0]);
    for ci in 0..c {
        let base = ci * k;
        if spec.ring && k > 1 {
            for i in 0..k {
                users.add_edge(base + i, base + (i + 1) % k);
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if rng.gen::<f64>() < spec.intra_friend_prob {
                    users.add_edge(base + i, base + j);
                }
            }
        }
    }
    let users = users.finish();

    let devices: Vec<Device> = (0..2 * n)
        .map(|d| Device {
            id: d,
            owner: d / 2,
            kind: if d % 2 == 0 { DeviceKind::Mobile } else { DeviceKind::Fixed },
            model: "synthetic".into(),
            location: None,
        })
        .collect();
    let mut siot = SiotGraph::new(devices, n);
    if spec.ownership_edges {
        for u in 0..n {
            siot.add_edge(mobile_of(u), fixed_of(u), RelationshipKind::Oor);
        }
    }
    let intra_kinds = [RelationshipKind::Por, RelationshipKind::Clor, RelationshipKind::Sor];
    let mut rng = keyed_rng(spec.seed, &[TAG_SYNTH, 1]);
    let mut next = 0;
    for ci in 0..c {
        let base = ci * k;
        for i in 0..k {
            for j in i + 1..k {
                if rng.gen::<f64>() < spec.intra_siot_prob {
                    siot.add_edge(mobile_of(base + i), mobile_of(base + j), intra_kinds[next % 3]);
                    next += 1;
                }
            }
        }
    }

    let mut rng = keyed_rng(spec.seed, &[TAG_SYNTH, 2]);
    let vuips: Vec<InterestDescriptor> = (0..n)
        .map(|u| {
            let mut held = BTreeSet::new();
            if rng.gen::<f64>() < spec.interest_fraction {
                held.insert(spec.interest);
                if rng.gen::<f64>() < spec.secondary_prob {
                    held.insert(spec.secondary_interest);
                }
            }
            InterestDescriptor::from_held(Some(users.name(u).to_string()), held)
        })
        .collect();

    let mut rng = keyed_rng(spec.seed, &[TAG_SYNTH, 3]);
    let mut used: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (&kind, &count) in &spec.cross_edges {
        let mut placed = 0;
        let mut attempts = 0usize;
        while placed < count {
            attempts += 1;
            if attempts > 1000 * (count + 10) {
                return Err(Error::Config(format!("cannot place {count} cross {kind} edges")));
            }
            let a = rng.gen_range(0..2 * n);
            let b = rng.gen_range(0..2 * n);
            if spec.community_of(a / 2) == spec.community_of(b / 2) {
                continue;
            }
            let key = (a.min(b), a.max(b));
            if !used.insert(key) {
                continue;
            }
            if kind == RelationshipKind::Cior {
                let shared: BTreeSet<MacroId> = vuips[a / 2].held.intersection(&vuips[b / 2].held).copied().collect();
                let interests = if shared.is_empty() {
                    BTreeSet::from([spec.interest])
                } else {
                    shared
                };
                siot.add_cior(key.0, key.1, &interests);
            } else {
                siot.add_edge(key.0, key.1, kind);
            }
            placed += 1;
        }
    }

    let s = Scenario { users, vuips, siot };
    s.validate()?;
    Ok(s)
}

/// Number of device edges joining different communities.
pub fn cross_community_edges(spec: &SyntheticScenarioSpec, scenario: &Scenario) -> usize {
    scenario
        .siot
        .edges()
        .keys()
        .filter(|&&(a, b)| {
            spec.community_of(scenario.siot.owner_of(a)) != spec.community_of(scenario.siot.owner_of(b))
        })
        .count()
}

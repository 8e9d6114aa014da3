//! Fixture generators and brute-force oracles shared by integration tests.
//! The oracles deliberately avoid the library's traversal code: they work
//! from raw edge lists and iterate to a fixed point.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::path::Path;

use mediator_core::experiment::Scenario;
use mediator_core::siot::{fixed_of, mobile_of, Device, DeviceKind, KindSet, RelationshipKind, SiotGraph};
use mediator_core::{FriendshipGraph, InterestDescriptor, MacroId};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const INTEREST: MacroId = 3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability at a 1-based hop; hop 0 uses the first entry and hops past
/// the end reuse the last.
pub fn prob_at(list: &[f64], hop: u32) -> f64 {
    let i = if hop == 0 { 0 } else { hop as usize - 1 };
    list[i.min(list.len() - 1)]
}

/// Non-increasing probability vector of 1..=4 entries.
pub fn random_probs(r: &mut ChaCha8Rng) -> Vec<f64> {
    let len = r.gen_range(1..=4);
    let mut v: Vec<f64> = (0..len)
        .map(|_| if r.gen_bool(0.25) { 1.0 } else { r.gen::<f64>() })
        .collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn random_kinds(r: &mut ChaCha8Rng) -> KindSet {
    RelationshipKind::ALL.into_iter().filter(|_| r.gen_bool(0.6)).collect()
}

/// Random held set over macros 3..=7 with `INTEREST` held w.p. `p_interest`.
pub fn random_held(r: &mut ChaCha8Rng, p_interest: f64) -> BTreeSet<MacroId> {
    let mut held: BTreeSet<MacroId> = (4..=7).filter(|_| r.gen_bool(0.3)).collect();
    if r.gen_bool(p_interest) {
        held.insert(INTEREST);
    }
    held
}

/// Unstructured scenario: G(n, p) friendships, random typed device edges
/// (C-IOR ones carry random interests), random descriptors.
pub fn random_scenario(r: &mut ChaCha8Rng, max_users: usize) -> Scenario {
    let n = r.gen_range(1..=max_users);
    let names: Vec<String> = (0..n).map(|u| format!("u{u:03}")).collect();
    let mut users = FriendshipGraph::new(names.iter().cloned());
    let p_friend = r.gen_range(0.0..(4.0 / n as f64).min(1.0));
    for a in 0..n {
        for b in a + 1..n {
            if r.gen_bool(p_friend) {
                users.add_edge(a, b);
            }
        }
    }
    let users = users.finish();
    let devices: Vec<Device> = (0..2 * n)
        .map(|d| Device {
            id: d,
            owner: d / 2,
            kind: if d % 2 == 0 { DeviceKind::Mobile } else { DeviceKind::Fixed },
            model: "m".into(),
            location: None,
        })
        .collect();
    let mut siot = SiotGraph::new(devices, n);
    let n_dev_edges = r.gen_range(0..=3 * n);
    for _ in 0..n_dev_edges {
        let a = r.gen_range(0..2 * n);
        let b = r.gen_range(0..2 * n);
        if a == b {
            continue;
        }
        let kind = *RelationshipKind::ALL.choose(r).unwrap();
        if kind == RelationshipKind::Cior {
            let interests: BTreeSet<MacroId> = [INTEREST, 4, 5].into_iter().filter(|_| r.gen_bool(0.5)).collect();
            siot.add_cior(a, b, &interests);
        } else {
            siot.add_edge(a, b, kind);
        }
    }
    if r.gen_bool(0.5) {
        for u in 0..n {
            siot.add_edge(mobile_of(u), fixed_of(u), RelationshipKind::Oor);
        }
    }
    let p_interest = r.gen_range(0.2..=1.0);
    let vuips = names
        .iter()
        .map(|nm| InterestDescriptor::from_held(Some(nm.clone()), random_held(r, p_interest)))
        .collect();
    Scenario { users, vuips, siot }
}

/// Exact cosine gate on binary sets: `|A∩B| / sqrt(|A||B|) >= 1/2`
/// iff `4|A∩B|^2 >= |A||B|`, with empty sets never passing.
pub fn gate_oracle(own: &BTreeSet<MacroId>, payload: &BTreeSet<MacroId>, interest: MacroId) -> bool {
    if own.is_empty() || payload.is_empty() || !own.contains(&interest) {
        return false;
    }
    let i = own.intersection(payload).count();
    4 * i * i >= own.len() * payload.len()
}

fn edge_has(kinds: KindSet, edge_kinds: KindSet, cior_interests: &BTreeSet<MacroId>, interest: Option<MacroId>) -> bool {
    for k in edge_kinds.iter() {
        if !kinds.contains(k) {
            continue;
        }
        if k != RelationshipKind::Cior {
            return true;
        }
        match interest {
            None => return true,
            Some(i) if cior_interests.is_empty() || cior_interests.contains(&i) => return true,
            _ => {}
        }
    }
    false
}

/// Device adjacency over `kinds` (no interest scoping), as an edge list.
pub fn device_edges(siot: &SiotGraph, kinds: KindSet) -> Vec<(usize, usize)> {
    siot.edges()
        .iter()
        .filter(|(_, e)| edge_has(kinds, e.kinds, &e.cior_interests, None))
        .map(|(&k, _)| k)
        .collect()
}

/// Level-by-level flood oracle: the set of devices a token from `origin`
/// reaches, with hops. Device at hop `h >= 1` relays iff `h < ttl` and its
/// forward draw is below the hop-`h` spread probability.
pub fn flood_oracle(
    n_devices: usize,
    edges: &[(usize, usize)],
    origin: usize,
    forward_draw: &[f64],
    spread: &[f64],
    ttl: u32,
) -> BTreeMap<usize, u32> {
    let mut hop: BTreeMap<usize, u32> = BTreeMap::new();
    hop.insert(origin, 0);
    let mut level: BTreeSet<usize> = BTreeSet::from([origin]);
    for h in 0..ttl {
        let senders: BTreeSet<usize> = level
            .iter()
            .copied()
            .filter(|&d| h == 0 || forward_draw[d] < prob_at(spread, h))
            .collect();
        let mut next = BTreeSet::new();
        for &(a, b) in edges {
            for (u, v) in [(a, b), (b, a)] {
                if senders.contains(&u) && !hop.contains_key(&v) {
                    next.insert(v);
                }
            }
        }
        for &v in &next {
            hop.insert(v, h + 1);
        }
        if next.is_empty() {
            break;
        }
        level = next;
    }
    let _ = n_devices;
    hop.remove(&origin);
    hop
}

/// C-IOR edges (source device, requester device) of one round, computed
/// by flooding from every interested user's mobile device.
#[allow(clippy::too_many_arguments)]
pub fn cior_oracle(
    s: &Scenario,
    base_kinds: KindSet,
    forward_draw: &[f64],
    spread: &[f64],
    ttl: u32,
    interest: MacroId,
) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    if base_kinds.is_empty() {
        return out;
    }
    let edges = device_edges(&s.siot, base_kinds);
    for u in 0..s.n_users() {
        if !s.vuips[u].held.contains(&interest) {
            continue;
        }
        let origin = mobile_of(u);
        for (d, _) in flood_oracle(s.n_devices(), &edges, origin, forward_draw, spread, ttl) {
            let o = d / 2;
            if o != u && gate_oracle(&s.vuips[o].held, &s.vuips[u].held, interest) {
                out.insert((origin, d));
            }
        }
    }
    out
}

/// Owner-level SIoT contact pairs for `interest` over `kinds`, plus the
/// given C-IOR device pairs when C-IOR is selected.
pub fn contacts_oracle(
    s: &Scenario,
    kinds: KindSet,
    interest: MacroId,
    cior: &BTreeSet<(usize, usize)>,
) -> Vec<(usize, usize)> {
    let mut pairs = BTreeSet::new();
    for (&(a, b), e) in s.siot.edges() {
        if edge_has(kinds, e.kinds, &e.cior_interests, Some(interest)) && a / 2 != b / 2 {
            pairs.insert((a / 2, b / 2));
        }
    }
    if kinds.contains(RelationshipKind::Cior) {
        for &(a, b) in cior {
            if a / 2 != b / 2 {
                pairs.insert((a / 2, b / 2));
            }
        }
    }
    pairs.into_iter().collect()
}

/// Fixed-point (Bellman-Ford style) reach oracle. Relaxes every edge until
/// nothing changes; a node at distance `d < max_hops` passes friendships on
/// if it is the source, interested, or authorizes at `d`; SIoT contacts are
/// used only by the source or interested nodes and only towards interested
/// nodes. Returns interested reached nodes (source excluded) with hops.
#[allow(clippy::too_many_arguments)]
pub fn reach_oracle(
    n: usize,
    friend_edges: &[(usize, usize)],
    siot_pairs: &[(usize, usize)],
    interested: &[bool],
    auth_draw: &[f64],
    auth: &[f64],
    source: usize,
    max_hops: u32,
) -> BTreeMap<usize, u32> {
    const INF: u32 = u32::MAX;
    let mut dist = vec![INF; n];
    dist[source] = 0;
    loop {
        let mut changed = false;
        for &(a, b) in friend_edges {
            for (u, v) in [(a, b), (b, a)] {
                let d = dist[u];
                if d == INF || d >= max_hops {
                    continue;
                }
                let expands = u == source || interested[u] || auth_draw[u] < prob_at(auth, d);
                if expands && d + 1 < dist[v] {
                    dist[v] = d + 1;
                    changed = true;
                }
            }
        }
        for &(a, b) in siot_pairs {
            for (u, v) in [(a, b), (b, a)] {
                let d = dist[u];
                if d == INF || d >= max_hops {
                    continue;
                }
                if (u == source || interested[u]) && interested[v] && d + 1 < dist[v] {
                    dist[v] = d + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    (0..n)
        .filter(|&v| v != source && interested[v] && dist[v] != INF)
        .map(|v| (v, dist[v]))
        .collect()
}

/// Largest BFS component of the graph induced on `members`, in percent.
pub fn giant_oracle(members: &[bool], edges: &[(usize, usize)]) -> f64 {
    let n = members.len();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        if members[a] && members[b] {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut best = 0usize;
    for s in 0..n {
        if !members[s] || seen[s] {
            continue;
        }
        seen[s] = true;
        let mut q = VecDeque::from([s]);
        let mut size = 0;
        while let Some(u) = q.pop_front() {
            size += 1;
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    q.push_back(v);
                }
            }
        }
        best = best.max(size);
    }
    let total = members.iter().filter(|&&m| m).count();
    100.0 * best as f64 / total as f64
}

/// Writes a small Brightkite-style trace set into `dir`: check-ins around
/// a few venues, a friendship list, a PoI catalog and macro categories.
pub fn write_trace_fixture(dir: &Path, seed: u64, users: usize) {
    let mut r = rng(seed);
    let venues: Vec<(f64, f64, &str)> = vec![
        (39.7392, -104.9903, "Coffee"),
        (39.7420, -104.9850, "Pizza"),
        (39.7300, -104.9950, "Donut"),
        (39.7500, -104.9800, "Wine"),
        (39.7350, -105.0000, "Gym"),
    ];
    let mut poi = std::fs::File::create(dir.join("poi.csv")).unwrap();
    writeln!(poi, "poi_id,lat,lon,keyword").unwrap();
    for (i, (lat, lon, kw)) in venues.iter().enumerate() {
        writeln!(poi, "p{i},{lat},{lon},{kw}").unwrap();
    }
    std::fs::write(
        dir.join("macros.csv"),
        "macro_id,name,keyword\n3,Sweet Food,Donut\n3,Sweet Food,Ice Cream\n4,Italian Food,Pizza\n4,Italian Food,Wine\n6,Cafe Bar,Coffee\n6,Cafe Bar,Donut\n",
    )
    .unwrap();
    let mut ck = std::fs::File::create(dir.join("checkins.txt")).unwrap();
    let base = 1_230_768_000i64; // 2009-01-01
    for u in 0..users {
        let favourite = r.gen_range(0..venues.len());
        for k in 0..40 {
            let (lat, lon, _) = if r.gen_bool(0.6) { venues[favourite] } else { *venues.choose(&mut r).unwrap() };
            // spread visits over days; most land in shared evening slots
            let day = r.gen_range(0..20i64);
            let ts = base + day * 86_400 + 18 * 3600 + r.gen_range(0..1200);
            let (dlat, dlon) = (0.0005 * (r.gen::<f64>() - 0.5), 0.0005 * (r.gen::<f64>() - 0.5));
            let place = format!("place{}", (favourite * 7 + k) % 15);
            let t = chrono::DateTime::from_timestamp(ts, 0).unwrap().format("%Y-%m-%dT%H:%M:%SZ");
            writeln!(ck, "user{u}\t{t}\t{:.6}\t{:.6}\t{place}", lat + dlat, lon + dlon).unwrap();
        }
    }
    let mut fr = std::fs::File::create(dir.join("friends.txt")).unwrap();
    for a in 0..users {
        for b in a + 1..users {
            if r.gen_bool(0.15) {
                writeln!(fr, "user{a}\tuser{b}").unwrap();
            }
        }
    }
}

//! Friendship layer: contacts-of-contacts discovery under per-hop
//! authorizations, interested-node relaunch, and giant components.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::experiment::{couple_randomness, DecisionDraws};
use crate::interest::{has_interest, InterestDescriptor, MacroId};

pub type UserIx = usize;

pub const DEFAULT_MAX_HOPS_AUTH_SWEEP: u32 = 4;
pub const DEFAULT_MAX_HOPS_INTEREST_STUDY: u32 = 6;

/// Undirected friendship graph over interned user ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FriendshipGraph {
    names: Vec<String>,
    index: HashMap<String, UserIx>,
    adj: Vec<Vec<UserIx>>,
}

impl FriendshipGraph {
    pub fn new<I, S>(users: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut g = FriendshipGraph::default();
        for u in users {
            g.add_user(u);
        }
        g
    }

    pub fn add_user(&mut self, name: impl Into<String>) -> UserIx {
        let name = name.into();
        if let Some(&ix) = self.index.get(&name) {
            return ix;
        }
        let ix = self.names.len();
        self.index.insert(name.clone(), ix);
        self.names.push(name);
        self.adj.push(Vec::new());
        ix
    }

    /// Adds the edge unless it is a self-loop or already present.
    pub fn add_edge(&mut self, a: UserIx, b: UserIx) -> bool {
        if a == b || self.adj[a].contains(&b) {
            return false;
        }
        self.adj[a].push(b);
        self.adj[b].push(a);
        true
    }

    pub fn add_named_edge(&mut self, a: &str, b: &str) -> bool {
        let a = self.add_user(a);
        let b = self.add_user(b);
        self.add_edge(a, b)
    }

    /// Sorts every adjacency list so traversal order is canonical.
    pub fn finish(mut self) -> Self {
        for list in &mut self.adj {
            list.sort_unstable();
        }
        self
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, ix: UserIx) -> &str {
        &self.names[ix]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<UserIx> {
        self.index.get(name).copied()
    }

    pub fn neighbors(&self, ix: UserIx) -> &[UserIx] {
        &self.adj[ix]
    }

    pub fn adjacency(&self) -> &[Vec<UserIx>] {
        &self.adj
    }

    /// Canonical `(a < b)` edges in ascending order.
    pub fn edges(&self) -> Vec<(UserIx, UserIx)> {
        let mut out: Vec<_> = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, list)| list.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect();
        out.sort_unstable();
        out
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }
}

/// Per-hop cooperation probabilities. Index 0 is hop 1; hops past the end
/// reuse the last entry. Both lists must be non-increasing in hop.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthorizationPolicy {
    pub auth_prob_per_hop: Vec<f64>,
    pub spread_prob_per_hop: Vec<f64>,
}

impl AuthorizationPolicy {
    pub fn new(auth_prob_per_hop: Vec<f64>, spread_prob_per_hop: Vec<f64>) -> Result<Self> {
        let p = AuthorizationPolicy {
            auth_prob_per_hop,
            spread_prob_per_hop,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn uniform(auth: f64, spread: f64) -> Result<Self> {
        Self::new(vec![auth], vec![spread])
    }

    pub fn validate(&self) -> Result<()> {
        for (name, list) in [
            ("auth_prob_per_hop", &self.auth_prob_per_hop),
            ("spread_prob_per_hop", &self.spread_prob_per_hop),
        ] {
            if list.is_empty() {
                return Err(Error::InvalidPolicy(format!("{name} is empty")));
            }
            if let Some(p) = list.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidPolicy(format!("{name} has {p} outside [0,1]")));
            }
            if list.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::InvalidPolicy(format!(
                    "{name} must not increase with hop"
                )));
            }
        }
        Ok(())
    }

    fn at(list: &[f64], hop: u32) -> f64 {
        let i = (hop.max(1) as usize - 1).min(list.len() - 1);
        list[i]
    }

    pub fn auth_at(&self, hop: u32) -> f64 {
        Self::at(&self.auth_prob_per_hop, hop)
    }

    pub fn spread_at(&self, hop: u32) -> f64 {
        Self::at(&self.spread_prob_per_hop, hop)
    }
}

/// A replicate's cooperation decisions. A node cooperates at hop `k` iff
/// its replicate draw is below the hop-`k` probability, so the decision is
/// fixed once the hop of first reach is known.
#[derive(Debug, Clone)]
pub struct AuthorizationMap {
    draws: Arc<DecisionDraws>,
    policy: AuthorizationPolicy,
}

impl AuthorizationMap {
    pub fn new(draws: Arc<DecisionDraws>, policy: AuthorizationPolicy) -> Self {
        AuthorizationMap { draws, policy }
    }

    pub fn policy(&self) -> &AuthorizationPolicy {
        &self.policy
    }

    pub fn draws(&self) -> &Arc<DecisionDraws> {
        &self.draws
    }

    /// Whether `user`, first reached at `hop`, lets the source read its contacts.
    pub fn authorizes(&self, user: UserIx, hop: u32) -> bool {
        self.draws.auth[user] < self.policy.auth_at(hop)
    }

    /// Whether `device`, first reached at `hop`, forwards a descriptor.
    pub fn forwards(&self, device: usize, hop: u32) -> bool {
        self.draws.forward[device] < self.policy.spread_at(hop)
    }
}

/// Draws decisions for every user (and `n_devices` devices) of one replicate.
pub fn sample_decisions(
    graph: &FriendshipGraph,
    n_devices: usize,
    policy: &AuthorizationPolicy,
    seed: u64,
    replicate: u32,
) -> Result<AuthorizationMap> {
    policy.validate()?;
    let draws = couple_randomness(seed, replicate, graph.len(), n_devices);
    Ok(AuthorizationMap::new(Arc::new(draws), policy.clone()))
}

/// `V(I)` as a membership mask aligned with user indices.
pub fn interested_mask(descriptors: &[InterestDescriptor], interest: MacroId) -> Vec<bool> {
    descriptors.iter().map(|d| has_interest(d, interest)).collect()
}

/// Graph layers a discovery may traverse.
#[derive(Debug, Clone, Copy)]
pub struct Layers<'a> {
    pub friends: &'a [Vec<UserIx>],
    /// Owner-level SIoT contact lists; only interested targets are followed.
    pub siot: Option<&'a [Vec<UserIx>]>,
}

impl<'a> Layers<'a> {
    pub fn friends_only(graph: &'a FriendshipGraph) -> Self {
        Layers {
            friends: graph.adjacency(),
            siot: None,
        }
    }
}

/// Reusable BFS buffers.
#[derive(Debug, Default)]
pub struct ReachScratch {
    hop: Vec<u32>,
    queue: VecDeque<UserIx>,
}

const UNSEEN: u32 = u32::MAX;

/// Breadth-first discovery from `source`.
///
/// A node at hop `h < max_hops` scans its friends if it is the source, if it
/// authorizes at `h`, or (with `relaunch`) if it is interested. SIoT contact
/// lists are local to the device, so only the source and relaunching nodes
/// use them, and only interested contacts are returned by them.
///
/// Returns every visited node except the source, with its first-reach hop,
/// in visiting order.
pub fn discover(
    source: UserIx,
    layers: Layers<'_>,
    interested: &[bool],
    auth: &AuthorizationMap,
    max_hops: u32,
    relaunch: bool,
    scratch: &mut ReachScratch,
) -> Vec<(UserIx, u32)> {
    let n = layers.friends.len();
    scratch.hop.clear();
    scratch.hop.resize(n, UNSEEN);
    scratch.queue.clear();
    scratch.hop[source] = 0;
    scratch.queue.push_back(source);
    let mut out = Vec::new();
    while let Some(u) = scratch.queue.pop_front() {
        let h = scratch.hop[u];
        if h >= max_hops {
            continue;
        }
        let acts_as_source = h == 0 || (relaunch && interested[u]);
        if acts_as_source || auth.authorizes(u, h) {
            for &v in &layers.friends[u] {
                if scratch.hop[v] == UNSEEN {
                    scratch.hop[v] = h + 1;
                    scratch.queue.push_back(v);
                    out.push((v, h + 1));
                }
            }
        }
        if acts_as_source {
            if let Some(siot) = layers.siot {
                for &v in &siot[u] {
                    if interested[v] && scratch.hop[v] == UNSEEN {
                        scratch.hop[v] = h + 1;
                        scratch.queue.push_back(v);
                        out.push((v, h + 1));
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectDiscovery {
    pub nodes: BTreeSet<UserIx>,
    pub hops: BTreeMap<UserIx, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityResult {
    pub source: UserIx,
    pub interest: MacroId,
    pub direct: BTreeSet<UserIx>,
    pub indirect: BTreeSet<UserIx>,
    /// `direct ∪ indirect ∪ {source}`.
    pub community: BTreeSet<UserIx>,
    /// First-reach hop of every member except the source.
    pub hop_count: BTreeMap<UserIx, u32>,
}

impl ReachabilityResult {
    /// Reached interested nodes, source excluded.
    pub fn reached(&self) -> impl Iterator<Item = UserIx> + '_ {
        self.hop_count.keys().copied()
    }
}

fn check_source(source: UserIx, n: usize) -> Result<()> {
    if source >= n {
        return Err(Error::UnknownNode(source));
    }
    Ok(())
}

/// D-IRC: interested nodes reachable purely through authorization chains.
pub fn discover_direct(
    source: UserIx,
    layers: Layers<'_>,
    interested: &[bool],
    auth: &AuthorizationMap,
    max_hops: u32,
) -> Result<DirectDiscovery> {
    check_source(source, layers.friends.len())?;
    let mut scratch = ReachScratch::default();
    let visited = discover(source, layers, interested, auth, max_hops, false, &mut scratch);
    let hops: BTreeMap<_, _> = visited.into_iter().filter(|(v, _)| interested[*v]).collect();
    Ok(DirectDiscovery {
        nodes: hops.keys().copied().collect(),
        hops,
    })
}

/// I-IRC: interested nodes only reachable once reached interested nodes
/// relaunch the search as sources.
pub fn discover_indirect(
    source: UserIx,
    layers: Layers<'_>,
    interested: &[bool],
    auth: &AuthorizationMap,
    max_hops: u32,
) -> Result<BTreeSet<UserIx>> {
    let direct = discover_direct(source, layers, interested, auth, max_hops)?;
    let mut scratch = ReachScratch::default();
    Ok(discover(source, layers, interested, auth, max_hops, true, &mut scratch)
        .into_iter()
        .filter(|(v, _)| interested[*v] && !direct.nodes.contains(v))
        .map(|(v, _)| v)
        .collect())
}

/// Full interest community of `source`.
pub fn community_of(
    source: UserIx,
    interest: MacroId,
    layers: Layers<'_>,
    interested: &[bool],
    auth: &AuthorizationMap,
    max_hops: u32,
) -> Result<ReachabilityResult> {
    check_source(source, layers.friends.len())?;
    if !interested[source] {
        return Err(Error::SourceLacksInterest {
            source_user: source.to_string(),
            interest,
        });
    }
    let direct = discover_direct(source, layers, interested, auth, max_hops)?;
    let mut scratch = ReachScratch::default();
    let hop_count: BTreeMap<UserIx, u32> =
        discover(source, layers, interested, auth, max_hops, true, &mut scratch)
            .into_iter()
            .filter(|(v, _)| interested[*v])
            .collect();
    let indirect = hop_count
        .keys()
        .filter(|v| !direct.nodes.contains(v))
        .copied()
        .collect();
    let mut community: BTreeSet<UserIx> = hop_count.keys().copied().collect();
    community.insert(source);
    Ok(ReachabilityResult {
        source,
        interest,
        direct: direct.nodes,
        indirect,
        community,
        hop_count,
    })
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Percentage of `V(I)` in the largest connected component of the graph
/// induced on `V(I)` by `edges`.
pub fn giant_component_pct<I>(interested: &[bool], edges: I) -> Result<f64>
where
    I: IntoIterator<Item = (UserIx, UserIx)>,
{
    let members = interested.iter().filter(|&&b| b).count();
    if members == 0 {
        return Err(Error::EmptyNodeSet);
    }
    let mut uf = UnionFind::new(interested.len());
    for (a, b) in edges {
        if interested[a] && interested[b] {
            uf.union(a, b);
        }
    }
    let largest = (0..interested.len())
        .filter(|&v| interested[v])
        .map(|v| uf.component_size(v))
        .max()
        .unwrap_or(0);
    Ok(100.0 * largest as f64 / members as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::DecisionDraws;

    fn graph(n: usize, edges: &[(usize, usize)]) -> FriendshipGraph {
        let mut g = FriendshipGraph::new((0..n).map(|i| format!("u{i}")));
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g.finish()
    }

    fn auth_all(n: usize, p: f64) -> AuthorizationMap {
        AuthorizationMap::new(
            Arc::new(DecisionDraws {
                auth: vec![0.5; n],
                forward: vec![0.5; 2 * n],
            }),
            AuthorizationPolicy::uniform(p, p).unwrap(),
        )
    }

    #[test]
    fn policy_validation() {
        assert!(AuthorizationPolicy::new(vec![], vec![1.0]).is_err());
        assert!(AuthorizationPolicy::new(vec![1.2], vec![1.0]).is_err());
        assert!(AuthorizationPolicy::new(vec![0.5, 0.6], vec![1.0]).is_err());
        let p = AuthorizationPolicy::new(vec![1.0, 0.8, 0.5], vec![1.0]).unwrap();
        assert_eq!(p.auth_at(1), 1.0);
        assert_eq!(p.auth_at(3), 0.5);
        assert_eq!(p.auth_at(9), 0.5);
    }

    #[test]
    fn degenerate_policies() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let all = sample_decisions(&g, 6, &AuthorizationPolicy::uniform(1.0, 1.0).unwrap(), 1, 0)
            .unwrap();
        assert!((0..3).all(|u| all.authorizes(u, 1) && all.authorizes(u, 5)));
        assert!((0..6).all(|d| all.forwards(d, 1)));
        let none = sample_decisions(&g, 6, &AuthorizationPolicy::uniform(0.0, 0.0).unwrap(), 1, 0)
            .unwrap();
        assert!((0..3).all(|u| !none.authorizes(u, 1)));
        let interested = vec![true; 3];
        let d = discover_direct(0, Layers::friends_only(&g), &interested, &none, 6).unwrap();
        assert_eq!(d.nodes, BTreeSet::from([1]));
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = graph(20, &[]);
        let p = AuthorizationPolicy::uniform(0.5, 0.5).unwrap();
        let a = sample_decisions(&g, 40, &p, 9, 3).unwrap();
        let b = sample_decisions(&g, 40, &p, 9, 3).unwrap();
        assert_eq!(a.draws().auth, b.draws().auth);
        assert_eq!(a.draws().forward, b.draws().forward);
        let c = sample_decisions(&g, 40, &p, 9, 4).unwrap();
        assert_ne!(a.draws().auth, c.draws().auth);
    }

    #[test]
    fn single_interested_friend() {
        let g = graph(2, &[(0, 1)]);
        let d = discover_direct(0, Layers::friends_only(&g), &[true, true], &auth_all(2, 1.0), 4)
            .unwrap();
        assert_eq!(d.nodes, BTreeSet::from([1]));
        assert_eq!(d.hops[&1], 1);
    }

    #[test]
    fn blocked_by_non_authorizing_intermediary() {
        // 0 - 1 - 2 with 1 uninterested and refusing
        let g = graph(3, &[(0, 1), (1, 2)]);
        let interested = [true, false, true];
        let auth = auth_all(3, 0.0);
        let d = discover_direct(0, Layers::friends_only(&g), &interested, &auth, 4).unwrap();
        assert!(d.nodes.is_empty());
        let c = community_of(0, 3, Layers::friends_only(&g), &interested, &auth, 4).unwrap();
        assert_eq!(c.community, BTreeSet::from([0]));
    }

    #[test]
    fn empty_neighbourhood() {
        let g = graph(3, &[(1, 2)]);
        let d = discover_direct(0, Layers::friends_only(&g), &[true; 3], &auth_all(3, 1.0), 4)
            .unwrap();
        assert!(d.nodes.is_empty());
    }

    #[test]
    fn unknown_source() {
        let g = graph(2, &[]);
        assert!(matches!(
            discover_direct(7, Layers::friends_only(&g), &[true; 2], &auth_all(2, 1.0), 4),
            Err(Error::UnknownNode(7))
        ));
    }

    #[test]
    fn relaunch_reaches_past_refusing_interested_node() {
        // S - A - B, A interested but authorizes nothing
        let g = graph(3, &[(0, 1), (1, 2)]);
        let auth = auth_all(3, 0.0);
        let l = Layers::friends_only(&g);
        let ind = discover_indirect(0, l, &[true; 3], &auth, 4).unwrap();
        assert_eq!(ind, BTreeSet::from([2]));
        let c = community_of(0, 3, l, &[true; 3], &auth, 4).unwrap();
        assert_eq!(c.direct, BTreeSet::from([1]));
        assert_eq!(c.indirect, BTreeSet::from([2]));
        assert_eq!(c.hop_count[&2], 2);
    }

    #[test]
    fn full_authorization_subsumes_indirect() {
        let g = graph(4, &[(0, 1), (1, 2), (2, 3)]);
        let ind = discover_indirect(0, Layers::friends_only(&g), &[true; 4], &auth_all(4, 1.0), 6)
            .unwrap();
        assert!(ind.is_empty());
    }

    #[test]
    fn disconnected_interested_node_unreached() {
        let g = graph(4, &[(0, 1), (2, 3)]);
        let c = community_of(0, 3, Layers::friends_only(&g), &[true; 4], &auth_all(4, 1.0), 6)
            .unwrap();
        assert!(!c.community.contains(&2) && !c.community.contains(&3));
    }

    #[test]
    fn clique_and_singleton() {
        let edges: Vec<_> = (0..5).flat_map(|a| (a + 1..5).map(move |b| (a, b))).collect();
        let g = graph(5, &edges);
        let c = community_of(2, 3, Layers::friends_only(&g), &[true; 5], &auth_all(5, 1.0), 4)
            .unwrap();
        assert_eq!(c.community, (0..5).collect());
        let lone = graph(1, &[]);
        let c = community_of(0, 3, Layers::friends_only(&lone), &[true], &auth_all(1, 1.0), 4)
            .unwrap();
        assert_eq!(c.community, BTreeSet::from([0]));
    }

    #[test]
    fn two_component_layout() {
        // community A: 0-1-2, community B: 3-4, no link between them
        let g = graph(5, &[(0, 1), (1, 2), (3, 4)]);
        let c = community_of(0, 3, Layers::friends_only(&g), &[true; 5], &auth_all(5, 1.0), 6)
            .unwrap();
        assert_eq!(c.community, BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn source_without_interest() {
        let g = graph(2, &[(0, 1)]);
        assert!(matches!(
            community_of(0, 3, Layers::friends_only(&g), &[false, true], &auth_all(2, 1.0), 4),
            Err(Error::SourceLacksInterest { .. })
        ));
    }

    #[test]
    fn max_hops_bounds_discovery() {
        let g = graph(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]);
        let c = community_of(0, 3, Layers::friends_only(&g), &[true; 6], &auth_all(6, 1.0), 4)
            .unwrap();
        assert_eq!(c.community, (0..5).collect());
        assert!(c.hop_count.values().all(|&h| (1..=4).contains(&h)));
    }

    #[test]
    fn non_interested_nodes_can_authorize() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let d = discover_direct(0, Layers::friends_only(&g), &[true, false, true], &auth_all(3, 1.0), 4)
            .unwrap();
        assert_eq!(d.nodes, BTreeSet::from([2]));
    }

    #[test]
    fn giant_component_cases() {
        assert_eq!(giant_component_pct(&[true; 4], []).unwrap(), 25.0);
        assert_eq!(
            giant_component_pct(&[true; 4], [(0, 1), (1, 2), (2, 3)]).unwrap(),
            100.0
        );
        // components {0..5}, {5,6,7}, {8,9}
        let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (8, 9)];
        assert_eq!(giant_component_pct(&[true; 10], edges).unwrap(), 50.0);
        assert!(matches!(
            giant_component_pct(&[false; 3], [(0, 1)]),
            Err(Error::EmptyNodeSet)
        ));
        // edges through non-members do not connect members
        assert_eq!(
            giant_component_pct(&[true, false, true], [(0, 1), (1, 2)]).unwrap(),
            50.0
        );
    }
}

//! Device layer: one mobile and one fixed device per user, typed SIoT
//! relationships, and kind-filtered views.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geo::{haversine_m, lat_gap_m, GeoPoint};
use crate::human::{FriendshipGraph, UserIx};
use crate::interest::MacroId;
use crate::rng::{keyed_rng, TAG_DEVICE_MODEL};
use crate::trace::CoLocation;

pub const DEFAULT_CLOR_RADIUS_M: f64 = 250.0;
pub const DEFAULT_SOR_MEET_THRESHOLD: usize = 3;
pub const DEFAULT_MODEL_COUNT: usize = 10;

pub type DeviceIx = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeviceKind {
    Mobile,
    Fixed,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Mobile => "mobile",
            DeviceKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub id: DeviceIx,
    pub owner: UserIx,
    pub kind: DeviceKind,
    pub model: String,
    /// Fixed devices sit at the owner's home-point; mobile ones have none.
    pub location: Option<GeoPoint>,
}

/// Mobile device of user `u`.
pub fn mobile_of(u: UserIx) -> DeviceIx {
    2 * u
}

/// Fixed device of user `u`.
pub fn fixed_of(u: UserIx) -> DeviceIx {
    2 * u + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationshipKind {
    Por,
    Clor,
    Oor,
    Sor,
    Cior,
}

impl RelationshipKind {
    pub const ALL: [RelationshipKind; 5] = [
        RelationshipKind::Por,
        RelationshipKind::Clor,
        RelationshipKind::Oor,
        RelationshipKind::Sor,
        RelationshipKind::Cior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationshipKind::Por => "POR",
            RelationshipKind::Clor => "C-LOR",
            RelationshipKind::Oor => "OOR",
            RelationshipKind::Sor => "SOR",
            RelationshipKind::Cior => "C-IOR",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn into_set(self) -> KindSet {
        KindSet::EMPTY.with(self)
    }
}

impl fmt::Display for RelationshipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationshipKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', '_'], "");
        match norm.as_str() {
            "POR" => Ok(RelationshipKind::Por),
            "CLOR" => Ok(RelationshipKind::Clor),
            "OOR" => Ok(RelationshipKind::Oor),
            "SOR" => Ok(RelationshipKind::Sor),
            "CIOR" => Ok(RelationshipKind::Cior),
            _ => Err(Error::Config(format!("unknown relationship kind `{s}`"))),
        }
    }
}

/// Small set of relationship kinds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KindSet(u8);

impl KindSet {
    pub const EMPTY: KindSet = KindSet(0);

    /// Every kind the trace rules create, plus C-IOR.
    pub fn all() -> Self {
        RelationshipKind::ALL.into_iter().collect()
    }

    pub fn trace_kinds() -> Self {
        Self::all().without(RelationshipKind::Cior)
    }

    pub fn contains(self, k: RelationshipKind) -> bool {
        self.0 & k.bit() != 0
    }

    pub fn with(self, k: RelationshipKind) -> Self {
        KindSet(self.0 | k.bit())
    }

    pub fn without(self, k: RelationshipKind) -> Self {
        KindSet(self.0 & !k.bit())
    }

    pub fn intersects(self, other: KindSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset(self, other: KindSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = RelationshipKind> {
        RelationshipKind::ALL
            .into_iter()
            .filter(move |k| self.contains(*k))
    }

    pub fn label(self) -> String {
        if self.is_empty() {
            return "-".to_string();
        }
        self.iter().map(|k| k.as_str()).collect::<Vec<_>>().join("+")
    }
}

impl FromIterator<RelationshipKind> for KindSet {
    fn from_iter<I: IntoIterator<Item = RelationshipKind>>(iter: I) -> Self {
        iter.into_iter().fold(KindSet::EMPTY, KindSet::with)
    }
}

impl FromStr for KindSet {
    type Err = Error;

    /// Parses `POR+SOR`, `POR|SOR` or `all`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(KindSet::all());
        }
        if s == "-" || s.is_empty() {
            return Ok(KindSet::EMPTY);
        }
        s.split(['+', '|'])
            .map(str::parse::<RelationshipKind>)
            .collect()
    }
}

impl fmt::Display for KindSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SiotEdge {
    pub kinds: KindSet,
    /// Interests a C-IOR edge was established for.
    pub cior_interests: BTreeSet<MacroId>,
}

/// Models with ownership probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCatalog {
    models: Vec<(String, f64)>,
}

impl ModelCatalog {
    pub fn new(models: Vec<(String, f64)>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidCatalog("no models".into()));
        }
        if models.iter().any(|(_, p)| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidCatalog("probability outside [0,1]".into()));
        }
        let total: f64 = models.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidCatalog(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(ModelCatalog { models })
    }

    pub fn uniform(count: usize) -> Self {
        let p = 1.0 / count as f64;
        ModelCatalog {
            models: (0..count).map(|i| (format!("model-{i}"), p)).collect(),
        }
    }

    /// Reads `model_id,probability`.
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::csv(path, e))?;
        let mut models = Vec::new();
        for (idx, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            if idx == 0 && rec.get(0) == Some("model_id") {
                continue;
            }
            let bad = || Error::parse(path, idx + 1, "expected model_id,probability");
            let id = rec.get(0).filter(|s| !s.is_empty()).ok_or_else(bad)?;
            let p = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            models.push((id.to_string(), p));
        }
        Self::new(models)
    }

    fn draw(&self, u: f64) -> &str {
        let mut acc = 0.0;
        for (m, p) in &self.models {
            acc += p;
            if u < acc {
                return m;
            }
        }
        &self.models.last().expect("non-empty catalog").0
    }
}

fn name_key(name: &str) -> u64 {
    // FNV-1a; keeps model draws tied to the user id, not its index
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Two devices per user; device `2u` is mobile and `2u + 1` fixed.
pub fn instantiate_devices(
    users: &FriendshipGraph,
    home_points: &BTreeMap<String, GeoPoint>,
    catalog: &ModelCatalog,
    seed: u64,
) -> Result<Vec<Device>> {
    let mut devices = Vec::with_capacity(users.len() * 2);
    for (u, name) in users.names().iter().enumerate() {
        let home = *home_points
            .get(name)
            .ok_or_else(|| Error::MissingHomePoint(name.clone()))?;
        for kind in [DeviceKind::Mobile, DeviceKind::Fixed] {
            let mut rng = keyed_rng(seed, &[TAG_DEVICE_MODEL, name_key(name), kind as u64]);
            devices.push(Device {
                id: devices.len(),
                owner: u,
                kind,
                model: catalog.draw(rng.gen()).to_string(),
                location: (kind == DeviceKind::Fixed).then_some(home),
            });
        }
    }
    Ok(devices)
}

fn canon(a: DeviceIx, b: DeviceIx) -> (DeviceIx, DeviceIx) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Every pair of devices sharing a model.
pub fn establish_por(devices: &[Device]) -> Vec<(DeviceIx, DeviceIx)> {
    let mut by_model: BTreeMap<&str, Vec<DeviceIx>> = BTreeMap::new();
    for d in devices {
        by_model.entry(&d.model).or_default().push(d.id);
    }
    let mut out = Vec::new();
    for ids in by_model.values() {
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                out.push(canon(a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Fixed devices whose locations are within `radius_m`.
pub fn establish_clor(devices: &[Device], radius_m: f64) -> Vec<(DeviceIx, DeviceIx)> {
    let mut fixed: Vec<(DeviceIx, GeoPoint)> = devices
        .iter()
        .filter(|d| d.kind == DeviceKind::Fixed)
        .filter_map(|d| d.location.map(|p| (d.id, p)))
        .collect();
    fixed.sort_by(|a, b| a.1.lat.total_cmp(&b.1.lat).then(a.0.cmp(&b.0)));
    let mut out = Vec::new();
    for (i, &(a, pa)) in fixed.iter().enumerate() {
        for &(b, pb) in &fixed[i + 1..] {
            if lat_gap_m(pa.lat, pb.lat) > radius_m + 1e-6 {
                break;
            }
            if haversine_m(pa, pb) <= radius_m {
                out.push(canon(a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Mobile and fixed device of the same owner.
pub fn establish_oor(devices: &[Device]) -> Vec<(DeviceIx, DeviceIx)> {
    let mut by_owner: BTreeMap<UserIx, Vec<DeviceIx>> = BTreeMap::new();
    for d in devices {
        by_owner.entry(d.owner).or_default().push(d.id);
    }
    let mut out = Vec::new();
    for ids in by_owner.values() {
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                out.push(canon(a, b));
            }
        }
    }
    out.sort_unstable();
    out
}

/// Mobile devices of user pairs with at least `meet_threshold` co-locations.
pub fn establish_sor(
    devices: &[Device],
    users: &FriendshipGraph,
    colocs: &[CoLocation],
    meet_threshold: usize,
) -> Vec<(DeviceIx, DeviceIx)> {
    let mobile: HashMap<UserIx, DeviceIx> = devices
        .iter()
        .filter(|d| d.kind == DeviceKind::Mobile)
        .map(|d| (d.owner, d.id))
        .collect();
    let mut meetings: BTreeMap<(UserIx, UserIx), usize> = BTreeMap::new();
    for c in colocs {
        let (Some(a), Some(b)) = (users.index_of(&c.user_a), users.index_of(&c.user_b)) else {
            continue;
        };
        *meetings.entry((a.min(b), a.max(b))).or_default() += 1;
    }
    let mut out: Vec<_> = meetings
        .into_iter()
        .filter(|(_, n)| *n >= meet_threshold)
        .filter_map(|((a, b), _)| Some(canon(*mobile.get(&a)?, *mobile.get(&b)?)))
        .collect();
    out.sort_unstable();
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiotGraph {
    devices: Vec<Device>,
    edges: BTreeMap<(DeviceIx, DeviceIx), SiotEdge>,
    by_owner: Vec<Vec<DeviceIx>>,
}

impl SiotGraph {
    pub fn new(devices: Vec<Device>, n_users: usize) -> Self {
        let mut by_owner = vec![Vec::new(); n_users];
        for d in &devices {
            if d.owner >= by_owner.len() {
                by_owner.resize(d.owner + 1, Vec::new());
            }
            by_owner[d.owner].push(d.id);
        }
        SiotGraph {
            devices,
            edges: BTreeMap::new(),
            by_owner,
        }
    }

    pub fn devices(&self) -> &[Device] {
        &self.devices
    }

    pub fn device(&self, d: DeviceIx) -> &Device {
        &self.devices[d]
    }

    pub fn owner_of(&self, d: DeviceIx) -> UserIx {
        self.devices[d].owner
    }

    pub fn devices_of(&self, u: UserIx) -> &[DeviceIx] {
        self.by_owner.get(u).map_or(&[], Vec::as_slice)
    }

    pub fn edges(&self) -> &BTreeMap<(DeviceIx, DeviceIx), SiotEdge> {
        &self.edges
    }

    pub fn add_edge(&mut self, a: DeviceIx, b: DeviceIx, kind: RelationshipKind) -> bool {
        if a == b {
            return false;
        }
        let e = self.edges.entry(canon(a, b)).or_default();
        e.kinds = e.kinds.with(kind);
        true
    }

    pub fn add_edges(&mut self, kind: RelationshipKind, pairs: &[(DeviceIx, DeviceIx)]) {
        for &(a, b) in pairs {
            self.add_edge(a, b, kind);
        }
    }

    pub fn add_cior(&mut self, a: DeviceIx, b: DeviceIx, interests: &BTreeSet<MacroId>) {
        if a == b {
            return;
        }
        let e = self.edges.entry(canon(a, b)).or_default();
        e.kinds = e.kinds.with(RelationshipKind::Cior);
        e.cior_interests.extend(interests.iter().copied());
    }

    /// Edge count per kind; a multi-kind edge counts once per kind.
    pub fn kind_counts(&self) -> BTreeMap<RelationshipKind, usize> {
        let mut out: BTreeMap<RelationshipKind, usize> =
            RelationshipKind::ALL.iter().map(|&k| (k, 0)).collect();
        for e in self.edges.values() {
            for k in e.kinds.iter() {
                *out.get_mut(&k).expect("all kinds present") += 1;
            }
        }
        out
    }

    /// Number of lines [`SiotGraph::write_edges`] produces.
    pub fn export_line_count(&self) -> usize {
        self.edges
            .values()
            .map(|e| {
                e.kinds.without(RelationshipKind::Cior).iter().count()
                    + if e.kinds.contains(RelationshipKind::Cior) {
                        e.cior_interests.len().max(1)
                    } else {
                        0
                    }
            })
            .sum()
    }

    /// `device_a,device_b,kind[,interest_id]`, one line per kind (and per
    /// interest for C-IOR).
    pub fn write_edges(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        for (&(a, b), e) in &self.edges {
            for k in e.kinds.iter() {
                if k == RelationshipKind::Cior && !e.cior_interests.is_empty() {
                    for i in &e.cior_interests {
                        writeln!(w, "{a},{b},{k},{i}").map_err(io)?;
                    }
                } else {
                    writeln!(w, "{a},{b},{k}").map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_edges(&mut self, path: &Path) -> Result<()> {
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: &str| Error::parse(path, idx + 1, m);
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 3 || fields.len() > 4 {
                return Err(bad("expected device_a,device_b,kind[,interest_id]"));
            }
            let a: DeviceIx = fields[0].parse().map_err(|_| bad("bad device id"))?;
            let b: DeviceIx = fields[1].parse().map_err(|_| bad("bad device id"))?;
            if a >= self.devices.len() || b >= self.devices.len() || a == b {
                return Err(bad("edge endpoint is not a known distinct device"));
            }
            let kind: RelationshipKind = fields[2].parse().map_err(|_| bad("bad kind"))?;
            match (kind, fields.get(3)) {
                (RelationshipKind::Cior, Some(i)) => {
                    let i: MacroId = i.parse().map_err(|_| bad("bad interest id"))?;
                    self.add_cior(a, b, &BTreeSet::from([i]));
                }
                (_, None) => {
                    self.add_edge(a, b, kind);
                }
                (_, Some(_)) => return Err(bad("interest id only allowed on C-IOR")),
            }
        }
        Ok(())
    }

    /// `device_id,owner,kind,model,lat,lon`.
    pub fn write_devices(&self, path: &Path, users: &FriendshipGraph) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
        w.write_record(["device_id", "owner", "kind", "model", "lat", "lon"])
            .map_err(|e| Error::csv(path, e))?;
        for d in &self.devices {
            let (lat, lon) = d
                .location
                .map_or((String::new(), String::new()), |p| (p.lat.to_string(), p.lon.to_string()));
            w.write_record([
                d.id.to_string(),
                users.name(d.owner).to_string(),
                d.kind.as_str().to_string(),
                d.model.clone(),
                lat,
                lon,
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a device table, interning owners into `users`.
    pub fn read_devices(path: &Path, users: &mut FriendshipGraph) -> Result<Vec<Device>> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
        let mut devices = Vec::new();
        for (idx, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::csv(path, e))?;
            let bad = || Error::parse(path, idx + 2, "malformed device row");
            let id: DeviceIx = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
            if id != devices.len() {
                return Err(Error::parse(path, idx + 2, "device ids must be dense and ordered"));
            }
            let owner = users.add_user(rec.get(1).ok_or_else(bad)?);
            let kind = match rec.get(2) {
                Some("mobile") => DeviceKind::Mobile,
                Some("fixed") => DeviceKind::Fixed,
                _ => return Err(bad()),
            };
            let location = match (rec.get(4), rec.get(5)) {
                (Some(la), Some(lo)) if !la.is_empty() && !lo.is_empty() => Some(
                    GeoPoint::new(
                        la.parse().map_err(|_| bad())?,
                        lo.parse().map_err(|_| bad())?,
                    )
                    .ok_or_else(bad)?,
                ),
                _ => None,
            };
            devices.push(Device {
                id,
                owner,
                kind,
                model: rec.get(3).unwrap_or_default().to_string(),
                location,
            });
        }
        Ok(devices)
    }
}

/// Adjacency restricted to edges carrying a selected kind. C-IOR edges are
/// kept only when C-IOR is selected and, if `cior_interest` is set, only
/// when established for that interest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiotView {
    kinds: KindSet,
    adj: Vec<Vec<DeviceIx>>,
}

impl SiotView {
    pub fn new(graph: &SiotGraph, kinds: KindSet, cior_interest: Option<MacroId>) -> Result<Self> {
        if kinds.is_empty() {
            return Err(Error::EmptyKindSelection);
        }
        let mut adj = vec![Vec::new(); graph.devices.len()];
        for (&(a, b), e) in &graph.edges {
            if edge_visible(e, kinds, cior_interest) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        Ok(SiotView { kinds, adj })
    }

    pub fn kinds(&self) -> KindSet {
        self.kinds
    }

    pub fn neighbors(&self, d: DeviceIx) -> &[DeviceIx] {
        &self.adj[d]
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    /// Canonical edge list of the view.
    pub fn edges(&self) -> Vec<(DeviceIx, DeviceIx)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, l)| l.iter().filter(move |&&b| a < b).map(move |&b| (a, b)))
            .collect()
    }
}

pub(crate) fn edge_visible(e: &SiotEdge, kinds: KindSet, cior_interest: Option<MacroId>) -> bool {
    let plain = e.kinds.without(RelationshipKind::Cior);
    if plain.intersects(kinds) {
        return true;
    }
    e.kinds.contains(RelationshipKind::Cior)
        && kinds.contains(RelationshipKind::Cior)
        && cior_interest.is_none_or(|i| e.cior_interests.is_empty() || e.cior_interests.contains(&i))
}

/// View exposing only edges with at least one kind in `kinds`.
pub fn select_kinds(graph: &SiotGraph, kinds: KindSet) -> Result<SiotView> {
    SiotView::new(graph, kinds, None)
}

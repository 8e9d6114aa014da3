//! File-to-file stages: traces to ingest artifacts, ingest artifacts to a
//! scenario directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::info;

use crate::error::{Error, Result};
use crate::experiment::Scenario;
use crate::geo::GeoPoint;
use crate::human::FriendshipGraph;
use crate::interest::{
    assign_colocation_interests, build_vuips, load_macro_categories, load_poi_catalog, read_vuips,
    unmatched_keywords, write_vuips, InterestDescriptor, MacroMap, DEFAULT_INTEREST_THRESHOLD, DEFAULT_POI_RADIUS_M,
};
use crate::siot::{
    establish_clor, establish_oor, establish_por, establish_sor, instantiate_devices, ModelCatalog,
    RelationshipKind, SiotGraph, DEFAULT_CLOR_RADIUS_M, DEFAULT_MODEL_COUNT, DEFAULT_SOR_MEET_THRESHOLD,
};
use crate::trace::{
    compute_home_points, detect_colocations, filter_active_users, parse_checkins, parse_friendships,
    read_colocations, read_home_points, write_checkins, write_colocations, write_friendships, write_home_points,
    CoLocation, ParseStats, TraceCorpus, TraceFormat, DEFAULT_COLOCATION_RADIUS_M, DEFAULT_COLOCATION_WINDOW_S,
    DEFAULT_HOME_CELL_DEG, DEFAULT_MIN_CHECKINS, DEFAULT_MIN_PLACES,
};

pub const CHECKINS_FILE: &str = "checkins.tsv";
pub const COLOCATIONS_FILE: &str = "colocations.csv";
pub const HOME_POINTS_FILE: &str = "home_points.csv";
pub const EDGE_STATS_FILE: &str = "edge_stats.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct IngestParams {
    pub min_checkins: usize,
    pub min_places: usize,
    pub radius_m: f64,
    pub window_s: i64,
    pub poi_radius_m: f64,
    pub interest_threshold: u32,
    pub cell_deg: f64,
}

impl Default for IngestParams {
    fn default() -> Self {
        IngestParams {
            min_checkins: DEFAULT_MIN_CHECKINS,
            min_places: DEFAULT_MIN_PLACES,
            radius_m: DEFAULT_COLOCATION_RADIUS_M,
            window_s: DEFAULT_COLOCATION_WINDOW_S,
            poi_radius_m: DEFAULT_POI_RADIUS_M,
            interest_threshold: DEFAULT_INTEREST_THRESHOLD,
            cell_deg: DEFAULT_HOME_CELL_DEG,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOutput {
    /// Active users only.
    pub corpus: TraceCorpus,
    pub checkin_stats: ParseStats,
    pub friendship_stats: ParseStats,
    pub colocations: Vec<CoLocation>,
    pub home_points: BTreeMap<String, GeoPoint>,
    /// One descriptor per active user, empty when nothing matched.
    pub vuips: BTreeMap<String, InterestDescriptor>,
    pub interest_matches: usize,
}

pub fn ingest(
    checkins: &Path,
    friendships: &Path,
    poi: &Path,
    macros: &Path,
    p: &IngestParams,
) -> Result<IngestOutput> {
    let (corpus, checkin_stats) = parse_checkins(checkins, TraceFormat::Brightkite)?;
    let (friends, friendship_stats) = parse_friendships(friendships)?;
    let corpus = filter_active_users(&corpus.with_friendships(friends), p.min_checkins, p.min_places);
    info!("{} active users", corpus.users.len());
    let catalog = load_poi_catalog(poi)?;
    let macros = MacroMap::new(&load_macro_categories(macros)?);
    let unmatched = unmatched_keywords(&catalog, &macros);
    if !unmatched.is_empty() {
        info!("{} PoI keywords map to no macro-category", unmatched.len());
    }
    let colocations = detect_colocations(&corpus, p.radius_m, p.window_s);
    let home_points = compute_home_points(&corpus, p.cell_deg);
    let assignments = assign_colocation_interests(&colocations, &catalog, &macros, p.poi_radius_m);
    let mut vuips = build_vuips(&colocations, &assignments, p.interest_threshold);
    for u in &corpus.users {
        vuips.entry(u.clone()).or_insert_with(|| InterestDescriptor {
            owner: Some(u.clone()),
            ..Default::default()
        });
    }
    Ok(IngestOutput {
        corpus,
        checkin_stats,
        friendship_stats,
        colocations,
        home_points,
        vuips,
        interest_matches: assignments.len(),
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

impl IngestOutput {
    /// Writes the filtered corpus, co-locations, home-points and descriptors.
    pub fn write(&self, dir: &Path) -> Result<()> {
        create_dir(dir)?;
        write_checkins(&dir.join(CHECKINS_FILE), &self.corpus.checkins)?;
        write_friendships(&dir.join(crate::experiment::FRIENDSHIPS_FILE), &self.corpus.friendships)?;
        write_colocations(&dir.join(COLOCATIONS_FILE), &self.colocations)?;
        write_home_points(&dir.join(HOME_POINTS_FILE), &self.home_points)?;
        write_vuips(&dir.join(crate::experiment::VUIPS_FILE), &self.vuips)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    pub models: ModelCatalog,
    pub clor_radius_m: f64,
    pub sor_threshold: usize,
    pub seed: u64,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            models: ModelCatalog::uniform(DEFAULT_MODEL_COUNT),
            clor_radius_m: DEFAULT_CLOR_RADIUS_M,
            sor_threshold: DEFAULT_SOR_MEET_THRESHOLD,
            seed: 0,
        }
    }
}

/// Users are those with a home-point; friendships to anyone else are dropped.
pub fn build_scenario(ingest_dir: &Path, p: &GraphParams) -> Result<Scenario> {
    let homes = read_home_points(&ingest_dir.join(HOME_POINTS_FILE))?;
    let mut users = FriendshipGraph::new(homes.keys().cloned());
    let (pairs, _) = parse_friendships(&ingest_dir.join(crate::experiment::FRIENDSHIPS_FILE))?;
    let mut skipped = 0;
    for (a, b) in &pairs {
        if users.index_of(a).is_some() && users.index_of(b).is_some() {
            users.add_named_edge(a, b);
        } else {
            skipped += 1;
        }
    }
    if skipped > 0 {
        info!("{skipped} friendships involve users without a home-point; skipped");
    }
    let users = users.finish();
    let devices = instantiate_devices(&users, &homes, &p.models, p.seed)?;
    let colocs = read_colocations(&ingest_dir.join(COLOCATIONS_FILE))?;
    let mut siot = SiotGraph::new(devices, users.len());
    siot.add_edges(RelationshipKind::Por, &establish_por(siot.devices()));
    siot.add_edges(RelationshipKind::Clor, &establish_clor(siot.devices(), p.clor_radius_m));
    siot.add_edges(RelationshipKind::Oor, &establish_oor(siot.devices()));
    siot.add_edges(
        RelationshipKind::Sor,
        &establish_sor(siot.devices(), &users, &colocs, p.sor_threshold),
    );
    let mut by_name = read_vuips(&ingest_dir.join(crate::experiment::VUIPS_FILE))?;
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
    let s = Scenario { users, vuips, siot };
    s.validate()?;
    Ok(s)
}

/// `kind,count` per relationship kind, then `total` (equal to the data
/// lines of the edge export) and `friendships`.
pub fn edge_stats(s: &Scenario) -> String {
    let counts = s.siot.kind_counts();
    let mut text = String::from("kind,count\n");
    for k in RelationshipKind::ALL {
        let _ = writeln!(text, "{},{}", k.as_str(), counts.get(&k).copied().unwrap_or(0));
    }
    let _ = writeln!(text, "total,{}", s.siot.export_line_count());
    let _ = writeln!(text, "friendships,{}", s.users.edge_count());
    text
}

/// Writes the scenario files plus the edge statistics.
pub fn write_scenario(s: &Scenario, dir: &Path) -> Result<()> {
    s.write(dir)?;
    let path = dir.join(EDGE_STATS_FILE);
    std::fs::write(&path, edge_stats(s)).map_err(|e| Error::io(&path, e))
}

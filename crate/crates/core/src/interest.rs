//! Points of interest, macro-categories and per-user interest descriptors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geo::{haversine_m, lat_gap_m, GeoPoint};
use crate::trace::CoLocation;

pub const DEFAULT_POI_RADIUS_M: f64 = 250.0;
pub const DEFAULT_INTEREST_THRESHOLD: u32 = 10;

pub type MacroId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct PoI {
    pub poi_id: String,
    pub location: GeoPoint,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacroCategory {
    pub id: MacroId,
    pub name: String,
    pub keywords: BTreeSet<String>,
}

/// Keyword to every macro-category listing it.
#[derive(Debug, Clone, Default)]
pub struct MacroMap {
    by_keyword: BTreeMap<String, BTreeSet<MacroId>>,
}

impl MacroMap {
    pub fn new(categories: &[MacroCategory]) -> Self {
        let mut by_keyword: BTreeMap<String, BTreeSet<MacroId>> = BTreeMap::new();
        for cat in categories {
            for kw in &cat.keywords {
                by_keyword.entry(kw.clone()).or_default().insert(cat.id);
            }
        }
        MacroMap { by_keyword }
    }

    pub fn macros_of(&self, keyword: &str) -> Option<&BTreeSet<MacroId>> {
        self.by_keyword.get(keyword)
    }
}

/// PoIs sorted by latitude so a radius query only scans a latitude band.
#[derive(Debug, Clone, Default)]
pub struct PoiCatalog {
    pois: Vec<PoI>,
}

impl PoiCatalog {
    pub fn new(mut pois: Vec<PoI>) -> Self {
        pois.sort_by(|a, b| {
            a.location
                .lat
                .total_cmp(&b.location.lat)
                .then_with(|| a.poi_id.cmp(&b.poi_id))
        });
        PoiCatalog { pois }
    }

    pub fn len(&self) -> usize {
        self.pois.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pois.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoI> {
        self.pois.iter()
    }

    /// Nearest PoI within `radius_m`; equal distances resolve to the smaller id.
    pub fn nearest_within(&self, at: GeoPoint, radius_m: f64) -> Option<(&PoI, f64)> {
        let band = radius_m / crate::geo::EARTH_RADIUS_M * 180.0 / std::f64::consts::PI;
        let lo = self
            .pois
            .partition_point(|p| p.location.lat < at.lat - band * (1.0 + 1e-9) - 1e-9);
        let mut best: Option<(&PoI, f64)> = None;
        for poi in &self.pois[lo..] {
            if poi.location.lat > at.lat && lat_gap_m(poi.location.lat, at.lat) > radius_m + 1e-6 {
                break;
            }
            let d = haversine_m(at, poi.location);
            if d > radius_m {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && poi.poi_id < b.poi_id),
            };
            if better {
                best = Some((poi, d));
            }
        }
        best
    }
}

fn skip_header(rec: &csv::StringRecord, first: &str) -> bool {
    rec.get(0).map(str::trim) == Some(first)
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))
}

/// Reads `poi_id,lat,lon,keyword`. Rows with invalid coordinates are skipped.
pub fn load_poi_catalog(path: &Path) -> Result<PoiCatalog> {
    let mut pois = Vec::new();
    for (idx, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if idx == 0 && skip_header(&rec, "poi_id") {
            continue;
        }
        let parsed = (|| {
            let id = rec.get(0).filter(|s| !s.is_empty())?;
            let lat = rec.get(1)?.parse().ok()?;
            let lon = rec.get(2)?.parse().ok()?;
            let keyword = rec.get(3).filter(|s| !s.is_empty())?;
            Some(PoI {
                poi_id: id.to_string(),
                location: GeoPoint::new(lat, lon)?,
                keyword: keyword.to_string(),
            })
        })();
        match parsed {
            Some(p) => pois.push(p),
            None => log::warn!("{}:{}: skipping invalid PoI", path.display(), idx + 1),
        }
    }
    Ok(PoiCatalog::new(pois))
}

/// Reads `macro_id,name,keyword`, one keyword per row.
pub fn load_macro_categories(path: &Path) -> Result<Vec<MacroCategory>> {
    let mut cats: BTreeMap<MacroId, MacroCategory> = BTreeMap::new();
    for (idx, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if idx == 0 && skip_header(&rec, "macro_id") {
            continue;
        }
        let bad = || Error::parse(path, idx + 1, "expected macro_id,name,keyword");
        let id: MacroId = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let name = rec.get(1).ok_or_else(bad)?;
        let keyword = rec.get(2).filter(|s| !s.is_empty()).ok_or_else(bad)?;
        let cat = cats.entry(id).or_insert_with(|| MacroCategory {
            id,
            name: name.to_string(),
            keywords: BTreeSet::new(),
        });
        if cat.name != name {
            return Err(Error::DuplicateMacro(id));
        }
        cat.keywords.insert(keyword.to_string());
    }
    Ok(cats.into_values().collect())
}

/// Keywords present in the catalog that no macro-category lists.
pub fn unmatched_keywords(catalog: &PoiCatalog, macros: &MacroMap) -> BTreeSet<String> {
    catalog
        .iter()
        .filter(|p| macros.macros_of(&p.keyword).is_none())
        .map(|p| p.keyword.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterestAssignment {
    /// Index into the co-location slice.
    pub colocation: usize,
    pub macros: BTreeSet<MacroId>,
    pub poi_id: String,
    pub match_distance_m: f64,
}

pub fn assign_colocation_interests(
    colocs: &[CoLocation],
    catalog: &PoiCatalog,
    macros: &MacroMap,
    poi_radius_m: f64,
) -> Vec<InterestAssignment> {
    colocs
        .iter()
        .enumerate()
        .filter_map(|(i, c)| {
            let (poi, d) = catalog.nearest_within(c.location, poi_radius_m)?;
            let ids = macros.macros_of(&poi.keyword)?;
            Some(InterestAssignment {
                colocation: i,
                macros: ids.clone(),
                poi_id: poi.poi_id.clone(),
                match_distance_m: d,
            })
        })
        .collect()
}

/// Interest descriptor: per-category meeting counts plus the held set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InterestDescriptor {
    pub owner: Option<String>,
    pub counts: BTreeMap<MacroId, u32>,
    pub held: BTreeSet<MacroId>,
}

impl InterestDescriptor {
    pub fn from_counts(owner: Option<String>, counts: BTreeMap<MacroId, u32>, threshold: u32) -> Self {
        let held = counts
            .iter()
            .filter(|(_, &n)| n >= threshold)
            .map(|(&id, _)| id)
            .collect();
        InterestDescriptor {
            owner,
            counts,
            held,
        }
    }

    /// Descriptor whose held set is given directly (count 1 each).
    pub fn from_held(owner: Option<String>, held: impl IntoIterator<Item = MacroId>) -> Self {
        let held: BTreeSet<MacroId> = held.into_iter().collect();
        InterestDescriptor {
            owner,
            counts: held.iter().map(|&id| (id, 1)).collect(),
            held,
        }
    }

    /// Copy with the owner removed, as carried in propagated tokens.
    pub fn anonymized(&self) -> Self {
        InterestDescriptor {
            owner: None,
            ..self.clone()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.held.is_empty()
    }
}

pub fn build_vuips(
    colocs: &[CoLocation],
    assignments: &[InterestAssignment],
    interest_threshold: u32,
) -> BTreeMap<String, InterestDescriptor> {
    let mut counts: BTreeMap<&str, BTreeMap<MacroId, u32>> = BTreeMap::new();
    for a in assignments {
        let c = &colocs[a.colocation];
        for user in [&c.user_a, &c.user_b] {
            let per = counts.entry(user).or_default();
            for &m in &a.macros {
                *per.entry(m).or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|(u, c)| {
            (
                u.to_string(),
                InterestDescriptor::from_counts(Some(u.to_string()), c, interest_threshold),
            )
        })
        .collect()
}

/// Cosine of the binary held-category vectors; 0 when either is empty.
pub fn cosine_similarity(a: &InterestDescriptor, b: &InterestDescriptor) -> f64 {
    if a.held.is_empty() || b.held.is_empty() {
        return 0.0;
    }
    let shared = a.held.intersection(&b.held).count() as f64;
    shared / ((a.held.len() as f64).sqrt() * (b.held.len() as f64).sqrt())
}

pub fn has_interest(d: &InterestDescriptor, macro_id: MacroId) -> bool {
    d.held.contains(&macro_id)
}

pub const VUIP_HEADER: [&str; 4] = ["owner", "macro_id", "count", "held"];

pub fn write_vuips(path: &Path, vuips: &BTreeMap<String, InterestDescriptor>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(VUIP_HEADER).map_err(|e| Error::csv(path, e))?;
    for (owner, d) in vuips {
        for (id, n) in &d.counts {
            w.write_record([
                owner.clone(),
                id.to_string(),
                n.to_string(),
                u8::from(d.held.contains(id)).to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_vuips(path: &Path) -> Result<BTreeMap<String, InterestDescriptor>> {
    let mut out: BTreeMap<String, InterestDescriptor> = BTreeMap::new();
    for (idx, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if idx == 0 && skip_header(&rec, "owner") {
            continue;
        }
        let bad = || Error::parse(path, idx + 1, "expected owner,macro_id,count,held");
        let owner = rec.get(0).filter(|s| !s.is_empty()).ok_or_else(bad)?;
        let id: MacroId = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let count: u32 = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let held = match rec.get(3) {
            Some("1") | Some("true") => true,
            Some("0") | Some("false") => false,
            _ => return Err(bad()),
        };
        let d = out.entry(owner.to_string()).or_insert_with(|| InterestDescriptor {
            owner: Some(owner.to_string()),
            ..Default::default()
        });
        d.counts.insert(id, count);
        if held {
            d.held.insert(id);
        }
    }
    Ok(out)
}

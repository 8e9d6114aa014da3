//! Check-in traces: parsing, activity filtering, co-location detection and
//! home-point estimation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geo::{haversine_m, lat_gap_m, GeoPoint};

pub const DEFAULT_MIN_CHECKINS: usize = 10;
pub const DEFAULT_MIN_PLACES: usize = 10;
pub const DEFAULT_COLOCATION_RADIUS_M: f64 = 250.0;
pub const DEFAULT_COLOCATION_WINDOW_S: i64 = 1800;
pub const DEFAULT_HOME_CELL_DEG: f64 = 0.25;

/// Below this many non-empty lines the malformed ratio is never fatal.
const MIN_LINES_FOR_RATIO: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckIn {
    pub user_id: String,
    /// Seconds since the Unix epoch, UTC.
    pub timestamp: i64,
    pub location: GeoPoint,
    pub place_id: String,
}

/// Two check-ins by different users close in space and time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoLocation {
    pub user_a: String,
    pub user_b: String,
    /// Midpoint of the two check-in timestamps.
    pub time_s: f64,
    pub location: GeoPoint,
    pub distance_m: f64,
    pub dt_s: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceFormat {
    /// `user<TAB>timestamp<TAB>lat<TAB>lon<TAB>place`
    #[default]
    Brightkite,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub lines: usize,
    pub malformed: usize,
    /// Friendship files only: duplicate or self-loop rows.
    pub dropped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceCorpus {
    /// Sorted by (user, timestamp).
    pub checkins: Vec<CheckIn>,
    pub users: BTreeSet<String>,
    /// Canonical `(smaller, larger)` pairs.
    pub friendships: BTreeSet<(String, String)>,
}

impl TraceCorpus {
    pub fn new(mut checkins: Vec<CheckIn>, friendships: BTreeSet<(String, String)>) -> Self {
        checkins.sort_by(cmp_checkin);
        let mut users: BTreeSet<String> = checkins.iter().map(|c| c.user_id.clone()).collect();
        for (a, b) in &friendships {
            users.insert(a.clone());
            users.insert(b.clone());
        }
        TraceCorpus {
            checkins,
            users,
            friendships,
        }
    }

    pub fn with_friendships(mut self, friendships: BTreeSet<(String, String)>) -> Self {
        for (a, b) in &friendships {
            self.users.insert(a.clone());
            self.users.insert(b.clone());
        }
        self.friendships = friendships;
        self
    }

    pub fn checkins_of<'a>(&'a self, user: &'a str) -> impl Iterator<Item = &'a CheckIn> + 'a {
        let start = self.checkins.partition_point(|c| c.user_id.as_str() < user);
        self.checkins[start..]
            .iter()
            .take_while(move |c| c.user_id == user)
    }
}

fn cmp_checkin(a: &CheckIn, b: &CheckIn) -> std::cmp::Ordering {
    a.user_id
        .cmp(&b.user_id)
        .then(a.timestamp.cmp(&b.timestamp))
        .then_with(|| a.place_id.cmp(&b.place_id))
        .then(a.location.lat.total_cmp(&b.location.lat))
        .then(a.location.lon.total_cmp(&b.location.lon))
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_checkin_line(line: &str, format: TraceFormat) -> Option<CheckIn> {
    match format {
        TraceFormat::Brightkite => {
            let fields = split_fields(line);
            let [user, ts, lat, lon, place] = fields.as_slice() else {
                return None;
            };
            if user.is_empty() || place.is_empty() {
                return None;
            }
            let timestamp = parse_timestamp(ts).filter(|t| *t >= 0)?;
            let location = GeoPoint::new(lat.parse().ok()?, lon.parse().ok()?)?;
            Some(CheckIn {
                user_id: user.to_string(),
                timestamp,
                location,
                place_id: place.to_string(),
            })
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

/// Reads check-ins from any line source. `origin` is used in messages only.
pub fn read_checkins<R: BufRead>(
    reader: R,
    format: TraceFormat,
    origin: &Path,
) -> Result<(TraceCorpus, ParseStats)> {
    let mut stats = ParseStats::default();
    let mut checkins = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        match parse_checkin_line(&line, format) {
            Some(c) => checkins.push(c),
            None => {
                stats.malformed += 1;
                log::warn!("{}:{}: skipping malformed check-in", origin.display(), idx + 1);
            }
        }
    }
    if stats.lines >= MIN_LINES_FOR_RATIO && stats.malformed * 2 > stats.lines {
        return Err(Error::TooManyMalformed {
            path: origin.to_path_buf(),
            malformed: stats.malformed,
            total: stats.lines,
        });
    }
    Ok((TraceCorpus::new(checkins, BTreeSet::new()), stats))
}

pub fn parse_checkins(path: &Path, format: TraceFormat) -> Result<(TraceCorpus, ParseStats)> {
    read_checkins(open(path)?, format, path)
}

pub fn read_friendships<R: BufRead>(
    reader: R,
    origin: &Path,
) -> Result<(BTreeSet<(String, String)>, ParseStats)> {
    let mut stats = ParseStats::default();
    let mut pairs = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        stats.lines += 1;
        let fields = split_fields(&line);
        let [a, b] = fields.as_slice() else {
            stats.malformed += 1;
            log::warn!("{}:{}: skipping malformed friendship", origin.display(), idx + 1);
            continue;
        };
        if a == b {
            stats.dropped += 1;
            log::warn!("{}:{}: dropping self-loop", origin.display(), idx + 1);
            continue;
        }
        let pair = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        if !pairs.insert(pair) {
            stats.dropped += 1;
            log::warn!("{}:{}: dropping duplicate friendship", origin.display(), idx + 1);
        }
    }
    if stats.lines >= MIN_LINES_FOR_RATIO && stats.malformed * 2 > stats.lines {
        return Err(Error::TooManyMalformed {
            path: origin.to_path_buf(),
            malformed: stats.malformed,
            total: stats.lines,
        });
    }
    Ok((pairs, stats))
}

pub fn parse_friendships(path: &Path) -> Result<(BTreeSet<(String, String)>, ParseStats)> {
    read_friendships(open(path)?, path)
}

/// Keeps users with at least `min_checkins` check-ins at `min_places` distinct places.
pub fn filter_active_users(
    corpus: &TraceCorpus,
    min_checkins: usize,
    min_places: usize,
) -> TraceCorpus {
    let mut per_user: HashMap<&str, (usize, BTreeSet<&str>)> = HashMap::new();
    for c in &corpus.checkins {
        let entry = per_user.entry(&c.user_id).or_default();
        entry.0 += 1;
        entry.1.insert(&c.place_id);
    }
    let active: BTreeSet<String> = per_user
        .into_iter()
        .filter(|(_, (n, places))| *n >= min_checkins && places.len() >= min_places)
        .map(|(u, _)| u.to_string())
        .collect();
    let checkins = corpus
        .checkins
        .iter()
        .filter(|c| active.contains(&c.user_id))
        .cloned()
        .collect();
    let friendships = corpus
        .friendships
        .iter()
        .filter(|(a, b)| active.contains(a) && active.contains(b))
        .cloned()
        .collect();
    TraceCorpus {
        checkins,
        users: active,
        friendships,
    }
}

/// Builds the canonical record for a qualifying pair of check-ins.
pub fn colocation_of(a: &CheckIn, b: &CheckIn, distance_m: f64) -> CoLocation {
    let (first, second) = if a.user_id < b.user_id { (a, b) } else { (b, a) };
    CoLocation {
        user_a: first.user_id.clone(),
        user_b: second.user_id.clone(),
        time_s: (first.timestamp as f64 + second.timestamp as f64) / 2.0,
        location: first.location.midpoint(second.location),
        distance_m,
        dt_s: (first.timestamp - second.timestamp).abs(),
    }
}

pub fn cmp_colocation(a: &CoLocation, b: &CoLocation) -> std::cmp::Ordering {
    a.time_s
        .total_cmp(&b.time_s)
        .then_with(|| a.user_a.cmp(&b.user_a))
        .then_with(|| a.user_b.cmp(&b.user_b))
        .then(a.dt_s.cmp(&b.dt_s))
        .then(a.distance_m.total_cmp(&b.distance_m))
        .then(a.location.lat.total_cmp(&b.location.lat))
        .then(a.location.lon.total_cmp(&b.location.lon))
}

/// One record per pair of check-ins by different users within `radius_m`
/// and `window_s` (both bounds inclusive), sorted by time then user pair.
pub fn detect_colocations(corpus: &TraceCorpus, radius_m: f64, window_s: i64) -> Vec<CoLocation> {
    let mut by_time: Vec<&CheckIn> = corpus.checkins.iter().collect();
    by_time.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| cmp_checkin(a, b)));
    let mut out: Vec<CoLocation> = (0..by_time.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = by_time[i];
            let by_time = &by_time;
            by_time[i + 1..]
                .iter()
                .take_while(move |b| b.timestamp - a.timestamp <= window_s)
                .filter_map(move |b| {
                    if a.user_id == b.user_id {
                        return None;
                    }
                    // cheap exact rejection before the trigonometry
                    if lat_gap_m(a.location.lat, b.location.lat) > radius_m * (1.0 + 1e-9) + 1e-6 {
                        return None;
                    }
                    let d = haversine_m(a.location, b.location);
                    (d <= radius_m).then(|| colocation_of(a, b, d))
                })
        })
        .collect();
    out.sort_by(cmp_colocation);
    out
}

type Cell = (i64, i64);

fn cell_of(p: GeoPoint, cell_deg: f64) -> Cell {
    ((p.lat / cell_deg).floor() as i64, (p.lon / cell_deg).floor() as i64)
}

/// Densest `cell_deg` grid cell per user, averaged. Ties go to the cell
/// holding the earliest check-in.
pub fn compute_home_points(corpus: &TraceCorpus, cell_deg: f64) -> BTreeMap<String, GeoPoint> {
    let mut homes = BTreeMap::new();
    for user in &corpus.users {
        // count, earliest timestamp, lat sum, lon sum
        let mut cells: BTreeMap<Cell, (usize, i64, f64, f64)> = BTreeMap::new();
        for c in corpus.checkins_of(user) {
            let e = cells
                .entry(cell_of(c.location, cell_deg))
                .or_insert((0, i64::MAX, 0.0, 0.0));
            e.0 += 1;
            e.1 = e.1.min(c.timestamp);
            e.2 += c.location.lat;
            e.3 += c.location.lon;
        }
        let best = cells
            .iter()
            .max_by(|(ka, a), (kb, b)| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(kb.cmp(ka)));
        match best {
            Some((_, &(n, _, lat, lon))) => {
                homes.insert(
                    user.clone(),
                    GeoPoint {
                        lat: lat / n as f64,
                        lon: lon / n as f64,
                    },
                );
            }
            None => log::warn!("user {user} has no check-ins; no home-point"),
        }
    }
    homes
}

pub fn write_checkins(path: &Path, checkins: &[CheckIn]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for c in checkins {
        let ts = DateTime::from_timestamp(c.timestamp, 0)
            .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            c.user_id, ts, c.location.lat, c.location.lon, c.place_id
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_friendships(path: &Path, pairs: &BTreeSet<(String, String)>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (a, b) in pairs {
        writeln!(w, "{a}\t{b}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const COLOCATION_HEADER: [&str; 7] =
    ["user_a", "user_b", "time_s", "lat", "lon", "distance_m", "dt_s"];

pub fn write_colocations(path: &Path, colocs: &[CoLocation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(COLOCATION_HEADER)
        .map_err(|e| Error::csv(path, e))?;
    for c in colocs {
        w.write_record([
            c.user_a.clone(),
            c.user_b.clone(),
            c.time_s.to_string(),
            c.location.lat.to_string(),
            c.location.lon.to_string(),
            c.distance_m.to_string(),
            c.dt_s.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_colocations(path: &Path) -> Result<Vec<CoLocation>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || Error::parse(path, idx + 2, "malformed co-location row");
        let num = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(bad);
        out.push(CoLocation {
            user_a: rec.get(0).ok_or_else(bad)?.to_string(),
            user_b: rec.get(1).ok_or_else(bad)?.to_string(),
            time_s: num(2)?,
            location: GeoPoint::new(num(3)?, num(4)?).ok_or_else(bad)?,
            distance_m: num(5)?,
            dt_s: rec.get(6).and_then(|s| s.parse().ok()).ok_or_else(bad)?,
        });
    }
    Ok(out)
}

pub fn write_home_points(path: &Path, homes: &BTreeMap<String, GeoPoint>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(["user_id", "lat", "lon"])
        .map_err(|e| Error::csv(path, e))?;
    for (u, p) in homes {
        w.write_record([u.clone(), p.lat.to_string(), p.lon.to_string()])
            .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_home_points(path: &Path) -> Result<BTreeMap<String, GeoPoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = BTreeMap::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let bad = || Error::parse(path, idx + 2, "malformed home-point row");
        let lat = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let lon = rec.get(2).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        out.insert(
            rec.get(0).ok_or_else(bad)?.to_string(),
            GeoPoint::new(lat, lon).ok_or_else(bad)?,
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn ci(user: &str, t: i64, lat: f64, lon: f64, place: &str) -> CheckIn {
        CheckIn {
            user_id: user.into(),
            timestamp: t,
            location: GeoPoint::new(lat, lon).unwrap(),
            place_id: place.into(),
        }
    }

    fn read(text: &str) -> (TraceCorpus, ParseStats) {
        read_checkins(Cursor::new(text), TraceFormat::Brightkite, Path::new("mem")).unwrap()
    }

    #[test]
    fn empty_file() {
        let (c, s) = read("");
        assert!(c.users.is_empty());
        assert!(c.checkins.is_empty());
        assert_eq!(s.malformed, 0);
    }

    #[test]
    fn single_record() {
        let (c, s) = read("u1\t2010-10-17T01:48:53Z\t39.7\t-104.9\tp1\n");
        assert_eq!(c.users.len(), 1);
        assert_eq!(c.checkins.len(), 1);
        assert_eq!(c.checkins[0].timestamp, 1_287_280_133);
        assert_eq!(s.malformed, 0);
    }

    #[test]
    fn whitespace_separated_record() {
        let (c, _) = read("u1 2010-10-17T01:48:53Z 39.7 -104.9 p1\n");
        assert_eq!(c.checkins.len(), 1);
    }

    #[test]
    fn missing_place_is_malformed() {
        let (c, s) = read("u1\t2010-10-17T01:48:53Z\t39.7\t-104.9\n");
        assert!(c.checkins.is_empty());
        assert_eq!(s.malformed, 1);
    }

    #[test]
    fn bad_timestamp_is_malformed() {
        let (c, s) = read("u1\tyesterday\t39.7\t-104.9\tp1\nu2\t2010-10-17T01:48:53Z\t39.7\t-104.9\tp1\n");
        assert_eq!(c.checkins.len(), 1);
        assert_eq!(s.malformed, 1);
    }

    #[test]
    fn mostly_malformed_is_fatal() {
        let mut text = String::new();
        for i in 0..6 {
            text.push_str(&format!("u{i}\tbad\n"));
        }
        for i in 0..4 {
            text.push_str(&format!("u{i}\t2010-10-17T01:48:53Z\t1\t1\tp\n"));
        }
        let err = read_checkins(Cursor::new(text), TraceFormat::Brightkite, Path::new("mem"));
        assert!(matches!(err, Err(Error::TooManyMalformed { malformed: 6, total: 10, .. })));
    }

    #[test]
    fn unreadable_file_is_fatal() {
        let err = parse_checkins(Path::new("/nonexistent/checkins.tsv"), TraceFormat::Brightkite);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn sorted_by_user_then_time() {
        let (c, _) = read("b\t2010-01-01T00:00:10Z\t0\t0\tp\na\t2010-01-01T00:00:20Z\t0\t0\tp\na\t2010-01-01T00:00:05Z\t0\t0\tp\n");
        let keys: Vec<_> = c.checkins.iter().map(|c| (c.user_id.as_str(), c.timestamp)).collect();
        assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn friendships_drop_dups_and_loops() {
        let (pairs, s) =
            read_friendships(Cursor::new("a\tb\nb\ta\nc\tc\na\tc\n"), Path::new("mem")).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(s.dropped, 2);
        assert!(pairs.contains(&("a".into(), "b".into())));
    }

    fn user_with(name: &str, checkins: usize, places: usize) -> Vec<CheckIn> {
        (0..checkins)
            .map(|i| ci(name, i as i64, 0.0, 0.0, &format!("p{}", i % places)))
            .collect()
    }

    #[test]
    fn filter_thresholds_are_inclusive() {
        let mut all = user_with("low", 9, 9);
        all.extend(user_with("ok", 10, 10));
        all.extend(user_with("few_places", 20, 9));
        let friends = BTreeSet::from([("low".to_string(), "ok".to_string())]);
        let corpus = TraceCorpus::new(all, friends);
        let kept = filter_active_users(&corpus, DEFAULT_MIN_CHECKINS, DEFAULT_MIN_PLACES);
        assert_eq!(kept.users, BTreeSet::from(["ok".to_string()]));
        assert!(kept.friendships.is_empty());
        assert_eq!(kept.checkins.len(), 10);
    }

    #[test]
    fn filter_no_op_and_idempotent() {
        let mut all = user_with("a", 3, 2);
        all.extend(user_with("b", 12, 11));
        let corpus = TraceCorpus::new(all, BTreeSet::from([("a".into(), "b".into())]));
        assert_eq!(filter_active_users(&corpus, 1, 1), corpus);
        let once = filter_active_users(&corpus, 10, 10);
        assert_eq!(filter_active_users(&once, 10, 10), once);
    }

    #[test]
    fn colocation_inside_both_bounds() {
        let a = ci("u1", 0, 0.0, 0.0, "p");
        // ~100 m north
        let b = ci("u2", 600, 100.0 / 111_194.93, 0.0, "q");
        let corpus = TraceCorpus::new(vec![a, b], BTreeSet::new());
        let found = detect_colocations(&corpus, 250.0, 1800);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].user_a, "u1");
        assert_eq!(found[0].dt_s, 600);
        assert_eq!(found[0].time_s, 300.0);
        assert!((found[0].distance_m - 100.0).abs() < 0.01);
    }

    #[test]
    fn colocation_outside_radius() {
        let a = ci("u1", 0, 0.0, 0.0, "p");
        let b = ci("u2", 0, 251.0 / 111_194.93, 0.0, "q");
        let corpus = TraceCorpus::new(vec![a, b], BTreeSet::new());
        assert!(detect_colocations(&corpus, 250.0, 1800).is_empty());
    }

    #[test]
    fn colocation_same_user_excluded() {
        let corpus = TraceCorpus::new(
            vec![ci("u1", 0, 1.0, 1.0, "p"), ci("u1", 5, 1.0, 1.0, "q")],
            BTreeSet::new(),
        );
        assert!(detect_colocations(&corpus, 250.0, 1800).is_empty());
    }

    #[test]
    fn colocation_bounds_inclusive() {
        let a = ci("u1", 0, 0.0, 0.0, "p");
        let b = ci("u2", 1800, 0.0, 0.002, "q");
        let exact = haversine_m(a.location, b.location);
        let corpus = TraceCorpus::new(vec![a, b], BTreeSet::new());
        assert_eq!(detect_colocations(&corpus, exact, 1800).len(), 1);
        assert!(detect_colocations(&corpus, exact, 1799).is_empty());
        assert!(detect_colocations(&corpus, exact - 1e-6, 1800).is_empty());
    }

    #[test]
    fn colocation_record_is_symmetric() {
        let a = ci("zed", 10, 1.0, 1.0, "p");
        let b = ci("amy", 40, 1.001, 1.0, "q");
        let d = haversine_m(a.location, b.location);
        assert_eq!(colocation_of(&a, &b, d), colocation_of(&b, &a, d));
        assert_eq!(colocation_of(&a, &b, d).user_a, "amy");
    }

    #[test]
    fn home_single_location() {
        let corpus = TraceCorpus::new(
            (0..5).map(|i| ci("u", i, 10.0, 10.0, "p")).collect(),
            BTreeSet::new(),
        );
        let homes = compute_home_points(&corpus, DEFAULT_HOME_CELL_DEG);
        assert_eq!(homes["u"], GeoPoint::new(10.0, 10.0).unwrap());
    }

    #[test]
    fn home_densest_cell_mean() {
        let corpus = TraceCorpus::new(
            vec![
                ci("u", 0, 45.0, 45.0, "b"),
                ci("u", 1, 10.01, 10.01, "a"),
                ci("u", 2, 10.02, 10.03, "a"),
                ci("u", 3, 10.03, 10.05, "a"),
            ],
            BTreeSet::new(),
        );
        let h = compute_home_points(&corpus, 0.25)["u"];
        assert!((h.lat - 10.02).abs() < 1e-12);
        assert!((h.lon - 10.03).abs() < 1e-12);
    }

    #[test]
    fn home_tie_goes_to_earliest_cell() {
        let corpus = TraceCorpus::new(
            vec![
                ci("u", 100, 20.0, 20.0, "late"),
                ci("u", 5, 20.0, 20.0, "late"),
                ci("u", 50, 30.0, 30.0, "early"),
                ci("u", 1, 30.0, 30.0, "early"),
            ],
            BTreeSet::new(),
        );
        let h = compute_home_points(&corpus, 0.25)["u"];
        assert_eq!(h, GeoPoint::new(30.0, 30.0).unwrap());
    }

    #[test]
    fn home_skips_users_without_checkins() {
        let corpus = TraceCorpus::new(
            vec![ci("a", 0, 1.0, 1.0, "p")],
            BTreeSet::from([("a".into(), "ghost".into())]),
        );
        let homes = compute_home_points(&corpus, 0.25);
        assert!(homes.contains_key("a"));
        assert!(!homes.contains_key("ghost"));
    }
}

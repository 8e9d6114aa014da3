//! Aggregation of source runs into IRN%, hop curves and hop comparisons,
//! plus CSV / plot-data emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::experiment::{ExperimentResult, Mode, SourceRun, SweepVar};
use crate::human::UserIx;

/// Formats with 6 significant digits, trailing zeros trimmed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = 5 - mag;
    if !(0..=15).contains(&decimals) {
        return format!("{x:.5e}");
    }
    let s = format!("{:.*}", decimals as usize, x);
    // rounding may carry into a new digit (9.999996 -> 10.00000); harmless after trimming
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// 95% normal-approximation half-width over replicate means; `None` below
/// two replicates.
pub fn ci95(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    if values.iter().all(|v| *v == values[0]) {
        return Some(0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some(1.96 * var.sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// Mean over sources within each replicate, then over replicates.
    #[default]
    SourcesThenReplicates,
    /// Mean over all (source, replicate) runs; CI still over replicate means.
    Pooled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricSeries {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ci: Vec<Option<f64>>,
}

impl MetricSeries {
    pub fn new(label: impl Into<String>) -> Self {
        MetricSeries {
            label: label.into(),
            x: Vec::new(),
            y: Vec::new(),
            ci: Vec::new(),
        }
    }

    pub fn push(&mut self, x: f64, y: f64, ci: Option<f64>) {
        self.x.push(x);
        self.y.push(y);
        self.ci.push(ci);
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

fn by_replicate<'a>(runs: impl IntoIterator<Item = &'a SourceRun>, f: impl Fn(&SourceRun) -> f64) -> BTreeMap<u32, Vec<f64>> {
    let mut m: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for r in runs {
        m.entry(r.replicate).or_default().push(f(r));
    }
    m
}

fn aggregate(groups: BTreeMap<u32, Vec<f64>>, how: Averaging) -> Option<(f64, Option<f64>)> {
    if groups.is_empty() {
        return None;
    }
    let rep_means: Vec<f64> = groups
        .values()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        .collect();
    let mean = match how {
        Averaging::SourcesThenReplicates => rep_means.iter().sum::<f64>() / rep_means.len() as f64,
        Averaging::Pooled => {
            let n: usize = groups.values().map(Vec::len).sum();
            groups.values().flatten().sum::<f64>() / n as f64
        }
    };
    Some((mean, ci95(&rep_means)))
}

/// Mean IRN% of one group of runs with its CI; `None` for an empty group.
pub fn mean_irn_pct<'a>(runs: impl IntoIterator<Item = &'a SourceRun>, how: Averaging) -> Option<(f64, Option<f64>)> {
    aggregate(by_replicate(runs, SourceRun::irn_pct), how)
}

/// One IRN% series per mode over the sweep points.
pub fn irn_series(result: &ExperimentResult, how: Averaging) -> Vec<MetricSeries> {
    let mut out: BTreeMap<String, MetricSeries> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (pi, point) in result.points.iter().enumerate() {
        for mode in modes_at(result, pi) {
            let label = series_key(result, mode);
            let s = out.entry(label.clone()).or_insert_with(|| {
                order.push(label.clone());
                MetricSeries::new(label.clone())
            });
            match mean_irn_pct(result.runs_for(mode, pi), how) {
                Some((m, ci)) => s.push(point.x, m, ci),
                None => warn!("no runs for {label} at {}", point.label),
            }
        }
    }
    order.into_iter().map(|l| out.remove(&l).expect("inserted")).collect()
}

/// Series name of a mode. A kind sweep varies the kinds along the x axis,
/// so there the bare mode label is the series.
fn series_key(result: &ExperimentResult, mode: Mode) -> String {
    if result.sweep_var == SweepVar::Kinds {
        mode.label().to_string()
    } else {
        mode.series_label()
    }
}

/// Modes present at a sweep point, in first-seen order.
pub fn modes_at(result: &ExperimentResult, point: usize) -> Vec<Mode> {
    let mut seen = Vec::new();
    for r in result.runs.iter().filter(|r| r.point == point) {
        if !seen.contains(&r.mode) {
            seen.push(r.mode);
        }
    }
    seen
}

/// Cumulative IRN% by first-reach hop, `h = 0..=max_hops` (0 at h = 0).
pub fn irn_by_hop<'a>(
    label: impl Into<String>,
    runs: impl IntoIterator<Item = &'a SourceRun> + Clone,
    max_hops: u32,
    how: Averaging,
) -> MetricSeries {
    let mut s = MetricSeries::new(label);
    s.push(0.0, 0.0, None);
    for h in 1..=max_hops {
        if let Some((m, ci)) = aggregate(by_replicate(runs.clone(), |r| r.irn_pct_within(h)), how) {
            s.push(h as f64, m, ci);
        }
    }
    s
}

/// Giant-component % per mode over sweep points.
pub fn giant_series(result: &ExperimentResult) -> Vec<MetricSeries> {
    let mut out: Vec<MetricSeries> = Vec::new();
    for (pi, point) in result.points.iter().enumerate() {
        for mode in modes_at(result, pi) {
            let label = series_key(result, mode);
            let vals: Vec<f64> = result
                .giant
                .iter()
                .filter(|g| g.point == pi && g.mode == mode)
                .map(|g| g.pct)
                .collect();
            if vals.is_empty() {
                continue;
            }
            let idx = match out.iter().position(|s| s.label == label) {
                Some(i) => i,
                None => {
                    out.push(MetricSeries::new(label));
                    out.len() - 1
                }
            };
            out[idx].push(point.x, vals.iter().sum::<f64>() / vals.len() as f64, ci95(&vals));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopPair {
    pub replicate: u32,
    pub source: UserIx,
    pub with_cior: f64,
    pub without_cior: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HopsComparison {
    pub pairs: Vec<HopPair>,
    pub skipped: usize,
    pub mean_with: Option<f64>,
    pub mean_without: Option<f64>,
    /// `mean_with / mean_without`.
    pub ratio: Option<f64>,
}

/// Per (replicate, source): mean first-reach hop over nodes reached in
/// both conditions.
pub fn mean_hops_comparison<'a>(
    with_cior: impl IntoIterator<Item = &'a SourceRun>,
    without: impl IntoIterator<Item = &'a SourceRun>,
) -> HopsComparison {
    let base: BTreeMap<(u32, UserIx), &SourceRun> =
        without.into_iter().map(|r| ((r.replicate, r.source), r)).collect();
    let mut pairs = Vec::new();
    let mut skipped = 0;
    for r in with_cior {
        let Some(b) = base.get(&(r.replicate, r.source)) else {
            warn!("source {} replicate {} missing from baseline", r.source, r.replicate);
            skipped += 1;
            continue;
        };
        let hb: BTreeMap<UserIx, u32> = b.reached.iter().copied().collect();
        let (mut sa, mut sb, mut n) = (0.0, 0.0, 0usize);
        for &(v, h) in &r.reached {
            if let Some(&h0) = hb.get(&v) {
                sa += h as f64;
                sb += h0 as f64;
                n += 1;
            }
        }
        if n == 0 {
            if !r.reached.is_empty() || !b.reached.is_empty() {
                warn!("source {} replicate {}: disjoint reach sets, pair skipped", r.source, r.replicate);
            }
            skipped += 1;
            continue;
        }
        pairs.push(HopPair {
            replicate: r.replicate,
            source: r.source,
            with_cior: sa / n as f64,
            without_cior: sb / n as f64,
        });
    }
    let mean = |f: fn(&HopPair) -> f64| {
        (!pairs.is_empty()).then(|| pairs.iter().map(f).sum::<f64>() / pairs.len() as f64)
    };
    let mean_with = mean(|p| p.with_cior);
    let mean_without = mean(|p| p.without_cior);
    let ratio = match (mean_with, mean_without) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    HopsComparison {
        pairs,
        skipped,
        mean_with,
        mean_without,
        ratio,
    }
}

pub const SERIES_HEADER: &str = "series,x,y,ci";

/// `series,x,y,ci` rows; an absent CI is an empty field.
pub fn series_csv(series: &[MetricSeries]) -> String {
    let mut out = String::from(SERIES_HEADER);
    out.push('\n');
    for s in series {
        let label = if s.label.contains([',', '"']) {
            format!("\"{}\"", s.label.replace('"', "\"\""))
        } else {
            s.label.clone()
        };
        for i in 0..s.len() {
            let _ = writeln!(
                out,
                "{label},{},{},{}",
                fmt_sig(s.x[i]),
                fmt_sig(s.y[i]),
                s.ci[i].map(fmt_sig).unwrap_or_default()
            );
        }
    }
    out
}

/// Whitespace-separated `x y err` blocks, one per series, each headed by
/// `# label` and separated by a blank line. Absent CI is written as 0.
pub fn plot_data(series: &[MetricSeries]) -> String {
    let mut out = String::new();
    for (k, s) in series.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# {}", s.label);
        for i in 0..s.len() {
            let _ = writeln!(out, "{} {} {}", fmt_sig(s.x[i]), fmt_sig(s.y[i]), fmt_sig(s.ci[i].unwrap_or(0.0)));
        }
    }
    out
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn emit_csv(series: &[MetricSeries], path: &Path) -> Result<()> {
    write_text(path, &series_csv(series))
}

pub fn emit_plot_data(series: &[MetricSeries], path: &Path) -> Result<()> {
    write_text(path, &plot_data(series))
}

/// Writes a hop comparison as `replicate,source,with_cior,without_cior`
/// followed by a summary line per mean.
pub fn emit_hops_comparison(cmp: &HopsComparison, names: &[String], path: &Path) -> Result<()> {
    let mut out = String::from("replicate,source,with_cior,without_cior\n");
    for p in &cmp.pairs {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.replicate,
            names.get(p.source).cloned().unwrap_or_else(|| p.source.to_string()),
            fmt_sig(p.with_cior),
            fmt_sig(p.without_cior)
        );
    }
    let opt = |v: Option<f64>| v.map(fmt_sig).unwrap_or_default();
    let _ = writeln!(out, "# mean_with,{}", opt(cmp.mean_with));
    let _ = writeln!(out, "# mean_without,{}", opt(cmp.mean_without));
    let _ = writeln!(out, "# ratio,{}", opt(cmp.ratio));
    write_text(path, &out)
}

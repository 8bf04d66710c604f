//! Descriptive dataset statistics, written as a sectioned CSV plus optional
//! SVG bar charts.
//!
//! `stats.csv` layout: each section starts with a `#SECTION` row followed by
//! a `name,value` header and the section's rows; sections are separated by
//! a blank line. Sections, in order: `EDGE_TYPES`, `TOP_ENTITIES`,
//! `TOP_RELATIONS`, `PER_YEAR`, `QUALIFIERS`, `ENTITY_COUNT_HIST`.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::model::{Dataset, EdgeType, EntityId, RelationId};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("stats.csv: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatsReport {
    pub facts: usize,
    pub edge_type_counts: BTreeMap<EdgeType, usize>,
    pub top_entities: Vec<(String, usize)>,
    pub top_relations: Vec<(String, usize)>,
    pub per_year: BTreeMap<i32, usize>,
    pub total_qualifiers: usize,
    pub qualifier_mean: f64,
    /// `|actors| + |recipients|` -> number of facts.
    pub entity_count_histogram: BTreeMap<usize, usize>,
}

impl StatsReport {
    /// Three-way view: `BidirectionalPair` folded into `Group`.
    pub fn coarse_edge_type_counts(&self) -> BTreeMap<EdgeType, usize> {
        let mut out = BTreeMap::new();
        for (e, n) in &self.edge_type_counts {
            *out.entry(e.coarse()).or_default() += n;
        }
        out
    }

    /// Share of group-like and set2set facts among all facts.
    pub fn complex_share(&self) -> f64 {
        if self.facts == 0 {
            return 0.0;
        }
        let standard = self.edge_type_counts.get(&EdgeType::Standard).copied().unwrap_or(0);
        (self.facts - standard) as f64 / self.facts as f64
    }
}

fn top_k<K: Copy + Ord + std::hash::Hash>(
    counts: HashMap<K, usize>,
    k: usize,
    label: impl Fn(K) -> String,
) -> Vec<(String, usize)> {
    let mut v: Vec<(String, usize)> = counts.into_iter().map(|(id, n)| (label(id), n)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// Entity counts are per fact: an entity listed as both actor and recipient
/// counts once for that fact.
pub fn compute_stats(d: &Dataset, k: usize) -> StatsReport {
    let mut report = StatsReport {
        facts: d.len(),
        ..StatsReport::default()
    };
    let mut entities: HashMap<EntityId, usize> = HashMap::new();
    let mut relations: HashMap<RelationId, usize> = HashMap::new();
    for f in d.facts() {
        *report.edge_type_counts.entry(f.edge_type()).or_default() += 1;
        for e in f.primary_entities() {
            *entities.entry(e).or_default() += 1;
        }
        *relations.entry(f.relation).or_default() += 1;
        *report.per_year.entry(f.t.year()).or_default() += 1;
        report.total_qualifiers += f.qualifiers.len();
        *report
            .entity_count_histogram
            .entry(f.actors.len() + f.recipients.len())
            .or_default() += 1;
    }
    let v = d.vocab();
    report.top_entities = top_k(entities, k, |e| v.entity_label(e).to_string());
    report.top_relations = top_k(relations, k, |r| v.relation_label(r).to_string());
    report.qualifier_mean = if d.is_empty() {
        0.0
    } else {
        report.total_qualifiers as f64 / d.len() as f64
    };
    report
}

const MERGED_ROW: &str = "Group+BidirectionalPair";

pub fn stats_to_csv(r: &StatsReport) -> Result<String, StatsError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let section = |w: &mut csv::Writer<Vec<u8>>, name: &str, rows: Vec<(String, String)>, first: bool| -> Result<(), csv::Error> {
        if !first {
            w.write_record([""])?;
        }
        w.write_record([format!("#{name}")])?;
        w.write_record(["name", "value"])?;
        for (k, v) in rows {
            w.write_record([k, v])?;
        }
        Ok(())
    };
    let mut edge_rows: Vec<(String, String)> = EdgeType::ALL
        .iter()
        .map(|e| (e.name().to_string(), r.edge_type_counts.get(e).copied().unwrap_or(0).to_string()))
        .collect();
    let merged = r.coarse_edge_type_counts().get(&EdgeType::Group).copied().unwrap_or(0);
    edge_rows.push((MERGED_ROW.to_string(), merged.to_string()));
    section(&mut w, "EDGE_TYPES", edge_rows, true)?;
    let labeled = |v: &[(String, usize)]| v.iter().map(|(l, n)| (l.clone(), n.to_string())).collect();
    section(&mut w, "TOP_ENTITIES", labeled(&r.top_entities), false)?;
    section(&mut w, "TOP_RELATIONS", labeled(&r.top_relations), false)?;
    section(
        &mut w,
        "PER_YEAR",
        r.per_year.iter().map(|(y, n)| (y.to_string(), n.to_string())).collect(),
        false,
    )?;
    section(
        &mut w,
        "QUALIFIERS",
        vec![
            ("facts".into(), r.facts.to_string()),
            ("total".into(), r.total_qualifiers.to_string()),
            ("mean".into(), r.qualifier_mean.to_string()),
        ],
        false,
    )?;
    section(
        &mut w,
        "ENTITY_COUNT_HIST",
        r.entity_count_histogram
            .iter()
            .map(|(k, n)| (k.to_string(), n.to_string()))
            .collect(),
        false,
    )?;
    let bytes = w.into_inner().map_err(|e| StatsError::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| StatsError::Format(e.to_string()))
}

pub fn stats_from_csv(text: &str) -> Result<StatsReport, StatsError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut sections: Vec<(String, Vec<(String, String)>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let first = rec.get(0).unwrap_or("");
        if rec.len() == 1 && first.is_empty() {
            continue;
        }
        if rec.len() == 1 {
            if let Some(name) = first.strip_prefix('#') {
                sections.push((name.to_string(), Vec::new()));
                continue;
            }
        }
        let (_, rows) = sections
            .last_mut()
            .ok_or_else(|| StatsError::Format("row before first section".into()))?;
        if rec.len() != 2 {
            return Err(StatsError::Format(format!("expected 2 fields, got {}", rec.len())));
        }
        if rows.is_empty() && first == "name" && rec.get(1) == Some("value") {
            rows.push(("name".into(), "value".into()));
            continue;
        }
        rows.push((first.to_string(), rec.get(1).unwrap_or("").to_string()));
    }
    let bad = |m: String| StatsError::Format(m);
    let int = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("{s:?}: {e}")));
    let mut r = StatsReport::default();
    for (name, rows) in sections {
        let rows = rows.into_iter().skip(1);
        match name.as_str() {
            "EDGE_TYPES" => {
                for (k, v) in rows {
                    if k == MERGED_ROW {
                        continue;
                    }
                    let e = EdgeType::from_name(&k).ok_or_else(|| bad(format!("edge type {k:?}")))?;
                    let n = int(&v)?;
                    if n > 0 {
                        r.edge_type_counts.insert(e, n);
                    }
                }
            }
            "TOP_ENTITIES" => r.top_entities = rows.map(|(k, v)| Ok((k, int(&v)?))).collect::<Result<_, StatsError>>()?,
            "TOP_RELATIONS" => r.top_relations = rows.map(|(k, v)| Ok((k, int(&v)?))).collect::<Result<_, StatsError>>()?,
            "PER_YEAR" => {
                for (k, v) in rows {
                    let y = k.parse::<i32>().map_err(|e| bad(format!("{k:?}: {e}")))?;
                    r.per_year.insert(y, int(&v)?);
                }
            }
            "QUALIFIERS" => {
                for (k, v) in rows {
                    match k.as_str() {
                        "facts" => r.facts = int(&v)?,
                        "total" => r.total_qualifiers = int(&v)?,
                        "mean" => r.qualifier_mean = v.parse().map_err(|e| bad(format!("{v:?}: {e}")))?,
                        other => return Err(bad(format!("unknown qualifier row {other:?}"))),
                    }
                }
            }
            "ENTITY_COUNT_HIST" => {
                for (k, v) in rows {
                    r.entity_count_histogram.insert(int(&k)?, int(&v)?);
                }
            }
            other => return Err(bad(format!("unknown section {other:?}"))),
        }
    }
    Ok(r)
}

/// Minimal SVG bar chart. Each bar is a `<rect class="bar">`.
pub fn bar_chart_svg(title: &str, bars: &[(String, usize)]) -> String {
    let width = 640;
    let row = 24;
    let label_w = 220;
    let top = 40;
    let height = top + row * bars.len().max(1) + 20;
    let max = bars.iter().map(|b| b.1).max().unwrap_or(0).max(1);
    let esc = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<text x="10" y="24" font-size="16">{}</text>"#, esc(title));
    for (i, (label, n)) in bars.iter().enumerate() {
        let y = top + i * row;
        let w = (*n as f64 / max as f64 * (width - label_w - 80) as f64).round() as usize;
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, label_w - 6, y + 16, esc(label));
        let _ = writeln!(svg, r##"<rect class="bar" x="{label_w}" y="{}" width="{w}" height="{}" fill="#4c72b0"/>"##, y + 4, row - 8);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{n}</text>"#, label_w + w + 4, y + 16);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `stats.csv` and, when `plots` is set, one SVG per histogram.
pub fn emit_stats(r: &StatsReport, out_dir: &Path, plots: bool) -> Result<Vec<PathBuf>, StatsError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let csv_path = out_dir.join("stats.csv");
    std::fs::write(&csv_path, stats_to_csv(r)?)?;
    written.push(csv_path);
    if plots {
        let edge_bars: Vec<(String, usize)> = EdgeType::ALL
            .iter()
            .map(|e| (e.name().to_string(), r.edge_type_counts.get(e).copied().unwrap_or(0)))
            .collect();
        let charts = [
            ("edge_types.svg", "Edge types", edge_bars),
            ("top_entities.svg", "Top entities", r.top_entities.clone()),
            ("top_relations.svg", "Top relations", r.top_relations.clone()),
            (
                "per_year.svg",
                "Facts per year",
                r.per_year.iter().map(|(y, n)| (y.to_string(), *n)).collect(),
            ),
            (
                "entity_count_hist.svg",
                "Primary entities per fact",
                r.entity_count_histogram.iter().map(|(k, n)| (k.to_string(), *n)).collect(),
            ),
        ];
        for (file, title, bars) in charts {
            let path = out_dir.join(file);
            std::fs::write(&path, bar_chart_svg(title, &bars))?;
            written.push(path);
        }
    }
    Ok(written)
}

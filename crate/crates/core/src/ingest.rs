//! Event-record ETL: parse coded event records, build entity, relation and
//! qualifier symbols, drop records that cannot form a valid fact, and
//! assemble a sorted [`Dataset`].
//!
//! Entities are `"Country (SECTOR)"` (or just `"Country"` when no sector is
//! coded), relations are `"type (mode)"` (or `"type"`), every event gets one
//! `location` qualifier when a location country is coded and one `context`
//! qualifier per coded context.

use std::collections::HashMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    entity_label, Dataset, EntityId, EntityKind, Fact, QualifierPair, RelationId, Timestamp,
    Vocab,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("input is not valid UTF-8 (byte offset {0})")]
    Encoding(usize),
    #[error("missing CSV column {0:?}")]
    MissingColumn(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    pub date: String,
    pub event_type: String,
    #[serde(default)]
    pub event_mode: Option<String>,
    #[serde(default)]
    pub actor_pairs: Vec<(String, Option<String>)>,
    #[serde(default)]
    pub recipient_pairs: Vec<(String, Option<String>)>,
    #[serde(default)]
    pub location_country: Option<String>,
    #[serde(default)]
    pub contexts: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

/// A record that could not be parsed, with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseIssue {
    pub line: usize,
    pub message: String,
}

/// Maps CSV column names to event fields. Multi-valued cells are split on
/// `list_separator`; actor and recipient sector columns are aligned with
/// their country columns by position, an empty slot meaning "no sector".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub date: String,
    pub event_type: String,
    pub event_mode: String,
    pub actor_country: String,
    pub actor_sector: String,
    pub recipient_country: String,
    pub recipient_sector: String,
    pub location_country: String,
    pub contexts: String,
    pub list_separator: char,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            date: "date".into(),
            event_type: "event_type".into(),
            event_mode: "event_mode".into(),
            actor_country: "actor_country".into(),
            actor_sector: "actor_sector".into(),
            recipient_country: "recipient_country".into(),
            recipient_sector: "recipient_sector".into(),
            location_country: "location_country".into(),
            contexts: "contexts".into(),
            list_separator: ';',
        }
    }
}

/// Trims and collapses internal whitespace. This is the only normalization
/// applied to labels.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn non_empty(s: &str) -> Option<String> {
    let n = normalize(s);
    (!n.is_empty()).then_some(n)
}

pub fn parse_event_records<R: Read>(
    mut input: R,
    format: InputFormat,
    columns: &ColumnMap,
) -> Result<(Vec<RawEvent>, Vec<ParseIssue>), IngestError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|e| IngestError::Encoding(e.valid_up_to()))?;
    if text.trim().is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    match format {
        InputFormat::Jsonl => Ok(parse_jsonl(text)),
        InputFormat::Csv => parse_csv(text, columns),
    }
}

fn parse_jsonl(text: &str) -> (Vec<RawEvent>, Vec<ParseIssue>) {
    let mut events = Vec::new();
    let mut issues = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<RawEvent>(line)
            .map_err(|e| e.to_string())
            .and_then(|e| check_date(&e.date).map(|_| e));
        match parsed {
            Ok(e) => events.push(e),
            Err(message) => issues.push(ParseIssue {
                line: i + 1,
                message,
            }),
        }
    }
    (events, issues)
}

fn check_date(date: &str) -> Result<Timestamp, String> {
    Timestamp::parse(date).map_err(|e| e.to_string())
}

fn parse_csv(text: &str, cols: &ColumnMap) -> Result<(Vec<RawEvent>, Vec<ParseIssue>), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| find(name).ok_or_else(|| IngestError::MissingColumn(name.into()));
    let date_col = required(&cols.date)?;
    let type_col = required(&cols.event_type)?;
    let mode_col = find(&cols.event_mode);
    let actor_col = find(&cols.actor_country);
    let actor_sector_col = find(&cols.actor_sector);
    let recip_col = find(&cols.recipient_country);
    let recip_sector_col = find(&cols.recipient_sector);
    let loc_col = find(&cols.location_country);
    let ctx_col = find(&cols.contexts);

    let sep = cols.list_separator;
    let split = |cell: &str| -> Vec<String> {
        if cell.trim().is_empty() {
            Vec::new()
        } else {
            cell.split(sep).map(normalize).collect()
        }
    };

    let mut events = Vec::new();
    let mut issues = Vec::new();
    for result in reader.records() {
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                issues.push(ParseIssue {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let cell = |col: Option<usize>| col.and_then(|c| record.get(c)).unwrap_or("");
        let date = cell(Some(date_col)).trim().to_string();
        if let Err(message) = check_date(&date) {
            issues.push(ParseIssue { line, message });
            continue;
        }
        let pairs = |countries: Option<usize>, sectors: Option<usize>| {
            let countries = split(cell(countries));
            let sectors = split(cell(sectors));
            if sectors.len() > countries.len() {
                return Err(format!(
                    "{} sectors for {} countries",
                    sectors.len(),
                    countries.len()
                ));
            }
            Ok(countries
                .into_iter()
                .enumerate()
                .map(|(i, c)| (c, sectors.get(i).and_then(|s| non_empty(s))))
                .collect::<Vec<_>>())
        };
        let actor_pairs = match pairs(actor_col, actor_sector_col) {
            Ok(p) => p,
            Err(message) => {
                issues.push(ParseIssue { line, message });
                continue;
            }
        };
        let recipient_pairs = match pairs(recip_col, recip_sector_col) {
            Ok(p) => p,
            Err(message) => {
                issues.push(ParseIssue { line, message });
                continue;
            }
        };
        events.push(RawEvent {
            date,
            event_type: normalize(cell(Some(type_col))),
            event_mode: non_empty(cell(mode_col)),
            actor_pairs,
            recipient_pairs,
            location_country: non_empty(cell(loc_col)),
            contexts: split(cell(ctx_col))
                .into_iter()
                .filter(|c| !c.is_empty())
                .collect(),
        });
    }
    Ok((events, issues))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbols {
    pub actors: Vec<EntityId>,
    pub recipients: Vec<EntityId>,
    pub relation: RelationId,
    pub qualifiers: Vec<QualifierPair>,
}

pub fn relation_label(event_type: &str, event_mode: Option<&str>) -> String {
    let ty = normalize(event_type);
    match event_mode.and_then(non_empty) {
        Some(mode) => format!("{ty} ({mode})"),
        None => ty,
    }
}

/// Interns the event's symbols into `vocab`. Countries with an empty name
/// are skipped here; [`build_dataset`] reports them before calling this.
pub fn construct_symbols(e: &RawEvent, vocab: &mut Vocab) -> Symbols {
    let mut entity = |(country, sector): &(String, Option<String>)| {
        let country = normalize(country);
        if country.is_empty() {
            return None;
        }
        let sector = sector.as_deref().and_then(non_empty);
        Some(vocab.intern_entity(&entity_label(&country, sector.as_deref()), EntityKind::Country))
    };
    let actors = e.actor_pairs.iter().filter_map(&mut entity).collect();
    let recipients = e.recipient_pairs.iter().filter_map(&mut entity).collect();
    let relation = vocab.intern_relation(&relation_label(&e.event_type, e.event_mode.as_deref()));
    let mut qualifiers = Vec::new();
    if let Some(loc) = e.location_country.as_deref().and_then(non_empty) {
        let value = vocab.intern_entity(&loc, EntityKind::Country);
        qualifiers.push(QualifierPair::new(vocab.location(), value));
    }
    for ctx in &e.contexts {
        if let Some(ctx) = non_empty(ctx) {
            let value = vocab.intern_entity(&ctx, EntityKind::Context);
            qualifiers.push(QualifierPair::new(vocab.context(), value));
        }
    }
    Symbols {
        actors,
        recipients,
        relation,
        qualifiers,
    }
}

/// A fact that has not been checked against the structural invariants yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub actors: Vec<EntityId>,
    pub relation: RelationId,
    pub recipients: Vec<EntityId>,
    pub t: Timestamp,
    pub qualifiers: Vec<QualifierPair>,
    pub seq: u64,
}

impl Candidate {
    fn dedup(mut self) -> Self {
        let mut seen = std::collections::HashSet::new();
        self.actors.retain(|e| seen.insert(*e));
        seen.clear();
        self.recipients.retain(|e| seen.insert(*e));
        self
    }

    fn into_fact(self) -> Fact {
        Fact {
            actors: self.actors,
            relation: self.relation,
            recipients: self.recipients,
            t: self.t,
            qualifiers: self.qualifiers,
            seq: self.seq,
        }
    }
}

/// Why a candidate was dropped by the integrity filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DropReason {
    ZeroActors,
    SingleActorNoRecipients,
}

pub fn integrity_drop_reason(actors: usize, recipients: usize) -> Option<DropReason> {
    if actors == 0 {
        Some(DropReason::ZeroActors)
    } else if actors + recipients <= 1 {
        Some(DropReason::SingleActorNoRecipients)
    } else {
        None
    }
}

/// Keeps candidates with at least one actor and more than one primary
/// entity overall, preserving order. Actor and recipient lists are
/// deduplicated first.
pub fn apply_integrity_filter(candidates: Vec<Candidate>) -> (Vec<Fact>, usize) {
    let total = candidates.len();
    let kept: Vec<Fact> = candidates
        .into_iter()
        .map(Candidate::dedup)
        .filter(|c| integrity_drop_reason(c.actors.len(), c.recipients.len()).is_none())
        .map(Candidate::into_fact)
        .collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct BuildReport {
    pub parse_issues: Vec<ParseIssue>,
    /// Input positions of events with an empty country or event type.
    pub unresolvable: Vec<(usize, String)>,
    pub dropped_by_filter: usize,
    pub kept: usize,
}

/// Builds a dataset from parsed events. `seq` is the event's position in
/// `raw`. The vocabulary only contains symbols used by kept facts, interned
/// in dataset order.
pub fn build_dataset(raw: &[RawEvent], meta: &str) -> (Dataset, BuildReport) {
    let mut report = BuildReport::default();
    let mut staging = Vocab::new();
    let mut candidates = Vec::new();
    for (i, e) in raw.iter().enumerate() {
        if let Some(reason) = unresolvable(e) {
            report.unresolvable.push((i, reason));
            continue;
        }
        let t = match Timestamp::parse(&e.date) {
            Ok(t) => t,
            Err(err) => {
                report.unresolvable.push((i, err.to_string()));
                continue;
            }
        };
        let s = construct_symbols(e, &mut staging);
        candidates.push(Candidate {
            actors: s.actors,
            relation: s.relation,
            recipients: s.recipients,
            t,
            qualifiers: s.qualifiers,
            seq: i as u64,
        });
    }
    let (kept, dropped) = apply_integrity_filter(candidates);
    report.dropped_by_filter = dropped;
    report.kept = kept.len();
    let staged = Dataset::new(kept, staging, meta);
    (compact(staged), report)
}

/// Parses then builds; parse issues are carried in the report.
pub fn ingest<R: Read>(
    input: R,
    format: InputFormat,
    columns: &ColumnMap,
    meta: &str,
) -> Result<(Dataset, BuildReport), IngestError> {
    let (events, issues) = parse_event_records(input, format, columns)?;
    let (d, mut report) = build_dataset(&events, meta);
    report.parse_issues = issues;
    Ok((d, report))
}

fn unresolvable(e: &RawEvent) -> Option<String> {
    if normalize(&e.event_type).is_empty() {
        return Some("empty event type".into());
    }
    let blank = |pairs: &[(String, Option<String>)]| pairs.iter().any(|(c, _)| normalize(c).is_empty());
    if blank(&e.actor_pairs) {
        return Some("actor with empty country".into());
    }
    if blank(&e.recipient_pairs) {
        return Some("recipient with empty country".into());
    }
    None
}

/// Re-interns a dataset's symbols in fact order, dropping unused ones.
pub fn compact(d: Dataset) -> Dataset {
    let (facts, old, meta) = d.into_parts();
    let mut vocab = Vocab::new();
    let mut ent: HashMap<EntityId, EntityId> = HashMap::new();
    let mut map_entity = |vocab: &mut Vocab, e: EntityId| {
        *ent.entry(e).or_insert_with(|| {
            vocab.intern_entity(
                old.entity_label(e),
                old.entity_kind(e).unwrap_or(EntityKind::Country),
            )
        })
    };
    let facts = facts
        .into_iter()
        .map(|f| {
            let actors = f.actors.iter().map(|e| map_entity(&mut vocab, *e)).collect();
            let relation = vocab.intern_relation(old.relation_label(f.relation));
            let recipients = f
                .recipients
                .iter()
                .map(|e| map_entity(&mut vocab, *e))
                .collect();
            let qualifiers = f
                .qualifiers
                .iter()
                .map(|q| {
                    let qrel = vocab.intern_qualifier_relation(old.qualifier_label(q.qrel));
                    QualifierPair::new(qrel, map_entity(&mut vocab, q.value))
                })
                .collect();
            Fact {
                actors,
                relation,
                recipients,
                qualifiers,
                ..f
            }
        })
        .collect();
    Dataset::new(facts, vocab, meta)
}

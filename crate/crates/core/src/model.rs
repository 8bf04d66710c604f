//! Core HTKGH data model.
//!
//! A fact relates a non-empty set of actors to a (possibly empty) set of
//! recipients through one relation at a given day, with an ordered list of
//! `(qualifier relation, entity)` pairs attached. Plain HTKG quadruples are
//! the special case of singleton actor and recipient sets.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Interned entity identifier, dense in `0..vocab.entities.len()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

/// Interned primary relation identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

/// Interned qualifier relation identifier. Lives in its own id space, so a
/// qualifier relation can never be confused with a primary relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualRelId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl QualRelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid date {0:?}, expected YYYY-MM-DD")]
pub struct DateParseError(pub String);

/// Day-granular timestamp stored as days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp {
    day: i32,
}

impl Timestamp {
    pub fn from_day(day: i32) -> Self {
        Self { day }
    }

    pub fn from_ymd(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(Self::from_date)
    }

    pub fn parse(iso: &str) -> Result<Self, DateParseError> {
        NaiveDate::parse_from_str(iso.trim(), "%Y-%m-%d")
            .map(Self::from_date)
            .map_err(|_| DateParseError(iso.to_string()))
    }

    fn from_date(date: NaiveDate) -> Self {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch is a valid date");
        Self {
            day: (date - epoch).num_days() as i32,
        }
    }

    pub fn day(self) -> i32 {
        self.day
    }

    pub fn date(self) -> NaiveDate {
        let epoch = NaiveDate::from_ymd_opt(1970, 1, 1).expect("epoch is a valid date");
        epoch + chrono::Duration::days(self.day as i64)
    }

    pub fn year(self) -> i32 {
        self.date().year()
    }

    pub fn iso(self) -> String {
        self.date().format("%Y-%m-%d").to_string()
    }

    pub fn plus_days(self, days: i32) -> Self {
        Self {
            day: self.day + days,
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.iso())
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.iso())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QualifierPair {
    pub qrel: QualRelId,
    pub value: EntityId,
}

impl QualifierPair {
    pub fn new(qrel: QualRelId, value: EntityId) -> Self {
        Self { qrel, value }
    }
}

/// One HTKGH fact. Construct through [`make_fact`] to get the invariants
/// checked; the fields stay public for read access and for tests that need
/// to build deliberately broken facts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fact {
    /// Non-empty, duplicate-free, in first-seen order.
    pub actors: Vec<EntityId>,
    pub relation: RelationId,
    /// Duplicate-free, in first-seen order. Empty for group-type facts.
    pub recipients: Vec<EntityId>,
    pub t: Timestamp,
    /// Ingestion order is preserved; duplicates are kept as given.
    pub qualifiers: Vec<QualifierPair>,
    pub seq: u64,
}

impl Fact {
    pub fn edge_type(&self) -> EdgeType {
        classify_edge_type(self)
    }

    pub fn primary_entities(&self) -> BTreeSet<EntityId> {
        fact_primary_entities(self)
    }

    pub fn is_self_loop(&self) -> bool {
        self.actors.iter().any(|a| self.recipients.contains(a))
    }

    /// Qualifier values attached under `qrel`, in ingestion order.
    pub fn qualifier_values(&self, qrel: QualRelId) -> impl Iterator<Item = EntityId> + '_ {
        self.qualifiers
            .iter()
            .filter(move |q| q.qrel == qrel)
            .map(|q| q.value)
    }

    /// Ordering key inside a dataset.
    pub fn order_key(&self) -> (i32, u64) {
        (self.t.day(), self.seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeType {
    /// One actor, one recipient: a plain HTKG quadruple.
    Standard,
    /// Two actors, no recipients: a bidirectional relation between a pair.
    BidirectionalPair,
    /// Three or more actors, no recipients.
    Group,
    /// At least one recipient and at least three primary entities overall.
    Set2Set,
}

impl EdgeType {
    pub const ALL: [EdgeType; 4] = [
        EdgeType::Standard,
        EdgeType::BidirectionalPair,
        EdgeType::Group,
        EdgeType::Set2Set,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EdgeType::Standard => "Standard",
            EdgeType::BidirectionalPair => "BidirectionalPair",
            EdgeType::Group => "Group",
            EdgeType::Set2Set => "Set2Set",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    /// Three-way view used for reporting: pairs are folded into `Group`.
    pub fn coarse(self) -> EdgeType {
        match self {
            EdgeType::BidirectionalPair => EdgeType::Group,
            other => other,
        }
    }

    /// Facts without recipients carry a relation with no head or tail.
    pub fn is_bidirectional(self) -> bool {
        matches!(self, EdgeType::BidirectionalPair | EdgeType::Group)
    }
}

impl fmt::Display for EdgeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactError {
    #[error("fact has no actors")]
    EmptyActors,
    #[error("fact has {0} primary entities, needs more than one")]
    TooFewEntities(usize),
    #[error("unknown {kind} id {id}")]
    UnknownSymbol { kind: SymbolKind, id: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    Entity,
    Relation,
    QualifierRelation,
}

impl fmt::Display for SymbolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SymbolKind::Entity => "entity",
            SymbolKind::Relation => "relation",
            SymbolKind::QualifierRelation => "qualifier relation",
        })
    }
}

fn dedup_keep_first(ids: impl IntoIterator<Item = EntityId>) -> Vec<EntityId> {
    let mut seen = BTreeSet::new();
    ids.into_iter().filter(|id| seen.insert(*id)).collect()
}

/// Builds a fact, deduplicating the actor and recipient sets and checking
/// the structural invariants. When `vocab` is given every id must exist in it.
pub fn make_fact(
    actors: impl IntoIterator<Item = EntityId>,
    relation: RelationId,
    recipients: impl IntoIterator<Item = EntityId>,
    t: Timestamp,
    qualifiers: Vec<QualifierPair>,
    seq: u64,
    vocab: Option<&Vocab>,
) -> Result<Fact, FactError> {
    let actors = dedup_keep_first(actors);
    let recipients = dedup_keep_first(recipients);
    if actors.is_empty() {
        return Err(FactError::EmptyActors);
    }
    let total = actors.len() + recipients.len();
    if total <= 1 {
        return Err(FactError::TooFewEntities(total));
    }
    let fact = Fact {
        actors,
        relation,
        recipients,
        t,
        qualifiers,
        seq,
    };
    if let Some(vocab) = vocab {
        if let Some(err) = vocab.first_unknown(&fact) {
            return Err(err);
        }
    }
    Ok(fact)
}

/// Lifts an HTKG quadruple with qualifiers into a fact with singleton
/// actor and recipient sets.
///
/// `s == o` yields a self-loop fact, which is accepted; [`validate_dataset`]
/// reports it as a warning.
pub fn from_htkg_quadruple(
    s: EntityId,
    r: RelationId,
    o: EntityId,
    t: Timestamp,
    qualifiers: Vec<QualifierPair>,
    seq: u64,
) -> Fact {
    // Not routed through make_fact: the singleton sets would be deduplicated
    // to one entity when s == o, and a quadruple always names two slots.
    Fact {
        actors: vec![s],
        relation: r,
        recipients: vec![o],
        t,
        qualifiers,
        seq,
    }
}

pub fn classify_edge_type(f: &Fact) -> EdgeType {
    match (f.actors.len(), f.recipients.len()) {
        (1, 1) => EdgeType::Standard,
        (2, 0) => EdgeType::BidirectionalPair,
        (_, 0) => EdgeType::Group,
        _ => EdgeType::Set2Set,
    }
}

pub fn fact_primary_entities(f: &Fact) -> BTreeSet<EntityId> {
    f.actors.iter().chain(f.recipients.iter()).copied().collect()
}

/// Bijective label table with dense ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    labels: Vec<String>,
    index: HashMap<String, u32>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = self.labels.len() as u32;
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), id);
        id
    }

    pub fn get(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> Option<&str> {
        self.labels.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Replaces every label in place, keeping ids. Fails if the new labels
    /// are not pairwise distinct.
    pub fn relabel(&mut self, f: impl Fn(u32, &str) -> String) -> Result<(), String> {
        let labels: Vec<String> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| f(i as u32, l))
            .collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i as u32).is_some() {
                return Err(l.clone());
            }
        }
        self.labels = labels;
        self.index = index;
        Ok(())
    }
}

/// How an entity entered the vocabulary. Country entities are built from a
/// country and an optional sector and take part in anonymization; context
/// entities only ever appear as context qualifier values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    Country,
    Context,
}

pub const LOCATION_QUALIFIER: &str = "location";
pub const CONTEXT_QUALIFIER: &str = "context";

/// Symbol tables for entities, primary relations, and qualifier relations.
/// `location` and `context` are always qualifier relations 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    pub entities: SymbolTable,
    entity_kinds: Vec<EntityKind>,
    pub relations: SymbolTable,
    pub qualifier_relations: SymbolTable,
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocab {
    pub fn new() -> Self {
        let mut qualifier_relations = SymbolTable::new();
        qualifier_relations.intern(LOCATION_QUALIFIER);
        qualifier_relations.intern(CONTEXT_QUALIFIER);
        Self {
            entities: SymbolTable::new(),
            entity_kinds: Vec::new(),
            relations: SymbolTable::new(),
            qualifier_relations,
        }
    }

    pub fn location(&self) -> QualRelId {
        QualRelId(0)
    }

    pub fn context(&self) -> QualRelId {
        QualRelId(1)
    }

    /// Interns an entity label. A label first seen as a context and later
    /// used as a country entity is promoted to [`EntityKind::Country`].
    pub fn intern_entity(&mut self, label: &str, kind: EntityKind) -> EntityId {
        let id = self.entities.intern(label);
        if id as usize == self.entity_kinds.len() {
            self.entity_kinds.push(kind);
        } else if kind == EntityKind::Country {
            self.entity_kinds[id as usize] = EntityKind::Country;
        }
        EntityId(id)
    }

    pub fn intern_relation(&mut self, label: &str) -> RelationId {
        RelationId(self.relations.intern(label))
    }

    pub fn intern_qualifier_relation(&mut self, label: &str) -> QualRelId {
        QualRelId(self.qualifier_relations.intern(label))
    }

    pub fn entity(&self, label: &str) -> Option<EntityId> {
        self.entities.get(label).map(EntityId)
    }

    pub fn relation(&self, label: &str) -> Option<RelationId> {
        self.relations.get(label).map(RelationId)
    }

    pub fn qualifier_relation(&self, label: &str) -> Option<QualRelId> {
        self.qualifier_relations.get(label).map(QualRelId)
    }

    pub fn entity_label(&self, id: EntityId) -> &str {
        self.entities.label(id.0).unwrap_or("<unknown entity>")
    }

    pub fn relation_label(&self, id: RelationId) -> &str {
        self.relations.label(id.0).unwrap_or("<unknown relation>")
    }

    pub fn qualifier_label(&self, id: QualRelId) -> &str {
        self.qualifier_relations
            .label(id.0)
            .unwrap_or("<unknown qualifier>")
    }

    pub fn entity_kind(&self, id: EntityId) -> Option<EntityKind> {
        self.entity_kinds.get(id.index()).copied()
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub(crate) fn first_unknown(&self, f: &Fact) -> Option<FactError> {
        let n_ent = self.entities.len() as u32;
        for e in f.actors.iter().chain(&f.recipients) {
            if e.0 >= n_ent {
                return Some(FactError::UnknownSymbol {
                    kind: SymbolKind::Entity,
                    id: e.0,
                });
            }
        }
        if f.relation.0 >= self.relations.len() as u32 {
            return Some(FactError::UnknownSymbol {
                kind: SymbolKind::Relation,
                id: f.relation.0,
            });
        }
        for q in &f.qualifiers {
            if q.qrel.0 >= self.qualifier_relations.len() as u32 {
                return Some(FactError::UnknownSymbol {
                    kind: SymbolKind::QualifierRelation,
                    id: q.qrel.0,
                });
            }
            if q.value.0 >= n_ent {
                return Some(FactError::UnknownSymbol {
                    kind: SymbolKind::Entity,
                    id: q.value.0,
                });
            }
        }
        None
    }
}

/// Splits an entity label of the form `"Country (SECTOR)"` into its parts.
pub fn split_entity_label(label: &str) -> (&str, Option<&str>) {
    if let Some(stripped) = label.strip_suffix(')') {
        if let Some((country, sector)) = stripped.rsplit_once(" (") {
            if !country.is_empty() && !sector.is_empty() {
                return (country, Some(sector));
            }
        }
    }
    (label, None)
}

pub fn entity_label(country: &str, sector: Option<&str>) -> String {
    match sector {
        Some(s) => format!("{country} ({s})"),
        None => country.to_string(),
    }
}

/// Time-ordered fact store. Facts are sorted by `(day, seq)` on construction
/// and never mutated afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    facts: Vec<Fact>,
    vocab: Vocab,
    pub meta: String,
}

impl Dataset {
    pub fn new(mut facts: Vec<Fact>, vocab: Vocab, meta: impl Into<String>) -> Self {
        facts.sort_by_key(Fact::order_key);
        Self {
            facts,
            vocab,
            meta: meta.into(),
        }
    }

    /// Wraps facts as given, without sorting. Only useful to exercise
    /// [`validate_dataset`] on malformed input.
    pub fn from_unsorted(facts: Vec<Fact>, vocab: Vocab, meta: impl Into<String>) -> Self {
        Self {
            facts,
            vocab,
            meta: meta.into(),
        }
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn into_parts(self) -> (Vec<Fact>, Vocab, String) {
        (self.facts, self.vocab, self.meta)
    }

    /// Facts strictly before `day`.
    pub fn before(&self, day: i32) -> &[Fact] {
        let end = self.facts.partition_point(|f| f.t.day() < day);
        &self.facts[..end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    EmptyActors,
    TooFewEntities,
    DuplicateEntity,
    UnknownSymbol,
    SortOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Position in the dataset's fact list.
    pub position: usize,
    pub seq: u64,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum WarningKind {
    SelfLoop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub position: usize,
    pub seq: u64,
    pub kind: WarningKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Warning>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let vocab = d.vocab();
    let mut push = |position: usize, f: &Fact, kind: ViolationKind, detail: String| {
        report.violations.push(Violation {
            position,
            seq: f.seq,
            kind,
            detail,
        })
    };
    for (i, f) in d.facts().iter().enumerate() {
        if f.actors.is_empty() {
            push(i, f, ViolationKind::EmptyActors, "no actors".into());
        }
        let total = f.actors.len() + f.recipients.len();
        if total <= 1 {
            push(
                i,
                f,
                ViolationKind::TooFewEntities,
                format!("{total} primary entities"),
            );
        }
        if dedup_keep_first(f.actors.iter().copied()).len() != f.actors.len()
            || dedup_keep_first(f.recipients.iter().copied()).len() != f.recipients.len()
        {
            push(
                i,
                f,
                ViolationKind::DuplicateEntity,
                "actor or recipient listed twice".into(),
            );
        }
        if let Some(err) = vocab.first_unknown(f) {
            push(i, f, ViolationKind::UnknownSymbol, err.to_string());
        }
        if i > 0 {
            let prev = &d.facts()[i - 1];
            if prev.order_key() > f.order_key() {
                push(
                    i,
                    f,
                    ViolationKind::SortOrder,
                    format!(
                        "seq {} ({}) follows seq {} ({})",
                        f.seq, f.t, prev.seq, prev.t
                    ),
                );
            }
        }
        if f.is_self_loop() {
            report.warnings.push(Warning {
                position: i,
                seq: f.seq,
                kind: WarningKind::SelfLoop,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn sanction_vocab() -> (Vocab, [EntityId; 5], RelationId) {
        let mut v = Vocab::new();
        let us = v.intern_entity("US", EntityKind::Country);
        let uk = v.intern_entity("UK", EntityKind::Country);
        let ru = v.intern_entity("Russia", EntityKind::Country);
        let by = v.intern_entity("Belarus", EntityKind::Country);
        let war = v.intern_entity("Russo-Ukrainian war", EntityKind::Context);
        let sanction = v.intern_relation("sanction");
        (v, [us, uk, ru, by, war], sanction)
    }

    #[test]
    fn timestamp_roundtrip() {
        let t = day("2022-01-01");
        assert_eq!(t.iso(), "2022-01-01");
        assert_eq!(t.day(), 18993);
        assert_eq!(Timestamp::from_day(0).iso(), "1970-01-01");
        assert!(Timestamp::parse("2022-13-01").is_err());
        assert!(Timestamp::parse("yesterday").is_err());
        assert_eq!(t.year(), 2022);
    }

    #[test]
    fn sanction_fact_is_set2set() {
        let (mut v, [us, uk, ru, by, war], sanction) = sanction_vocab();
        let cause = v.intern_qualifier_relation("cause");
        let f = make_fact(
            [us, uk],
            sanction,
            [ru, by],
            day("2022-01-01"),
            vec![QualifierPair::new(cause, war)],
            0,
            Some(&v),
        )
        .unwrap();
        assert_eq!(f.actors, vec![us, uk]);
        assert_eq!(classify_edge_type(&f), EdgeType::Set2Set);
        assert_eq!(fact_primary_entities(&f).len(), 4);
    }

    #[test]
    fn make_fact_rejections() {
        let (v, [us, uk, ..], r) = sanction_vocab();
        let t = day("2020-05-05");
        assert_eq!(
            make_fact([], r, [us], t, vec![], 0, None),
            Err(FactError::EmptyActors)
        );
        assert_eq!(
            make_fact([us], r, [], t, vec![], 0, None),
            Err(FactError::TooFewEntities(1))
        );
        // duplicates collapse before the size check
        assert_eq!(
            make_fact([us, us], r, [], t, vec![], 0, None),
            Err(FactError::TooFewEntities(1))
        );
        assert!(matches!(
            make_fact([us], r, [EntityId(99)], t, vec![], 0, Some(&v)),
            Err(FactError::UnknownSymbol {
                kind: SymbolKind::Entity,
                id: 99
            })
        ));
        assert!(make_fact([us], r, [uk], t, vec![], 0, Some(&v)).is_ok());
    }

    #[test]
    fn group_and_pair_classification() {
        let t = day("2020-01-01");
        let r = RelationId(0);
        let e = |i| EntityId(i);
        let group = make_fact([e(0), e(1), e(2)], r, [], t, vec![], 0, None).unwrap();
        assert_eq!(group.edge_type(), EdgeType::Group);
        assert!(group.edge_type().is_bidirectional());
        let pair = make_fact([e(0), e(1)], r, [], t, vec![], 0, None).unwrap();
        assert_eq!(pair.edge_type(), EdgeType::BidirectionalPair);
        assert_eq!(pair.edge_type().coarse(), EdgeType::Group);
        let std = from_htkg_quadruple(e(0), r, e(1), t, vec![], 0);
        assert_eq!(std.edge_type(), EdgeType::Standard);
    }

    #[test]
    fn quadruple_conversion_keeps_qualifiers() {
        let q = vec![QualifierPair::new(QualRelId(0), EntityId(5))];
        let f = from_htkg_quadruple(EntityId(1), RelationId(2), EntityId(3), day("2021-02-03"), q.clone(), 7);
        assert_eq!(f.actors, vec![EntityId(1)]);
        assert_eq!(f.recipients, vec![EntityId(3)]);
        assert_eq!(f.qualifiers, q);
        let bare = from_htkg_quadruple(EntityId(1), RelationId(2), EntityId(3), day("2021-02-03"), vec![], 7);
        assert!(bare.qualifiers.is_empty());
    }

    #[test]
    fn self_loop_quadruple_is_flagged_not_rejected() {
        let mut v = Vocab::new();
        let s = v.intern_entity("A", EntityKind::Country);
        let r = v.intern_relation("r");
        let f = from_htkg_quadruple(s, r, s, day("2021-01-01"), vec![], 0);
        assert_eq!(f.actors, vec![s]);
        assert_eq!(f.recipients, vec![s]);
        assert_eq!(fact_primary_entities(&f), BTreeSet::from([s]));
        let report = validate_dataset(&Dataset::new(vec![f], v, "loop"));
        assert!(report.is_valid());
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].kind, WarningKind::SelfLoop);
    }

    #[test]
    fn primary_entities_union() {
        let f = make_fact(
            [EntityId(0), EntityId(1)],
            RelationId(0),
            [EntityId(2)],
            day("2020-01-01"),
            vec![],
            0,
            None,
        )
        .unwrap();
        assert_eq!(
            fact_primary_entities(&f),
            BTreeSet::from([EntityId(0), EntityId(1), EntityId(2)])
        );
    }

    fn three_fact_dataset() -> Dataset {
        let mut v = Vocab::new();
        let a = v.intern_entity("A", EntityKind::Country);
        let b = v.intern_entity("B", EntityKind::Country);
        let r = v.intern_relation("r");
        let facts = (0..3)
            .map(|i| {
                make_fact([a], r, [b], Timestamp::from_day(10 + i), vec![], i as u64, None).unwrap()
            })
            .collect();
        Dataset::new(facts, v, "three")
    }

    #[test]
    fn validation_clean_and_broken() {
        let d = three_fact_dataset();
        assert!(validate_dataset(&d).is_valid());
        assert!(validate_dataset(&d).warnings.is_empty());

        let (mut facts, vocab, _) = d.clone().into_parts();
        facts.swap(0, 1);
        let report = validate_dataset(&Dataset::from_unsorted(facts, vocab.clone(), "x"));
        let sort: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.kind == ViolationKind::SortOrder)
            .collect();
        assert_eq!(sort.len(), 1);
        assert_eq!(sort[0].seq, 0);

        let (mut facts, vocab, _) = d.into_parts();
        facts[1].recipients = vec![EntityId(2)];
        let report = validate_dataset(&Dataset::new(facts, vocab, "x"));
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::UnknownSymbol);
    }

    #[test]
    fn entity_label_split() {
        assert_eq!(split_entity_label("Canada (GOV)"), ("Canada", Some("GOV")));
        assert_eq!(split_entity_label("Canada"), ("Canada", None));
        assert_eq!(entity_label("Canada", Some("GOV")), "Canada (GOV)");
        assert_eq!(split_entity_label("(GOV)"), ("(GOV)", None));
    }

    #[test]
    fn interning_is_idempotent_and_promotes_kind() {
        let mut v = Vocab::new();
        let a = v.intern_entity("military", EntityKind::Context);
        assert_eq!(v.entity_kind(a), Some(EntityKind::Context));
        let b = v.intern_entity("military", EntityKind::Country);
        assert_eq!(a, b);
        assert_eq!(v.entity_kind(a), Some(EntityKind::Country));
        assert_eq!(v.intern_relation("x"), v.intern_relation("x"));
        assert_eq!(v.qualifier_relation("location"), Some(v.location()));
        assert_eq!(v.qualifier_relation("context"), Some(v.context()));
    }

    #[test]
    fn relabel_rejects_collisions() {
        let mut t = SymbolTable::new();
        t.intern("a");
        t.intern("b");
        assert!(t.relabel(|_, _| "same".to_string()).is_err());
        t.relabel(|_, l| l.to_uppercase()).unwrap();
        assert_eq!(t.get("A"), Some(0));
        assert_eq!(t.get("a"), None);
    }
}

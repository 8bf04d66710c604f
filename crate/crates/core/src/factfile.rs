//! Canonical fact file: JSON Lines, one fact per line, symbols written as
//! labels.
//!
//! ```text
//! {"a":["US","UK"],"r":"sanction","rc":["Russia"],"t":"2022-01-01","q":[["location","Ukraine"]]}
//! ```
//!
//! The vocabulary is rebuilt on load by interning labels in order of first
//! appearance (actors, relation, recipients, then qualifiers).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    make_fact, Dataset, EntityKind, Fact, FactError, QualifierPair, Timestamp, Vocab,
};

#[derive(Debug, Error)]
pub enum FactFileError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: usize, source: FactError },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactRecord {
    pub a: Vec<String>,
    pub r: String,
    pub rc: Vec<String>,
    pub t: Timestamp,
    pub q: Vec<(String, String)>,
}

impl FactRecord {
    pub fn from_fact(f: &Fact, v: &Vocab) -> Self {
        Self {
            a: f.actors.iter().map(|e| v.entity_label(*e).to_string()).collect(),
            r: v.relation_label(f.relation).to_string(),
            rc: f
                .recipients
                .iter()
                .map(|e| v.entity_label(*e).to_string())
                .collect(),
            t: f.t,
            q: f
                .qualifiers
                .iter()
                .map(|q| {
                    (
                        v.qualifier_label(q.qrel).to_string(),
                        v.entity_label(q.value).to_string(),
                    )
                })
                .collect(),
        }
    }

    /// Interns the record's labels into `vocab` and builds the fact.
    pub fn intern(&self, vocab: &mut Vocab, seq: u64) -> Result<Fact, FactError> {
        let actors: Vec<_> = self
            .a
            .iter()
            .map(|l| vocab.intern_entity(l, EntityKind::Country))
            .collect();
        let relation = vocab.intern_relation(&self.r);
        let recipients: Vec<_> = self
            .rc
            .iter()
            .map(|l| vocab.intern_entity(l, EntityKind::Country))
            .collect();
        let qualifiers = self
            .q
            .iter()
            .map(|(k, l)| {
                let qrel = vocab.intern_qualifier_relation(k);
                let kind = if qrel == vocab.location() {
                    EntityKind::Country
                } else {
                    EntityKind::Context
                };
                QualifierPair::new(qrel, vocab.intern_entity(l, kind))
            })
            .collect();
        make_fact(actors, relation, recipients, self.t, qualifiers, seq, None)
    }
}

pub fn write_facts<W: Write>(d: &Dataset, mut out: W) -> std::io::Result<()> {
    for f in d.facts() {
        let line = serde_json::to_string(&FactRecord::from_fact(f, d.vocab()))
            .map_err(std::io::Error::other)?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn facts_to_string(d: &Dataset) -> String {
    let mut buf = Vec::new();
    write_facts(d, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Reads a canonical fact file. `seq` is the line's position among the
/// non-blank lines; facts are then stably sorted by day.
pub fn read_facts<R: BufRead>(input: R, meta: &str) -> Result<Dataset, FactFileError> {
    let mut vocab = Vocab::new();
    let mut facts = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FactRecord =
            serde_json::from_str(&line).map_err(|e| FactFileError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
        let seq = facts.len() as u64;
        let fact = record
            .intern(&mut vocab, seq)
            .map_err(|source| FactFileError::Invalid { line: i + 1, source })?;
        facts.push(fact);
    }
    Ok(Dataset::new(facts, vocab, meta))
}

pub fn read_facts_str(s: &str, meta: &str) -> Result<Dataset, FactFileError> {
    read_facts(s.as_bytes(), meta)
}

pub fn load_dataset(path: &std::path::Path) -> Result<Dataset, FactFileError> {
    let file = std::fs::File::open(path)?;
    read_facts(
        std::io::BufReader::new(file),
        &path.display().to_string(),
    )
}

pub fn save_dataset(d: &Dataset, path: &std::path::Path) -> std::io::Result<()> {
    let file = std::fs::File::create(path)?;
    write_facts(d, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = concat!(
        r#"{"a":["US","UK"],"r":"sanction","rc":["Russia","Belarus"],"t":"2022-01-01","q":[["cause","Russo-Ukrainian war"]]}"#,
        "\n",
        r#"{"a":["US","Canada","Mexico"],"r":"consult","rc":[],"t":"2022-01-03","q":[["location","US"],["context","economic"],["context","trade"]]}"#,
        "\n"
    );

    #[test]
    fn canonical_roundtrip_is_byte_exact() {
        let d = read_facts_str(SAMPLE, "sample").unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(facts_to_string(&d), SAMPLE);
        let us = d.vocab().entity("US").unwrap();
        assert_eq!(d.vocab().entity_kind(us), Some(EntityKind::Country));
        let econ = d.vocab().entity("economic").unwrap();
        assert_eq!(d.vocab().entity_kind(econ), Some(EntityKind::Context));
    }

    #[test]
    fn load_sorts_by_date_then_line() {
        let text = concat!(
            r#"{"a":["A"],"r":"x","rc":["B"],"t":"2020-01-02","q":[]}"#,
            "\n",
            r#"{"a":["A"],"r":"y","rc":["B"],"t":"2020-01-01","q":[]}"#,
            "\n",
            r#"{"a":["A"],"r":"z","rc":["B"],"t":"2020-01-02","q":[]}"#,
            "\n"
        );
        let d = read_facts_str(text, "t").unwrap();
        let rels: Vec<_> = d
            .facts()
            .iter()
            .map(|f| d.vocab().relation_label(f.relation))
            .collect();
        assert_eq!(rels, ["y", "x", "z"]);
    }

    #[test]
    fn malformed_and_invalid_lines_cite_line_numbers() {
        let err = read_facts_str("{\"a\":1}\n", "t").unwrap_err();
        assert!(matches!(err, FactFileError::Malformed { line: 1, .. }));
        let err = read_facts_str(
            "\n{\"a\":[\"A\"],\"r\":\"x\",\"rc\":[],\"t\":\"2020-01-01\",\"q\":[]}\n",
            "t",
        )
        .unwrap_err();
        assert!(matches!(
            err,
            FactFileError::Invalid {
                line: 2,
                source: FactError::TooFewEntities(1)
            }
        ));
    }

    fn arb_record() -> impl Strategy<Value = FactRecord> {
        let label = "[A-Za-z][A-Za-z ]{0,6}( \\((GOV|MIL|CVL)\\))?";
        (
            prop::collection::btree_set(label, 1..4),
            "[a-z]{1,6}( \\([a-z]{1,5}\\))?",
            prop::collection::btree_set(label, 0..3),
            0i32..20000,
            prop::collection::vec(
                (prop::sample::select(vec!["location", "context"]), "[a-z]{1,8}"),
                0..3,
            ),
        )
            .prop_filter("needs two primary entities", |(a, _, rc, _, _)| {
                let mut all = a.clone();
                all.extend(rc.iter().cloned());
                all.len() > 1 && a.len() + rc.len() > 1 && a.is_disjoint(rc)
            })
            .prop_map(|(a, r, rc, day, q)| FactRecord {
                a: a.into_iter().collect(),
                r,
                rc: rc.into_iter().collect(),
                t: Timestamp::from_day(day),
                q: q.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            })
    }

    proptest! {
        #[test]
        fn serialize_deserialize_is_identity(mut records in prop::collection::vec(arb_record(), 0..20)) {
            records.sort_by_key(|r| r.t);
            let text: String = records
                .iter()
                .map(|r| serde_json::to_string(r).unwrap() + "\n")
                .collect();
            let d = read_facts_str(&text, "p").unwrap();
            prop_assert_eq!(facts_to_string(&d), text);
        }
    }
}

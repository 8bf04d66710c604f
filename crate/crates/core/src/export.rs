//! Windowed-example export for the GNN forecaster.
//!
//! `examples.jsonl` holds one line per query, in qid order:
//!
//! ```text
//! {"qid":0,"query":{"a":[..],"rc":[..],"q":[[qrel,value],..],"t":day},"label":r,
//!  "windows":[[{"a":[..],"r":r,"rc":[..],"q":[..],"t":day},..],..]}
//! ```
//!
//! `windows[0]` is the window closest to the query. `t` is the day number
//! (days since 1970-01-01). Ids index `entities.tsv`, `relations.tsv` and
//! `qualrels.tsv`, each a headerless `id<TAB>label` file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Dataset, Fact, QualifierPair, SymbolTable};
use crate::retrieval::{FilterConfig, HistoryIndex, RelationQuery};

pub const EXAMPLES_FILE: &str = "examples.jsonl";
pub const ENTITIES_FILE: &str = "entities.tsv";
pub const RELATIONS_FILE: &str = "relations.tsv";
pub const QUALRELS_FILE: &str = "qualrels.tsv";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{file}:{line}: {message}")]
    Malformed {
        file: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireQuery {
    pub a: Vec<u32>,
    pub rc: Vec<u32>,
    pub q: Vec<(u32, u32)>,
    pub t: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireFact {
    pub a: Vec<u32>,
    pub r: u32,
    pub rc: Vec<u32>,
    pub q: Vec<(u32, u32)>,
    pub t: i32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireExample {
    pub qid: u64,
    pub query: WireQuery,
    pub label: u32,
    pub windows: Vec<Vec<WireFact>>,
}

fn wire_quals(q: &[QualifierPair]) -> Vec<(u32, u32)> {
    q.iter().map(|p| (p.qrel.0, p.value.0)).collect()
}

impl From<&Fact> for WireFact {
    fn from(f: &Fact) -> Self {
        Self {
            a: f.actors.iter().map(|e| e.0).collect(),
            r: f.relation.0,
            rc: f.recipients.iter().map(|e| e.0).collect(),
            q: wire_quals(&f.qualifiers),
            t: f.t.day(),
        }
    }
}

impl From<&RelationQuery> for WireQuery {
    fn from(q: &RelationQuery) -> Self {
        Self {
            a: q.actors.iter().map(|e| e.0).collect(),
            rc: q.recipients.iter().map(|e| e.0).collect(),
            q: wire_quals(&q.qualifiers),
            t: q.t.day(),
        }
    }
}

/// Builds the wire records for `queries`, sorted by qid.
pub fn windowed_examples(
    d: &Dataset,
    queries: &[RelationQuery],
    delta: u32,
    count: usize,
    c: FilterConfig,
) -> Vec<WireExample> {
    let index = HistoryIndex::new(d);
    let mut out: Vec<WireExample> = queries
        .par_iter()
        .map(|q| {
            let ex = index.windows(q, delta, count, c);
            WireExample {
                qid: q.qid,
                query: WireQuery::from(q),
                label: q.gold.0,
                windows: ex
                    .windows
                    .iter()
                    .map(|w| w.iter().map(WireFact::from).collect())
                    .collect(),
            }
        })
        .collect();
    out.sort_by_key(|e| e.qid);
    out
}

fn write_tsv(path: &Path, table: &SymbolTable) -> Result<(), ExportError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, label) in table.labels().iter().enumerate() {
        writeln!(w, "{i}\t{label}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `examples.jsonl` and the three vocabulary files into `out_dir`.
/// Output bytes depend only on the inputs.
pub fn export_windowed_examples(
    d: &Dataset,
    queries: &[RelationQuery],
    delta: u32,
    count: usize,
    c: FilterConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExportError> {
    std::fs::create_dir_all(out_dir)?;
    let examples = windowed_examples(d, queries, delta, count, c);
    let path = out_dir.join(EXAMPLES_FILE);
    let mut w = BufWriter::new(File::create(&path)?);
    for ex in &examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let v = d.vocab();
    let sidecars = [
        (ENTITIES_FILE, &v.entities),
        (RELATIONS_FILE, &v.relations),
        (QUALRELS_FILE, &v.qualifier_relations),
    ];
    let mut written = vec![path];
    for (name, table) in sidecars {
        let p = out_dir.join(name);
        write_tsv(&p, table)?;
        written.push(p);
    }
    Ok(written)
}

pub fn read_examples(path: &Path) -> Result<Vec<WireExample>, ExportError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ExportError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Reads an `id<TAB>label` file. Ids must run 0, 1, 2, ... in order.
pub fn read_vocab_tsv(path: &Path) -> Result<Vec<String>, ExportError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let bad = |message: String| ExportError::Malformed {
            file: path.display().to_string(),
            line: i + 1,
            message,
        };
        let (id, label) = line.split_once('\t').ok_or_else(|| bad("missing tab".into()))?;
        let id: usize = id.parse().map_err(|e| bad(format!("id {id:?}: {e}")))?;
        if id != out.len() {
            return Err(bad(format!("expected id {}, got {id}", out.len())));
        }
        out.push(label.to_string());
    }
    Ok(out)
}

//! Stratified test-set sampling and the test-set file.
//!
//! Test-set file: JSON Lines, one [`RelationQuery`] per line, qids dense
//! from 0 in time order. Entity and relation fields are ids into the
//! dataset the set was drawn from.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Dataset, RelationId, Timestamp};
use crate::retrieval::RelationQuery;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("fraction must be in (0, 1], got {0}")]
    Fraction(f64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// `round(x)` with halves going up. The small epsilon absorbs products such
/// as `0.01 * 250` landing just under `2.5`.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// Bins post-cutoff facts by `(year, relation)` and draws
/// `round_half_up(fraction * bin_size)` facts per bin after a seeded shuffle.
pub fn build_test_set(
    d: &Dataset,
    fraction: f64,
    seed: u64,
    drop_before: Option<Timestamp>,
) -> Result<Vec<RelationQuery>, SplitError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SplitError::Fraction(fraction));
    }
    let mut bins: BTreeMap<(i32, RelationId), Vec<usize>> = BTreeMap::new();
    for (i, f) in d.facts().iter().enumerate() {
        if drop_before.is_some_and(|cut| f.t < cut) {
            continue;
        }
        bins.entry((f.t.year(), f.relation)).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for members in bins.values_mut() {
        let k = round_half_up(fraction * members.len() as f64).min(members.len());
        members.shuffle(&mut rng);
        picked.extend_from_slice(&members[..k]);
    }
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .enumerate()
        .map(|(qid, i)| RelationQuery::from_fact(qid as u64, &d.facts()[i]))
        .collect())
}

pub fn write_test_set(path: &Path, queries: &[RelationQuery]) -> Result<(), SplitError> {
    let mut w = BufWriter::new(File::create(path)?);
    for q in queries {
        serde_json::to_writer(&mut w, q).map_err(|source| SplitError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_test_set(path: &Path) -> Result<Vec<RelationQuery>, SplitError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| SplitError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

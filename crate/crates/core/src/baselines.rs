//! Frequency, recency and copy heuristics over a retrieved history.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{EntityId, Fact, QualifierPair, RelationId};
use rayon::prelude::*;

use crate::model::Dataset;
use crate::retrieval::{FilterConfig, HistoryContext, HistoryIndex, RelationQuery};

/// A heuristic's answer. `None` means the heuristic abstained (empty
/// history, or nothing to copy from); the benchmark scores that as wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeuristicPrediction {
    pub relation: Option<RelationId>,
}

impl HeuristicPrediction {
    pub const ABSTAIN: HeuristicPrediction = HeuristicPrediction { relation: None };

    pub fn of(relation: RelationId) -> Self {
        Self {
            relation: Some(relation),
        }
    }

    pub fn abstained(&self) -> bool {
        self.relation.is_none()
    }
}

/// Most frequent relation in the history. Ties go to the tied relation
/// that occurred most recently.
pub fn frequency(hc: &HistoryContext) -> HeuristicPrediction {
    // relation -> (count, position of last occurrence)
    let mut tally: HashMap<RelationId, (usize, usize)> = HashMap::new();
    for (i, f) in hc.facts.iter().enumerate() {
        let entry = tally.entry(f.relation).or_insert((0, 0));
        entry.0 += 1;
        entry.1 = i;
    }
    tally
        .into_iter()
        .max_by_key(|&(_, key)| key)
        .map_or(HeuristicPrediction::ABSTAIN, |(r, _)| HeuristicPrediction::of(r))
}

/// Relation of the newest fact in the history.
pub fn recency(hc: &HistoryContext) -> HeuristicPrediction {
    hc.facts
        .last()
        .map_or(HeuristicPrediction::ABSTAIN, |f| HeuristicPrediction::of(f.relation))
}

fn sorted(ids: &[EntityId]) -> Vec<EntityId> {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v
}

fn sorted_quals(q: &[QualifierPair]) -> Vec<QualifierPair> {
    let mut v = q.to_vec();
    v.sort_unstable();
    v
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyOptions {
    /// Also require the qualifier multiset to match the query's.
    pub include_qualifiers: bool,
}

/// Relation of the newest history fact whose actor set and recipient set
/// equal the query's.
pub fn copy(hc: &HistoryContext, q: &RelationQuery) -> HeuristicPrediction {
    copy_with(hc, q, CopyOptions::default())
}

pub fn copy_with(hc: &HistoryContext, q: &RelationQuery, opts: CopyOptions) -> HeuristicPrediction {
    let actors = sorted(&q.actors);
    let recipients = sorted(&q.recipients);
    let quals = opts.include_qualifiers.then(|| sorted_quals(&q.qualifiers));
    let same = |f: &&Fact| {
        f.actors.len() == actors.len()
            && f.recipients.len() == recipients.len()
            && sorted(&f.actors) == actors
            && sorted(&f.recipients) == recipients
            && quals
                .as_ref()
                .is_none_or(|qs| sorted_quals(&f.qualifiers) == *qs)
    };
    hc.facts
        .iter()
        .rev()
        .find(same)
        .map_or(HeuristicPrediction::ABSTAIN, |f| HeuristicPrediction::of(f.relation))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Heuristic {
    Frequency,
    Recency,
    Copy,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::Frequency, Heuristic::Recency, Heuristic::Copy];

    pub fn predict(self, hc: &HistoryContext, opts: CopyOptions) -> HeuristicPrediction {
        match self {
            Heuristic::Frequency => frequency(hc),
            Heuristic::Recency => recency(hc),
            Heuristic::Copy => copy_with(hc, &hc.query, opts),
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Heuristic::Frequency => "frequency",
            Heuristic::Recency => "recency",
            Heuristic::Copy => "copy",
        })
    }
}

impl FromStr for Heuristic {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "frequency" => Ok(Heuristic::Frequency),
            "recency" => Ok(Heuristic::Recency),
            "copy" => Ok(Heuristic::Copy),
            other => Err(format!("unknown heuristic {other:?}")),
        }
    }
}

/// Predictions for a whole query set, in query order.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicRun {
    pub predictions: Vec<HeuristicPrediction>,
    pub correct: usize,
    pub abstained: usize,
}

impl HeuristicRun {
    /// Abstentions count as wrong. Zero for an empty query set.
    pub fn accuracy(&self) -> f64 {
        if self.predictions.is_empty() {
            0.0
        } else {
            self.correct as f64 / self.predictions.len() as f64
        }
    }
}

pub fn evaluate_heuristic(
    d: &Dataset,
    queries: &[RelationQuery],
    heuristic: Heuristic,
    c: FilterConfig,
    h: usize,
    opts: CopyOptions,
) -> HeuristicRun {
    let index = HistoryIndex::new(d);
    let predictions: Vec<HeuristicPrediction> = queries
        .par_iter()
        .map(|q| heuristic.predict(&index.retrieve(q, c, h), opts))
        .collect();
    let correct = predictions
        .iter()
        .zip(queries)
        .filter(|(p, q)| p.relation == Some(q.gold))
        .count();
    let abstained = predictions.iter().filter(|p| p.abstained()).count();
    HeuristicRun {
        predictions,
        correct,
        abstained,
    }
}

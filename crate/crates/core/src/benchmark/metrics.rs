//! Accuracy and misformat rates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{EdgeType, RelationId};
use crate::retrieval::RelationQuery;

use super::parser::ParsedAnswer;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{preds} predictions for {gold} gold labels")]
    LengthMismatch { preds: usize, gold: usize },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

impl Score {
    fn add(&mut self, correct: bool) {
        self.total += 1;
        self.correct += correct as usize;
    }

    fn finish(&mut self) {
        self.accuracy = ratio(self.correct, self.total);
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// `accuracy` and `misformat_rate` are over scored queries only; errored
/// queries (no response after retries) are left out of that denominator.
/// `accuracy_all` counts errored queries as wrong.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkMetrics {
    pub total: usize,
    pub scored: usize,
    pub errored: usize,
    pub correct: usize,
    pub misformatted: usize,
    pub accuracy: f64,
    pub misformat_rate: f64,
    pub accuracy_all: f64,
    pub per_edge_type: BTreeMap<EdgeType, Score>,
}

/// One query's outcome. `answer` is `None` when the provider errored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outcome {
    pub answer: Option<ParsedAnswer>,
    pub gold: RelationId,
    pub edge_type: EdgeType,
}

pub fn score_outcomes(outcomes: &[Outcome]) -> BenchmarkMetrics {
    let mut m = BenchmarkMetrics {
        total: outcomes.len(),
        ..Default::default()
    };
    for o in outcomes {
        let Some(a) = o.answer else {
            m.errored += 1;
            continue;
        };
        m.scored += 1;
        let correct = a.prediction == Some(o.gold);
        m.correct += correct as usize;
        m.misformatted += a.is_misformatted() as usize;
        m.per_edge_type.entry(o.edge_type).or_default().add(correct);
    }
    m.accuracy = ratio(m.correct, m.scored);
    m.misformat_rate = ratio(m.misformatted, m.scored);
    m.accuracy_all = ratio(m.correct, m.total);
    m.per_edge_type.values_mut().for_each(Score::finish);
    m
}

pub fn score_predictions(preds: &[ParsedAnswer], gold: &[RelationQuery]) -> Result<BenchmarkMetrics, MetricsError> {
    if preds.len() != gold.len() || gold.is_empty() {
        return Err(MetricsError::LengthMismatch {
            preds: preds.len(),
            gold: gold.len(),
        });
    }
    let outcomes: Vec<Outcome> = preds
        .iter()
        .zip(gold)
        .map(|(p, q)| Outcome {
            answer: Some(*p),
            gold: q.gold,
            edge_type: q.edge_type(),
        })
        .collect();
    Ok(score_outcomes(&outcomes))
}

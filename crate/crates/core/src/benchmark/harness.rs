//! Retrieve, render, complete, parse, score.
//!
//! Outputs: `metrics.json` ([`BenchmarkMetrics`]) and `responses.jsonl`,
//! one [`ResponseRecord`] per query in qid order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{Dataset, EdgeType, RelationId};
use crate::retrieval::{FilterConfig, HistoryIndex, RelationQuery};

use super::metrics::{score_outcomes, BenchmarkMetrics, Outcome};
use super::parser::{parse_response, MatchedBy, ParsedAnswer};
use super::provider::{CompletionRequest, Provider, ProviderError};
use super::render::{render_prompt_with, Mode, RenderOptions};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub filters: FilterConfig,
    pub h: usize,
    pub render: RenderOptions,
    /// Maximum in-flight provider requests.
    pub workers: usize,
    /// Extra attempts after a failed request.
    pub retries: u32,
}

impl BenchConfig {
    pub fn new(filters: FilterConfig, h: usize, mode: Mode) -> Self {
        Self {
            filters,
            h,
            render: RenderOptions::new(mode),
            workers: 4,
            retries: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub qid: u64,
    pub prompt_sha256: String,
    /// `None` when every attempt failed.
    pub raw: Option<String>,
    pub parsed: Option<String>,
    pub parsed_id: Option<RelationId>,
    pub matched_by: Option<MatchedBy>,
    pub gold: String,
    pub gold_id: RelationId,
    pub correct: bool,
    pub edge_type: EdgeType,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub metrics: BenchmarkMetrics,
    pub log: Vec<ResponseRecord>,
}

fn complete_with_retries(p: &dyn Provider, req: &CompletionRequest, retries: u32) -> Result<String, ProviderError> {
    let mut last = None;
    for _ in 0..=retries {
        match p.complete(req) {
            Ok(text) => return Ok(text),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

pub fn run_benchmark(
    d: &Dataset,
    queries: &[RelationQuery],
    cfg: &BenchConfig,
    provider: &dyn Provider,
) -> Result<BenchmarkRun, BenchError> {
    let index = HistoryIndex::new(d);
    let v = d.vocab();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()?;
    let mut log: Vec<ResponseRecord> = pool.install(|| {
        queries
            .par_iter()
            .map(|q| {
                let hc = index.retrieve(q, cfg.filters, cfg.h);
                let prompt = render_prompt_with(q, &hc, v, cfg.render);
                let req = CompletionRequest {
                    qid: q.qid,
                    prompt: prompt.text,
                    max_tokens: prompt.max_tokens,
                };
                let prompt_sha256 = hex::encode(Sha256::digest(req.prompt.as_bytes()));
                let (raw, answer, error) = match complete_with_retries(provider, &req, cfg.retries) {
                    Ok(text) => {
                        let a = parse_response(&text, &prompt.candidates);
                        (Some(text), Some(a), None)
                    }
                    Err(e) => (None, None, Some(e.to_string())),
                };
                let parsed_id = answer.and_then(|a| a.prediction);
                ResponseRecord {
                    qid: q.qid,
                    prompt_sha256,
                    raw,
                    parsed: parsed_id.map(|r| v.relation_label(r).to_string()),
                    parsed_id,
                    matched_by: answer.map(|a| a.matched_by),
                    gold: v.relation_label(q.gold).to_string(),
                    gold_id: q.gold,
                    correct: parsed_id == Some(q.gold),
                    edge_type: q.edge_type(),
                    error,
                }
            })
            .collect()
    });
    log.sort_by_key(|r| r.qid);
    let outcomes: Vec<Outcome> = log
        .iter()
        .map(|r| Outcome {
            answer: r.matched_by.map(|m| ParsedAnswer {
                prediction: r.parsed_id,
                matched_by: m,
            }),
            gold: r.gold_id,
            edge_type: r.edge_type,
        })
        .collect();
    Ok(BenchmarkRun {
        metrics: score_outcomes(&outcomes),
        log,
    })
}

pub fn write_run(run: &BenchmarkRun, out_dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(out_dir)?;
    let mut m = serde_json::to_string_pretty(&run.metrics)?;
    m.push('\n');
    std::fs::write(out_dir.join("metrics.json"), m)?;
    let mut w = BufWriter::new(File::create(out_dir.join("responses.jsonl"))?);
    for r in &run.log {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

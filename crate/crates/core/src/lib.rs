//! Hyper-relational temporal knowledge generalized hypergraphs (HTKGH).
//!
//! Facts relate a non-empty set of actors to a possibly empty set of
//! recipients at a given day, with qualifier pairs attached. The crate
//! covers the data model, event-record ingestion, dataset statistics,
//! anonymized variants, forecasting-safe history retrieval, heuristic
//! forecasters, and an LLM relation-prediction benchmark harness.

pub mod model;
pub mod factfile;
pub mod ingest;
pub mod synth;
pub mod retrieval;
pub mod baselines;
pub mod stats;
pub mod anonymize;
pub mod export;
pub mod benchmark;

pub use model::{
    classify_edge_type, fact_primary_entities, from_htkg_quadruple, make_fact, validate_dataset,
    Dataset, EdgeType, EntityId, EntityKind, Fact, FactError, QualRelId, QualifierPair,
    RelationId, Timestamp, ValidationReport, Vocab,
};

//! Seeded country and relation shuffles.
//!
//! Ids are kept; only vocabulary labels change. An entity label
//! `"C (S)"` becomes `"perm(C) (S)"`, a bare country label `"C"` becomes
//! `"perm(C)"`. Location values are country entities, so they move in step
//! with actors and recipients. Context entities are never touched.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{entity_label, split_entity_label, Dataset, EntityId, EntityKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnonMode {
    /// Countries only.
    Entities,
    /// Countries and primary relations.
    All,
}

impl fmt::Display for AnonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AnonMode::Entities => "entities",
            AnonMode::All => "all",
        })
    }
}

impl FromStr for AnonMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "entities" => Ok(AnonMode::Entities),
            "all" => Ok(AnonMode::All),
            other => Err(format!("unknown anonymization mode {other:?} (entities|all)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum AnonError {
    #[error("map does not cover {kind} {label:?}")]
    UncoveredSymbol { kind: &'static str, label: String },
    #[error("derangement impossible over a single {0}")]
    NoDerangement(&'static str),
    #[error("relabeling produced duplicate label {0:?}")]
    Collision(String),
    #[error("map is not a bijection: {0}")]
    NotBijective(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("map json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Persisted as `{"seed":..,"mode":..,"countries":{..},"relations":{..}|null}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnonymizationMap {
    pub seed: u64,
    pub mode: AnonMode,
    #[serde(rename = "countries")]
    pub country_perm: BTreeMap<String, String>,
    #[serde(rename = "relations")]
    pub relation_perm: Option<BTreeMap<String, String>>,
}

impl AnonymizationMap {
    pub fn identity(d: &Dataset, mode: AnonMode) -> Self {
        let countries = dataset_countries(d);
        let relations = relation_labels(d);
        Self {
            seed: 0,
            mode,
            country_perm: countries.iter().map(|c| (c.clone(), c.clone())).collect(),
            relation_perm: (mode == AnonMode::All)
                .then(|| relations.iter().map(|r| (r.clone(), r.clone())).collect()),
        }
    }

    pub fn inverse(&self) -> Self {
        let swap = |m: &BTreeMap<String, String>| m.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        Self {
            seed: self.seed,
            mode: self.mode,
            country_perm: swap(&self.country_perm),
            relation_perm: self.relation_perm.as_ref().map(swap),
        }
    }

    /// Checks that each permutation maps its domain onto itself one to one,
    /// and that `relation_perm` is present exactly when `mode` is `all`.
    pub fn check(&self) -> Result<(), AnonError> {
        fn bijective(m: &BTreeMap<String, String>, what: &str) -> Result<(), AnonError> {
            let image: BTreeSet<&String> = m.values().collect();
            let domain: BTreeSet<&String> = m.keys().collect();
            if image != domain {
                return Err(AnonError::NotBijective(format!("{what} image differs from domain")));
            }
            Ok(())
        }
        bijective(&self.country_perm, "country")?;
        match (&self.relation_perm, self.mode) {
            (Some(r), AnonMode::All) => bijective(r, "relation"),
            (None, AnonMode::Entities) => Ok(()),
            _ => Err(AnonError::NotBijective("relation map presence does not match mode".into())),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), AnonError> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AnonError> {
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        m.check()?;
        Ok(m)
    }
}

/// Distinct countries behind country-kind entity labels, location values
/// included.
pub fn dataset_countries(d: &Dataset) -> BTreeSet<String> {
    let v = d.vocab();
    (0..v.num_entities() as u32)
        .map(EntityId)
        .filter(|&e| v.entity_kind(e) == Some(EntityKind::Country))
        .map(|e| split_entity_label(v.entity_label(e)).0.to_string())
        .collect()
}

fn relation_labels(d: &Dataset) -> BTreeSet<String> {
    d.vocab().relations.labels().iter().cloned().collect()
}

fn shuffled(
    domain: &BTreeSet<String>,
    rng: &mut ChaCha8Rng,
    derangement: bool,
    what: &'static str,
) -> Result<BTreeMap<String, String>, AnonError> {
    let keys: Vec<&String> = domain.iter().collect();
    if derangement && keys.len() == 1 {
        return Err(AnonError::NoDerangement(what));
    }
    let mut image = keys.clone();
    loop {
        image.shuffle(rng);
        if !derangement || keys.iter().zip(&image).all(|(a, b)| a != b) {
            break;
        }
    }
    Ok(keys
        .into_iter()
        .zip(image)
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect())
}

/// Seeded uniform permutations. With `derangement`, no symbol maps to itself.
pub fn build_maps(
    d: &Dataset,
    seed: u64,
    mode: AnonMode,
    derangement: bool,
) -> Result<AnonymizationMap, AnonError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let country_perm = shuffled(&dataset_countries(d), &mut rng, derangement, "country")?;
    let relation_perm = match mode {
        AnonMode::Entities => None,
        AnonMode::All => Some(shuffled(&relation_labels(d), &mut rng, derangement, "relation")?),
    };
    Ok(AnonymizationMap {
        seed,
        mode,
        country_perm,
        relation_perm,
    })
}

/// Returns a dataset with the same facts and relabeled vocabulary.
pub fn apply_anonymization(d: &Dataset, m: &AnonymizationMap) -> Result<Dataset, AnonError> {
    let mut vocab = d.vocab().clone();
    for c in dataset_countries(d) {
        if !m.country_perm.contains_key(&c) {
            return Err(AnonError::UncoveredSymbol {
                kind: "country",
                label: c,
            });
        }
    }
    let kinds: Vec<Option<EntityKind>> = (0..vocab.num_entities() as u32)
        .map(|i| vocab.entity_kind(EntityId(i)))
        .collect();
    vocab
        .entities
        .relabel(|id, label| {
            if kinds[id as usize] != Some(EntityKind::Country) {
                return label.to_string();
            }
            let (country, sector) = split_entity_label(label);
            entity_label(&m.country_perm[country], sector)
        })
        .map_err(AnonError::Collision)?;
    if let Some(rp) = &m.relation_perm {
        if let Some(missing) = vocab.relations.labels().iter().find(|l| !rp.contains_key(*l)) {
            return Err(AnonError::UncoveredSymbol {
                kind: "relation",
                label: missing.clone(),
            });
        }
        vocab
            .relations
            .relabel(|_, label| rp[label].clone())
            .map_err(AnonError::Collision)?;
    }
    let meta = format!("{} anon(seed={}, mode={})", d.meta, m.seed, m.mode);
    Ok(Dataset::new(d.facts().to_vec(), vocab, meta))
}

//! Seeded synthetic event datasets with planted, checkable structure.
//!
//! Two regimes:
//!
//! * `mixed` resembles a real event feed: per-entity relation preferences,
//!   recurring summit groups, a handful of repeating dyads/coalitions, and
//!   location/context qualifiers.
//! * `copy-chain` plants chains that repeat the same actors, recipients and
//!   relation every `period` days on entities no other fact touches, plus
//!   background noise on the remaining entities. With the entity filter on,
//!   the copy heuristic is right on every non-first chain occurrence.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    entity_label, Dataset, EdgeType, EntityId, EntityKind, Fact, QualifierPair, RelationId,
    Timestamp, Vocab,
};

/// PLOVER event types, used to name synthetic relations.
pub const EVENT_TYPES: [&str; 16] = [
    "agree", "consult", "support", "concede", "cooperate", "aid", "retreat", "request",
    "accuse", "reject", "threaten", "protest", "sanction", "mobilize", "coerce", "assault",
];

const SECTORS: [&str; 3] = ["GOV", "MIL", "CVL"];

const CONTEXTS: [&str; 10] = [
    "military", "economic", "diplomatic", "legislative", "humanitarian", "election",
    "terrorism", "trade", "human rights", "environment",
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regime {
    Mixed,
    CopyChain { period: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub entities: usize,
    pub relations: usize,
    pub facts: usize,
    pub seed: u64,
    #[serde(default = "default_regime")]
    pub regime: Regime,
    #[serde(default = "default_start")]
    pub start: Timestamp,
    /// Length of the covered period in days.
    #[serde(default = "default_days")]
    pub days: u32,
}

fn default_regime() -> Regime {
    Regime::Mixed
}

fn default_start() -> Timestamp {
    Timestamp::from_ymd(2018, 1, 1).expect("valid date")
}

fn default_days() -> u32 {
    6 * 365
}

impl SynthConfig {
    pub fn new(entities: usize, relations: usize, facts: usize, seed: u64, regime: Regime) -> Self {
        Self {
            entities,
            relations,
            facts,
            seed,
            regime,
            start: default_start(),
            days: default_days(),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::ConfigInvalid(m.to_string()));
        if self.facts == 0 {
            return bad("facts must be at least 1");
        }
        if self.relations == 0 {
            return bad("relations must be at least 1");
        }
        if self.days == 0 {
            return bad("days must be at least 1");
        }
        match self.regime {
            Regime::Mixed if self.entities < 2 => bad("mixed regime needs at least 2 entities"),
            Regime::CopyChain { period: 0 } => bad("copy-chain period must be at least 1"),
            Regime::CopyChain { .. } if self.entities < 6 => {
                bad("copy-chain regime needs at least 6 entities")
            }
            _ => Ok(()),
        }
    }
}

/// A fact planted so that the copy heuristic must return `relation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedQuery {
    pub seq: u64,
    pub relation: RelationId,
}

/// Ground truth recorded while generating.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// Shape chosen for each fact at generation time.
    pub edge_types: BTreeMap<EdgeType, usize>,
    pub planted_copy: Vec<PlantedQuery>,
    pub chains: usize,
    pub groups: usize,
}

fn relation_name(i: usize) -> String {
    let ty = EVENT_TYPES[i % EVENT_TYPES.len()];
    match i / EVENT_TYPES.len() {
        0 => ty.to_string(),
        k => format!("{ty} (mode{k})"),
    }
}

fn country_name(i: usize) -> String {
    format!("Country{i:03}")
}

struct World {
    vocab: Vocab,
    /// Bare country entity for each entity's country, used as location value.
    country_of: Vec<EntityId>,
    contexts: Vec<EntityId>,
    relations: Vec<RelationId>,
}

impl World {
    fn new(cfg: &SynthConfig) -> Self {
        let mut vocab = Vocab::new();
        let per_country = SECTORS.len() + 1;
        let mut ids = Vec::with_capacity(cfg.entities);
        for k in 0..cfg.entities {
            let country = country_name(k / per_country);
            let sector = match k % per_country {
                0 => None,
                s => Some(SECTORS[s - 1]),
            };
            ids.push(vocab.intern_entity(&entity_label(&country, sector), EntityKind::Country));
        }
        let country_of = (0..cfg.entities)
            .map(|k| {
                let bare = country_name(k / per_country);
                vocab.intern_entity(&bare, EntityKind::Country)
            })
            .collect();
        let relations = (0..cfg.relations)
            .map(|i| vocab.intern_relation(&relation_name(i)))
            .collect();
        let contexts = CONTEXTS
            .iter()
            .map(|c| vocab.intern_entity(c, EntityKind::Context))
            .collect();
        Self {
            vocab,
            country_of,
            contexts,
            relations,
        }
    }
}

fn sample_distinct(rng: &mut ChaCha8Rng, pool: &[EntityId], n: usize) -> Vec<EntityId> {
    index::sample(rng, pool.len(), n.min(pool.len()))
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

fn day_of(cfg: &SynthConfig, i: usize, n: usize) -> Timestamp {
    cfg.start
        .plus_days(((i as u64 * cfg.days as u64) / n.max(1) as u64) as i32)
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Dataset, SynthTruth), SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let world = World::new(cfg);
    let (facts, truth) = match cfg.regime {
        Regime::Mixed => mixed(cfg, &world, &mut rng),
        Regime::CopyChain { period } => copy_chain(cfg, period, &world, &mut rng),
    };
    let meta = format!(
        "synthetic seed={} regime={}",
        cfg.seed,
        serde_json::to_string(&cfg.regime).unwrap_or_default()
    );
    Ok((Dataset::new(facts, world.vocab, meta), truth))
}

struct Chain {
    actors: Vec<EntityId>,
    recipients: Vec<EntityId>,
    relation: RelationId,
    qualifiers: Vec<QualifierPair>,
    shape: EdgeType,
}

fn shape_of(actors: usize, recipients: usize) -> EdgeType {
    // Recorded from the sizes the generator asked for, kept separate from
    // the model's classifier so the two can be compared.
    if recipients == 0 {
        if actors == 2 {
            EdgeType::BidirectionalPair
        } else {
            EdgeType::Group
        }
    } else if actors == 1 && recipients == 1 {
        EdgeType::Standard
    } else {
        EdgeType::Set2Set
    }
}

fn random_qualifiers(
    rng: &mut ChaCha8Rng,
    world: &World,
    anchor: EntityId,
    location_prob: f64,
) -> Vec<QualifierPair> {
    let mut q = Vec::new();
    if rng.gen_bool(location_prob) {
        q.push(QualifierPair::new(
            world.vocab.location(),
            world.country_of[anchor.index()],
        ));
    }
    let n_ctx = rng.gen_range(0..=2);
    for c in sample_distinct(rng, &world.contexts, n_ctx) {
        q.push(QualifierPair::new(world.vocab.context(), c));
    }
    q
}

fn mixed(cfg: &SynthConfig, world: &World, rng: &mut ChaCha8Rng) -> (Vec<Fact>, SynthTruth) {
    let entities: Vec<EntityId> = (0..cfg.entities as u32).map(EntityId).collect();
    let favored: Vec<RelationId> = entities
        .iter()
        .map(|_| *world.relations.choose(rng).expect("relations >= 1"))
        .collect();

    let n_chains = (cfg.entities / 20).max(1);
    let chains: Vec<Chain> = (0..n_chains)
        .map(|_| {
            let a = rng.gen_range(1..=2usize).min(cfg.entities - 1);
            let r = rng.gen_range(1..=2usize).min(cfg.entities - a);
            let picked = sample_distinct(rng, &entities, a + r);
            let actors = picked[..a].to_vec();
            let recipients = picked[a..].to_vec();
            let relation = *world.relations.choose(rng).expect("relations >= 1");
            let qualifiers = random_qualifiers(rng, world, actors[0], 1.0);
            Chain {
                shape: shape_of(actors.len(), recipients.len()),
                actors,
                recipients,
                relation,
                qualifiers,
            }
        })
        .collect();

    let n_groups = if cfg.entities >= 3 { (cfg.entities / 25).max(1) } else { 0 };
    let groups: Vec<Chain> = (0..n_groups)
        .map(|_| {
            let size = rng.gen_range(3..=5usize).min(cfg.entities);
            let actors = sample_distinct(rng, &entities, size);
            let relation = favored[actors[0].index()];
            let qualifiers = random_qualifiers(rng, world, actors[0], 0.9);
            Chain {
                shape: shape_of(actors.len(), 0),
                actors,
                recipients: vec![],
                relation,
                qualifiers,
            }
        })
        .collect();

    let mut truth = SynthTruth {
        chains: chains.len(),
        groups: groups.len(),
        ..SynthTruth::default()
    };
    let mut facts = Vec::with_capacity(cfg.facts);
    for i in 0..cfg.facts {
        let t = day_of(cfg, i, cfg.facts);
        let roll: f64 = rng.gen();
        let (actors, recipients, relation, qualifiers, shape) = if roll < 0.15 {
            let c = &chains[rng.gen_range(0..chains.len())];
            (c.actors.clone(), c.recipients.clone(), c.relation, c.qualifiers.clone(), c.shape)
        } else if roll < 0.25 && !groups.is_empty() {
            let g = &groups[rng.gen_range(0..groups.len())];
            (g.actors.clone(), vec![], g.relation, g.qualifiers.clone(), g.shape)
        } else {
            let (a, r) = if roll < 0.30 {
                (2, 0)
            } else if rng.gen_bool(0.7) || cfg.entities < 3 {
                (1, 1)
            } else {
                let a = rng.gen_range(1..=3usize);
                let r = rng.gen_range(if a == 1 { 2 } else { 1 }..=3usize);
                (a, r)
            };
            let a = a.min(cfg.entities);
            let r = r.min(cfg.entities - a);
            let picked = sample_distinct(rng, &entities, a + r);
            let actors = picked[..a].to_vec();
            let recipients = picked[a..].to_vec();
            let relation = if rng.gen_bool(0.6) {
                favored[actors[0].index()]
            } else {
                *world.relations.choose(rng).expect("relations >= 1")
            };
            let qualifiers = random_qualifiers(rng, world, actors[0], 0.7);
            let shape = shape_of(actors.len(), recipients.len());
            (actors, recipients, relation, qualifiers, shape)
        };
        *truth.edge_types.entry(shape).or_default() += 1;
        facts.push(Fact {
            actors,
            relation,
            recipients,
            t,
            qualifiers,
            seq: i as u64,
        });
    }
    (facts, truth)
}

fn copy_chain(
    cfg: &SynthConfig,
    period: u32,
    world: &World,
    rng: &mut ChaCha8Rng,
) -> (Vec<Fact>, SynthTruth) {
    // Chains own the first half of the entity range exclusively; noise facts
    // only use the second half.
    let budget = cfg.entities / 2;
    let shapes = [(1usize, 1usize), (2, 1), (3, 0), (2, 2)];
    let mut chains = Vec::new();
    let mut next = 0usize;
    for c in 0.. {
        let (a, r) = shapes[c % shapes.len()];
        if next + a + r > budget {
            break;
        }
        let ids: Vec<EntityId> = (next..next + a + r).map(|k| EntityId(k as u32)).collect();
        next += a + r;
        let ctx = world.contexts[c % world.contexts.len()];
        chains.push(Chain {
            actors: ids[..a].to_vec(),
            recipients: ids[a..].to_vec(),
            relation: world.relations[c % world.relations.len()],
            qualifiers: vec![
                QualifierPair::new(world.vocab.location(), world.country_of[ids[0].index()]),
                QualifierPair::new(world.vocab.context(), ctx),
            ],
            shape: shape_of(a, r),
        });
    }
    let noise_pool: Vec<EntityId> = (budget..cfg.entities).map(|k| EntityId(k as u32)).collect();

    let n_chain = (cfg.facts / 2).max(1).min(cfg.facts);
    let n_noise = cfg.facts - n_chain;

    // occurrence j of chain c falls on day (c % period) + j * period
    let mut occurrences = Vec::with_capacity(n_chain);
    let mut j = 0u32;
    'outer: loop {
        for (c, _) in chains.iter().enumerate() {
            let day = (c as u32 % period) + j * period;
            occurrences.push((day, c, j));
        }
        j += 1;
        if occurrences.len() >= n_chain * 2 || chains.is_empty() {
            break 'outer;
        }
    }
    occurrences.sort();
    occurrences.truncate(n_chain);
    let last_day = occurrences.last().map(|o| o.0).unwrap_or(0);

    let mut truth = SynthTruth {
        chains: chains.len(),
        ..SynthTruth::default()
    };
    let mut facts = Vec::with_capacity(cfg.facts);
    for (day, c, j) in occurrences {
        let chain = &chains[c];
        let seq = facts.len() as u64;
        if j > 0 {
            truth.planted_copy.push(PlantedQuery {
                seq,
                relation: chain.relation,
            });
        }
        *truth.edge_types.entry(chain.shape).or_default() += 1;
        facts.push(Fact {
            actors: chain.actors.clone(),
            relation: chain.relation,
            recipients: chain.recipients.clone(),
            t: cfg.start.plus_days(day as i32),
            qualifiers: chain.qualifiers.clone(),
            seq,
        });
    }
    for i in 0..n_noise {
        let picked = sample_distinct(rng, &noise_pool, 2);
        let relation = *world.relations.choose(rng).expect("relations >= 1");
        let qualifiers = random_qualifiers(rng, world, picked[0], 0.5);
        let day = ((i as u64 * (last_day as u64 + 1)) / n_noise.max(1) as u64) as i32;
        *truth.edge_types.entry(EdgeType::Standard).or_default() += 1;
        facts.push(Fact {
            actors: vec![picked[0]],
            relation,
            recipients: vec![picked[1]],
            t: cfg.start.plus_days(day),
            qualifiers,
            seq: facts.len() as u64,
        });
    }
    (facts, truth)
}

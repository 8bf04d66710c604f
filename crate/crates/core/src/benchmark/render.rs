//! Fact lines and prompt assembly.
//!
//! A fact renders as one line:
//!
//! ```text
//! time: 2022-02-24 | actors: [US, UK] | relation: sanction | recipients: [Russia, Belarus] | qualifiers: [location: Russia]
//! ```
//!
//! Query facts show `relation: ?`. Candidates are listed `1) label` through
//! `N) label`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{EntityId, Fact, QualifierPair, RelationId, Timestamp, Vocab};
use crate::retrieval::{HistoryContext, RelationQuery};

pub const NONTHINKING_TEMPLATE: &str = include_str!("../../assets/prompt_nonthinking.txt");
pub const THINKING_TEMPLATE: &str = include_str!("../../assets/prompt_thinking.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    NonThinking,
    Thinking,
}

impl Mode {
    pub fn default_max_tokens(self) -> u32 {
        match self {
            Mode::NonThinking => 14,
            Mode::Thinking => 16384,
        }
    }

    /// Template text without the asset file's trailing newline.
    pub fn template(self) -> &'static str {
        let t = match self {
            Mode::NonThinking => NONTHINKING_TEMPLATE,
            Mode::Thinking => THINKING_TEMPLATE,
        };
        t.strip_suffix('\n').unwrap_or(t)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::NonThinking => "nonthinking",
            Mode::Thinking => "thinking",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "nonthinking" => Ok(Mode::NonThinking),
            "thinking" => Ok(Mode::Thinking),
            other => Err(format!("unknown mode {other:?} (nonthinking|thinking)")),
        }
    }
}

/// Candidate relations in display order. `ids[i]` carries `labels[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidates {
    pub ids: Vec<RelationId>,
    pub labels: Vec<String>,
}

impl Candidates {
    pub fn in_id_order(v: &Vocab) -> Self {
        Self {
            ids: v.relation_ids().collect(),
            labels: v.relations.labels().to_vec(),
        }
    }

    pub fn shuffled(v: &Vocab, seed: u64) -> Self {
        let mut ids: Vec<RelationId> = v.relation_ids().collect();
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let labels = ids.iter().map(|&r| v.relation_label(r).to_string()).collect();
        Self { ids, labels }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn numbered(&self) -> String {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| format!("{}) {l}", i + 1))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub qid: u64,
    pub text: String,
    pub candidates: Candidates,
    pub mode: Mode,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub mode: Mode,
    /// Overrides the mode's default.
    pub max_tokens: Option<u32>,
    /// Seed for a per-query candidate shuffle. `None` keeps id order.
    pub shuffle_candidates: Option<u64>,
}

impl RenderOptions {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            max_tokens: None,
            shuffle_candidates: None,
        }
    }
}

fn entity_list(v: &Vocab, ids: &[EntityId]) -> String {
    let labels: Vec<&str> = ids.iter().map(|&e| v.entity_label(e)).collect();
    format!("[{}]", labels.join(", "))
}

fn render_line(
    v: &Vocab,
    t: Timestamp,
    actors: &[EntityId],
    relation: &str,
    recipients: &[EntityId],
    qualifiers: &[QualifierPair],
) -> String {
    let quals: Vec<String> = qualifiers
        .iter()
        .map(|q| format!("{}: {}", v.qualifier_label(q.qrel), v.entity_label(q.value)))
        .collect();
    format!(
        "time: {} | actors: {} | relation: {relation} | recipients: {} | qualifiers: [{}]",
        t.iso(),
        entity_list(v, actors),
        entity_list(v, recipients),
        quals.join(", ")
    )
}

pub fn render_fact(f: &Fact, v: &Vocab) -> String {
    render_line(v, f.t, &f.actors, v.relation_label(f.relation), &f.recipients, &f.qualifiers)
}

pub fn render_query(q: &RelationQuery, v: &Vocab) -> String {
    render_line(v, q.t, &q.actors, "?", &q.recipients, &q.qualifiers)
}

/// Substitutes `{name}` placeholders in one pass, so inserted text is never
/// rescanned.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len() + values.iter().map(|v| v.1.len()).sum::<usize>());
    let mut rest = template;
    'scan: while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open..];
        for (name, value) in values {
            let key = format!("{{{name}}}");
            if tail.starts_with(&key) {
                out.push_str(value);
                rest = &tail[key.len()..];
                continue 'scan;
            }
        }
        out.push('{');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}

pub fn render_prompt(q: &RelationQuery, hc: &HistoryContext, v: &Vocab, mode: Mode) -> PromptInstance {
    render_prompt_with(q, hc, v, RenderOptions::new(mode))
}

pub fn render_prompt_with(q: &RelationQuery, hc: &HistoryContext, v: &Vocab, opts: RenderOptions) -> PromptInstance {
    let context: Vec<String> = hc.facts.iter().map(|f| render_fact(f, v)).collect();
    let candidates = match opts.shuffle_candidates {
        None => Candidates::in_id_order(v),
        Some(seed) => Candidates::shuffled(v, seed ^ q.qid.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    };
    let text = fill(
        opts.mode.template(),
        &[
            ("context_samples", &context.join("\n")),
            ("fact", &render_query(q, v)),
            ("candidates", &candidates.numbered()),
        ],
    );
    PromptInstance {
        qid: q.qid,
        text,
        candidates,
        mode: opts.mode,
        max_tokens: opts.max_tokens.unwrap_or(opts.mode.default_max_tokens()),
    }
}

/// The rendered context lines of a prompt, or `None` if the prompt does not
/// follow either template.
pub fn context_lines(prompt: &str) -> Option<Vec<&str>> {
    let start = "Here are the historical events to analyze:\n";
    let end = "\n\nHere is the new event to classify:";
    let from = prompt.find(start)? + start.len();
    let to = from + prompt[from..].find(end)?;
    Some(prompt[from..to].lines().filter(|l| !l.is_empty()).collect())
}

/// Field values of a rendered fact line, keyed by field name.
pub fn line_field<'a>(line: &'a str, name: &str) -> Option<&'a str> {
    line.split(" | ")
        .find_map(|part| part.strip_prefix(name).and_then(|p| p.strip_prefix(": ")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_fact, Dataset, EntityKind};
    use crate::synth::{generate_synthetic, Regime, SynthConfig};
    use std::collections::HashSet;

    fn sanction() -> (Fact, Vocab) {
        let mut v = Vocab::new();
        let us = v.intern_entity("US", EntityKind::Country);
        let uk = v.intern_entity("UK", EntityKind::Country);
        let ru = v.intern_entity("Russia", EntityKind::Country);
        let by = v.intern_entity("Belarus", EntityKind::Country);
        let r = v.intern_relation("sanction");
        let t = Timestamp::from_ymd(2022, 2, 24).unwrap();
        let f = make_fact([us, uk], r, [ru, by], t, vec![QualifierPair::new(v.location(), ru)], 0, None).unwrap();
        (f, v)
    }

    fn history(facts: Vec<Fact>, q: RelationQuery) -> HistoryContext {
        HistoryContext { facts, query: q, h: 100 }
    }

    #[test]
    fn sanction_line() {
        let (f, v) = sanction();
        assert_eq!(
            render_fact(&f, &v),
            "time: 2022-02-24 | actors: [US, UK] | relation: sanction | recipients: [Russia, Belarus] | qualifiers: [location: Russia]"
        );
        let q = RelationQuery::from_fact(0, &f);
        assert!(render_query(&q, &v).contains("relation: ? |"));
    }

    #[test]
    fn empty_fields() {
        let (_, mut v) = sanction();
        let p = v.intern_relation("protest (strike)");
        let f = make_fact([EntityId(0), EntityId(1)], p, [], Timestamp::from_day(0), vec![], 1, None).unwrap();
        let line = render_fact(&f, &v);
        assert!(line.ends_with("| recipients: [] | qualifiers: []"));
        assert_eq!(line_field(&line, "relation"), Some("protest (strike)"));
    }

    #[test]
    fn nonthinking_prompt_shape() {
        let (f, v) = sanction();
        let q = RelationQuery::from_fact(5, &f);
        let p = render_prompt(&q, &history(vec![], q.clone()), &v, Mode::NonThinking);
        assert!(p.text.contains("Output format example:\nprotest (strike)\n"));
        assert!(p.text.ends_with("\n1) sanction\n\nThe most likely relation is:"));
        assert_eq!(p.max_tokens, 14);
        assert_eq!(context_lines(&p.text), Some(vec![]));
        assert!(!p.text.contains("{fact}"));
    }

    #[test]
    fn thinking_prompt_shape() {
        let (f, v) = sanction();
        let q = RelationQuery::from_fact(0, &f);
        let p = render_prompt(&q, &history(vec![], q.clone()), &v, Mode::Thinking);
        assert!(!p.text.contains("Output format example"));
        assert!(p.text.ends_with("Here are the candidate relations:\n1) sanction"));
        assert_eq!(p.max_tokens, 16384);
    }

    #[test]
    fn context_lines_count_and_order() {
        let (f, v) = sanction();
        let older = Fact { t: f.t.plus_days(-10), seq: 1, ..f.clone() };
        let newer = Fact { t: f.t.plus_days(-1), seq: 2, ..f.clone() };
        let q = RelationQuery::from_fact(0, &f);
        let p = render_prompt(&q, &history(vec![older.clone(), newer.clone()], q.clone()), &v, Mode::NonThinking);
        let lines = context_lines(&p.text).unwrap();
        assert_eq!(lines, vec![render_fact(&older, &v), render_fact(&newer, &v)]);
    }

    #[test]
    fn placeholders_in_labels_stay_literal() {
        let mut v = Vocab::new();
        let a = v.intern_entity("{fact}", EntityKind::Country);
        let b = v.intern_entity("{candidates}", EntityKind::Country);
        let r = v.intern_relation("x");
        let f = make_fact([a], r, [b], Timestamp::from_day(0), vec![], 0, None).unwrap();
        let q = RelationQuery::from_fact(0, &f);
        let hc = history(vec![f.clone()], q.clone());
        let p = render_prompt(&q, &hc, &v, Mode::NonThinking);
        assert_eq!(p.text.matches("{fact}").count(), 2);
    }

    #[test]
    fn deterministic_and_shuffle() {
        let (d, _) = generate_synthetic(&SynthConfig::new(60, 16, 400, 2, Regime::Mixed)).unwrap();
        let q = RelationQuery::from_fact(9, d.facts().last().unwrap());
        let hc = history(d.facts()[..20].to_vec(), q.clone());
        let a = render_prompt(&q, &hc, d.vocab(), Mode::NonThinking);
        assert_eq!(a, render_prompt(&q, &hc, d.vocab(), Mode::NonThinking));
        let mut opts = RenderOptions::new(Mode::NonThinking);
        opts.shuffle_candidates = Some(3);
        let s = render_prompt_with(&q, &hc, d.vocab(), opts);
        assert_ne!(s.candidates.ids, a.candidates.ids);
        let mut sorted = s.candidates.ids.clone();
        sorted.sort();
        assert_eq!(sorted, a.candidates.ids);
        for (id, l) in s.candidates.ids.iter().zip(&s.candidates.labels) {
            assert_eq!(d.vocab().relation_label(*id), l);
        }
    }

    #[test]
    fn rendering_is_injective_on_synthetic_facts() {
        let (d, _): (Dataset, _) = generate_synthetic(&SynthConfig::new(150, 16, 5000, 13, Regime::Mixed)).unwrap();
        let mut seen_facts = HashSet::new();
        let mut seen_lines = HashSet::new();
        for f in d.facts() {
            let key = (f.actors.clone(), f.relation, f.recipients.clone(), f.t, f.qualifiers.clone());
            if seen_facts.insert(key) {
                assert!(seen_lines.insert(render_fact(f, d.vocab())), "collision: {f:?}");
            }
        }
    }
}

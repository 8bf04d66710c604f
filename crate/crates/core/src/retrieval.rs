//! Forecasting-safe history retrieval.
//!
//! Every operation here only looks at facts whose day is strictly before
//! the query's day. Within that past, facts are filtered by shared primary
//! entities, matching location, and shared context, then either the `h`
//! most recent are taken ([`HistoryIndex::retrieve`]) or they are bucketed
//! into fixed-length lookback windows ([`HistoryIndex::windows`]).
//!
//! "Most recent" follows dataset order: later day first, then larger
//! ingestion `seq` first among facts of the same day.

use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use crate::model::{Dataset, EntityId, Fact, QualRelId, QualifierPair, RelationId, Timestamp};

/// A relation-prediction instance: a fact with its relation hidden.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationQuery {
    pub qid: u64,
    pub actors: Vec<EntityId>,
    pub recipients: Vec<EntityId>,
    pub qualifiers: Vec<QualifierPair>,
    pub t: Timestamp,
    pub gold: RelationId,
}

impl RelationQuery {
    pub fn from_fact(qid: u64, f: &Fact) -> Self {
        Self {
            qid,
            actors: f.actors.clone(),
            recipients: f.recipients.clone(),
            qualifiers: f.qualifiers.clone(),
            t: f.t,
            gold: f.relation,
        }
    }

    pub fn primary_entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.actors.iter().chain(&self.recipients).copied()
    }

    pub fn qualifier_values(&self, qrel: QualRelId) -> impl Iterator<Item = EntityId> + '_ {
        self.qualifiers
            .iter()
            .filter(move |q| q.qrel == qrel)
            .map(|q| q.value)
    }

    /// The query seen as a fact carrying its gold relation.
    pub fn to_fact(&self, seq: u64) -> Fact {
        Fact {
            actors: self.actors.clone(),
            relation: self.gold,
            recipients: self.recipients.clone(),
            t: self.t,
            qualifiers: self.qualifiers.clone(),
            seq,
        }
    }

    pub fn edge_type(&self) -> crate::model::EdgeType {
        crate::model::classify_edge_type(&self.to_fact(0))
    }
}

/// Which history filters are switched on. All eight combinations are legal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FilterConfig {
    pub entity: bool,
    pub location: bool,
    pub context: bool,
}

impl FilterConfig {
    pub const NONE: FilterConfig = FilterConfig {
        entity: false,
        location: false,
        context: false,
    };
    pub const ALL: FilterConfig = FilterConfig {
        entity: true,
        location: true,
        context: true,
    };

    pub fn all_combinations() -> [FilterConfig; 8] {
        std::array::from_fn(|i| FilterConfig {
            entity: i & 4 != 0,
            location: i & 2 != 0,
            context: i & 1 != 0,
        })
    }

    /// True when every filter enabled in `other` is enabled here too.
    pub fn contains(self, other: FilterConfig) -> bool {
        (self.entity || !other.entity)
            && (self.location || !other.location)
            && (self.context || !other.context)
    }

    /// Parses the `e,l,c` spelling; the empty string means all off.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut c = FilterConfig::NONE;
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "e" | "entity" => c.entity = true,
                "l" | "location" => c.location = true,
                "c" | "context" => c.context = true,
                other => return Err(format!("unknown filter {other:?} (expected e, l or c)")),
            }
        }
        Ok(c)
    }

    pub fn spelling(self) -> String {
        let mut parts = Vec::new();
        if self.entity {
            parts.push("e");
        }
        if self.location {
            parts.push("l");
        }
        if self.context {
            parts.push("c");
        }
        parts.join(",")
    }
}

/// Qualifier relation ids the filters look at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QualifierRoles {
    pub location: QualRelId,
    pub context: QualRelId,
}

impl QualifierRoles {
    pub fn of(d: &Dataset) -> Self {
        Self {
            location: d.vocab().location(),
            context: d.vocab().context(),
        }
    }
}

/// Filter predicate. A filter whose query-side field is missing (no
/// location, no contexts) lets every fact through. With the location filter
/// on and a query location present, a fact without a location is rejected;
/// multiple location qualifiers match if any of them agrees.
pub fn passes_filters(f: &Fact, q: &RelationQuery, c: FilterConfig, roles: QualifierRoles) -> bool {
    if c.entity {
        let shared = q
            .primary_entities()
            .any(|e| f.actors.contains(&e) || f.recipients.contains(&e));
        if !shared {
            return false;
        }
    }
    if c.location {
        let mut q_locs = q.qualifier_values(roles.location).peekable();
        if q_locs.peek().is_some() {
            let q_locs: Vec<EntityId> = q_locs.collect();
            if !f.qualifier_values(roles.location).any(|l| q_locs.contains(&l)) {
                return false;
            }
        }
    }
    if c.context {
        let q_ctx: Vec<EntityId> = q.qualifier_values(roles.context).collect();
        if !q_ctx.is_empty() && !f.qualifier_values(roles.context).any(|x| q_ctx.contains(&x)) {
            return false;
        }
    }
    true
}

/// Retrieved history: oldest first, every fact strictly before the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryContext {
    pub facts: Vec<Fact>,
    pub query: RelationQuery,
    pub h: usize,
}

/// Facts bucketed by lookback window: `windows[j - 1]` holds the passing
/// facts with `t_q - j*delta <= t < t_q - (j-1)*delta`, oldest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowedExample {
    pub query: RelationQuery,
    pub label: RelationId,
    pub delta: u32,
    pub windows: Vec<Vec<Fact>>,
}

/// 1-based window index for a fact at `day`, or `None` when the fact is not
/// in `[t_q - count*delta, t_q)`.
pub fn window_of(query_day: i32, day: i32, delta: u32, count: usize) -> Option<usize> {
    if day >= query_day || delta == 0 {
        return None;
    }
    let j = ((query_day - day - 1) / delta as i32) as usize + 1;
    (j <= count).then_some(j)
}

/// Postings lists over a dataset: for every entity, location value and
/// context value, the positions of the facts that mention it, ascending.
pub struct HistoryIndex<'a> {
    d: &'a Dataset,
    roles: QualifierRoles,
    by_entity: Vec<Vec<u32>>,
    by_location: HashMap<EntityId, Vec<u32>>,
    by_context: HashMap<EntityId, Vec<u32>>,
}

impl<'a> HistoryIndex<'a> {
    pub fn new(d: &'a Dataset) -> Self {
        let roles = QualifierRoles::of(d);
        let mut by_entity = vec![Vec::new(); d.vocab().num_entities()];
        let mut by_location: HashMap<EntityId, Vec<u32>> = HashMap::new();
        let mut by_context: HashMap<EntityId, Vec<u32>> = HashMap::new();
        let push = |list: &mut Vec<u32>, pos: u32| {
            if list.last() != Some(&pos) {
                list.push(pos);
            }
        };
        for (pos, f) in d.facts().iter().enumerate() {
            let pos = pos as u32;
            for e in f.actors.iter().chain(&f.recipients) {
                if e.index() >= by_entity.len() {
                    by_entity.resize(e.index() + 1, Vec::new());
                }
                push(&mut by_entity[e.index()], pos);
            }
            for l in f.qualifier_values(roles.location) {
                push(by_location.entry(l).or_default(), pos);
            }
            for x in f.qualifier_values(roles.context) {
                push(by_context.entry(x).or_default(), pos);
            }
        }
        Self {
            d,
            roles,
            by_entity,
            by_location,
            by_context,
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.d
    }

    pub fn roles(&self) -> QualifierRoles {
        self.roles
    }

    /// Positions of candidate facts before `cutoff`, newest first, drawn
    /// from the most selective postings available for `c`. Candidates still
    /// need the full filter check.
    fn candidates<'s>(
        &'s self,
        q: &RelationQuery,
        c: FilterConfig,
        cutoff: usize,
    ) -> Box<dyn Iterator<Item = usize> + 's> {
        let empty: &[u32] = &[];
        let lists: Option<Vec<&[u32]>> = if c.entity {
            Some(
                q.primary_entities()
                    .map(|e| self.by_entity.get(e.index()).map_or(empty, Vec::as_slice))
                    .collect(),
            )
        } else if c.location && q.qualifier_values(self.roles.location).next().is_some() {
            Some(
                q.qualifier_values(self.roles.location)
                    .map(|l| self.by_location.get(&l).map_or(empty, Vec::as_slice))
                    .collect(),
            )
        } else if c.context && q.qualifier_values(self.roles.context).next().is_some() {
            Some(
                q.qualifier_values(self.roles.context)
                    .map(|x| self.by_context.get(&x).map_or(empty, Vec::as_slice))
                    .collect(),
            )
        } else {
            None
        };
        match lists {
            None => Box::new((0..cutoff).rev()),
            Some(lists) => Box::new(MergeDesc::new(lists, cutoff as u32).map(|p| p as usize)),
        }
    }

    fn cutoff(&self, day: i32) -> usize {
        self.d.facts().partition_point(|f| f.t.day() < day)
    }

    pub fn retrieve(&self, q: &RelationQuery, c: FilterConfig, h: usize) -> HistoryContext {
        let facts = self.d.facts();
        let mut picked: Vec<Fact> = Vec::with_capacity(h.min(1024));
        if h > 0 {
            for pos in self.candidates(q, c, self.cutoff(q.t.day())) {
                let f = &facts[pos];
                if passes_filters(f, q, c, self.roles) {
                    picked.push(f.clone());
                    if picked.len() == h {
                        break;
                    }
                }
            }
        }
        picked.reverse();
        HistoryContext {
            facts: picked,
            query: q.clone(),
            h,
        }
    }

    pub fn windows(
        &self,
        q: &RelationQuery,
        delta: u32,
        count: usize,
        c: FilterConfig,
    ) -> WindowedExample {
        assert!(delta >= 1 && count >= 1, "window length and count must be positive");
        let facts = self.d.facts();
        let qd = q.t.day();
        let lo = qd as i64 - delta as i64 * count as i64;
        let mut windows: Vec<Vec<Fact>> = vec![Vec::new(); count];
        for pos in self.candidates(q, c, self.cutoff(qd)) {
            let f = &facts[pos];
            if (f.t.day() as i64) < lo {
                break;
            }
            if !passes_filters(f, q, c, self.roles) {
                continue;
            }
            if let Some(j) = window_of(qd, f.t.day(), delta, count) {
                windows[j - 1].push(f.clone());
            }
        }
        for w in &mut windows {
            w.reverse();
        }
        WindowedExample {
            query: q.clone(),
            label: q.gold,
            delta,
            windows,
        }
    }
}

/// Descending k-way merge over ascending postings lists, restricted to
/// positions below `cutoff`, with duplicates removed.
struct MergeDesc<'s> {
    lists: Vec<&'s [u32]>,
    heap: BinaryHeap<(u32, usize)>,
    last: Option<u32>,
}

impl<'s> MergeDesc<'s> {
    fn new(lists: Vec<&'s [u32]>, cutoff: u32) -> Self {
        let lists: Vec<&[u32]> = lists
            .into_iter()
            .map(|l| &l[..l.partition_point(|&p| p < cutoff)])
            .collect();
        let heap = lists
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.last().map(|&p| (p, i)))
            .collect();
        Self {
            lists,
            heap,
            last: None,
        }
    }
}

impl Iterator for MergeDesc<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        while let Some((pos, i)) = self.heap.pop() {
            let list = &mut self.lists[i];
            *list = &list[..list.len() - 1];
            if let Some(&p) = list.last() {
                self.heap.push((p, i));
            }
            if self.last != Some(pos) {
                self.last = Some(pos);
                return Some(pos);
            }
        }
        None
    }
}

/// Convenience wrapper that builds an index for a single lookup. Prefer
/// [`HistoryIndex`] when answering many queries.
pub fn retrieve_history(d: &Dataset, q: &RelationQuery, c: FilterConfig, h: usize) -> HistoryContext {
    HistoryIndex::new(d).retrieve(q, c, h)
}

pub fn partition_windows(
    d: &Dataset,
    q: &RelationQuery,
    delta: u32,
    count: usize,
    c: FilterConfig,
) -> WindowedExample {
    HistoryIndex::new(d).windows(q, delta, count, c)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind")]
pub enum Leak {
    /// A training fact is not strictly before every test query.
    TrainNotBeforeTest {
        seq: u64,
        day: Timestamp,
        first_test_day: Timestamp,
    },
    /// A context fact is not strictly before its query.
    HistoryNotBefore {
        qid: u64,
        seq: u64,
        day: Timestamp,
        query_day: Timestamp,
    },
    /// A window fact is not strictly before its query, or sits in the
    /// wrong window.
    WindowMisplaced {
        qid: u64,
        window: usize,
        seq: u64,
        day: Timestamp,
        query_day: Timestamp,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ForecastingReport {
    pub violations: Vec<Leak>,
}

impl ForecastingReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn check_history(&mut self, hc: &HistoryContext) {
        for f in &hc.facts {
            if f.t >= hc.query.t {
                self.violations.push(Leak::HistoryNotBefore {
                    qid: hc.query.qid,
                    seq: f.seq,
                    day: f.t,
                    query_day: hc.query.t,
                });
            }
        }
    }

    pub fn check_windows(&mut self, w: &WindowedExample) {
        let count = w.windows.len();
        for (i, facts) in w.windows.iter().enumerate() {
            for f in facts {
                if window_of(w.query.t.day(), f.t.day(), w.delta, count) != Some(i + 1) {
                    self.violations.push(Leak::WindowMisplaced {
                        qid: w.query.qid,
                        window: i + 1,
                        seq: f.seq,
                        day: f.t,
                        query_day: w.query.t,
                    });
                }
            }
        }
    }
}

/// Checks that every training fact precedes every test query.
pub fn validate_forecasting(train: &Dataset, test: &[RelationQuery]) -> ForecastingReport {
    let mut report = ForecastingReport::default();
    if let Some(first) = test.iter().map(|q| q.t).min() {
        for f in train.facts().iter().filter(|f| f.t >= first) {
            report.violations.push(Leak::TrainNotBeforeTest {
                seq: f.seq,
                day: f.t,
                first_test_day: first,
            });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_fact, EntityKind, Vocab};
    use crate::synth::{generate_synthetic, Regime, SynthConfig};
    use proptest::prelude::*;

    struct Fixture {
        d: Dataset,
        ids: HashMap<&'static str, EntityId>,
    }

    fn fixture() -> Fixture {
        let mut v = Vocab::new();
        let mut ids = HashMap::new();
        for name in ["Russia (GOV)", "Ukraine (GOV)", "US (GOV)", "UK (GOV)", "France"] {
            ids.insert(name, v.intern_entity(name, EntityKind::Country));
        }
        for ctx in ["military", "economic"] {
            ids.insert(ctx, v.intern_entity(ctx, EntityKind::Context));
        }
        let r = v.intern_relation("accuse");
        let loc = v.location();
        let ctx = v.context();
        let q = |k, e: EntityId| QualifierPair::new(k, e);
        let facts = vec![
            make_fact([ids["Russia (GOV)"]], r, [ids["Ukraine (GOV)"]], Timestamp::from_day(1),
                vec![q(loc, ids["France"]), q(ctx, ids["military"])], 0, None).unwrap(),
            make_fact([ids["US (GOV)"]], r, [ids["UK (GOV)"]], Timestamp::from_day(2),
                vec![q(ctx, ids["economic"])], 1, None).unwrap(),
            make_fact([ids["US (GOV)"]], r, [ids["Russia (GOV)"]], Timestamp::from_day(3),
                vec![], 2, None).unwrap(),
        ];
        Fixture {
            d: Dataset::new(facts, v, "fixture"),
            ids,
        }
    }

    fn query(actors: &[EntityId], recipients: &[EntityId], quals: Vec<QualifierPair>, day: i32) -> RelationQuery {
        RelationQuery {
            qid: 0,
            actors: actors.to_vec(),
            recipients: recipients.to_vec(),
            qualifiers: quals,
            t: Timestamp::from_day(day),
            gold: RelationId(0),
        }
    }

    #[test]
    fn filters_off_pass_everything() {
        let fx = fixture();
        let roles = QualifierRoles::of(&fx.d);
        let q = query(&[fx.ids["UK (GOV)"]], &[fx.ids["France"]], vec![], 9);
        assert!(fx.d.facts().iter().all(|f| passes_filters(f, &q, FilterConfig::NONE, roles)));
    }

    #[test]
    fn entity_filter_uses_intersection() {
        let fx = fixture();
        let roles = QualifierRoles::of(&fx.d);
        let c = FilterConfig { entity: true, ..FilterConfig::NONE };
        let q = query(&[fx.ids["Russia (GOV)"]], &[fx.ids["France"]], vec![], 9);
        let passing: Vec<u64> = fx.d.facts().iter().filter(|f| passes_filters(f, &q, c, roles)).map(|f| f.seq).collect();
        assert_eq!(passing, vec![0, 2]);
    }

    #[test]
    fn location_filter_is_vacuous_without_query_location() {
        let fx = fixture();
        let roles = QualifierRoles::of(&fx.d);
        let c = FilterConfig { location: true, ..FilterConfig::NONE };
        let q = query(&[fx.ids["US (GOV)"]], &[fx.ids["UK (GOV)"]], vec![], 9);
        assert!(fx.d.facts().iter().all(|f| passes_filters(f, &q, c, roles)));
        let with_loc = query(&[fx.ids["US (GOV)"]], &[fx.ids["UK (GOV)"]],
            vec![QualifierPair::new(roles.location, fx.ids["France"])], 9);
        let passing: Vec<u64> = fx.d.facts().iter().filter(|f| passes_filters(f, &with_loc, c, roles)).map(|f| f.seq).collect();
        // facts without a location are rejected
        assert_eq!(passing, vec![0]);
    }

    #[test]
    fn context_filter_needs_one_shared_context() {
        let fx = fixture();
        let roles = QualifierRoles::of(&fx.d);
        let c = FilterConfig { context: true, ..FilterConfig::NONE };
        let q = query(&[fx.ids["US (GOV)"]], &[fx.ids["UK (GOV)"]],
            vec![QualifierPair::new(roles.context, fx.ids["economic"]), QualifierPair::new(roles.context, fx.ids["military"])], 9);
        let passing: Vec<u64> = fx.d.facts().iter().filter(|f| passes_filters(f, &q, c, roles)).map(|f| f.seq).collect();
        assert_eq!(passing, vec![0, 1]);
    }

    #[test]
    fn strictly_before_and_recency() {
        let fx = fixture();
        let q = query(&[fx.ids["US (GOV)"]], &[fx.ids["UK (GOV)"]], vec![], 3);
        let hc = retrieve_history(&fx.d, &q, FilterConfig::NONE, 10);
        let days: Vec<i32> = hc.facts.iter().map(|f| f.t.day()).collect();
        assert_eq!(days, vec![1, 2]);
        let hc = retrieve_history(&fx.d, &q, FilterConfig::NONE, 1);
        assert_eq!(hc.facts.len(), 1);
        assert_eq!(hc.facts[0].t.day(), 2);
        let hc = retrieve_history(&fx.d, &q, FilterConfig::NONE, 0);
        assert!(hc.facts.is_empty());
    }

    #[test]
    fn same_day_ties_prefer_larger_seq() {
        let mut v = Vocab::new();
        let a = v.intern_entity("A", EntityKind::Country);
        let b = v.intern_entity("B", EntityKind::Country);
        let r = v.intern_relation("x");
        let facts = (0..4)
            .map(|s| make_fact([a], r, [b], Timestamp::from_day(5), vec![], s, None).unwrap())
            .collect();
        let d = Dataset::new(facts, v, "ties");
        let q = query(&[a], &[b], vec![], 6);
        let hc = retrieve_history(&d, &q, FilterConfig::ALL, 2);
        let seqs: Vec<u64> = hc.facts.iter().map(|f| f.seq).collect();
        assert_eq!(seqs, vec![2, 3]);
    }

    #[test]
    fn window_bounds() {
        // t_q = 10, delta = 1, H = 3
        assert_eq!(window_of(10, 9, 1, 3), Some(1));
        assert_eq!(window_of(10, 8, 1, 3), Some(2));
        assert_eq!(window_of(10, 7, 1, 3), Some(3));
        assert_eq!(window_of(10, 6, 1, 3), None);
        assert_eq!(window_of(10, 10, 1, 3), None);
        // delta = 2, H = 1: [8, 10)
        assert_eq!(window_of(10, 8, 2, 1), Some(1));
        assert_eq!(window_of(10, 9, 2, 1), Some(1));
        assert_eq!(window_of(10, 7, 2, 1), None);
    }

    #[test]
    fn windows_from_dataset() {
        let mut v = Vocab::new();
        let a = v.intern_entity("A", EntityKind::Country);
        let b = v.intern_entity("B", EntityKind::Country);
        let r = v.intern_relation("x");
        let facts = (6..=10)
            .map(|day| make_fact([a], r, [b], Timestamp::from_day(day), vec![], day as u64, None).unwrap())
            .collect();
        let d = Dataset::new(facts, v, "w");
        let q = query(&[a], &[b], vec![], 10);
        let w = partition_windows(&d, &q, 1, 3, FilterConfig::NONE);
        let days: Vec<Vec<i32>> = w.windows.iter().map(|w| w.iter().map(|f| f.t.day()).collect()).collect();
        assert_eq!(days, vec![vec![9], vec![8], vec![7]]);
        let w = partition_windows(&d, &q, 2, 1, FilterConfig::NONE);
        assert_eq!(w.windows[0].len(), 2);
        let far = query(&[a], &[b], vec![], 100);
        let w = partition_windows(&d, &far, 1, 4, FilterConfig::ALL);
        assert!(w.windows.iter().all(Vec::is_empty));
        let mut report = ForecastingReport::default();
        report.check_windows(&partition_windows(&d, &q, 2, 2, FilterConfig::ALL));
        assert!(report.is_clean());
    }

    #[test]
    fn forecasting_boundaries() {
        let mut v = Vocab::new();
        let a = v.intern_entity("A", EntityKind::Country);
        let b = v.intern_entity("B", EntityKind::Country);
        let r = v.intern_relation("x");
        let train = |day| Dataset::new(vec![make_fact([a], r, [b], Timestamp::from_day(day), vec![], 0, None).unwrap()], v.clone(), "t");
        let test = vec![query(&[a], &[b], vec![], 101)];
        assert!(validate_forecasting(&train(100), &test).is_clean());
        assert_eq!(validate_forecasting(&train(101), &test).violations.len(), 1);

        let hc = HistoryContext {
            facts: vec![make_fact([a], r, [b], Timestamp::from_day(101), vec![], 0, None).unwrap()],
            query: test[0].clone(),
            h: 1,
        };
        let mut report = ForecastingReport::default();
        report.check_history(&hc);
        assert!(matches!(report.violations[0], Leak::HistoryNotBefore { qid: 0, .. }));
    }

    #[test]
    fn filter_spelling() {
        assert_eq!(FilterConfig::parse("e,l,c").unwrap(), FilterConfig::ALL);
        assert_eq!(FilterConfig::parse("").unwrap(), FilterConfig::NONE);
        assert_eq!(FilterConfig::parse("l").unwrap().spelling(), "l");
        assert!(FilterConfig::parse("x").is_err());
        assert_eq!(FilterConfig::all_combinations().iter().collect::<std::collections::HashSet<_>>().len(), 8);
    }

    fn oracle(d: &Dataset, q: &RelationQuery, c: FilterConfig, h: usize) -> Vec<u64> {
        let roles = QualifierRoles::of(d);
        let mut past: Vec<&Fact> = d
            .facts()
            .iter()
            .filter(|f| f.t < q.t && passes_filters(f, q, c, roles))
            .collect();
        past.sort_by_key(|f| std::cmp::Reverse((f.t, f.seq)));
        let mut out: Vec<u64> = past.into_iter().take(h).map(|f| f.seq).collect();
        out.reverse();
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn index_matches_scan(seed in 0u64..1000, pick in 0usize..400, cfg in 0usize..8, h in 0usize..40) {
            let (d, _) = generate_synthetic(&SynthConfig { days: 60, ..SynthConfig::new(30, 6, 400, seed, Regime::Mixed) }).unwrap();
            let idx = HistoryIndex::new(&d);
            let q = RelationQuery::from_fact(0, &d.facts()[pick]);
            let c = FilterConfig::all_combinations()[cfg];
            let got: Vec<u64> = idx.retrieve(&q, c, h).facts.iter().map(|f| f.seq).collect();
            prop_assert_eq!(got, oracle(&d, &q, c, h));
        }
    }
}

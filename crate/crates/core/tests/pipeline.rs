//! Event records through ingestion, statistics, anonymization and the fact
//! file, with counts recomputed independently from the raw events.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use htkgh::anonymize::{apply_anonymization, build_maps, AnonMode};
use htkgh::factfile::{facts_to_string, read_facts_str};
use htkgh::ingest::{ingest, ColumnMap, InputFormat, RawEvent};
use htkgh::stats::{compute_stats, stats_from_csv, stats_to_csv};
use htkgh::{validate_dataset, EdgeType};

const COUNTRIES: [&str; 6] = ["Chile", "Peru", "Kenya", "Japan", "Norway", "Ghana"];
const SECTORS: [Option<&str>; 3] = [None, Some("GOV"), Some("MIL")];

fn party() -> impl Strategy<Value = (String, Option<String>)> {
    (0..COUNTRIES.len(), 0..SECTORS.len())
        .prop_map(|(c, s)| (COUNTRIES[c].to_string(), SECTORS[s].map(String::from)))
}

fn event() -> impl Strategy<Value = RawEvent> {
    (
        (2018i32..2023, 1u32..13, 1u32..29),
        0..5usize,
        prop::option::of(prop::sample::select(vec!["strike", "armed"])),
        prop::collection::vec(party(), 0..4),
        prop::collection::vec(party(), 0..4),
        prop::option::of(0..COUNTRIES.len()),
        prop::collection::vec(prop::sample::select(vec!["economic", "migration", "energy"]), 0..3),
    )
        .prop_map(|((y, m, d), r, mode, actors, recipients, loc, contexts)| RawEvent {
            date: format!("{y:04}-{m:02}-{d:02}"),
            event_type: format!("rel{r}"),
            event_mode: mode.map(String::from),
            actor_pairs: actors,
            recipient_pairs: recipients,
            location_country: loc.map(|i| COUNTRIES[i].to_string()),
            contexts: contexts.into_iter().map(String::from).collect(),
        })
}

fn label((c, s): &(String, Option<String>)) -> String {
    match s {
        Some(s) => format!("{c} ({s})"),
        None => c.clone(),
    }
}

/// Expected (actors, recipients) sizes of each kept event, in input order.
fn kept_shapes(events: &[RawEvent]) -> Vec<(usize, usize)> {
    events
        .iter()
        .map(|e| {
            let a: BTreeSet<String> = e.actor_pairs.iter().map(label).collect();
            let r: BTreeSet<String> = e.recipient_pairs.iter().map(label).collect();
            (a.len(), r.len())
        })
        .filter(|&(a, r)| a >= 1 && a + r > 1)
        .collect()
}

fn jsonl(events: &[RawEvent]) -> String {
    events.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ingest_keeps_exactly_the_valid_events(events in prop::collection::vec(event(), 0..60)) {
        let (d, report) = ingest(jsonl(&events).as_bytes(), InputFormat::Jsonl, &ColumnMap::default(), "p").unwrap();
        let shapes = kept_shapes(&events);
        prop_assert!(report.parse_issues.is_empty());
        prop_assert_eq!(d.len(), shapes.len());
        prop_assert_eq!(report.dropped_by_filter, events.len() - shapes.len());
        prop_assert!(validate_dataset(&d).is_valid());

        let mut want_types: BTreeMap<EdgeType, usize> = BTreeMap::new();
        let mut want_hist: BTreeMap<usize, usize> = BTreeMap::new();
        for &(a, r) in &shapes {
            let t = match (a, r) {
                (1, 1) => EdgeType::Standard,
                (2, 0) => EdgeType::BidirectionalPair,
                (_, 0) => EdgeType::Group,
                _ => EdgeType::Set2Set,
            };
            *want_types.entry(t).or_default() += 1;
            *want_hist.entry(a + r).or_default() += 1;
        }
        let s = compute_stats(&d, 5);
        prop_assert_eq!(s.facts, shapes.len());
        let got_types: BTreeMap<EdgeType, usize> =
            s.edge_type_counts.iter().filter(|(_, &n)| n > 0).map(|(&k, &n)| (k, n)).collect();
        prop_assert_eq!(got_types, want_types);
        prop_assert_eq!(&s.entity_count_histogram, &want_hist);
        prop_assert_eq!(stats_from_csv(&stats_to_csv(&s).unwrap()).unwrap().edge_type_counts, s.edge_type_counts.clone());
    }

    #[test]
    fn fact_file_and_anonymization_round_trip(events in prop::collection::vec(event(), 1..60), seed in any::<u64>()) {
        let (d, _) = ingest(jsonl(&events).as_bytes(), InputFormat::Jsonl, &ColumnMap::default(), "p").unwrap();
        let text = facts_to_string(&d);
        let back = read_facts_str(&text, "p").unwrap();
        prop_assert_eq!(facts_to_string(&back), text.clone());

        for mode in [AnonMode::Entities, AnonMode::All] {
            let Ok(m) = build_maps(&d, seed, mode, false) else { continue };
            let anon = apply_anonymization(&d, &m).unwrap();
            let (s0, s1) = (compute_stats(&d, 0), compute_stats(&anon, 0));
            prop_assert_eq!(&s0.edge_type_counts, &s1.edge_type_counts);
            prop_assert_eq!(&s0.per_year, &s1.per_year);
            prop_assert_eq!(&s0.entity_count_histogram, &s1.entity_count_histogram);
            prop_assert_eq!(s0.total_qualifiers, s1.total_qualifiers);
            // sectors survive, so every label keeps its "(SECTOR)" suffix
            for e in 0..d.vocab().num_entities() {
                let id = htkgh::EntityId(e as u32);
                let suffix = |l: &str| l.split_once(" (").map(|(_, s)| s.to_string());
                prop_assert_eq!(suffix(d.vocab().entity_label(id)), suffix(anon.vocab().entity_label(id)));
            }
            let restored = apply_anonymization(&anon, &m.inverse()).unwrap();
            prop_assert_eq!(facts_to_string(&restored), text.clone());
        }
    }
}

#[test]
fn csv_and_jsonl_agree() {
    let csv = "date,event_type,event_mode,actor_country,actor_sector,recipient_country,recipient_sector,location_country,contexts\n\
        2021-03-01,rel1,strike,Chile;Peru,GOV;,Kenya,MIL,Chile,economic;energy\n\
        2021-03-02,rel2,,Japan;Norway;Ghana,;;GOV,,,,\n";
    let events = vec![
        RawEvent {
            date: "2021-03-01".into(),
            event_type: "rel1".into(),
            event_mode: Some("strike".into()),
            actor_pairs: vec![("Chile".into(), Some("GOV".into())), ("Peru".into(), None)],
            recipient_pairs: vec![("Kenya".into(), Some("MIL".into()))],
            location_country: Some("Chile".into()),
            contexts: vec!["economic".into(), "energy".into()],
        },
        RawEvent {
            date: "2021-03-02".into(),
            event_type: "rel2".into(),
            event_mode: None,
            actor_pairs: vec![("Japan".into(), None), ("Norway".into(), None), ("Ghana".into(), Some("GOV".into()))],
            recipient_pairs: vec![],
            location_country: None,
            contexts: vec![],
        },
    ];
    let from_csv = ingest(csv.as_bytes(), InputFormat::Csv, &ColumnMap::default(), "x").unwrap().0;
    let from_json = ingest(jsonl(&events).as_bytes(), InputFormat::Jsonl, &ColumnMap::default(), "x").unwrap().0;
    assert_eq!(facts_to_string(&from_csv), facts_to_string(&from_json));
    assert_eq!(from_csv.facts()[0].edge_type(), EdgeType::Set2Set);
    assert_eq!(from_csv.facts()[1].edge_type(), EdgeType::Group);
}

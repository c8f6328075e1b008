use std::collections::BTreeMap;

use proptest::prelude::*;

use regwatch::extract::{EntityMention, EntityType, Source};
use regwatch::fuse::{DataModelInstance, Direction, Slots};
use regwatch::ingest::{InstitutionKind, InstitutionRecord};
use regwatch::kgraph::{Binding, Graph, NicRelations, NodeKey, Query, Term};
use regwatch::lexicon::Aliases;
use regwatch::relate::{Provenance, RelationTriple};
use regwatch::textcore::Span;

const WORDS: [&str; 8] = ["board", "bank", "asset threshold", "the fdic", "credit union", "12 CFR 1.1", "x", "Fed"];
const LABELS: [&str; 4] = ["raise", "lower", "comply_with", "index"];

fn instance(id: u8, slots: [Option<u8>; 4], triples: Vec<(u8, u8, u8)>) -> DataModelInstance {
    let word = |i: u8| WORDS[i as usize % WORDS.len()].to_string();
    let triples = triples
        .into_iter()
        .enumerate()
        .map(|(k, (s, l, o))| {
            let (s, o) = (word(s), word(o));
            let text = format!("{s} {o}");
            let subject = EntityMention::new(&text, Span::new(0, s.len()), k, None, Source::Srl);
            let object = EntityMention::new(&text, Span::new(s.len() + 1, text.len()), k, Some(EntityType::RegulatedEntity), Source::Srl);
            RelationTriple {
                subject,
                predicate_label: LABELS[l as usize % LABELS.len()].to_string(),
                predicate_span: Span::new(0, 0),
                object,
                article_id: format!("a{id}"),
                sentence_index: k,
                provenance: Provenance::ClauseSvo,
            }
        })
        .collect();
    DataModelInstance {
        article_id: format!("a{id}"),
        slots: Slots {
            authority: slots[0].map(word),
            regulated_entity: slots[1].map(word),
            threshold: slots[2].map(word),
            citation: slots[3].map(word),
            direction: if id % 2 == 0 { Direction::Increase } else { Direction::Unspecified },
            ..Slots::default()
        },
        triples,
        diagnostics: vec![],
    }
}

fn instances() -> impl Strategy<Value = Vec<DataModelInstance>> {
    prop::collection::vec(
        (any::<u8>(), prop::array::uniform4(prop::option::of(any::<u8>())), prop::collection::vec(any::<(u8, u8, u8)>(), 0..6)),
        0..8,
    )
    .prop_map(|v| v.into_iter().map(|(id, s, t)| instance(id % 16, s, t)).collect())
}

fn records() -> impl Strategy<Value = Vec<InstitutionRecord>> {
    prop::collection::vec((0usize..5, prop::option::of(0u32..30), prop::option::of(0u32..30)), 0..25).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (kind, parent, reg))| InstitutionRecord {
                rssd_id: i.to_string(),
                name: format!("{} institution {i}", WORDS[i % WORDS.len()]),
                kind: InstitutionKind::ALL[kind],
                parent_rssd_id: parent.map(|p| p.to_string()).filter(|p| *p != i.to_string()),
                properties: BTreeMap::from([
                    ("REG".to_string(), reg.map(|r| r.to_string()).unwrap_or_default()),
                    ("NOTE".to_string(), "tab-free \"quoted\" text".to_string()),
                ]),
            })
            .collect()
    })
}

fn build(recs: &[InstitutionRecord], insts: &[DataModelInstance]) -> Graph {
    let aliases = Aliases::builtin();
    let rel = NicRelations { regulator_column: Some("REG".into()), insurer_column: None };
    let mut g = Graph::new();
    g.ingest_nic(recs, &rel, &aliases);
    g.check_integrity().unwrap();
    for i in insts {
        g.merge_instance(i, &aliases);
        g.check_integrity().unwrap();
    }
    g
}

fn brute_force(g: &Graph, q: &Query) -> Vec<Binding> {
    let edges: Vec<(NodeKey, String, NodeKey)> = g.edges().map(|e| (e.from, e.label, e.to)).collect();
    let m = |t: &Term, v: &str| match t {
        Term::Any => true,
        Term::Is(x) => x == v,
    };
    let mut out = Vec::new();
    match q {
        Query::OneHop { subject, label, object } => {
            for e in &edges {
                if m(subject, e.0.as_str()) && m(label, &e.1) && m(object, e.2.as_str()) {
                    out.push(Binding(vec![e.clone()]));
                }
            }
        }
        Query::TwoHop { subject, first, second, object } => {
            for a in &edges {
                for b in &edges {
                    if a.2 == b.0 && m(subject, a.0.as_str()) && m(first, &a.1) && m(second, &b.1) && m(object, b.2.as_str()) {
                        out.push(Binding(vec![a.clone(), b.clone()]));
                    }
                }
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

fn term(g: &Graph, pick: Option<usize>, label: bool) -> Term {
    let Some(i) = pick else { return Term::Any };
    let edges: Vec<_> = g.edges().collect();
    if edges.is_empty() {
        return Term::Is("nothing".into());
    }
    let e = &edges[i % edges.len()];
    Term::Is(if label { e.label.clone() } else if i % 2 == 0 { e.from.to_string() } else { e.to.to_string() })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn persist_load_round_trip(recs in records(), insts in instances()) {
        let g = build(&recs, &insts);
        let text = g.to_file_string();
        let back = Graph::load(text.as_bytes()).unwrap();
        back.check_integrity().unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.to_file_string(), text);
    }

    #[test]
    fn merge_twice_is_identity(recs in records(), insts in instances()) {
        let mut g = build(&recs, &insts);
        let once = g.to_file_string();
        let aliases = Aliases::builtin();
        for i in &insts {
            let r = g.merge_instance(i, &aliases);
            prop_assert_eq!((r.nodes_added, r.edges_added), (0, 0));
        }
        prop_assert_eq!(g.to_file_string(), once);
    }

    #[test]
    fn one_hop_matches_scan(recs in records(), insts in instances(), s in prop::option::of(any::<usize>()), l in prop::option::of(any::<usize>()), o in prop::option::of(any::<usize>())) {
        let g = build(&recs, &insts);
        prop_assert!(g.edge_count() <= 1000);
        let q = Query::OneHop { subject: term(&g, s, false), label: term(&g, l, true), object: term(&g, o, false) };
        prop_assert_eq!(g.query_pattern(&q).unwrap(), brute_force(&g, &q));
    }

    #[test]
    fn two_hop_matches_scan(recs in records(), insts in instances(), s in any::<usize>(), l1 in any::<usize>(), l2 in prop::option::of(any::<usize>()), o in prop::option::of(any::<usize>())) {
        let g = build(&recs, &insts);
        let q = Query::TwoHop { subject: term(&g, Some(s), false), first: term(&g, Some(l1), true), second: term(&g, l2, true), object: term(&g, o, false) };
        match g.query_pattern(&q) {
            Ok(hits) => prop_assert_eq!(hits, brute_force(&g, &q)),
            Err(_) => prop_assert!(l2.is_none() && o.is_none()),
        }
    }
}

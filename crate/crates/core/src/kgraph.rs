//! Domain knowledge graph: nodes keyed by canonical surface or registry id,
//! labelled edges with accumulated provenance, instance and registry
//! merging, pattern queries and a line-oriented file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::EntityType;
use crate::fuse::{DataModelInstance, Direction};
use crate::ingest::{InstitutionKind, InstitutionRecord, RegulationSection};
use crate::lexicon::Aliases;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("EmptySurface")]
    EmptySurface,
    #[error("storage failure: {0}")]
    StorageFailure(#[from] std::io::Error),
    #[error("MalformedInput at line {line}: {message}")]
    MalformedInput { line: usize, message: String },
    #[error("UnsupportedPattern: {0}")]
    UnsupportedPattern(String),
}

/// Canonical node identity. Never empty and never contains tabs or line
/// breaks, so it can be written to the graph file unescaped.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey(String);

impl NodeKey {
    pub fn new(key: impl Into<String>) -> Option<Self> {
        let key = key.into();
        (!key.is_empty() && !key.contains(['\t', '\n', '\r'])).then_some(NodeKey(key))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn rssd(id: &str) -> Self {
        NodeKey(format!("rssd:{id}"))
    }

    pub fn event(article_id: &str) -> Self {
        NodeKey(format!("event:{article_id}"))
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

const LEADING_ARTICLES: [&str; 3] = ["the", "a", "an"];

/// Case-fold, collapse whitespace, drop one leading article and apply the
/// alias table.
pub fn canonicalize(surface: &str, aliases: &Aliases) -> Result<NodeKey, GraphError> {
    let folded = surface.to_lowercase();
    let mut words: Vec<&str> = folded.split_whitespace().collect();
    if words.is_empty() {
        return Err(GraphError::EmptySurface);
    }
    if words.len() > 1 && LEADING_ARTICLES.contains(&words[0]) {
        words.remove(0);
    }
    let key = words.join(" ");
    let key = aliases.resolve(&key).map_or(key.clone(), str::to_string);
    Ok(NodeKey(key))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeLabel {
    Entity(EntityType),
    Institution(InstitutionKind),
    Event,
    Untyped,
}

impl NodeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            NodeLabel::Entity(t) => t.as_str(),
            NodeLabel::Institution(k) => k.as_str(),
            NodeLabel::Event => "EVENT",
            NodeLabel::Untyped => "UNTYPED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "EVENT" => Some(NodeLabel::Event),
            "UNTYPED" => Some(NodeLabel::Untyped),
            _ => s
                .parse::<EntityType>()
                .map(NodeLabel::Entity)
                .ok()
                .or_else(|| InstitutionKind::from_name(s).map(NodeLabel::Institution)),
        }
    }
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub key: NodeKey,
    pub label: NodeLabel,
    pub properties: BTreeMap<String, String>,
}

pub const SURFACE_FORMS: &str = "surface_forms";
const CANONICAL_NAME: &str = "canonical_name";

/// Where an edge was observed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeProvenance {
    Article {
        article_id: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sentence_index: Option<usize>,
    },
    Registry(RegistryTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RegistryTag {
    #[serde(rename = "NIC")]
    Nic,
}

impl EdgeProvenance {
    pub const NIC: EdgeProvenance = EdgeProvenance::Registry(RegistryTag::Nic);
}

pub const REGULATED_BY: &str = "REGULATED_BY";
pub const BRANCH_OF: &str = "BRANCH_OF";
pub const HELD_BY: &str = "HELD_BY";
pub const INSURED_BY: &str = "INSURED_BY";

type EdgeId = (NodeKey, String, NodeKey);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: NodeKey,
    pub label: String,
    pub to: NodeKey,
    pub provenance: BTreeSet<EdgeProvenance>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MergeReport {
    pub nodes_added: usize,
    pub edges_added: usize,
    pub edges_deduplicated: usize,
    pub diagnostics: Vec<String>,
}

impl MergeReport {
    pub fn absorb(&mut self, other: MergeReport) {
        self.nodes_added += other.nodes_added;
        self.edges_added += other.edges_added;
        self.edges_deduplicated += other.edges_deduplicated;
        self.diagnostics.extend(other.diagnostics);
    }
}

/// Registry columns that reference a supervising regulator or insurer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NicRelations {
    pub regulator_column: Option<String>,
    pub insurer_column: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NicDiagnostic {
    DanglingParent { rssd_id: String, parent_rssd_id: String },
    DanglingReference { rssd_id: String, column: String, target: String },
}

impl fmt::Display for NicDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NicDiagnostic::DanglingParent { rssd_id, parent_rssd_id } => {
                write!(f, "DanglingParent: {rssd_id} references missing parent {parent_rssd_id}")
            }
            NicDiagnostic::DanglingReference { rssd_id, column, target } => {
                write!(f, "DanglingReference: {rssd_id} column {column} references missing {target}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    nodes: BTreeMap<NodeKey, Node>,
    edges: BTreeMap<EdgeId, BTreeSet<EdgeProvenance>>,
    /// Canonical institution name to registry node, smallest key on clashes.
    names: BTreeMap<String, NodeKey>,
}

fn surface_forms(props: &BTreeMap<String, String>) -> BTreeSet<String> {
    props.get(SURFACE_FORMS).and_then(|s| serde_json::from_str(s).ok()).unwrap_or_default()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, key: &NodeKey) -> Option<&Node> {
        self.nodes.get(key)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|((from, label, to), prov)| Edge {
            from: from.clone(),
            label: label.clone(),
            to: to.clone(),
            provenance: prov.clone(),
        })
    }

    /// Every edge endpoint names an existing node.
    pub fn check_integrity(&self) -> Result<(), String> {
        for (from, label, to) in self.edges.keys() {
            for end in [from, to] {
                if !self.nodes.contains_key(end) {
                    return Err(format!("edge {from} -{label}-> {to} has no node {end}"));
                }
            }
        }
        Ok(())
    }

    fn after_mutation(&self) {
        #[cfg(debug_assertions)]
        if let Err(e) = self.check_integrity() {
            panic!("referential integrity violated: {e}");
        }
    }

    /// Insert or update a node. Returns true when the node is new.
    fn upsert_node(
        &mut self,
        key: &NodeKey,
        label: NodeLabel,
        properties: BTreeMap<String, String>,
        surface: Option<&str>,
    ) -> bool {
        let added = !self.nodes.contains_key(key);
        let node = self.nodes.entry(key.clone()).or_insert_with(|| Node {
            key: key.clone(),
            label,
            properties: BTreeMap::new(),
        });
        if node.label == NodeLabel::Untyped {
            node.label = label;
        }
        node.properties.extend(properties);
        if let Some(surface) = surface {
            let mut forms = surface_forms(&node.properties);
            forms.insert(surface.to_string());
            let encoded = serde_json::to_string(&forms).expect("string set serializes");
            node.properties.insert(SURFACE_FORMS.to_string(), encoded);
        }
        if let Some(name) = node.properties.get(CANONICAL_NAME).cloned() {
            self.index_name(name, key.clone());
        }
        added
    }

    fn index_name(&mut self, name: String, key: NodeKey) {
        let slot = self.names.entry(name).or_insert_with(|| key.clone());
        if key < *slot {
            *slot = key;
        }
    }

    fn upsert_edge(&mut self, id: EdgeId, provenance: EdgeProvenance, report: &mut MergeReport) {
        match self.edges.get_mut(&id) {
            Some(set) => {
                set.insert(provenance);
                report.edges_deduplicated += 1;
            }
            None => {
                self.edges.insert(id, BTreeSet::from([provenance]));
                report.edges_added += 1;
            }
        }
    }

    /// Canonical key for a text surface, preferring a registry node with
    /// the same canonical name.
    pub fn resolve(&self, surface: &str, aliases: &Aliases) -> Result<NodeKey, GraphError> {
        let key = canonicalize(surface, aliases)?;
        Ok(self.names.get(key.as_str()).cloned().unwrap_or(key))
    }

    /// Merge one data-model instance: an event node per article, one node
    /// per triple endpoint and slot value, verb edges between triple
    /// endpoints and slot-named edges off the event node.
    pub fn merge_instance(&mut self, instance: &DataModelInstance, aliases: &Aliases) -> MergeReport {
        let mut report = MergeReport::default();
        let event = NodeKey::event(&instance.article_id);
        let mut props = BTreeMap::from([("article_id".to_string(), instance.article_id.clone())]);
        if instance.slots.direction != Direction::Unspecified {
            props.insert("direction".into(), instance.slots.direction.to_string());
        }
        if self.upsert_node(&event, NodeLabel::Event, props, None) {
            report.nodes_added += 1;
        }

        for t in &instance.triples {
            let ends = [&t.subject, &t.object].map(|m| {
                let key = self.resolve(&m.surface, aliases)?;
                let label = m.entity_type.map_or(NodeLabel::Untyped, NodeLabel::Entity);
                if self.upsert_node(&key, label, BTreeMap::new(), Some(&m.surface)) {
                    report.nodes_added += 1;
                }
                Ok::<_, GraphError>(key)
            });
            match ends {
                [Ok(from), Ok(to)] => {
                    let prov = EdgeProvenance::Article {
                        article_id: t.article_id.clone(),
                        sentence_index: Some(t.sentence_index),
                    };
                    self.upsert_edge((from, t.predicate_label.clone(), to), prov, &mut report);
                }
                _ => report.diagnostics.push(format!("skipped triple with empty surface: {}", t.predicate_label)),
            }
        }

        let s = &instance.slots;
        let mut slot_values: Vec<(&str, String, EntityType, BTreeMap<String, String>)> = Vec::new();
        let text_slots = [
            ("authority", &s.authority, EntityType::RegulatoryAuthority),
            ("regulated_entity", &s.regulated_entity, EntityType::RegulatedEntity),
            ("threshold", &s.threshold, EntityType::RegulatedActivityThreshold),
            ("citation", &s.citation, EntityType::RegulationCitation),
        ];
        for (name, value, ty) in text_slots {
            if let Some(v) = value {
                slot_values.push((name, v.clone(), ty, BTreeMap::new()));
            }
        }
        if let Some(q) = &s.quantity {
            let props = BTreeMap::from([
                ("value".to_string(), q.value.to_string()),
                ("unit".to_string(), q.unit.to_string()),
            ]);
            slot_values.push(("quantity", format!("{} {}", q.value, q.unit), EntityType::MonetaryValue, props));
        }
        if let Some(d) = &s.effective_date {
            slot_values.push(("effective_date", d.to_string(), EntityType::EffectiveDate, BTreeMap::new()));
        }
        for (name, surface, ty, props) in slot_values {
            let key = match self.resolve(&surface, aliases) {
                Ok(k) => k,
                Err(_) => {
                    report.diagnostics.push(format!("skipped empty {name} slot"));
                    continue;
                }
            };
            if self.upsert_node(&key, NodeLabel::Entity(ty), props, Some(&surface)) {
                report.nodes_added += 1;
            }
            let prov = EdgeProvenance::Article { article_id: instance.article_id.clone(), sentence_index: None };
            self.upsert_edge((event.clone(), name.to_string(), key), prov, &mut report);
        }
        self.after_mutation();
        report
    }

    /// Merge registry records: one node per RSSD id carrying every record
    /// property, ownership edges to parents and supervision edges from the
    /// configured columns. References to ids absent from both the batch and
    /// the graph are reported and skipped.
    pub fn ingest_nic(&mut self, records: &[InstitutionRecord], relations: &NicRelations, aliases: &Aliases) -> MergeReport {
        let mut report = MergeReport::default();
        for r in records {
            let key = NodeKey::rssd(&r.rssd_id);
            let mut props = r.properties.clone();
            props.insert("name".into(), r.name.clone());
            props.insert("rssd_id".into(), r.rssd_id.clone());
            if let Ok(canonical) = canonicalize(&r.name, aliases) {
                props.insert(CANONICAL_NAME.into(), canonical.0);
            }
            let surface = (!r.name.trim().is_empty()).then_some(r.name.as_str());
            if self.upsert_node(&key, NodeLabel::Institution(r.kind), props, surface) {
                report.nodes_added += 1;
            }
        }
        for r in records {
            let key = NodeKey::rssd(&r.rssd_id);
            if let Some(parent) = &r.parent_rssd_id {
                let target = NodeKey::rssd(parent);
                if self.nodes.contains_key(&target) {
                    let label = if r.kind == InstitutionKind::BankBranch { BRANCH_OF } else { HELD_BY };
                    self.upsert_edge((key.clone(), label.to_string(), target), EdgeProvenance::NIC, &mut report);
                } else {
                    report.diagnostics.push(
                        NicDiagnostic::DanglingParent { rssd_id: r.rssd_id.clone(), parent_rssd_id: parent.clone() }
                            .to_string(),
                    );
                }
            }
            let columns = [(&relations.regulator_column, REGULATED_BY), (&relations.insurer_column, INSURED_BY)];
            for (column, label) in columns {
                let Some(column) = column else { continue };
                let Some(target_id) = r.properties.get(column).filter(|v| !v.is_empty()) else { continue };
                let target = NodeKey::rssd(target_id);
                if self.nodes.contains_key(&target) {
                    self.upsert_edge((key.clone(), label.to_string(), target), EdgeProvenance::NIC, &mut report);
                } else {
                    report.diagnostics.push(
                        NicDiagnostic::DanglingReference {
                            rssd_id: r.rssd_id.clone(),
                            column: column.clone(),
                            target: target_id.clone(),
                        }
                        .to_string(),
                    );
                }
            }
        }
        self.after_mutation();
        report
    }

    /// Add one node per regulation section, keyed by canonical citation.
    pub fn ingest_regulations(&mut self, sections: &[RegulationSection], aliases: &Aliases) -> MergeReport {
        let mut report = MergeReport::default();
        for s in sections {
            let Ok(key) = canonicalize(&s.citation, aliases) else { continue };
            let props = BTreeMap::from([("heading".to_string(), s.heading.clone())]);
            if self.upsert_node(&key, NodeLabel::Entity(EntityType::RegulationCitation), props, Some(&s.citation)) {
                report.nodes_added += 1;
            }
        }
        self.after_mutation();
        report
    }
}

/// One position of a pattern: a bound value or a wildcard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Any,
    Is(String),
}

impl Term {
    pub fn parse(s: &str) -> Self {
        if s == "*" {
            Term::Any
        } else {
            Term::Is(s.to_string())
        }
    }

    fn matches(&self, value: &str) -> bool {
        match self {
            Term::Any => true,
            Term::Is(v) => v == value,
        }
    }

    fn is_bound(&self) -> bool {
        matches!(self, Term::Is(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    OneHop { subject: Term, label: Term, object: Term },
    /// `subject -first-> ?middle -second-> object`, joined on the middle node.
    TwoHop { subject: Term, first: Term, second: Term, object: Term },
}

impl Query {
    /// `s l o` for one hop, `s l1 l2 o` for two hops.
    pub fn from_terms(terms: &[&str]) -> Result<Self, GraphError> {
        match terms {
            [s, l, o] => Ok(Query::OneHop { subject: Term::parse(s), label: Term::parse(l), object: Term::parse(o) }),
            [s, l1, l2, o] => Ok(Query::TwoHop {
                subject: Term::parse(s),
                first: Term::parse(l1),
                second: Term::parse(l2),
                object: Term::parse(o),
            }),
            _ => Err(GraphError::UnsupportedPattern(format!("expected 3 or 4 terms, got {}", terms.len()))),
        }
    }
}

/// A matched path, one `(from, label, to)` per hop.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Binding(pub Vec<(NodeKey, String, NodeKey)>);

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (from, label, to)) in self.0.iter().enumerate() {
            if i == 0 {
                write!(f, "{from}")?;
            }
            write!(f, "\t{label}\t{to}")?;
        }
        Ok(())
    }
}

impl Graph {
    fn matching_edges<'a>(
        &'a self,
        subject: &'a Term,
        label: &'a Term,
        object: &'a Term,
    ) -> impl Iterator<Item = &'a EdgeId> + 'a {
        let range: Box<dyn Iterator<Item = &EdgeId>> = match subject {
            Term::Is(s) => {
                let from = NodeKey(s.clone());
                Box::new(self.edges.keys().skip_while(move |(f, _, _)| *f < from).take_while(move |(f, _, _)| f.0 == *s))
            }
            Term::Any => Box::new(self.edges.keys()),
        };
        range.filter(move |(f, l, t)| subject.matches(&f.0) && label.matches(l) && object.matches(&t.0))
    }

    /// Match a one- or two-hop pattern. Two-hop patterns need a bound
    /// subject and first label, and at least one of second label or object
    /// bound. Results are sorted and duplicate-free.
    pub fn query_pattern(&self, query: &Query) -> Result<Vec<Binding>, GraphError> {
        let mut out: Vec<Binding> = match query {
            Query::OneHop { subject, label, object } => self
                .matching_edges(subject, label, object)
                .map(|e| Binding(vec![e.clone()]))
                .collect(),
            Query::TwoHop { subject, first, second, object } => {
                if !subject.is_bound() || !first.is_bound() {
                    return Err(GraphError::UnsupportedPattern(
                        "two-hop patterns need a bound subject and first label".into(),
                    ));
                }
                if !second.is_bound() && !object.is_bound() {
                    return Err(GraphError::UnsupportedPattern(
                        "two-hop patterns need the second label or the object bound".into(),
                    ));
                }
                let mut out = Vec::new();
                for a in self.matching_edges(subject, first, &Term::Any) {
                    let middle = Term::Is(a.2 .0.clone());
                    for b in self.matching_edges(&middle, second, object) {
                        out.push(Binding(vec![a.clone(), b.clone()]));
                    }
                }
                out
            }
        };
        out.sort();
        out.dedup();
        Ok(out)
    }
}

fn malformed(line: usize, message: impl Into<String>) -> GraphError {
    GraphError::MalformedInput { line, message: message.into() }
}

impl Graph {
    /// Write `N<TAB>key<TAB>label<TAB>props` lines, then
    /// `E<TAB>from<TAB>label<TAB>to<TAB>provenance` lines, in key order.
    pub fn persist<W: Write>(&self, mut sink: W) -> Result<(), GraphError> {
        for node in self.nodes.values() {
            let props = crate::json::to_canonical_string(&node.properties).expect("string map serializes");
            writeln!(sink, "N\t{}\t{}\t{}", node.key, node.label, props)?;
        }
        for ((from, label, to), prov) in &self.edges {
            let prov = crate::json::to_canonical_string(prov).expect("provenance serializes");
            writeln!(sink, "E\t{from}\t{label}\t{to}\t{prov}")?;
        }
        sink.flush()?;
        Ok(())
    }

    pub fn to_file_string(&self) -> String {
        let mut buf = Vec::new();
        self.persist(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("graph file is UTF-8")
    }

    pub fn load<R: BufRead>(source: R) -> Result<Graph, GraphError> {
        let mut g = Graph::new();
        let mut seen_edge = false;
        for (i, line) in source.lines().enumerate() {
            let n = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let key = |s: &str| NodeKey::new(s).ok_or_else(|| malformed(n, format!("invalid key {s:?}")));
            match fields.as_slice() {
                ["N", k, label, props] => {
                    if seen_edge {
                        return Err(malformed(n, "node record after edge records"));
                    }
                    let k = key(k)?;
                    let label = NodeLabel::parse(label).ok_or_else(|| malformed(n, format!("unknown label {label:?}")))?;
                    let properties: BTreeMap<String, String> =
                        serde_json::from_str(props).map_err(|e| malformed(n, e.to_string()))?;
                    if g.nodes.contains_key(&k) {
                        return Err(malformed(n, format!("duplicate node {k}")));
                    }
                    if let Some(name) = properties.get(CANONICAL_NAME).cloned() {
                        g.index_name(name, k.clone());
                    }
                    g.nodes.insert(k.clone(), Node { key: k, label, properties });
                }
                ["E", from, label, to, prov] => {
                    seen_edge = true;
                    let (from, to) = (key(from)?, key(to)?);
                    for end in [&from, &to] {
                        if !g.nodes.contains_key(end) {
                            return Err(malformed(n, format!("edge references missing node {end}")));
                        }
                    }
                    if label.is_empty() {
                        return Err(malformed(n, "empty edge label"));
                    }
                    let prov: BTreeSet<EdgeProvenance> =
                        serde_json::from_str(prov).map_err(|e| malformed(n, e.to_string()))?;
                    if prov.is_empty() {
                        return Err(malformed(n, "edge without provenance"));
                    }
                    if g.edges.insert((from, label.to_string(), to), prov).is_some() {
                        return Err(malformed(n, "duplicate edge"));
                    }
                }
                _ => return Err(malformed(n, format!("expected a node or edge record, got {} fields", fields.len()))),
            }
        }
        Ok(g)
    }

    /// Write the graph next to `path` and rename it into place.
    pub fn save(&self, path: &Path) -> Result<(), GraphError> {
        let tmp = path.with_extension("tmp");
        {
            let file = std::fs::File::create(&tmp)?;
            self.persist(std::io::BufWriter::new(file))?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn open(path: &Path) -> Result<Graph, GraphError> {
        let file = std::fs::File::open(path)?;
        Graph::load(std::io::BufReader::new(file))
    }
}

/// Single-writer, multi-reader handle. Readers take immutable snapshots;
/// writers are serialized and publish a new snapshot when done.
#[derive(Debug, Default)]
pub struct GraphStore {
    current: RwLock<Arc<Graph>>,
    writer: Mutex<()>,
}

impl GraphStore {
    pub fn new(graph: Graph) -> Self {
        GraphStore { current: RwLock::new(Arc::new(graph)), writer: Mutex::new(()) }
    }

    pub fn snapshot(&self) -> Arc<Graph> {
        Arc::clone(&self.current.read().unwrap_or_else(|e| e.into_inner()))
    }

    pub fn mutate<R>(&self, f: impl FnOnce(&mut Graph) -> R) -> R {
        let _guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let mut next = (*self.snapshot()).clone();
        let result = f(&mut next);
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(next);
        result
    }
}

//! The two mention streams fused by the pipeline: custom entity mentions
//! from the gazetteer and pattern lexicons, and predicate frames whose
//! arguments are typed into SRL mentions. External model output can be
//! loaded in place of either stream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Article, InstitutionKind, InstitutionRecord};
use crate::lexicon::{content_lines, LexiconError, Lexicons};
use crate::textcore::{normalize_quantities, tokenize, Sentence, Span, Token, TokenKind, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityType {
    RegulatoryAuthority,
    RegulatedActivityThreshold,
    RegulatedEntity,
    MonetaryValue,
    EffectiveDate,
    RegulationCitation,
    ChangeAction,
}

impl EntityType {
    pub const ALL: [EntityType; 7] = [
        EntityType::RegulatoryAuthority,
        EntityType::RegulatedActivityThreshold,
        EntityType::RegulatedEntity,
        EntityType::MonetaryValue,
        EntityType::EffectiveDate,
        EntityType::RegulationCitation,
        EntityType::ChangeAction,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityType::RegulatoryAuthority => "regulatory_authority",
            EntityType::RegulatedActivityThreshold => "regulated_activity_threshold",
            EntityType::RegulatedEntity => "regulated_entity",
            EntityType::MonetaryValue => "monetary_value",
            EntityType::EffectiveDate => "effective_date",
            EntityType::RegulationCitation => "regulation_citation",
            EntityType::ChangeAction => "change_action",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown entity type {s:?}"))
    }
}

/// Name used for mentions that carry no entity type.
pub const UNTYPED: &str = "UNTYPED";

/// Serde adapter writing `None` as `"UNTYPED"`.
pub(crate) mod untyped {
    use super::{EntityType, UNTYPED};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<EntityType>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(t.map_or(UNTYPED, |t| t.as_str()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<EntityType>, D::Error> {
        let s = String::deserialize(d)?;
        if s == UNTYPED {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Source {
    Custom,
    Srl,
    External,
}

/// Which side of the intersection filter a mention belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stream {
    Custom,
    Srl,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub span: Span,
    pub sentence_index: usize,
    #[serde(with = "untyped")]
    pub entity_type: Option<EntityType>,
    pub source: Source,
    pub stream: Stream,
    pub surface: String,
}

impl EntityMention {
    pub fn new(text: &str, span: Span, sentence_index: usize, entity_type: Option<EntityType>, source: Source) -> Self {
        let stream = match source {
            Source::Srl => Stream::Srl,
            _ => Stream::Custom,
        };
        EntityMention { span, sentence_index, entity_type, source, stream, surface: span.slice(text).to_string() }
    }

    pub fn is_typed(&self) -> bool {
        self.entity_type.is_some()
    }

    pub fn type_name(&self) -> &'static str {
        self.entity_type.map_or(UNTYPED, |t| t.as_str())
    }

    /// Ordering key: position first, then type.
    pub fn sort_key(&self) -> (Span, Option<EntityType>) {
        (self.span, self.entity_type)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArgRole {
    #[serde(rename = "ARG_BEFORE")]
    Before,
    #[serde(rename = "ARG_AFTER")]
    After,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FramePredicate {
    pub span: Span,
    pub lemma: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameArgument {
    pub role: ArgRole,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateFrame {
    pub predicate: FramePredicate,
    pub arguments: Vec<FrameArgument>,
    pub sentence_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MatchMode {
    /// Every phrase token must equal the text token.
    Exact,
    /// As `Exact`, except the last phrase token only has to be a prefix of
    /// the text token (`compan` matches `companies`).
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub phrase: String,
    pub mode: MatchMode,
    tokens: Vec<String>,
}

impl GazetteerEntry {
    fn matches_at(&self, tokens: &[Token]) -> bool {
        if tokens.len() < self.tokens.len() {
            return false;
        }
        let last = self.tokens.len() - 1;
        self.tokens.iter().zip(tokens).enumerate().all(|(i, (want, tok))| {
            let have = tok.surface.to_lowercase();
            if i == last && self.mode == MatchMode::Prefix {
                have.starts_with(want.as_str())
            } else {
                have == *want
            }
        })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GazetteerError {
    #[error("empty phrase for {0}")]
    EmptyPhrase(EntityType),
    #[error("duplicate phrase {phrase:?} for {entity_type}")]
    Duplicate { entity_type: EntityType, phrase: String },
}

/// Known surface phrases per entity type.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<EntityType, Vec<GazetteerEntry>>,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity_type: EntityType, phrase: &str, mode: MatchMode) -> Result<(), GazetteerError> {
        let tokens: Vec<String> = tokenize(phrase).into_iter().map(|t| t.surface.to_lowercase()).collect();
        if tokens.is_empty() {
            return Err(GazetteerError::EmptyPhrase(entity_type));
        }
        let list = self.entries.entry(entity_type).or_default();
        if list.iter().any(|e| e.tokens == tokens) {
            return Err(GazetteerError::Duplicate { entity_type, phrase: phrase.to_string() });
        }
        list.push(GazetteerEntry { phrase: phrase.trim().to_string(), mode, tokens });
        Ok(())
    }

    /// Parse `entity_type<TAB>phrase[<TAB>EXACT|PREFIX]` lines.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut g = Gazetteer::new();
        for (line, l) in content_lines(text) {
            let invalid = |message: String| LexiconError::Invalid { name: "gazetteer".into(), line, message };
            let fields: Vec<&str> = l.split('\t').collect();
            let (ty, phrase, mode) = match fields.as_slice() {
                [ty, phrase] => (ty, phrase, MatchMode::Exact),
                [ty, phrase, mode] => {
                    let mode = match mode.trim() {
                        "EXACT" => MatchMode::Exact,
                        "PREFIX" => MatchMode::Prefix,
                        other => return Err(invalid(format!("unknown match mode {other:?}"))),
                    };
                    (ty, phrase, mode)
                }
                _ => return Err(invalid("expected `type<TAB>phrase[<TAB>mode]`".into())),
            };
            let ty: EntityType = ty.trim().parse().map_err(invalid)?;
            g.insert(ty, phrase, mode).map_err(|e| invalid(e.to_string()))?;
        }
        Ok(g)
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/gazetteer.tsv")).expect("built-in gazetteer")
    }

    /// Add institution names from the registry: regulators and insurers as
    /// authorities, everything else as regulated entities. Names already
    /// present are skipped. Returns the number of phrases added.
    pub fn extend_from_institutions(&mut self, records: &[InstitutionRecord]) -> usize {
        records
            .iter()
            .filter(|r| {
                let ty = match r.kind {
                    InstitutionKind::Regulator | InstitutionKind::Insurer => EntityType::RegulatoryAuthority,
                    _ => EntityType::RegulatedEntity,
                };
                self.insert(ty, &r.name, MatchMode::Exact).is_ok()
            })
            .count()
    }

    pub fn entries(&self) -> impl Iterator<Item = (EntityType, &GazetteerEntry)> {
        self.entries.iter().flat_map(|(t, list)| list.iter().map(move |e| (*t, e)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The gazetteer plus lexicons: the rules that assign entity types to text.
#[derive(Debug, Clone, Copy)]
pub struct Typer<'a> {
    pub gazetteer: &'a Gazetteer,
    pub lexicons: &'a Lexicons,
}

impl<'a> Typer<'a> {
    pub fn new(gazetteer: &'a Gazetteer, lexicons: &'a Lexicons) -> Self {
        Typer { gazetteer, lexicons }
    }

    /// Every typed candidate span inside `region`, before overlap resolution.
    pub fn candidates(&self, text: &str, tokens: &[Token], region: Span) -> Vec<(Span, EntityType)> {
        let tokens: Vec<Token> = tokens.iter().filter(|t| region.contains(&t.span)).cloned().collect();
        let mut found = Vec::new();

        for i in 0..tokens.len() {
            for (ty, entry) in self.gazetteer.entries() {
                if entry.matches_at(&tokens[i..]) {
                    let last = &tokens[i + entry.tokens.len() - 1];
                    found.push((Span::new(tokens[i].span.start, last.span.end), ty));
                }
            }
        }

        let quantities = normalize_quantities(&tokens, &self.lexicons.scale_words);
        found.extend(
            quantities
                .mentions
                .iter()
                .filter(|q| matches!(q.unit, Unit::Usd | Unit::Percent))
                .map(|q| (q.span, EntityType::MonetaryValue)),
        );

        let slice = region.slice(text);
        for (patterns, ty) in [
            (&self.lexicons.date_patterns, EntityType::EffectiveDate),
            (&self.lexicons.citation_patterns, EntityType::RegulationCitation),
        ] {
            found.extend(patterns.find_all(slice).map(|m| (Span::new(m.start(), m.end()).shifted(region.start), ty)));
        }

        found.extend(
            tokens
                .iter()
                .filter(|t| t.kind == TokenKind::Word)
                .filter(|t| {
                    self.lexicons
                        .verbs
                        .lemma_of(&t.surface)
                        .is_some_and(|lemma| self.lexicons.change_verbs.contains(lemma))
                })
                .map(|t| (t.span, EntityType::ChangeAction)),
        );
        found
    }

    /// Non-overlapping typed spans inside `region`, sorted by start.
    pub fn type_region(&self, text: &str, tokens: &[Token], region: Span) -> Vec<(Span, EntityType)> {
        resolve_overlaps(self.candidates(text, tokens, region))
    }
}

/// Keep the longest candidates first, breaking ties toward the earlier
/// start, and drop anything overlapping an already kept span.
pub fn resolve_overlaps(mut candidates: Vec<(Span, EntityType)>) -> Vec<(Span, EntityType)> {
    candidates.sort_by(|(a, ta), (b, tb)| {
        b.len().cmp(&a.len()).then(a.start.cmp(&b.start)).then(ta.cmp(tb))
    });
    let mut kept: Vec<(Span, EntityType)> = Vec::new();
    for (span, ty) in candidates {
        if span.is_empty() || kept.iter().any(|(k, _)| k.overlaps(&span)) {
            continue;
        }
        kept.push((span, ty));
    }
    kept.sort();
    kept
}

/// Custom entity extraction: gazetteer phrases, USD/percent quantities,
/// date and citation patterns, and change verbs, per sentence.
pub fn extract_entities(article: &Article, sentences: &[Sentence], typer: &Typer) -> Vec<EntityMention> {
    let text = &article.body_text;
    sentences
        .iter()
        .flat_map(|s| {
            typer
                .type_region(text, &s.tokens, s.span)
                .into_iter()
                .map(move |(span, ty)| EntityMention::new(text, span, s.index, Some(ty), Source::Custom))
        })
        .collect()
}

/// Rule-based predicate frames: each lexicon verb is a predicate and the
/// non-punctuation token runs directly left and right of it, stopping at
/// other predicates, are its arguments.
pub fn extract_frames(sentences: &[Sentence], lexicons: &Lexicons) -> Vec<PredicateFrame> {
    let verbs = &lexicons.verbs;
    let mut frames = Vec::new();
    for s in sentences {
        let tokens = &s.tokens;
        let lemmas: Vec<Option<&str>> = tokens
            .iter()
            .map(|t| if t.kind == TokenKind::Word { verbs.lemma_of(&t.surface) } else { None })
            .collect();
        let is_arg_token = |i: usize| !tokens[i].is_punct() && lemmas[i].is_none();

        for (p, lemma) in lemmas.iter().enumerate() {
            let Some(lemma) = lemma else { continue };
            let mut arguments = Vec::new();

            let mut left = p;
            while left > 0 && is_arg_token(left - 1) {
                left -= 1;
            }
            if left < p {
                arguments.push(FrameArgument {
                    role: ArgRole::Before,
                    span: Span::new(tokens[left].span.start, tokens[p - 1].span.end),
                });
            }
            let mut right = p + 1;
            while right < tokens.len() && is_arg_token(right) {
                right += 1;
            }
            if right > p + 1 {
                arguments.push(FrameArgument {
                    role: ArgRole::After,
                    span: Span::new(tokens[p + 1].span.start, tokens[right - 1].span.end),
                });
            }
            if arguments.is_empty() {
                continue;
            }
            frames.push(PredicateFrame {
                predicate: FramePredicate { span: tokens[p].span, lemma: lemma.to_string() },
                arguments,
                sentence_index: s.index,
            });
        }
    }
    frames
}

/// Type every frame argument with the same rules the custom extractor uses.
///
/// An argument containing typed matches yields one SRL mention per match;
/// an argument with none yields a single UNTYPED mention over the whole
/// argument. Arguments shared by adjacent frames are emitted once.
pub fn frames_to_entities(
    article: &Article,
    sentences: &[Sentence],
    frames: &[PredicateFrame],
    typer: &Typer,
) -> Vec<EntityMention> {
    let text = &article.body_text;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for frame in frames {
        let Some(sentence) = sentences.iter().find(|s| s.index == frame.sentence_index) else {
            continue;
        };
        for arg in &frame.arguments {
            let typed = typer.type_region(text, &sentence.tokens, arg.span);
            let spans: Vec<(Span, Option<EntityType>)> = if typed.is_empty() {
                vec![(arg.span, None)]
            } else {
                typed.into_iter().map(|(s, t)| (s, Some(t))).collect()
            };
            for (span, ty) in spans {
                if seen.insert((span, ty)) {
                    out.push(EntityMention::new(text, span, sentence.index, ty, Source::Srl));
                }
            }
        }
    }
    out.sort_by_key(EntityMention::sort_key);
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnnotationError {
    #[error("malformed annotations: {0}")]
    MalformedInput(String),
    #[error("span out of range in {0}")]
    SpanOutOfRange(String),
}

#[derive(Debug, Deserialize)]
struct RawAnnotations {
    article_id: String,
    #[serde(default)]
    entities: Vec<RawEntity>,
    #[serde(default)]
    frames: Vec<RawFrame>,
}

#[derive(Debug, Deserialize)]
struct RawEntity {
    start: usize,
    end: usize,
    #[serde(rename = "type")]
    entity_type: String,
    stream: Stream,
}

#[derive(Debug, Deserialize)]
struct RawPredicate {
    start: usize,
    end: usize,
    lemma: String,
}

#[derive(Debug, Deserialize)]
struct RawArgument {
    role: ArgRole,
    start: usize,
    end: usize,
}

#[derive(Debug, Deserialize)]
struct RawFrame {
    predicate: RawPredicate,
    arguments: Vec<RawArgument>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExternalAnnotations {
    pub entities: Vec<EntityMention>,
    pub frames: Vec<PredicateFrame>,
}

fn sentence_of(sentences: &[Sentence], span: Span) -> Option<usize> {
    sentences.iter().find(|s| s.span.contains(&span)).map(|s| s.index)
}

/// Load annotations produced by an external model. Spans are byte offsets
/// into the article body and must fall inside one sentence.
pub fn load_external_annotations(
    raw: &str,
    article: &Article,
    sentences: &[Sentence],
) -> Result<ExternalAnnotations, AnnotationError> {
    let parsed: RawAnnotations =
        serde_json::from_str(raw).map_err(|e| AnnotationError::MalformedInput(e.to_string()))?;
    if parsed.article_id != article.id {
        return Err(AnnotationError::MalformedInput(format!(
            "annotations are for {:?}, not {:?}",
            parsed.article_id, article.id
        )));
    }
    let text = &article.body_text;
    let locate = |what: String, start: usize, end: usize| -> Result<(Span, usize), AnnotationError> {
        let span = Span { start, end };
        if !span.is_valid_in(text) {
            return Err(AnnotationError::SpanOutOfRange(format!("{what} ({start}..{end})")));
        }
        let sentence = sentence_of(sentences, span)
            .ok_or_else(|| AnnotationError::SpanOutOfRange(format!("{what} ({start}..{end}) crosses sentences")))?;
        Ok((span, sentence))
    };

    let mut entities = Vec::with_capacity(parsed.entities.len());
    for (i, e) in parsed.entities.iter().enumerate() {
        let (span, sentence) = locate(format!("entities[{i}]"), e.start, e.end)?;
        let entity_type = if e.entity_type == UNTYPED {
            None
        } else {
            Some(e.entity_type.parse().map_err(|m| AnnotationError::MalformedInput(format!("entities[{i}]: {m}")))?)
        };
        let mut m = EntityMention::new(text, span, sentence, entity_type, Source::External);
        m.stream = e.stream;
        entities.push(m);
    }

    let mut frames = Vec::with_capacity(parsed.frames.len());
    for (i, f) in parsed.frames.iter().enumerate() {
        let (pred_span, sentence) = locate(format!("frames[{i}].predicate"), f.predicate.start, f.predicate.end)?;
        if f.arguments.is_empty() {
            return Err(AnnotationError::MalformedInput(format!("frames[{i}] has no arguments")));
        }
        let mut arguments = Vec::with_capacity(f.arguments.len());
        for (j, a) in f.arguments.iter().enumerate() {
            let what = format!("frames[{i}].arguments[{j}]");
            let (span, arg_sentence) = locate(what.clone(), a.start, a.end)?;
            if arg_sentence != sentence {
                return Err(AnnotationError::SpanOutOfRange(format!("{what} is outside the predicate's sentence")));
            }
            if span.overlaps(&pred_span) {
                return Err(AnnotationError::MalformedInput(format!("{what} overlaps its predicate")));
            }
            arguments.push(FrameArgument { role: a.role, span });
        }
        frames.push(PredicateFrame {
            predicate: FramePredicate { span: pred_span, lemma: f.predicate.lemma.to_lowercase() },
            arguments,
            sentence_index: sentence,
        });
    }
    Ok(ExternalAnnotations { entities, frames })
}

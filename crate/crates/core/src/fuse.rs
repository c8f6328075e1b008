//! Fusion of the two mention streams into one data-model instance per
//! article, and the summarization ratio that measures how much text the
//! instance saves a reader.

use std::collections::BTreeSet;
use std::fmt;
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::{
    extract_entities, extract_frames, frames_to_entities, load_external_annotations, AnnotationError,
    EntityMention, EntityType, Gazetteer, Stream, Typer,
};
use crate::ingest::Article;
use crate::lexicon::Lexicons;
use crate::ratio::{self, Rational};
use crate::relate::{clause_svo, enumerate_pairs, extract_relations, Provenance, RelationTriple};
use crate::textcore::{content_token_count, normalize_quantities, segment_sentences, tokenize, QuantityMention, Unit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Increase,
    Decrease,
    #[default]
    Unspecified,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Increase => "INCREASE",
            Direction::Decrease => "DECREASE",
            Direction::Unspecified => "UNSPECIFIED",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FuseError {
    #[error("overlap threshold {0} is not a number in (0, 1]")]
    InvalidThreshold(String),
}

/// Minimum span Jaccard overlap for a custom mention to be confirmed by an
/// SRL mention. Always in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OverlapThreshold(Rational);

impl OverlapThreshold {
    pub fn new(value: Rational) -> Result<Self, FuseError> {
        if ratio::is_unit_interval(&value) {
            Ok(OverlapThreshold(value))
        } else {
            Err(FuseError::InvalidThreshold(value.to_string()))
        }
    }

    /// Accepts a decimal (`0.5`) or a fraction (`1/2`).
    pub fn parse(s: &str) -> Result<Self, FuseError> {
        ratio::parse_decimal(s)
            .or_else(|| s.trim().parse::<Rational>().ok())
            .ok_or_else(|| FuseError::InvalidThreshold(s.to_string()))
            .and_then(Self::new)
    }

    pub fn value(&self) -> &Rational {
        &self.0
    }

    /// Whether `intersection / union` reaches the threshold, exactly.
    pub fn admits(&self, intersection: usize, union: usize) -> bool {
        union > 0 && ratio::ratio(intersection as u64, union as u64) >= self.0
    }
}

impl Default for OverlapThreshold {
    fn default() -> Self {
        OverlapThreshold(ratio::ratio(1, 2))
    }
}

/// Keep the custom mentions that some SRL mention in the same sentence
/// overlaps by at least `threshold` (byte Jaccard). Survivors keep their
/// custom type; SRL types, including UNTYPED, do not matter.
pub fn intersect_entities(
    custom: &[EntityMention],
    srl: &[EntityMention],
    threshold: &OverlapThreshold,
) -> Vec<EntityMention> {
    let mut seen = BTreeSet::new();
    let mut out: Vec<EntityMention> = custom
        .iter()
        .filter(|c| {
            srl.iter().any(|s| {
                s.sentence_index == c.sentence_index
                    && threshold.admits(c.span.intersection_len(&s.span), c.span.union_len(&s.span))
            })
        })
        .filter(|c| seen.insert(c.sort_key()))
        .cloned()
        .collect();
    out.sort_by_key(EntityMention::sort_key);
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slots {
    pub authority: Option<String>,
    pub regulated_entity: Option<String>,
    pub threshold: Option<String>,
    pub quantity: Option<QuantityMention>,
    pub direction: Direction,
    pub effective_date: Option<NaiveDate>,
    pub citation: Option<String>,
}

/// One article's threshold-change event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataModelInstance {
    pub article_id: String,
    pub slots: Slots,
    pub triples: Vec<RelationTriple>,
    pub diagnostics: Vec<String>,
}

impl DataModelInstance {
    pub fn to_canonical_json(&self) -> String {
        crate::json::to_canonical_string(self).expect("instance serializes")
    }
}

const DATE_FORMATS: [&str; 3] = ["%Y-%m-%d", "%B %d, %Y", "%m/%d/%Y"];

fn parse_date(s: &str) -> Option<NaiveDate> {
    DATE_FORMATS.iter().find_map(|f| NaiveDate::parse_from_str(s.trim(), f).ok())
}

fn first_of(entities: &[EntityMention], ty: EntityType) -> impl Iterator<Item = &EntityMention> {
    entities.iter().filter(move |m| m.entity_type == Some(ty))
}

/// Fill the slots from the surviving entities: the first mention of each
/// type wins. Direction comes from the earliest change verb, taken from
/// either a change_action mention or a verb-path predicate, that the
/// direction lexicon knows.
pub fn fill_data_model(
    article: &Article,
    entities: &[EntityMention],
    triples: &[RelationTriple],
    lexicons: &Lexicons,
) -> DataModelInstance {
    let mut entities = entities.to_vec();
    entities.sort_by_key(EntityMention::sort_key);
    let mut diagnostics = Vec::new();
    let surface = |ty| first_of(&entities, ty).next().map(|m| m.surface.clone());

    let quantity = first_of(&entities, EntityType::MonetaryValue).find_map(|m| {
        let tokens: Vec<_> = tokenize(&m.surface)
            .into_iter()
            .map(|t| crate::textcore::Token { span: t.span.shifted(m.span.start), ..t })
            .collect();
        normalize_quantities(&tokens, &lexicons.scale_words)
            .mentions
            .into_iter()
            .find(|q| matches!(q.unit, Unit::Usd | Unit::Percent))
    });

    let mut effective_date = None;
    for m in first_of(&entities, EntityType::EffectiveDate) {
        match parse_date(&m.surface) {
            Some(d) => {
                effective_date = Some(d);
                break;
            }
            None => diagnostics.push(format!("unparseable effective_date {:?}", m.surface)),
        }
    }

    let mut verb_cues: Vec<(usize, String)> = first_of(&entities, EntityType::ChangeAction)
        .map(|m| (m.span.start, lexicons.verbs.label_for(&m.surface)))
        .chain(
            triples
                .iter()
                .filter(|t| t.provenance == Provenance::VerbPath)
                .map(|t| (t.predicate_span.start, t.base_lemma().to_string())),
        )
        .collect();
    verb_cues.sort();
    let direction = verb_cues
        .iter()
        .find_map(|(_, lemma)| lexicons.direction.direction_of(lemma))
        .unwrap_or_default();

    let slots = Slots {
        authority: surface(EntityType::RegulatoryAuthority),
        regulated_entity: surface(EntityType::RegulatedEntity),
        threshold: surface(EntityType::RegulatedActivityThreshold),
        quantity,
        direction,
        effective_date,
        citation: surface(EntityType::RegulationCitation),
    };

    let missing = [
        ("authority", slots.authority.is_none()),
        ("regulated_entity", slots.regulated_entity.is_none()),
        ("threshold", slots.threshold.is_none()),
        ("quantity", slots.quantity.is_none()),
        ("direction", slots.direction == Direction::Unspecified),
        ("effective_date", slots.effective_date.is_none()),
        ("citation", slots.citation.is_none()),
    ];
    diagnostics.extend(missing.iter().filter(|(_, m)| *m).map(|(name, _)| format!("missing slot: {name}")));

    DataModelInstance { article_id: article.id.clone(), slots, triples: triples.to_vec(), diagnostics }
}

/// Plain-text rendering of what a reader sees instead of the article: one
/// line per filled slot and one `subject predicate object` line per triple.
pub fn render_summary(instance: &DataModelInstance) -> String {
    let s = &instance.slots;
    let mut out = String::new();
    let mut line = |name: &str, value: &dyn fmt::Display| {
        let _ = writeln!(out, "{name}: {value}");
    };
    if let Some(v) = &s.authority {
        line("authority", v);
    }
    if let Some(v) = &s.regulated_entity {
        line("regulated_entity", v);
    }
    if let Some(v) = &s.threshold {
        line("threshold", v);
    }
    if let Some(q) = &s.quantity {
        line("quantity", &format_args!("{} {}", q.value, q.unit));
    }
    if s.direction != Direction::Unspecified {
        line("direction", &s.direction);
    }
    if let Some(d) = &s.effective_date {
        line("effective_date", d);
    }
    if let Some(v) = &s.citation {
        line("citation", v);
    }
    for t in &instance.triples {
        let _ = writeln!(out, "{} {} {}", t.subject.surface, t.predicate_label, t.object.surface);
    }
    out
}

/// `input_tokens / max(output_tokens, 1)`.
pub fn ratio_of_counts(input_tokens: usize, output_tokens: usize) -> Rational {
    ratio::ratio(input_tokens as u64, output_tokens.max(1) as u64)
}

/// Content tokens in the article body over content tokens in the rendered
/// instance.
pub fn summarization_ratio(article: &Article, instance: &DataModelInstance) -> Rational {
    ratio_of_counts(content_token_count(&article.body_text), content_token_count(&render_summary(instance)))
}

/// Everything a pipeline run needs.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub gazetteer: Gazetteer,
    pub lexicons: Lexicons,
    pub overlap_threshold: OverlapThreshold,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            gazetteer: Gazetteer::builtin(),
            lexicons: Lexicons::builtin(),
            overlap_threshold: OverlapThreshold::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineOutput {
    pub instance: DataModelInstance,
    pub ratio: Rational,
}

/// Run every stage on one article with the rule-based extractors.
pub fn run_pipeline(article: &Article, config: &PipelineConfig) -> PipelineOutput {
    run_pipeline_with_annotations(article, config, None).expect("no annotations, no annotation errors")
}

/// As [`run_pipeline`], but external annotations, when given, replace the
/// custom stream (if they contain CUSTOM-stream entities) and the SRL
/// stream (if they contain SRL-stream entities or frames).
pub fn run_pipeline_with_annotations(
    article: &Article,
    config: &PipelineConfig,
    annotations: Option<&str>,
) -> Result<PipelineOutput, AnnotationError> {
    let lex = &config.lexicons;
    let typer = Typer::new(&config.gazetteer, lex);
    let sentences = segment_sentences(&article.body_text, &lex.abbreviations);

    let external = annotations.map(|raw| load_external_annotations(raw, article, &sentences)).transpose()?;
    let external_stream = |stream: Stream| -> Vec<EntityMention> {
        external.iter().flat_map(|e| e.entities.iter().filter(move |m| m.stream == stream).cloned()).collect()
    };

    let mut custom = external_stream(Stream::Custom);
    if custom.is_empty() {
        custom = extract_entities(article, &sentences, &typer);
    }
    let mut srl = external_stream(Stream::Srl);
    let frames = match &external {
        Some(e) if !e.frames.is_empty() || !srl.is_empty() => e.frames.clone(),
        _ => extract_frames(&sentences, lex),
    };
    srl.extend(frames_to_entities(article, &sentences, &frames, &typer));

    let entities = intersect_entities(&custom, &srl, &config.overlap_threshold);

    let mut triples: Vec<RelationTriple> = enumerate_pairs(&entities)
        .into_iter()
        .flat_map(|pair| extract_relations(&sentences, pair, lex, &article.id))
        .collect();
    triples.extend(sentences.iter().flat_map(|s| clause_svo(&article.body_text, s, lex, &article.id)));

    let instance = fill_data_model(article, &entities, &triples, lex);
    let ratio = summarization_ratio(article, &instance);
    Ok(PipelineOutput { instance, ratio })
}

/// Mean of per-article ratios, `None` for an empty batch.
pub fn mean_ratio<'a>(ratios: impl IntoIterator<Item = &'a Rational>) -> Option<Rational> {
    let mut sum = Rational::from_integer(0.into());
    let mut n = 0u64;
    for r in ratios {
        sum += r;
        n += 1;
    }
    (n > 0).then(|| sum / Rational::from_integer(n.into()))
}

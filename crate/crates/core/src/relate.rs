//! Relation triples between entity mentions.
//!
//! Two sources: a verb scan over the text between a pair of mentions, which
//! can yield several relations for one pair, and a clause-level
//! subject-verb-object heuristic that needs no typed entities at all.

use serde::{Deserialize, Serialize};

use crate::extract::{EntityMention, Source};
use crate::lexicon::Lexicons;
use crate::textcore::{Sentence, Span, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    VerbPath,
    ClauseSvo,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationTriple {
    pub subject: EntityMention,
    pub predicate_label: String,
    /// Span of the verb token the label was derived from.
    pub predicate_span: Span,
    pub object: EntityMention,
    pub article_id: String,
    pub sentence_index: usize,
    pub provenance: Provenance,
}

impl RelationTriple {
    /// The verb lemma without any fused particle (`comply_with` -> `comply`).
    pub fn base_lemma(&self) -> &str {
        self.predicate_label.split('_').next().unwrap_or(&self.predicate_label)
    }
}

fn is_lexicon_verb(token: &Token, lexicons: &Lexicons) -> bool {
    token.kind == TokenKind::Word && lexicons.verbs.lemma_of(&token.surface).is_some()
}

/// Every lexicon verb strictly between the two mentions becomes one
/// relation, labelled with its lemma, or `lemma_preposition` when the next
/// token is a preposition that is still before the later mention. The
/// earlier mention is always the subject. Mentions in different sentences
/// yield nothing.
pub fn extract_relations(
    sentences: &[Sentence],
    pair: (&EntityMention, &EntityMention),
    lexicons: &Lexicons,
    article_id: &str,
) -> Vec<RelationTriple> {
    let (a, b) = pair;
    if a.sentence_index != b.sentence_index || a.span.start == b.span.start {
        return Vec::new();
    }
    let (subject, object) = if a.span.start < b.span.start { (a, b) } else { (b, a) };
    let Some(sentence) = sentences.iter().find(|s| s.index == subject.sentence_index) else {
        return Vec::new();
    };
    let between: Vec<&Token> = sentence
        .tokens
        .iter()
        .filter(|t| t.span.start >= subject.span.end && t.span.end <= object.span.start)
        .collect();

    let mut triples = Vec::new();
    for (i, tok) in between.iter().enumerate() {
        if !is_lexicon_verb(tok, lexicons) {
            continue;
        }
        let mut label = lexicons.verbs.label_for(&tok.surface);
        if let Some(next) = between.get(i + 1) {
            if next.kind == TokenKind::Word && lexicons.prepositions.contains(&next.surface) {
                label = format!("{label}_{}", next.surface.to_lowercase());
            }
        }
        triples.push(RelationTriple {
            subject: subject.clone(),
            predicate_label: label,
            predicate_span: tok.span,
            object: object.clone(),
            article_id: article_id.to_string(),
            sentence_index: sentence.index,
            provenance: Provenance::VerbPath,
        });
    }
    triples
}

/// Split a sentence into clauses at coordinating conjunctions and
/// semicolons; in each clause the first lexicon verb is the predicate and
/// the non-punctuation runs right before and after it are subject and
/// object. Clauses missing any part produce nothing.
pub fn clause_svo(text: &str, sentence: &Sentence, lexicons: &Lexicons, article_id: &str) -> Vec<RelationTriple> {
    let is_boundary = |t: &Token| {
        (t.kind == TokenKind::Punct && t.surface == ";")
            || (t.kind == TokenKind::Word && lexicons.conjunctions.contains(&t.surface))
    };
    let mut triples = Vec::new();
    for clause in sentence.tokens.split(is_boundary) {
        let Some(v) = clause.iter().position(|t| is_lexicon_verb(t, lexicons)) else {
            continue;
        };
        let mut left = v;
        while left > 0 && !clause[left - 1].is_punct() {
            left -= 1;
        }
        let mut right = v + 1;
        while right < clause.len() && !clause[right].is_punct() {
            right += 1;
        }
        if left == v || right == v + 1 {
            continue;
        }
        let run = |from: usize, to: usize| {
            let span = Span::new(clause[from].span.start, clause[to].span.end);
            EntityMention::new(text, span, sentence.index, None, Source::Srl)
        };
        triples.push(RelationTriple {
            subject: run(left, v - 1),
            predicate_label: lexicons.verbs.label_for(&clause[v].surface),
            predicate_span: clause[v].span,
            object: run(v + 1, right - 1),
            article_id: article_id.to_string(),
            sentence_index: sentence.index,
            provenance: Provenance::ClauseSvo,
        });
    }
    triples
}

/// All unordered pairs, ordered by the start of the first then the second
/// mention.
pub fn enumerate_pairs(entities: &[EntityMention]) -> Vec<(&EntityMention, &EntityMention)> {
    let mut sorted: Vec<&EntityMention> = entities.iter().collect();
    sorted.sort_by_key(|m| m.sort_key());
    let mut pairs = Vec::with_capacity(sorted.len() * sorted.len().saturating_sub(1) / 2);
    for (i, first) in sorted.iter().enumerate() {
        for second in &sorted[i + 1..] {
            pairs.push((*first, *second));
        }
    }
    pairs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textcore::segment_sentences;

    fn sentences(text: &str) -> Vec<Sentence> {
        segment_sentences(text, &Lexicons::builtin().abbreviations)
    }

    fn mention(text: &str, sentences: &[Sentence], surface: &str) -> EntityMention {
        let start = text.find(surface).unwrap();
        let span = Span::new(start, start + surface.len());
        let idx = sentences.iter().find(|s| s.span.contains(&span)).unwrap().index;
        EntityMention::new(text, span, idx, None, Source::Custom)
    }

    fn labels(t: &[RelationTriple]) -> Vec<&str> {
        t.iter().map(|t| t.predicate_label.as_str()).collect()
    }

    #[test]
    fn multiple_verbs_multiple_triples() {
        let text = "The Board increased and indexed the threshold.";
        let s = sentences(text);
        let (a, b) = (mention(text, &s, "The Board"), mention(text, &s, "the threshold"));
        let lex = Lexicons::builtin();
        let t = extract_relations(&s, (&a, &b), &lex, "x");
        assert_eq!(labels(&t), vec!["increase", "index"]);
        assert!(t.iter().all(|t| t.subject == a && t.object == b && t.provenance == Provenance::VerbPath));
        // argument order does not matter
        assert_eq!(extract_relations(&s, (&b, &a), &lex, "x"), t);
    }

    #[test]
    fn cross_sentence_pair_is_empty() {
        let text = "The Board met. It raised the threshold.";
        let s = sentences(text);
        let (a, b) = (mention(text, &s, "The Board"), mention(text, &s, "the threshold"));
        assert!(extract_relations(&s, (&a, &b), &Lexicons::builtin(), "x").is_empty());
    }

    #[test]
    fn particle_fusion() {
        let text = "Banks must comply with the rule.";
        let s = sentences(text);
        let (a, b) = (mention(text, &s, "Banks"), mention(text, &s, "the rule"));
        let t = extract_relations(&s, (&a, &b), &Lexicons::builtin(), "x");
        assert_eq!(labels(&t), vec!["comply_with"]);
        assert_eq!(t[0].base_lemma(), "comply");
    }

    #[test]
    fn preposition_inside_object_does_not_fuse() {
        let text = "Banks comply with the rule.";
        let s = sentences(text);
        let (a, b) = (mention(text, &s, "Banks"), mention(text, &s, "with the rule"));
        assert_eq!(labels(&extract_relations(&s, (&a, &b), &Lexicons::builtin(), "x")), vec!["comply"]);
    }

    #[test]
    fn clause_split_at_semicolon() {
        let text = "The agency amended the rule; banks objected.";
        let s = sentences(text);
        let t = clause_svo(text, &s[0], &Lexicons::builtin(), "x");
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].subject.surface, "The agency");
        assert_eq!(t[0].predicate_label, "amend");
        assert_eq!(t[0].object.surface, "the rule");
        assert_eq!(t[0].provenance, Provenance::ClauseSvo);
        assert!(!t[0].subject.is_typed());
    }

    #[test]
    fn clause_split_at_conjunction() {
        let text = "A raised B and C lowered D.";
        let s = sentences(text);
        let t = clause_svo(text, &s[0], &Lexicons::builtin(), "x");
        let got: Vec<(&str, &str, &str)> =
            t.iter().map(|t| (t.subject.surface.as_str(), t.predicate_label.as_str(), t.object.surface.as_str())).collect();
        assert_eq!(got, vec![("A", "raise", "B"), ("C", "lower", "D")]);
    }

    #[test]
    fn clause_without_verb() {
        let text = "The threshold is high.";
        assert!(clause_svo(text, &sentences(text)[0], &Lexicons::builtin(), "x").is_empty());
    }

    #[test]
    fn pair_counts() {
        let text = "a b c d e f g h i j";
        let s = sentences(text);
        let all: Vec<EntityMention> =
            ["a", "b", "c", "d", "e", "f", "g", "h", "i", "j"].iter().map(|w| mention(text, &s, w)).collect();
        assert_eq!(enumerate_pairs(&all[..4]).len(), 6);
        assert!(enumerate_pairs(&all[..1]).is_empty());
        assert!(enumerate_pairs(&[]).is_empty());

        let pairs = enumerate_pairs(&all);
        let mut oracle = Vec::new();
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                oracle.push((all[i].span.start, all[j].span.start));
            }
        }
        let got: Vec<(usize, usize)> = pairs.iter().map(|(a, b)| (a.span.start, b.span.start)).collect();
        assert_eq!(got, oracle);
        assert_eq!(got.len(), 45);
    }
}

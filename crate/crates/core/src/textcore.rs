//! Sentence segmentation, tokenization and quantity normalization.
//!
//! All positions are byte offsets into the article body. Every extractor
//! downstream works off the [`Sentence`] and [`Token`] values produced here,
//! so the rules in this module define what a "word" or a "number" is for the
//! whole pipeline.

use std::fmt;
use std::str::FromStr;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::lexicon::{Abbreviations, ScaleWords};

/// Half-open byte range `[start, end)` into a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} after end {end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Number of bytes shared with `other`.
    pub fn intersection_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn union_len(&self, other: &Span) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }

    pub fn shifted(&self, offset: usize) -> Span {
        Span::new(self.start + offset, self.end + offset)
    }

    /// True when the span is non-empty, inside `text` and on char boundaries.
    pub fn is_valid_in(&self, text: &str) -> bool {
        self.start < self.end
            && self.end <= text.len()
            && text.is_char_boundary(self.start)
            && text.is_char_boundary(self.end)
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Word,
    Number,
    Currency,
    Punct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub span: Span,
    pub surface: String,
    pub kind: TokenKind,
}

impl Token {
    pub fn is_punct(&self) -> bool {
        self.kind == TokenKind::Punct
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub span: Span,
    pub index: usize,
    /// Tokens with spans relative to the full text, not the sentence.
    pub tokens: Vec<Token>,
}

/// Split `text` into sentences.
///
/// A boundary falls after `.`, `!` or `?` when it is followed by whitespace
/// and then an uppercase letter or a digit, unless the word carrying a `.`
/// is a listed abbreviation. Sentence spans exclude surrounding whitespace,
/// so the gaps between them are whitespace only.
pub fn segment_sentences(text: &str, abbreviations: &Abbreviations) -> Vec<Sentence> {
    let mut bounds = Vec::new();
    let mut start = None;
    let chars: Vec<(usize, char)> = text.char_indices().collect();

    for (i, &(pos, c)) in chars.iter().enumerate() {
        if start.is_none() {
            if c.is_whitespace() {
                continue;
            }
            start = Some(pos);
        }
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let Some(&(_, next)) = chars.get(i + 1) else {
            continue;
        };
        if !next.is_whitespace() {
            continue;
        }
        let after_gap = chars[i + 1..].iter().find(|(_, ch)| !ch.is_whitespace());
        let opens_sentence = matches!(after_gap, Some((_, ch)) if ch.is_uppercase() || ch.is_ascii_digit());
        if !opens_sentence {
            continue;
        }
        if c == '.' {
            let word_start = text[..pos]
                .rfind(char::is_whitespace)
                .map(|p| p + text[p..].chars().next().map_or(1, char::len_utf8))
                .unwrap_or(0);
            let word = text[word_start..pos + 1].trim_start_matches(['(', '"', '\'', '[']);
            if abbreviations.contains(word) {
                continue;
            }
        }
        let end = pos + c.len_utf8();
        bounds.push(Span::new(start.take().unwrap_or(pos), end));
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            bounds.push(Span::new(s, end));
        }
    }

    bounds
        .into_iter()
        .enumerate()
        .map(|(index, span)| Sentence {
            span,
            index,
            tokens: tokenize(span.slice(text))
                .into_iter()
                .map(|t| Token { span: t.span.shifted(span.start), ..t })
                .collect(),
        })
        .collect()
}

fn is_number_separator(c: char) -> bool {
    matches!(c, ',' | '.' | '-' | '/')
}

/// Tokenize a piece of text. Spans are relative to `text`.
///
/// Letters form WORD runs; digits (with `,` `.` `-` `/` separators that sit
/// between digits) form NUMBER runs; `$` glued to a number forms CURRENCY;
/// any other non-space character is a one-char PUNCT token.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| chars.get(i).map_or(text.len(), |&(p, _)| p);
    let digit_at = |i: usize| chars.get(i).is_some_and(|&(_, c)| c.is_ascii_digit());

    // Index just past the number that starts at `i`.
    let scan_number = |mut i: usize| {
        while i < chars.len() {
            let c = chars[i].1;
            if c.is_ascii_digit() || (is_number_separator(c) && digit_at(i + 1)) {
                i += 1;
            } else {
                break;
            }
        }
        i
    };

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let (next, kind) = if c.is_whitespace() {
            i += 1;
            continue;
        } else if c.is_alphabetic() {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_alphabetic() {
                j += 1;
            }
            (j, TokenKind::Word)
        } else if c.is_ascii_digit() {
            (scan_number(i), TokenKind::Number)
        } else if c == '$' && digit_at(i + 1) {
            (scan_number(i + 1), TokenKind::Currency)
        } else {
            (i + 1, TokenKind::Punct)
        };
        let span = Span::new(pos, end_of(next));
        tokens.push(Token { span, surface: span.slice(text).to_string(), kind });
        i = next;
    }
    tokens
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Unit {
    Usd,
    Percent,
    Count,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Usd => "USD",
            Unit::Percent => "PERCENT",
            Unit::Count => "COUNT",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Exact non-negative decimal amount, rendered without trailing zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Amount(Decimal);

impl Amount {
    pub fn new(value: Decimal) -> Self {
        Amount(value.normalize())
    }

    pub fn value(&self) -> Decimal {
        self.0
    }
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Amount {
    type Err = rust_decimal::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Decimal::from_str_exact(s).map(Amount::new)
    }
}

impl Serialize for Amount {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Amount {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantityMention {
    pub span: Span,
    pub value: Amount,
    pub unit: Unit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_word: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Quantities {
    pub mentions: Vec<QuantityMention>,
    pub diagnostics: Vec<String>,
}

fn is_percent_unit(token: &Token) -> bool {
    token.surface == "%" || token.surface.eq_ignore_ascii_case("percent")
}

/// Turn NUMBER and CURRENCY tokens into exact quantities.
///
/// A following scale word multiplies the value; a following `percent` or
/// `%` (after the optional scale word) makes it a percentage. Numerals that
/// do not parse as decimals (dates, ranges) are reported and skipped.
pub fn normalize_quantities(tokens: &[Token], scale_words: &ScaleWords) -> Quantities {
    let mut out = Quantities::default();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if !matches!(tok.kind, TokenKind::Number | TokenKind::Currency) {
            i += 1;
            continue;
        }
        let digits: String = tok.surface.chars().filter(|c| *c != '$' && *c != ',').collect();
        let Ok(mut value) = Decimal::from_str_exact(&digits) else {
            out.diagnostics.push(format!("unparseable numeral {:?} at {}", tok.surface, tok.span));
            i += 1;
            continue;
        };
        let mut end = tok.span.end;
        let mut next = i + 1;
        let mut scale_word = None;
        if let Some(scale) = tokens.get(next).filter(|t| t.kind == TokenKind::Word) {
            if let Some(multiplier) = scale_words.multiplier(&scale.surface) {
                match value.checked_mul(multiplier) {
                    Some(scaled) => {
                        value = scaled;
                        scale_word = Some(scale.surface.to_lowercase());
                        end = scale.span.end;
                        next += 1;
                    }
                    None => {
                        out.diagnostics.push(format!(
                            "numeral {:?} {:?} overflows decimal range",
                            tok.surface, scale.surface
                        ));
                        i = next + 1;
                        continue;
                    }
                }
            }
        }
        let unit = if tok.kind == TokenKind::Currency {
            Unit::Usd
        } else if let Some(pct) = tokens.get(next).filter(|t| is_percent_unit(t)) {
            end = pct.span.end;
            next += 1;
            Unit::Percent
        } else {
            Unit::Count
        };
        out.mentions.push(QuantityMention {
            span: Span::new(tok.span.start, end),
            value: Amount::new(value),
            unit,
            scale_word,
        });
        i = next;
    }
    out
}

/// Count of content tokens (everything but punctuation).
pub fn content_token_count(text: &str) -> usize {
    tokenize(text).iter().filter(|t| !t.is_punct()).count()
}

/// Collapse every whitespace run to one space and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

//! Line-oriented lexicon files shipped with the crate.
//!
//! Every file is UTF-8, one entry per line; blank lines and lines starting
//! with `#` are ignored. The built-in copies live under `data/` and can be
//! replaced by paths from the config file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use regex::Regex;
use rust_decimal::Decimal;
use thiserror::Error;

use crate::fuse::Direction;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{name}: line {line}: {message}")]
    Invalid { name: String, line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl LexiconError {
    fn invalid(name: &str, line: usize, message: impl Into<String>) -> Self {
        LexiconError::Invalid { name: name.to_string(), line, message: message.into() }
    }
}

/// Non-comment, non-blank lines with their 1-based line numbers.
pub fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

pub fn read_file(path: &Path) -> Result<String, LexiconError> {
    std::fs::read_to_string(path)
        .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, Default)]
pub struct Abbreviations(BTreeSet<String>);

impl Abbreviations {
    pub fn parse(text: &str) -> Self {
        Abbreviations(content_lines(text).map(|(_, l)| l.trim().to_lowercase()).collect())
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/abbreviations.txt"))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScaleWords(BTreeMap<String, Decimal>);

impl ScaleWords {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut words = BTreeMap::new();
        for (line, l) in content_lines(text) {
            let mut parts = l.split_whitespace();
            let (Some(word), Some(mult), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LexiconError::invalid("scale words", line, "expected `word multiplier`"));
            };
            let mult = Decimal::from_str_exact(mult)
                .map_err(|e| LexiconError::invalid("scale words", line, e.to_string()))?;
            words.insert(word.to_lowercase(), mult);
        }
        Ok(ScaleWords(words))
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/scale_words.txt")).expect("built-in scale words")
    }

    pub fn multiplier(&self, word: &str) -> Option<Decimal> {
        self.0.get(&word.to_lowercase()).copied()
    }
}

/// Verb lemmas with their inflection table.
#[derive(Debug, Clone, Default)]
pub struct VerbLexicon {
    forms: HashMap<String, String>,
    lemmas: BTreeSet<String>,
}

impl VerbLexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lex = VerbLexicon::default();
        for (line, l) in content_lines(text) {
            let mut words = l.split_whitespace().map(str::to_lowercase);
            let lemma = words.next().ok_or_else(|| LexiconError::invalid("verbs", line, "empty"))?;
            for form in words {
                if let Some(prev) = lex.forms.get(&form) {
                    if *prev != lemma {
                        return Err(LexiconError::invalid(
                            "verbs",
                            line,
                            format!("form {form:?} already maps to {prev:?}"),
                        ));
                    }
                }
                lex.forms.insert(form, lemma.clone());
            }
            lex.forms.insert(lemma.clone(), lemma.clone());
            lex.lemmas.insert(lemma);
        }
        if lex.lemmas.is_empty() {
            return Err(LexiconError::invalid("verbs", 0, "verb lexicon is empty"));
        }
        Ok(lex)
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/verbs.txt")).expect("built-in verb lexicon")
    }

    /// Build a lexicon from bare lemmas (no inflections).
    pub fn from_lemmas<I: IntoIterator<Item = S>, S: AsRef<str>>(lemmas: I) -> Self {
        let mut lex = VerbLexicon::default();
        for l in lemmas {
            let l = l.as_ref().to_lowercase();
            lex.forms.insert(l.clone(), l.clone());
            lex.lemmas.insert(l);
        }
        lex
    }

    /// Lemma for a surface form, if the form belongs to a lexicon verb.
    pub fn lemma_of(&self, surface: &str) -> Option<&str> {
        self.forms.get(&surface.to_lowercase()).map(String::as_str)
    }

    /// Label for a form: its lemma when known, otherwise the lowercased surface.
    pub fn label_for(&self, surface: &str) -> String {
        self.lemma_of(surface).map_or_else(|| surface.to_lowercase(), str::to_string)
    }

    pub fn lemmas(&self) -> &BTreeSet<String> {
        &self.lemmas
    }
}

/// A plain set of lowercase words.
#[derive(Debug, Clone, Default)]
pub struct WordSet(BTreeSet<String>);

impl WordSet {
    pub fn parse(text: &str) -> Self {
        WordSet(content_lines(text).map(|(_, l)| l.trim().to_lowercase()).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default)]
pub struct DirectionLexicon(BTreeMap<String, Direction>);

impl DirectionLexicon {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut map = BTreeMap::new();
        for (line, l) in content_lines(text) {
            let mut parts = l.split_whitespace();
            let (Some(lemma), Some(dir), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LexiconError::invalid("direction", line, "expected `lemma DIRECTION`"));
            };
            let dir = match dir.to_ascii_uppercase().as_str() {
                "INCREASE" => Direction::Increase,
                "DECREASE" => Direction::Decrease,
                other => {
                    return Err(LexiconError::invalid("direction", line, format!("unknown direction {other:?}")))
                }
            };
            map.insert(lemma.to_lowercase(), dir);
        }
        Ok(DirectionLexicon(map))
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/direction.txt")).expect("built-in direction lexicon")
    }

    pub fn direction_of(&self, lemma: &str) -> Option<Direction> {
        self.0.get(&lemma.to_lowercase()).copied()
    }
}

/// Ordered list of compiled regular expressions.
#[derive(Debug, Clone, Default)]
pub struct PatternSet(Vec<Regex>);

impl PatternSet {
    pub fn parse(name: &str, text: &str) -> Result<Self, LexiconError> {
        content_lines(text)
            .map(|(line, l)| Regex::new(l.trim()).map_err(|e| LexiconError::invalid(name, line, e.to_string())))
            .collect::<Result<_, _>>()
            .map(PatternSet)
    }

    pub fn find_all<'a>(&'a self, text: &'a str) -> impl Iterator<Item = regex::Match<'a>> + 'a {
        self.0.iter().flat_map(move |re| re.find_iter(text))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Alias table used when canonicalizing node keys.
#[derive(Debug, Clone, Default)]
pub struct Aliases(BTreeMap<String, String>);

impl Aliases {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut map = BTreeMap::new();
        for (line, l) in content_lines(text) {
            let Some((alias, canonical)) = l.split_once('\t') else {
                return Err(LexiconError::invalid("aliases", line, "expected `alias<TAB>canonical`"));
            };
            let alias = crate::textcore::normalize_whitespace(&alias.to_lowercase());
            let canonical = crate::textcore::normalize_whitespace(&canonical.to_lowercase());
            if alias.is_empty() || canonical.is_empty() {
                return Err(LexiconError::invalid("aliases", line, "empty alias or canonical key"));
            }
            map.insert(alias, canonical);
        }
        Ok(Aliases(map))
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/aliases.tsv")).expect("built-in aliases")
    }

    pub fn insert(&mut self, alias: &str, canonical: &str) {
        self.0.insert(alias.to_lowercase(), canonical.to_lowercase());
    }

    pub fn resolve(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }
}

/// Everything the extractors need besides the gazetteer.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub abbreviations: Abbreviations,
    pub scale_words: ScaleWords,
    pub verbs: VerbLexicon,
    pub change_verbs: WordSet,
    pub direction: DirectionLexicon,
    pub prepositions: WordSet,
    pub conjunctions: WordSet,
    pub date_patterns: PatternSet,
    pub citation_patterns: PatternSet,
}

impl Lexicons {
    pub fn builtin() -> Self {
        Lexicons {
            abbreviations: Abbreviations::builtin(),
            scale_words: ScaleWords::builtin(),
            verbs: VerbLexicon::builtin(),
            change_verbs: WordSet::parse(include_str!("../data/change_verbs.txt")),
            direction: DirectionLexicon::builtin(),
            prepositions: WordSet::parse(include_str!("../data/prepositions.txt")),
            conjunctions: WordSet::parse(include_str!("../data/conjunctions.txt")),
            date_patterns: PatternSet::parse("date patterns", include_str!("../data/date_patterns.txt"))
                .expect("built-in date patterns"),
            citation_patterns: PatternSet::parse(
                "citation patterns",
                include_str!("../data/citation_patterns.txt"),
            )
            .expect("built-in citation patterns"),
        }
    }
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_load() {
        let lex = Lexicons::builtin();
        assert!(lex.abbreviations.contains("u.s."));
        assert_eq!(lex.scale_words.multiplier("Billion"), Some(Decimal::from(1_000_000_000u64)));
        assert_eq!(lex.verbs.lemma_of("Raised"), Some("raise"));
        assert_eq!(lex.verbs.lemma_of("complies"), Some("comply"));
        assert_eq!(lex.direction.direction_of("index"), Some(Direction::Increase));
        assert!(lex.change_verbs.contains("lower"));
        assert!(lex.prepositions.contains("with"));
        assert_eq!(lex.date_patterns.find_all("on 2020-01-01 and 3/1/2021").count(), 2);
        assert_eq!(lex.citation_patterns.find_all("see 12 CFR 225.2.").count(), 1);
        assert_eq!(Aliases::builtin().resolve("fed"), Some("federal reserve system"));
    }

    #[test]
    fn comments_and_blanks_skipped() {
        let lines: Vec<_> = content_lines("# c\n\n a\n#x\nb\r\n").collect();
        assert_eq!(lines, vec![(3, " a"), (5, "b")]);
    }

    #[test]
    fn bad_scale_line_names_line() {
        let err = ScaleWords::parse("# x\nmillion\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn conflicting_verb_form_rejected() {
        assert!(VerbLexicon::parse("raise raised\nlift raised\n").is_err());
        assert!(VerbLexicon::parse("# nothing\n").is_err());
    }

    #[test]
    fn unknown_form_label_falls_back_to_surface() {
        let lex = VerbLexicon::from_lemmas(["index"]);
        assert_eq!(lex.label_for("Index"), "index");
        assert_eq!(lex.label_for("Indexed"), "indexed");
    }
}

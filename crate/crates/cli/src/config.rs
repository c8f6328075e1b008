//! Run configuration: one TOML file, paths relative to its directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use regwatch::extract::Gazetteer;
use regwatch::fuse::{FuseError, OverlapThreshold, PipelineConfig};
use regwatch::ingest::{parse_nic_csv, EntityTypeTable, IngestError};
use regwatch::kgraph::NicRelations;
use regwatch::lexicon::{
    read_file, Abbreviations, Aliases, DirectionLexicon, LexiconError, Lexicons, PatternSet, ScaleWords,
    VerbLexicon, WordSet,
};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {message}")]
    Invalid { path: String, message: String },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Threshold(#[from] FuseError),
    #[error("institutions file: {0}")]
    Institutions(#[from] IngestError),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LexiconPaths {
    abbreviations: Option<PathBuf>,
    scale_words: Option<PathBuf>,
    verbs: Option<PathBuf>,
    change_verbs: Option<PathBuf>,
    direction: Option<PathBuf>,
    prepositions: Option<PathBuf>,
    conjunctions: Option<PathBuf>,
    date_patterns: Option<PathBuf>,
    citation_patterns: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    overlap_threshold: Option<toml::Value>,
    gazetteer: Option<PathBuf>,
    aliases: Option<PathBuf>,
    entity_types: Option<PathBuf>,
    /// Registry CSV whose names extend the gazetteer.
    institutions: Option<PathBuf>,
    annotations: Option<PathBuf>,
    rules: Option<PathBuf>,
    taxonomy: Option<PathBuf>,
    #[serde(default)]
    lexicons: LexiconPaths,
    #[serde(default)]
    nic: NicRelations,
}

#[derive(Debug, Clone, Default)]
pub struct Config {
    pub pipeline: PipelineConfig,
    pub aliases: Aliases,
    pub entity_types: EntityTypeTable,
    pub relations: NicRelations,
    pub annotations: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
}

fn load_or<T>(
    base: &Path,
    path: &Option<PathBuf>,
    parse: impl FnOnce(&str) -> Result<T, LexiconError>,
    builtin: impl FnOnce() -> T,
) -> Result<T, LexiconError> {
    match path {
        Some(p) => parse(&read_file(&base.join(p))?),
        None => Ok(builtin()),
    }
}

impl Config {
    pub fn builtin() -> Self {
        Config { aliases: Aliases::builtin(), entity_types: EntityTypeTable::builtin(), ..Config::default() }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
        let raw: RawConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Invalid { path: shown.clone(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let l = &raw.lexicons;
        let builtin = Lexicons::builtin();
        let lexicons = Lexicons {
            abbreviations: load_or(base, &l.abbreviations, |t| Ok(Abbreviations::parse(t)), || builtin.abbreviations.clone())?,
            scale_words: load_or(base, &l.scale_words, ScaleWords::parse, || builtin.scale_words.clone())?,
            verbs: load_or(base, &l.verbs, VerbLexicon::parse, || builtin.verbs.clone())?,
            change_verbs: load_or(base, &l.change_verbs, |t| Ok(WordSet::parse(t)), || builtin.change_verbs.clone())?,
            direction: load_or(base, &l.direction, DirectionLexicon::parse, || builtin.direction.clone())?,
            prepositions: load_or(base, &l.prepositions, |t| Ok(WordSet::parse(t)), || builtin.prepositions.clone())?,
            conjunctions: load_or(base, &l.conjunctions, |t| Ok(WordSet::parse(t)), || builtin.conjunctions.clone())?,
            date_patterns: load_or(base, &l.date_patterns, |t| PatternSet::parse("date patterns", t), || {
                builtin.date_patterns.clone()
            })?,
            citation_patterns: load_or(
                base,
                &l.citation_patterns,
                |t| PatternSet::parse("citation patterns", t),
                || builtin.citation_patterns.clone(),
            )?,
        };
        let mut gazetteer = load_or(base, &raw.gazetteer, Gazetteer::parse, Gazetteer::builtin)?;
        let aliases = load_or(base, &raw.aliases, Aliases::parse, Aliases::builtin)?;
        let entity_types = load_or(base, &raw.entity_types, EntityTypeTable::parse, EntityTypeTable::builtin)?;
        if let Some(p) = &raw.institutions {
            let records = parse_nic_csv(&read_file(&base.join(p))?, &entity_types)?;
            gazetteer.extend_from_institutions(&records);
        }
        let overlap_threshold = match &raw.overlap_threshold {
            None => OverlapThreshold::default(),
            Some(toml::Value::String(s)) => OverlapThreshold::parse(s)?,
            Some(toml::Value::Float(f)) => OverlapThreshold::parse(&f.to_string())?,
            Some(toml::Value::Integer(i)) => OverlapThreshold::parse(&i.to_string())?,
            Some(other) => {
                return Err(ConfigError::Invalid {
                    path: shown,
                    message: format!("overlap_threshold must be a number, got {other}"),
                })
            }
        };
        Ok(Config {
            pipeline: PipelineConfig { gazetteer, lexicons, overlap_threshold },
            aliases,
            entity_types,
            relations: raw.nic,
            annotations: raw.annotations.map(|p| base.join(p)),
            rules: raw.rules.map(|p| base.join(p)),
            taxonomy: raw.taxonomy.map(|p| base.join(p)),
        })
    }
}

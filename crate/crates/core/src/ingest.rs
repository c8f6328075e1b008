//! Readers for the three input sources: Federal Register articles (JSON),
//! the NIC institution registry (CSV) and CFR regulation text (XML), plus
//! the update fetcher that works against a URL or a fixture directory.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::lexicon::{content_lines, LexiconError};
use crate::textcore::normalize_whitespace;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("MalformedInput: {0}")]
    MalformedInput(String),
    #[error("MalformedInput at line {line}: {message}")]
    MalformedLine { line: u64, message: String },
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("article body is empty")]
    EmptyBody,
    #[error("UnknownEntityType: {0:?}")]
    UnknownEntityType(String),
    #[error("DuplicateCitation: {0:?}")]
    DuplicateCitation(String),
    #[error("SourceUnavailable: {0}")]
    SourceUnavailable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub publication_date: NaiveDate,
    #[serde(rename = "agencies")]
    pub agency_names: Vec<String>,
    #[serde(rename = "body")]
    pub body_text: String,
}

fn required<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a Value, IngestError> {
    obj.get(key).ok_or_else(|| IngestError::MissingField(key.to_string()))
}

fn required_str<'a>(obj: &'a serde_json::Map<String, Value>, key: &str) -> Result<&'a str, IngestError> {
    required(obj, key)?
        .as_str()
        .ok_or_else(|| IngestError::MalformedInput(format!("field {key:?} must be a string")))
}

/// Parse one article object in the carrier format
/// `{id, title, publication_date, agencies: [..], body}`.
pub fn parse_article(raw: &str) -> Result<Article, IngestError> {
    let value: Value = serde_json::from_str(raw).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    article_from_value(&value)
}

pub fn article_from_value(value: &Value) -> Result<Article, IngestError> {
    let obj = value
        .as_object()
        .ok_or_else(|| IngestError::MalformedInput("article must be a JSON object".into()))?;
    let id = required_str(obj, "id")?.trim().to_string();
    if id.is_empty() {
        return Err(IngestError::MalformedInput("field \"id\" is empty".into()));
    }
    let title = required_str(obj, "title")?.trim().to_string();
    let date = required_str(obj, "publication_date")?;
    let publication_date = NaiveDate::parse_from_str(date.trim(), "%Y-%m-%d")
        .map_err(|e| IngestError::MalformedInput(format!("publication_date {date:?}: {e}")))?;
    let agency_names = required(obj, "agencies")?
        .as_array()
        .ok_or_else(|| IngestError::MalformedInput("field \"agencies\" must be an array".into()))?
        .iter()
        .map(|a| {
            a.as_str()
                .map(str::to_string)
                .ok_or_else(|| IngestError::MalformedInput("agency names must be strings".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let body_text = normalize_whitespace(required_str(obj, "body")?);
    if body_text.is_empty() {
        return Err(IngestError::EmptyBody);
    }
    Ok(Article { id, title, publication_date, agency_names, body_text })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InstitutionKind {
    Bank,
    BankBranch,
    HoldingCompany,
    Regulator,
    Insurer,
}

impl InstitutionKind {
    pub const ALL: [InstitutionKind; 5] = [
        InstitutionKind::Bank,
        InstitutionKind::BankBranch,
        InstitutionKind::HoldingCompany,
        InstitutionKind::Regulator,
        InstitutionKind::Insurer,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            InstitutionKind::Bank => "BANK",
            InstitutionKind::BankBranch => "BANK_BRANCH",
            InstitutionKind::HoldingCompany => "HOLDING_COMPANY",
            InstitutionKind::Regulator => "REGULATOR",
            InstitutionKind::Insurer => "INSURER",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for InstitutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Mapping from raw NIC `ENTITY_TYPE` codes to institution kinds.
#[derive(Debug, Clone, Default)]
pub struct EntityTypeTable(BTreeMap<String, InstitutionKind>);

impl EntityTypeTable {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut map = BTreeMap::new();
        for (line, l) in content_lines(text) {
            let (code, kind) = l.split_once('\t').ok_or_else(|| LexiconError::Invalid {
                name: "entity types".into(),
                line,
                message: "expected `CODE<TAB>KIND`".into(),
            })?;
            let kind = InstitutionKind::from_name(kind.trim()).ok_or_else(|| LexiconError::Invalid {
                name: "entity types".into(),
                line,
                message: format!("unknown institution kind {:?}", kind.trim()),
            })?;
            map.insert(code.trim().to_ascii_uppercase(), kind);
        }
        Ok(EntityTypeTable(map))
    }

    pub fn builtin() -> Self {
        Self::parse(include_str!("../data/entity_types.tsv")).expect("built-in entity type table")
    }

    pub fn kind_of(&self, code: &str) -> Option<InstitutionKind> {
        self.0.get(&code.trim().to_ascii_uppercase()).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstitutionRecord {
    pub rssd_id: String,
    pub name: String,
    pub kind: InstitutionKind,
    pub parent_rssd_id: Option<String>,
    /// Every column other than the four recognized ones, keyed by header.
    pub properties: BTreeMap<String, String>,
}

const COL_ID: &str = "ID_RSSD";
const COL_NAME: &str = "NAME";
const COL_TYPE: &str = "ENTITY_TYPE";
const COL_PARENT: &str = "PARENT_RSSD";

fn csv_error(e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            format!("row has {len} fields, header has {expected_len}")
        }
        _ => e.to_string(),
    };
    match line {
        Some(line) => IngestError::MalformedLine { line, message },
        None => IngestError::MalformedInput(message),
    }
}

/// Parse a NIC institution CSV. The header must name `ID_RSSD`, `NAME` and
/// `ENTITY_TYPE`; `PARENT_RSSD` is optional. Remaining columns are copied
/// into `properties` verbatim.
pub fn parse_nic_csv(raw: &str, types: &EntityTypeTable) -> Result<Vec<InstitutionRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(raw.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let id_col = column(COL_ID).ok_or_else(|| IngestError::MissingField(COL_ID.into()))?;
    let name_col = column(COL_NAME).ok_or_else(|| IngestError::MissingField(COL_NAME.into()))?;
    let type_col = column(COL_TYPE).ok_or_else(|| IngestError::MissingField(COL_TYPE.into()))?;
    let parent_col = column(COL_PARENT);

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let line = row.position().map_or(0, |p| p.line());
        let rssd_id = row[id_col].to_string();
        if rssd_id.is_empty() {
            return Err(IngestError::MalformedLine { line, message: "empty ID_RSSD".into() });
        }
        if !seen.insert(rssd_id.clone()) {
            return Err(IngestError::MalformedLine { line, message: format!("duplicate ID_RSSD {rssd_id}") });
        }
        let code = &row[type_col];
        let kind = types.kind_of(code).ok_or_else(|| IngestError::UnknownEntityType(code.to_string()))?;
        let parent_rssd_id = parent_col.map(|c| row[c].to_string()).filter(|p| !p.is_empty());
        if parent_rssd_id.as_deref() == Some(rssd_id.as_str()) {
            return Err(IngestError::MalformedLine { line, message: format!("{rssd_id} is its own parent") });
        }
        let properties = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| ![Some(id_col), Some(name_col), Some(type_col), parent_col].contains(&Some(*i)))
            .map(|(i, h)| (h.to_string(), row[i].to_string()))
            .collect();
        records.push(InstitutionRecord {
            rssd_id,
            name: row[name_col].to_string(),
            kind,
            parent_rssd_id,
            properties,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegulationSection {
    pub citation: String,
    pub heading: String,
    pub text: String,
}

fn flatten_text(node: roxmltree::Node, skip: &dyn Fn(roxmltree::Node) -> bool, out: &mut String) {
    for child in node.children() {
        if child.is_text() {
            out.push_str(child.text().unwrap_or_default());
            out.push(' ');
        } else if child.is_element() && !skip(child) {
            flatten_text(child, skip, out);
        }
    }
}

/// Parse `<section citation="..."><heading>..</heading>..text..</section>`
/// elements, in document order, flattening nested markup to plain text.
pub fn parse_cfr_xml(raw: &str) -> Result<Vec<RegulationSection>, IngestError> {
    let doc = roxmltree::Document::parse(raw).map_err(|e| IngestError::MalformedInput(e.to_string()))?;
    let mut sections = Vec::new();
    let mut seen = HashSet::new();
    for node in doc.descendants().filter(|n| n.has_tag_name("section")) {
        let citation = node
            .attribute("citation")
            .map(normalize_whitespace)
            .filter(|c| !c.is_empty())
            .ok_or_else(|| {
                let pos = doc.text_pos_at(node.range().start);
                IngestError::MalformedLine { line: pos.row as u64, message: "section without citation".into() }
            })?;
        if !seen.insert(citation.clone()) {
            return Err(IngestError::DuplicateCitation(citation));
        }
        let mut heading = String::new();
        if let Some(h) = node.children().find(|c| c.has_tag_name("heading")) {
            flatten_text(h, &|_| false, &mut heading);
        }
        let mut text = String::new();
        flatten_text(node, &|n| n.has_tag_name("heading") || n.has_tag_name("section"), &mut text);
        sections.push(RegulationSection {
            citation,
            heading: normalize_whitespace(&heading),
            text: normalize_whitespace(&text),
        });
    }
    Ok(sections)
}

/// Where updates come from. A directory path selects fixture mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UpdateSource {
    Url(String),
    Fixtures(PathBuf),
}

impl UpdateSource {
    pub fn parse(source: &str) -> Self {
        if source.starts_with("http://") || source.starts_with("https://") {
            UpdateSource::Url(source.to_string())
        } else {
            UpdateSource::Fixtures(PathBuf::from(source))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedDocument {
    pub document: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FetchOutcome {
    pub articles: Vec<Article>,
    pub skipped: Vec<SkippedDocument>,
}

/// Fetch articles published on or after `since`, sorted by
/// `(publication_date, id)`. Documents that fail to parse are skipped and
/// reported; the first occurrence of a duplicated id wins.
pub fn fetch_updates(source: &UpdateSource, since: NaiveDate) -> Result<FetchOutcome, IngestError> {
    let (parsed, mut skipped) = match source {
        UpdateSource::Fixtures(dir) => read_fixture_dir(dir)?,
        UpdateSource::Url(url) => fetch_url(url, since)?,
    };
    let mut seen = HashSet::new();
    let mut articles = Vec::new();
    for (document, article) in parsed {
        if article.publication_date < since {
            continue;
        }
        if seen.insert(article.id.clone()) {
            articles.push(article);
        } else {
            skipped.push(SkippedDocument { document, reason: format!("duplicate article id {}", article.id) });
        }
    }
    articles.sort_by(|a, b| (a.publication_date, &a.id).cmp(&(b.publication_date, &b.id)));
    Ok(FetchOutcome { articles, skipped })
}

type Parsed = (Vec<(String, Article)>, Vec<SkippedDocument>);

fn read_fixture_dir(dir: &Path) -> Result<Parsed, IngestError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| IngestError::SourceUnavailable(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();

    let mut parsed = Vec::new();
    let mut skipped = Vec::new();
    for path in files {
        let document = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        let result = std::fs::read(&path)
            .map_err(|e| IngestError::MalformedInput(e.to_string()))
            .and_then(|bytes| String::from_utf8(bytes).map_err(|e| IngestError::MalformedInput(e.to_string())))
            .and_then(|text| parse_article(&text));
        match result {
            Ok(article) => parsed.push((document, article)),
            Err(e) => skipped.push(SkippedDocument { document, reason: e.to_string() }),
        }
    }
    Ok((parsed, skipped))
}

fn fetch_url(url: &str, since: NaiveDate) -> Result<Parsed, IngestError> {
    let sep = if url.contains('?') { '&' } else { '?' };
    let full = format!("{url}{sep}since={}", since.format("%Y-%m-%d"));
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_secs(30)))
        .build()
        .into();
    let body = agent
        .get(&full)
        .call()
        .and_then(|mut resp| resp.body_mut().read_to_string())
        .map_err(|e| IngestError::SourceUnavailable(format!("{full}: {e}")))?;
    let value: Value = serde_json::from_str(&body)
        .map_err(|e| IngestError::SourceUnavailable(format!("{full}: response is not JSON: {e}")))?;
    let items = value
        .as_array()
        .ok_or_else(|| IngestError::SourceUnavailable(format!("{full}: response is not a JSON array")))?;

    let mut parsed = Vec::new();
    let mut skipped = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let document = format!("response[{i}]");
        match article_from_value(item) {
            Ok(article) => parsed.push((document, article)),
            Err(e) => skipped.push(SkippedDocument { document, reason: e.to_string() }),
        }
    }
    Ok((parsed, skipped))
}

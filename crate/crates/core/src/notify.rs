//! Subscriptions, taxonomy similarity and per-article alerts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::Zero;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuse::{DataModelInstance, Direction};
use crate::ratio::{self, Rational};
use crate::textcore::{tokenize, TokenKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("SyntaxError at {line}:{column}: {message}")]
    SyntaxError { line: usize, column: usize, message: String },
    #[error("UnknownField {field} at {line}:{column}")]
    UnknownField { field: String, line: usize, column: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    Authority,
    RegulatedEntity,
    Threshold,
    Direction,
    QuantityValue,
    QuantityUnit,
    Citation,
}

impl Field {
    pub const ALL: [Field; 7] = [
        Field::Authority,
        Field::RegulatedEntity,
        Field::Threshold,
        Field::Direction,
        Field::QuantityValue,
        Field::QuantityUnit,
        Field::Citation,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Field::Authority => "authority",
            Field::RegulatedEntity => "regulated_entity",
            Field::Threshold => "threshold",
            Field::Direction => "direction",
            Field::QuantityValue => "quantity.value",
            Field::QuantityUnit => "quantity.unit",
            Field::Citation => "citation",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.into_iter().find(|f| f.as_str() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Eq,
    Ne,
    Ge,
    Le,
    Contains,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Literal {
    Str(String),
    Num(Decimal),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub field: Field,
    pub op: Op,
    pub literal: Literal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Cmp(Comparison),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubscriptionKind {
    Rule(Expr),
    Role { description: Vec<String>, threshold: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub subscriber_id: String,
    pub kind: SubscriptionKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Lexeme {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn lex(text: &str) -> Result<Vec<Lexeme>, RuleError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, column) = (li + 1, i + 1);
            let err = |message: String| RuleError::SyntaxError { line, column, message };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let tok = if c == '"' {
                let mut s = String::new();
                i += 1;
                loop {
                    match chars.get(i) {
                        None => return Err(err("unterminated string".into())),
                        Some('"') => break,
                        Some('\\') => {
                            match chars.get(i + 1) {
                                Some(&e @ ('"' | '\\')) => s.push(e),
                                _ => return Err(err("invalid escape in string".into())),
                            }
                            i += 1;
                        }
                        Some(&ch) => s.push(ch),
                    }
                    i += 1;
                }
                i += 1;
                Tok::Str(s)
            } else if is_word_char(c) {
                let start = i;
                while i < chars.len() && is_word_char(chars[i]) {
                    i += 1;
                }
                Tok::Word(chars[start..i].iter().collect())
            } else {
                let two: String = chars[i..chars.len().min(i + 2)].iter().collect();
                let sym = match (two.as_str(), c) {
                    ("!=", _) => "!=",
                    (">=", _) => ">=",
                    ("<=", _) => "<=",
                    (_, '=') => "=",
                    (_, '(') => "(",
                    (_, ')') => ")",
                    _ => return Err(err(format!("unexpected character {c:?}"))),
                };
                i += sym.len();
                Tok::Sym(sym)
            };
            out.push(Lexeme { tok, line, column });
        }
    }
    Ok(out)
}

struct Parser {
    lexemes: Vec<Lexeme>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.lexemes.get(self.pos).map(|l| &l.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.lexemes.get(self.pos).map_or(self.end, |l| (l.line, l.column))
    }

    fn error(&self, message: impl Into<String>) -> RuleError {
        let (line, column) = self.here();
        RuleError::SyntaxError { line, column, message: message.into() }
    }

    fn next(&mut self) -> Option<Tok> {
        let tok = self.peek().cloned();
        self.pos += 1;
        tok
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w == kw)
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), RuleError> {
        if self.at_keyword(kw) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{kw}`")))
        }
    }

    fn block(&mut self) -> Result<Subscription, RuleError> {
        self.expect_keyword("subscriber")?;
        let subscriber_id = match self.next() {
            Some(Tok::Word(w)) => w,
            _ => {
                self.pos -= 1;
                return Err(self.error("expected a subscriber id"));
            }
        };
        let kind = if self.at_keyword("when") {
            self.pos += 1;
            SubscriptionKind::Rule(self.or_expr()?)
        } else if self.at_keyword("role") {
            self.pos += 1;
            let text = match self.peek() {
                Some(Tok::Str(s)) => s.clone(),
                _ => return Err(self.error("expected a quoted role description")),
            };
            self.pos += 1;
            self.expect_keyword("threshold")?;
            let threshold = match self.peek() {
                Some(Tok::Word(w)) => ratio::parse_decimal(w).filter(ratio::is_unit_interval),
                _ => None,
            }
            .ok_or_else(|| self.error("expected a threshold in (0, 1]"))?;
            self.pos += 1;
            SubscriptionKind::Role { description: word_tokens(&text), threshold }
        } else {
            return Err(self.error("expected `when` or `role`"));
        };
        if self.peek().is_some() && !self.at_keyword("subscriber") {
            return Err(self.error("expected end of block"));
        }
        Ok(Subscription { subscriber_id, kind })
    }

    fn or_expr(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword("or") {
            self.pos += 1;
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and_expr()?));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.atom()?;
        while self.at_keyword("and") {
            self.pos += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.atom()?));
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<Expr, RuleError> {
        if self.peek() == Some(&Tok::Sym("(")) {
            self.pos += 1;
            let e = self.or_expr()?;
            if self.peek() != Some(&Tok::Sym(")")) {
                return Err(self.error("expected `)`"));
            }
            self.pos += 1;
            return Ok(e);
        }
        let (line, column) = self.here();
        let field = match self.peek() {
            Some(Tok::Word(w)) => {
                Field::from_name(w).ok_or_else(|| RuleError::UnknownField { field: w.clone(), line, column })?
            }
            _ => return Err(self.error("expected a field name")),
        };
        self.pos += 1;
        let op = match self.peek() {
            Some(Tok::Sym("=")) => Op::Eq,
            Some(Tok::Sym("!=")) => Op::Ne,
            Some(Tok::Sym(">=")) => Op::Ge,
            Some(Tok::Sym("<=")) => Op::Le,
            Some(Tok::Word(w)) if w == "contains" => Op::Contains,
            _ => return Err(self.error("expected an operator")),
        };
        self.pos += 1;
        let literal = match self.peek() {
            Some(Tok::Str(s)) => Literal::Str(s.clone()),
            Some(Tok::Word(w)) => match w.parse::<Decimal>() {
                Ok(d) => Literal::Num(d),
                Err(_) => return Err(self.error("expected a string or number literal")),
            },
            _ => return Err(self.error("expected a string or number literal")),
        };
        self.pos += 1;
        Ok(Expr::Cmp(Comparison { field, op, literal }))
    }
}

/// Parse the subscription file. An empty file yields no subscriptions.
pub fn parse_rules(text: &str) -> Result<Vec<Subscription>, RuleError> {
    let lexemes = lex(text)?;
    let end = (text.lines().count().max(1), text.lines().last().map_or(0, |l| l.chars().count()) + 1);
    let mut p = Parser { lexemes, pos: 0, end };
    let mut subs = Vec::new();
    while p.peek().is_some() {
        subs.push(p.block()?);
    }
    Ok(subs)
}

enum Value {
    Text(String),
    Num(Decimal),
}

fn field_value(instance: &DataModelInstance, field: Field) -> Option<Value> {
    let s = &instance.slots;
    let text = |v: &Option<String>| v.clone().map(Value::Text);
    match field {
        Field::Authority => text(&s.authority),
        Field::RegulatedEntity => text(&s.regulated_entity),
        Field::Threshold => text(&s.threshold),
        Field::Citation => text(&s.citation),
        Field::Direction => {
            (s.direction != Direction::Unspecified).then(|| Value::Text(s.direction.to_string()))
        }
        Field::QuantityValue => s.quantity.as_ref().map(|q| Value::Num(q.value.value())),
        Field::QuantityUnit => s.quantity.as_ref().map(|q| Value::Text(q.unit.to_string())),
    }
}

impl Comparison {
    /// Text compares case-insensitively. Ordering operators need numbers on
    /// both sides. A missing field makes every comparison false.
    pub fn eval(&self, instance: &DataModelInstance) -> bool {
        let Some(value) = field_value(instance, self.field) else {
            return false;
        };
        match (value, &self.literal) {
            (Value::Num(v), lit) => {
                let n = match lit {
                    Literal::Num(n) => Some(*n),
                    Literal::Str(s) => s.trim().parse::<Decimal>().ok(),
                };
                match (self.op, n) {
                    (Op::Eq, Some(n)) => v == n,
                    (Op::Ne, Some(n)) => v != n,
                    (Op::Ge, Some(n)) => v >= n,
                    (Op::Le, Some(n)) => v <= n,
                    (Op::Contains, _) => match lit {
                        Literal::Str(s) => v.to_string().contains(s.as_str()),
                        Literal::Num(n) => v.to_string().contains(&n.normalize().to_string()),
                    },
                    (_, None) => false,
                }
            }
            (Value::Text(v), lit) => {
                let lit = match lit {
                    Literal::Str(s) => s.to_lowercase(),
                    Literal::Num(n) => n.to_string(),
                };
                let v = v.to_lowercase();
                match self.op {
                    Op::Eq => v == lit,
                    Op::Ne => v != lit,
                    Op::Contains => v.contains(&lit),
                    Op::Ge | Op::Le => false,
                }
            }
        }
    }
}

impl Expr {
    pub fn eval(&self, instance: &DataModelInstance) -> bool {
        match self {
            Expr::Cmp(c) => c.eval(instance),
            Expr::And(a, b) => a.eval(instance) && b.eval(instance),
            Expr::Or(a, b) => a.eval(instance) || b.eval(instance),
        }
    }

    fn true_fields(&self, instance: &DataModelInstance, out: &mut BTreeSet<&'static str>) {
        match self {
            Expr::Cmp(c) => {
                if c.eval(instance) {
                    out.insert(c.field.as_str());
                }
            }
            Expr::And(a, b) | Expr::Or(a, b) => {
                a.true_fields(instance, out);
                b.true_fields(instance, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("MalformedLine {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("DuplicateTerm: {0} has more than one parent")]
    DuplicateTerm(String),
    #[error("Empty: taxonomy has no terms")]
    Empty,
    #[error("CycleDetected: parent chain loops through {0}")]
    CycleDetected(String),
    #[error("MultipleRoots: {0} and {1}")]
    MultipleRoots(String, String),
    #[error("OrphanTerm: parent {0} is not a declared term")]
    OrphanTerm(String),
    #[error("UnknownTerm: {0}")]
    UnknownTerm(String),
}

/// A validated is-a hierarchy with a single root at depth 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    parent: BTreeMap<String, String>,
    depth: BTreeMap<String, usize>,
    root: String,
}

impl Taxonomy {
    /// `child<TAB>parent` lines; the root is its own parent. Terms are
    /// lowercased.
    pub fn parse(text: &str) -> Result<Taxonomy, TaxonomyError> {
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (child, par) = raw.split_once('\t').ok_or_else(|| TaxonomyError::MalformedLine {
                line: i + 1,
                message: "expected child<TAB>parent".into(),
            })?;
            let (child, par) = (child.trim().to_lowercase(), par.trim().to_lowercase());
            if child.is_empty() || par.is_empty() || par.contains('\t') {
                return Err(TaxonomyError::MalformedLine { line: i + 1, message: "empty or extra field".into() });
            }
            match parent.get(&child) {
                Some(p) if *p != par => return Err(TaxonomyError::DuplicateTerm(child)),
                _ => {
                    parent.insert(child, par);
                }
            }
        }
        if parent.is_empty() {
            return Err(TaxonomyError::Empty);
        }
        if let Some(orphan) = parent.values().find(|p| !parent.contains_key(*p)) {
            return Err(TaxonomyError::OrphanTerm(orphan.clone()));
        }
        let roots: Vec<&String> = parent.iter().filter(|(c, p)| c == p).map(|(c, _)| c).collect();
        if roots.len() > 1 {
            return Err(TaxonomyError::MultipleRoots(roots[0].clone(), roots[1].clone()));
        }

        let mut depth: BTreeMap<String, usize> = BTreeMap::new();
        for term in parent.keys() {
            let mut chain = vec![term.as_str()];
            let mut on_chain: BTreeSet<&str> = BTreeSet::from([term.as_str()]);
            let mut cur = term.as_str();
            let base = loop {
                if let Some(&d) = depth.get(cur) {
                    chain.pop();
                    break d;
                }
                let p = parent[cur].as_str();
                if p == cur {
                    chain.pop();
                    depth.insert(cur.to_string(), 1);
                    break 1;
                }
                if !on_chain.insert(p) {
                    return Err(TaxonomyError::CycleDetected(p.to_string()));
                }
                chain.push(p);
                cur = p;
            };
            for (k, t) in chain.iter().rev().enumerate() {
                depth.insert(t.to_string(), base + k + 1);
            }
        }
        let root = roots.first().map(|r| r.to_string()).ok_or_else(|| {
            TaxonomyError::CycleDetected(parent.keys().next().cloned().unwrap_or_default())
        })?;
        Ok(Taxonomy { parent, depth, root })
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.parent.contains_key(term)
    }

    pub fn parent_of(&self, term: &str) -> Option<&str> {
        self.parent.get(term).map(String::as_str)
    }

    pub fn depth(&self, term: &str) -> Option<usize> {
        self.depth.get(term).copied()
    }

    /// Map a token onto a taxonomy term: exact, then with a plural `s`
    /// removed.
    pub fn lookup(&self, token: &str) -> Option<&str> {
        let t = token.to_lowercase();
        if let Some((k, _)) = self.parent.get_key_value(&t) {
            return Some(k);
        }
        let singular = t.strip_suffix('s')?;
        self.parent.get_key_value(singular).map(|(k, _)| k.as_str())
    }

    /// Deepest common ancestor.
    pub fn lcs(&self, a: &str, b: &str) -> Result<&str, TaxonomyError> {
        let (mut a, mut b) = (self.known(a)?, self.known(b)?);
        while self.depth[a] > self.depth[b] {
            a = &self.parent[a];
        }
        while self.depth[b] > self.depth[a] {
            b = &self.parent[b];
        }
        while a != b {
            a = &self.parent[a];
            b = &self.parent[b];
        }
        Ok(a)
    }

    fn known<'a>(&'a self, term: &str) -> Result<&'a str, TaxonomyError> {
        self.parent.get_key_value(term).map(|(k, _)| k.as_str()).ok_or_else(|| TaxonomyError::UnknownTerm(term.into()))
    }
}

/// `2·depth(lcs) / (depth(a) + depth(b))`, exact.
pub fn wup_similarity(tax: &Taxonomy, a: &str, b: &str) -> Result<Rational, TaxonomyError> {
    let lcs = tax.lcs(a, b)?;
    let d = |t: &str| tax.depth[t] as u64;
    Ok(ratio::ratio(2 * d(lcs), d(a) + d(b)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticScore {
    pub score: Rational,
    /// Metadata terms that were the best match for some role token.
    pub matched: BTreeSet<String>,
    /// Tokens dropped because they are not taxonomy terms.
    pub excluded: usize,
}

/// Mean over in-taxonomy role tokens of the best Wu-Palmer similarity to
/// any in-taxonomy metadata token; zero when either side is empty.
pub fn semantic_score<R, M>(role: &[R], metadata: &[M], tax: &Taxonomy) -> SemanticScore
where
    R: AsRef<str>,
    M: AsRef<str>,
{
    let role_terms: Vec<&str> = role.iter().filter_map(|t| tax.lookup(t.as_ref())).collect();
    let meta_terms: BTreeSet<&str> = metadata.iter().filter_map(|t| tax.lookup(t.as_ref())).collect();
    let meta_known = metadata.iter().filter(|t| tax.lookup(t.as_ref()).is_some()).count();
    let excluded = (role.len() - role_terms.len()) + (metadata.len() - meta_known);
    let mut matched = BTreeSet::new();
    if role_terms.is_empty() || meta_terms.is_empty() {
        return SemanticScore { score: Rational::zero(), matched, excluded };
    }
    let mut total = Rational::zero();
    for r in &role_terms {
        let (best_term, best) = meta_terms
            .iter()
            .map(|m| (*m, wup_similarity(tax, r, m).expect("both terms are in the taxonomy")))
            .fold(None::<(&str, Rational)>, |acc, (m, s)| match acc {
                Some((_, ref b)) if *b >= s => acc,
                _ => Some((m, s)),
            })
            .expect("metadata is non-empty");
        matched.insert(best_term.to_string());
        total += best;
    }
    let score = total / Rational::from_integer((role_terms.len() as u64).into());
    SemanticScore { score, matched, excluded }
}

fn word_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| t.kind == TokenKind::Word).map(|t| t.surface.to_lowercase()).collect()
}

/// Words of the filled slot surfaces, the direction, and the predicate
/// labels of the instance's triples.
pub fn metadata_tokens(instance: &DataModelInstance) -> Vec<String> {
    let s = &instance.slots;
    let mut out = Vec::new();
    for v in [&s.authority, &s.regulated_entity, &s.threshold, &s.citation].into_iter().flatten() {
        out.extend(word_tokens(v));
    }
    if s.direction != Direction::Unspecified {
        out.push(s.direction.as_str().to_lowercase());
    }
    for t in &instance.triples {
        out.extend(t.predicate_label.split('_').filter(|p| !p.is_empty()).map(str::to_string));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AlertReason {
    RuleMatch,
    Similarity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub subscriber_id: String,
    pub article_id: String,
    pub reason: AlertReason,
    #[serde(with = "ratio::serde_opt_str")]
    pub score: Option<Rational>,
    pub matched_fields: Vec<String>,
}

impl fmt::Display for Alert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- {} ({:?})", self.subscriber_id, self.article_id, self.reason)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlertBatch {
    pub alerts: Vec<Alert>,
    pub diagnostics: Vec<String>,
}

/// Evaluate every subscription against one instance. A subscriber with
/// several blocks gets at most one alert, from the first block that fires.
pub fn generate_alerts(instance: &DataModelInstance, subscriptions: &[Subscription], tax: &Taxonomy) -> AlertBatch {
    let mut fired: BTreeMap<&str, Alert> = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let metadata = metadata_tokens(instance);
    for sub in subscriptions {
        if fired.contains_key(sub.subscriber_id.as_str()) {
            continue;
        }
        let alert = match &sub.kind {
            SubscriptionKind::Rule(expr) => expr.eval(instance).then(|| {
                let mut fields = BTreeSet::new();
                expr.true_fields(instance, &mut fields);
                (AlertReason::RuleMatch, None, fields.into_iter().map(str::to_string).collect())
            }),
            SubscriptionKind::Role { description, threshold } => {
                let s = semantic_score(description, &metadata, tax);
                if s.excluded > 0 {
                    diagnostics.push(format!(
                        "{}: {} tokens outside the taxonomy for {}",
                        instance.article_id, s.excluded, sub.subscriber_id
                    ));
                }
                (s.score >= *threshold && !s.score.is_zero())
                    .then(|| (AlertReason::Similarity, Some(s.score), s.matched.into_iter().collect()))
            }
        };
        if let Some((reason, score, matched_fields)) = alert {
            fired.insert(
                &sub.subscriber_id,
                Alert {
                    subscriber_id: sub.subscriber_id.clone(),
                    article_id: instance.article_id.clone(),
                    reason,
                    score,
                    matched_fields,
                },
            );
        }
    }
    AlertBatch { alerts: fired.into_values().collect(), diagnostics }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fuse::Slots;
    use crate::ratio::ratio;
    use crate::textcore::{Amount, QuantityMention, Span, Unit};

    const FOUR: &str = "entity\tentity\ninstitution\tentity\nbank\tinstitution\nregulator\tinstitution\n";

    fn cmp(field: Field, lit: &str) -> Expr {
        Expr::Cmp(Comparison { field, op: Op::Eq, literal: Literal::Str(lit.into()) })
    }

    #[test]
    fn parse_rule_block() {
        let subs = parse_rules(
            "subscriber risk-team\nwhen direction = \"increase\" and quantity.value >= 1000000000\n",
        )
        .unwrap();
        assert_eq!(subs.len(), 1);
        assert_eq!(subs[0].subscriber_id, "risk-team");
        let SubscriptionKind::Rule(Expr::And(_, rhs)) = &subs[0].kind else { panic!("{:?}", subs[0]) };
        assert_eq!(
            **rhs,
            Expr::Cmp(Comparison {
                field: Field::QuantityValue,
                op: Op::Ge,
                literal: Literal::Num(Decimal::from(1_000_000_000u64))
            })
        );
    }

    #[test]
    fn and_binds_tighter() {
        let subs = parse_rules("subscriber s when authority = \"x\" or threshold = \"y\" and citation = \"z\"").unwrap();
        let expected = Expr::Or(
            Box::new(cmp(Field::Authority, "x")),
            Box::new(Expr::And(Box::new(cmp(Field::Threshold, "y")), Box::new(cmp(Field::Citation, "z")))),
        );
        assert_eq!(subs[0].kind, SubscriptionKind::Rule(expected));

        let subs = parse_rules("subscriber s when (authority = \"x\" or threshold = \"y\") and citation = \"z\"").unwrap();
        assert!(matches!(&subs[0].kind, SubscriptionKind::Rule(Expr::And(..))));
    }

    #[test]
    fn rule_errors() {
        assert_eq!(
            parse_rules("subscriber s\nwhen color = \"red\"").unwrap_err(),
            RuleError::UnknownField { field: "color".into(), line: 2, column: 6 }
        );
        let cases = [
            ("subscriber s\nwhen authority = ", 2),
            ("subscriber s\nwhen authority ~ \"x\"", 2),
            ("when authority = \"x\"", 1),
            ("subscriber s\nrole \"bank\" threshold 1.5", 2),
            ("subscriber s\nwhen (authority = \"x\"", 2),
            ("subscriber s\nwhen authority = \"x", 2),
        ];
        for (text, line) in cases {
            match parse_rules(text) {
                Err(RuleError::SyntaxError { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(parse_rules("").unwrap().is_empty());
        assert!(parse_rules("# nothing here\n").unwrap().is_empty());
    }

    #[test]
    fn role_block() {
        let subs = parse_rules("subscriber ops\nrole \"Community banks\" threshold 0.7\n").unwrap();
        assert_eq!(
            subs[0].kind,
            SubscriptionKind::Role { description: vec!["community".into(), "banks".into()], threshold: ratio(7, 10) }
        );
    }

    #[test]
    fn taxonomy_loading() {
        let t = Taxonomy::parse(FOUR).unwrap();
        assert_eq!(t.root(), "entity");
        assert_eq!(t.depth("bank"), Some(3));
        assert_eq!(t.depth("institution"), Some(2));
        assert!(matches!(Taxonomy::parse("a\tb\nb\ta\n"), Err(TaxonomyError::CycleDetected(_))));
        assert!(matches!(Taxonomy::parse("r\tr\na\tb\nb\ta\n"), Err(TaxonomyError::CycleDetected(_))));
        assert!(matches!(Taxonomy::parse("a\ta\nb\tb\n"), Err(TaxonomyError::MultipleRoots(..))));
        assert!(matches!(Taxonomy::parse("a\ta\nb\tc\n"), Err(TaxonomyError::OrphanTerm(o)) if o == "c"));
        assert!(matches!(Taxonomy::parse("a a\n"), Err(TaxonomyError::MalformedLine { line: 1, .. })));
        assert!(matches!(Taxonomy::parse(""), Err(TaxonomyError::Empty)));
    }

    #[test]
    fn wup_worked_values() {
        let t = Taxonomy::parse(FOUR).unwrap();
        assert_eq!(wup_similarity(&t, "bank", "bank").unwrap(), ratio(1, 1));
        assert_eq!(wup_similarity(&t, "bank", "regulator").unwrap(), ratio(2, 3));
        assert_eq!(wup_similarity(&t, "entity", "bank").unwrap(), ratio(1, 2));
        assert!(matches!(wup_similarity(&t, "bank", "moon"), Err(TaxonomyError::UnknownTerm(_))));
    }

    #[test]
    fn semantic_worked_values() {
        let t = Taxonomy::parse(FOUR).unwrap();
        assert_eq!(semantic_score(&["bank"], &["bank"], &t).score, ratio(1, 1));
        assert_eq!(semantic_score(&["bank"], &["regulator"], &t).score, ratio(2, 3));
        assert_eq!(semantic_score(&["bank", "regulator"], &["bank"], &t).score, ratio(5, 6));
        let s = semantic_score(&["banks", "zebra"], &["the", "bank"], &t);
        assert_eq!(s.score, ratio(1, 1));
        assert_eq!(s.excluded, 2);
        assert_eq!(semantic_score(&["zebra"], &["bank"], &t).score, Rational::zero());
        assert_eq!(semantic_score::<&str, &str>(&["bank"], &[], &t).score, Rational::zero());
    }

    fn instance() -> DataModelInstance {
        DataModelInstance {
            article_id: "a1".into(),
            slots: Slots {
                authority: Some("The Board".into()),
                regulated_entity: Some("community banks".into()),
                threshold: Some("asset threshold".into()),
                quantity: Some(QuantityMention {
                    span: Span::new(0, 1),
                    value: Amount::new(Decimal::from(3_000_000_000u64)),
                    unit: Unit::Usd,
                    scale_word: None,
                }),
                direction: Direction::Increase,
                ..Slots::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn rule_alert() {
        let t = Taxonomy::parse(FOUR).unwrap();
        let subs = parse_rules("subscriber risk-team\nwhen direction = \"increase\" and quantity.value >= 1000000000\n").unwrap();
        let batch = generate_alerts(&instance(), &subs, &t);
        assert_eq!(batch.alerts.len(), 1);
        let a = &batch.alerts[0];
        assert_eq!(a.reason, AlertReason::RuleMatch);
        assert_eq!(a.matched_fields, vec!["direction", "quantity.value"]);
        assert!(generate_alerts(&instance(), &[], &t).alerts.is_empty());
    }

    #[test]
    fn missing_fields_are_false() {
        let empty = DataModelInstance::default();
        for rule in [
            "citation = \"x\"",
            "citation != \"x\"",
            "quantity.value >= 0",
            "quantity.value <= 0",
            "direction contains \"\"",
        ] {
            let subs = parse_rules(&format!("subscriber s when {rule}")).unwrap();
            let SubscriptionKind::Rule(e) = &subs[0].kind else { unreachable!() };
            assert!(!e.eval(&empty), "{rule}");
        }
        let subs = parse_rules("subscriber s when authority >= \"a\" or quantity.unit = \"usd\"").unwrap();
        let SubscriptionKind::Rule(e) = &subs[0].kind else { unreachable!() };
        assert!(e.eval(&instance()));
    }

    #[test]
    fn similarity_alert_and_dedup() {
        let t = Taxonomy::parse(FOUR).unwrap();
        let subs = parse_rules(
            "subscriber ops\nrole \"bank\" threshold 0.7\nsubscriber ops\nwhen direction = \"increase\"\nsubscriber zz\nrole \"regulator\" threshold 0.7",
        )
        .unwrap();
        let batch = generate_alerts(&instance(), &subs, &t);
        assert_eq!(batch.alerts.len(), 1);
        let a = &batch.alerts[0];
        assert_eq!((a.subscriber_id.as_str(), a.reason), ("ops", AlertReason::Similarity));
        assert_eq!(a.score, Some(ratio(1, 1)));
        assert_eq!(a.matched_fields, vec!["bank"]);
        assert_eq!(
            crate::json::to_canonical_string(a).unwrap(),
            r#"{"article_id":"a1","matched_fields":["bank"],"reason":"SIMILARITY","score":"1","subscriber_id":"ops"}"#
        );
    }
}

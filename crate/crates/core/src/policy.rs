//! Policy document format: grammar, recursive-descent parser, canonical
//! serializer, and three-valued expression evaluator.
//!
//! A policy document looks like:
//!
//! ```text
//! <policy ID="1" >
//! <target>
//! <subject> Actor.ID </subject>
//! <record>Operation.description</record>
//! <restriction>Actor.role=="AuthorizedUser"</restriction>
//! </target>
//! <condition> system.machineid == "192.168.2.35" </condition>
//! <effect> Permit </effect>
//! <obligation>
//! <temporal constraint> 10 days </temporal constraint>
//! </obligation>
//! </policy>
//! ```
//!
//! Whitespace between tokens is insignificant. `<record>` holds either a
//! comma-separated set of operation descriptions the policy governs, or the
//! literal attribute path `Operation.description`, which scopes the policy
//! to every operation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::record::{Effect, Timestamp};

/// A single comparison leaf: dotted path against a quoted string literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub path: String,
    pub op: CmpOp,
    pub literal: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmpOp::Eq => f.write_str("=="),
            CmpOp::Ne => f.write_str("!="),
        }
    }
}

/// Expression tree: comparisons joined by conjunction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Cmp(Comparison),
    And(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eq(path: &str, literal: &str) -> Expr {
        Expr::Cmp(Comparison {
            path: path.to_string(),
            op: CmpOp::Eq,
            literal: literal.to_string(),
        })
    }

    pub fn ne(path: &str, literal: &str) -> Expr {
        Expr::Cmp(Comparison {
            path: path.to_string(),
            op: CmpOp::Ne,
            literal: literal.to_string(),
        })
    }

    pub fn and(self, other: Expr) -> Expr {
        Expr::And(Box::new(self), Box::new(other))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Cmp(c) => write!(f, "{} {} \"{}\"", c.path, c.op, c.literal),
            Expr::And(a, b) => write!(f, "{a} && {b}"),
        }
    }
}

/// Three-valued evaluation result. A comparison over an absent attribute is
/// `Indeterminate`, never silently true or false.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthValue {
    True,
    False,
    Indeterminate,
}

impl TruthValue {
    pub fn and(self, other: TruthValue) -> TruthValue {
        use TruthValue::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            (True, True) => True,
        }
    }

    pub fn is_true(self) -> bool {
        self == TruthValue::True
    }
}

/// Attribute environment: dotted path to string value. Absent paths are
/// distinguishable from empty-string values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttrEnv(BTreeMap<String, String>);

impl AttrEnv {
    pub fn new() -> Self {
        AttrEnv(BTreeMap::new())
    }

    pub fn set(&mut self, path: impl Into<String>, value: impl Into<String>) {
        self.0.insert(path.into(), value.into());
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.0.get(path).map(String::as_str)
    }
}

impl<const N: usize> From<[(&str, &str); N]> for AttrEnv {
    fn from(entries: [(&str, &str); N]) -> Self {
        let mut env = AttrEnv::new();
        for (k, v) in entries {
            env.set(k, v);
        }
        env
    }
}

/// Evaluates an expression against an environment under three-valued
/// semantics: exact string comparison on present paths, `Indeterminate` as
/// soon as a referenced path is absent, `&&` false-dominant.
pub fn eval_expr(expr: &Expr, env: &AttrEnv) -> TruthValue {
    match expr {
        Expr::Cmp(c) => match env.get(&c.path) {
            None => TruthValue::Indeterminate,
            Some(v) => {
                let eq = v == c.literal;
                let holds = match c.op {
                    CmpOp::Eq => eq,
                    CmpOp::Ne => !eq,
                };
                if holds {
                    TruthValue::True
                } else {
                    TruthValue::False
                }
            }
        },
        Expr::And(a, b) => eval_expr(a, env).and(eval_expr(b, env)),
    }
}

/// The set of operation descriptions a policy governs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordScope {
    /// The literal `Operation.description` form: all operations.
    AllOperations,
    /// An explicit description set, e.g. `{read, write}`.
    Actions(BTreeSet<String>),
}

impl RecordScope {
    pub fn actions<I: IntoIterator<Item = S>, S: Into<String>>(items: I) -> Self {
        RecordScope::Actions(items.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, action: &str) -> bool {
        match self {
            RecordScope::AllOperations => true,
            RecordScope::Actions(set) => set.contains(action),
        }
    }
}

impl fmt::Display for RecordScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordScope::AllOperations => f.write_str("Operation.description"),
            RecordScope::Actions(set) => {
                let items: Vec<&str> = set.iter().map(String::as_str).collect();
                f.write_str(&items.join(","))
            }
        }
    }
}

/// Target block: whom the policy addresses, which operations it governs,
/// and the restriction the requesting actor must satisfy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    /// Either a literal actor id or an attribute path such as `Actor.ID`
    /// (which addresses any requesting actor).
    pub subject: String,
    pub scope: RecordScope,
    pub restriction: Expr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Obligation {
    /// Validity window in days from issuance; the policy is inapplicable
    /// once `now >= issuedAt + days`.
    TemporalConstraint { days: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyDoc {
    pub id: String,
    pub target: Target,
    pub condition: Expr,
    pub effect: Effect,
    pub obligations: Vec<Obligation>,
    pub issued_at: Timestamp,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyParseErrorKind {
    UnknownTag(String),
    UnbalancedTag { expected: String, found: String },
    MalformedTag(String),
    MalformedExpr(String),
    NonIntegerDayCount(String),
    UnknownEffect(String),
    BadTimestamp(String),
    EmptyRecordScope,
    BadRecordScope(String),
    UnexpectedEnd,
    TrailingContent,
}

impl fmt::Display for PolicyParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use PolicyParseErrorKind::*;
        match self {
            UnknownTag(t) => write!(f, "unknown tag <{t}>"),
            UnbalancedTag { expected, found } => {
                write!(f, "unbalanced tags: expected <{expected}>, found <{found}>")
            }
            MalformedTag(t) => write!(f, "malformed tag <{t}>"),
            MalformedExpr(m) => write!(f, "malformed expression: {m}"),
            NonIntegerDayCount(v) => write!(f, "non-integer day count {v:?}"),
            UnknownEffect(v) => write!(f, "unknown effect {v:?}"),
            BadTimestamp(v) => write!(f, "bad issued timestamp {v:?}"),
            EmptyRecordScope => f.write_str("empty record scope"),
            BadRecordScope(v) => write!(f, "bad record scope item {v:?}"),
            UnexpectedEnd => f.write_str("unexpected end of input"),
            TrailingContent => f.write_str("trailing content after </policy>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("policy parse error at line {line}, column {column}: {kind}")]
pub struct PolicyParseError {
    pub kind: PolicyParseErrorKind,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("invalid policy document: {0}")]
    Invalid(String),
    #[error(transparent)]
    Parse(#[from] PolicyParseError),
}

const KNOWN_TAGS: &[&str] = &[
    "policy",
    "issued",
    "target",
    "subject",
    "record",
    "restriction",
    "condition",
    "effect",
    "obligation",
    "temporal constraint",
];

struct Scanner<'a> {
    input: &'a str,
    pos: usize,
}

#[derive(Debug)]
enum Tag {
    Open { name: String, attrs: String },
    Close { name: String },
}

impl<'a> Scanner<'a> {
    fn new(input: &'a str) -> Self {
        Scanner { input, pos: 0 }
    }

    fn error(&self, kind: PolicyParseErrorKind, at: usize) -> PolicyParseError {
        let prefix = &self.input[..at.min(self.input.len())];
        let line = prefix.matches('\n').count() + 1;
        let column = at - prefix.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
        PolicyParseError { kind, line, column }
    }

    fn skip_ws(&mut self) {
        let rest = &self.input[self.pos..];
        let trimmed = rest.trim_start();
        self.pos += rest.len() - trimmed.len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.input.len()
    }

    /// Reads the next `<...>` tag. Inner whitespace runs collapse so that
    /// `<temporal constraint>` is one tag name.
    fn next_tag(&mut self) -> Result<Tag, PolicyParseError> {
        self.skip_ws();
        let start = self.pos;
        if !self.input[self.pos..].starts_with('<') {
            let kind = if self.pos >= self.input.len() {
                PolicyParseErrorKind::UnexpectedEnd
            } else {
                PolicyParseErrorKind::MalformedTag(
                    self.input[self.pos..].chars().take(16).collect(),
                )
            };
            return Err(self.error(kind, start));
        }
        let close = self.input[self.pos..]
            .find('>')
            .ok_or_else(|| self.error(PolicyParseErrorKind::UnexpectedEnd, start))?;
        let inner = self.input[self.pos + 1..self.pos + close].trim();
        self.pos += close + 1;
        if let Some(name) = inner.strip_prefix('/') {
            return Ok(Tag::Close {
                name: normalize_tag(name.trim()),
            });
        }
        // Split a possible attribute part: everything after the first
        // whitespace run that is not part of a multi-word tag name.
        let normalized = normalize_tag(inner);
        if KNOWN_TAGS.contains(&normalized.as_str()) {
            return Ok(Tag::Open {
                name: normalized,
                attrs: String::new(),
            });
        }
        let (name, attrs) = match inner.find(char::is_whitespace) {
            Some(i) => (inner[..i].to_string(), inner[i..].trim().to_string()),
            None => (inner.to_string(), String::new()),
        };
        Ok(Tag::Open { name, attrs })
    }

    /// Text between the current position and the next `<`.
    fn text_chunk(&mut self) -> (usize, &'a str) {
        let start = self.pos;
        let end = self.input[self.pos..]
            .find('<')
            .map(|i| self.pos + i)
            .unwrap_or(self.input.len());
        self.pos = end;
        let chunk = &self.input[start..end];
        let trimmed = chunk.trim();
        let offset = start + (chunk.len() - chunk.trim_start().len());
        (offset, trimmed)
    }

    fn expect_open(&mut self, name: &str) -> Result<String, PolicyParseError> {
        let at = self.pos;
        match self.next_tag()? {
            Tag::Open { name: n, attrs } if n == name => Ok(attrs),
            Tag::Open { name: n, .. } => Err(self.tag_mismatch(name, &n, at)),
            Tag::Close { name: n } => Err(self.tag_mismatch(name, &format!("/{n}"), at)),
        }
    }

    fn expect_close(&mut self, name: &str) -> Result<(), PolicyParseError> {
        let at = self.pos;
        match self.next_tag()? {
            Tag::Close { name: n } if n == name => Ok(()),
            Tag::Close { name: n } => Err(self.tag_mismatch(&format!("/{name}"), &format!("/{n}"), at)),
            Tag::Open { name: n, .. } => Err(self.tag_mismatch(&format!("/{name}"), &n, at)),
        }
    }

    fn tag_mismatch(&self, expected: &str, found: &str, at: usize) -> PolicyParseError {
        let bare = found.trim_start_matches('/');
        if KNOWN_TAGS.contains(&bare) {
            self.error(
                PolicyParseErrorKind::UnbalancedTag {
                    expected: expected.to_string(),
                    found: found.to_string(),
                },
                at,
            )
        } else {
            self.error(PolicyParseErrorKind::UnknownTag(found.to_string()), at)
        }
    }
}

fn normalize_tag(name: &str) -> String {
    name.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_ident(s: &str) -> Option<&str> {
    let mut chars = s.char_indices();
    match chars.next() {
        Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return None,
    }
    let end = s
        .char_indices()
        .take_while(|(_, c)| c.is_ascii_alphanumeric() || *c == '_' || *c == '-')
        .map(|(i, c)| i + c.len_utf8())
        .last()
        .unwrap_or(0);
    Some(&s[..end])
}

/// True when `s` is a dotted attribute path with at least two segments.
pub fn is_attr_path(s: &str) -> bool {
    let segments: Vec<&str> = s.split('.').collect();
    segments.len() >= 2
        && segments
            .iter()
            .all(|seg| parse_ident(seg).map(|i| i.len() == seg.len()).unwrap_or(false))
}

struct ExprParser<'a> {
    scanner: &'a Scanner<'a>,
    chunk: &'a str,
    base: usize,
    pos: usize,
}

impl<'a> ExprParser<'a> {
    fn error(&self, message: impl Into<String>) -> PolicyParseError {
        self.scanner.error(
            PolicyParseErrorKind::MalformedExpr(message.into()),
            self.base + self.pos,
        )
    }

    fn skip_ws(&mut self) {
        let rest = &self.chunk[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn parse(mut self) -> Result<Expr, PolicyParseError> {
        let mut expr = Expr::Cmp(self.parse_cmp()?);
        loop {
            self.skip_ws();
            if self.pos >= self.chunk.len() {
                return Ok(expr);
            }
            if self.chunk[self.pos..].starts_with("&&") {
                self.pos += 2;
                expr = expr.and(Expr::Cmp(self.parse_cmp()?));
            } else {
                return Err(self.error("expected `&&` or end of expression"));
            }
        }
    }

    fn parse_cmp(&mut self) -> Result<Comparison, PolicyParseError> {
        self.skip_ws();
        let rest = &self.chunk[self.pos..];
        if rest.is_empty() {
            return Err(self.error("expected a comparison"));
        }
        // path := ident ('.' ident)+
        let mut len = 0;
        loop {
            let seg = parse_ident(&rest[len..]).ok_or_else(|| self.error("expected an identifier"))?;
            if seg.is_empty() {
                return Err(self.error("expected an identifier"));
            }
            len += seg.len();
            if rest[len..].starts_with('.') {
                len += 1;
            } else {
                break;
            }
        }
        let path = &rest[..len];
        if !is_attr_path(path) {
            return Err(self.error(format!("{path:?} is not a dotted attribute path")));
        }
        self.pos += len;
        self.skip_ws();
        let rest = &self.chunk[self.pos..];
        let op = if rest.starts_with("==") {
            CmpOp::Eq
        } else if rest.starts_with("!=") {
            CmpOp::Ne
        } else {
            return Err(self.error("expected `==` or `!=`"));
        };
        self.pos += 2;
        self.skip_ws();
        let rest = &self.chunk[self.pos..];
        if !rest.starts_with('"') {
            return Err(self.error("expected a quoted string literal"));
        }
        let end = rest[1..]
            .find('"')
            .ok_or_else(|| self.error("unterminated string literal"))?;
        let literal = rest[1..1 + end].to_string();
        self.pos += end + 2;
        Ok(Comparison {
            path: path.to_string(),
            op,
            literal,
        })
    }
}

fn parse_expr_chunk(scanner: &Scanner<'_>, base: usize, chunk: &str) -> Result<Expr, PolicyParseError> {
    ExprParser {
        scanner,
        chunk,
        base,
        pos: 0,
    }
    .parse()
}

fn parse_record_scope(
    scanner: &Scanner<'_>,
    base: usize,
    chunk: &str,
) -> Result<RecordScope, PolicyParseError> {
    if chunk.trim() == "Operation.description" {
        return Ok(RecordScope::AllOperations);
    }
    let mut set = BTreeSet::new();
    for item in chunk.split(',') {
        let item = item.trim();
        if item.is_empty() {
            return Err(scanner.error(PolicyParseErrorKind::EmptyRecordScope, base));
        }
        match parse_ident(item) {
            Some(ident) if ident.len() == item.len() => {
                set.insert(item.to_string());
            }
            _ => {
                return Err(scanner.error(
                    PolicyParseErrorKind::BadRecordScope(item.to_string()),
                    base,
                ))
            }
        }
    }
    if set.is_empty() {
        return Err(scanner.error(PolicyParseErrorKind::EmptyRecordScope, base));
    }
    Ok(RecordScope::Actions(set))
}

fn parse_policy_id(scanner: &Scanner<'_>, attrs: &str, at: usize) -> Result<String, PolicyParseError> {
    let attrs = attrs.trim();
    let rest = attrs
        .strip_prefix("ID")
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('='))
        .map(str::trim_start)
        .ok_or_else(|| scanner.error(PolicyParseErrorKind::MalformedTag(format!("policy {attrs}")), at))?;
    let rest = rest
        .strip_prefix('"')
        .ok_or_else(|| scanner.error(PolicyParseErrorKind::MalformedTag(format!("policy {attrs}")), at))?;
    let end = rest
        .find('"')
        .ok_or_else(|| scanner.error(PolicyParseErrorKind::MalformedTag(format!("policy {attrs}")), at))?;
    if !rest[end + 1..].trim().is_empty() || rest[..end].is_empty() {
        return Err(scanner.error(PolicyParseErrorKind::MalformedTag(format!("policy {attrs}")), at));
    }
    Ok(rest[..end].to_string())
}

/// Parses one policy document. A missing `<issued>` tag defaults to
/// `default_issued`, which callers record once at load time.
pub fn parse_policy(text: &str, default_issued: Timestamp) -> Result<PolicyDoc, PolicyParseError> {
    let mut scanner = Scanner::new(text);

    let at = scanner.pos;
    let attrs = scanner.expect_open("policy")?;
    let id = parse_policy_id(&scanner, &attrs, at)?;

    // issued? target
    let mut issued_at = default_issued;
    let at = scanner.pos;
    match scanner.next_tag()? {
        Tag::Open { name, .. } if name == "issued" => {
            let (base, chunk) = scanner.text_chunk();
            issued_at = Timestamp::parse(chunk).map_err(|_| {
                scanner.error(PolicyParseErrorKind::BadTimestamp(chunk.to_string()), base)
            })?;
            scanner.expect_close("issued")?;
            scanner.expect_open("target")?;
        }
        Tag::Open { name, .. } if name == "target" => {}
        Tag::Open { name, .. } => return Err(scanner.tag_mismatch("target", &name, at)),
        Tag::Close { name } => return Err(scanner.tag_mismatch("target", &format!("/{name}"), at)),
    }

    scanner.expect_open("subject")?;
    let (_, subject) = scanner.text_chunk();
    let subject = subject.to_string();
    scanner.expect_close("subject")?;

    scanner.expect_open("record")?;
    let (base, chunk) = scanner.text_chunk();
    let scope = parse_record_scope(&scanner, base, chunk)?;
    scanner.expect_close("record")?;

    scanner.expect_open("restriction")?;
    let (base, chunk) = scanner.text_chunk();
    let restriction = parse_expr_chunk(&scanner, base, chunk)?;
    scanner.expect_close("restriction")?;

    scanner.expect_close("target")?;

    scanner.expect_open("condition")?;
    let (base, chunk) = scanner.text_chunk();
    let condition = parse_expr_chunk(&scanner, base, chunk)?;
    scanner.expect_close("condition")?;

    scanner.expect_open("effect")?;
    let (base, chunk) = scanner.text_chunk();
    let effect = match chunk {
        "Permit" => Effect::Permit,
        "Deny" => Effect::Deny,
        other => {
            return Err(scanner.error(PolicyParseErrorKind::UnknownEffect(other.to_string()), base))
        }
    };
    scanner.expect_close("effect")?;

    // obligation? '</policy>'
    let mut obligations = Vec::new();
    let at = scanner.pos;
    match scanner.next_tag()? {
        Tag::Open { name, .. } if name == "obligation" => {
            scanner.expect_open("temporal constraint")?;
            let (base, chunk) = scanner.text_chunk();
            let days_text = chunk
                .strip_suffix("days")
                .map(str::trim)
                .ok_or_else(|| {
                    scanner.error(PolicyParseErrorKind::NonIntegerDayCount(chunk.to_string()), base)
                })?;
            let days: u32 = days_text.parse().map_err(|_| {
                scanner.error(PolicyParseErrorKind::NonIntegerDayCount(chunk.to_string()), base)
            })?;
            if days == 0 {
                return Err(scanner.error(
                    PolicyParseErrorKind::NonIntegerDayCount(chunk.to_string()),
                    base,
                ));
            }
            obligations.push(Obligation::TemporalConstraint { days });
            scanner.expect_close("temporal constraint")?;
            scanner.expect_close("obligation")?;
            scanner.expect_close("policy")?;
        }
        Tag::Close { name } if name == "policy" => {}
        Tag::Open { name, .. } => return Err(scanner.tag_mismatch("obligation", &name, at)),
        Tag::Close { name } => {
            return Err(scanner.tag_mismatch("/policy", &format!("/{name}"), at))
        }
    }

    if !scanner.at_end() {
        let at = scanner.pos;
        return Err(scanner.error(PolicyParseErrorKind::TrailingContent, at));
    }

    Ok(PolicyDoc {
        id,
        target: Target {
            subject,
            scope,
            restriction,
        },
        condition,
        effect,
        obligations,
        issued_at,
    })
}

/// Parses a bare expression, as found in preference record condition text.
pub fn parse_condition_text(text: &str) -> Result<Expr, PolicyParseError> {
    let scanner = Scanner::new(text);
    parse_expr_chunk(&scanner, 0, text.trim())
}

// ---------------------------------------------------------------------------
// Validation and canonical serialization
// ---------------------------------------------------------------------------

fn validate_expr(expr: &Expr, errors: &mut Vec<String>) {
    match expr {
        Expr::Cmp(c) => {
            if !is_attr_path(&c.path) {
                errors.push(format!("comparison path {:?} is not a dotted attribute path", c.path));
            }
            if c.literal.contains('"') {
                errors.push(format!("string literal {:?} contains a quote", c.literal));
            }
        }
        Expr::And(a, b) => {
            validate_expr(a, errors);
            validate_expr(b, errors);
        }
    }
}

/// Structural validity of a policy document.
pub fn validate_policy(doc: &PolicyDoc) -> Vec<String> {
    let mut errors = Vec::new();
    if doc.id.is_empty() {
        errors.push("empty policy id".to_string());
    }
    if doc.id.contains('"') {
        errors.push("policy id contains a quote".to_string());
    }
    if doc.target.subject.is_empty() {
        errors.push("empty target subject".to_string());
    }
    if doc.target.subject.contains('<') || doc.target.subject.contains('\n') {
        errors.push("target subject contains markup".to_string());
    }
    if let RecordScope::Actions(set) = &doc.target.scope {
        if set.is_empty() {
            errors.push("empty record scope".to_string());
        }
        for item in set {
            let ok = parse_ident(item).map(|i| i.len() == item.len()).unwrap_or(false);
            if !ok {
                errors.push(format!("record scope item {item:?} is not an identifier"));
            }
        }
    }
    validate_expr(&doc.target.restriction, &mut errors);
    validate_expr(&doc.condition, &mut errors);
    if doc.obligations.len() > 1 {
        errors.push("more than one obligation".to_string());
    }
    for ob in &doc.obligations {
        let Obligation::TemporalConstraint { days } = ob;
        if *days == 0 {
            errors.push("temporal constraint of zero days".to_string());
        }
    }
    errors
}

/// Canonical policy text. `parse_policy(serialize_policy(d)) == d`, and one
/// parse/serialize pass is a fixed point.
pub fn serialize_policy(doc: &PolicyDoc) -> Result<String, PolicyError> {
    let errors = validate_policy(doc);
    if !errors.is_empty() {
        return Err(PolicyError::Invalid(errors.join("; ")));
    }
    let mut out = String::new();
    out.push_str(&format!("<policy ID=\"{}\">\n", doc.id));
    out.push_str(&format!("<issued> {} </issued>\n", doc.issued_at));
    out.push_str("<target>\n");
    out.push_str(&format!("<subject> {} </subject>\n", doc.target.subject));
    out.push_str(&format!("<record> {} </record>\n", doc.target.scope));
    out.push_str(&format!("<restriction> {} </restriction>\n", doc.target.restriction));
    out.push_str("</target>\n");
    out.push_str(&format!("<condition> {} </condition>\n", doc.condition));
    out.push_str(&format!("<effect> {} </effect>\n", doc.effect));
    for ob in &doc.obligations {
        let Obligation::TemporalConstraint { days } = ob;
        out.push_str("<obligation>\n");
        out.push_str(&format!("<temporal constraint> {days} days </temporal constraint>\n"));
        out.push_str("</obligation>\n");
    }
    out.push_str("</policy>\n");
    Ok(out)
}

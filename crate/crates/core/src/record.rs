//! The five provenance record kinds and their canonical line serialization.
//!
//! Every record is an immutable value identified by a `RecordId` and (where
//! versioned) a `Timestamp`. Records serialize to exactly one JSON line with
//! a leading `"kind"` tag and a fixed key order, so that serialization is
//! byte-deterministic and injective over valid records.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{DateTime, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Opaque record identifier, unique within its record kind inside one store.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub String);

impl RecordId {
    pub fn new(value: impl Into<String>) -> Self {
        RecordId(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RecordId {
    fn from(s: &str) -> Self {
        RecordId(s.to_string())
    }
}

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid timestamp {input:?}: expected ISO-8601 UTC at second precision (e.g. 2014-01-01T00:00:00Z)")]
pub struct TimestampError {
    pub input: String,
}

/// UTC instant at second precision. Parsing and serialization round-trip
/// byte-identically through the `YYYY-MM-DDTHH:MM:SSZ` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn parse(input: &str) -> Result<Self, TimestampError> {
        let naive = NaiveDateTime::parse_from_str(input, TIMESTAMP_FORMAT).map_err(|_| {
            TimestampError {
                input: input.to_string(),
            }
        })?;
        Ok(Timestamp(Utc.from_utc_datetime(&naive)))
    }

    /// Current wall-clock time, truncated to whole seconds.
    pub fn now() -> Self {
        let now = Utc::now();
        Timestamp(Utc.timestamp_opt(now.timestamp(), 0).unwrap())
    }

    pub fn from_unix(secs: i64) -> Self {
        Timestamp(Utc.timestamp_opt(secs, 0).unwrap())
    }

    pub fn unix_seconds(&self) -> i64 {
        self.0.timestamp()
    }

    pub fn plus_days(&self, days: i64) -> Self {
        Timestamp(self.0 + chrono::Duration::days(days))
    }

    pub fn plus_seconds(&self, secs: i64) -> Self {
        Timestamp(self.0 + chrono::Duration::seconds(secs))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format(TIMESTAMP_FORMAT))
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Policy effect, shared between preference records and policy documents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Effect {
    Permit,
    Deny,
}

impl fmt::Display for Effect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Effect::Permit => f.write_str("Permit"),
            Effect::Deny => f.write_str("Deny"),
        }
    }
}

/// A data access transaction: who did what to which resource, under which
/// context, and the digest of the resource bytes afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperationRecord {
    pub id: RecordId,
    #[serde(rename = "actorId")]
    pub actor_id: RecordId,
    #[serde(rename = "contextId")]
    pub context_id: RecordId,
    pub description: String,
    /// Lowercase hex digest of the resource bytes after the operation.
    pub output: String,
    #[serde(rename = "resourceId")]
    pub resource_id: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageRecord {
    pub id: RecordId,
    #[serde(rename = "actorId")]
    pub actor_id: RecordId,
    #[serde(rename = "sourceId")]
    pub source_id: RecordId,
    #[serde(rename = "destinationId")]
    pub destination_id: RecordId,
    pub description: String,
    #[serde(rename = "contentCarrier")]
    pub content_carrier: String,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorRecord {
    pub id: RecordId,
    pub name: String,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextRecord {
    pub id: RecordId,
    pub state: String,
    /// Environment attributes, keyed by dotted lowercase paths such as
    /// `system.machineid`.
    pub parameter: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRecord {
    pub id: RecordId,
    pub target: String,
    pub condition: String,
    pub effect: Effect,
    pub obligations: Vec<String>,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Operation,
    Message,
    Actor,
    Context,
    Preference,
}

impl RecordKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::Operation => "operation",
            RecordKind::Message => "message",
            RecordKind::Actor => "actor",
            RecordKind::Context => "context",
            RecordKind::Preference => "preference",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the five provenance record kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProvenanceRecord {
    Operation(OperationRecord),
    Message(MessageRecord),
    Actor(ActorRecord),
    Context(ContextRecord),
    Preference(PreferenceRecord),
}

impl ProvenanceRecord {
    pub fn kind(&self) -> RecordKind {
        match self {
            ProvenanceRecord::Operation(_) => RecordKind::Operation,
            ProvenanceRecord::Message(_) => RecordKind::Message,
            ProvenanceRecord::Actor(_) => RecordKind::Actor,
            ProvenanceRecord::Context(_) => RecordKind::Context,
            ProvenanceRecord::Preference(_) => RecordKind::Preference,
        }
    }

    pub fn id(&self) -> &RecordId {
        match self {
            ProvenanceRecord::Operation(r) => &r.id,
            ProvenanceRecord::Message(r) => &r.id,
            ProvenanceRecord::Actor(r) => &r.id,
            ProvenanceRecord::Context(r) => &r.id,
            ProvenanceRecord::Preference(r) => &r.id,
        }
    }

    pub fn as_operation(&self) -> Option<&OperationRecord> {
        match self {
            ProvenanceRecord::Operation(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_actor(&self) -> Option<&ActorRecord> {
        match self {
            ProvenanceRecord::Actor(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_context(&self) -> Option<&ContextRecord> {
        match self {
            ProvenanceRecord::Context(r) => Some(r),
            _ => None,
        }
    }

    pub fn as_preference(&self) -> Option<&PreferenceRecord> {
        match self {
            ProvenanceRecord::Preference(r) => Some(r),
            _ => None,
        }
    }
}

fn is_lower_hex(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit() || ('a'..='f').contains(&c))
}

fn is_dotted_lower_path(s: &str) -> bool {
    let mut segments = 0;
    for seg in s.split('.') {
        if seg.is_empty() || !seg.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
            return false;
        }
        segments += 1;
    }
    segments >= 2
}

/// Checks every type invariant and returns one description per breach.
/// An empty list means the record is valid.
pub fn validate_record(record: &ProvenanceRecord) -> Vec<String> {
    let mut violations = Vec::new();
    if record.id().is_empty() {
        violations.push("empty id".to_string());
    }
    match record {
        ProvenanceRecord::Operation(op) => {
            if op.actor_id.is_empty() {
                violations.push("empty actorId".to_string());
            }
            if op.context_id.is_empty() {
                violations.push("empty contextId".to_string());
            }
            if op.description.is_empty() {
                violations.push("empty description".to_string());
            }
            if !is_lower_hex(&op.output) {
                violations.push("output is not a lowercase hex digest".to_string());
            }
            if op.resource_id.is_empty() {
                violations.push("empty resourceId".to_string());
            }
        }
        ProvenanceRecord::Message(msg) => {
            if msg.actor_id.is_empty() {
                violations.push("empty actorId".to_string());
            }
            if msg.source_id.is_empty() {
                violations.push("empty sourceId".to_string());
            }
            if msg.destination_id.is_empty() {
                violations.push("empty destinationId".to_string());
            }
            if !msg.source_id.is_empty() && msg.source_id == msg.destination_id {
                violations.push("source equals destination".to_string());
            }
            if msg.description.is_empty() {
                violations.push("empty description".to_string());
            }
        }
        ProvenanceRecord::Actor(actor) => {
            if actor.role.is_empty() {
                violations.push("empty role".to_string());
            }
        }
        ProvenanceRecord::Context(ctx) => {
            for key in ctx.parameter.keys() {
                if !is_dotted_lower_path(key) {
                    violations.push(format!("parameter key {key:?} is not a dotted lowercase path"));
                }
            }
        }
        ProvenanceRecord::Preference(pref) => {
            if pref.target.is_empty() {
                violations.push("empty target".to_string());
            }
            if pref.condition.is_empty() {
                violations.push("empty condition".to_string());
            }
        }
    }
    violations
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("invalid record: {0}")]
    Invalid(String),
    #[error("malformed record line at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("unknown record kind {kind:?}")]
    UnknownKind { kind: String },
    #[error("record line has no \"kind\" tag")]
    MissingKind,
}

/// Serializes a valid record to its canonical single JSON line: `"kind"`
/// first, then the record fields in their declared order, compact spacing.
pub fn canonical_serialize(record: &ProvenanceRecord) -> Result<String, RecordError> {
    let violations = validate_record(record);
    if !violations.is_empty() {
        return Err(RecordError::Invalid(violations.join("; ")));
    }
    let kind = record.kind().as_str();
    let body = match record {
        ProvenanceRecord::Operation(r) => serde_json::to_string(r),
        ProvenanceRecord::Message(r) => serde_json::to_string(r),
        ProvenanceRecord::Actor(r) => serde_json::to_string(r),
        ProvenanceRecord::Context(r) => serde_json::to_string(r),
        ProvenanceRecord::Preference(r) => serde_json::to_string(r),
    }
    .expect("record serialization cannot fail");
    // Splice the kind tag in as the first key of the object.
    debug_assert!(body.starts_with('{'));
    Ok(format!("{{\"kind\":\"{kind}\",{}", &body[1..]))
}

/// Parses one canonical record line. Inverse of [`canonical_serialize`] on
/// its image.
pub fn parse_record(line: &str) -> Result<ProvenanceRecord, RecordError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|e| RecordError::Malformed {
        offset: e.column().saturating_sub(1),
        message: e.to_string(),
    })?;
    let mut object = match value {
        serde_json::Value::Object(map) => map,
        other => {
            return Err(RecordError::Malformed {
                offset: 0,
                message: format!("expected a JSON object, got {other}"),
            })
        }
    };
    let kind = match object.remove("kind") {
        Some(serde_json::Value::String(k)) => k,
        Some(_) => return Err(RecordError::MissingKind),
        None => return Err(RecordError::MissingKind),
    };
    let rest = serde_json::Value::Object(object);
    let map_err = |e: serde_json::Error| RecordError::Malformed {
        offset: 0,
        message: e.to_string(),
    };
    match kind.as_str() {
        "operation" => Ok(ProvenanceRecord::Operation(serde_json::from_value(rest).map_err(map_err)?)),
        "message" => Ok(ProvenanceRecord::Message(serde_json::from_value(rest).map_err(map_err)?)),
        "actor" => Ok(ProvenanceRecord::Actor(serde_json::from_value(rest).map_err(map_err)?)),
        "context" => Ok(ProvenanceRecord::Context(serde_json::from_value(rest).map_err(map_err)?)),
        "preference" => Ok(ProvenanceRecord::Preference(serde_json::from_value(rest).map_err(map_err)?)),
        _ => Err(RecordError::UnknownKind { kind }),
    }
}

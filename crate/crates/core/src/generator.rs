//! Policy generation: aggregates provenance into policy records, detects
//! misbehavior, and emits permit/deny policy documents per
//! (actor, context, resource) triple.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::policy::{Expr, Obligation, PolicyDoc, RecordScope, Target};
use crate::record::{Effect, RecordId, Timestamp};
use crate::store::StoreSnapshot;

/// Aggregated view of one (actor, context, resource) triple: who acted,
/// in which role, where, on what, and what they did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRecord {
    pub actor_id: RecordId,
    pub role: String,
    pub context_id: RecordId,
    pub resource_id: String,
    /// Latest contributing operation timestamp.
    pub timestamp: Timestamp,
    pub operation_descriptions: BTreeSet<String>,
    pub violation_count: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationReason {
    DigestMismatch,
    FlaggedDescription,
}

impl ViolationReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationReason::DigestMismatch => "digest-mismatch",
            ViolationReason::FlaggedDescription => "flagged-description",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationEvent {
    pub operation_id: RecordId,
    pub actor_id: RecordId,
    pub context_id: RecordId,
    pub resource_id: String,
    pub reason: ViolationReason,
    pub timestamp: Timestamp,
}

impl ViolationEvent {
    pub fn triple(&self) -> (RecordId, RecordId, String) {
        (
            self.actor_id.clone(),
            self.context_id.clone(),
            self.resource_id.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenConfig {
    /// Operation descriptions treated as violations outright.
    pub violation_vocabulary: BTreeSet<String>,
    /// Validity window attached to generated permit policies.
    pub default_temporal_days: u32,
    /// Operation-description scope of generated permit policies.
    pub permitted_scope: BTreeSet<String>,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            violation_vocabulary: ["alter", "corrupt", "delete-unauthorized"]
                .into_iter()
                .map(String::from)
                .collect(),
            default_temporal_days: 10,
            permitted_scope: ["read", "write"].into_iter().map(String::from).collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("operation {operation:?} references unknown actor {actor:?}")]
    DanglingActor { operation: RecordId, actor: RecordId },
}

/// Joins operation records against actor records and groups them by
/// (actor, context, resource). Output sorted by that triple.
pub fn build_policy_records(snapshot: &StoreSnapshot) -> Result<Vec<PolicyRecord>, GenError> {
    let mut groups: BTreeMap<(RecordId, RecordId, String), PolicyRecord> = BTreeMap::new();
    for op in snapshot.operations() {
        let actor = snapshot
            .resolve_actor(&op.actor_id)
            .map_err(|_| GenError::DanglingActor {
                operation: op.id.clone(),
                actor: op.actor_id.clone(),
            })?;
        let key = (op.actor_id.clone(), op.context_id.clone(), op.resource_id.clone());
        let entry = groups.entry(key).or_insert_with(|| PolicyRecord {
            actor_id: op.actor_id.clone(),
            role: actor.role.clone(),
            context_id: op.context_id.clone(),
            resource_id: op.resource_id.clone(),
            timestamp: op.timestamp,
            operation_descriptions: BTreeSet::new(),
            violation_count: 0,
        });
        entry.timestamp = entry.timestamp.max(op.timestamp);
        entry.operation_descriptions.insert(op.description.clone());
    }
    Ok(groups.into_values().collect())
}

/// Expected digest history per resource: the digests sanctioned at upload
/// (and any later owner-sanctioned transitions), in order.
pub type SealHistory = BTreeMap<String, Vec<String>>;

/// Scans every operation for misbehavior, in append order.
///
/// An operation is a violation when its description is in the configured
/// vocabulary, or when its output digest deviates from the sanctioned digest
/// expected for its resource at that sequence point. After a deviation the
/// deviating digest becomes the current state, so later accesses that merely
/// observe the altered resource are not blamed for the alteration.
pub fn detect_violations(
    snapshot: &StoreSnapshot,
    seals: &SealHistory,
    config: &GenConfig,
) -> Vec<ViolationEvent> {
    let mut events = Vec::new();
    // Per resource: (index of the sanctioned digest we are at, current digest).
    let mut cursor: BTreeMap<&str, (usize, String)> = BTreeMap::new();
    for op in snapshot.operations() {
        let mut reason = None;
        if config.violation_vocabulary.contains(&op.description) {
            reason = Some(ViolationReason::FlaggedDescription);
        }
        if let Some(history) = seals.get(&op.resource_id) {
            if !history.is_empty() {
                let (idx, current) = cursor
                    .entry(op.resource_id.as_str())
                    .or_insert_with(|| (0, history[0].clone()));
                if op.output != *current {
                    if history.get(*idx + 1) == Some(&op.output) {
                        // Sanctioned transition, e.g. a re-sealed legitimate write.
                        *idx += 1;
                    } else if reason.is_none() {
                        reason = Some(ViolationReason::DigestMismatch);
                    }
                    *current = op.output.clone();
                }
            }
        }
        if let Some(reason) = reason {
            events.push(ViolationEvent {
                operation_id: op.id.clone(),
                actor_id: op.actor_id.clone(),
                context_id: op.context_id.clone(),
                resource_id: op.resource_id.clone(),
                reason,
                timestamp: op.timestamp,
            });
        }
    }
    events
}

/// A generated policy document together with the resource it attaches to.
/// `resource_id` is `None` for owner-preference pass-throughs, which attach
/// to every capsule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedPolicy {
    pub resource_id: Option<String>,
    pub doc: PolicyDoc,
}

fn doc_id(actor: &RecordId, context: &RecordId, resource: &str) -> String {
    format!("gen-{actor}-{context}-{resource}")
}

/// Emits one policy document per (actor, context, resource) triple: Deny for
/// triples with at least one violation, Permit (scoped and time-bounded)
/// otherwise. Owner preference records with effect Deny pass through as
/// additional documents.
pub fn generate_policies(
    policy_records: &[PolicyRecord],
    violations: &[ViolationEvent],
    snapshot: &StoreSnapshot,
    config: &GenConfig,
    now: Timestamp,
) -> Vec<GeneratedPolicy> {
    let tainted: BTreeSet<(RecordId, RecordId, String)> =
        violations.iter().map(ViolationEvent::triple).collect();

    let mut docs = Vec::new();
    let mut covered = BTreeSet::new();
    for rec in policy_records {
        let key = (
            rec.actor_id.clone(),
            rec.context_id.clone(),
            rec.resource_id.clone(),
        );
        let is_tainted = tainted.contains(&key);
        covered.insert(key);
        let (effect, scope, obligations) = if is_tainted {
            (Effect::Deny, RecordScope::AllOperations, Vec::new())
        } else {
            (
                Effect::Permit,
                RecordScope::Actions(config.permitted_scope.clone()),
                vec![Obligation::TemporalConstraint {
                    days: config.default_temporal_days,
                }],
            )
        };
        docs.push(GeneratedPolicy {
            resource_id: Some(rec.resource_id.clone()),
            doc: PolicyDoc {
                id: doc_id(&rec.actor_id, &rec.context_id, &rec.resource_id),
                target: Target {
                    subject: rec.actor_id.to_string(),
                    scope,
                    restriction: Expr::eq("Actor.role", &rec.role),
                },
                condition: Expr::eq("Context.id", rec.context_id.as_str()),
                effect,
                obligations,
                issued_at: now,
            },
        });
    }

    // Violations whose triple has no policy record still produce a Deny doc,
    // keyed on the actor id directly since no role can be joined.
    for v in violations {
        let key = v.triple();
        if covered.contains(&key) {
            continue;
        }
        covered.insert(key);
        docs.push(GeneratedPolicy {
            resource_id: Some(v.resource_id.clone()),
            doc: PolicyDoc {
                id: doc_id(&v.actor_id, &v.context_id, &v.resource_id),
                target: Target {
                    subject: v.actor_id.to_string(),
                    scope: RecordScope::AllOperations,
                    restriction: Expr::eq("Actor.ID", v.actor_id.as_str()),
                },
                condition: Expr::eq("Context.id", v.context_id.as_str()),
                effect: Effect::Deny,
                obligations: Vec::new(),
                issued_at: now,
            },
        });
    }

    docs.extend(preference_pass_through(snapshot));

    docs.sort_by(|a, b| a.doc.id.cmp(&b.doc.id).then(a.resource_id.cmp(&b.resource_id)));
    docs
}

/// Owner deny preferences copied through as policy documents. They attach to
/// every capsule (`resource_id: None`). The restriction slot is filled with
/// a tautology over the always-present actor id.
pub fn preference_pass_through(snapshot: &StoreSnapshot) -> Vec<GeneratedPolicy> {
    let mut docs = Vec::new();
    for pref in snapshot.records.iter().filter_map(|r| r.as_preference()) {
        if pref.effect != Effect::Deny {
            continue;
        }
        let condition = match crate::policy::parse_condition_text(&pref.condition) {
            Ok(expr) => expr,
            Err(_) => continue, // unusable owner preference, skip rather than guess
        };
        docs.push(GeneratedPolicy {
            resource_id: None,
            doc: PolicyDoc {
                id: format!("pref-{}", pref.id),
                target: Target {
                    subject: pref.target.clone(),
                    scope: RecordScope::AllOperations,
                    restriction: Expr::ne("Actor.ID", ""),
                },
                condition,
                effect: Effect::Deny,
                obligations: Vec::new(),
                issued_at: pref.timestamp,
            },
        });
    }
    docs
}

/// Fills in `violation_count` on aggregated policy records.
pub fn annotate_violation_counts(records: &mut [PolicyRecord], violations: &[ViolationEvent]) {
    for rec in records.iter_mut() {
        rec.violation_count = violations
            .iter()
            .filter(|v| {
                v.actor_id == rec.actor_id
                    && v.context_id == rec.context_id
                    && v.resource_id == rec.resource_id
            })
            .count() as u64;
    }
}

/// Human-readable accountability report: for every violation, who is
/// accountable, in which role, at what time instant, and under what context.
pub fn generation_report(snapshot: &StoreSnapshot, violations: &[ViolationEvent]) -> String {
    let mut out = String::new();
    if violations.is_empty() {
        out.push_str("no data alteration events on record\n");
        return out;
    }
    for v in violations {
        let (name, role) = match snapshot.resolve_actor(&v.actor_id) {
            Ok(actor) => (actor.name.clone(), actor.role.clone()),
            Err(_) => ("<unknown>".to_string(), "<unknown>".to_string()),
        };
        let context_state = snapshot
            .resolve_context(&v.context_id)
            .map(|c| c.state.clone())
            .unwrap_or_else(|| "<unknown>".to_string());
        out.push_str(&format!(
            "violation {} on resource {} ({}):\n",
            v.operation_id,
            v.resource_id,
            v.reason.as_str()
        ));
        out.push_str(&format!("  accountable user: {} ({})\n", v.actor_id, name));
        out.push_str(&format!("  role: {role}\n"));
        out.push_str(&format!("  time instant: {}\n", v.timestamp));
        out.push_str(&format!("  context: {} (state: {})\n", v.context_id, context_state));
    }
    out
}

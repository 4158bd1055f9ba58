//! Shared test support: random generators for records, stores and policy
//! documents, plus independent brute-force oracles. The oracles deliberately
//! re-derive their answers from first principles and share no code with the
//! implementation paths they check.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::prelude::*;

use provgate_core::evaluator::{AccessRequest, Outcome};
use provgate_core::generator::{PolicyRecord, ViolationEvent, ViolationReason};
use provgate_core::policy::{CmpOp, Expr, Obligation, PolicyDoc, RecordScope, Target};
use provgate_core::record::{
    ActorRecord, ContextRecord, Effect, MessageRecord, OperationRecord, PreferenceRecord,
    ProvenanceRecord, RecordId, Timestamp,
};
use provgate_core::store::StoreSnapshot;

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

pub fn rand_timestamp(rng: &mut StdRng) -> Timestamp {
    // 2010-01-01 .. 2030-01-01
    Timestamp::from_unix(rng.gen_range(1_262_304_000..1_893_456_000))
}

pub fn rand_word(rng: &mut StdRng) -> String {
    let len = rng.gen_range(1..=8);
    (0..len)
        .map(|_| (b'a' + rng.gen_range(0..26)) as char)
        .collect()
}

pub fn rand_hex(rng: &mut StdRng) -> String {
    let len = rng.gen_range(1..=16) * 2;
    (0..len)
        .map(|_| {
            let n = rng.gen_range(0..16);
            char::from_digit(n, 16).unwrap()
        })
        .collect()
}

pub fn rand_actor(rng: &mut StdRng, id: &str) -> ActorRecord {
    let roles = ["AuthorizedUser", "Auditor", "Owner"];
    ActorRecord {
        id: id.into(),
        name: rand_word(rng),
        role: roles.choose(rng).unwrap().to_string(),
    }
}

pub fn rand_context(rng: &mut StdRng, id: &str) -> ContextRecord {
    let mut parameter = BTreeMap::new();
    for _ in 0..rng.gen_range(0..3) {
        parameter.insert(
            format!("{}.{}", rand_word(rng), rand_word(rng)),
            rand_word(rng),
        );
    }
    ContextRecord {
        id: id.into(),
        state: rand_word(rng),
        parameter,
    }
}

pub fn rand_operation(
    rng: &mut StdRng,
    id: &str,
    actors: &[RecordId],
    contexts: &[RecordId],
    resources: &[String],
) -> OperationRecord {
    let descriptions = ["read", "write", "alter", "upload", "corrupt", "inspect"];
    OperationRecord {
        id: id.into(),
        actor_id: actors.choose(rng).unwrap().clone(),
        context_id: contexts.choose(rng).unwrap().clone(),
        description: descriptions.choose(rng).unwrap().to_string(),
        output: rand_hex(rng),
        resource_id: resources.choose(rng).unwrap().clone(),
        timestamp: rand_timestamp(rng),
    }
}

pub fn rand_message(rng: &mut StdRng, id: &str, actors: &[RecordId]) -> MessageRecord {
    MessageRecord {
        id: id.into(),
        actor_id: actors.choose(rng).unwrap().clone(),
        source_id: "src".into(),
        destination_id: "dst".into(),
        description: rand_word(rng),
        content_carrier: rand_word(rng),
        timestamp: rand_timestamp(rng),
    }
}

pub fn rand_preference(rng: &mut StdRng, id: &str) -> PreferenceRecord {
    PreferenceRecord {
        id: id.into(),
        target: rand_word(rng),
        condition: format!("{}.{} == \"{}\"", rand_word(rng), rand_word(rng), rand_word(rng)),
        effect: if rng.gen_bool(0.5) { Effect::Permit } else { Effect::Deny },
        obligations: if rng.gen_bool(0.5) {
            vec![format!("{} days", rng.gen_range(1..30))]
        } else {
            Vec::new()
        },
        timestamp: rand_timestamp(rng),
    }
}

/// A random valid record of any kind, with referential targets drawn from
/// the given pools.
pub fn rand_record(
    rng: &mut StdRng,
    seq: usize,
    actors: &[RecordId],
    contexts: &[RecordId],
    resources: &[String],
) -> ProvenanceRecord {
    match rng.gen_range(0..5) {
        0 => ProvenanceRecord::Operation(rand_operation(
            rng,
            &format!("op{seq}"),
            actors,
            contexts,
            resources,
        )),
        1 => ProvenanceRecord::Message(rand_message(rng, &format!("m{seq}"), actors)),
        2 => ProvenanceRecord::Actor(rand_actor(rng, &format!("xa{seq}"))),
        3 => ProvenanceRecord::Context(rand_context(rng, &format!("xc{seq}"))),
        _ => ProvenanceRecord::Preference(rand_preference(rng, &format!("p{seq}"))),
    }
}

/// A random referentially-intact snapshot with up to `max_records` records.
pub fn rand_snapshot(rng: &mut StdRng, max_records: usize) -> StoreSnapshot {
    let mut records = Vec::new();
    let actor_count = rng.gen_range(1..=5);
    let context_count = rng.gen_range(1..=4);
    let resource_count = rng.gen_range(1..=3);
    let actors: Vec<RecordId> = (0..actor_count).map(|i| RecordId::from(format!("a{i}").as_str())).collect();
    let contexts: Vec<RecordId> = (0..context_count).map(|i| RecordId::from(format!("c{i}").as_str())).collect();
    let resources: Vec<String> = (0..resource_count).map(|i| format!("r{i}")).collect();
    for a in &actors {
        records.push(ProvenanceRecord::Actor(rand_actor(rng, a.as_str())));
    }
    for c in &contexts {
        records.push(ProvenanceRecord::Context(rand_context(rng, c.as_str())));
    }
    let remaining = max_records.saturating_sub(records.len());
    let extra = rng.gen_range(0..=remaining);
    for i in 0..extra {
        records.push(match rng.gen_range(0..4) {
            0..=2 => ProvenanceRecord::Operation(rand_operation(
                rng,
                &format!("op{i}"),
                &actors,
                &contexts,
                &resources,
            )),
            _ => ProvenanceRecord::Message(rand_message(rng, &format!("m{i}"), &actors)),
        });
    }
    let high_water_mark = records.len() as u64;
    StoreSnapshot {
        records,
        high_water_mark,
    }
}

pub fn rand_expr(rng: &mut StdRng) -> Expr {
    let paths = [
        "Actor.ID",
        "Actor.role",
        "Actor.name",
        "Context.id",
        "Context.state",
        "system.machineid",
        "Operation.description",
    ];
    let cmp = |rng: &mut StdRng| {
        let path = *paths.choose(rng).unwrap();
        let literal = rand_word(rng);
        if rng.gen_bool(0.8) {
            Expr::eq(path, &literal)
        } else {
            Expr::ne(path, &literal)
        }
    };
    let mut expr = cmp(rng);
    for _ in 0..rng.gen_range(0..3) {
        expr = expr.and(cmp(rng));
    }
    expr
}

pub fn rand_policy_doc(rng: &mut StdRng) -> PolicyDoc {
    let scope = if rng.gen_bool(0.3) {
        RecordScope::AllOperations
    } else {
        let actions = ["read", "write", "alter", "inspect"];
        let count = rng.gen_range(1..=3);
        RecordScope::Actions(
            actions
                .choose_multiple(rng, count)
                .map(|s| s.to_string())
                .collect(),
        )
    };
    let subject = if rng.gen_bool(0.5) {
        "Actor.ID".to_string()
    } else {
        rand_word(rng)
    };
    let obligations = if rng.gen_bool(0.5) {
        vec![Obligation::TemporalConstraint {
            days: rng.gen_range(1..=30),
        }]
    } else {
        Vec::new()
    };
    PolicyDoc {
        id: format!("{}-{}", rand_word(rng), rng.gen_range(0..1000)),
        target: Target {
            subject,
            scope,
            restriction: rand_expr(rng),
        },
        condition: rand_expr(rng),
        effect: if rng.gen_bool(0.5) { Effect::Permit } else { Effect::Deny },
        obligations,
        issued_at: rand_timestamp(rng),
    }
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Brute-force query oracle: plain linear filter written independently of
/// `QueryFilter::matches`.
pub fn oracle_query(
    snapshot: &StoreSnapshot,
    actor_id: Option<&RecordId>,
    context_id: Option<&RecordId>,
    resource_id: Option<&str>,
    time_range: Option<(Timestamp, Timestamp)>,
    kind: Option<provgate_core::record::RecordKind>,
) -> Vec<ProvenanceRecord> {
    let mut out = Vec::new();
    for record in &snapshot.records {
        if let Some(k) = kind {
            if record.kind() != k {
                continue;
            }
        }
        if let Some(a) = actor_id {
            let ok = match record {
                ProvenanceRecord::Operation(op) => &op.actor_id == a,
                ProvenanceRecord::Message(m) => &m.actor_id == a,
                ProvenanceRecord::Actor(rec) => &rec.id == a,
                _ => false,
            };
            if !ok {
                continue;
            }
        }
        if let Some(c) = context_id {
            let ok = match record {
                ProvenanceRecord::Operation(op) => &op.context_id == c,
                ProvenanceRecord::Context(rec) => &rec.id == c,
                _ => false,
            };
            if !ok {
                continue;
            }
        }
        if let Some(r) = resource_id {
            let ok = matches!(record, ProvenanceRecord::Operation(op) if op.resource_id == r);
            if !ok {
                continue;
            }
        }
        if let Some((from, to)) = time_range {
            let ts = match record {
                ProvenanceRecord::Operation(op) => Some(op.timestamp),
                ProvenanceRecord::Message(m) => Some(m.timestamp),
                ProvenanceRecord::Preference(p) => Some(p.timestamp),
                _ => None,
            };
            match ts {
                Some(t) if t >= from && t <= to => {}
                _ => continue,
            }
        }
        out.push(record.clone());
    }
    out
}

/// Brute-force nested-loop join + group-by oracle for policy records.
pub fn oracle_join(snapshot: &StoreSnapshot) -> Vec<PolicyRecord> {
    let mut groups: Vec<PolicyRecord> = Vec::new();
    for record in &snapshot.records {
        let op = match record {
            ProvenanceRecord::Operation(op) => op,
            _ => continue,
        };
        // nested-loop join against actor records
        let mut role = None;
        for candidate in &snapshot.records {
            if let ProvenanceRecord::Actor(actor) = candidate {
                if actor.id == op.actor_id {
                    role = Some(actor.role.clone());
                }
            }
        }
        let role = role.expect("oracle requires referentially intact snapshots");
        let mut found = false;
        for group in groups.iter_mut() {
            if group.actor_id == op.actor_id
                && group.context_id == op.context_id
                && group.resource_id == op.resource_id
            {
                if op.timestamp > group.timestamp {
                    group.timestamp = op.timestamp;
                }
                group.operation_descriptions.insert(op.description.clone());
                found = true;
            }
        }
        if !found {
            groups.push(PolicyRecord {
                actor_id: op.actor_id.clone(),
                role,
                context_id: op.context_id.clone(),
                resource_id: op.resource_id.clone(),
                timestamp: op.timestamp,
                operation_descriptions: [op.description.clone()].into_iter().collect(),
                violation_count: 0,
            });
        }
    }
    groups.sort_by(|a, b| {
        (a.actor_id.clone(), a.context_id.clone(), a.resource_id.clone()).cmp(&(
            b.actor_id.clone(),
            b.context_id.clone(),
            b.resource_id.clone(),
        ))
    });
    groups
}

/// Independent three-valued expression evaluation for the decide oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleTruth {
    T,
    F,
    I,
}

fn oracle_eval(expr: &Expr, env: &BTreeMap<String, String>) -> OracleTruth {
    match expr {
        Expr::Cmp(c) => match env.get(&c.path) {
            None => OracleTruth::I,
            Some(v) => {
                let eq = *v == c.literal;
                let holds = match c.op {
                    CmpOp::Eq => eq,
                    CmpOp::Ne => !eq,
                };
                if holds {
                    OracleTruth::T
                } else {
                    OracleTruth::F
                }
            }
        },
        Expr::And(a, b) => match (oracle_eval(a, env), oracle_eval(b, env)) {
            (OracleTruth::F, _) | (_, OracleTruth::F) => OracleTruth::F,
            (OracleTruth::I, _) | (_, OracleTruth::I) => OracleTruth::I,
            _ => OracleTruth::T,
        },
    }
}

fn oracle_env(request: &AccessRequest, snapshot: &StoreSnapshot) -> BTreeMap<String, String> {
    let mut env = BTreeMap::new();
    for record in &snapshot.records {
        if let ProvenanceRecord::Context(ctx) = record {
            if ctx.id == request.context_id {
                for (k, v) in &ctx.parameter {
                    env.insert(k.clone(), v.clone());
                }
                env.insert("Context.id".to_string(), ctx.id.to_string());
                env.insert("Context.state".to_string(), ctx.state.clone());
            }
        }
    }
    for (k, v) in &request.system_attributes {
        env.insert(k.clone(), v.clone());
    }
    for record in &snapshot.records {
        if let ProvenanceRecord::Actor(actor) = record {
            if actor.id == request.actor_id {
                env.insert("Actor.ID".to_string(), actor.id.to_string());
                env.insert("Actor.name".to_string(), actor.name.clone());
                env.insert("Actor.role".to_string(), actor.role.clone());
            }
        }
    }
    env
}

fn oracle_applicable(
    policy: &PolicyDoc,
    request: &AccessRequest,
    snapshot: &StoreSnapshot,
    now: Timestamp,
) -> bool {
    let env = oracle_env(request, snapshot);
    let subject = policy.target.subject.as_str();
    let is_path = subject.split('.').count() >= 2
        && subject.split('.').all(|seg| {
            !seg.is_empty()
                && seg.chars().next().map(|c| c.is_ascii_alphabetic() || c == '_').unwrap_or(false)
                && seg.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        });
    let subject_ok = if is_path {
        env.get(subject).map(String::as_str) == Some(request.actor_id.as_str())
    } else {
        subject == request.actor_id.as_str()
    };
    if !subject_ok {
        return false;
    }
    if oracle_eval(&policy.target.restriction, &env) != OracleTruth::T {
        return false;
    }
    if oracle_eval(&policy.condition, &env) != OracleTruth::T {
        return false;
    }
    for ob in &policy.obligations {
        let Obligation::TemporalConstraint { days } = ob;
        if now >= policy.issued_at.plus_days(*days as i64) {
            return false;
        }
    }
    true
}

/// Brute-force decision oracle: enumerates every (policy, action) pair.
/// Returns (outcome, granted actions).
pub fn oracle_decide(
    request: &AccessRequest,
    policies: &[PolicyDoc],
    snapshot: &StoreSnapshot,
    violations: &[ViolationEvent],
    now: Timestamp,
) -> (Outcome, BTreeSet<String>) {
    // taint gate
    let mut recorded_role = None;
    for record in &snapshot.records {
        if let ProvenanceRecord::Actor(actor) = record {
            if actor.id == request.actor_id {
                recorded_role = Some(actor.role.clone());
            }
        }
    }
    let tainted = match recorded_role {
        None => true,
        Some(role) if role != request.claimed_role => true,
        Some(_) => violations
            .iter()
            .any(|v| v.actor_id == request.actor_id && v.context_id == request.context_id),
    };
    if tainted {
        return (Outcome::Deny, BTreeSet::new());
    }
    let mut granted = BTreeSet::new();
    for action in &request.requested_actions {
        let mut permitted = false;
        let mut denied = false;
        for policy in policies {
            if !oracle_applicable(policy, request, snapshot, now) {
                continue;
            }
            let covers = match &policy.target.scope {
                RecordScope::AllOperations => true,
                RecordScope::Actions(set) => set.contains(action),
            };
            if covers {
                match policy.effect {
                    Effect::Permit => permitted = true,
                    Effect::Deny => denied = true,
                }
            }
        }
        if permitted && !denied {
            granted.insert(action.clone());
        }
    }
    let outcome = if granted.is_empty() {
        Outcome::Deny
    } else if granted == request.requested_actions {
        Outcome::FullPermit
    } else {
        Outcome::PartialPermit
    };
    (outcome, granted)
}

pub fn violation(actor: &str, context: &str, resource: &str) -> ViolationEvent {
    ViolationEvent {
        operation_id: "opx".into(),
        actor_id: actor.into(),
        context_id: context.into(),
        resource_id: resource.to_string(),
        reason: ViolationReason::FlaggedDescription,
        timestamp: Timestamp::from_unix(1_400_000_000),
    }
}

//! Access decision point: deny-overrides combining with default deny and a
//! misbehavior (taint) gate checked before any policy matching.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::generator::ViolationEvent;
use crate::policy::{eval_expr, is_attr_path, AttrEnv, Obligation, PolicyDoc};
use crate::record::{Effect, RecordId, Timestamp};
use crate::store::StoreSnapshot;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessRequest {
    pub actor_id: RecordId,
    pub claimed_role: String,
    pub context_id: RecordId,
    pub resource_id: String,
    /// Non-empty set of operation descriptions, e.g. {read, write}.
    pub requested_actions: BTreeSet<String>,
    /// Request-side environment attributes, e.g. system.machineid.
    pub system_attributes: BTreeMap<String, String>,
    pub at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Deny,
    PartialPermit,
    FullPermit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reason {
    /// A policy id, or one of "default-deny", "misbehavior-history",
    /// "tampered-capsule".
    pub code: String,
    pub explanation: String,
}

impl Reason {
    pub fn new(code: impl Into<String>, explanation: impl Into<String>) -> Self {
        Reason {
            code: code.into(),
            explanation: explanation.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    #[serde(rename = "grantedActions")]
    pub granted_actions: BTreeSet<String>,
    pub reasons: Vec<Reason>,
}

impl Decision {
    /// Derives the outcome from the granted set per the decision invariants.
    pub fn from_granted(
        requested: &BTreeSet<String>,
        granted: BTreeSet<String>,
        reasons: Vec<Reason>,
    ) -> Decision {
        let outcome = if granted.is_empty() {
            Outcome::Deny
        } else if granted == *requested {
            Outcome::FullPermit
        } else {
            Outcome::PartialPermit
        };
        Decision {
            outcome,
            granted_actions: granted,
            reasons,
        }
    }

    pub fn deny(reasons: Vec<Reason>) -> Decision {
        Decision {
            outcome: Outcome::Deny,
            granted_actions: BTreeSet::new(),
            reasons,
        }
    }

    pub fn permits(&self) -> bool {
        self.outcome != Outcome::Deny
    }
}

/// Assembles the attribute environment for a request: context parameters
/// first, then request-side system attributes (which win on overlap), then
/// the resolved actor and context identity attributes.
pub fn assemble_env(request: &AccessRequest, snapshot: &StoreSnapshot) -> AttrEnv {
    let mut env = AttrEnv::new();
    if let Some(ctx) = snapshot.resolve_context(&request.context_id) {
        for (k, v) in &ctx.parameter {
            env.set(k.clone(), v.clone());
        }
        env.set("Context.id", ctx.id.as_str());
        env.set("Context.state", ctx.state.clone());
    }
    for (k, v) in &request.system_attributes {
        env.set(k.clone(), v.clone());
    }
    if let Ok(actor) = snapshot.resolve_actor(&request.actor_id) {
        env.set("Actor.ID", actor.id.as_str());
        env.set("Actor.name", actor.name.clone());
        env.set("Actor.role", actor.role.clone());
    }
    env
}

/// Whether a policy applies to this request: subject match, restriction and
/// condition both evaluate true (indeterminate is not true), and every
/// temporal obligation is unexpired under strict `now < issuedAt + days`.
pub fn applicable(policy: &PolicyDoc, request: &AccessRequest, env: &AttrEnv, now: Timestamp) -> bool {
    let subject = policy.target.subject.as_str();
    let subject_matches = if is_attr_path(subject) {
        env.get(subject) == Some(request.actor_id.as_str())
    } else {
        subject == request.actor_id.as_str()
    };
    if !subject_matches {
        return false;
    }
    if !eval_expr(&policy.target.restriction, env).is_true() {
        return false;
    }
    if !eval_expr(&policy.condition, env).is_true() {
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

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behavior {
    Clean,
    Tainted,
}

/// The "never misbehaved under the same role and context" gate. Fails closed:
/// an unknown actor or a spoofed role is tainted.
pub fn misbehavior_check(
    request: &AccessRequest,
    snapshot: &StoreSnapshot,
    violations: &[ViolationEvent],
) -> Behavior {
    let recorded_role = match snapshot.resolve_actor(&request.actor_id) {
        Ok(actor) => actor.role.clone(),
        Err(_) => return Behavior::Tainted,
    };
    if recorded_role != request.claimed_role {
        return Behavior::Tainted;
    }
    let hit = violations.iter().any(|v| {
        v.actor_id == request.actor_id && v.context_id == request.context_id
    });
    if hit {
        Behavior::Tainted
    } else {
        Behavior::Clean
    }
}

/// Full decision procedure: taint gate first, then per-action deny-overrides
/// over the applicable policies, default deny for uncovered actions.
pub fn decide(
    request: &AccessRequest,
    policies: &[PolicyDoc],
    snapshot: &StoreSnapshot,
    violations: &[ViolationEvent],
    now: Timestamp,
) -> Decision {
    if misbehavior_check(request, snapshot, violations) == Behavior::Tainted {
        return Decision::deny(vec![Reason::new(
            "misbehavior-history",
            format!(
                "actor {} under role {:?} and context {} has a recorded violation or cannot be verified",
                request.actor_id, request.claimed_role, request.context_id
            ),
        )]);
    }

    let env = assemble_env(request, snapshot);
    let mut reasons = Vec::new();
    let mut permit_scopes: Vec<&PolicyDoc> = Vec::new();
    let mut deny_scopes: Vec<&PolicyDoc> = Vec::new();
    for policy in policies {
        if applicable(policy, request, &env, now) {
            reasons.push(Reason::new(
                policy.id.clone(),
                format!("applicable, effect {}", policy.effect),
            ));
            match policy.effect {
                Effect::Permit => permit_scopes.push(policy),
                Effect::Deny => deny_scopes.push(policy),
            }
        } else {
            reasons.push(Reason::new(policy.id.clone(), "not applicable".to_string()));
        }
    }

    let mut granted = BTreeSet::new();
    let mut uncovered = Vec::new();
    for action in &request.requested_actions {
        let denied = deny_scopes.iter().any(|p| p.target.scope.contains(action));
        let permitted = permit_scopes.iter().any(|p| p.target.scope.contains(action));
        if permitted && !denied {
            granted.insert(action.clone());
        } else if !permitted && !denied {
            uncovered.push(action.as_str());
        }
    }
    if !uncovered.is_empty() {
        reasons.push(Reason::new(
            "default-deny",
            format!("no applicable policy covers: {}", uncovered.join(", ")),
        ));
    }
    Decision::from_granted(&request.requested_actions, granted, reasons)
}

//! Digest-sealed data capsules: a resource's bytes bound to its attached
//! policies under SHA-256 seals, plus the unconditional access logging that
//! feeds the provenance store.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evaluator::{AccessRequest, Decision};
use crate::policy::{parse_policy, serialize_policy, PolicyDoc, PolicyError};
use crate::record::{OperationRecord, ProvenanceRecord, Timestamp};
use crate::store::{Store, StoreError};

/// Lowercase hex SHA-256 of a byte string.
pub fn digest_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Error)]
pub enum CapsuleError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("capsule io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed capsule file: {0}")]
    Malformed(String),
    #[error("empty resource id")]
    EmptyResourceId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Capsule {
    pub resource_id: String,
    pub payload_digest: String,
    pub policy_digest: String,
    pub seal_digest: String,
    pub policies: Vec<PolicyDoc>,
    pub created_at: Timestamp,
}

fn policy_digest_of_texts(texts: &[String]) -> String {
    let concatenated: String = texts.concat();
    digest_hex(concatenated.as_bytes())
}

fn seal_digest_of(resource_id: &str, payload_digest: &str, policy_digest: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(resource_id.as_bytes());
    hasher.update(payload_digest.as_bytes());
    hasher.update(policy_digest.as_bytes());
    hex::encode(hasher.finalize())
}

/// Binds resource bytes and attached policies under a seal digest.
/// Deterministic: identical inputs produce identical capsules.
pub fn seal(
    resource_id: &str,
    payload: &[u8],
    policies: Vec<PolicyDoc>,
    now: Timestamp,
) -> Result<Capsule, CapsuleError> {
    if resource_id.is_empty() {
        return Err(CapsuleError::EmptyResourceId);
    }
    let texts = policies
        .iter()
        .map(serialize_policy)
        .collect::<Result<Vec<_>, _>>()?;
    let payload_digest = digest_hex(payload);
    let policy_digest = policy_digest_of_texts(&texts);
    let seal_digest = seal_digest_of(resource_id, &payload_digest, &policy_digest);
    Ok(Capsule {
        resource_id: resource_id.to_string(),
        payload_digest,
        policy_digest,
        seal_digest,
        policies,
        created_at: now,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Integrity {
    Intact,
    Tampered(String),
}

impl Integrity {
    pub fn is_intact(&self) -> bool {
        matches!(self, Integrity::Intact)
    }
}

/// Recomputes all three digests and compares them to the stored values.
pub fn verify(capsule: &Capsule, payload: &[u8]) -> Integrity {
    let texts = match capsule
        .policies
        .iter()
        .map(serialize_policy)
        .collect::<Result<Vec<_>, _>>()
    {
        Ok(texts) => texts,
        Err(_) => return Integrity::Tampered("policy-digest-mismatch".to_string()),
    };
    verify_against_texts(capsule, payload, &texts)
}

fn verify_against_texts(capsule: &Capsule, payload: &[u8], texts: &[String]) -> Integrity {
    if digest_hex(payload) != capsule.payload_digest {
        return Integrity::Tampered("payload-digest-mismatch".to_string());
    }
    if policy_digest_of_texts(texts) != capsule.policy_digest {
        return Integrity::Tampered("policy-digest-mismatch".to_string());
    }
    let expected = seal_digest_of(&capsule.resource_id, &capsule.payload_digest, &capsule.policy_digest);
    if expected != capsule.seal_digest {
        return Integrity::Tampered("seal-digest-mismatch".to_string());
    }
    Integrity::Intact
}

/// On-disk capsule representation: policies stored as canonical texts.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapsuleFile {
    #[serde(rename = "resourceId")]
    pub resource_id: String,
    #[serde(rename = "payloadDigest")]
    pub payload_digest: String,
    #[serde(rename = "policyDigest")]
    pub policy_digest: String,
    #[serde(rename = "sealDigest")]
    pub seal_digest: String,
    #[serde(rename = "createdAt")]
    pub created_at: Timestamp,
    pub policies: Vec<String>,
}

impl CapsuleFile {
    pub fn from_capsule(capsule: &Capsule) -> Result<CapsuleFile, CapsuleError> {
        let texts = capsule
            .policies
            .iter()
            .map(serialize_policy)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CapsuleFile {
            resource_id: capsule.resource_id.clone(),
            payload_digest: capsule.payload_digest.clone(),
            policy_digest: capsule.policy_digest.clone(),
            seal_digest: capsule.seal_digest.clone(),
            created_at: capsule.created_at,
            policies: texts,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CapsuleError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CapsuleError::Malformed(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<CapsuleFile, CapsuleError> {
        let raw = std::fs::read_to_string(path)?;
        serde_json::from_str(&raw).map_err(|e| CapsuleError::Malformed(e.to_string()))
    }

    /// Integrity check over the raw stored texts, so that any byte-level
    /// mutation of the stored policies is visible even when it would
    /// re-canonicalize away.
    pub fn check_integrity(&self, payload: &[u8]) -> Integrity {
        if digest_hex(payload) != self.payload_digest {
            return Integrity::Tampered("payload-digest-mismatch".to_string());
        }
        if policy_digest_of_texts(&self.policies) != self.policy_digest {
            return Integrity::Tampered("policy-digest-mismatch".to_string());
        }
        let expected = seal_digest_of(&self.resource_id, &self.payload_digest, &self.policy_digest);
        if expected != self.seal_digest {
            return Integrity::Tampered("seal-digest-mismatch".to_string());
        }
        Integrity::Intact
    }

    /// Parses the stored policy texts back into documents. The canonical
    /// form always carries `<issued>`, so no default timestamp leaks in.
    pub fn into_capsule(self) -> Result<Capsule, CapsuleError> {
        let epoch = Timestamp::from_unix(0);
        let policies = self
            .policies
            .iter()
            .map(|text| parse_policy(text, epoch))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CapsuleError::Malformed(e.to_string()))?;
        Ok(Capsule {
            resource_id: self.resource_id,
            payload_digest: self.payload_digest,
            policy_digest: self.policy_digest,
            seal_digest: self.seal_digest,
            policies,
            created_at: self.created_at,
        })
    }
}

/// Appends exactly one operation record for an access request, whatever the
/// decision was. Denied actions are logged with a `denied-` prefix so audits
/// distinguish attempts from completions.
pub fn record_access(
    capsule: &Capsule,
    request: &AccessRequest,
    decision: &Decision,
    post_payload_digest: &str,
    store: &mut Store,
) -> Result<OperationRecord, StoreError> {
    let description = request
        .requested_actions
        .iter()
        .map(|action| {
            if decision.granted_actions.contains(action) {
                action.clone()
            } else {
                format!("denied-{action}")
            }
        })
        .collect::<Vec<_>>()
        .join(",");
    let record = OperationRecord {
        id: format!("op-{}", store.len() + 1).as_str().into(),
        actor_id: request.actor_id.clone(),
        context_id: request.context_id.clone(),
        description,
        output: post_payload_digest.to_string(),
        resource_id: capsule.resource_id.clone(),
        timestamp: request.at,
    };
    store.append(ProvenanceRecord::Operation(record.clone()))?;
    Ok(record)
}

//! Provenance-policy based access control.
//!
//! Every data access is collected as a provenance record; records aggregate
//! into policy records; policy records compile into permit/deny policy
//! documents attached to digest-sealed capsules; an evaluator denies actors
//! who have misbehaved under the same role and context.
//!
//! Modules, bottom-up:
//!
//! - [`record`] — the five provenance record kinds and their canonical lines
//! - [`store`] — append-only persistent provenance store
//! - [`policy`] — policy document grammar, parser, serializer, evaluator
//! - [`generator`] — aggregation, misbehavior detection, policy emission
//! - [`evaluator`] — deny-overrides access decisions with a taint gate
//! - [`capsule`] — digest-sealed capsules and unconditional access logging
//! - [`service`] — the gate tying the pipeline together over a data directory

pub mod capsule;
pub mod evaluator;
pub mod generator;
pub mod policy;
pub mod record;
pub mod service;
pub mod store;

pub use capsule::{digest_hex, seal, verify, Capsule, CapsuleFile, Integrity};
pub use evaluator::{applicable, decide, misbehavior_check, AccessRequest, Decision, Outcome};
pub use generator::{
    build_policy_records, detect_violations, generate_policies, GenConfig, PolicyRecord,
    ViolationEvent,
};
pub use policy::{eval_expr, parse_policy, serialize_policy, AttrEnv, Expr, PolicyDoc};
pub use record::{
    canonical_serialize, parse_record, validate_record, Effect, ProvenanceRecord, RecordId,
    Timestamp,
};
pub use service::{ClockMode, GateService, ServiceConfig, ServiceError};
pub use store::{QueryFilter, Store, StoreSnapshot};

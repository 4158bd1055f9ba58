//! The gate: owner upload, capsule storage, access mediation, and policy
//! regeneration over a local data directory standing in for the cloud.
//!
//! Layout under the data directory:
//!
//! - `store.log` — the provenance store file
//! - `capsules/<resourceId>.capsule.json` — sealed capsule
//! - `capsules/<resourceId>.bin` — resource payload bytes
//! - `capsules/<resourceId>.seals` — sanctioned digest history, one per line

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::capsule::{
    digest_hex, record_access, seal, Capsule, CapsuleError, CapsuleFile, Integrity,
};
use crate::evaluator::{decide, AccessRequest, Decision, Reason};
use crate::generator::{
    build_policy_records, detect_violations, generate_policies, generation_report,
    preference_pass_through, GenConfig, GenError, SealHistory, ViolationEvent,
};
use crate::record::{
    ActorRecord, ContextRecord, OperationRecord, ProvenanceRecord, RecordId, Timestamp,
};
use crate::store::{QueryFilter, Store, StoreError, StoreSnapshot};

/// Context id used for upload operations when the caller does not name one.
pub const UPLOAD_CONTEXT_ID: &str = "ctx-upload";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Real,
    Fixed(Timestamp),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub gen_config: GenConfig,
    pub clock: ClockMode,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            gen_config: GenConfig::default(),
            clock: ClockMode::Real,
        }
    }

    pub fn with_fixed_clock(mut self, at: Timestamp) -> Self {
        self.clock = ClockMode::Fixed(at);
        self
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown owner actor {0:?}")]
    UnknownOwner(RecordId),
    #[error("unknown resource {0:?}")]
    UnknownResource(String),
    #[error("resource {0:?} already exists")]
    DuplicateResource(String),
    #[error("resource id {0:?} must be non-empty and contain only [A-Za-z0-9._-]")]
    BadResourceId(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Capsule(#[from] CapsuleError),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn valid_resource_id(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

pub struct GateService {
    config: ServiceConfig,
    store: Store,
}

impl GateService {
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(config.data_dir.join("capsules"))?;
        let store = Store::open(config.data_dir.join("store.log"))?;
        Ok(GateService { config, store })
    }

    pub fn now(&self) -> Timestamp {
        match self.config.clock {
            ClockMode::Real => Timestamp::now(),
            ClockMode::Fixed(at) => at,
        }
    }

    pub fn gen_config(&self) -> &GenConfig {
        &self.config.gen_config
    }

    pub fn snapshot(&self) -> StoreSnapshot {
        self.store.snapshot()
    }

    pub fn append_record(&mut self, record: ProvenanceRecord) -> Result<u64, ServiceError> {
        Ok(self.store.append(record)?)
    }

    pub fn add_actor(&mut self, id: &str, name: &str, role: &str) -> Result<u64, ServiceError> {
        self.append_record(ProvenanceRecord::Actor(ActorRecord {
            id: id.into(),
            name: name.to_string(),
            role: role.to_string(),
        }))
    }

    pub fn add_context(
        &mut self,
        id: &str,
        state: &str,
        parameter: BTreeMap<String, String>,
    ) -> Result<u64, ServiceError> {
        self.append_record(ProvenanceRecord::Context(ContextRecord {
            id: id.into(),
            state: state.to_string(),
            parameter,
        }))
    }

    fn capsule_path(&self, resource_id: &str) -> PathBuf {
        self.config
            .data_dir
            .join("capsules")
            .join(format!("{resource_id}.capsule.json"))
    }

    fn payload_path(&self, resource_id: &str) -> PathBuf {
        self.config
            .data_dir
            .join("capsules")
            .join(format!("{resource_id}.bin"))
    }

    fn seals_path(&self, resource_id: &str) -> PathBuf {
        self.config
            .data_dir
            .join("capsules")
            .join(format!("{resource_id}.seals"))
    }

    fn resource_exists(&self, resource_id: &str) -> bool {
        self.capsule_path(resource_id).exists()
    }

    pub fn resource_ids(&self) -> Result<Vec<String>, ServiceError> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(self.config.data_dir.join("capsules"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".capsule.json") {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn append_seal(&self, resource_id: &str, digest: &str) -> Result<(), ServiceError> {
        use std::io::Write;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.seals_path(resource_id))?;
        writeln!(file, "{digest}")?;
        Ok(())
    }

    pub fn seal_history(&self) -> Result<SealHistory, ServiceError> {
        let mut history = SealHistory::new();
        for id in self.resource_ids()? {
            let path = self.seals_path(&id);
            if path.exists() {
                let digests = std::fs::read_to_string(&path)?
                    .lines()
                    .map(str::to_string)
                    .collect();
                history.insert(id, digests);
            }
        }
        Ok(history)
    }

    fn ensure_upload_context(&mut self) -> Result<RecordId, ServiceError> {
        let id = RecordId::from(UPLOAD_CONTEXT_ID);
        if self.store.snapshot().resolve_context(&id).is_none() {
            self.add_context(UPLOAD_CONTEXT_ID, "upload", BTreeMap::new())?;
        }
        Ok(id)
    }

    /// Seals a new resource under the owner's deny preferences (if any),
    /// persists capsule and payload, and logs the upload operation.
    pub fn upload_resource(
        &mut self,
        resource_id: &str,
        payload: &[u8],
        owner_actor_id: &RecordId,
        context_id: Option<&RecordId>,
    ) -> Result<Capsule, ServiceError> {
        if !valid_resource_id(resource_id) {
            return Err(ServiceError::BadResourceId(resource_id.to_string()));
        }
        let snapshot = self.store.snapshot();
        if snapshot.resolve_actor(owner_actor_id).is_err() {
            return Err(ServiceError::UnknownOwner(owner_actor_id.clone()));
        }
        if self.resource_exists(resource_id) {
            return Err(ServiceError::DuplicateResource(resource_id.to_string()));
        }
        let context_id = match context_id {
            Some(id) => id.clone(),
            None => self.ensure_upload_context()?,
        };
        let now = self.now();
        let initial_policies = preference_pass_through(&snapshot)
            .into_iter()
            .map(|g| g.doc)
            .collect();
        let capsule = seal(resource_id, payload, initial_policies, now)?;
        std::fs::write(self.payload_path(resource_id), payload)?;
        CapsuleFile::from_capsule(&capsule)?.save(&self.capsule_path(resource_id))?;
        self.append_seal(resource_id, &capsule.payload_digest)?;
        let record = OperationRecord {
            id: format!("op-{}", self.store.len() + 1).as_str().into(),
            actor_id: owner_actor_id.clone(),
            context_id,
            description: "upload".to_string(),
            output: capsule.payload_digest.clone(),
            resource_id: resource_id.to_string(),
            timestamp: now,
        };
        self.store.append(ProvenanceRecord::Operation(record))?;
        Ok(capsule)
    }

    pub fn violations(&self) -> Result<Vec<ViolationEvent>, ServiceError> {
        let snapshot = self.store.snapshot();
        let seals = self.seal_history()?;
        Ok(detect_violations(&snapshot, &seals, &self.config.gen_config))
    }

    /// Mediates one access request: capsule verification first, then the
    /// decision procedure; the access is logged whatever the outcome. The
    /// payload is returned when a read was granted; a granted write with
    /// `new_payload` replaces the bytes and re-seals the capsule.
    pub fn request_access(
        &mut self,
        request: &AccessRequest,
        new_payload: Option<&[u8]>,
    ) -> Result<(Decision, Option<Vec<u8>>), ServiceError> {
        let resource_id = request.resource_id.as_str();
        if !self.resource_exists(resource_id) {
            return Err(ServiceError::UnknownResource(resource_id.to_string()));
        }
        let capsule_file = CapsuleFile::load(&self.capsule_path(resource_id));
        let payload = std::fs::read(self.payload_path(resource_id))?;
        let now = self.now();

        // Fail closed: a capsule that does not load or does not verify denies
        // everyone until it is re-sealed.
        let capsule = match capsule_file {
            Ok(file) => match file.check_integrity(&payload) {
                Integrity::Intact => match file.into_capsule() {
                    Ok(capsule) => Some(capsule),
                    Err(_) => None,
                },
                Integrity::Tampered(_) => None,
            },
            Err(_) => None,
        };
        let capsule = match capsule {
            Some(capsule) => capsule,
            None => {
                let decision = Decision::deny(vec![Reason::new(
                    "tampered-capsule",
                    format!("capsule for resource {resource_id} failed integrity verification"),
                )]);
                // Log against a placeholder capsule view of the resource.
                let stub = Capsule {
                    resource_id: resource_id.to_string(),
                    payload_digest: digest_hex(&payload),
                    policy_digest: String::new(),
                    seal_digest: String::new(),
                    policies: Vec::new(),
                    created_at: now,
                };
                record_access(&stub, request, &decision, &digest_hex(&payload), &mut self.store)?;
                return Ok((decision, None));
            }
        };

        let snapshot = self.store.snapshot();
        let seals = self.seal_history()?;
        let violations = detect_violations(&snapshot, &seals, &self.config.gen_config);
        let decision = decide(request, &capsule.policies, &snapshot, &violations, now);

        let mut final_payload = payload;
        if decision.granted_actions.contains("write") {
            if let Some(bytes) = new_payload {
                std::fs::write(self.payload_path(resource_id), bytes)?;
                let resealed = seal(resource_id, bytes, capsule.policies.clone(), capsule.created_at)?;
                CapsuleFile::from_capsule(&resealed)?.save(&self.capsule_path(resource_id))?;
                final_payload = bytes.to_vec();
            }
        }
        let post_digest = digest_hex(&final_payload);
        record_access(&capsule, request, &decision, &post_digest, &mut self.store)?;

        let returned = if decision.granted_actions.contains("read") {
            Some(final_payload)
        } else {
            None
        };
        Ok((decision, returned))
    }

    /// Runs the full generation pipeline and re-seals capsules with the new
    /// policy lists. Returns the number of policy documents attached.
    pub fn regenerate_policies(&mut self, resource_filter: Option<&str>) -> Result<usize, ServiceError> {
        let snapshot = self.store.snapshot();
        let records = build_policy_records(&snapshot)?;
        let seals = self.seal_history()?;
        let violations = detect_violations(&snapshot, &seals, &self.config.gen_config);
        let now = self.now();
        let generated = generate_policies(&records, &violations, &snapshot, &self.config.gen_config, now);

        let mut attached = 0;
        for id in self.resource_ids()? {
            if let Some(filter) = resource_filter {
                if filter != id {
                    continue;
                }
            }
            let docs: Vec<_> = generated
                .iter()
                .filter(|g| g.resource_id.as_deref().map(|r| r == id).unwrap_or(true))
                .map(|g| g.doc.clone())
                .collect();
            attached += docs.len();
            let payload = std::fs::read(self.payload_path(&id))?;
            let created_at = CapsuleFile::load(&self.capsule_path(&id))
                .map(|f| f.created_at)
                .unwrap_or(now);
            let resealed = seal(&id, &payload, docs, created_at)?;
            CapsuleFile::from_capsule(&resealed)?.save(&self.capsule_path(&id))?;
        }
        Ok(attached)
    }

    /// All operations touching the resource, in append order, plus the
    /// accountability report for its violations.
    pub fn get_audit_trail(
        &self,
        resource_id: &str,
    ) -> Result<(Vec<OperationRecord>, String), ServiceError> {
        if !self.resource_exists(resource_id) {
            return Err(ServiceError::UnknownResource(resource_id.to_string()));
        }
        let snapshot = self.store.snapshot();
        let filter = QueryFilter {
            resource_id: Some(resource_id.to_string()),
            ..Default::default()
        };
        let records = snapshot
            .query(&filter)
            .into_iter()
            .filter_map(|r| r.as_operation().cloned())
            .collect();
        let violations: Vec<_> = self
            .violations()?
            .into_iter()
            .filter(|v| v.resource_id == resource_id)
            .collect();
        let report = generation_report(&snapshot, &violations);
        Ok((records, report))
    }

    /// Integrity verdict for a resource's on-disk capsule and payload.
    pub fn verify_resource(&self, resource_id: &str) -> Result<Integrity, ServiceError> {
        if !self.resource_exists(resource_id) {
            return Err(ServiceError::UnknownResource(resource_id.to_string()));
        }
        let payload = std::fs::read(self.payload_path(resource_id))?;
        match CapsuleFile::load(&self.capsule_path(resource_id)) {
            Ok(file) => Ok(file.check_integrity(&payload)),
            Err(e) => Ok(Integrity::Tampered(format!("unreadable capsule: {e}"))),
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.config.data_dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn ts(s: &str) -> Timestamp {
        Timestamp::parse(s).unwrap()
    }

    fn service(dir: &Path) -> GateService {
        let config =
            ServiceConfig::new(dir).with_fixed_clock(ts("2014-01-01T00:00:00Z"));
        let mut svc = GateService::open(config).unwrap();
        svc.add_actor("owner", "Olive", "Owner").unwrap();
        svc.add_actor("a1", "Alice", "AuthorizedUser").unwrap();
        svc.add_context("c1", "active", BTreeMap::new()).unwrap();
        svc
    }

    fn read_request(actor: &str, resource: &str) -> AccessRequest {
        AccessRequest {
            actor_id: actor.into(),
            claimed_role: "AuthorizedUser".to_string(),
            context_id: "c1".into(),
            resource_id: resource.to_string(),
            requested_actions: BTreeSet::from(["read".to_string()]),
            system_attributes: BTreeMap::new(),
            at: ts("2014-01-01T00:00:00Z"),
        }
    }

    #[test]
    fn upload_persists_capsule_and_logs_one_operation() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(dir.path());
        let before = svc.snapshot().records.len();
        svc.upload_resource("r1", b"hello", &"owner".into(), None).unwrap();
        assert!(dir.path().join("capsules/r1.capsule.json").exists());
        assert!(dir.path().join("capsules/r1.bin").exists());
        let snap = svc.snapshot();
        let uploads: Vec<_> = snap
            .operations()
            .filter(|op| op.description == "upload")
            .collect();
        assert_eq!(uploads.len(), 1);
        // upload context record + operation record
        assert_eq!(snap.records.len(), before + 2);
    }

    #[test]
    fn unknown_owner_uploads_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(dir.path());
        let err = svc
            .upload_resource("r1", b"hello", &"ghost".into(), None)
            .unwrap_err();
        assert!(matches!(err, ServiceError::UnknownOwner(_)));
        assert!(!dir.path().join("capsules/r1.capsule.json").exists());
        assert!(svc.snapshot().operations().next().is_none());
    }

    #[test]
    fn duplicate_upload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(dir.path());
        svc.upload_resource("r1", b"hello", &"owner".into(), None).unwrap();
        let err = svc
            .upload_resource("r1", b"hello again", &"owner".into(), None)
            .unwrap_err();
        assert!(matches!(err, ServiceError::DuplicateResource(_)));
    }

    #[test]
    fn tampered_capsule_denies_but_still_logs() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(dir.path());
        svc.upload_resource("r1", b"hello", &"owner".into(), None).unwrap();
        std::fs::write(dir.path().join("capsules/r1.bin"), b"mangled").unwrap();
        let before = svc.snapshot().operations().count();
        let (decision, payload) = svc.request_access(&read_request("a1", "r1"), None).unwrap();
        assert_eq!(decision.reasons[0].code, "tampered-capsule");
        assert!(payload.is_none());
        assert_eq!(svc.snapshot().operations().count(), before + 1);
    }

    #[test]
    fn regenerate_then_read_succeeds() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(dir.path());
        svc.upload_resource("r1", b"hello", &"owner".into(), None).unwrap();
        // bootstrap: first read is default-denied but logged
        let (decision, _) = svc.request_access(&read_request("a1", "r1"), None).unwrap();
        assert!(!decision.permits());
        let attached = svc.regenerate_policies(None).unwrap();
        assert!(attached >= 1);
        let (decision, payload) = svc.request_access(&read_request("a1", "r1"), None).unwrap();
        assert!(decision.permits());
        assert_eq!(payload.unwrap(), b"hello");
    }

    #[test]
    fn audit_trail_counts_one_record_per_request() {
        let dir = tempfile::tempdir().unwrap();
        let mut svc = service(dir.path());
        svc.upload_resource("r1", b"hello", &"owner".into(), None).unwrap();
        svc.request_access(&read_request("a1", "r1"), None).unwrap();
        svc.request_access(&read_request("a1", "r1"), None).unwrap();
        let (records, _report) = svc.get_audit_trail("r1").unwrap();
        assert_eq!(records.len(), 3); // upload + 2 reads
        assert!(matches!(
            svc.get_audit_trail("nope"),
            Err(ServiceError::UnknownResource(_))
        ));
    }

    #[test]
    fn empty_store_regenerates_zero_policies() {
        let dir = tempfile::tempdir().unwrap();
        let config = ServiceConfig::new(dir.path()).with_fixed_clock(ts("2014-01-01T00:00:00Z"));
        let mut svc = GateService::open(config).unwrap();
        assert_eq!(svc.regenerate_policies(None).unwrap(), 0);
    }
}

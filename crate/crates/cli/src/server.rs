//! HTTP face of the gate: JSON request/response bodies, base64 payloads.
//!
//! Routes:
//! - `POST /resources` — upload and seal a resource
//! - `POST /resources/{id}/access` — mediate one access request
//! - `POST /policies/regenerate` — run the generation pipeline
//! - `GET  /resources/{id}/audit` — operations + accountability report

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::Deserialize;
use serde_json::json;

use provgate_core::capsule::Integrity;
use provgate_core::evaluator::AccessRequest;
use provgate_core::record::canonical_serialize;
use provgate_core::record::ProvenanceRecord;
use provgate_core::service::{GateService, ServiceError};

type Shared = Arc<Mutex<GateService>>;

pub async fn serve(service: GateService, listen: &str) -> Result<(), String> {
    let app = router(Arc::new(Mutex::new(service)));
    let listener = tokio::net::TcpListener::bind(listen)
        .await
        .map_err(|e| format!("cannot bind {listen}: {e}"))?;
    eprintln!("listening on {}", listener.local_addr().map_err(|e| e.to_string())?);
    axum::serve(listener, app).await.map_err(|e| e.to_string())
}

pub fn router(shared: Shared) -> Router {
    Router::new()
        .route("/resources", post(upload))
        .route("/resources/{id}/access", post(access))
        .route("/policies/regenerate", post(regenerate))
        .route("/resources/{id}/audit", get(audit))
        .with_state(shared)
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(err: ServiceError) -> ApiError {
        let status = match err {
            ServiceError::UnknownResource(_) | ServiceError::UnknownOwner(_) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::DuplicateResource(_) => StatusCode::CONFLICT,
            ServiceError::BadResourceId(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, err.to_string())
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, message.into())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct UploadBody {
    resource_id: String,
    owner_actor_id: String,
    payload_base64: String,
    #[serde(default)]
    context_id: Option<String>,
}

async fn upload(
    State(shared): State<Shared>,
    Json(body): Json<UploadBody>,
) -> Result<Response, ApiError> {
    let payload = B64
        .decode(&body.payload_base64)
        .map_err(|e| bad_request(format!("payloadBase64: {e}")))?;
    let mut svc = shared.lock().unwrap();
    let context_id = body.context_id.map(|c| c.as_str().into());
    let capsule = svc.upload_resource(
        &body.resource_id,
        &payload,
        &body.owner_actor_id.as_str().into(),
        context_id.as_ref(),
    )?;
    let reply = json!({
        "resourceId": capsule.resource_id,
        "payloadDigest": capsule.payload_digest,
        "policyDigest": capsule.policy_digest,
        "sealDigest": capsule.seal_digest,
        "createdAt": capsule.created_at.to_string(),
    });
    Ok((StatusCode::CREATED, Json(reply)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AccessBody {
    actor_id: String,
    claimed_role: String,
    context_id: String,
    actions: BTreeSet<String>,
    #[serde(default)]
    system_attributes: BTreeMap<String, String>,
    #[serde(default)]
    new_payload_base64: Option<String>,
}

async fn access(
    State(shared): State<Shared>,
    Path(id): Path<String>,
    Json(body): Json<AccessBody>,
) -> Result<Response, ApiError> {
    if body.actions.is_empty() {
        return Err(bad_request("actions must be non-empty"));
    }
    let new_payload = body
        .new_payload_base64
        .as_deref()
        .map(|text| B64.decode(text))
        .transpose()
        .map_err(|e| bad_request(format!("newPayloadBase64: {e}")))?;
    let mut svc = shared.lock().unwrap();
    let request = AccessRequest {
        actor_id: body.actor_id.as_str().into(),
        claimed_role: body.claimed_role,
        context_id: body.context_id.as_str().into(),
        resource_id: id,
        requested_actions: body.actions,
        system_attributes: body.system_attributes,
        at: svc.now(),
    };
    let (decision, payload) = svc.request_access(&request, new_payload.as_deref())?;
    let reply = json!({
        "decision": decision,
        "payloadBase64": payload.map(|bytes| B64.encode(bytes)),
    });
    Ok(Json(reply).into_response())
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RegenerateBody {
    #[serde(default)]
    resource_id: Option<String>,
}

async fn regenerate(
    State(shared): State<Shared>,
    body: Option<Json<RegenerateBody>>,
) -> Result<Response, ApiError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let mut svc = shared.lock().unwrap();
    let attached = svc.regenerate_policies(body.resource_id.as_deref())?;
    Ok(Json(json!({ "policiesAttached": attached })).into_response())
}

async fn audit(
    State(shared): State<Shared>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let svc = shared.lock().unwrap();
    let (operations, report) = svc.get_audit_trail(&id)?;
    let integrity = match svc.verify_resource(&id)? {
        Integrity::Intact => json!({ "status": "intact" }),
        Integrity::Tampered(reason) => json!({ "status": "tampered", "reason": reason }),
    };
    let lines: Result<Vec<String>, _> = operations
        .into_iter()
        .map(|op| canonical_serialize(&ProvenanceRecord::Operation(op)))
        .collect();
    let lines = lines.map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(json!({
        "operations": lines,
        "report": report,
        "integrity": integrity,
    }))
    .into_response())
}

//! End-to-end test against the HTTP gate: spawn `provgate serve` on an
//! ephemeral port and drive the four routes.

use std::io::{BufRead, BufReader};
use std::process::{Child, Command, Stdio};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn spawn_server(data_dir: &std::path::Path) -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_provgate"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(["--fixed-clock", "2014-01-01T00:00:00Z", "serve", "--listen", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .expect("server starts");
    // the bound address is announced on the first stderr line
    let stderr = child.stderr.take().unwrap();
    let mut line = String::new();
    BufReader::new(stderr).read_line(&mut line).unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on ")
        .unwrap_or_else(|| panic!("unexpected banner {line:?}"))
        .to_string();
    Server { child, base: format!("http://{addr}") }
}

fn seed_cli(data_dir: &std::path::Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_provgate"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .status()
        .unwrap();
    assert!(status.success(), "seed command {args:?} failed");
}

#[test]
fn http_routes_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    seed_cli(&data, &["actor", "add", "owner", "--name", "Olive", "--role", "Owner"]);
    seed_cli(&data, &["actor", "add", "alice", "--name", "Alice", "--role", "AuthorizedUser"]);
    seed_cli(&data, &["context", "add", "c1", "--state", "active"]);
    let server = spawn_server(&data);
    let client = reqwest::blocking::Client::new();

    let created: Value = client
        .post(format!("{}/resources", server.base))
        .json(&json!({
            "resourceId": "r1",
            "ownerActorId": "owner",
            "payloadBase64": B64.encode(b"ledger-v1"),
        }))
        .send()
        .unwrap()
        .error_for_status()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(created["resourceId"], "r1");
    assert_eq!(created["payloadDigest"].as_str().unwrap().len(), 64);

    let access_body = json!({
        "actorId": "alice",
        "claimedRole": "AuthorizedUser",
        "contextId": "c1",
        "actions": ["read"],
    });
    let denied: Value = client
        .post(format!("{}/resources/r1/access", server.base))
        .json(&access_body)
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(denied["decision"]["outcome"], "Deny");
    assert!(denied["payloadBase64"].is_null());

    let regen: Value = client
        .post(format!("{}/policies/regenerate", server.base))
        .json(&json!({}))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert!(regen["policiesAttached"].as_u64().unwrap() >= 1);

    let permitted: Value = client
        .post(format!("{}/resources/r1/access", server.base))
        .json(&access_body)
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(permitted["decision"]["outcome"], "FullPermit");
    let bytes = B64
        .decode(permitted["payloadBase64"].as_str().unwrap())
        .unwrap();
    assert_eq!(bytes, b"ledger-v1");

    let audit: Value = client
        .get(format!("{}/resources/r1/audit", server.base))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert_eq!(audit["operations"].as_array().unwrap().len(), 3);
    assert_eq!(audit["integrity"]["status"], "intact");

    // unknown resource maps to 404
    let missing = client
        .get(format!("{}/resources/nope/audit", server.base))
        .send()
        .unwrap();
    assert_eq!(missing.status(), reqwest::StatusCode::NOT_FOUND);

    // duplicate upload maps to 409
    let duplicate = client
        .post(format!("{}/resources", server.base))
        .json(&json!({
            "resourceId": "r1",
            "ownerActorId": "owner",
            "payloadBase64": B64.encode(b"again"),
        }))
        .send()
        .unwrap();
    assert_eq!(duplicate.status(), reqwest::StatusCode::CONFLICT);
}

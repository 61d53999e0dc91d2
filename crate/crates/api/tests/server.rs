//! Drives the real server binary over HTTP, including an abrupt kill.

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use bomlot_core::fixtures::HPC_MANIFEST;
use serde_json::{json, Value};

struct Server {
    child: Child,
    base: String,
}

impl Server {
    fn start(dir: &Path, extra: &[&str]) -> Self {
        let mut child = Command::new(env!("CARGO_BIN_EXE_bomlot-server"))
            .args(["--listen", "127.0.0.1:0", "--deterministic-ids", "--data-dir"])
            .arg(dir)
            .args(extra)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .expect("server starts");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let base = line.trim().strip_prefix("listening on ").expect("address line").to_owned();
        Server { child, base }
    }

    /// SIGKILL: no shutdown path runs.
    fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn agent() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

struct Reply {
    status: u16,
    request_id: Option<String>,
    body: Vec<u8>,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap()
    }
}

fn send(agent: &ureq::Agent, method: &str, url: &str, body: Option<&[u8]>) -> Reply {
    let mut resp = match (method, body) {
        ("GET", _) => agent.get(url).call(),
        ("PUT", b) => agent.put(url).header("content-type", "application/json").send(b.unwrap_or_default()),
        (_, b) => agent.post(url).header("content-type", "application/json").send(b.unwrap_or_default()),
    }
    .expect("request completes");
    Reply {
        status: resp.status().as_u16(),
        request_id: resp.headers().get("x-request-id").and_then(|v| v.to_str().ok()).map(str::to_owned),
        body: resp.body_mut().read_to_vec().unwrap(),
    }
}

#[test]
fn writes_survive_a_kill_and_restart() {
    let dir = tempfile::tempdir().unwrap();
    let a = agent();
    let server = Server::start(dir.path(), &[]);
    let created = send(&a, "POST", &format!("{}/boms", server.base), Some(HPC_MANIFEST.as_bytes()));
    assert_eq!(created.status, 201);
    assert!(created.request_id.as_deref().is_some_and(|r| r.starts_with("req_")));
    let bom = created.json()["id"].as_str().unwrap().to_owned();
    let result = created.json()["assemblies"][0]["outputData"][0]["id"].as_str().unwrap().to_owned();

    let bol = send(&a, "POST", &format!("{}/boms/{bom}/bols", server.base), Some(br#"{"runLabel":"before crash"}"#));
    assert_eq!(bol.status, 201);
    let bol = bol.json()["id"].as_str().unwrap().to_owned();
    let obs = json!({"componentId": result, "payload": "congestion_score=7"}).to_string();
    assert_eq!(send(&a, "POST", &format!("{}/bols/{bol}/observations", server.base), Some(obs.as_bytes())).status, 201);

    let bom_before = send(&a, "GET", &format!("{}/boms/{bom}", server.base), None).body;
    let bol_before = send(&a, "GET", &format!("{}/bols/{bol}", server.base), None).body;
    let export_before = send(&a, "GET", &format!("{}/ledger/export", server.base), None).body;
    server.kill();

    let server = Server::start(dir.path(), &[]);
    assert_eq!(send(&a, "GET", &format!("{}/boms/{bom}", server.base), None).body, bom_before);
    assert_eq!(send(&a, "GET", &format!("{}/bols/{bol}", server.base), None).body, bol_before);
    assert_eq!(send(&a, "GET", &format!("{}/ledger/export", server.base), None).body, export_before);

    // The chain keeps growing from where it was.
    let sealed = send(&a, "POST", &format!("{}/bols/{bol}/seal", server.base), None);
    assert_eq!(sealed.status, 200);
    assert_eq!(sealed.json()["ledgerIndex"], 2);
    // Logical time resumes after the last stored timestamp.
    let export = send(&a, "GET", &format!("{}/ledger/export", server.base), None).body;
    let stamps: Vec<i64> = String::from_utf8(export)
        .unwrap()
        .lines()
        .map(|l| {
            let entry: Value = serde_json::from_str(l).unwrap();
            let payload: Value = serde_json::from_str(entry["payload"].as_str().unwrap()).unwrap();
            ["createdAt", "recordedAt", "sealedAt"].iter().find_map(|k| payload[k].as_i64()).unwrap()
        })
        .collect();
    assert!(stamps.windows(2).all(|w| w[0] < w[1]), "{stamps:?}");

    let verify = send(&a, "GET", &format!("{}/ledger/verify", server.base), None).json();
    assert_eq!(verify, json!({"ok": true, "entries": 3}));

    let fresh = send(
        &a,
        "POST",
        &format!("{}/components", server.base),
        Some(br#"{"kind":"Artifact","name":"after restart"}"#),
    );
    let id = fresh.json()["id"].as_str().unwrap().to_owned();
    assert_eq!(send(&a, "GET", &format!("{}/components/{id}", server.base), None).status, 200);
    assert_eq!(id, "af_00000000000000000000000000000007");
}

#[test]
fn errors_and_base_path_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let a = agent();
    let server = Server::start(dir.path(), &["--base-path", "/api"]);
    let health = send(&a, "GET", &format!("{}/api/healthz", server.base), None);
    assert_eq!((health.status, health.json()), (200, json!({"status": "ok"})));
    assert_eq!(send(&a, "GET", &format!("{}/healthz", server.base), None).status, 404);

    let missing = send(&a, "GET", &format!("{}/api/bols/bol_ffffffffffffffffffffffffffffffff", server.base), None);
    assert_eq!(missing.status, 404);
    assert_eq!(missing.json()["code"], "UNKNOWN_BOL");

    let bad = send(&a, "POST", &format!("{}/api/components", server.base), Some(b"[]"));
    assert_eq!(bad.status, 400);
    assert_eq!(bad.json()["code"], "MALFORMED_BODY");
    assert!(bad.request_id.is_some());

    let schema = send(&a, "GET", &format!("{}/api/schema", server.base), None);
    let local = bomlot_api::Service::in_memory(bomlot_api::IdMode::Deterministic).dispatch("GET", "/schema", b"");
    assert_eq!(schema.body, local.body);
}

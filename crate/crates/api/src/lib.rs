//! HTTP+JSON surface of the gateway.
//!
//! [`Service::dispatch`] is transport-free: method, target and body in,
//! status and canonical JSON out. The server binary and the CLI's embedded
//! mode both call it, so they cannot disagree on a response byte.

use std::path::Path;
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use bomlot_core::manifest::MetadataPairs;
use bomlot_core::{
    canonical, AssemblyId, BomManifest, BomPatch, ComponentId, ComponentKind, Digest, Error, ErrorCode, Gateway, IdGen,
    InclusionProof, Millis, NewAssembly, RecordKind, ScanFilter, Scope,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub mod http;
pub mod routes;

use routes::{status_of, Op, Route};

pub const REQUEST_ID_HEADER: &str = "x-request-id";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: Vec<u8>,
    /// Set on mutations.
    pub request_id: Option<String>,
}

impl Response {
    fn json<T: Serialize + ?Sized>(status: u16, value: &T) -> Self {
        match canonical::to_vec(value) {
            Ok(body) => Self { status, content_type: "application/json", body, request_id: None },
            Err(e) => ApiError::new(ErrorCode::StorageFailure, format!("cannot encode response: {e}")).into(),
        }
    }

    pub fn body_json(&self) -> Option<Value> {
        serde_json::from_slice(&self.body).ok()
    }

    /// The error code, when this is an error response.
    pub fn error_code(&self) -> Option<String> {
        (self.status >= 400).then(|| self.body_json()?["code"].as_str().map(str::to_owned)).flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self { code, message: message.into(), detail: None }
    }

    pub fn status(&self) -> u16 {
        status_of(self.code)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self { code: e.code(), message: e.to_string(), detail: e.detail() }
    }
}

impl From<ApiError> for Response {
    fn from(e: ApiError) -> Self {
        let status = e.status();
        let body = canonical::to_vec(&e)
            .unwrap_or_else(|_| br#"{"code":"STORAGE_FAILURE","message":"unencodable error"}"#.to_vec());
        Response { status, content_type: "application/json", body, request_id: None }
    }
}

type ApiResult<T> = Result<T, ApiError>;

enum Clock {
    Wall,
    /// Deterministic: starts at 1000 and advances by one per mutation.
    Logical(AtomicI64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IdMode {
    #[default]
    Random,
    Deterministic,
}

pub struct Service {
    gateway: RwLock<Gateway>,
    clock: Clock,
    mode: IdMode,
    requests: AtomicU64,
}

impl std::fmt::Debug for Service {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Service").field("mode", &self.mode).finish_non_exhaustive()
    }
}

impl Service {
    pub fn new(gateway: Gateway, mode: IdMode) -> Self {
        let clock = match mode {
            IdMode::Random => Clock::Wall,
            IdMode::Deterministic => Clock::Logical(AtomicI64::new(resume_clock(&gateway))),
        };
        Self { gateway: RwLock::new(gateway), clock, mode, requests: AtomicU64::new(0) }
    }

    pub fn in_memory(mode: IdMode) -> Self {
        Self::new(Gateway::in_memory(id_gen(mode)), mode)
    }

    pub fn open_dir(dir: impl AsRef<Path>, mode: IdMode) -> bomlot_core::Result<Self> {
        Ok(Self::new(Gateway::open_dir(dir, id_gen(mode))?, mode))
    }

    fn now(&self) -> Millis {
        match &self.clock {
            Clock::Wall => SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as Millis),
            Clock::Logical(t) => t.fetch_add(1, Ordering::SeqCst),
        }
    }

    fn next_request_id(&self) -> String {
        let n = self.requests.fetch_add(1, Ordering::SeqCst) + 1;
        match self.mode {
            IdMode::Deterministic => format!("req_{n:016x}"),
            IdMode::Random => format!("req_{:016x}", rand::random::<u64>()),
        }
    }

    /// Handles one request. `target` is the path with an optional query.
    pub fn dispatch(&self, method: &str, target: &str, body: &[u8]) -> Response {
        let (path, query) = target.split_once('?').unwrap_or((target, ""));
        let Some((route, params)) = routes::find(method, path) else {
            return ApiError::new(ErrorCode::RouteNotFound, format!("no route for {method} {path}")).into();
        };
        let query: Vec<(String, String)> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
        let ctx = Ctx { params, query, body };

        if !route.mutates() {
            let gw = self.gateway.read().unwrap_or_else(|p| p.into_inner());
            return self.read(&gw, route, &ctx).unwrap_or_else(Response::from);
        }

        let request_id = self.next_request_id();
        let mut gw = self.gateway.write().unwrap_or_else(|p| p.into_inner());
        let before = gw.ledger_head();
        let mut response = self.mutate(&mut gw, route, &ctx).unwrap_or_else(Response::from);
        let after = gw.ledger_head();
        if response.status < 400 {
            tracing::info!(request_id = %request_id, route = route.path, ledger_index = ?after.filter(|_| after != before), "committed");
        } else {
            tracing::info!(request_id = %request_id, route = route.path, status = response.status, "rejected");
        }
        response.request_id = Some(request_id);
        response
    }

    fn read(&self, gw: &Gateway, route: &Route, ctx: &Ctx<'_>) -> ApiResult<Response> {
        let s = route.status;
        match route.op {
            Op::GetComponent => reply(s, &gw.component(ctx.param(0))?),
            Op::Trace => reply(s, &gw.trace(ctx.param(0), &ctx.scope()?)?),
            Op::Track => reply(s, &gw.track(ctx.param(0), &ctx.scope()?)?),
            Op::Uses => reply(s, &gw.find_uses(ctx.param(0))?),
            Op::GetAssembly => reply(s, &gw.assembly(ctx.param(0))?),
            Op::GetBom => reply(s, &gw.bom_view(ctx.param(0))?),
            Op::ValidateBom => reply(s, &gw.validate_bom(ctx.param(0))?),
            Op::GetBol => reply(s, &gw.bol(ctx.param(0))?),
            Op::BolReport => reply(s, &gw.lineage_report(ctx.param(0))?),
            Op::ResolveAccess => reply(s, &gw.resolve_access(ctx.param(0), ctx.param(1))?),
            Op::InclusionProof => {
                let leaf = ctx.param(1).parse::<u64>().map_err(|_| {
                    ApiError::new(ErrorCode::LeafOutOfRange, format!("leaf index {:?} is not a number", ctx.param(1)))
                })?;
                let (bytes, proof, anchor) = gw.inclusion_proof(ctx.param(0), leaf)?;
                let leaf =
                    String::from_utf8(bytes).map_err(|e| ApiError::new(ErrorCode::StorageFailure, e.to_string()))?;
                reply(s, &json!({"leaf": leaf, "proof": proof, "anchor": anchor}))
            }
            Op::VerifyInclusion => {
                let req: VerifyInclusionBody = ctx.json()?;
                let malformed =
                    |m: String| ApiError::from(Error::MalformedProof(bomlot_core::merkle::MalformedProof(m)));
                let proof = InclusionProof::from_json(&req.proof).map_err(Error::from)?;
                let root: Digest =
                    req.root.parse().map_err(|e: bomlot_core::digest::DigestParseError| malformed(e.0))?;
                let valid = bomlot_core::verify_inclusion(req.leaf.as_bytes(), &proof, &root).map_err(Error::from)?;
                reply(s, &json!({ "valid": valid }))
            }
            Op::VerifyLedger => reply(s, &gw.verify_chain()?),
            Op::ExportLedger => {
                let mut body = Vec::new();
                gw.export_ledger(&mut body)?;
                Ok(Response { status: 200, content_type: "application/x-ndjson", body, request_id: None })
            }
            Op::Schema => reply(s, &routes::schema()),
            Op::Health => reply(s, &json!({"status": "ok"})),
            _ => unreachable!("{:?} is a mutation", route.op),
        }
    }

    fn mutate(&self, gw: &mut Gateway, route: &Route, ctx: &Ctx<'_>) -> ApiResult<Response> {
        let s = route.status;
        match route.op {
            Op::CreateComponent => {
                let req: ComponentBody = ctx.json()?;
                let metadata = req.metadata.map(|m| m.0).unwrap_or_default();
                reply(s, &gw.create_component(req.kind, &req.name, req.description.as_deref(), &metadata)?)
            }
            Op::CreateAssembly => {
                let req: AssemblyBody = ctx.json()?;
                let input = NewAssembly {
                    name: req.name,
                    description: req.description,
                    input_data: component_ids(req.input_data)?,
                    input_artifacts: component_ids(req.input_artifacts)?,
                    output_data: component_ids(req.output_data)?,
                    output_artifacts: component_ids(req.output_artifacts)?,
                };
                reply(s, &gw.create_assembly(&input)?)
            }
            Op::CreateBom => {
                ctx.json::<Value>()?;
                let manifest = BomManifest::from_slice(ctx.body).map_err(|e| Error::ManifestInvalid(e.to_string()))?;
                let bom = gw.define_bom(&manifest, self.now())?;
                reply(s, &gw.bom_view(bom.id.as_str())?)
            }
            Op::UpdateBom => {
                let req: PatchBody = ctx.json()?;
                let patch = BomPatch {
                    name: req.name,
                    description: req.description,
                    assemblies: req.assemblies.map(assembly_ids).transpose()?,
                    expected_revision: req.expected_revision,
                };
                let bom = gw.update_bom(ctx.param(0), &patch)?;
                reply(s, &gw.bom_view(bom.id.as_str())?)
            }
            Op::InstantiateBol => {
                let req: BolBody = ctx.json_or_default()?;
                reply(s, &gw.instantiate_bol(ctx.param(0), req.run_label.as_deref(), self.now())?)
            }
            Op::RecordObservation => {
                let req: ObservationBody = ctx.json()?;
                let now = self.now();
                reply(
                    s,
                    &gw.record_observation(ctx.param(0), &req.component_id, &req.payload, req.note.as_deref(), now)?,
                )
            }
            Op::SealBol => reply(s, &gw.seal_bol(ctx.param(0), self.now())?),
            _ => unreachable!("{:?} is read-only", route.op),
        }
    }
}

/// First logical tick after everything already stored, so a reopened
/// deterministic service keeps time moving forward.
fn resume_clock(gw: &Gateway) -> Millis {
    let boms = gw.store().scan(RecordKind::Bom, &ScanFilter::All).into_iter().filter_map(|r| gw.bom(&r.key).ok());
    let ledger = gw.ledger_entries().unwrap_or_default().into_iter().filter_map(|e| {
        let v: Value = serde_json::from_slice(&e.payload).ok()?;
        ["createdAt", "recordedAt", "sealedAt"].iter().filter_map(|k| v[k].as_i64()).max()
    });
    boms.map(|b| b.created_at).chain(ledger).max().map_or(1_000, |t| t.max(999) + 1)
}

fn id_gen(mode: IdMode) -> IdGen {
    match mode {
        IdMode::Random => IdGen::Random,
        IdMode::Deterministic => IdGen::sequential(),
    }
}

/// Unparseable ids cannot exist, so they are reported as dangling.
fn component_ids(raw: Vec<String>) -> ApiResult<Vec<ComponentId>> {
    raw.into_iter().map(|s| s.parse().map_err(|_| Error::DanglingRef(s).into())).collect()
}

fn assembly_ids(raw: Vec<String>) -> ApiResult<Vec<AssemblyId>> {
    raw.into_iter().map(|s| s.parse().map_err(|_| Error::DanglingRef(s).into())).collect()
}

struct Ctx<'a> {
    params: Vec<&'a str>,
    query: Vec<(String, String)>,
    body: &'a [u8],
}

impl Ctx<'_> {
    fn param(&self, i: usize) -> &str {
        self.params[i]
    }

    fn json<T: DeserializeOwned>(&self) -> ApiResult<T> {
        serde_json::from_slice(self.body).map_err(|e| ApiError::new(ErrorCode::MalformedBody, e.to_string()))
    }

    fn json_or_default<T: DeserializeOwned + Default>(&self) -> ApiResult<T> {
        if self.body.iter().all(u8::is_ascii_whitespace) {
            Ok(T::default())
        } else {
            self.json()
        }
    }

    fn scope(&self) -> ApiResult<Scope> {
        let raw = self.query.iter().find(|(k, _)| k == "scope").map_or("", |(_, v)| v.as_str());
        raw.parse().map_err(|m: String| ApiError::new(ErrorCode::UnknownBom, m))
    }
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ComponentBody {
    kind: ComponentKind,
    name: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    metadata: Option<MetadataPairs>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct AssemblyBody {
    name: String,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    input_data: Vec<String>,
    #[serde(default)]
    input_artifacts: Vec<String>,
    #[serde(default)]
    output_data: Vec<String>,
    #[serde(default)]
    output_artifacts: Vec<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct PatchBody {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    assemblies: Option<Vec<String>>,
    #[serde(default)]
    expected_revision: Option<u64>,
}

#[derive(Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct BolBody {
    #[serde(default)]
    run_label: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ObservationBody {
    component_id: String,
    payload: String,
    #[serde(default)]
    note: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyInclusionBody {
    leaf: String,
    proof: Value,
    root: String,
}

fn reply<T: Serialize>(status: u16, value: &T) -> ApiResult<Response> {
    Ok(Response::json(status, value))
}

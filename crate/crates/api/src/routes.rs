//! The route table. Dispatch and the published schema both read it.

use bomlot_core::ErrorCode::{self, *};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    CreateComponent,
    GetComponent,
    Trace,
    Track,
    Uses,
    CreateAssembly,
    GetAssembly,
    CreateBom,
    GetBom,
    UpdateBom,
    ValidateBom,
    InstantiateBol,
    GetBol,
    BolReport,
    RecordObservation,
    SealBol,
    ResolveAccess,
    InclusionProof,
    VerifyInclusion,
    VerifyLedger,
    ExportLedger,
    Schema,
    Health,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Get,
    Post,
    Put,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Get => "GET",
            Method::Post => "POST",
            Method::Put => "PUT",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "GET" => Some(Method::Get),
            "POST" => Some(Method::Post),
            "PUT" => Some(Method::Put),
            _ => None,
        }
    }
}

pub type Fields = &'static [(&'static str, &'static str)];

#[derive(Debug)]
pub struct Route {
    pub method: Method,
    pub path: &'static str,
    pub op: Op,
    pub summary: &'static str,
    pub query: Fields,
    pub request: Option<Fields>,
    /// Name of an entry in [`TYPES`], or `ndjson`.
    pub response: &'static str,
    pub status: u16,
    pub errors: &'static [ErrorCode],
}

impl Route {
    pub fn mutates(&self) -> bool {
        self.method != Method::Get && self.op != Op::VerifyInclusion && self.op != Op::ValidateBom
    }

    /// Matches `segments` against the pattern, returning captured parameters.
    pub fn capture<'a>(&self, segments: &[&'a str]) -> Option<Vec<&'a str>> {
        let pattern: Vec<&str> = self.path.trim_start_matches('/').split('/').collect();
        if pattern.len() != segments.len() {
            return None;
        }
        let mut params = Vec::new();
        for (p, s) in pattern.iter().zip(segments) {
            if p.starts_with('{') {
                if s.is_empty() {
                    return None;
                }
                params.push(*s);
            } else if p != s {
                return None;
            }
        }
        Some(params)
    }
}

/// The route serving `method` on `path` (no query), with captured parameters.
pub fn find<'a>(method: &str, path: &'a str) -> Option<(&'static Route, Vec<&'a str>)> {
    let m = Method::parse(method)?;
    let segments: Vec<&str> = path.trim_start_matches('/').trim_end_matches('/').split('/').collect();
    ROUTES.iter().filter(|r| r.method == m).find_map(|r| r.capture(&segments).map(|p| (r, p)))
}

const COMPONENT_BODY: Fields = &[
    ("kind", "\"DataSource\" | \"Artifact\""),
    ("name", "string"),
    ("description?", "string"),
    ("metadata?", "object of string"),
];

const ASSEMBLY_BODY: Fields = &[
    ("name", "string"),
    ("description?", "string"),
    ("inputData?", "[ComponentId]"),
    ("inputArtifacts?", "[ComponentId]"),
    ("outputData?", "[ComponentId]"),
    ("outputArtifacts?", "[ComponentId]"),
];

const MANIFEST_BODY: Fields = &[
    ("name", "string"),
    ("description?", "string"),
    ("assemblies?", "[AssemblyId | inline assembly with inputData/inputArtifacts/outputData/outputArtifacts of ComponentId | {name, description?, metadata?, <key>: string}]"),
];

const PATCH_BODY: Fields = &[
    ("name?", "string"),
    ("description?", "string"),
    ("assemblies?", "[AssemblyId]"),
    ("expectedRevision?", "integer"),
];

const SCOPE: Fields = &[("scope?", "\"global\" (default) | BomId")];

pub static ROUTES: &[Route] = &[
    Route {
        method: Method::Post,
        path: "/components",
        op: Op::CreateComponent,
        summary: "Create a data source or artifact",
        query: &[],
        request: Some(COMPONENT_BODY),
        response: "ComponentRecord",
        status: 201,
        errors: &[EmptyName, DuplicateMetadataKey],
    },
    Route {
        method: Method::Get,
        path: "/components/{id}",
        op: Op::GetComponent,
        summary: "Fetch a component",
        query: &[],
        request: None,
        response: "ComponentRecord",
        status: 200,
        errors: &[UnknownId],
    },
    Route {
        method: Method::Get,
        path: "/components/{id}/trace",
        op: Op::Trace,
        summary: "Where-from: the node and everything upstream of it (component or assembly id)",
        query: SCOPE,
        request: None,
        response: "LineageGraph",
        status: 200,
        errors: &[UnknownId, UnknownBom, NotInScope],
    },
    Route {
        method: Method::Get,
        path: "/components/{id}/track",
        op: Op::Track,
        summary: "Where-used: the node and everything downstream of it (component or assembly id)",
        query: SCOPE,
        request: None,
        response: "LineageGraph",
        status: 200,
        errors: &[UnknownId, UnknownBom, NotInScope],
    },
    Route {
        method: Method::Get,
        path: "/components/{id}/uses",
        op: Op::Uses,
        summary: "BoM memberships of a component and the runs that included it",
        query: &[],
        request: None,
        response: "Uses",
        status: 200,
        errors: &[UnknownId],
    },
    Route {
        method: Method::Post,
        path: "/assemblies",
        op: Op::CreateAssembly,
        summary: "Create an assembly over existing components",
        query: &[],
        request: Some(ASSEMBLY_BODY),
        response: "Assembly",
        status: 201,
        errors: &[EmptyName, DanglingRef, KindMismatch, DuplicateRef, InputOutputOverlap],
    },
    Route {
        method: Method::Get,
        path: "/assemblies/{id}",
        op: Op::GetAssembly,
        summary: "Fetch an assembly",
        query: &[],
        request: None,
        response: "Assembly",
        status: 200,
        errors: &[UnknownId],
    },
    Route {
        method: Method::Post,
        path: "/boms",
        op: Op::CreateBom,
        summary: "Define a BoM from a manifest; inline components and assemblies are created with it",
        query: &[],
        request: Some(MANIFEST_BODY),
        response: "BomView",
        status: 201,
        errors: &[
            ManifestInvalid,
            EmptyName,
            DuplicateMetadataKey,
            DanglingRef,
            KindMismatch,
            DuplicateRef,
            InputOutputOverlap,
            ValidationFailed,
        ],
    },
    Route {
        method: Method::Get,
        path: "/boms/{id}",
        op: Op::GetBom,
        summary: "Fetch a BoM with its assemblies and components expanded",
        query: &[],
        request: None,
        response: "BomView",
        status: 200,
        errors: &[UnknownBom],
    },
    Route {
        method: Method::Put,
        path: "/boms/{id}",
        op: Op::UpdateBom,
        summary: "Edit an unfrozen BoM",
        query: &[],
        request: Some(PATCH_BODY),
        response: "BomView",
        status: 200,
        errors: &[UnknownBom, BomFrozen, RevisionConflict, EmptyName, DanglingRef, ValidationFailed],
    },
    Route {
        method: Method::Post,
        path: "/boms/{id}/validate",
        op: Op::ValidateBom,
        summary: "Structural validation report for a stored BoM",
        query: &[],
        request: None,
        response: "ValidationReport",
        status: 200,
        errors: &[UnknownBom],
    },
    Route {
        method: Method::Post,
        path: "/boms/{id}/bols",
        op: Op::InstantiateBol,
        summary: "Start a run: instantiate a BoL and freeze the BoM",
        query: &[],
        request: Some(&[("runLabel?", "string")]),
        response: "Bol",
        status: 201,
        errors: &[UnknownBom, ValidationFailed],
    },
    Route {
        method: Method::Get,
        path: "/bols/{id}",
        op: Op::GetBol,
        summary: "Fetch a BoL",
        query: &[],
        request: None,
        response: "Bol",
        status: 200,
        errors: &[UnknownBol],
    },
    Route {
        method: Method::Get,
        path: "/bols/{id}/report",
        op: Op::BolReport,
        summary: "Static graph, observations, anchor and BoM snapshot of a run",
        query: &[],
        request: None,
        response: "LineageReport",
        status: 200,
        errors: &[UnknownBol],
    },
    Route {
        method: Method::Post,
        path: "/bols/{id}/observations",
        op: Op::RecordObservation,
        summary: "Append an observation to a component's shadow item",
        query: &[],
        request: Some(&[("componentId", "ComponentId"), ("payload", "string"), ("note?", "string")]),
        response: "Observation",
        status: 201,
        errors: &[UnknownBol, BolSealed, ComponentNotInBom],
    },
    Route {
        method: Method::Post,
        path: "/bols/{id}/seal",
        op: Op::SealBol,
        summary: "Seal a BoL and anchor it in the ledger",
        query: &[],
        request: None,
        response: "Anchor",
        status: 200,
        errors: &[UnknownBol, AlreadySealed],
    },
    Route {
        method: Method::Get,
        path: "/bols/{id}/components/{cid}/access",
        op: Op::ResolveAccess,
        summary: "Static access metadata of a component in a run's BoM",
        query: &[],
        request: None,
        response: "AccessMetadata",
        status: 200,
        errors: &[UnknownBol, ComponentNotInBom],
    },
    Route {
        method: Method::Get,
        path: "/bols/{id}/proofs/{leaf}",
        op: Op::InclusionProof,
        summary: "Inclusion proof for one leaf of a sealed BoL (leaf 0 is the header)",
        query: &[],
        request: None,
        response: "ProofBundle",
        status: 200,
        errors: &[UnknownBol, BolNotSealed, LeafOutOfRange],
    },
    Route {
        method: Method::Post,
        path: "/ledger/verify-inclusion",
        op: Op::VerifyInclusion,
        summary: "Check a leaf and proof against a Merkle root",
        query: &[],
        request: Some(&[("leaf", "string"), ("proof", "InclusionProof"), ("root", "hex digest")]),
        response: "InclusionCheck",
        status: 200,
        errors: &[MalformedProof],
    },
    Route {
        method: Method::Get,
        path: "/ledger/verify",
        op: Op::VerifyLedger,
        summary: "Recompute every ledger hash and link",
        query: &[],
        request: None,
        response: "ChainReport",
        status: 200,
        errors: &[],
    },
    Route {
        method: Method::Get,
        path: "/ledger/export",
        op: Op::ExportLedger,
        summary: "Ledger as newline-delimited canonical JSON, in index order",
        query: &[],
        request: None,
        response: "ndjson",
        status: 200,
        errors: &[],
    },
    Route {
        method: Method::Get,
        path: "/schema",
        op: Op::Schema,
        summary: "This document",
        query: &[],
        request: None,
        response: "Schema",
        status: 200,
        errors: &[],
    },
    Route {
        method: Method::Get,
        path: "/healthz",
        op: Op::Health,
        summary: "Liveness",
        query: &[],
        request: None,
        response: "Health",
        status: 200,
        errors: &[],
    },
];

/// Errors any route can produce, on top of its own list.
pub const COMMON_ERRORS: &[ErrorCode] = &[RouteNotFound, StorageFailure];

/// Added to routes that take a request body.
pub const BODY_ERRORS: &[ErrorCode] = &[MalformedBody];

pub static TYPES: &[(&str, Fields)] = &[
    ("AccessMetadata", &[("<key>", "string")]),
    (
        "Anchor",
        &[("bolId", "BolId"), ("merkleRoot", "hex digest"), ("leafCount", "integer"), ("ledgerIndex", "integer")],
    ),
    ("ApiError", &[("code", "ErrorCode"), ("message", "string"), ("detail?", "object")]),
    (
        "Assembly",
        &[
            ("id", "AssemblyId"),
            ("name", "string"),
            ("description?", "string"),
            ("inputData", "[ComponentId]"),
            ("inputArtifacts", "[ComponentId]"),
            ("outputData", "[ComponentId]"),
            ("outputArtifacts", "[ComponentId]"),
        ],
    ),
    (
        "Bol",
        &[
            ("id", "BolId"),
            ("bomId", "BomId"),
            ("runLabel?", "string"),
            ("createdAt", "integer ms"),
            ("status", "\"Open\" | \"Sealed\""),
            ("shadowItems", "object of ComponentId to {componentId, observations: [Observation]}"),
            ("anchor?", "Anchor"),
        ],
    ),
    (
        "BomView",
        &[
            ("id", "BomId"),
            ("name", "string"),
            ("description?", "string"),
            ("frozen", "boolean"),
            ("createdAt", "integer ms"),
            ("revision", "integer"),
            ("assemblies", "[Assembly with component lists expanded to ComponentRecord]"),
        ],
    ),
    ("ChainReport", &[("ok", "boolean"), ("firstBadIndex?", "integer"), ("entries", "integer")]),
    (
        "ComponentRecord",
        &[
            ("id", "ComponentId"),
            ("kind", "\"DataSource\" | \"Artifact\""),
            ("name", "string"),
            ("description?", "string"),
            ("metadata", "AccessMetadata"),
        ],
    ),
    ("Health", &[("status", "\"ok\"")]),
    ("InclusionCheck", &[("valid", "boolean")]),
    ("InclusionProof", &[("leafIndex", "integer"), ("siblings", "[{digest: hex digest, side: \"Left\" | \"Right\"}]")]),
    (
        "LedgerEntry",
        &[
            ("index", "integer"),
            ("prevHash", "hex digest"),
            ("entryType", "\"BolCreated\" | \"ObservationRecorded\" | \"BolSealed\""),
            ("payload", "string (canonical JSON)"),
            ("payloadHash", "hex digest"),
            ("entryHash", "hex digest"),
        ],
    ),
    ("LineageGraph", &[("origin", "id"), ("nodes", "[id]"), ("edges", "[[from id, to id]]")]),
    (
        "LineageReport",
        &[
            ("bolId", "BolId"),
            ("status", "\"Open\" | \"Sealed\""),
            ("runLabel?", "string"),
            ("staticGraph", "LineageGraph"),
            ("dynamic", "object of ComponentId to [Observation & {payloadDigest}]"),
            ("anchor?", "Anchor"),
            ("bomSnapshot", "BomView"),
        ],
    ),
    ("Observation", &[("recordedAt", "integer ms"), ("payload", "string"), ("note?", "string")]),
    ("ProofBundle", &[("leaf", "string"), ("proof", "InclusionProof"), ("anchor", "Anchor")]),
    ("Schema", &[("routes", "[route]"), ("errors", "[{code, status}]"), ("types", "object")]),
    ("Uses", &[("static", "[{bomId, assemblyId, role: \"Input\" | \"Output\"}]"), ("dynamic", "[BolId]")]),
    ("ValidationReport", &[("ok", "boolean"), ("violations", "[{code, subject, detail}]")]),
];

/// HTTP status for an error code.
pub fn status_of(code: ErrorCode) -> u16 {
    match code {
        EmptyName | DuplicateMetadataKey | KindMismatch | InputOutputOverlap | DuplicateRef | ManifestInvalid
        | NotInScope | ComponentNotInBom | MalformedProof | MalformedBody => 400,
        DanglingRef | UnknownBom | UnknownBol | UnknownId | LeafOutOfRange | RouteNotFound => 404,
        ValidationFailed | BolSealed | AlreadySealed | BomFrozen | BolNotSealed | RevisionConflict => 409,
        StorageFailure => 500,
    }
}

fn fields(f: Fields) -> Value {
    Value::Object(f.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<Map<_, _>>())
}

/// Every error code a route can answer with.
pub fn route_errors(route: &Route) -> Vec<ErrorCode> {
    let mut codes: Vec<ErrorCode> = route.errors.to_vec();
    if route.request.is_some() {
        codes.extend(BODY_ERRORS);
    }
    codes.extend(COMMON_ERRORS);
    codes.sort();
    codes.dedup();
    codes
}

pub fn schema() -> Value {
    let routes: Vec<Value> = ROUTES
        .iter()
        .map(|r| {
            let mut v = json!({
                "method": r.method.as_str(),
                "path": r.path,
                "summary": r.summary,
                "response": r.response,
                "status": r.status,
                "errors": route_errors(r).iter().map(|c| c.as_str()).collect::<Vec<_>>(),
            });
            if let Some(body) = r.request {
                v["request"] = fields(body);
            }
            if !r.query.is_empty() {
                v["query"] = fields(r.query);
            }
            v
        })
        .collect();
    let errors: Vec<Value> =
        ErrorCode::ALL.iter().map(|&c| json!({"code": c.as_str(), "status": status_of(c)})).collect();
    let types: Map<String, Value> = TYPES.iter().map(|(name, f)| (name.to_string(), fields(f))).collect();
    json!({
        "name": "bomlot",
        "version": env!("CARGO_PKG_VERSION"),
        "routes": routes,
        "errors": errors,
        "types": types,
    })
}

//! `bomlot`: drive the gateway from a shell.
//!
//! Every subcommand is one request against one endpoint. The request goes
//! either to a running server (`--server`) or to an in-process service over a
//! local data directory (`--embedded --data-dir`).

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use bomlot_api::{IdMode, Service};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

mod render;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bomlot", version, about = "BoM/BoL traceability client")]
pub struct Cli {
    #[command(flatten)]
    pub conn: Connection,

    /// Print the response body exactly as the API returned it.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Connection {
    /// Base URL of a running bomlot-server.
    #[arg(long, global = true, env = "BOMLOT_SERVER", default_value = "http://127.0.0.1:8080")]
    pub server: String,

    /// Run the gateway in-process instead of talking to a server.
    #[arg(long, global = true, requires = "data_dir")]
    pub embedded: bool,

    /// Data directory for embedded mode.
    #[arg(long, global = true, env = "BOMLOT_DATA_DIR")]
    pub data_dir: Option<PathBuf>,

    /// Sequential ids and a logical clock (embedded mode only).
    #[arg(long, global = true, requires = "embedded")]
    pub deterministic_ids: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Define and inspect BoMs.
    #[command(subcommand)]
    Bom(BomCommand),
    /// Run-time BoLs.
    #[command(subcommand)]
    Bol(BolCommand),
    /// Where-from: everything an item was derived from.
    Trace(LineageArgs),
    /// Where-used: everything derived from an item.
    Track(LineageArgs),
    /// Assemblies and BoLs that reference a component.
    Uses { id: String },
    /// Hash-chained ledger.
    #[command(subcommand)]
    Ledger(LedgerCommand),
}

#[derive(Debug, Subcommand)]
pub enum BomCommand {
    /// Create a BoM from a JSON manifest file.
    Define { file: PathBuf },
    /// Show a BoM with its assemblies and components.
    Show { id: String },
}

#[derive(Debug, Subcommand)]
pub enum BolCommand {
    /// Instantiate a BoL from a BoM.
    New {
        bom_id: String,
        #[arg(long)]
        label: Option<String>,
    },
    /// Record an observation against a component of an open BoL.
    Record {
        bol_id: String,
        component: String,
        payload: String,
        #[arg(long)]
        note: Option<String>,
    },
    /// Seal a BoL and anchor its Merkle root in the ledger.
    Seal { bol_id: String },
    /// Lineage report for a BoL.
    Report { bol_id: String },
}

#[derive(Debug, Args)]
pub struct LineageArgs {
    /// Component or assembly id.
    pub id: String,
    /// `global` or a BoM id.
    #[arg(long)]
    pub scope: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum LedgerCommand {
    /// Recompute every hash and check the chain.
    Verify,
    /// Write the ledger as NDJSON to a file.
    Export { file: PathBuf },
}

/// Subcommand name and the endpoint it calls.
pub const ENDPOINTS: &[(&str, &str, &str)] = &[
    ("bom define", "POST", "/boms"),
    ("bom show", "GET", "/boms/{id}"),
    ("bol new", "POST", "/boms/{id}/bols"),
    ("bol record", "POST", "/bols/{id}/observations"),
    ("bol seal", "POST", "/bols/{id}/seal"),
    ("bol report", "GET", "/bols/{id}/report"),
    ("trace", "GET", "/components/{id}/trace"),
    ("track", "GET", "/components/{id}/track"),
    ("uses", "GET", "/components/{id}/uses"),
    ("ledger verify", "GET", "/ledger/verify"),
    ("ledger export", "GET", "/ledger/export"),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub method: &'static str,
    pub target: String,
    pub body: Vec<u8>,
}

impl Request {
    fn get(target: String) -> Self {
        Request { method: "GET", target, body: Vec::new() }
    }

    fn post(target: String, body: Vec<u8>) -> Self {
        Request { method: "POST", target, body }
    }
}

#[derive(Debug, Clone)]
pub struct Reply {
    pub status: u16,
    pub body: Vec<u8>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Bom(BomCommand::Define { .. }) => "bom define",
            Command::Bom(BomCommand::Show { .. }) => "bom show",
            Command::Bol(BolCommand::New { .. }) => "bol new",
            Command::Bol(BolCommand::Record { .. }) => "bol record",
            Command::Bol(BolCommand::Seal { .. }) => "bol seal",
            Command::Bol(BolCommand::Report { .. }) => "bol report",
            Command::Trace(_) => "trace",
            Command::Track(_) => "track",
            Command::Uses { .. } => "uses",
            Command::Ledger(LedgerCommand::Verify) => "ledger verify",
            Command::Ledger(LedgerCommand::Export { .. }) => "ledger export",
        }
    }

    /// The HTTP request this subcommand sends. Fails only when a local input
    /// file cannot be read.
    pub fn request(&self) -> std::io::Result<Request> {
        Ok(match self {
            Command::Bom(BomCommand::Define { file }) => Request::post("/boms".into(), std::fs::read(file)?),
            Command::Bom(BomCommand::Show { id }) => Request::get(format!("/boms/{id}")),
            Command::Bol(BolCommand::New { bom_id, label }) => {
                let body = match label {
                    Some(l) => serde_json::json!({ "runLabel": l }).to_string().into_bytes(),
                    None => Vec::new(),
                };
                Request::post(format!("/boms/{bom_id}/bols"), body)
            }
            Command::Bol(BolCommand::Record { bol_id, component, payload, note }) => {
                let mut body = serde_json::json!({ "componentId": component, "payload": payload });
                if let Some(n) = note {
                    body["note"] = Value::from(n.as_str());
                }
                Request::post(format!("/bols/{bol_id}/observations"), body.to_string().into_bytes())
            }
            Command::Bol(BolCommand::Seal { bol_id }) => Request::post(format!("/bols/{bol_id}/seal"), Vec::new()),
            Command::Bol(BolCommand::Report { bol_id }) => Request::get(format!("/bols/{bol_id}/report")),
            Command::Trace(a) => Request::get(lineage_target(&a.id, "trace", a.scope.as_deref())),
            Command::Track(a) => Request::get(lineage_target(&a.id, "track", a.scope.as_deref())),
            Command::Uses { id } => Request::get(format!("/components/{id}/uses")),
            Command::Ledger(LedgerCommand::Verify) => Request::get("/ledger/verify".into()),
            Command::Ledger(LedgerCommand::Export { .. }) => Request::get("/ledger/export".into()),
        })
    }
}

fn lineage_target(id: &str, which: &str, scope: Option<&str>) -> String {
    match scope {
        Some(s) => {
            let q: String = form_urlencoded::Serializer::new(String::new()).append_pair("scope", s).finish();
            format!("/components/{id}/{which}?{q}")
        }
        None => format!("/components/{id}/{which}"),
    }
}

pub enum Transport {
    Embedded(Box<Service>),
    Remote { agent: ureq::Agent, base: String },
}

impl Transport {
    pub fn connect(conn: &Connection) -> Result<Self, String> {
        if conn.embedded {
            let dir = conn.data_dir.as_ref().ok_or("--embedded needs --data-dir")?;
            let mode = if conn.deterministic_ids { IdMode::Deterministic } else { IdMode::Random };
            let service = Service::open_dir(dir, mode).map_err(|e| format!("cannot open {}: {e}", dir.display()))?;
            return Ok(Transport::Embedded(Box::new(service)));
        }
        let agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        Ok(Transport::Remote { agent, base: conn.server.trim_end_matches('/').to_owned() })
    }

    pub fn send(&self, req: &Request) -> Result<Reply, String> {
        match self {
            Transport::Embedded(service) => {
                let r = service.dispatch(req.method, &req.target, &req.body);
                Ok(Reply { status: r.status, body: r.body })
            }
            Transport::Remote { agent, base } => {
                let url = format!("{base}{}", req.target);
                let sent = match req.method {
                    "GET" => agent.get(&url).call(),
                    _ => agent.post(&url).header("content-type", "application/json").send(&req.body[..]),
                };
                let mut resp = sent.map_err(|e| format!("cannot reach {base}: {e}"))?;
                let status = resp.status().as_u16();
                let body = resp.body_mut().read_to_vec().map_err(|e| format!("reading response from {base}: {e}"))?;
                Ok(Reply { status, body })
            }
        }
    }
}

/// Parses `args` and runs the subcommand, returning the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{}", e.render());
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    execute(&cli, out, err)
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let request = match cli.command.request() {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let transport = match Transport::connect(&cli.conn) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_DOMAIN;
        }
    };
    let reply = match transport.send(&request) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_DOMAIN;
        }
    };
    match finish(cli, &reply, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DOMAIN
        }
    }
}

fn finish(cli: &Cli, reply: &Reply, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    if reply.status >= 400 {
        let parsed: Option<Value> = serde_json::from_slice(&reply.body).ok();
        let field = |k: &str| parsed.as_ref().and_then(|v| v[k].as_str()).unwrap_or("").to_owned();
        let code = field("code");
        let code = if code.is_empty() { format!("HTTP_{}", reply.status) } else { code };
        writeln!(err, "error: {code}: {}", field("message"))?;
        if cli.json {
            out.write_all(&reply.body)?;
        }
        return Ok(EXIT_DOMAIN);
    }

    if let Command::Ledger(LedgerCommand::Export { file }) = &cli.command {
        std::fs::write(file, &reply.body)?;
    }
    if cli.json {
        out.write_all(&reply.body)?;
    } else {
        render::human(&cli.command, &reply.body, out)?;
    }

    if let Command::Ledger(LedgerCommand::Verify) = &cli.command {
        let report: Value = serde_json::from_slice(&reply.body).unwrap_or(Value::Null);
        if report["ok"] != Value::Bool(true) {
            writeln!(err, "error: ledger verification failed at index {}", report["firstBadIndex"])?;
            return Ok(EXIT_DOMAIN);
        }
    }
    Ok(EXIT_OK)
}

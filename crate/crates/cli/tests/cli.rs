use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use bomlot_api::{routes, IdMode, Service};
use bomlot_cli::{Cli, ENDPOINTS};
use bomlot_core::fixtures::HPC_MANIFEST;
use clap::{CommandFactory, Parser};
use proptest::prelude::*;
use serde_json::{json, Value};

struct Out {
    code: i32,
    stdout: Vec<u8>,
    stderr: String,
}

impl Out {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.stdout).unwrap()
    }

    fn text(&self) -> String {
        String::from_utf8(self.stdout.clone()).unwrap()
    }
}

fn bomlot(args: &[&str]) -> Out {
    let (mut stdout, mut stderr) = (Vec::new(), Vec::new());
    let code = bomlot_cli::run(std::iter::once("bomlot").chain(args.iter().copied()), &mut stdout, &mut stderr);
    Out { code, stdout, stderr: String::from_utf8(stderr).unwrap() }
}

fn embedded<'a>(dir: &'a Path, args: &[&'a str]) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--embedded", "--data-dir", dir.to_str().unwrap(), "--deterministic-ids"]);
    v
}

fn manifest_file(dir: &Path) -> String {
    let path = dir.join("hpc.bom.json");
    std::fs::write(&path, HPC_MANIFEST).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Starts the HTTP front end over `dir` on an ephemeral port.
fn serve(dir: &Path) -> String {
    let service = Arc::new(Service::open_dir(dir, IdMode::Deterministic).unwrap());
    let rt = tokio::runtime::Runtime::new().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        rt.block_on(async move { axum::serve(listener, bomlot_api::http::router(service, "")).await.unwrap() })
    });
    format!("http://{addr}")
}

struct Hpc {
    bom: String,
    result: String,
    scene: String,
}

fn hpc_ids(bom_view: &Value) -> Hpc {
    let a = &bom_view["assemblies"][0];
    Hpc {
        bom: bom_view["id"].as_str().unwrap().into(),
        result: a["outputData"][0]["id"].as_str().unwrap().into(),
        scene: a["inputData"][0]["id"].as_str().unwrap().into(),
    }
}

/// The full subcommand set run as one session. Each step is (args, method,
/// target, body) so the same request can be replayed against the API.
fn session(run: &mut dyn FnMut(&[&str]) -> Out, scratch: &Path) -> Vec<(Vec<String>, Out)> {
    let manifest = manifest_file(scratch);
    let mut log = Vec::new();
    let mut step = |args: &[&str], log: &mut Vec<(Vec<String>, Out)>| -> Value {
        let out = run(args);
        assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
        let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
        log.push((args.iter().map(|a| a.to_string()).collect(), out));
        v
    };
    let hpc = hpc_ids(&step(&["bom", "define", &manifest, "--json"], &mut log));
    step(&["bom", "show", &hpc.bom, "--json"], &mut log);
    let bol =
        step(&["bol", "new", &hpc.bom, "--label", "run 1", "--json"], &mut log)["id"].as_str().unwrap().to_owned();
    step(&["bol", "record", &bol, &hpc.result, "congestion=0.7", "--note", "peak", "--json"], &mut log);
    step(&["bol", "record", &bol, &hpc.scene, "frame 6514", "--json"], &mut log);
    step(&["bol", "seal", &bol, "--json"], &mut log);
    step(&["bol", "report", &bol, "--json"], &mut log);
    step(&["trace", &hpc.result, "--json"], &mut log);
    step(&["track", &hpc.scene, "--scope", &hpc.bom, "--json"], &mut log);
    step(&["uses", &hpc.scene, "--json"], &mut log);
    step(&["ledger", "verify", "--json"], &mut log);
    let export = scratch.join("ledger.ndjson");
    step(&["ledger", "export", export.to_str().unwrap(), "--json"], &mut log);
    log
}

#[test]
fn json_output_is_the_api_body() {
    let cli_dir = tempfile::tempdir().unwrap();
    let api_dir = tempfile::tempdir().unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let log = session(&mut |args| bomlot(&embedded(cli_dir.path(), args)), scratch.path());
    assert_eq!(log.len(), ENDPOINTS.len() + 1);

    // Replay every step straight through the service, one open per step like the CLI.
    for (args, out) in &log {
        let request = Cli::try_parse_from(std::iter::once("bomlot").chain(args.iter().map(String::as_str)))
            .unwrap()
            .command
            .request()
            .unwrap();
        let api = Service::open_dir(api_dir.path(), IdMode::Deterministic).unwrap();
        let reply = api.dispatch(request.method, &request.target, &request.body);
        assert_eq!(reply.status / 100, 2, "{args:?}");
        assert_eq!(out.stdout, reply.body, "{args:?}");
    }
    let exported = std::fs::read(scratch.path().join("ledger.ndjson")).unwrap();
    assert_eq!(exported, log.last().unwrap().1.stdout);
}

#[test]
fn server_and_embedded_modes_print_the_same_bytes() {
    let server_dir = tempfile::tempdir().unwrap();
    let embedded_dir = tempfile::tempdir().unwrap();
    let scratch = tempfile::tempdir().unwrap();
    let url = serve(server_dir.path());
    let remote = session(&mut |args| bomlot(&[args, &["--server", &url]].concat()), scratch.path());
    let local = session(&mut |args| bomlot(&embedded(embedded_dir.path(), args)), scratch.path());
    for ((args, r), (_, l)) in remote.iter().zip(&local) {
        assert_eq!(r.stdout, l.stdout, "{args:?}");
    }

    let missing = bomlot(&["bol", "seal", "bol_ffffffffffffffffffffffffffffffff", "--server", &url]);
    assert_eq!(missing.code, 1);
    assert!(missing.stderr.contains("UNKNOWN_BOL"), "{}", missing.stderr);
}

fn leaf_subcommands(cmd: &clap::Command, prefix: &str, out: &mut BTreeSet<String>) {
    for sub in cmd.get_subcommands().filter(|s| s.get_name() != "help") {
        let name = if prefix.is_empty() { sub.get_name().to_owned() } else { format!("{prefix} {}", sub.get_name()) };
        if sub.has_subcommands() {
            leaf_subcommands(sub, &name, out);
        } else {
            out.insert(name);
        }
    }
}

#[test]
fn every_subcommand_maps_to_exactly_one_endpoint() {
    let mut leaves = BTreeSet::new();
    leaf_subcommands(&Cli::command(), "", &mut leaves);
    let mapped: BTreeSet<String> = ENDPOINTS.iter().map(|(name, _, _)| name.to_string()).collect();
    assert_eq!(leaves, mapped);
    assert_eq!(mapped.len(), ENDPOINTS.len());

    let samples: &[&[&str]] = &[
        &["bom", "define", "Cargo.toml"],
        &["bom", "show", "bom_1"],
        &["bol", "new", "bom_1", "--label", "x"],
        &["bol", "record", "bol_1", "ds_1", "p"],
        &["bol", "seal", "bol_1"],
        &["bol", "report", "bol_1"],
        &["trace", "ds_1", "--scope", "global"],
        &["track", "ds_1"],
        &["uses", "ds_1"],
        &["ledger", "verify"],
        &["ledger", "export", "out.ndjson"],
    ];
    let mut hit = BTreeSet::new();
    for args in samples {
        let cli = Cli::try_parse_from(std::iter::once(&"bomlot").chain(args.iter())).unwrap();
        let request = cli.command.request().unwrap();
        let path = request.target.split('?').next().unwrap();
        let (route, _) = routes::find(request.method, path).unwrap_or_else(|| panic!("{args:?} hits no route"));
        let declared = ENDPOINTS.iter().find(|(n, _, _)| *n == cli.command.name()).unwrap();
        assert_eq!((route.method.as_str(), route.path), (declared.1, declared.2), "{args:?}");
        assert!(hit.insert((route.method.as_str(), route.path)), "{args:?} shares an endpoint");
    }
    assert_eq!(hit.len(), leaves.len());

    // The rest of the API has no subcommand.
    let uncovered: BTreeSet<(&str, &str)> =
        routes::ROUTES.iter().map(|r| (r.method.as_str(), r.path)).filter(|e| !hit.contains(e)).collect();
    let expected: BTreeSet<(&str, &str)> = [
        ("POST", "/components"),
        ("GET", "/components/{id}"),
        ("POST", "/assemblies"),
        ("GET", "/assemblies/{id}"),
        ("PUT", "/boms/{id}"),
        ("POST", "/boms/{id}/validate"),
        ("GET", "/bols/{id}"),
        ("GET", "/bols/{id}/components/{cid}/access"),
        ("GET", "/bols/{id}/proofs/{leaf}"),
        ("POST", "/ledger/verify-inclusion"),
        ("GET", "/schema"),
        ("GET", "/healthz"),
    ]
    .into();
    assert_eq!(uncovered, expected);
}

#[test]
fn define_then_show_round_trips_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let file = manifest_file(dir.path());
    let defined = bomlot(&embedded(dir.path(), &["bom", "define", &file]));
    assert_eq!(defined.code, 0, "{}", defined.stderr);
    let id = defined.text().trim().to_owned();
    assert!(id.starts_with("bom_"));

    let shown = bomlot(&embedded(dir.path(), &["bom", "show", &id, "--json"])).json();
    let manifest: Value = serde_json::from_str(HPC_MANIFEST).unwrap();
    let m = &manifest["bom"];
    assert_eq!(shown["name"], m["name"]);
    assert_eq!(shown["description"], m["description"]);
    assert_eq!(shown["assemblies"].as_array().unwrap().len(), m["assemblies"].as_array().unwrap().len());
    for (a, ma) in shown["assemblies"].as_array().unwrap().iter().zip(m["assemblies"].as_array().unwrap()) {
        assert_eq!(a["name"], ma["name"]);
        assert_eq!(a["description"], ma["description"]);
        for role in ["inputData", "inputArtifacts", "outputData", "outputArtifacts"] {
            let declared = ma[role].as_array().cloned().unwrap_or_default();
            let stored = a[role].as_array().unwrap();
            assert_eq!(stored.len(), declared.len(), "{role}");
            for (s, d) in stored.iter().zip(&declared) {
                assert_eq!(s["name"], d["name"]);
                for (k, v) in d.as_object().unwrap().iter().filter(|(k, _)| *k != "name") {
                    assert_eq!(&s["metadata"][k], v, "{role} {k}");
                }
            }
        }
    }

    let human = bomlot(&embedded(dir.path(), &["bom", "show", &id])).text();
    for name in ["HPC Congestion", "Traffic Scene Analysis", "Traffic Scene", "Result", "Congestion Model"] {
        assert!(human.contains(name), "{human}");
    }
    assert!(human.contains("dataAccess=https://xyz.com/00001.06514.jpg"));
}

#[test]
fn trace_of_the_result_reaches_analysis_scene_and_model() {
    let dir = tempfile::tempdir().unwrap();
    let file = manifest_file(dir.path());
    let view = bomlot(&embedded(dir.path(), &["bom", "define", &file, "--json"])).json();
    let hpc = hpc_ids(&view);
    let out = bomlot(&embedded(dir.path(), &["trace", &hpc.result, "--json"]));
    assert_eq!(out.code, 0);
    let graph = out.json();

    let mut names = std::collections::BTreeMap::new();
    let a = &view["assemblies"][0];
    names.insert(a["id"].as_str().unwrap().to_owned(), a["name"].as_str().unwrap().to_owned());
    for role in ["inputData", "inputArtifacts", "outputData"] {
        for c in a[role].as_array().unwrap() {
            names.insert(c["id"].as_str().unwrap().to_owned(), c["name"].as_str().unwrap().to_owned());
        }
    }
    let reached: BTreeSet<&str> =
        graph["nodes"].as_array().unwrap().iter().map(|n| names[n.as_str().unwrap()].as_str()).collect();
    assert_eq!(reached, BTreeSet::from(["Result", "Traffic Scene Analysis", "Traffic Scene", "Congestion Model"]));
}

#[test]
fn recording_on_a_sealed_bol_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let file = manifest_file(dir.path());
    let hpc = hpc_ids(&bomlot(&embedded(dir.path(), &["bom", "define", &file, "--json"])).json());
    let bol = bomlot(&embedded(dir.path(), &["bol", "new", &hpc.bom])).text().trim().to_owned();
    assert_eq!(bomlot(&embedded(dir.path(), &["bol", "seal", &bol])).code, 0);

    let out = bomlot(&embedded(dir.path(), &["bol", "record", &bol, "x", "y"]));
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("BOL_SEALED"), "{}", out.stderr);
    assert!(out.stdout.is_empty());

    let json = bomlot(&embedded(dir.path(), &["bol", "record", &bol, &hpc.result, "y", "--json"]));
    assert_eq!(json.code, 1);
    assert_eq!(json.json()["code"], "BOL_SEALED");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["frobnicate"],
        vec!["bom", "show"],
        vec!["trace", "ds_1", "--deterministic-ids"],
        vec!["trace", "ds_1", "--embedded"],
        vec!["bom", "define", "/nonexistent/manifest.json", "--embedded", "--data-dir", dir.path().to_str().unwrap()],
    ] {
        let out = bomlot(&args);
        assert_eq!(out.code, 2, "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(bomlot(&["--help"]).code, 0);
}

#[test]
fn unreachable_server_is_a_runtime_failure() {
    let out = bomlot(&["ledger", "verify", "--server", "http://127.0.0.1:9"]);
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("cannot reach"), "{}", out.stderr);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let file = manifest_file(dir.path());
    let run = |args: &[&str]| {
        std::process::Command::new(env!("CARGO_BIN_EXE_bomlot"))
            .args(args)
            .args(["--embedded", "--data-dir", dir.path().to_str().unwrap()])
            .env_remove("BOMLOT_SERVER")
            .output()
            .unwrap()
    };
    let defined = run(&["bom", "define", &file]);
    assert_eq!(defined.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&defined.stdout).starts_with("bom_"));
    let missing = run(&["bom", "show", "bom_ffffffffffffffffffffffffffffffff"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("UNKNOWN_BOM"));
    assert_eq!(run(&["bom"]).status.code(), Some(2));
    let verify = run(&["ledger", "verify"]);
    assert_eq!(
        (verify.status.code(), String::from_utf8_lossy(&verify.stdout).trim()),
        (Some(0), "ledger ok, 0 entries")
    );
}

#[derive(Debug, Clone)]
struct GenComponent {
    name: String,
    description: Option<String>,
    metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
struct GenAssembly {
    name: String,
    description: Option<String>,
    /// Role name, then components. An input may repeat the previous assembly's output by name.
    roles: Vec<(&'static str, Vec<GenComponent>)>,
}

fn gen_component(tag: &'static str) -> impl Strategy<Value = GenComponent> {
    (
        "[A-Za-z0-9_.-]{1,12}",
        proptest::option::of("[A-Za-z0-9 ,.]{0,20}"),
        proptest::collection::btree_map("[a-z][a-zA-Z]{0,8}", "[ -~]{0,24}", 0..3),
    )
        .prop_map(move |(name, description, metadata)| {
            let metadata = metadata
                .into_iter()
                .filter(|(k, _)| !matches!(k.as_str(), "name" | "description" | "metadata" | "id"))
                .collect();
            GenComponent { name: format!("{tag}:{name}"), description, metadata }
        })
}

fn gen_assembly() -> impl Strategy<Value = GenAssembly> {
    (
        "[A-Za-z][A-Za-z0-9 ]{0,15}",
        proptest::option::of("[A-Za-z0-9 ]{0,20}"),
        proptest::collection::vec(gen_component("in"), 0..3),
        proptest::collection::vec(gen_component("model"), 0..2),
        proptest::collection::vec(gen_component("out"), 1..3),
        proptest::collection::vec(gen_component("art"), 0..2),
    )
        .prop_map(|(name, description, i, ia, o, oa)| GenAssembly {
            name: name.trim().to_owned() + "!",
            description,
            roles: vec![("inputData", i), ("inputArtifacts", ia), ("outputData", o), ("outputArtifacts", oa)],
        })
}

/// Makes every declared name unique, then feeds each assembly's first data
/// output into the next one as a by-name reference.
fn manifest_of(
    name: &str,
    assemblies: &[GenAssembly],
) -> (Value, Vec<Vec<(&'static str, Vec<String>)>>, BTreeMap<String, GenComponent>) {
    let mut declared = BTreeMap::new();
    let mut layout = Vec::new();
    let mut json_assemblies = Vec::new();
    let mut previous_output: Option<String> = None;
    for (ai, a) in assemblies.iter().enumerate() {
        let mut roles = Vec::new();
        let mut obj = serde_json::Map::new();
        obj.insert("name".into(), Value::from(format!("{ai} {}", a.name)));
        if let Some(d) = &a.description {
            obj.insert("description".into(), Value::from(d.as_str()));
        }
        for (ri, (role, comps)) in a.roles.iter().enumerate() {
            let mut names = Vec::new();
            let mut list = Vec::new();
            if *role == "inputData" {
                if let Some(prev) = previous_output.take() {
                    list.push(json!({ "name": prev }));
                    names.push(prev);
                }
            }
            for (ci, c) in comps.iter().enumerate() {
                let unique = format!("{}#{ai}.{ri}.{ci}", c.name);
                let mut o = serde_json::Map::new();
                o.insert("name".into(), Value::from(unique.as_str()));
                if let Some(d) = &c.description {
                    o.insert("description".into(), Value::from(d.as_str()));
                }
                for (k, v) in &c.metadata {
                    o.insert(k.clone(), Value::from(v.as_str()));
                }
                list.push(Value::Object(o));
                declared.insert(unique.clone(), c.clone());
                names.push(unique);
            }
            if *role == "outputData" {
                previous_output = names.first().cloned();
            }
            obj.insert((*role).into(), Value::Array(list));
            roles.push((*role, names));
        }
        json_assemblies.push(Value::Object(obj));
        layout.push(roles);
    }
    (json!({ "bom": { "name": name, "assemblies": json_assemblies } }), layout, declared)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_manifests_round_trip_through_define_and_show(
        name in "[A-Za-z][A-Za-z0-9 ]{0,20}",
        assemblies in proptest::collection::vec(gen_assembly(), 0..4),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let (manifest, layout, declared) = manifest_of(name.trim(), &assemblies);
        let file = dir.path().join("m.bom.json");
        std::fs::write(&file, serde_json::to_vec_pretty(&manifest).unwrap()).unwrap();

        let defined = bomlot(&embedded(dir.path(), &["bom", "define", file.to_str().unwrap(), "--json"]));
        prop_assert_eq!(defined.code, 0, "{}", defined.stderr);
        let id = defined.json()["id"].as_str().unwrap().to_owned();
        let shown = bomlot(&embedded(dir.path(), &["bom", "show", &id, "--json"]));
        prop_assert_eq!(&shown.stdout, &defined.stdout);

        let v = shown.json();
        prop_assert_eq!(v["name"].as_str(), Some(name.trim()));
        let stored = v["assemblies"].as_array().unwrap();
        prop_assert_eq!(stored.len(), layout.len());
        for ((a, roles), m) in stored.iter().zip(&layout).zip(manifest["bom"]["assemblies"].as_array().unwrap()) {
            prop_assert_eq!(&a["name"], &m["name"]);
            prop_assert_eq!(&a["description"], &m["description"]);
            for (role, names) in roles {
                let got: Vec<&str> = a[role].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
                prop_assert_eq!(&got, names);
                for c in a[role].as_array().unwrap() {
                    let src = &declared[c["name"].as_str().unwrap()];
                    prop_assert_eq!(c["description"].as_str(), src.description.as_deref());
                    let meta: BTreeMap<String, String> = serde_json::from_value(c["metadata"].clone()).unwrap();
                    prop_assert_eq!(&meta, &src.metadata);
                }
            }
        }
    }
}

//! Plain-text tables for terminal use.

use std::io::{self, Write};

use serde_json::Value;

use crate::{BolCommand, BomCommand, Command, LedgerCommand};

pub(crate) fn human(cmd: &Command, body: &[u8], out: &mut dyn Write) -> io::Result<()> {
    if let Command::Ledger(LedgerCommand::Export { file }) = cmd {
        let lines = body.iter().filter(|b| **b == b'\n').count();
        return writeln!(out, "wrote {lines} ledger entries to {}", file.display());
    }
    let v: Value = serde_json::from_slice(body).map_err(io::Error::other)?;
    match cmd {
        Command::Bom(BomCommand::Define { .. }) => writeln!(out, "{}", s(&v["id"])),
        Command::Bom(BomCommand::Show { .. }) => bom(&v, out),
        Command::Bol(BolCommand::New { .. }) => writeln!(out, "{}", s(&v["id"])),
        Command::Bol(BolCommand::Record { component, .. }) => {
            writeln!(out, "recorded on {component} at {}", v["recordedAt"])
        }
        Command::Bol(BolCommand::Seal { .. }) => anchor(&v, out),
        Command::Bol(BolCommand::Report { .. }) => report(&v, out),
        Command::Trace(_) | Command::Track(_) => lineage(&v, out),
        Command::Uses { .. } => uses(&v, out),
        Command::Ledger(LedgerCommand::Verify) => match v["ok"].as_bool() {
            Some(true) => writeln!(out, "ledger ok, {} entries", v["entries"]),
            _ => writeln!(out, "ledger BROKEN at index {} of {}", v["firstBadIndex"], v["entries"]),
        },
        Command::Ledger(LedgerCommand::Export { .. }) => unreachable!(),
    }
}

fn s(v: &Value) -> &str {
    v.as_str().unwrap_or("-")
}

fn table(rows: &[Vec<String>], indent: usize, out: &mut dyn Write) -> io::Result<()> {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|x| x.chars().count()).max().unwrap_or(0)).collect();
    for row in rows {
        let mut line = " ".repeat(indent);
        for (i, cell) in row.iter().enumerate() {
            if i + 1 == row.len() {
                line.push_str(cell);
            } else {
                line.push_str(&format!("{cell:<w$}  ", w = widths[i]));
            }
        }
        writeln!(out, "{}", line.trim_end())?;
    }
    Ok(())
}

fn bom(v: &Value, out: &mut dyn Write) -> io::Result<()> {
    let state = if v["frozen"] == Value::Bool(true) { "frozen" } else { "open" };
    writeln!(out, "{}  {}  revision {}  {state}", s(&v["name"]), s(&v["id"]), v["revision"])?;
    if let Some(d) = v["description"].as_str() {
        writeln!(out, "  {d}")?;
    }
    for a in v["assemblies"].as_array().into_iter().flatten() {
        writeln!(out)?;
        writeln!(out, "  {}  {}", s(&a["name"]), s(&a["id"]))?;
        let mut rows = Vec::new();
        for role in ["inputData", "inputArtifacts", "outputData", "outputArtifacts"] {
            for c in a[role].as_array().into_iter().flatten() {
                let meta: Vec<String> = c["metadata"]
                    .as_object()
                    .into_iter()
                    .flatten()
                    .map(|(k, m)| format!("{k}={}", m.as_str().unwrap_or_default()))
                    .collect();
                rows.push(vec![role.to_owned(), s(&c["name"]).to_owned(), s(&c["id"]).to_owned(), meta.join(" ")]);
            }
        }
        table(&rows, 4, out)?;
    }
    Ok(())
}

fn anchor(v: &Value, out: &mut dyn Write) -> io::Result<()> {
    table(
        &[
            vec!["bol".into(), s(&v["bolId"]).into()],
            vec!["merkle root".into(), s(&v["merkleRoot"]).into()],
            vec!["leaves".into(), v["leafCount"].to_string()],
            vec!["ledger index".into(), v["ledgerIndex"].to_string()],
        ],
        0,
        out,
    )
}

fn report(v: &Value, out: &mut dyn Write) -> io::Result<()> {
    let snap = &v["bomSnapshot"];
    writeln!(out, "{}  {}", s(&v["bolId"]), s(&v["status"]))?;
    writeln!(out, "bom    {}  {}", s(&snap["name"]), s(&snap["id"]))?;
    if let Some(l) = v["runLabel"].as_str() {
        writeln!(out, "label  {l}")?;
    }
    if v["anchor"].is_object() {
        writeln!(out, "root   {}  (ledger index {})", s(&v["anchor"]["merkleRoot"]), v["anchor"]["ledgerIndex"])?;
    }
    let mut names = std::collections::BTreeMap::new();
    for a in snap["assemblies"].as_array().into_iter().flatten() {
        for role in ["inputData", "inputArtifacts", "outputData", "outputArtifacts"] {
            for c in a[role].as_array().into_iter().flatten() {
                names.insert(s(&c["id"]).to_owned(), s(&c["name"]).to_owned());
            }
        }
    }
    writeln!(out)?;
    let mut rows = vec![vec!["component".into(), "id".into(), "observations".into(), "latest".into()]];
    for (id, obs) in v["dynamic"].as_object().into_iter().flatten() {
        let list = obs.as_array().map(Vec::as_slice).unwrap_or_default();
        let latest = list.last().map_or("-", |o| s(&o["payload"]));
        let name = names.get(id).map_or("?", String::as_str);
        rows.push(vec![name.into(), id.clone(), list.len().to_string(), latest.into()]);
    }
    table(&rows, 0, out)
}

fn lineage(v: &Value, out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "origin {}", s(&v["origin"]))?;
    let nodes: Vec<Vec<String>> = v["nodes"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|n| {
            let id = s(n);
            let kind = if id.starts_with("as_") {
                "assembly"
            } else if id.starts_with("bom_") {
                "bom"
            } else {
                "component"
            };
            vec![kind.to_owned(), id.to_owned()]
        })
        .collect();
    writeln!(out, "nodes ({})", nodes.len())?;
    table(&nodes, 2, out)?;
    let edges: Vec<Vec<String>> = v["edges"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|e| vec![s(&e[0]).to_owned(), "->".into(), s(&e[1]).to_owned()])
        .collect();
    writeln!(out, "edges ({})", edges.len())?;
    table(&edges, 2, out)
}

fn uses(v: &Value, out: &mut dyn Write) -> io::Result<()> {
    let mut rows = vec![vec!["bom".into(), "assembly".into(), "role".into()]];
    for u in v["static"].as_array().into_iter().flatten() {
        rows.push(vec![s(&u["bomId"]).into(), s(&u["assemblyId"]).into(), s(&u["role"]).into()]);
    }
    table(&rows, 0, out)?;
    let bols: Vec<&str> = v["dynamic"].as_array().into_iter().flatten().map(s).collect();
    writeln!(out)?;
    writeln!(out, "bols ({})", bols.len())?;
    for b in bols {
        writeln!(out, "  {b}")?;
    }
    Ok(())
}

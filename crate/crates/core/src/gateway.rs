//! The traceability gateway: every operation on BoMs, BoLs, lineage and the
//! ledger, over one [`Store`].
//!
//! Mutations run against a staged overlay of the store. Only when the whole
//! operation has succeeded are its record writes and ledger entries
//! committed, as a single journal batch. A failed operation leaves no trace.
//!
//! Writes take `&mut self`, so a shared gateway needs an outer lock; that
//! lock is the single-writer. Reads take `&self`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::canonical;
use crate::digest::Digest;
use crate::error::{Error, Result};
use crate::graph::{DepGraph, Direction, NodeId};
use crate::id::{id_bits, AssemblyId, BolId, BomId, ComponentId, IdGen};
use crate::ledger::{self, ChainReport, EntryType, LedgerEntry};
use crate::manifest::{AssemblyEntry, AssemblySpec, BomManifest, ComponentEntry, ComponentSpec};
use crate::merkle::InclusionProof;
use crate::model::{
    nfc, AccessMetadata, Assembly, Bom, ComponentKind, ComponentRecord, Millis, Role, ValidationReport,
};
use crate::runtime::{distinct_components, Anchor, Bol, BolStatus, Observation};
use crate::store::{IndexTerms, Indexer, Journal, Put, RecordKind, ScanFilter, Store, StoredRecord};
use crate::trace::{LineageGraph, LineageReport, ObservationView, Scope, StaticUse, Uses};
use crate::validate::{self, BomShape, Catalog};
use crate::view::{AssemblyView, BomView};

/// Input for a new assembly.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NewAssembly {
    pub name: String,
    pub description: Option<String>,
    pub input_data: Vec<ComponentId>,
    pub input_artifacts: Vec<ComponentId>,
    pub output_data: Vec<ComponentId>,
    pub output_artifacts: Vec<ComponentId>,
}

/// Changes to an unfrozen BoM. `None` fields are left as they are.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BomPatch {
    pub name: Option<String>,
    pub description: Option<String>,
    pub assemblies: Option<Vec<AssemblyId>>,
    pub expected_revision: Option<u64>,
}

/// Model-aware index terms: record names, and the ids each record refers to.
struct RecordIndexer;

impl Indexer for RecordIndexer {
    fn terms(&self, kind: RecordKind, bytes: &[u8]) -> IndexTerms {
        fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Option<T> {
            serde_json::from_slice(bytes).ok()
        }
        let mut terms = IndexTerms::default();
        match kind {
            RecordKind::Component => {
                if let Some(c) = parse::<ComponentRecord>(bytes) {
                    terms.name = Some(c.name);
                }
            }
            RecordKind::Assembly => {
                if let Some(a) = parse::<Assembly>(bytes) {
                    terms.references = a.inputs().chain(a.outputs()).map(|c| c.to_string()).collect();
                    terms.name = Some(a.name);
                }
            }
            RecordKind::Bom => {
                if let Some(b) = parse::<Bom>(bytes) {
                    terms.references = b.assemblies.iter().map(|a| a.to_string()).collect();
                    terms.name = Some(b.name);
                }
            }
            RecordKind::Bol => {
                if let Some(b) = parse::<Bol>(bytes) {
                    terms.references = b.shadow_items.keys().map(|c| c.to_string()).collect();
                    terms.references.insert(b.bom_id.to_string());
                    terms.name = b.run_label;
                }
            }
            RecordKind::LedgerEntry => {}
        }
        terms
    }
}

fn check_name(raw: &str, what: &'static str) -> Result<String> {
    let name = nfc(raw);
    if name.trim().is_empty() {
        return Err(Error::EmptyName(what));
    }
    Ok(name)
}

fn encode<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    canonical::to_vec(value).map_err(|e| Error::Storage(format!("cannot encode record: {e}")))
}

fn decode<T: DeserializeOwned>(key: &str, bytes: &[u8]) -> Result<T> {
    serde_json::from_slice(bytes).map_err(|e| Error::Storage(format!("record {key} is unreadable: {e}")))
}

/// Staged writes over a borrowed store.
struct Txn<'a> {
    store: &'a Store,
    ids: IdGen,
    head: Option<(u64, Digest)>,
    overlay: BTreeMap<String, Vec<u8>>,
    expected: BTreeMap<String, u64>,
    order: Vec<String>,
    structure_changed: bool,
}

struct Staged {
    ids: IdGen,
    head: Option<(u64, Digest)>,
    puts: Vec<Put>,
    structure_changed: bool,
}

impl<'a> Txn<'a> {
    fn new(store: &'a Store, ids: IdGen, head: Option<(u64, Digest)>) -> Self {
        Self {
            store,
            ids,
            head,
            overlay: BTreeMap::new(),
            expected: BTreeMap::new(),
            order: Vec::new(),
            structure_changed: false,
        }
    }

    fn finish(mut self) -> Staged {
        let puts = self
            .order
            .iter()
            .map(|key| Put {
                key: key.clone(),
                bytes: self.overlay.remove(key).expect("staged key has bytes"),
                expected_revision: self.expected.get(key).copied(),
            })
            .collect();
        Staged { ids: self.ids, head: self.head, puts, structure_changed: self.structure_changed }
    }

    fn raw(&self, key: &str) -> Option<&[u8]> {
        self.overlay.get(key).map(Vec::as_slice).or_else(|| self.store.get(key).ok().map(|r| r.bytes.as_slice()))
    }

    fn load<T: DeserializeOwned>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key).map(|bytes| decode(key, bytes)).transpose()
    }

    fn stage<T: Serialize>(&mut self, key: &str, value: &T) -> Result<()> {
        let bytes = encode(value)?;
        if self.overlay.insert(key.to_owned(), bytes).is_none() {
            self.order.push(key.to_owned());
        }
        Ok(())
    }

    fn stage_expecting<T: Serialize>(&mut self, key: &str, value: &T, revision: u64) -> Result<()> {
        self.expected.entry(key.to_owned()).or_insert(revision);
        self.stage(key, value)
    }

    fn append_ledger(&mut self, entry_type: EntryType, payload: serde_json::Value) -> Result<u64> {
        let entry = LedgerEntry::after(self.head, entry_type, encode(&payload)?);
        let line = entry.to_line().map_err(|e| Error::Storage(e.to_string()))?;
        let key = LedgerEntry::key(entry.index);
        self.overlay.insert(key.clone(), line);
        self.order.push(key);
        self.head = Some((entry.index, entry.entry_hash));
        Ok(entry.index)
    }

    fn next_ledger_index(&self) -> u64 {
        self.head.map_or(0, |(i, _)| i + 1)
    }

    fn bom(&self, id: &str) -> Result<Bom> {
        let parsed: BomId = id.parse().map_err(|_| Error::UnknownBom(id.to_owned()))?;
        self.load(parsed.as_str())?.ok_or_else(|| Error::UnknownBom(id.to_owned()))
    }

    fn bol(&self, id: &str) -> Result<Bol> {
        let parsed: BolId = id.parse().map_err(|_| Error::UnknownBol(id.to_owned()))?;
        self.load(parsed.as_str())?.ok_or_else(|| Error::UnknownBol(id.to_owned()))
    }

    /// Every BoM visible to this transaction, staged versions winning.
    fn all_boms(&self) -> Result<Vec<Bom>> {
        let mut keys: BTreeSet<String> =
            self.store.scan(RecordKind::Bom, &ScanFilter::All).into_iter().map(|r| r.key.clone()).collect();
        keys.extend(self.overlay.keys().filter(|k| RecordKind::of_key(k) == Some(RecordKind::Bom)).cloned());
        keys.iter().map(|k| self.load(k).map(|b| b.expect("listed key exists"))).collect()
    }

    fn validate_shape(&self, focus: &BomShape) -> Result<ValidationReport> {
        let others: Vec<BomShape> = self
            .all_boms()?
            .into_iter()
            .filter(|b| b.id != focus.id)
            .map(|b| BomShape { id: b.id, assemblies: b.assemblies })
            .collect();
        Ok(validate::validate(focus, &others, self))
    }

    fn create_component(
        &mut self,
        kind: ComponentKind,
        name: &str,
        description: Option<&str>,
        metadata: &[(String, String)],
    ) -> Result<ComponentRecord> {
        let name = check_name(name, "component")?;
        let metadata =
            AccessMetadata::from_pairs(metadata.iter().map(|(k, v)| (k, v))).map_err(Error::DuplicateMetadataKey)?;
        let record = ComponentRecord {
            id: ComponentId::from_bits(kind, self.ids.next_bits()),
            kind,
            name,
            description: description.map(nfc),
            metadata,
        };
        self.stage(record.id.as_str(), &record)?;
        Ok(record)
    }

    fn create_assembly(&mut self, input: &NewAssembly) -> Result<Assembly> {
        let name = check_name(&input.name, "assembly")?;
        let lists = [
            (&input.input_data, ComponentKind::DataSource),
            (&input.input_artifacts, ComponentKind::Artifact),
            (&input.output_data, ComponentKind::DataSource),
            (&input.output_artifacts, ComponentKind::Artifact),
        ];
        for (list, kind) in lists {
            for c in list {
                let record: ComponentRecord =
                    self.load(c.as_str())?.ok_or_else(|| Error::DanglingRef(c.to_string()))?;
                if record.kind != kind || c.kind() != kind {
                    return Err(Error::KindMismatch { id: c.to_string(), expected: kind });
                }
            }
        }
        let mut inputs = BTreeSet::new();
        for c in input.input_data.iter().chain(&input.input_artifacts) {
            if !inputs.insert(c) {
                return Err(Error::DuplicateRef(c.clone()));
            }
        }
        let mut outputs = BTreeSet::new();
        for c in input.output_data.iter().chain(&input.output_artifacts) {
            if !outputs.insert(c) {
                return Err(Error::DuplicateRef(c.clone()));
            }
        }
        if let Some(c) = inputs.intersection(&outputs).next() {
            return Err(Error::InputOutputOverlap((*c).clone()));
        }
        let assembly = Assembly {
            id: AssemblyId::from_bits(self.ids.next_bits()),
            name,
            description: input.description.as_deref().map(nfc),
            input_data: input.input_data.clone(),
            input_artifacts: input.input_artifacts.clone(),
            output_data: input.output_data.clone(),
            output_artifacts: input.output_artifacts.clone(),
        };
        self.stage(assembly.id.as_str(), &assembly)?;
        Ok(assembly)
    }

    fn create_bom(
        &mut self,
        name: &str,
        description: Option<&str>,
        assemblies: Vec<AssemblyId>,
        now: Millis,
    ) -> Result<Bom> {
        let name = check_name(name, "BoM")?;
        for a in &assemblies {
            if self.raw(a.as_str()).is_none() {
                return Err(Error::DanglingRef(a.to_string()));
            }
        }
        let bom = Bom {
            id: BomId::from_bits(self.ids.next_bits()),
            name,
            description: description.map(nfc),
            assemblies,
            frozen: false,
            created_at: now,
        };
        let report = self.validate_shape(&BomShape { id: bom.id.clone(), assemblies: bom.assemblies.clone() })?;
        if !report.ok {
            return Err(Error::ValidationFailed(report));
        }
        self.stage(bom.id.as_str(), &bom)?;
        self.structure_changed = true;
        Ok(bom)
    }

    fn define_bom(&mut self, manifest: &BomManifest, now: Millis) -> Result<Bom> {
        check_name(&manifest.name, "BoM")?;
        let mut declared: BTreeMap<String, (ComponentId, ComponentSpec)> = BTreeMap::new();
        let mut assembly_names = BTreeSet::new();
        let mut assembly_ids = Vec::with_capacity(manifest.assemblies.len());
        for entry in &manifest.assemblies {
            match entry {
                AssemblyEntry::Existing(id) => assembly_ids.push(id.clone()),
                AssemblyEntry::Inline(spec) => {
                    if !assembly_names.insert(nfc(&spec.name)) {
                        return Err(Error::ManifestInvalid(format!("assembly {:?} is declared twice", spec.name)));
                    }
                    let input = self.resolve_manifest_assembly(spec, &mut declared)?;
                    assembly_ids.push(self.create_assembly(&input)?.id);
                }
            }
        }
        self.create_bom(&manifest.name, manifest.description.as_deref(), assembly_ids, now)
    }

    fn resolve_manifest_assembly(
        &mut self,
        spec: &AssemblySpec,
        declared: &mut BTreeMap<String, (ComponentId, ComponentSpec)>,
    ) -> Result<NewAssembly> {
        let mut resolve = |entries: &[ComponentEntry], kind: ComponentKind| -> Result<Vec<ComponentId>> {
            entries
                .iter()
                .map(|entry| match entry {
                    ComponentEntry::Existing(id) => Ok(id.clone()),
                    ComponentEntry::Declared(c) => {
                        let key = nfc(&c.name);
                        if let Some((id, first)) = declared.get(&key) {
                            if id.kind() != kind {
                                return Err(Error::KindMismatch { id: c.name.clone(), expected: kind });
                            }
                            if !c.is_bare() && c != first {
                                return Err(Error::ManifestInvalid(format!(
                                    "component {:?} is declared twice with different fields",
                                    c.name
                                )));
                            }
                            return Ok(id.clone());
                        }
                        let record = self.create_component(kind, &c.name, c.description.as_deref(), &c.metadata)?;
                        declared.insert(key, (record.id.clone(), c.clone()));
                        Ok(record.id)
                    }
                })
                .collect()
        };
        Ok(NewAssembly {
            name: spec.name.clone(),
            description: spec.description.clone(),
            input_data: resolve(&spec.input_data, ComponentKind::DataSource)?,
            input_artifacts: resolve(&spec.input_artifacts, ComponentKind::Artifact)?,
            output_data: resolve(&spec.output_data, ComponentKind::DataSource)?,
            output_artifacts: resolve(&spec.output_artifacts, ComponentKind::Artifact)?,
        })
    }

    fn update_bom(&mut self, id: &str, patch: &BomPatch) -> Result<Bom> {
        let mut bom = self.bom(id)?;
        if bom.frozen {
            return Err(Error::BomFrozen(bom.id));
        }
        let current = self.store.revision(bom.id.as_str());
        if let Some(expected) = patch.expected_revision {
            if expected != current {
                return Err(Error::RevisionConflict { key: bom.id.to_string(), expected, actual: current });
            }
        }
        if let Some(name) = &patch.name {
            bom.name = check_name(name, "BoM")?;
        }
        if let Some(description) = &patch.description {
            bom.description = Some(nfc(description));
        }
        if let Some(assemblies) = &patch.assemblies {
            for a in assemblies {
                if self.raw(a.as_str()).is_none() {
                    return Err(Error::DanglingRef(a.to_string()));
                }
            }
            let report = self.validate_shape(&BomShape { id: bom.id.clone(), assemblies: assemblies.clone() })?;
            if !report.ok {
                return Err(Error::ValidationFailed(report));
            }
            bom.assemblies = assemblies.clone();
            self.structure_changed = true;
        }
        let key = bom.id.to_string();
        self.stage_expecting(&key, &bom, current)?;
        Ok(bom)
    }

    fn instantiate_bol(&mut self, bom_id: &str, run_label: Option<&str>, now: Millis) -> Result<Bol> {
        let mut bom = self.bom(bom_id)?;
        let report = self.validate_shape(&BomShape { id: bom.id.clone(), assemblies: bom.assemblies.clone() })?;
        if !report.ok {
            return Err(Error::ValidationFailed(report));
        }
        let assemblies: Vec<Assembly> = bom
            .assemblies
            .iter()
            .map(|a| self.load(a.as_str())?.ok_or_else(|| Error::DanglingRef(a.to_string())))
            .collect::<Result<_>>()?;
        let bol = Bol::new(
            BolId::from_bits(self.ids.next_bits()),
            bom.id.clone(),
            run_label.map(nfc),
            now,
            distinct_components(&assemblies),
        );
        self.stage(bol.id.as_str(), &bol)?;
        if !bom.frozen {
            bom.frozen = true;
            let key = bom.id.to_string();
            let revision = self.store.revision(&key);
            self.stage_expecting(&key, &bom, revision)?;
        }
        let mut payload = json!({
            "bolId": bol.id,
            "bomId": bol.bom_id,
            "createdAt": bol.created_at,
            "shadowItems": bol.shadow_items.len(),
        });
        if let Some(label) = &bol.run_label {
            payload["runLabel"] = json!(label);
        }
        self.append_ledger(EntryType::BolCreated, payload)?;
        Ok(bol)
    }

    fn record_observation(
        &mut self,
        bol_id: &str,
        component: &str,
        payload: &str,
        note: Option<&str>,
        now: Millis,
    ) -> Result<Observation> {
        let mut bol = self.bol(bol_id)?;
        if bol.is_sealed() {
            return Err(Error::BolSealed(bol.id));
        }
        let not_in_bom = || Error::ComponentNotInBom { component: component.to_owned(), bol: bol.id.clone() };
        let cid: ComponentId = component.parse().map_err(|_| not_in_bom())?;
        if !bol.shadow_items.contains_key(&cid) {
            return Err(not_in_bom());
        }
        let (obs, index) = bol.push_observation(&cid, nfc(payload), note.map(nfc), now);
        self.stage(bol.id.as_str(), &bol)?;
        self.append_ledger(
            EntryType::ObservationRecorded,
            json!({
                "bolId": bol.id,
                "componentId": cid,
                "index": index,
                "payloadDigest": Digest::sha256(obs.payload.as_bytes()),
                "recordedAt": obs.recorded_at,
            }),
        )?;
        Ok(obs)
    }

    fn seal_bol(&mut self, bol_id: &str, now: Millis) -> Result<Anchor> {
        let mut bol = self.bol(bol_id)?;
        if bol.is_sealed() {
            return Err(Error::AlreadySealed(bol.id));
        }
        let anchor = bol.compute_anchor(self.next_ledger_index());
        bol.status = BolStatus::Sealed;
        bol.anchor = Some(anchor.clone());
        self.stage(bol.id.as_str(), &bol)?;
        let index = self.append_ledger(
            EntryType::BolSealed,
            json!({
                "bolId": anchor.bol_id,
                "leafCount": anchor.leaf_count,
                "ledgerIndex": anchor.ledger_index,
                "merkleRoot": anchor.merkle_root,
                "sealedAt": now,
            }),
        )?;
        debug_assert_eq!(index, anchor.ledger_index);
        Ok(anchor)
    }
}

impl Catalog for Txn<'_> {
    fn assembly(&self, id: &AssemblyId) -> Option<Assembly> {
        self.load(id.as_str()).ok().flatten()
    }

    fn component_kind(&self, id: &ComponentId) -> Option<ComponentKind> {
        self.load::<ComponentRecord>(id.as_str()).ok().flatten().map(|c| c.kind)
    }
}

pub struct Gateway {
    store: Store,
    ids: IdGen,
    head: Option<(u64, Digest)>,
    graph: DepGraph,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("store", &self.store).field("ledger_head", &self.head.map(|(i, _)| i)).finish()
    }
}

impl Gateway {
    pub fn open(journal: Box<dyn Journal>, mut ids: IdGen) -> Result<Self> {
        let store = Store::open(journal, Box::new(RecordIndexer))?;
        for key in store.keys() {
            if RecordKind::of_key(key) != Some(RecordKind::LedgerEntry) {
                if let Some(bits) = id_bits(key) {
                    ids.observe(bits);
                }
            }
        }
        let head = match store.scan(RecordKind::LedgerEntry, &ScanFilter::All).last() {
            Some(r) => {
                let e: LedgerEntry = decode(&r.key, &r.bytes)?;
                Some((e.index, e.entry_hash))
            }
            None => None,
        };
        let mut gw = Self { store, ids, head, graph: DepGraph::new() };
        gw.rebuild_graph()?;
        Ok(gw)
    }

    pub fn in_memory(ids: IdGen) -> Self {
        Self::open(Box::new(crate::store::MemoryJournal), ids).expect("empty memory store opens")
    }

    pub fn open_dir(dir: impl AsRef<Path>, ids: IdGen) -> Result<Self> {
        Self::open(Box::new(crate::store::FileJournal::open(dir)?), ids)
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    /// Index of the newest ledger entry.
    pub fn ledger_head(&self) -> Option<u64> {
        self.head.map(|(i, _)| i)
    }

    fn reader(&self) -> Txn<'_> {
        Txn::new(&self.store, self.ids.clone(), self.head)
    }

    fn write<T>(&mut self, op: impl FnOnce(&mut Txn<'_>) -> Result<T>) -> Result<T> {
        let mut tx = Txn::new(&self.store, self.ids.clone(), self.head);
        let out = op(&mut tx)?;
        let staged = tx.finish();
        self.store.commit(staged.puts)?;
        self.ids = staged.ids;
        self.head = staged.head;
        if staged.structure_changed {
            self.rebuild_graph()?;
        }
        Ok(out)
    }

    fn rebuild_graph(&mut self) -> Result<()> {
        let mut graph = DepGraph::new();
        for rec in self.store.scan(RecordKind::Bom, &ScanFilter::All) {
            let bom: Bom = decode(&rec.key, &rec.bytes)?;
            for a in &bom.assemblies {
                let rec = self.store.get(a.as_str())?;
                graph.add_assembly(&decode(&rec.key, &rec.bytes)?);
            }
        }
        self.graph = graph;
        Ok(())
    }

    // --- static model -----------------------------------------------------

    pub fn create_component(
        &mut self,
        kind: ComponentKind,
        name: &str,
        description: Option<&str>,
        metadata: &[(String, String)],
    ) -> Result<ComponentRecord> {
        self.write(|tx| tx.create_component(kind, name, description, metadata))
    }

    pub fn create_assembly(&mut self, input: &NewAssembly) -> Result<Assembly> {
        self.write(|tx| tx.create_assembly(input))
    }

    pub fn create_bom(
        &mut self,
        name: &str,
        description: Option<&str>,
        assemblies: Vec<AssemblyId>,
        now: Millis,
    ) -> Result<Bom> {
        self.write(|tx| tx.create_bom(name, description, assemblies, now))
    }

    /// Creates everything a manifest declares and the BoM itself, atomically.
    pub fn define_bom(&mut self, manifest: &BomManifest, now: Millis) -> Result<Bom> {
        self.write(|tx| tx.define_bom(manifest, now))
    }

    pub fn update_bom(&mut self, id: &str, patch: &BomPatch) -> Result<Bom> {
        self.write(|tx| tx.update_bom(id, patch))
    }

    pub fn component(&self, id: &str) -> Result<ComponentRecord> {
        let parsed: ComponentId = id.parse().map_err(|_| Error::UnknownId(id.to_owned()))?;
        self.reader().load(parsed.as_str())?.ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn assembly(&self, id: &str) -> Result<Assembly> {
        let parsed: AssemblyId = id.parse().map_err(|_| Error::UnknownId(id.to_owned()))?;
        self.reader().load(parsed.as_str())?.ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn bom(&self, id: &str) -> Result<Bom> {
        self.reader().bom(id)
    }

    pub fn bom_view(&self, id: &str) -> Result<BomView> {
        let bom = self.bom(id)?;
        let expand = |list: &[ComponentId]| -> Result<Vec<ComponentRecord>> {
            list.iter().map(|c| self.component(c.as_str())).collect()
        };
        let assemblies = bom
            .assemblies
            .iter()
            .map(|a| {
                let a = self.assembly(a.as_str())?;
                Ok(AssemblyView {
                    input_data: expand(&a.input_data)?,
                    input_artifacts: expand(&a.input_artifacts)?,
                    output_data: expand(&a.output_data)?,
                    output_artifacts: expand(&a.output_artifacts)?,
                    id: a.id,
                    name: a.name,
                    description: a.description,
                })
            })
            .collect::<Result<_>>()?;
        Ok(BomView {
            revision: self.store.revision(bom.id.as_str()),
            id: bom.id,
            name: bom.name,
            description: bom.description,
            frozen: bom.frozen,
            created_at: bom.created_at,
            assemblies,
        })
    }

    pub fn validate_bom(&self, id: &str) -> Result<ValidationReport> {
        let tx = self.reader();
        let bom = tx.bom(id)?;
        tx.validate_shape(&BomShape { id: bom.id, assemblies: bom.assemblies })
    }

    /// Validates a BoM that has not been stored, against everything that has.
    pub fn validate_candidate(&self, assemblies: &[AssemblyId]) -> Result<ValidationReport> {
        let tx = self.reader();
        let mut placeholder = BomId::from_bits(0);
        while tx.raw(placeholder.as_str()).is_some() {
            placeholder = BomId::from_bits(id_bits(placeholder.as_str()).unwrap_or(0).wrapping_add(1));
        }
        tx.validate_shape(&BomShape { id: placeholder, assemblies: assemblies.to_vec() })
    }

    // --- runs -------------------------------------------------------------

    pub fn instantiate_bol(&mut self, bom_id: &str, run_label: Option<&str>, now: Millis) -> Result<Bol> {
        self.write(|tx| tx.instantiate_bol(bom_id, run_label, now))
    }

    pub fn record_observation(
        &mut self,
        bol_id: &str,
        component: &str,
        payload: &str,
        note: Option<&str>,
        now: Millis,
    ) -> Result<Observation> {
        self.write(|tx| tx.record_observation(bol_id, component, payload, note, now))
    }

    pub fn seal_bol(&mut self, bol_id: &str, now: Millis) -> Result<Anchor> {
        self.write(|tx| tx.seal_bol(bol_id, now))
    }

    pub fn bol(&self, id: &str) -> Result<Bol> {
        self.reader().bol(id)
    }

    /// Static access metadata of a component, as seen from a run.
    pub fn resolve_access(&self, bol_id: &str, component: &str) -> Result<AccessMetadata> {
        let bol = self.bol(bol_id)?;
        let not_in_bom = || Error::ComponentNotInBom { component: component.to_owned(), bol: bol.id.clone() };
        let cid: ComponentId = component.parse().map_err(|_| not_in_bom())?;
        if !bol.shadow_items.contains_key(&cid) {
            return Err(not_in_bom());
        }
        Ok(self.component(cid.as_str())?.metadata)
    }

    /// Leaf bytes, proof and anchor for one leaf of a sealed BoL.
    pub fn inclusion_proof(&self, bol_id: &str, leaf_index: u64) -> Result<(Vec<u8>, InclusionProof, Anchor)> {
        let bol = self.bol(bol_id)?;
        let Some(anchor) = bol.anchor.clone().filter(|_| bol.is_sealed()) else {
            return Err(Error::BolNotSealed(bol.id));
        };
        let out_of_range =
            || Error::LeafOutOfRange { bol: bol.id.clone(), index: leaf_index, leaf_count: anchor.leaf_count };
        let idx = usize::try_from(leaf_index).map_err(|_| out_of_range())?;
        let (leaf, proof) = bol.inclusion_proof(idx).ok_or_else(out_of_range)?;
        Ok((leaf, proof, anchor))
    }

    // --- lineage ----------------------------------------------------------

    fn bom_graph(&self, bom: &Bom) -> Result<DepGraph> {
        let mut g = DepGraph::new();
        for a in &bom.assemblies {
            g.add_assembly(&self.assembly(a.as_str())?);
        }
        Ok(g)
    }

    fn lineage(&self, id: &str, scope: &Scope, dir: Direction) -> Result<LineageGraph> {
        let unknown = || Error::UnknownId(id.to_owned());
        let node: NodeId = id.parse().map_err(|_| unknown())?;
        match &node {
            NodeId::Component(_) | NodeId::Assembly(_) if self.store.contains(node.as_str()) => {}
            _ => return Err(unknown()),
        }
        match scope {
            Scope::Global => Ok(LineageGraph::closure(&self.graph, node, dir)),
            Scope::Bom(bom_id) => {
                let bom = self.bom(bom_id.as_str())?;
                let g = self.bom_graph(&bom)?;
                if !g.contains(&node) {
                    return Err(Error::NotInScope { id: id.to_owned(), scope: bom.id });
                }
                Ok(LineageGraph::closure(&g, node, dir))
            }
        }
    }

    /// Where-from: the node and everything upstream of it.
    pub fn trace(&self, id: &str, scope: &Scope) -> Result<LineageGraph> {
        self.lineage(id, scope, Direction::Upstream)
    }

    /// Where-used: the node and everything downstream of it.
    pub fn track(&self, id: &str, scope: &Scope) -> Result<LineageGraph> {
        self.lineage(id, scope, Direction::Downstream)
    }

    /// Every BoM membership of a component, and every run whose BoM holds it.
    pub fn find_uses(&self, component: &str) -> Result<Uses> {
        let record = self.component(component)?;
        let cid = record.id.to_string();
        let mut static_uses = Vec::new();
        for rec in self.store.scan(RecordKind::Assembly, &ScanFilter::References(cid.clone())) {
            let assembly: Assembly = decode(&rec.key, &rec.bytes)?;
            let role = if assembly.outputs().any(|c| c == &record.id) { Role::Output } else { Role::Input };
            for bom in self.store.scan(RecordKind::Bom, &ScanFilter::References(rec.key.clone())) {
                static_uses.push(StaticUse {
                    bom_id: bom.key.parse().map_err(|_| corrupt(bom))?,
                    assembly_id: assembly.id.clone(),
                    role,
                });
            }
        }
        static_uses.sort();
        let dynamic = self
            .store
            .scan(RecordKind::Bol, &ScanFilter::References(cid))
            .into_iter()
            .map(|r| r.key.parse().map_err(|_| corrupt(r)))
            .collect::<Result<_>>()?;
        Ok(Uses { static_uses, dynamic })
    }

    pub fn lineage_report(&self, bol_id: &str) -> Result<LineageReport> {
        let bol = self.bol(bol_id)?;
        let bom = self.bom(bol.bom_id.as_str())?;
        let g = self.bom_graph(&bom)?;
        let origin = NodeId::Bom(bom.id.clone());
        let mut nodes: BTreeSet<NodeId> = g.nodes().cloned().collect();
        nodes.insert(origin.clone());
        let edges = g.edges().map(|(a, b)| (a.clone(), b.clone())).collect();
        let dynamic = bol
            .shadow_items
            .iter()
            .map(|(c, item)| (c.clone(), item.observations.iter().map(ObservationView::from).collect()))
            .collect();
        Ok(LineageReport {
            bom_snapshot: self.bom_view(bom.id.as_str())?,
            static_graph: LineageGraph { origin, nodes, edges },
            bol_id: bol.id,
            status: bol.status,
            run_label: bol.run_label,
            dynamic,
            anchor: bol.anchor,
        })
    }

    // --- ledger -----------------------------------------------------------

    pub fn ledger_entries(&self) -> Result<Vec<LedgerEntry>> {
        self.store
            .scan(RecordKind::LedgerEntry, &ScanFilter::All)
            .into_iter()
            .map(|r| decode(&r.key, &r.bytes))
            .collect()
    }

    pub fn verify_chain(&self) -> Result<ChainReport> {
        Ok(ledger::verify_chain(&self.ledger_entries()?))
    }

    /// Writes the newline-delimited ledger export.
    pub fn export_ledger<W: Write>(&self, out: W) -> Result<()> {
        ledger::write_export(&self.ledger_entries()?, out).map_err(|e| Error::Storage(e.to_string()))
    }
}

fn corrupt(rec: &StoredRecord) -> Error {
    Error::Storage(format!("record key {} is not a valid id", rec.key))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ViolationCode;

    fn ds(gw: &mut Gateway, name: &str) -> ComponentId {
        gw.create_component(ComponentKind::DataSource, name, None, &[]).unwrap().id
    }

    fn af(gw: &mut Gateway, name: &str) -> ComponentId {
        gw.create_component(ComponentKind::Artifact, name, None, &[]).unwrap().id
    }

    fn assembly(gw: &mut Gateway, name: &str, inputs: Vec<ComponentId>, outputs: Vec<ComponentId>) -> AssemblyId {
        let split = |v: Vec<ComponentId>| -> (Vec<_>, Vec<_>) {
            v.into_iter().partition(|c| c.kind() == ComponentKind::DataSource)
        };
        let (input_data, input_artifacts) = split(inputs);
        let (output_data, output_artifacts) = split(outputs);
        gw.create_assembly(&NewAssembly {
            name: name.into(),
            description: None,
            input_data,
            input_artifacts,
            output_data,
            output_artifacts,
        })
        .unwrap()
        .id
    }

    #[test]
    fn create_component_returns_stored_record() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let rec = gw
            .create_component(
                ComponentKind::DataSource,
                "Traffic Scene",
                None,
                &[("dataAccess".into(), "https://xyz.com/00001.06514.jpg".into())],
            )
            .unwrap();
        assert!(rec.id.as_str().starts_with("ds_"));
        assert_eq!(gw.component(rec.id.as_str()).unwrap(), rec);
        assert_eq!(rec.metadata.get("dataAccess"), Some("https://xyz.com/00001.06514.jpg"));

        let model = gw.create_component(ComponentKind::Artifact, "Congestion Model", None, &[]).unwrap();
        assert_eq!(model.kind, ComponentKind::Artifact);
        assert!(model.metadata.is_empty() && model.id.as_str().starts_with("af_"));
    }

    #[test]
    fn create_component_errors() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        assert_eq!(
            gw.create_component(ComponentKind::DataSource, "", None, &[]).unwrap_err().code(),
            crate::ErrorCode::EmptyName
        );
        let dup = [("k".to_owned(), "1".to_owned()), ("k".to_owned(), "2".to_owned())];
        assert!(matches!(
            gw.create_component(ComponentKind::DataSource, "x", None, &dup),
            Err(Error::DuplicateMetadataKey(k)) if k == "k"
        ));
        assert!(gw.store().is_empty());
    }

    #[test]
    fn assembly_rejections() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let x = ds(&mut gw, "X");
        let m = af(&mut gw, "M");
        let overlap = NewAssembly {
            name: "a".into(),
            input_data: vec![x.clone()],
            output_data: vec![x.clone()],
            ..Default::default()
        };
        assert!(matches!(gw.create_assembly(&overlap), Err(Error::InputOutputOverlap(_))));
        let kind = NewAssembly { name: "a".into(), input_artifacts: vec![x.clone()], ..Default::default() };
        assert!(matches!(gw.create_assembly(&kind), Err(Error::KindMismatch { .. })));
        let kind2 = NewAssembly { name: "a".into(), input_data: vec![m.clone()], ..Default::default() };
        assert!(matches!(gw.create_assembly(&kind2), Err(Error::KindMismatch { .. })));
        let missing = NewAssembly {
            name: "a".into(),
            input_data: vec![ComponentId::from_bits(ComponentKind::DataSource, 999)],
            ..Default::default()
        };
        assert!(matches!(gw.create_assembly(&missing), Err(Error::DanglingRef(_))));
        let dup = NewAssembly { name: "a".into(), input_data: vec![x.clone(), x.clone()], ..Default::default() };
        assert!(matches!(gw.create_assembly(&dup), Err(Error::DuplicateRef(_))));
        assert!(matches!(gw.create_assembly(&NewAssembly::default()), Err(Error::EmptyName(_))));
    }

    #[test]
    fn multiple_producers_fail_bom_creation() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let (x, y) = (ds(&mut gw, "X"), ds(&mut gw, "Y"));
        let a = assembly(&mut gw, "A", vec![x], vec![y.clone()]);
        let b = assembly(&mut gw, "B", vec![], vec![y]);
        let Err(Error::ValidationFailed(report)) = gw.create_bom("bad", None, vec![a, b], 0) else { panic!() };
        assert!(report.has(ViolationCode::MultipleProducers));
        assert!(gw.store().scan(RecordKind::Bom, &ScanFilter::All).is_empty());
    }

    #[test]
    fn cross_bom_producer_conflict_and_shared_assemblies_rejected() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let (x, y) = (ds(&mut gw, "X"), ds(&mut gw, "Y"));
        let a = assembly(&mut gw, "A", vec![x], vec![y.clone()]);
        gw.create_bom("one", None, vec![a.clone()], 0).unwrap();
        let b = assembly(&mut gw, "B", vec![], vec![y]);
        assert!(
            matches!(gw.create_bom("two", None, vec![b], 0), Err(Error::ValidationFailed(r)) if r.has(ViolationCode::MultipleProducers))
        );
        assert!(
            matches!(gw.create_bom("three", None, vec![a], 0), Err(Error::ValidationFailed(r)) if r.has(ViolationCode::DuplicateMembership))
        );
    }

    #[test]
    fn empty_bom_and_unknown_assembly() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let bom = gw.create_bom("Empty", None, vec![], 5).unwrap();
        assert!(bom.assemblies.is_empty() && !bom.frozen);
        assert!(gw.validate_bom(bom.id.as_str()).unwrap().ok);
        assert!(matches!(gw.create_bom("x", None, vec![AssemblyId::from_bits(77)], 0), Err(Error::DanglingRef(_))));
        assert!(matches!(gw.validate_bom("bom_00000000000000000000000000000abc"), Err(Error::UnknownBom(_))));
    }

    #[test]
    fn instantiate_freezes_and_logs() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let (x, y) = (ds(&mut gw, "X"), ds(&mut gw, "Y"));
        let m = af(&mut gw, "M");
        let a = assembly(&mut gw, "A", vec![x, m], vec![y]);
        let bom = gw.create_bom("B", None, vec![a], 0).unwrap();
        let bol = gw.instantiate_bol(bom.id.as_str(), Some("run 1"), 10).unwrap();
        assert_eq!(bol.shadow_items.len(), 3);
        assert_eq!(bol.status, BolStatus::Open);
        assert!(gw.bom(bom.id.as_str()).unwrap().frozen);
        assert_eq!(gw.ledger_head(), Some(0));
        let entries = gw.ledger_entries().unwrap();
        assert_eq!(entries[0].entry_type, EntryType::BolCreated);
        let patch = BomPatch { name: Some("renamed".into()), ..Default::default() };
        assert!(matches!(gw.update_bom(bom.id.as_str(), &patch), Err(Error::BomFrozen(_))));
    }

    #[test]
    fn update_bom_checks_revision() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let bom = gw.create_bom("B", None, vec![], 0).unwrap();
        let patch = BomPatch { name: Some("C".into()), expected_revision: Some(1), ..Default::default() };
        assert_eq!(gw.update_bom(bom.id.as_str(), &patch).unwrap().name, "C");
        assert!(matches!(
            gw.update_bom(bom.id.as_str(), &patch),
            Err(Error::RevisionConflict { expected: 1, actual: 2, .. })
        ));
    }

    #[test]
    fn observations_and_sealing() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let (x, y) = (ds(&mut gw, "X"), ds(&mut gw, "Y"));
        let other = ds(&mut gw, "elsewhere");
        let a = assembly(&mut gw, "A", vec![x.clone()], vec![y.clone()]);
        let bom = gw.create_bom("B", None, vec![a], 0).unwrap();
        let bol = gw.instantiate_bol(bom.id.as_str(), None, 1).unwrap();
        let id = bol.id.as_str();
        gw.record_observation(id, y.as_str(), "congestion_score=7", None, 2).unwrap();
        gw.record_observation(id, y.as_str(), "again", Some("retry"), 3).unwrap();
        let stored = gw.bol(id).unwrap();
        let obs = &stored.shadow_items[&y].observations;
        assert_eq!(obs.iter().map(|o| o.payload.as_str()).collect::<Vec<_>>(), ["congestion_score=7", "again"]);
        assert!(matches!(
            gw.record_observation(id, other.as_str(), "p", None, 4),
            Err(Error::ComponentNotInBom { .. })
        ));
        assert!(matches!(gw.resolve_access(id, other.as_str()), Err(Error::ComponentNotInBom { .. })));
        assert!(gw.resolve_access(id, x.as_str()).unwrap().is_empty());

        assert!(matches!(gw.inclusion_proof(id, 0), Err(Error::BolNotSealed(_))));
        let anchor = gw.seal_bol(id, 5).unwrap();
        assert_eq!(anchor.leaf_count, 3);
        assert_eq!(anchor.ledger_index, gw.ledger_head().unwrap());
        assert!(matches!(gw.seal_bol(id, 6), Err(Error::AlreadySealed(_))));
        assert!(matches!(gw.record_observation(id, y.as_str(), "late", None, 7), Err(Error::BolSealed(_))));
        assert!(matches!(gw.inclusion_proof(id, 3), Err(Error::LeafOutOfRange { .. })));
        let (leaf, proof, anchor) = gw.inclusion_proof(id, 2).unwrap();
        assert!(crate::merkle::verify_inclusion(&leaf, &proof, &anchor.merkle_root).unwrap());
        assert!(gw.verify_chain().unwrap().ok);
    }

    #[test]
    fn failed_write_commits_nothing() {
        let mut gw = Gateway::in_memory(IdGen::sequential());
        let before = gw.store().len();
        let manifest = BomManifest::from_slice(
            br#"{"name":"m","assemblies":[
                {"name":"a","inputData":[{"name":"P"}],"outputData":[{"name":"Q"}]},
                {"name":"b","inputData":[{"name":"Q"}],"outputData":[{"name":"P"}]}]}"#,
        )
        .unwrap();
        assert!(matches!(gw.define_bom(&manifest, 0), Err(Error::ValidationFailed(r)) if r.has(ViolationCode::Cycle)));
        assert_eq!(gw.store().len(), before);
    }

    #[test]
    fn reopen_resumes_sequential_ids_and_ledger() {
        let dir = tempfile::tempdir().unwrap();
        let bol_id;
        {
            let mut gw = Gateway::open_dir(dir.path(), IdGen::sequential()).unwrap();
            let bom = gw.create_bom("B", None, vec![], 0).unwrap();
            bol_id = gw.instantiate_bol(bom.id.as_str(), None, 1).unwrap().id;
        }
        let mut gw = Gateway::open_dir(dir.path(), IdGen::sequential()).unwrap();
        assert_eq!(gw.ledger_head(), Some(0));
        let c = ds(&mut gw, "fresh");
        assert_eq!(id_bits(c.as_str()), Some(3));
        gw.seal_bol(bol_id.as_str(), 2).unwrap();
        assert!(gw.verify_chain().unwrap().ok);
        assert_eq!(gw.ledger_head(), Some(1));
    }
}

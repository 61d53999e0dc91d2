//! Bill-of-Materials / Bill-of-Lots traceability for data ecosystems.
//!
//! A data supply chain is described once as a BoM: assemblies that consume
//! data sources and artifacts and produce new ones. Every run instantiates the
//! BoM into a BoL whose shadow items record what actually flowed through that
//! run. Lineage queries walk the combined component/assembly graph backwards
//! (trace, where-from) or forwards (track, where-used). Runs are written to a
//! hash-chained ledger and sealed BoLs are committed to a Merkle root.
//!
//! [`Gateway`] is the entry point; it owns a [`Store`] and exposes every
//! operation.

pub mod canonical;
pub mod digest;
pub mod error;
pub mod fixtures;
pub mod gateway;
pub mod graph;
pub mod id;
pub mod ledger;
pub mod manifest;
pub mod merkle;
pub mod model;
pub mod runtime;
pub mod store;
pub mod trace;
pub mod validate;
pub mod view;

pub use digest::Digest;
pub use error::{Error, ErrorCode, Result};
pub use gateway::{BomPatch, Gateway, NewAssembly};
pub use graph::{DepGraph, Direction, NodeId};
pub use id::{AssemblyId, BolId, BomId, ComponentId, IdGen};
pub use ledger::{ChainReport, EntryType, LedgerEntry};
pub use manifest::BomManifest;
pub use merkle::{verify_inclusion, InclusionProof, MerkleTree, Side};
pub use model::{
    AccessMetadata, Assembly, Bom, ComponentKind, ComponentRecord, Millis, Role, ValidationReport, Violation,
    ViolationCode,
};
pub use runtime::{Anchor, Bol, BolStatus, Observation, ShadowItem};
pub use store::{Journal, RecordKind, ScanFilter, Store, StoreError, StoredRecord};
pub use trace::{LineageGraph, LineageReport, Scope, StaticUse, Uses};
pub use view::{AssemblyView, BomView};

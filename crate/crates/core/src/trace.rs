//! Where-from and where-used queries.
//!
//! `trace` walks edges backwards to a node's origins; `track` walks them
//! forwards to its consumers. Both return the reached nodes together with the
//! edges among them, so a result shows which assembly linked two components.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digest::Digest;
use crate::graph::{DepGraph, Direction, NodeId};
use crate::id::{AssemblyId, BolId, BomId, ComponentId};
use crate::model::Role;
use crate::runtime::{Anchor, BolStatus, Observation};
use crate::view::BomView;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Scope {
    #[default]
    Global,
    Bom(BomId),
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() || s.eq_ignore_ascii_case("global") {
            return Ok(Scope::Global);
        }
        s.parse().map(Scope::Bom).map_err(|_| format!("scope must be \"global\" or a BoM id, got {s:?}"))
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Bom(id) => write!(f, "{id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineageGraph {
    pub origin: NodeId,
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

impl LineageGraph {
    /// Closure of `origin` in `graph`. A node the graph has never seen still
    /// yields a graph holding just itself.
    pub fn closure(graph: &DepGraph, origin: NodeId, dir: Direction) -> Self {
        let mut nodes = graph.closure(&origin, dir);
        nodes.insert(origin.clone());
        let edges = graph.induced_edges_lenient(&nodes);
        Self { origin, nodes, edges }
    }

    pub fn component_nodes(&self) -> impl Iterator<Item = &ComponentId> {
        self.nodes.iter().filter_map(NodeId::as_component)
    }
}

impl DepGraph {
    /// Like `induced_edges`, tolerating nodes the graph does not contain.
    pub(crate) fn induced_edges_lenient(&self, nodes: &BTreeSet<NodeId>) -> BTreeSet<(NodeId, NodeId)> {
        let known: BTreeSet<NodeId> = nodes.iter().filter(|n| self.contains(n)).cloned().collect();
        self.induced_edges(&known)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StaticUse {
    pub bom_id: BomId,
    pub assembly_id: AssemblyId,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Uses {
    #[serde(rename = "static")]
    pub static_uses: Vec<StaticUse>,
    pub dynamic: Vec<BolId>,
}

/// Static structure and dynamic record of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LineageReport {
    pub bol_id: BolId,
    pub status: BolStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_label: Option<String>,
    pub static_graph: LineageGraph,
    pub dynamic: BTreeMap<ComponentId, Vec<ObservationView>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Anchor>,
    pub bom_snapshot: BomView,
}

/// An observation as reported, with the digest of its payload so a report
/// can be matched against the ledger without shipping payloads twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservationView {
    #[serde(flatten)]
    pub observation: Observation,
    pub payload_digest: Digest,
}

impl From<&Observation> for ObservationView {
    fn from(o: &Observation) -> Self {
        Self { payload_digest: Digest::sha256(o.payload.as_bytes()), observation: o.clone() }
    }
}

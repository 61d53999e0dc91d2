//! Bills of Lots: per-run instances of a BoM.
//!
//! A BoL holds one shadow item per component of its BoM. Shadow items collect
//! the dynamic side of a run as an append-only list of observations. Sealing
//! a BoL commits its header and every observation to a Merkle root.
//!
//! Leaf 0 is the header `{"bolId","bomId","createdAt"}`; observation leaves
//! follow, ordered by component id and then insertion index, each the
//! canonical JSON of `{"componentId","index","note"?,"payload","recordedAt"}`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::digest::Digest;
use crate::id::{BolId, BomId, ComponentId};
use crate::merkle::{InclusionProof, MerkleTree};
use crate::model::{Assembly, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Observation {
    pub recorded_at: Millis,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ShadowItem {
    pub component_id: ComponentId,
    pub observations: Vec<Observation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BolStatus {
    Open,
    Sealed,
}

/// Merkle commitment to a sealed BoL, referenced from the ledger.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Anchor {
    pub bol_id: BolId,
    pub merkle_root: Digest,
    pub leaf_count: u64,
    pub ledger_index: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bol {
    pub id: BolId,
    pub bom_id: BomId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_label: Option<String>,
    pub created_at: Millis,
    pub status: BolStatus,
    pub shadow_items: BTreeMap<ComponentId, ShadowItem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Anchor>,
}

/// Distinct components referenced anywhere in `assemblies`.
pub fn distinct_components<'a>(assemblies: impl IntoIterator<Item = &'a Assembly>) -> BTreeSet<ComponentId> {
    assemblies.into_iter().flat_map(|a| a.inputs().chain(a.outputs()).cloned()).collect()
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct HeaderLeaf<'a> {
    bol_id: &'a BolId,
    bom_id: &'a BomId,
    created_at: Millis,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ObservationLeaf<'a> {
    component_id: &'a ComponentId,
    index: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'a str>,
    payload: &'a str,
    recorded_at: Millis,
}

impl Bol {
    /// A fresh open BoL with an empty shadow item per component.
    pub fn new(
        id: BolId,
        bom_id: BomId,
        run_label: Option<String>,
        created_at: Millis,
        components: impl IntoIterator<Item = ComponentId>,
    ) -> Self {
        let shadow_items = components
            .into_iter()
            .map(|c| (c.clone(), ShadowItem { component_id: c, observations: Vec::new() }))
            .collect();
        Self { id, bom_id, run_label, created_at, status: BolStatus::Open, shadow_items, anchor: None }
    }

    pub fn is_sealed(&self) -> bool {
        self.status == BolStatus::Sealed
    }

    pub fn observation_count(&self) -> usize {
        self.shadow_items.values().map(|s| s.observations.len()).sum()
    }

    /// Appends an observation, clamping its timestamp so observations on one
    /// shadow item never go back in time. Returns the stored observation and
    /// its insertion index. The caller checks status and membership.
    pub(crate) fn push_observation(
        &mut self,
        component: &ComponentId,
        payload: String,
        note: Option<String>,
        now: Millis,
    ) -> (Observation, u64) {
        let item = self.shadow_items.get_mut(component).expect("membership checked by caller");
        let recorded_at = item.observations.last().map_or(now, |last| last.recorded_at.max(now));
        let obs = Observation { recorded_at, payload, note };
        item.observations.push(obs.clone());
        (obs, item.observations.len() as u64 - 1)
    }

    /// Canonical bytes of every leaf, header first.
    pub fn leaves(&self) -> Vec<Vec<u8>> {
        let header = HeaderLeaf { bol_id: &self.id, bom_id: &self.bom_id, created_at: self.created_at };
        let mut out = vec![canonical::to_vec(&header).expect("header is canonical")];
        // BTreeMap iteration is already component-id order.
        for item in self.shadow_items.values() {
            for (i, obs) in item.observations.iter().enumerate() {
                let leaf = ObservationLeaf {
                    component_id: &item.component_id,
                    index: i as u64,
                    note: obs.note.as_deref(),
                    payload: &obs.payload,
                    recorded_at: obs.recorded_at,
                };
                out.push(canonical::to_vec(&leaf).expect("observation is canonical"));
            }
        }
        out
    }

    pub fn merkle_tree(&self) -> MerkleTree {
        MerkleTree::from_leaves(&self.leaves()).expect("header leaf always present")
    }

    /// Anchor over the current leaves, to be recorded at `ledger_index`.
    pub fn compute_anchor(&self, ledger_index: u64) -> Anchor {
        let tree = self.merkle_tree();
        Anchor { bol_id: self.id.clone(), merkle_root: tree.root(), leaf_count: tree.leaf_count() as u64, ledger_index }
    }

    /// Leaf bytes and inclusion proof for `leaf_index`.
    pub fn inclusion_proof(&self, leaf_index: usize) -> Option<(Vec<u8>, InclusionProof)> {
        let leaves = self.leaves();
        let tree = MerkleTree::from_leaves(&leaves)?;
        let proof = tree.proof(leaf_index)?;
        Some((leaves.into_iter().nth(leaf_index)?, proof))
    }
}

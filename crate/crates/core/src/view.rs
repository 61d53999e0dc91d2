//! Expanded, read-side shapes. A [`BomView`] nests full component records
//! inside each assembly, mirroring how a BoM reads when fetched whole.

use serde::{Deserialize, Serialize};

use crate::id::{AssemblyId, BomId};
use crate::model::{ComponentRecord, Millis};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AssemblyView {
    pub id: AssemblyId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub input_data: Vec<ComponentRecord>,
    pub input_artifacts: Vec<ComponentRecord>,
    pub output_data: Vec<ComponentRecord>,
    pub output_artifacts: Vec<ComponentRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BomView {
    pub id: BomId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub frozen: bool,
    pub created_at: Millis,
    pub revision: u64,
    pub assemblies: Vec<AssemblyView>,
}

impl BomView {
    pub fn components(&self) -> impl Iterator<Item = &ComponentRecord> {
        self.assemblies.iter().flat_map(|a| {
            a.input_data.iter().chain(&a.input_artifacts).chain(&a.output_data).chain(&a.output_artifacts)
        })
    }
}

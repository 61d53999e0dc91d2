//! Static BoM domain model: components, assemblies and BoMs.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::id::{AssemblyId, BomId, ComponentId};

/// Milliseconds since the Unix epoch, UTC.
pub type Millis = i64;

pub(crate) fn nfc(s: &str) -> String {
    s.nfc().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    DataSource,
    Artifact,
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentKind::DataSource => "DataSource",
            ComponentKind::Artifact => "Artifact",
        })
    }
}

/// Opaque static metadata attached to a component, e.g. `dataAccess` holding
/// the URL a run should fetch from. Values are never interpreted here.
///
/// Keys iterate in bytewise ascending order, which is also their canonical
/// order. Deserializing input that repeats a key is an error rather than
/// last-wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct AccessMetadata(BTreeMap<String, String>);

impl AccessMetadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds metadata from key/value pairs, rejecting a repeated key.
    /// Keys and values are stored in NFC.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            let key = nfc(k.as_ref());
            if map.insert(key.clone(), nfc(v.as_ref())).is_some() {
                return Err(key);
            }
        }
        Ok(Self(map))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl<'de> Deserialize<'de> for AccessMetadata {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PairsVisitor;

        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = Vec<(String, String)>;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of string values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut pairs = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    pairs.push((k, v));
                }
                Ok(pairs)
            }
        }

        let pairs = d.deserialize_map(PairsVisitor)?;
        AccessMetadata::from_pairs(pairs).map_err(|k| serde::de::Error::custom(format!("duplicate metadata key {k:?}")))
    }
}

/// A data source or artifact: one of the BoM's parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentRecord {
    pub id: ComponentId,
    pub kind: ComponentKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub metadata: AccessMetadata,
}

/// A processing stage: inputs go in, outputs come out.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assembly {
    pub id: AssemblyId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub input_data: Vec<ComponentId>,
    #[serde(default)]
    pub input_artifacts: Vec<ComponentId>,
    #[serde(default)]
    pub output_data: Vec<ComponentId>,
    #[serde(default)]
    pub output_artifacts: Vec<ComponentId>,
}

impl Assembly {
    pub fn inputs(&self) -> impl Iterator<Item = &ComponentId> {
        self.input_data.iter().chain(&self.input_artifacts)
    }

    pub fn outputs(&self) -> impl Iterator<Item = &ComponentId> {
        self.output_data.iter().chain(&self.output_artifacts)
    }

    /// Each referenced component with the kind its list declares and whether
    /// it is an output.
    pub fn references(&self) -> impl Iterator<Item = (&ComponentId, ComponentKind, Role)> {
        fn tag(
            list: &[ComponentId],
            kind: ComponentKind,
            role: Role,
        ) -> impl Iterator<Item = (&ComponentId, ComponentKind, Role)> {
            list.iter().map(move |c| (c, kind, role))
        }
        tag(&self.input_data, ComponentKind::DataSource, Role::Input)
            .chain(tag(&self.input_artifacts, ComponentKind::Artifact, Role::Input))
            .chain(tag(&self.output_data, ComponentKind::DataSource, Role::Output))
            .chain(tag(&self.output_artifacts, ComponentKind::Artifact, Role::Output))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Input,
    Output,
}

/// A named collection of assemblies. Frozen on first instantiation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bom {
    pub id: BomId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub assemblies: Vec<AssemblyId>,
    pub frozen: bool,
    pub created_at: Millis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ViolationCode {
    DanglingRef,
    KindMismatch,
    Cycle,
    MultipleProducers,
    DuplicateMembership,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub subject: String,
    pub detail: String,
}

/// Outcome of structural validation. `ok` is true iff there are no violations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn from_violations(mut violations: Vec<Violation>) -> Self {
        violations.sort();
        violations.dedup();
        Self { ok: violations.is_empty(), violations }
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

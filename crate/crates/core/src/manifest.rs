//! Declarative BoM documents.
//!
//! A manifest names a BoM and its assemblies, declaring components inline by
//! name:
//!
//! ```json
//! {"bom": {
//!   "name": "HPC Congestion",
//!   "assemblies": [{
//!     "name": "Traffic Scene Analysis",
//!     "inputData": [{"name": "Traffic Scene", "dataAccess": "https://xyz.com/00001.06514.jpg"}],
//!     "outputData": [{"name": "Result"}],
//!     "inputArtifacts": [{"name": "Congestion Model"}]
//!   }]
//! }}
//! ```
//!
//! The outer `bom` wrapper is optional. A component object takes `name`,
//! optional `description`, an optional `metadata` map, and any further string
//! fields (like `dataAccess` above) as metadata entries. A component that
//! already exists is referenced by id, either as a bare string or as
//! `{"id": "..."}`; assemblies likewise. Repeating a component's name later
//! in the document refers back to the first declaration.

use std::fmt;

use serde::de::value::MapAccessDeserializer;
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer};

use crate::id::{AssemblyId, ComponentId};

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BomManifest {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub assemblies: Vec<AssemblyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AssemblyEntry {
    Existing(AssemblyId),
    Inline(AssemblySpec),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AssemblySpec {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub input_data: Vec<ComponentEntry>,
    #[serde(default)]
    pub input_artifacts: Vec<ComponentEntry>,
    #[serde(default)]
    pub output_data: Vec<ComponentEntry>,
    #[serde(default)]
    pub output_artifacts: Vec<ComponentEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ComponentEntry {
    Existing(ComponentId),
    Declared(ComponentSpec),
}

/// A component declared in place. Metadata keeps the pairs as written so a
/// repeated key can be reported rather than silently collapsed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComponentSpec {
    pub name: String,
    pub description: Option<String>,
    pub metadata: Vec<(String, String)>,
}

impl ComponentSpec {
    /// True when the entry carries only a name, i.e. is a back-reference.
    pub fn is_bare(&self) -> bool {
        self.description.is_none() && self.metadata.is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("manifest is not valid: {0}")]
pub struct ManifestParseError(#[from] serde_json::Error);

impl BomManifest {
    /// Parses a manifest, with or without the outer `{"bom": ...}` wrapper.
    pub fn from_slice(bytes: &[u8]) -> Result<Self, ManifestParseError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Wrapped {
            bom: BomManifest,
        }

        let wrapped = matches!(
            serde_json::from_slice::<serde_json::Value>(bytes)?,
            serde_json::Value::Object(ref m) if m.len() == 1 && m.contains_key("bom")
        );
        if wrapped {
            Ok(serde_json::from_slice::<Wrapped>(bytes)?.bom)
        } else {
            Ok(serde_json::from_slice(bytes)?)
        }
    }

    /// Whether every assembly is a reference to an existing one.
    pub fn is_reference_only(&self) -> bool {
        self.assemblies.iter().all(|a| matches!(a, AssemblyEntry::Existing(_)))
    }
}

impl<'de> Deserialize<'de> for AssemblyEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EntryVisitor;

        impl<'de> Visitor<'de> for EntryVisitor {
            type Value = AssemblyEntry;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an assembly id or an assembly object")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map(AssemblyEntry::Existing).map_err(E::custom)
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<Self::Value, A::Error> {
                AssemblySpec::deserialize(MapAccessDeserializer::new(map)).map(AssemblyEntry::Inline)
            }
        }

        d.deserialize_any(EntryVisitor)
    }
}

/// A JSON object read as ordered string pairs, duplicates kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MetadataPairs(pub Vec<(String, String)>);

impl<'de> Deserialize<'de> for MetadataPairs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct PairsVisitor;

        impl<'de> Visitor<'de> for PairsVisitor {
            type Value = MetadataPairs;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object of string values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some(pair) = map.next_entry::<String, String>()? {
                    out.push(pair);
                }
                Ok(MetadataPairs(out))
            }
        }

        d.deserialize_map(PairsVisitor)
    }
}

impl<'de> Deserialize<'de> for ComponentEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EntryVisitor;

        impl<'de> Visitor<'de> for EntryVisitor {
            type Value = ComponentEntry;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a component id or a component object")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                v.parse().map(ComponentEntry::Existing).map_err(E::custom)
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut id: Option<String> = None;
                let mut name: Option<String> = None;
                let mut spec = ComponentSpec::default();
                let mut keys = 0usize;
                while let Some(key) = map.next_key::<String>()? {
                    keys += 1;
                    match key.as_str() {
                        "id" => id = Some(map.next_value()?),
                        "name" => {
                            if name.replace(map.next_value()?).is_some() {
                                return Err(de::Error::duplicate_field("name"));
                            }
                        }
                        "description" => spec.description = Some(map.next_value()?),
                        "metadata" => spec.metadata.extend(map.next_value::<MetadataPairs>()?.0),
                        _ => {
                            let value: String = map
                                .next_value()
                                .map_err(|_| de::Error::custom(format!("metadata field {key:?} must be a string")))?;
                            spec.metadata.push((key, value));
                        }
                    }
                }
                if let Some(id) = id {
                    if keys > 1 {
                        return Err(de::Error::custom("a component given by id takes no other fields"));
                    }
                    return id.parse().map(ComponentEntry::Existing).map_err(de::Error::custom);
                }
                spec.name = name.ok_or_else(|| de::Error::missing_field("name"))?;
                Ok(ComponentEntry::Declared(spec))
            }
        }

        d.deserialize_any(EntryVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = r#"{"bom": {
      "name": "HPC Congestion",
      "description": "Determine congestion levels on Hyde Park Corner",
      "assemblies": [
        {
          "name": "Traffic Scene Analysis",
          "description": "Determine congestion at Hyde Park Corner",
          "inputData": [
            {
                "name": "Traffic Scene",
                "dataAccess": "https://xyz.com/00001.06514.jpg"
            }
          ],
          "outputData": [
            {
              "name": "Result"
            }
          ],
          "inputArtifacts": [
            {
              "name": "Congestion Model"
            }
          ]
        }
      ]
    }}"#;

    #[test]
    fn parses_wrapped_listing() {
        let m = BomManifest::from_slice(LISTING.as_bytes()).unwrap();
        assert_eq!(m.name, "HPC Congestion");
        let AssemblyEntry::Inline(a) = &m.assemblies[0] else { panic!() };
        assert_eq!(a.name, "Traffic Scene Analysis");
        let ComponentEntry::Declared(scene) = &a.input_data[0] else { panic!() };
        assert_eq!(scene.metadata, vec![("dataAccess".to_owned(), "https://xyz.com/00001.06514.jpg".to_owned())]);
        assert!(matches!(&a.output_data[0], ComponentEntry::Declared(c) if c.name == "Result" && c.is_bare()));
        assert!(a.output_artifacts.is_empty());
    }

    #[test]
    fn bare_form_and_id_references() {
        let m = BomManifest::from_slice(
            br#"{"name":"x","assemblies":["as_00000000000000000000000000000001",
                {"name":"a","inputData":["ds_00000000000000000000000000000002",{"id":"ds_00000000000000000000000000000003"}]}]}"#,
        )
        .unwrap();
        assert!(matches!(m.assemblies[0], AssemblyEntry::Existing(_)));
        let AssemblyEntry::Inline(a) = &m.assemblies[1] else { panic!() };
        assert!(a.input_data.iter().all(|c| matches!(c, ComponentEntry::Existing(_))));
        assert!(!m.is_reference_only());
    }

    #[test]
    fn duplicate_metadata_keys_are_kept_for_reporting() {
        let m = BomManifest::from_slice(
            br#"{"name":"x","assemblies":[{"name":"a","inputData":[{"name":"c","metadata":{"k":"1"},"k":"2"}]}]}"#,
        )
        .unwrap();
        let AssemblyEntry::Inline(a) = &m.assemblies[0] else { panic!() };
        let ComponentEntry::Declared(c) = &a.input_data[0] else { panic!() };
        assert_eq!(c.metadata.len(), 2);
    }

    #[test]
    fn rejects_unknown_assembly_fields_and_non_string_metadata() {
        assert!(BomManifest::from_slice(br#"{"name":"x","assemblies":[{"name":"a","inputs":[]}]}"#).is_err());
        assert!(BomManifest::from_slice(
            br#"{"name":"x","assemblies":[{"name":"a","inputData":[{"name":"c","n":1}]}]}"#
        )
        .is_err());
        assert!(BomManifest::from_slice(br#"{"name":"x","assemblies":[{"name":"a","inputData":[{"id":"ds_00000000000000000000000000000003","name":"c"}]}]}"#).is_err());
        assert!(BomManifest::from_slice(b"[1]").is_err());
    }
}

//! Typed identifiers.
//!
//! Every entity id is a kind prefix followed by 32 lowercase hex characters
//! (128 bits). Data sources and artifacts share the component id type but
//! carry different prefixes, so the kind of a component can be read off its
//! id without a lookup.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::ComponentKind;

const HEX_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid identifier {value:?}: expected {expected}")]
pub struct IdParseError {
    pub value: String,
    pub expected: &'static str,
}

fn valid_hex(s: &str) -> bool {
    s.len() == HEX_LEN && s.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'))
}

macro_rules! simple_id {
    ($name:ident, $prefix:literal, $what:literal) => {
        #[doc = concat!("Identifier of ", $what, " (`", $prefix, "` + 32 hex chars).")]
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub const PREFIX: &'static str = $prefix;

            pub(crate) fn from_bits(bits: u128) -> Self {
                Self(format!("{}{:032x}", $prefix, bits))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s.strip_prefix($prefix) {
                    Some(rest) if valid_hex(rest) => Ok(Self(s.to_owned())),
                    _ => Err(IdParseError {
                        value: s.to_owned(),
                        expected: concat!("\"", $prefix, "\" followed by 32 lowercase hex chars"),
                    }),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let raw = String::deserialize(d)?;
                raw.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

simple_id!(AssemblyId, "as_", "an assembly");
simple_id!(BomId, "bom_", "a bill of materials");
simple_id!(BolId, "bol_", "a bill of lots");

/// Identifier of a component. `ds_` marks a data source, `af_` an artifact.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId(String);

impl ComponentId {
    pub(crate) fn from_bits(kind: ComponentKind, bits: u128) -> Self {
        Self(format!("{}{:032x}", Self::prefix_for(kind), bits))
    }

    pub fn prefix_for(kind: ComponentKind) -> &'static str {
        match kind {
            ComponentKind::DataSource => "ds_",
            ComponentKind::Artifact => "af_",
        }
    }

    pub fn kind(&self) -> ComponentKind {
        if self.0.starts_with("ds_") {
            ComponentKind::DataSource
        } else {
            ComponentKind::Artifact
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl FromStr for ComponentId {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rest = s.strip_prefix("ds_").or_else(|| s.strip_prefix("af_"));
        match rest {
            Some(rest) if valid_hex(rest) => Ok(Self(s.to_owned())),
            _ => Err(IdParseError {
                value: s.to_owned(),
                expected: "\"ds_\" or \"af_\" followed by 32 lowercase hex chars",
            }),
        }
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for ComponentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ComponentId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// Source of fresh identifier bits.
///
/// `Random` draws 128 bits from the thread RNG. `Sequential` hands out a
/// counter, so a replayed session produces the same ids; it is meant for
/// tests and reproducible demos.
#[derive(Debug, Clone)]
pub enum IdGen {
    Random,
    Sequential { next: u128 },
}

impl IdGen {
    pub fn sequential() -> Self {
        IdGen::Sequential { next: 1 }
    }

    pub fn next_bits(&mut self) -> u128 {
        match self {
            IdGen::Random => {
                let mut buf = [0u8; 16];
                rand::rng().fill_bytes(&mut buf);
                u128::from_be_bytes(buf)
            }
            IdGen::Sequential { next } => {
                let bits = *next;
                *next += 1;
                bits
            }
        }
    }

    /// Moves a sequential generator past `bits`, so ids already in a store
    /// are never handed out again after a restart.
    pub fn observe(&mut self, bits: u128) {
        if let IdGen::Sequential { next } = self {
            if bits >= *next {
                *next = bits + 1;
            }
        }
    }
}

/// Extracts the 128-bit body of any entity id string.
pub(crate) fn id_bits(raw: &str) -> Option<u128> {
    let (_, hex) = raw.split_once('_')?;
    if !valid_hex(hex) {
        return None;
    }
    u128::from_str_radix(hex, 16).ok()
}

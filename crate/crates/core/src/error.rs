use std::fmt;

use serde::{Deserialize, Serialize};

use crate::id::{BolId, BomId, ComponentId};
use crate::merkle::MalformedProof;
use crate::model::{ComponentKind, ValidationReport};
use crate::store::StoreError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Stable, machine-readable error codes. This is the complete set a client
/// can ever see; [`ErrorCode::ALL`] enumerates it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    EmptyName,
    DuplicateMetadataKey,
    DanglingRef,
    KindMismatch,
    InputOutputOverlap,
    DuplicateRef,
    ManifestInvalid,
    ValidationFailed,
    UnknownBom,
    UnknownBol,
    UnknownId,
    NotInScope,
    ComponentNotInBom,
    BolSealed,
    AlreadySealed,
    BomFrozen,
    BolNotSealed,
    LeafOutOfRange,
    MalformedProof,
    RevisionConflict,
    StorageFailure,
    MalformedBody,
    RouteNotFound,
}

impl ErrorCode {
    pub const ALL: &'static [ErrorCode] = &[
        ErrorCode::EmptyName,
        ErrorCode::DuplicateMetadataKey,
        ErrorCode::DanglingRef,
        ErrorCode::KindMismatch,
        ErrorCode::InputOutputOverlap,
        ErrorCode::DuplicateRef,
        ErrorCode::ManifestInvalid,
        ErrorCode::ValidationFailed,
        ErrorCode::UnknownBom,
        ErrorCode::UnknownBol,
        ErrorCode::UnknownId,
        ErrorCode::NotInScope,
        ErrorCode::ComponentNotInBom,
        ErrorCode::BolSealed,
        ErrorCode::AlreadySealed,
        ErrorCode::BomFrozen,
        ErrorCode::BolNotSealed,
        ErrorCode::LeafOutOfRange,
        ErrorCode::MalformedProof,
        ErrorCode::RevisionConflict,
        ErrorCode::StorageFailure,
        ErrorCode::MalformedBody,
        ErrorCode::RouteNotFound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::EmptyName => "EMPTY_NAME",
            ErrorCode::DuplicateMetadataKey => "DUPLICATE_METADATA_KEY",
            ErrorCode::DanglingRef => "DANGLING_REF",
            ErrorCode::KindMismatch => "KIND_MISMATCH",
            ErrorCode::InputOutputOverlap => "INPUT_OUTPUT_OVERLAP",
            ErrorCode::DuplicateRef => "DUPLICATE_REF",
            ErrorCode::ManifestInvalid => "MANIFEST_INVALID",
            ErrorCode::ValidationFailed => "VALIDATION_FAILED",
            ErrorCode::UnknownBom => "UNKNOWN_BOM",
            ErrorCode::UnknownBol => "UNKNOWN_BOL",
            ErrorCode::UnknownId => "UNKNOWN_ID",
            ErrorCode::NotInScope => "NOT_IN_SCOPE",
            ErrorCode::ComponentNotInBom => "COMPONENT_NOT_IN_BOM",
            ErrorCode::BolSealed => "BOL_SEALED",
            ErrorCode::AlreadySealed => "ALREADY_SEALED",
            ErrorCode::BomFrozen => "BOM_FROZEN",
            ErrorCode::BolNotSealed => "BOL_NOT_SEALED",
            ErrorCode::LeafOutOfRange => "LEAF_OUT_OF_RANGE",
            ErrorCode::MalformedProof => "MALFORMED_PROOF",
            ErrorCode::RevisionConflict => "REVISION_CONFLICT",
            ErrorCode::StorageFailure => "STORAGE_FAILURE",
            ErrorCode::MalformedBody => "MALFORMED_BODY",
            ErrorCode::RouteNotFound => "ROUTE_NOT_FOUND",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0} name must not be empty")]
    EmptyName(&'static str),
    #[error("metadata key {0:?} given more than once")]
    DuplicateMetadataKey(String),
    #[error("{0} does not exist")]
    DanglingRef(String),
    #[error("{id} is not a {expected}")]
    KindMismatch { id: String, expected: ComponentKind },
    #[error("{0} is both an input and an output of the same assembly")]
    InputOutputOverlap(ComponentId),
    #[error("{0} is listed more than once in the same assembly")]
    DuplicateRef(ComponentId),
    #[error("invalid manifest: {0}")]
    ManifestInvalid(String),
    #[error("structural validation failed with {} violation(s)", .0.violations.len())]
    ValidationFailed(ValidationReport),
    #[error("no bill of materials {0}")]
    UnknownBom(String),
    #[error("no bill of lots {0}")]
    UnknownBol(String),
    #[error("no component or assembly {0}")]
    UnknownId(String),
    #[error("{id} is not part of {scope}")]
    NotInScope { id: String, scope: BomId },
    #[error("{component} is not part of the BoM behind {bol}")]
    ComponentNotInBom { component: String, bol: BolId },
    #[error("{0} is sealed")]
    BolSealed(BolId),
    #[error("{0} is already sealed")]
    AlreadySealed(BolId),
    #[error("{0} is frozen")]
    BomFrozen(BomId),
    #[error("{0} is not sealed yet")]
    BolNotSealed(BolId),
    #[error("{bol} has {leaf_count} leaves; no leaf {index}")]
    LeafOutOfRange { bol: BolId, index: u64, leaf_count: u64 },
    #[error(transparent)]
    MalformedProof(#[from] MalformedProof),
    #[error("revision conflict on {key}: expected {expected}, current {actual}")]
    RevisionConflict { key: String, expected: u64, actual: u64 },
    #[error("storage failure: {0}")]
    Storage(String),
}

impl Error {
    pub fn code(&self) -> ErrorCode {
        match self {
            Error::EmptyName(_) => ErrorCode::EmptyName,
            Error::DuplicateMetadataKey(_) => ErrorCode::DuplicateMetadataKey,
            Error::DanglingRef(_) => ErrorCode::DanglingRef,
            Error::KindMismatch { .. } => ErrorCode::KindMismatch,
            Error::InputOutputOverlap(_) => ErrorCode::InputOutputOverlap,
            Error::DuplicateRef(_) => ErrorCode::DuplicateRef,
            Error::ManifestInvalid(_) => ErrorCode::ManifestInvalid,
            Error::ValidationFailed(_) => ErrorCode::ValidationFailed,
            Error::UnknownBom(_) => ErrorCode::UnknownBom,
            Error::UnknownBol(_) => ErrorCode::UnknownBol,
            Error::UnknownId(_) => ErrorCode::UnknownId,
            Error::NotInScope { .. } => ErrorCode::NotInScope,
            Error::ComponentNotInBom { .. } => ErrorCode::ComponentNotInBom,
            Error::BolSealed(_) => ErrorCode::BolSealed,
            Error::AlreadySealed(_) => ErrorCode::AlreadySealed,
            Error::BomFrozen(_) => ErrorCode::BomFrozen,
            Error::BolNotSealed(_) => ErrorCode::BolNotSealed,
            Error::LeafOutOfRange { .. } => ErrorCode::LeafOutOfRange,
            Error::MalformedProof(_) => ErrorCode::MalformedProof,
            Error::RevisionConflict { .. } => ErrorCode::RevisionConflict,
            Error::Storage(_) => ErrorCode::StorageFailure,
        }
    }

    /// Structured detail for clients, when the error carries any.
    pub fn detail(&self) -> Option<serde_json::Value> {
        match self {
            Error::ValidationFailed(report) => serde_json::to_value(report).ok(),
            Error::RevisionConflict { key, expected, actual } => Some(serde_json::json!({
                "key": key, "expected": expected, "actual": actual,
            })),
            _ => None,
        }
    }
}

impl From<StoreError> for Error {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::RevisionConflict { key, expected, actual } => Error::RevisionConflict { key, expected, actual },
            other => Error::Storage(other.to_string()),
        }
    }
}

//! Merkle trees over BoL leaves.
//!
//! Leaves hash as `H(0x00 || bytes)` and internal nodes as
//! `H(0x01 || left || right)`. When a level has an odd number of nodes the
//! last one is carried up unchanged rather than paired with itself.

use serde::{Deserialize, Serialize};

use crate::digest::Digest;

const LEAF_PREFIX: u8 = 0x00;
const NODE_PREFIX: u8 = 0x01;

pub fn leaf_hash(bytes: &[u8]) -> Digest {
    Digest::sha256_parts(&[&[LEAF_PREFIX], bytes])
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    Digest::sha256_parts(&[&[NODE_PREFIX], left.as_bytes(), right.as_bytes()])
}

/// Which side of the running hash a sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub digest: Digest,
    pub side: Side,
}

/// Audit path from one leaf to the root. Levels where the leaf's ancestor was
/// carried up without a sibling contribute no step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct InclusionProof {
    pub leaf_index: u64,
    pub siblings: Vec<ProofStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed inclusion proof: {0}")]
pub struct MalformedProof(pub String);

impl InclusionProof {
    /// Parses a proof from loosely-typed JSON, reporting shape errors as
    /// [`MalformedProof`].
    pub fn from_json(value: &serde_json::Value) -> Result<Self, MalformedProof> {
        serde_json::from_value(value.clone()).map_err(|e| MalformedProof(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
}

impl MerkleTree {
    /// Builds a tree over raw leaf bytes. `None` when there are no leaves.
    pub fn from_leaves<B: AsRef<[u8]>>(leaves: &[B]) -> Option<Self> {
        Self::from_leaf_hashes(leaves.iter().map(|l| leaf_hash(l.as_ref())).collect())
    }

    pub fn from_leaf_hashes(hashes: Vec<Digest>) -> Option<Self> {
        if hashes.is_empty() {
            return None;
        }
        let mut levels = vec![hashes];
        while levels.last().unwrap().len() > 1 {
            let next = levels
                .last()
                .unwrap()
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => node_hash(l, r),
                    [only] => *only,
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Some(Self { levels })
    }

    pub fn root(&self) -> Digest {
        self.levels.last().unwrap()[0]
    }

    pub fn leaf_count(&self) -> usize {
        self.levels[0].len()
    }

    pub fn proof(&self, leaf_index: usize) -> Option<InclusionProof> {
        if leaf_index >= self.leaf_count() {
            return None;
        }
        let mut siblings = Vec::new();
        let mut idx = leaf_index;
        for level in &self.levels[..self.levels.len() - 1] {
            let sibling = idx ^ 1;
            if sibling < level.len() {
                let side = if idx % 2 == 1 { Side::Left } else { Side::Right };
                siblings.push(ProofStep { digest: level[sibling], side });
            }
            idx /= 2;
        }
        Some(InclusionProof { leaf_index: leaf_index as u64, siblings })
    }
}

/// Checks that the proof's sides can describe the path of `leaf_index`.
///
/// Walking up, a leaf whose position is odd always has a left sibling; an
/// even position has a right sibling unless it was carried up. So the sides,
/// read bottom-up, must be the bits of the index with some zero bits removed
/// (each removed zero being a carried level). This binds `leaf_index` to the
/// path: changing any single bit changes the number of left steps.
fn path_matches_index(leaf_index: u64, siblings: &[ProofStep]) -> bool {
    let mut bit = 0u32;
    for step in siblings {
        match step.side {
            Side::Left => {
                while bit < 64 && leaf_index >> bit & 1 == 0 {
                    bit += 1;
                }
                if bit >= 64 {
                    return false;
                }
            }
            Side::Right => {
                if bit < 64 && leaf_index >> bit & 1 == 1 {
                    return false;
                }
            }
        }
        bit += 1;
    }
    bit >= 64 || leaf_index >> bit == 0
}

/// True iff `proof` carries `leaf_bytes` up to `root`.
pub fn verify_inclusion(leaf_bytes: &[u8], proof: &InclusionProof, root: &Digest) -> Result<bool, MalformedProof> {
    if proof.siblings.len() > 64 {
        return Err(MalformedProof(format!("{} levels exceed any 64-bit tree", proof.siblings.len())));
    }
    if !path_matches_index(proof.leaf_index, &proof.siblings) {
        return Ok(false);
    }
    let mut acc = leaf_hash(leaf_bytes);
    for step in &proof.siblings {
        acc = match step.side {
            Side::Left => node_hash(&step.digest, &acc),
            Side::Right => node_hash(&acc, &step.digest),
        };
    }
    Ok(acc == *root)
}

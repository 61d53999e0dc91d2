//! Structural validation of a BoM against everything else in the store.
//!
//! Reference and kind checks cover the BoM under validation. Acyclicity and
//! the single-producer rule are global: they are checked over the union of
//! every stored BoM plus the candidate, because components shared across BoMs
//! connect their graphs.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{DepGraph, NodeId};
use crate::id::{AssemblyId, BomId, ComponentId};
use crate::model::{Assembly, ComponentKind, ValidationReport, Violation, ViolationCode};

/// Read access to assemblies and component kinds.
pub trait Catalog {
    fn assembly(&self, id: &AssemblyId) -> Option<Assembly>;
    fn component_kind(&self, id: &ComponentId) -> Option<ComponentKind>;
}

/// The part of a BoM validation cares about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BomShape {
    pub id: BomId,
    pub assemblies: Vec<AssemblyId>,
}

fn violation(code: ViolationCode, subject: impl ToString, detail: String) -> Violation {
    Violation { code, subject: subject.to_string(), detail }
}

/// Validates `focus` given the other stored BoMs. `others` must not contain a
/// stored version of `focus` itself.
pub fn validate(focus: &BomShape, others: &[BomShape], catalog: &impl Catalog) -> ValidationReport {
    let mut violations = Vec::new();

    let mut owner: BTreeMap<&AssemblyId, &BomId> = BTreeMap::new();
    for bom in others {
        for a in &bom.assemblies {
            if let Some(prev) = owner.insert(a, &bom.id) {
                violations.push(violation(
                    ViolationCode::DuplicateMembership,
                    a,
                    format!("assembly belongs to both {prev} and {}", bom.id),
                ));
            }
        }
    }

    let mut listed = BTreeSet::new();
    for a in &focus.assemblies {
        if !listed.insert(a) {
            violations.push(violation(
                ViolationCode::DuplicateMembership,
                a,
                format!("assembly listed more than once in {}", focus.id),
            ));
        }
        if let Some(other) = owner.get(a) {
            violations.push(violation(
                ViolationCode::DuplicateMembership,
                a,
                format!("assembly already belongs to {other}"),
            ));
        }
    }

    let mut assemblies: BTreeMap<AssemblyId, Assembly> = BTreeMap::new();
    for a in &focus.assemblies {
        let Some(assembly) = catalog.assembly(a) else {
            violations.push(violation(
                ViolationCode::DanglingRef,
                a,
                format!("assembly referenced by {} does not exist", focus.id),
            ));
            continue;
        };
        for (c, declared, _) in assembly.references() {
            match catalog.component_kind(c) {
                None => violations.push(violation(
                    ViolationCode::DanglingRef,
                    c,
                    format!("component referenced by {a} does not exist"),
                )),
                Some(actual) if actual != declared || c.kind() != declared => violations.push(violation(
                    ViolationCode::KindMismatch,
                    c,
                    format!("{a} lists it as {declared} but it is {actual}"),
                )),
                Some(_) => {}
            }
        }
        assemblies.insert(a.clone(), assembly);
    }
    for a in others.iter().flat_map(|b| &b.assemblies) {
        if !assemblies.contains_key(a) {
            if let Some(assembly) = catalog.assembly(a) {
                assemblies.insert(a.clone(), assembly);
            }
        }
    }

    let mut producers: BTreeMap<&ComponentId, BTreeSet<&AssemblyId>> = BTreeMap::new();
    let mut graph = DepGraph::new();
    for assembly in assemblies.values() {
        for c in assembly.outputs() {
            producers.entry(c).or_default().insert(&assembly.id);
        }
        graph.add_assembly(assembly);
    }
    for (c, by) in producers {
        if by.len() > 1 {
            let names: Vec<&str> = by.iter().map(|a| a.as_str()).collect();
            violations.push(violation(
                ViolationCode::MultipleProducers,
                c,
                format!("produced by {}", names.join(", ")),
            ));
        }
    }
    for scc in graph.cyclic_components() {
        let names: Vec<&str> = scc.iter().map(NodeId::as_str).collect();
        violations.push(violation(ViolationCode::Cycle, &scc[0], format!("cycle through {}", names.join(", "))));
    }

    ValidationReport::from_violations(violations)
}

//! The component/assembly dependency graph.
//!
//! Edges run in the direction data flows: `input component -> assembly` and
//! `assembly -> output component`. Components shared between BoMs are the
//! same node, which is what stitches separate BoMs into one global graph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::id::{AssemblyId, BomId, ComponentId, IdParseError};
use crate::model::Assembly;

/// A node of a lineage graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodeId {
    Component(ComponentId),
    Assembly(AssemblyId),
    Bom(BomId),
}

impl NodeId {
    pub fn as_str(&self) -> &str {
        match self {
            NodeId::Component(id) => id.as_str(),
            NodeId::Assembly(id) => id.as_str(),
            NodeId::Bom(id) => id.as_str(),
        }
    }

    pub fn as_component(&self) -> Option<&ComponentId> {
        match self {
            NodeId::Component(id) => Some(id),
            _ => None,
        }
    }
}

impl Ord for NodeId {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for NodeId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeId {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.starts_with(AssemblyId::PREFIX) {
            s.parse().map(NodeId::Assembly)
        } else if s.starts_with(BomId::PREFIX) {
            s.parse().map(NodeId::Bom)
        } else {
            s.parse().map(NodeId::Component)
        }
    }
}

impl From<ComponentId> for NodeId {
    fn from(id: ComponentId) -> Self {
        NodeId::Component(id)
    }
}

impl From<AssemblyId> for NodeId {
    fn from(id: AssemblyId) -> Self {
        NodeId::Assembly(id)
    }
}

impl From<BomId> for NodeId {
    fn from(id: BomId) -> Self {
        NodeId::Bom(id)
    }
}

impl Serialize for NodeId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NodeId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Towards origins (where-from).
    Upstream,
    /// Towards consumers (where-used).
    Downstream,
}

#[derive(Debug, Clone, Default)]
pub struct DepGraph {
    forward: BTreeMap<NodeId, BTreeSet<NodeId>>,
    backward: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl DepGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: NodeId) {
        self.forward.entry(node.clone()).or_default();
        self.backward.entry(node).or_default();
    }

    pub fn add_edge(&mut self, from: NodeId, to: NodeId) {
        self.add_node(from.clone());
        self.add_node(to.clone());
        self.forward.get_mut(&from).unwrap().insert(to.clone());
        self.backward.get_mut(&to).unwrap().insert(from);
    }

    pub fn add_assembly(&mut self, assembly: &Assembly) {
        let a = NodeId::Assembly(assembly.id.clone());
        self.add_node(a.clone());
        for c in assembly.inputs() {
            self.add_edge(NodeId::Component(c.clone()), a.clone());
        }
        for c in assembly.outputs() {
            self.add_edge(a.clone(), NodeId::Component(c.clone()));
        }
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.forward.contains_key(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.forward.keys()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.forward.iter().flat_map(|(from, tos)| tos.iter().map(move |to| (from, to)))
    }

    pub fn node_count(&self) -> usize {
        self.forward.len()
    }

    fn neighbours(&self, node: &NodeId, dir: Direction) -> Option<&BTreeSet<NodeId>> {
        match dir {
            Direction::Downstream => self.forward.get(node),
            Direction::Upstream => self.backward.get(node),
        }
    }

    /// `origin` plus every node reachable from it in `dir`. Breadth-first, so
    /// the cost is linear in the size of the answer's neighbourhood.
    pub fn closure(&self, origin: &NodeId, dir: Direction) -> BTreeSet<NodeId> {
        let mut seen = BTreeSet::new();
        if !self.contains(origin) {
            return seen;
        }
        let mut queue = VecDeque::from([origin.clone()]);
        seen.insert(origin.clone());
        while let Some(node) = queue.pop_front() {
            for next in self.neighbours(&node, dir).into_iter().flatten() {
                if seen.insert(next.clone()) {
                    queue.push_back(next.clone());
                }
            }
        }
        seen
    }

    /// Edges of the subgraph induced by `nodes`.
    pub fn induced_edges(&self, nodes: &BTreeSet<NodeId>) -> BTreeSet<(NodeId, NodeId)> {
        nodes
            .iter()
            .flat_map(|from| {
                self.forward[from].iter().filter(|to| nodes.contains(*to)).map(move |to| (from.clone(), to.clone()))
            })
            .collect()
    }

    /// Strongly connected components that contain a cycle, each sorted, in
    /// ascending order of their smallest member.
    pub fn cyclic_components(&self) -> Vec<Vec<NodeId>> {
        let nodes: Vec<&NodeId> = self.forward.keys().collect();
        let index_of: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let succ: Vec<Vec<usize>> =
            nodes.iter().map(|n| self.forward[*n].iter().map(|m| index_of[m]).collect()).collect();

        let sccs = tarjan(&succ);
        let mut cyclic: Vec<Vec<NodeId>> = sccs
            .into_iter()
            .filter(|scc| scc.len() > 1 || succ[scc[0]].contains(&scc[0]))
            .map(|scc| {
                let mut members: Vec<NodeId> = scc.into_iter().map(|i| nodes[i].clone()).collect();
                members.sort();
                members
            })
            .collect();
        cyclic.sort();
        cyclic
    }
}

/// Iterative Tarjan SCC over an adjacency list.
fn tarjan(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = succ.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        // (node, next successor position)
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = succ[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut scc = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    scc.push(w);
                    if w == v {
                        break;
                    }
                }
                out.push(scc);
            }
        }
    }
    out
}

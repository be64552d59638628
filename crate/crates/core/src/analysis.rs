//! Attractors, hopeful vertices and desperation.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::model::{ArrivalInstance, NodeId, NodeKind};

/// Vertices from which the controller forces a visit to `targets`.
///
/// `succ[v]` lists the successors of `v`; `adversarial[v]` marks vertices
/// where the opponent moves, every other vertex belongs to the controller.
/// Computes the least fixpoint with a worklist over reversed edges and a
/// per-vertex counter of successors still outside the set.
pub fn attractor_reach(succ: &[Vec<usize>], adversarial: &[bool], targets: &[usize]) -> Vec<bool> {
    let n = succ.len();
    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            pred[w].push(v);
        }
    }
    let mut remaining: Vec<usize> = succ.iter().map(Vec::len).collect();
    let mut inside = vec![false; n];
    let mut queue = VecDeque::new();
    for &t in targets {
        if !inside[t] {
            inside[t] = true;
            queue.push_back(t);
        }
    }
    while let Some(w) = queue.pop_front() {
        for &v in &pred[w] {
            if inside[v] {
                continue;
            }
            remaining[v] -= 1;
            if !adversarial[v] || remaining[v] == 0 {
                inside[v] = true;
                queue.push_back(v);
            }
        }
    }
    inside
}

/// Hopeful vertices and the desperation of each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HopeReport {
    pub hopeful: Vec<bool>,
    /// Shortest-path distance to the target inside the hopeful region.
    pub desperation: BTreeMap<NodeId, usize>,
}

impl HopeReport {
    pub fn is_hopeful(&self, v: NodeId) -> bool {
        self.hopeful[v.0]
    }

    /// An edge is hopeful iff its head is.
    pub fn is_hopeful_edge(&self, _v: NodeId, w: NodeId) -> bool {
        self.hopeful[w.0]
    }

    pub fn hopeful_vertices(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.hopeful.iter().enumerate().filter(|(_, &h)| h).map(|(i, _)| NodeId(i))
    }

    pub fn to_json(&self, inst: &ArrivalInstance) -> HopeJson {
        HopeJson {
            hopeful: self.hopeful_vertices().map(|v| inst.name(v).to_string()).collect(),
            not_hopeful: inst
                .node_ids()
                .filter(|&v| !self.is_hopeful(v))
                .map(|v| inst.name(v).to_string())
                .collect(),
            desperation: self
                .desperation
                .iter()
                .map(|(v, d)| (inst.name(*v).to_string(), *d))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HopeJson {
    pub hopeful: Vec<String>,
    pub not_hopeful: Vec<String>,
    pub desperation: BTreeMap<String, usize>,
}

pub(crate) fn successor_lists(inst: &ArrivalInstance) -> Vec<Vec<usize>> {
    inst.node_ids()
        .map(|v| inst.successors(v).iter().map(|w| w.0).collect())
        .collect()
}

pub fn hopeful_set(inst: &ArrivalInstance) -> HopeReport {
    let succ = successor_lists(inst);
    let adversarial: Vec<bool> = inst.node_ids().map(|v| inst.kind(v) == NodeKind::MinPlayer).collect();
    let hopeful = attractor_reach(&succ, &adversarial, &[inst.target().0]);

    let mut pred: Vec<Vec<usize>> = vec![Vec::new(); succ.len()];
    for (v, ws) in succ.iter().enumerate() {
        for &w in ws {
            if hopeful[v] && hopeful[w] && v != w {
                pred[w].push(v);
            }
        }
    }
    let mut desperation = BTreeMap::new();
    let mut queue = VecDeque::from([(inst.target().0, 0usize)]);
    desperation.insert(inst.target(), 0);
    while let Some((w, d)) = queue.pop_front() {
        for &v in &pred[w] {
            if let std::collections::btree_map::Entry::Vacant(e) = desperation.entry(NodeId(v)) {
                e.insert(d + 1);
                queue.push_back((v, d + 1));
            }
        }
    }
    HopeReport { hopeful, desperation }
}

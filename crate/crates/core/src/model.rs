//! Instance data model, game states and the transition relation.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

/// Opaque vertex index. Names live in a side table on the instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Random,
    Switch,
    #[serde(rename = "max")]
    MaxPlayer,
    #[serde(rename = "min")]
    MinPlayer,
    Target,
    Dead,
}

impl NodeKind {
    pub const ALL: [NodeKind; 6] = [
        NodeKind::Random,
        NodeKind::Switch,
        NodeKind::MaxPlayer,
        NodeKind::MinPlayer,
        NodeKind::Target,
        NodeKind::Dead,
    ];

    /// Keyword used by the text format.
    pub fn keyword(self) -> &'static str {
        match self {
            NodeKind::Random => "random",
            NodeKind::Switch => "switch",
            NodeKind::MaxPlayer => "max",
            NodeKind::MinPlayer => "min",
            NodeKind::Target => "target",
            NodeKind::Dead => "dead",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        NodeKind::ALL.into_iter().find(|k| k.keyword() == word)
    }

    pub fn is_player(self) -> bool {
        matches!(self, NodeKind::MaxPlayer | NodeKind::MinPlayer)
    }

    pub fn is_absorbing(self) -> bool {
        matches!(self, NodeKind::Target | NodeKind::Dead)
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Which of the four behavioural node types occur in an instance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct KindSet {
    pub random: bool,
    pub switch: bool,
    pub max: bool,
    pub min: bool,
}

impl KindSet {
    pub fn has_players(&self) -> bool {
        self.max || self.min
    }

    /// Only random and switching behaviour.
    pub fn is_random_switch(&self) -> bool {
        !self.has_players()
    }

    /// Short label such as `{R,S,1}`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.random {
            parts.push("R");
        }
        if self.switch {
            parts.push("S");
        }
        if self.max {
            parts.push("1");
        }
        if self.min {
            parts.push("2");
        }
        format!("{{{}}}", parts.join(","))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub(crate) name: String,
    pub(crate) kind: NodeKind,
    /// Out-neighbours in adjacency order, without repeats.
    pub(crate) succ: Vec<NodeId>,
    /// Parallel to `succ`; only populated for random nodes.
    pub(crate) prob: Vec<Rational>,
    /// Switching order; only populated for switch nodes.
    pub(crate) order: Vec<NodeId>,
}

impl Node {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> NodeKind {
        self.kind
    }

    pub fn successors(&self) -> &[NodeId] {
        &self.succ
    }

    pub fn probabilities(&self) -> &[Rational] {
        &self.prob
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }
}

/// A validated generalised Arrival instance.
///
/// Every vertex has at least one out-edge, the target (and the dead end, if
/// any) carry only their self-loop, random rows sum to exactly one with
/// strictly positive entries, and every switching order uses exactly the
/// out-edges of its vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrivalInstance {
    nodes: Vec<Node>,
    start: NodeId,
    target: NodeId,
    dead: Option<NodeId>,
    /// Position of each switch node in the switching-position vector.
    switch_slot: Vec<Option<usize>>,
    switches: Vec<NodeId>,
    by_name: HashMap<String, NodeId>,
}

impl ArrivalInstance {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v.0]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.0 < self.nodes.len()
    }

    pub fn name(&self, v: NodeId) -> &str {
        &self.nodes[v.0].name
    }

    pub fn kind(&self, v: NodeId) -> NodeKind {
        self.nodes[v.0].kind
    }

    pub fn successors(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v.0].succ
    }

    pub fn order(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v.0].order
    }

    /// Probability of the edge `(v, w)` for a random node `v`.
    pub fn probability(&self, v: NodeId, w: NodeId) -> Option<&Rational> {
        let node = &self.nodes[v.0];
        if node.kind != NodeKind::Random {
            return None;
        }
        node.succ.iter().position(|&x| x == w).map(|i| &node.prob[i])
    }

    pub fn has_edge(&self, v: NodeId, w: NodeId) -> bool {
        self.nodes[v.0].succ.contains(&w)
    }

    pub fn find(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn start(&self) -> NodeId {
        self.start
    }

    pub fn target(&self) -> NodeId {
        self.target
    }

    pub fn dead(&self) -> Option<NodeId> {
        self.dead
    }

    pub fn kinds(&self) -> KindSet {
        let mut set = KindSet::default();
        for n in &self.nodes {
            match n.kind {
                NodeKind::Random => set.random = true,
                NodeKind::Switch => set.switch = true,
                NodeKind::MaxPlayer => set.max = true,
                NodeKind::MinPlayer => set.min = true,
                NodeKind::Target | NodeKind::Dead => {}
            }
        }
        set
    }

    /// Switch nodes in slot order.
    pub fn switch_nodes(&self) -> &[NodeId] {
        &self.switches
    }

    pub fn switch_slot(&self, v: NodeId) -> Option<usize> {
        self.switch_slot.get(v.0).copied().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.succ.len()).sum()
    }

    /// Total length of all switching orders.
    pub fn order_total(&self) -> usize {
        self.nodes.iter().map(|n| n.order.len()).sum()
    }

    /// Longest switching order (1 when there are no switch nodes).
    pub fn max_order_len(&self) -> usize {
        self.nodes.iter().map(|n| n.order.len()).max().unwrap_or(0).max(1)
    }

    /// `|Q|`, the number of switching positions.
    pub fn position_count(&self) -> BigUint {
        self.switches
            .iter()
            .fold(BigUint::one(), |acc, &v| acc * BigUint::from(self.order(v).len()))
    }

    pub fn initial_state(&self) -> GameState {
        GameState {
            vertex: self.start,
            switches: SwitchPosition(vec![0; self.switches.len()]),
        }
    }

    /// Validates raw parts and assembles an instance.
    pub(crate) fn from_parts(nodes: Vec<Node>, start: NodeId) -> Result<Self> {
        validate(&nodes, Some(start)).map_err(|issue| Error::model(issue.message))?;
        Ok(Self::assemble(nodes, start))
    }

    fn assemble(nodes: Vec<Node>, start: NodeId) -> Self {
        let target = NodeId(nodes.iter().position(|n| n.kind == NodeKind::Target).unwrap());
        let dead = nodes.iter().position(|n| n.kind == NodeKind::Dead).map(NodeId);
        let mut switch_slot = vec![None; nodes.len()];
        let mut switches = Vec::new();
        for (i, n) in nodes.iter().enumerate() {
            if n.kind == NodeKind::Switch {
                switch_slot[i] = Some(switches.len());
                switches.push(NodeId(i));
            }
        }
        let by_name = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.name.clone(), NodeId(i)))
            .collect();
        ArrivalInstance {
            nodes,
            start,
            target,
            dead,
            switch_slot,
            switches,
            by_name,
        }
    }
}

/// A violated instance requirement, attributed to a vertex when possible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Issue {
    pub node: Option<NodeId>,
    pub message: String,
}

impl Issue {
    fn at(node: usize, message: String) -> Self {
        Issue {
            node: Some(NodeId(node)),
            message,
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Issue {
            node: None,
            message: message.into(),
        }
    }
}

pub(crate) fn validate(nodes: &[Node], start: Option<NodeId>) -> std::result::Result<(), Issue> {
    let mut names = HashSet::new();
    for (i, n) in nodes.iter().enumerate() {
        if !names.insert(n.name.as_str()) {
            return Err(Issue::at(i, format!("duplicate node name '{}'", n.name)));
        }
    }
    let targets: Vec<_> = (0..nodes.len()).filter(|&i| nodes[i].kind == NodeKind::Target).collect();
    match targets.len() {
        0 => return Err(Issue::global("missing target node")),
        1 => {}
        _ => return Err(Issue::at(targets[1], "more than one target node".into())),
    }
    let deads: Vec<_> = (0..nodes.len()).filter(|&i| nodes[i].kind == NodeKind::Dead).collect();
    if deads.len() > 1 {
        return Err(Issue::at(deads[1], "more than one dead node".into()));
    }
    match start {
        None => return Err(Issue::global("missing start node")),
        Some(s) if s.0 >= nodes.len() => return Err(Issue::global("start node out of range")),
        _ => {}
    }
    for (i, n) in nodes.iter().enumerate() {
        let name = &n.name;
        if n.succ.is_empty() {
            return Err(Issue::at(i, format!("node '{name}' has no out-edge")));
        }
        let mut seen = HashSet::new();
        for &w in &n.succ {
            if w.0 >= nodes.len() {
                return Err(Issue::at(i, format!("edge from '{name}' to unknown vertex")));
            }
            if !seen.insert(w) {
                return Err(Issue::at(
                    i,
                    format!("parallel edge '{name}' -> '{}'", nodes[w.0].name),
                ));
            }
        }
        if n.kind.is_absorbing() && n.succ != [NodeId(i)] {
            return Err(Issue::at(
                i,
                format!("{} node '{name}' may only have its self-loop", n.kind),
            ));
        }
        if n.kind == NodeKind::Random {
            if n.prob.len() != n.succ.len() {
                return Err(Issue::at(i, format!("random node '{name}' lacks edge probabilities")));
            }
            if let Some(p) = n.prob.iter().find(|p| !p.is_positive() || **p > rational::one()) {
                return Err(Issue::at(
                    i,
                    format!("probability {} out of range at '{name}'", rational::to_ab(p)),
                ));
            }
            let total: Rational = n.prob.iter().sum();
            if !total.is_one() {
                return Err(Issue::at(
                    i,
                    format!(
                        "probability row of '{name}' sums to {}, not 1",
                        rational::to_ab(&total)
                    ),
                ));
            }
        } else if !n.prob.is_empty() {
            return Err(Issue::at(i, format!("probabilities given on non-random node '{name}'")));
        }
        if n.kind == NodeKind::Switch {
            if n.order.is_empty() {
                return Err(Issue::at(i, format!("switch node '{name}' has an empty order")));
            }
            if let Some(w) = n.order.iter().find(|w| !n.succ.contains(w)) {
                let wname = nodes.get(w.0).map(|x| x.name.as_str()).unwrap_or("?");
                return Err(Issue::at(
                    i,
                    format!("order entry not an edge: '{name}' -> '{wname}'"),
                ));
            }
            if let Some(w) = n.succ.iter().find(|w| !n.order.contains(w)) {
                return Err(Issue::at(
                    i,
                    format!("edge not used in order: '{name}' -> '{}'", nodes[w.0].name),
                ));
            }
        } else if !n.order.is_empty() {
            return Err(Issue::at(i, format!("order given on non-switch node '{name}'")));
        }
    }
    Ok(())
}

/// Incremental construction of an [`ArrivalInstance`].
///
/// Problems are collected and reported by [`InstanceBuilder::build`], so
/// generators can wire forward references freely. Target and dead nodes get
/// their self-loop automatically; a switch node declared only through its
/// order gets its edges from the order.
#[derive(Clone, Debug, Default)]
pub struct InstanceBuilder {
    nodes: Vec<Node>,
    by_name: HashMap<String, NodeId>,
    start: Option<NodeId>,
    uniform: HashSet<NodeId>,
    error: Option<String>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn fail(&mut self, msg: String) {
        if self.error.is_none() {
            self.error = Some(msg);
        }
    }

    pub fn node(&mut self, name: impl Into<String>, kind: NodeKind) -> NodeId {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            self.fail(format!("duplicate node name '{name}'"));
        }
        let id = NodeId(self.nodes.len());
        self.by_name.insert(name.clone(), id);
        self.nodes.push(Node {
            name,
            kind,
            succ: Vec::new(),
            prob: Vec::new(),
            order: Vec::new(),
        });
        id
    }

    pub fn lookup(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn kind(&self, v: NodeId) -> NodeKind {
        self.nodes[v.0].kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge(&mut self, u: NodeId, v: NodeId) -> &mut Self {
        if self.nodes[u.0].succ.contains(&v) {
            let msg = format!(
                "parallel edge '{}' -> '{}'",
                self.nodes[u.0].name, self.nodes[v.0].name
            );
            self.fail(msg);
        } else {
            self.nodes[u.0].succ.push(v);
        }
        self
    }

    pub fn random_edge(&mut self, u: NodeId, v: NodeId, p: Rational) -> &mut Self {
        if self.nodes[u.0].succ.contains(&v) {
            let msg = format!(
                "parallel edge '{}' -> '{}'",
                self.nodes[u.0].name, self.nodes[v.0].name
            );
            self.fail(msg);
        } else {
            self.nodes[u.0].succ.push(v);
            self.nodes[u.0].prob.push(p);
        }
        self
    }

    /// Uniform distribution over whatever out-edges `v` ends up with.
    pub fn uniform(&mut self, v: NodeId) -> &mut Self {
        self.uniform.insert(v);
        self
    }

    pub fn order(&mut self, v: NodeId, order: Vec<NodeId>) -> &mut Self {
        self.nodes[v.0].order = order;
        self
    }

    pub fn start(&mut self, v: NodeId) -> &mut Self {
        self.start = Some(v);
        self
    }

    /// Applies defaults without validating.
    fn finish_nodes(&mut self) {
        for (i, n) in self.nodes.iter_mut().enumerate() {
            if n.kind.is_absorbing() && n.succ.is_empty() {
                n.succ.push(NodeId(i));
            }
            if n.kind == NodeKind::Switch && n.succ.is_empty() {
                for &w in &n.order {
                    if !n.succ.contains(&w) {
                        n.succ.push(w);
                    }
                }
            }
            if self.uniform.contains(&NodeId(i)) && n.prob.is_empty() && !n.succ.is_empty() {
                let k = n.succ.len() as i64;
                n.prob = vec![rational::ratio(1, k); n.succ.len()];
            }
        }
    }

    /// Builds and validates, reporting the violated requirement with the
    /// offending vertex.
    pub fn build_detailed(mut self) -> std::result::Result<ArrivalInstance, Issue> {
        if let Some(msg) = self.error.take() {
            return Err(Issue::global(msg));
        }
        self.finish_nodes();
        validate(&self.nodes, self.start)?;
        Ok(ArrivalInstance::assemble(self.nodes, self.start.unwrap()))
    }

    pub fn build(self) -> Result<ArrivalInstance> {
        self.build_detailed().map_err(|issue| Error::model(issue.message))
    }
}

/// Current switching position `q`, one counter per switch node in slot order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SwitchPosition(pub Vec<u32>);

impl SwitchPosition {
    pub fn get(&self, slot: usize) -> u32 {
        self.0[slot]
    }
}

impl fmt::Display for SwitchPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join("."))
    }
}

/// A state `(v, q)` of the game.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GameState {
    pub vertex: NodeId,
    pub switches: SwitchPosition,
}

impl GameState {
    pub fn new(vertex: NodeId, switches: Vec<u32>) -> Self {
        GameState {
            vertex,
            switches: SwitchPosition(switches),
        }
    }

    /// Human-readable `name@q` label.
    pub fn label(&self, inst: &ArrivalInstance) -> String {
        if self.switches.0.is_empty() {
            inst.name(self.vertex).to_string()
        } else {
            format!("{}@{}", inst.name(self.vertex), self.switches)
        }
    }
}

fn check_state(inst: &ArrivalInstance, s: &GameState) -> Result<()> {
    if !inst.contains(s.vertex) {
        return Err(Error::model(format!("unknown vertex {}", s.vertex)));
    }
    if s.switches.0.len() != inst.switch_nodes().len() {
        return Err(Error::model("switching position has the wrong number of counters"));
    }
    for (slot, &v) in inst.switch_nodes().iter().enumerate() {
        if s.switches.0[slot] as usize >= inst.order(v).len() {
            return Err(Error::model(format!(
                "switching position of '{}' out of range",
                inst.name(v)
            )));
        }
    }
    Ok(())
}

/// The unique successor of a switch state and the updated position.
pub(crate) fn switch_step(inst: &ArrivalInstance, s: &GameState) -> GameState {
    let v = s.vertex;
    let slot = inst.switch_slot(v).expect("switch node has a slot");
    let order = inst.order(v);
    let pos = s.switches.0[slot] as usize;
    let mut q = s.switches.clone();
    q.0[slot] = ((pos + 1) % order.len()) as u32;
    GameState {
        vertex: order[pos],
        switches: q,
    }
}

/// `Valid(v, q)`: the states reachable in one transition. Never empty.
pub fn valid_successors(inst: &ArrivalInstance, s: &GameState) -> Result<Vec<GameState>> {
    check_state(inst, s)?;
    let v = s.vertex;
    Ok(match inst.kind(v) {
        NodeKind::Switch => vec![switch_step(inst, s)],
        // random rows only hold positive probabilities, so every edge counts
        _ => inst
            .successors(v)
            .iter()
            .map(|&w| GameState {
                vertex: w,
                switches: s.switches.clone(),
            })
            .collect(),
    })
}

/// Probability of the transition `from -> to` for a non-player state.
pub fn step_probability(inst: &ArrivalInstance, from: &GameState, to: &GameState) -> Result<Rational> {
    check_state(inst, from)?;
    check_state(inst, to)?;
    let v = from.vertex;
    match inst.kind(v) {
        NodeKind::MaxPlayer | NodeKind::MinPlayer => Err(Error::contract(format!(
            "'{}' is a player node and has no fixed distribution",
            inst.name(v)
        ))),
        NodeKind::Switch => Ok(if switch_step(inst, from) == *to {
            rational::one()
        } else {
            rational::zero()
        }),
        NodeKind::Random | NodeKind::Target | NodeKind::Dead => {
            if from.switches != to.switches {
                return Ok(rational::zero());
            }
            Ok(match inst.kind(v) {
                NodeKind::Random => inst.probability(v, to.vertex).cloned().unwrap_or_else(Rational::zero),
                _ if to.vertex == v => rational::one(),
                _ => rational::zero(),
            })
        }
    }
}

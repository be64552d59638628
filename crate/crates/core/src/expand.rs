//! The expanded game over `V x Q` and the pruned substochastic system.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use num_traits::Zero;

use crate::analysis::attractor_reach;
use crate::error::{Error, Result};
use crate::model::{ArrivalInstance, GameState, InstanceBuilder, NodeId, NodeKind};
use crate::rational::{self, Rational};

pub const DEFAULT_BUDGET: usize = 2_000_000;

/// Bit layout packing a switching position into `u64` words.
#[derive(Clone, Debug)]
pub(crate) struct Layout {
    /// (word, shift, width) per switch slot.
    fields: Vec<(usize, u32, u32)>,
    words: usize,
}

impl Layout {
    pub(crate) fn new(inst: &ArrivalInstance) -> Self {
        let mut fields = Vec::new();
        let (mut word, mut shift) = (0usize, 0u32);
        for &v in inst.switch_nodes() {
            let len = inst.order(v).len() as u64;
            let width = 64 - (len - 1).leading_zeros();
            if shift + width > 64 {
                word += 1;
                shift = 0;
            }
            fields.push((word, shift, width));
            shift += width;
        }
        let words = if fields.is_empty() { 0 } else { word + 1 };
        Layout { fields, words }
    }

    fn get(&self, key: &[u64], slot: usize) -> u32 {
        let (w, s, width) = self.fields[slot];
        if width == 0 {
            return 0;
        }
        ((key[w] >> s) & ((1u64 << width) - 1)) as u32
    }

    fn set(&self, key: &mut [u64], slot: usize, value: u32) {
        let (w, s, width) = self.fields[slot];
        if width == 0 {
            return;
        }
        let mask = ((1u64 << width) - 1) << s;
        key[w] = (key[w] & !mask) | ((value as u64) << s);
    }

    fn pack(&self, q: &[u32]) -> Vec<u64> {
        let mut key = vec![0; self.words];
        for (slot, &c) in q.iter().enumerate() {
            self.set(&mut key, slot, c);
        }
        key
    }

    fn unpack(&self, key: &[u64]) -> Vec<u32> {
        (0..self.fields.len()).map(|slot| self.get(key, slot)).collect()
    }
}

/// Explicit game graph on the states reachable from a root state.
///
/// Terminal states (target or dead vertex) have no successors. Random and
/// player states list successors parallel to the vertex's adjacency; switch
/// states have exactly one.
#[derive(Clone, Debug)]
pub struct ExpandedGame {
    layout: Layout,
    /// Packed counters, `layout.words` per state.
    keys: Vec<u64>,
    pub vertex: Vec<NodeId>,
    pub succ: Vec<Vec<u32>>,
}

impl ExpandedGame {
    pub fn len(&self) -> usize {
        self.vertex.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty()
    }

    pub fn state(&self, i: usize) -> GameState {
        let w = self.layout.words;
        GameState::new(self.vertex[i], self.layout.unpack(&self.keys[i * w..(i + 1) * w]))
    }

    pub fn kind(&self, inst: &ArrivalInstance, i: usize) -> NodeKind {
        inst.kind(self.vertex[i])
    }

    /// Probability attached to the `j`-th successor of random state `i`.
    pub fn prob<'a>(&self, inst: &'a ArrivalInstance, i: usize, j: usize) -> &'a Rational {
        &inst.node(self.vertex[i]).probabilities()[j]
    }

    pub fn is_target(&self, inst: &ArrivalInstance, i: usize) -> bool {
        self.vertex[i] == inst.target()
    }

    /// States that reach a target state along some path.
    pub fn potential(&self, inst: &ArrivalInstance) -> Vec<bool> {
        let succ: Vec<Vec<usize>> = self.succ.iter().map(|s| s.iter().map(|&j| j as usize).collect()).collect();
        let targets: Vec<usize> = (0..self.len()).filter(|&i| self.is_target(inst, i)).collect();
        attractor_reach(&succ, &vec![false; self.len()], &targets)
    }
}

/// Forward exploration of the states reachable from `root`.
pub fn explore_from(inst: &ArrivalInstance, root: &GameState, budget: usize) -> Result<ExpandedGame> {
    let layout = Layout::new(inst);
    let w = layout.words;
    let mut index: HashMap<(usize, Box<[u64]>), u32> = HashMap::new();
    let mut keys: Vec<u64> = Vec::new();
    let mut vertex: Vec<NodeId> = Vec::new();
    let mut succ: Vec<Vec<u32>> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |v: NodeId,
                      key: Vec<u64>,
                      keys: &mut Vec<u64>,
                      vertex: &mut Vec<NodeId>,
                      succ: &mut Vec<Vec<u32>>,
                      queue: &mut VecDeque<u32>|
     -> Result<u32> {
        let entry = (v.0, key.into_boxed_slice());
        if let Some(&i) = index.get(&entry) {
            return Ok(i);
        }
        if vertex.len() >= budget {
            return Err(Error::Capacity {
                budget,
                during: "exploring reachable states",
            });
        }
        let i = vertex.len() as u32;
        keys.extend_from_slice(&entry.1);
        vertex.push(v);
        succ.push(Vec::new());
        index.insert(entry, i);
        queue.push_back(i);
        Ok(i)
    };

    let root_key = layout.pack(&root.switches.0);
    intern(root.vertex, root_key, &mut keys, &mut vertex, &mut succ, &mut queue)?;
    while let Some(i) = queue.pop_front() {
        let i = i as usize;
        let v = vertex[i];
        let key: Vec<u64> = keys[i * w..(i + 1) * w].to_vec();
        let out: Vec<u32> = match inst.kind(v) {
            NodeKind::Target | NodeKind::Dead => Vec::new(),
            NodeKind::Switch => {
                let slot = inst.switch_slot(v).expect("switch slot");
                let order = inst.order(v);
                let pos = layout.get(&key, slot) as usize;
                let mut next = key.clone();
                layout.set(&mut next, slot, ((pos + 1) % order.len()) as u32);
                vec![intern(order[pos], next, &mut keys, &mut vertex, &mut succ, &mut queue)?]
            }
            _ => {
                let mut out = Vec::with_capacity(inst.successors(v).len());
                for &x in inst.successors(v) {
                    out.push(intern(x, key.clone(), &mut keys, &mut vertex, &mut succ, &mut queue)?);
                }
                out
            }
        };
        succ[i] = out;
    }
    Ok(ExpandedGame {
        layout,
        keys,
        vertex,
        succ,
    })
}

pub fn explore(inst: &ArrivalInstance, budget: usize) -> Result<ExpandedGame> {
    explore_from(inst, &inst.initial_state(), budget)
}

pub fn reachable_states(inst: &ArrivalInstance) -> Result<Vec<GameState>> {
    reachable_states_within(inst, DEFAULT_BUDGET)
}

pub fn reachable_states_within(inst: &ArrivalInstance, budget: usize) -> Result<Vec<GameState>> {
    let game = explore(inst, budget)?;
    Ok((0..game.len()).map(|i| game.state(i)).collect())
}

fn require_random_switch(inst: &ArrivalInstance, what: &str) -> Result<()> {
    if inst.kinds().has_players() {
        return Err(Error::contract(format!("{what} is defined for instances without player nodes")));
    }
    Ok(())
}

/// Membership oracle for the potential states of an `{R,S}` instance.
#[derive(Clone, Debug)]
pub struct Potential<'a> {
    inst: &'a ArrivalInstance,
    budget: usize,
    known: HashMap<GameState, bool>,
}

impl Potential<'_> {
    /// Whether some play from `state` reaches the target. States outside the
    /// initially explored fragment are explored on demand.
    pub fn contains(&mut self, state: &GameState) -> Result<bool> {
        if let Some(&b) = self.known.get(state) {
            return Ok(b);
        }
        crate::model::valid_successors(self.inst, state)?;
        let game = explore_from(self.inst, state, self.budget)?;
        let pot = game.potential(self.inst);
        for (i, p) in pot.into_iter().enumerate() {
            self.known.insert(game.state(i), p);
        }
        Ok(self.known[state])
    }
}

pub fn potential_states(inst: &ArrivalInstance) -> Result<Potential<'_>> {
    potential_states_within(inst, DEFAULT_BUDGET)
}

pub fn potential_states_within(inst: &ArrivalInstance, budget: usize) -> Result<Potential<'_>> {
    require_random_switch(inst, "Potential")?;
    let mut p = Potential {
        inst,
        budget,
        known: HashMap::new(),
    };
    p.contains(&inst.initial_state())?;
    Ok(p)
}

/// The pruned substochastic system over reachable, potential, non-target
/// states plus one aggregated target class.
#[derive(Clone, Debug)]
pub struct ExpandedSystem {
    /// Retained states; index `states.len()` is the target class.
    pub states: Vec<GameState>,
    pub kinds: Vec<NodeKind>,
    /// Sparse rows, sorted by column; the target-class row is empty.
    pub rows: Vec<Vec<(usize, Rational)>>,
    /// Index of the initial state, `None` when it is not potential.
    pub start: Option<usize>,
    /// Number of reachable states before pruning.
    pub reachable: usize,
}

impl ExpandedSystem {
    pub fn dim(&self) -> usize {
        self.states.len() + 1
    }

    pub fn star(&self) -> usize {
        self.states.len()
    }

    pub fn row_sum(&self, i: usize) -> Rational {
        self.rows[i].iter().map(|(_, p)| p).sum()
    }

    pub fn entry(&self, i: usize, j: usize) -> Rational {
        self.rows[i]
            .binary_search_by_key(&j, |(c, _)| *c)
            .map(|k| self.rows[i][k].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    /// Sparse triplet text: header lines then `row col a/b` per entry.
    pub fn to_triplets(&self) -> String {
        let mut out = format!("dim {}\n", self.dim());
        match self.start {
            Some(s) => writeln!(out, "start {s}").unwrap(),
            None => out.push_str("start none\n"),
        }
        writeln!(out, "star {}", self.star()).unwrap();
        for (i, row) in self.rows.iter().enumerate() {
            for (j, p) in row {
                writeln!(out, "{i} {j} {}", rational::to_ab(p)).unwrap();
            }
        }
        out
    }
}

pub fn modified_matrix(inst: &ArrivalInstance) -> Result<ExpandedSystem> {
    modified_matrix_within(inst, DEFAULT_BUDGET)
}

pub fn modified_matrix_within(inst: &ArrivalInstance, budget: usize) -> Result<ExpandedSystem> {
    require_random_switch(inst, "the modified matrix")?;
    let game = explore(inst, budget)?;
    Ok(system_from_game(inst, &game))
}

pub(crate) fn system_from_game(inst: &ArrivalInstance, game: &ExpandedGame) -> ExpandedSystem {
    let potential = game.potential(inst);
    let mut idx = vec![usize::MAX; game.len()];
    let mut states = Vec::new();
    let mut kinds = Vec::new();
    for i in 0..game.len() {
        if potential[i] && !game.is_target(inst, i) {
            idx[i] = states.len();
            states.push(game.state(i));
            kinds.push(game.kind(inst, i));
        }
    }
    let star = states.len();
    for (i, slot) in idx.iter_mut().enumerate() {
        if game.is_target(inst, i) {
            *slot = star;
        }
    }
    let mut rows = vec![Vec::new(); star + 1];
    for i in 0..game.len() {
        let r = idx[i];
        if r == usize::MAX || r == star {
            continue;
        }
        let mut acc: HashMap<usize, Rational> = HashMap::new();
        for (j, &s) in game.succ[i].iter().enumerate() {
            let c = idx[s as usize];
            if c == usize::MAX {
                continue;
            }
            let p = match game.kind(inst, i) {
                NodeKind::Random => game.prob(inst, i, j).clone(),
                _ => rational::one(),
            };
            *acc.entry(c).or_insert_with(Rational::zero) += p;
        }
        let mut row: Vec<(usize, Rational)> = acc.into_iter().collect();
        row.sort_by_key(|(c, _)| *c);
        rows[r] = row;
    }
    let start = match idx[0] {
        usize::MAX => None,
        s => Some(s),
    };
    ExpandedSystem {
        states,
        kinds,
        rows,
        start,
        reachable: game.len(),
    }
}

/// The explicit game over all of `V x Q` as an ordinary instance.
///
/// Vertex `v@q` keeps the kind of `v`, except that switch states become
/// random nodes with a single probability-one edge and target (dead)
/// states lead to a fresh target `t'` (dead end `d'`).
pub fn expand_game(inst: &ArrivalInstance) -> Result<ArrivalInstance> {
    expand_game_within(inst, DEFAULT_BUDGET)
}

pub fn expand_game_within(inst: &ArrivalInstance, budget: usize) -> Result<ArrivalInstance> {
    let positions = inst.position_count();
    let total = positions.clone() * num_bigint::BigUint::from(inst.len());
    if total > num_bigint::BigUint::from(budget) {
        return Err(Error::Capacity {
            budget,
            during: "building the full expanded game",
        });
    }
    let q_count: usize = positions.try_into().expect("checked against budget");
    let lens: Vec<u32> = inst.switch_nodes().iter().map(|&v| inst.order(v).len() as u32).collect();
    let decode = |mut code: usize| -> Vec<u32> {
        lens.iter()
            .map(|&l| {
                let c = (code % l as usize) as u32;
                code /= l as usize;
                c
            })
            .collect()
    };
    let encode = |q: &[u32]| -> usize { q.iter().zip(&lens).rev().fold(0, |acc, (&c, &l)| acc * l as usize + c as usize) };

    let label = |v: NodeId, q: &[u32]| -> String {
        let parts: Vec<String> = q.iter().map(u32::to_string).collect();
        format!("{}@{}", inst.name(v), parts.join("."))
    };
    let mut b = InstanceBuilder::new();
    let mut ids = vec![NodeId(0); inst.len() * q_count];
    for code in 0..q_count {
        let q = decode(code);
        for v in inst.node_ids() {
            let kind = match inst.kind(v) {
                NodeKind::Switch | NodeKind::Target | NodeKind::Dead => NodeKind::Random,
                k => k,
            };
            ids[code * inst.len() + v.0] = b.node(label(v, &q), kind);
        }
    }
    let fresh = |b: &InstanceBuilder, base: &str| -> String {
        let mut name = format!("{base}'");
        while b.lookup(&name).is_some() {
            name.push('\'');
        }
        name
    };
    let t_name = fresh(&b, inst.name(inst.target()));
    let t_new = b.node(t_name, NodeKind::Target);
    let d_new = inst.dead().map(|d| {
        let name = fresh(&b, inst.name(d));
        b.node(name, NodeKind::Dead)
    });
    for code in 0..q_count {
        let q = decode(code);
        for v in inst.node_ids() {
            let me = ids[code * inst.len() + v.0];
            match inst.kind(v) {
                NodeKind::Target => {
                    b.random_edge(me, t_new, rational::one());
                }
                NodeKind::Dead => {
                    b.random_edge(me, d_new.expect("dead present"), rational::one());
                }
                NodeKind::Switch => {
                    let next = crate::model::switch_step(inst, &GameState::new(v, q.clone()));
                    let to = ids[encode(&next.switches.0) * inst.len() + next.vertex.0];
                    b.random_edge(me, to, rational::one());
                }
                NodeKind::Random => {
                    for (w, p) in inst.successors(v).iter().zip(inst.node(v).probabilities()) {
                        b.random_edge(me, ids[code * inst.len() + w.0], p.clone());
                    }
                }
                NodeKind::MaxPlayer | NodeKind::MinPlayer => {
                    for w in inst.successors(v) {
                        b.edge(me, ids[code * inst.len() + w.0]);
                    }
                }
            }
        }
    }
    b.start(ids[inst.start().0]);
    b.build()
}
